//! `avc`: capacity, stopping-time, competitive-ratio, regret, and Monte
//! Carlo subcommands over arbitrarily varying channel families.
//!
//! Exit codes: 0 on success, 1 when a reproduction check fails, 2 on usage,
//! parse, or input errors. With `--format json`, exactly one JSON document
//! goes to stdout; diagnostics go to stderr.

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use avc_competitive_core::adversary::{s_hat_1, s_hat_2, AdversarySpec};
use avc_competitive_core::channel::{capacity, example_family, ChannelFamily};
use avc_competitive_core::competitive::{
    optimize_cr, optimize_regret, reproduce_chain, scan_policies, Parametrization,
    PolicySearchSpace,
};
use avc_competitive_core::policy::{parse_policy_shorthand, Policy, StateProfile};
use avc_competitive_core::sim::{run_sim_with, DecoderConfig, SimOptions, SimReport};
use avc_competitive_core::stopping::{
    optimal_stopping_time, ratio, regret_value, stopping_time_fluid, stopping_time_integer,
    IntegerTau, Tau,
};

#[derive(Parser)]
#[command(
    name = "avc",
    version,
    about = "Competitive analysis of rateless codes over arbitrarily varying channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-state channel capacities and their maximizing inputs.
    Capacity(CapacityArgs),
    /// Stopping times of a policy against a state profile.
    Stopping(StoppingArgs),
    /// Optimize the worst-case competitive ratio over a policy grid.
    Cr(SearchArgs),
    /// Optimize the worst-case regret over a policy grid.
    Regret(SearchArgs),
    /// Monte Carlo decoding-error estimate for a random codebook.
    Simulate(SimulateArgs),
    /// Run the competitive-ratio chain checks on the example family.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct CapacityArgs {
    /// Channel family: a JSON file path, or `example`.
    #[arg(long, default_value = "example")]
    channel: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Capacity bracket tolerance in bits.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 400_000)]
    max_iter: u32,
}

#[derive(Args)]
struct StoppingArgs {
    #[arg(long, default_value = "example")]
    channel: String,
    /// Policy: `single:<p>`, `two:<p1>@<t>,<p2>`, or `@file.json`.
    #[arg(long)]
    policy: String,
    /// Profile blocks, e.g. `1^1.0,2^inf`.
    #[arg(long)]
    profile: String,
    /// Also compute the integer-model stopping time for this message length.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value = "example")]
    channel: String,
    /// Number of policy pieces.
    #[arg(long, default_value_t = 1)]
    pieces: usize,
    /// Distribution grid step (the grid is i * grid over [0,1]).
    #[arg(long, default_value_t = 1.0 / 60.0)]
    grid: f64,
    /// Switch-time grid step.
    #[arg(long, default_value_t = 0.125)]
    tgrid: f64,
    /// Switch-time range `a:b`.
    #[arg(long, default_value = "1:2")]
    trange: String,
    /// Adversary: `blocks:max=4,grid=0.0625[,horizon=4]` or
    /// `fixed:shat1+shat2[,grid=0.25]`.
    #[arg(long, default_value = "blocks:max=4,grid=0.0625")]
    adversary: String,
    /// Distribution parametrization.
    #[arg(long, value_enum, default_value = "symmetric")]
    parametrization: ParamArg,
    /// Refine the grid argmax by coordinate descent.
    #[arg(long)]
    refine: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParamArg {
    Symmetric,
    Simplex,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "example")]
    channel: String,
    #[arg(long, default_value = "single:0.6666666666666666")]
    policy: String,
    #[arg(long, default_value = "1^inf")]
    profile: String,
    /// Message length in bits.
    #[arg(long, default_value_t = 8)]
    k: u32,
    /// Decode-time inflation factor.
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Joint-type tolerance of the decoder.
    #[arg(long, default_value_t = 0.1)]
    g: f64,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sub-chunks shorter than this are ignored by the decoder.
    #[arg(long, default_value_t = 4)]
    min_subchunk: usize,
    /// Redraw the codebook every trial (ensemble-average error).
    #[arg(long)]
    ensemble: bool,
    /// Override the decode time in channel uses.
    #[arg(long)]
    decode_time: Option<usize>,
    /// Lift the desk-scale guard on k.
    #[arg(long)]
    allow_large_k: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, default_value = "example")]
    channel: String,
    /// Shrink grids and widen tolerances to 0.03.
    #[arg(long)]
    fast: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn main() -> ExitCode {
    // Die quietly when stdout is closed mid-stream (e.g. piped to head).
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    init_thread_pool();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Capacity(args) => cmd_capacity(args),
        Command::Stopping(args) => cmd_stopping(args),
        Command::Cr(args) => cmd_search(args, SearchKind::Ratio),
        Command::Regret(args) => cmd_search(args, SearchKind::Regret),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

/// Sizes the global worker pool from AVC_THREADS (>= 1) when set.
fn init_thread_pool() {
    if let Ok(text) = std::env::var("AVC_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_family(spec: &str) -> Result<ChannelFamily, String> {
    if spec == "example" {
        return Ok(example_family());
    }
    let text = std::fs::read_to_string(spec).map_err(|e| format!("cannot read {spec}: {e}"))?;
    ChannelFamily::from_json(&text).map_err(|e| format!("{spec}: {e}"))
}

fn load_policy(spec: &str) -> Result<Policy, String> {
    if let Some(path) = spec.strip_prefix('@') {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
        return Policy::from_json(&text).map_err(|e| format!("{path}: {e}"));
    }
    parse_policy_shorthand(spec).map_err(|e| e.to_string())
}

fn parse_trange(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| format!("trange `{text}` must look like `1:2`"))?;
    let a: f64 = a.parse().map_err(|_| format!("bad trange start `{a}`"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad trange end `{b}`"))?;
    Ok((a, b))
}

fn parse_adversary(text: &str, family: &ChannelFamily) -> Result<AdversarySpec, String> {
    if let Some(rest) = text.strip_prefix("blocks:") {
        let mut max_blocks = 4usize;
        let mut grid = 1.0 / 16.0;
        let mut horizon = 4.0f64;
        for part in rest.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("bad adversary option `{part}`"))?;
            match key {
                "max" => max_blocks = value.parse().map_err(|_| format!("bad max `{value}`"))?,
                "grid" => grid = value.parse().map_err(|_| format!("bad grid `{value}`"))?,
                "horizon" => horizon = value.parse().map_err(|_| format!("bad horizon `{value}`"))?,
                other => return Err(format!("unknown adversary option `{other}`")),
            }
        }
        return Ok(AdversarySpec::brute(max_blocks, grid, horizon));
    }
    if let Some(rest) = text.strip_prefix("fixed:") {
        let mut names = rest;
        let mut grid = 0.25f64;
        if let Some((head, opts)) = rest.split_once(',') {
            names = head;
            for part in opts.split(',') {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| format!("bad adversary option `{part}`"))?;
                match key {
                    "grid" => grid = value.parse().map_err(|_| format!("bad grid `{value}`"))?,
                    other => return Err(format!("unknown adversary option `{other}`")),
                }
            }
        }
        let mut profiles = Vec::new();
        for name in names.split('+') {
            match name {
                "shat1" => profiles.extend(s_hat_1(family).map_err(|e| e.to_string())?),
                "shat2" => profiles.extend(s_hat_2(family, grid).map_err(|e| e.to_string())?),
                other => return Err(format!("unknown fixed set `{other}`")),
            }
        }
        return Ok(AdversarySpec::fixed(profiles));
    }
    Err(format!(
        "adversary `{text}` must start with `blocks:` or `fixed:`"
    ))
}

fn tau_json(tau: Tau) -> serde_json::Value {
    match tau {
        Tau::Finite(t) => serde_json::json!(t),
        Tau::Unbounded => serde_json::json!("unbounded"),
    }
}

// ---------------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------------

fn cmd_capacity(args: CapacityArgs) -> Result<ExitCode, String> {
    let family = load_family(&args.channel)?;
    let mut rows = Vec::new();
    for st in family.states() {
        let cap = capacity(&st.channel, args.tol, args.max_iter).map_err(|e| e.to_string())?;
        rows.push((st.label.clone(), cap));
    }
    match args.format {
        Format::Json => {
            let doc = serde_json::json!({
                "states": rows.iter().map(|(label, cap)| serde_json::json!({
                    "label": label,
                    "capacity": cap.capacity,
                    "maximizer": cap.maximizer,
                    "iterations": cap.iterations,
                    "residual": cap.residual,
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        Format::Csv => {
            println!("label,capacity,iterations,residual");
            for (label, cap) in &rows {
                println!("{label},{},{},{}", cap.capacity, cap.iterations, cap.residual);
            }
        }
        Format::Text => {
            for (label, cap) in &rows {
                println!(
                    "state {label}: capacity {:.9} bits (maximizer {:?}, {} iterations)",
                    cap.capacity,
                    cap.maximizer.probs(),
                    cap.iterations
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// stopping
// ---------------------------------------------------------------------------

fn cmd_stopping(args: StoppingArgs) -> Result<ExitCode, String> {
    let family = load_family(&args.channel)?;
    let policy = load_policy(&args.policy)?;
    let profile = StateProfile::parse(&args.profile).map_err(|e| e.to_string())?;
    let fluid = stopping_time_fluid(&family, &policy, &profile).map_err(|e| e.to_string())?;
    let opt = optimal_stopping_time(&family, &profile).map_err(|e| e.to_string())?;
    let r = ratio(&family, &policy, &profile).map_err(|e| e.to_string())?;
    let g = regret_value(&family, &policy, &profile).map_err(|e| e.to_string())?;
    let integer = match args.k {
        Some(k) => Some(
            stopping_time_integer(&family, &policy, &profile, k).map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    match args.format {
        Format::Json => {
            let mut doc = serde_json::json!({
                "tau": tau_json(fluid.tau),
                "tau_star": tau_json(opt.tau),
                "ratio": r,
                "regret": g,
                "trace": fluid.trace,
            });
            if let (Some(k), Some(it)) = (args.k, integer) {
                doc["k"] = serde_json::json!(k);
                doc["integer_tau"] = match it {
                    IntegerTau::Finite(n) => serde_json::json!(n),
                    IntegerTau::Unbounded => serde_json::json!("unbounded"),
                };
            }
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        Format::Csv | Format::Text => {
            match fluid.tau {
                Tau::Finite(t) => println!("tau = {t}"),
                Tau::Unbounded => println!("tau = unbounded"),
            }
            match opt.tau {
                Tau::Finite(t) => println!("tau* = {t}"),
                Tau::Unbounded => println!("tau* = unbounded"),
            }
            println!("ratio = {r}");
            println!("regret = {g}");
            if let Some(it) = integer {
                match it {
                    IntegerTau::Finite(n) => println!("integer tau (k={}) = {n}", args.k.unwrap()),
                    IntegerTau::Unbounded => println!("integer tau = unbounded"),
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// cr / regret
// ---------------------------------------------------------------------------

enum SearchKind {
    Ratio,
    Regret,
}

fn cmd_search(args: SearchArgs, kind: SearchKind) -> Result<ExitCode, String> {
    let family = load_family(&args.channel)?;
    let adversary = parse_adversary(&args.adversary, &family)?;
    let t_range = parse_trange(&args.trange)?;
    let space = PolicySearchSpace {
        ell: args.pieces,
        p_grid: args.grid,
        t_grid: args.tgrid,
        t_range,
        parametrization: match args.parametrization {
            ParamArg::Symmetric => Parametrization::ExampleSymmetric,
            ParamArg::Simplex => Parametrization::FullSimplex,
        },
        refine: args.refine,
    };
    if args.format == Format::Csv {
        let rows = scan_policies(&family, &space, &adversary).map_err(|e| e.to_string())?;
        let mut header = String::new();
        let ell = space.ell;
        let per_piece = (rows[0].params.len() - (ell - 1)) / ell;
        for i in 1..=ell {
            if per_piece == 1 {
                write!(header, "p_{i},").unwrap();
            } else {
                for j in 1..=per_piece {
                    write!(header, "p_{i}_{j},").unwrap();
                }
            }
        }
        for i in 1..ell {
            write!(header, "t_{i},").unwrap();
        }
        header.push_str("worst_ratio,witness");
        println!("{header}");
        for row in &rows {
            let mut line = String::new();
            for v in &row.params {
                write!(line, "{v},").unwrap();
            }
            // Witness encodings contain commas; quote the field.
            write!(line, "{},\"{}\"", row.worst_ratio, row.witness).unwrap();
            println!("{line}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    match kind {
        SearchKind::Ratio => {
            let report = optimize_cr(&family, &space, &adversary).map_err(|e| e.to_string())?;
            match args.format {
                Format::Json => {
                    let doc = serde_json::json!({
                        "cr_lower": report.cr_lower,
                        "policy": report.best_policy,
                        "witness": report.worst_witness.to_string(),
                        "diagnostics": report.diagnostics,
                    });
                    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
                }
                _ => {
                    println!("cr_lower = {}", report.cr_lower);
                    println!("policy = {}", report.best_policy.to_json());
                    println!("witness = {}", report.worst_witness);
                }
            }
        }
        SearchKind::Regret => {
            let report = optimize_regret(&family, &space, &adversary).map_err(|e| e.to_string())?;
            match args.format {
                Format::Json => {
                    let doc = serde_json::json!({
                        "regret": report.regret,
                        "policy": report.best_policy,
                        "witness": report.worst_witness.to_string(),
                        "diagnostics": report.diagnostics,
                    });
                    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
                }
                _ => {
                    println!("regret = {}", report.regret);
                    println!("policy = {}", report.best_policy.to_json());
                    println!("witness = {}", report.worst_witness);
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, String> {
    let family = load_family(&args.channel)?;
    let policy = load_policy(&args.policy)?;
    let profile = StateProfile::parse(&args.profile).map_err(|e| e.to_string())?;
    let config = DecoderConfig {
        g: args.g,
        delta: args.delta,
        min_subchunk: args.min_subchunk,
    };
    let opts = SimOptions {
        ensemble: args.ensemble,
        decode_time_override: args.decode_time,
        allow_large_k: args.allow_large_k,
    };
    let outcome = run_sim_with(
        &family,
        &policy,
        &profile,
        args.k,
        &config,
        args.trials,
        args.seed,
        &opts,
    )
    .map_err(|e| e.to_string())?;
    let report = SimReport {
        k: args.k,
        delta: args.delta,
        g: args.g,
        trials: outcome.trials,
        errors: outcome.errors,
        decode_time: outcome.decode_time,
        seed: args.seed,
        profile: profile.to_string(),
        policy,
        per_subchunk_diag: outcome.per_subchunk_diag,
    };
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        _ => {
            println!(
                "k={} trials={} errors={} rate={:.4} decode_time={}",
                report.k,
                report.trials,
                report.errors,
                report.errors as f64 / report.trials.max(1) as f64,
                report.decode_time
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

fn cmd_reproduce(args: ReproduceArgs) -> Result<ExitCode, String> {
    let family = load_family(&args.channel)?;
    let report = reproduce_chain(&family, args.fast).map_err(|e| e.to_string())?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        _ => {
            let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
            println!(
                "(a) single-piece value   {:.6}  closed form {:.6}  brute {:.6}  [{}]",
                report.cr1_fixed_set,
                report.cr1_closed_form,
                report.cr1_brute,
                flag(report.pass_a)
            );
            println!(
                "(b) two-piece lower bound {:.6}  (policy p1={:.6}, t={:.2}, p2={:.6}; case beta {:.6})  [{}]",
                report.cr2_lower,
                report.cr2_policy[0],
                report.cr2_policy[1],
                report.cr2_policy[2],
                report.case_split_beta,
                flag(report.pass_b)
            );
            println!(
                "(c) fixed-set upper bound {:.6}  at (p1, p2) = ({:.6}, {:.6}), case {}  [{}]",
                report.cr_upper,
                report.cr_upper_argmax[0],
                report.cr_upper_argmax[1],
                report.cr_upper_case,
                flag(report.pass_c)
            );
            println!(
                "separation (b) - (a) = {:.6}  [{}]",
                report.separation,
                flag(report.pass_separation)
            );
            println!("overall: {}", flag(report.all_pass));
        }
    }
    if report.all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
