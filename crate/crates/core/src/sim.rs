//! Monte Carlo validation of the random-coding achievability scheme with
//! decoder state information.
//!
//! Codebooks are drawn entrywise from the policy's piece distributions. The
//! decoder knows the state sequence, groups time indices into sub-chunks by
//! (policy piece, state), and accepts the first message whose sub-chunk
//! joint types are strongly typical for the product `p_i(x) W_s(y|x)`:
//! within `g` in max norm, and exactly zero on cells the product gives zero
//! mass (the method-of-types convention; without the zero-mass condition the
//! test cannot separate hypotheses at desk-scale blocklengths).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{total_variation, ChannelFamily};
use crate::error::{Error, Result};
use crate::policy::{Policy, StateProfile};
use crate::stopping::{round_to_symbols, stopping_time_integer, IntegerTau};

/// Desk-scale guard on the message length (codebooks hold `2^k` codewords).
pub const MAX_MESSAGE_BITS: u32 = 14;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// A realized random codebook.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub k: u32,
    /// `2^k` codewords over the input alphabet, each of length `n_total`.
    pub codewords: Vec<Vec<u8>>,
    /// Policy piece governing each time index.
    pub piece_map: Vec<usize>,
}

impl Codebook {
    pub fn n_total(&self) -> usize {
        self.piece_map.len()
    }

    pub fn num_messages(&self) -> usize {
        self.codewords.len()
    }
}

/// Decoder tuning knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Max-norm tolerance on sub-chunk joint types.
    pub g: f64,
    /// Relative decode-time inflation over the integer stopping time.
    pub delta: f64,
    /// Sub-chunks shorter than this are ignored by the decoder.
    pub min_subchunk: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            g: 0.1,
            delta: 0.25,
            min_subchunk: 4,
        }
    }
}

/// Per-sub-chunk diagnostics for the transmitted message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubchunkDiag {
    pub piece: usize,
    pub state: String,
    pub len: usize,
    /// Mean (over trials) of the transmitted codeword's joint-type max-norm
    /// deviation from the product distribution.
    pub type_distance: f64,
}

/// Tally of a simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOutcome {
    pub trials: u64,
    pub errors: u64,
    pub decode_time: usize,
    pub per_subchunk_diag: Vec<SubchunkDiag>,
}

/// The machine-readable simulation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub k: u32,
    pub delta: f64,
    pub g: f64,
    pub trials: u64,
    pub errors: u64,
    pub decode_time: usize,
    pub seed: u64,
    pub profile: String,
    pub policy: Policy,
    pub per_subchunk_diag: Vec<SubchunkDiag>,
}

/// Result of a codebook closeness check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaCloseReport {
    pub ok: bool,
    /// Prefix length with the largest averaged total-variation distance.
    pub worst_prefix: usize,
    pub worst_avg_tv: f64,
    /// Smallest prefix length whose averaged distance exceeds the bound.
    pub first_violation: Option<usize>,
}

/// Extra simulation switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Redraw the codebook every trial (ensemble-average error) instead of
    /// fixing one code for the whole run.
    pub ensemble: bool,
    /// Override the decode time computed from `delta`.
    pub decode_time_override: Option<usize>,
    pub allow_large_k: bool,
}

// ---------------------------------------------------------------------------
// Codebook generation
// ---------------------------------------------------------------------------

fn sample_index(rng: &mut ChaCha12Rng, probs: &[f64]) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if r < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Piece index governing each of the first `len` time indices, after scaling
/// piece durations by `k` with ties rounding up.
pub(crate) fn piece_map_for(policy: &Policy, k: u32, len: usize) -> Vec<usize> {
    let mut map = Vec::with_capacity(len);
    let mut boundary = 0u64;
    let mut piece = 0usize;
    let mut next = policy.pieces()[0]
        .duration
        .finite()
        .map(|d| round_to_symbols(d, k));
    for j in 0..len as u64 {
        while let Some(n) = next {
            if j < boundary + n {
                break;
            }
            boundary += n;
            piece += 1;
            next = policy.pieces()[piece].duration.finite().map(|d| round_to_symbols(d, k));
        }
        map.push(piece);
    }
    map
}

/// State index governing each of the first `len` time indices.
pub(crate) fn state_map_for(
    family: &ChannelFamily,
    profile: &StateProfile,
    k: u32,
    len: usize,
) -> Result<Vec<usize>> {
    let resolved = crate::stopping::resolve_profile(family, profile)?;
    let mut map = Vec::with_capacity(len);
    let mut boundary = 0u64;
    let mut block = 0usize;
    let mut next = resolved[0].1.map(|d| round_to_symbols(d, k));
    for j in 0..len as u64 {
        while let Some(n) = next {
            if j < boundary + n {
                break;
            }
            boundary += n;
            block += 1;
            next = resolved[block].1.map(|d| round_to_symbols(d, k));
        }
        map.push(resolved[block].0);
    }
    Ok(map)
}

/// Draws a `2^k`-codeword random codebook of length `n_total`, each entry
/// independent from the policy piece covering its time index. Deterministic
/// in `seed`.
pub fn generate_codebook(
    family: &ChannelFamily,
    policy: &Policy,
    k: u32,
    n_total: usize,
    seed: u64,
    allow_large_k: bool,
) -> Result<Codebook> {
    if k > MAX_MESSAGE_BITS && !allow_large_k {
        return Err(Error::MessageLengthGuard {
            k,
            max: MAX_MESSAGE_BITS,
        });
    }
    if n_total == 0 && k > 0 {
        return Err(Error::InvalidParameter("n_total must be >= 1".into()));
    }
    if policy.pieces()[0].dist.len() != family.input_size() {
        return Err(Error::DimensionMismatch(
            "policy alphabet does not match family input size".into(),
        ));
    }
    if family.input_size() > u8::MAX as usize {
        return Err(Error::InvalidParameter("input alphabet too large".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let piece_map = piece_map_for(policy, k, n_total);
    let m = 1usize << k;
    let mut codewords = Vec::with_capacity(m);
    for _ in 0..m {
        let mut word = Vec::with_capacity(n_total);
        for &piece in &piece_map {
            let probs = policy.pieces()[piece].dist.probs();
            word.push(sample_index(&mut rng, probs) as u8);
        }
        codewords.push(word);
    }
    Ok(Codebook {
        k,
        codewords,
        piece_map,
    })
}

// ---------------------------------------------------------------------------
// Delta-closeness
// ---------------------------------------------------------------------------

/// Verifies the prefix-averaged total-variation closeness of the codebook's
/// empirical per-entry marginals to the policy's product distribution: for
/// every prefix length `n`, the average of `TV(p_j, q_j)` over `j <= n` must
/// stay at or below `delta`.
pub fn check_delta_close(codebook: &Codebook, policy: &Policy, delta: f64) -> DeltaCloseReport {
    let m = codebook.num_messages() as f64;
    let mut running = 0.0f64;
    let mut worst_avg = 0.0f64;
    let mut worst_prefix = 0usize;
    let mut first_violation = None;
    let dim = policy.pieces()[0].dist.len();
    for (j, &piece) in codebook.piece_map.iter().enumerate() {
        let mut counts = vec![0.0f64; dim];
        for word in &codebook.codewords {
            counts[word[j] as usize] += 1.0;
        }
        for c in counts.iter_mut() {
            *c /= m;
        }
        running += total_variation(policy.pieces()[piece].dist.probs(), &counts);
        let avg = running / (j + 1) as f64;
        if avg > worst_avg || j == 0 {
            worst_avg = avg;
            worst_prefix = j + 1;
        }
        if avg > delta && first_violation.is_none() {
            first_violation = Some(j + 1);
        }
    }
    DeltaCloseReport {
        ok: first_violation.is_none(),
        worst_prefix,
        worst_avg_tv: worst_avg,
        first_violation,
    }
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

struct Subchunk {
    piece: usize,
    state: usize,
    indices: Vec<usize>,
}

/// Groups time indices by (piece, state); interleavings are handled by the
/// index lists, no contiguity assumed.
fn subchunks(piece_map: &[usize], state_map: &[usize]) -> Vec<Subchunk> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (j, (&p, &s)) in piece_map.iter().zip(state_map).enumerate() {
        groups.entry((p, s)).or_default().push(j);
    }
    groups
        .into_iter()
        .map(|((piece, state), indices)| Subchunk {
            piece,
            state,
            indices,
        })
        .collect()
}

/// Joint product targets `p_i(x) w_s(y|x)` per (piece, state).
fn target_for(
    family: &ChannelFamily,
    policy: &Policy,
    piece: usize,
    state: usize,
) -> Vec<Vec<f64>> {
    let p = policy.pieces()[piece].dist.probs();
    let w = &family.state(state).channel;
    (0..family.input_size())
        .map(|x| w.row(x).iter().map(|&wxy| p[x] * wxy).collect())
        .collect()
}

/// Max-norm distance of the sub-chunk joint type from the target, plus
/// whether any zero-mass cell was hit.
fn joint_type_deviation(
    codeword: &[u8],
    received: &[u8],
    indices: &[usize],
    target: &[Vec<f64>],
) -> (f64, bool) {
    let nx = target.len();
    let ny = target[0].len();
    let mut counts = vec![0u32; nx * ny];
    for &j in indices {
        counts[codeword[j] as usize * ny + received[j] as usize] += 1;
    }
    let n = indices.len() as f64;
    let mut max_dev = 0.0f64;
    let mut zero_hit = false;
    for x in 0..nx {
        for y in 0..ny {
            let t = counts[x * ny + y] as f64 / n;
            let q = target[x][y];
            if q == 0.0 && t > 0.0 {
                zero_hit = true;
            }
            max_dev = max_dev.max((t - q).abs());
        }
    }
    (max_dev, zero_hit)
}

/// Decodes `received` with full state information: returns the first message
/// (ascending index) whose every sub-chunk of length at least
/// `config.min_subchunk` is strongly typical within `config.g`, or message 0
/// when none passes.
pub fn dsi_decode(
    codebook: &Codebook,
    family: &ChannelFamily,
    policy: &Policy,
    profile: &StateProfile,
    received: &[u8],
    config: &DecoderConfig,
) -> Result<usize> {
    if !config.g.is_finite() || config.g <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "decoder tolerance g must be positive, got {}",
            config.g
        )));
    }
    if received.len() > codebook.n_total() {
        return Err(Error::LengthMismatch {
            got: received.len(),
            max: codebook.n_total(),
        });
    }
    let state_map = state_map_for(family, profile, codebook.k, received.len())?;
    let chunks = subchunks(&codebook.piece_map[..received.len()], &state_map);
    let targets: Vec<Vec<Vec<f64>>> = chunks
        .iter()
        .map(|c| target_for(family, policy, c.piece, c.state))
        .collect();
    'messages: for (m, codeword) in codebook.codewords.iter().enumerate() {
        for (chunk, target) in chunks.iter().zip(&targets) {
            if chunk.indices.len() < config.min_subchunk {
                continue;
            }
            let (dev, zero_hit) = joint_type_deviation(codeword, received, &chunk.indices, target);
            if zero_hit || dev > config.g {
                continue 'messages;
            }
        }
        return Ok(m);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// Simulation harness
// ---------------------------------------------------------------------------

/// Runs `trials` transmissions of uniform messages through the profile's
/// state sequence and tallies decoding errors. One codebook drawn from
/// `seed` is reused across trials; per-trial randomness comes from
/// per-trial RNG streams of the same seed.
pub fn run_sim(
    family: &ChannelFamily,
    policy: &Policy,
    profile: &StateProfile,
    k: u32,
    config: &DecoderConfig,
    trials: u64,
    seed: u64,
) -> Result<SimOutcome> {
    run_sim_with(
        family,
        policy,
        profile,
        k,
        config,
        trials,
        seed,
        &SimOptions::default(),
    )
}

/// [`run_sim`] with explicit options.
#[allow(clippy::too_many_arguments)]
pub fn run_sim_with(
    family: &ChannelFamily,
    policy: &Policy,
    profile: &StateProfile,
    k: u32,
    config: &DecoderConfig,
    trials: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimOutcome> {
    if !config.delta.is_finite() || config.delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time inflation delta must be positive, got {}",
            config.delta
        )));
    }
    let decode_time = match opts.decode_time_override {
        Some(n) => n,
        None => {
            let tau = match stopping_time_integer(family, policy, profile, k)? {
                IntegerTau::Finite(t) => t,
                IntegerTau::Unbounded => {
                    return Err(Error::InvalidParameter(
                        "policy accumulates no information on this profile".into(),
                    ))
                }
            };
            ((1.0 + config.delta) * tau as f64).ceil() as usize
        }
    };
    let base_codebook = if opts.ensemble {
        None
    } else {
        Some(generate_codebook(
            family,
            policy,
            k,
            decode_time,
            seed,
            opts.allow_large_k,
        )?)
    };

    let state_map = state_map_for(family, profile, k, decode_time)?;
    let mut errors = 0u64;
    let mut diag_acc: Vec<(usize, usize, usize, f64)> = Vec::new();

    for trial in 0..trials {
        let codebook_storage;
        let codebook = match &base_codebook {
            Some(cb) => cb,
            None => {
                let mut ensemble_seed = ChaCha12Rng::seed_from_u64(seed);
                ensemble_seed.set_stream(2 * trial + 2);
                codebook_storage = generate_codebook(
                    family,
                    policy,
                    k,
                    decode_time,
                    ensemble_seed.random(),
                    opts.allow_large_k,
                )?;
                &codebook_storage
            }
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(2 * trial + 1);
        let m = rng.random_range(0..codebook.num_messages() as u64) as usize;
        let codeword = &codebook.codewords[m];
        let mut received = Vec::with_capacity(decode_time);
        for j in 0..decode_time {
            let w = &family.state(state_map[j]).channel;
            received.push(sample_index(&mut rng, w.row(codeword[j] as usize)) as u8);
        }
        let decoded = dsi_decode(codebook, family, policy, profile, &received, config)?;
        if decoded != m {
            errors += 1;
        }
        // Transmitted-message type diagnostics.
        let chunks = subchunks(&codebook.piece_map, &state_map);
        if diag_acc.is_empty() {
            diag_acc = chunks
                .iter()
                .map(|c| (c.piece, c.state, c.indices.len(), 0.0))
                .collect();
        }
        for (i, chunk) in chunks.iter().enumerate() {
            let target = target_for(family, policy, chunk.piece, chunk.state);
            let (dev, _) = joint_type_deviation(codeword, &received, &chunk.indices, &target);
            diag_acc[i].3 += dev;
        }
    }

    let per_subchunk_diag = diag_acc
        .into_iter()
        .map(|(piece, state, len, total)| SubchunkDiag {
            piece,
            state: family.state(state).label.clone(),
            len,
            type_distance: if trials > 0 { total / trials as f64 } else { 0.0 },
        })
        .collect();

    Ok(SimOutcome {
        trials,
        errors,
        decode_time,
        per_subchunk_diag,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
