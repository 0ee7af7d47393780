//! Worst-case state-sequence search for a fixed policy.
//!
//! The brute-force mode enumerates block-form profiles: up to `max_blocks`
//! constant-state blocks with durations on a grid, the last block extending
//! forever. Adjacent blocks with equal states are redundant (they merge into
//! a shorter profile that is also enumerated), so state patterns alternate.
//! The minimum over this restricted family is an upper bound on the true
//! infimum over all state sequences.

use crate::channel::{is_example_family, ChannelFamily};
use crate::error::{Error, Result};
use crate::policy::{Policy, StateProfile};
use crate::stopping::{fluid_sweep, piece_durations, rate_table, ratio_from_taus};

// ---------------------------------------------------------------------------
// AdversarySpec
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryMode {
    BruteBlocks,
    FixedSet,
}

/// Search-space description for [`worst_case`].
#[derive(Debug, Clone)]
pub struct AdversarySpec {
    pub mode: AdversaryMode,
    /// Maximum number of blocks, counting the infinite tail.
    pub max_blocks: usize,
    /// Duration grid step in units of k.
    pub duration_grid: f64,
    /// Upper bound on the total finite-block duration of enumerated profiles.
    pub horizon: f64,
    pub fixed_profiles: Option<Vec<StateProfile>>,
}

impl AdversarySpec {
    pub fn brute(max_blocks: usize, duration_grid: f64, horizon: f64) -> Self {
        Self {
            mode: AdversaryMode::BruteBlocks,
            max_blocks,
            duration_grid,
            horizon,
            fixed_profiles: None,
        }
    }

    pub fn fixed(profiles: Vec<StateProfile>) -> Self {
        Self {
            mode: AdversaryMode::FixedSet,
            max_blocks: 0,
            duration_grid: 0.0,
            horizon: 0.0,
            fixed_profiles: Some(profiles),
        }
    }

    /// A horizon that no stopping time of interest can exceed when the
    /// policy tail has a positive rate under every state: the finite policy
    /// duration plus the worst tail crossing time.
    pub fn default_horizon(family: &ChannelFamily, policy: &Policy) -> Result<f64> {
        let rates = rate_table(family, policy)?;
        let tail = rates.last().expect("policy has pieces");
        let min_positive = tail
            .iter()
            .copied()
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min);
        let tail_time = if min_positive.is_finite() {
            1.0 / min_positive
        } else {
            1.0
        };
        Ok(policy.finite_duration() + tail_time)
    }
}

/// Outcome of a worst-case search. In brute mode the ratio is an upper bound
/// on the true infimum (the adversary is restricted to block profiles).
#[derive(Debug, Clone)]
pub struct WorstCaseResult {
    pub ratio: f64,
    pub witness: StateProfile,
    pub evaluations: u64,
}

// ---------------------------------------------------------------------------
// worst_case
// ---------------------------------------------------------------------------

struct ProfileEval<'a> {
    rates: Vec<Vec<f64>>,
    caps: Vec<f64>,
    piece_durs: Vec<Option<f64>>,
    family: &'a ChannelFamily,
}

impl<'a> ProfileEval<'a> {
    fn new(family: &'a ChannelFamily, policy: &Policy) -> Result<Self> {
        Ok(Self {
            rates: rate_table(family, policy)?,
            caps: family.capacities(),
            piece_durs: piece_durations(policy),
            family,
        })
    }

    fn ratio(&self, blocks: &[(usize, Option<f64>)]) -> f64 {
        let opt = fluid_sweep(&[None], blocks, |_, s| self.caps[s], false).0;
        let pol = fluid_sweep(&self.piece_durs, blocks, |p, s| self.rates[p][s], false).0;
        ratio_from_taus(opt, pol)
    }

    fn regret(&self, blocks: &[(usize, Option<f64>)]) -> f64 {
        let opt = fluid_sweep(&[None], blocks, |_, s| self.caps[s], false).0;
        let pol = fluid_sweep(&self.piece_durs, blocks, |p, s| self.rates[p][s], false).0;
        opt.inverse() - pol.inverse()
    }

    fn encode(&self, blocks: &[(usize, Option<f64>)]) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (i, &(s, d)) in blocks.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let label = &self.family.state(s).label;
            match d {
                Some(d) => write!(out, "{label}^{d}").unwrap(),
                None => write!(out, "{label}^inf").unwrap(),
            }
        }
        out
    }

    fn to_profile(&self, encoded: &str) -> StateProfile {
        StateProfile::parse(encoded).expect("enumerated profiles are well-formed")
    }
}

/// Minimizes the per-profile competitive ratio over the adversary's search
/// set and returns the minimizing ratio with a witness profile. Ties are
/// broken by lexicographic order of the profile encoding, independent of
/// enumeration order.
pub fn worst_case(
    family: &ChannelFamily,
    policy: &Policy,
    spec: &AdversarySpec,
) -> Result<WorstCaseResult> {
    let (value, witness, evaluations) =
        search_min(family, policy, spec, |eval, blocks| eval.ratio(blocks))?;
    Ok(WorstCaseResult {
        ratio: value,
        witness,
        evaluations,
    })
}

/// Maximizes the per-profile regret over the adversary's search set.
pub fn worst_regret(
    family: &ChannelFamily,
    policy: &Policy,
    spec: &AdversarySpec,
) -> Result<WorstRegretResult> {
    let (value, witness, evaluations) =
        search_min(family, policy, spec, |eval, blocks| -eval.regret(blocks))?;
    Ok(WorstRegretResult {
        regret: -value,
        witness,
        evaluations,
    })
}

/// Outcome of a worst-regret search.
#[derive(Debug, Clone)]
pub struct WorstRegretResult {
    pub regret: f64,
    pub witness: StateProfile,
    pub evaluations: u64,
}

fn search_min(
    family: &ChannelFamily,
    policy: &Policy,
    spec: &AdversarySpec,
    score: impl Fn(&ProfileEval, &[(usize, Option<f64>)]) -> f64,
) -> Result<(f64, StateProfile, u64)> {
    let eval = ProfileEval::new(family, policy)?;
    let mut best: Option<(f64, String)> = None;
    let mut evaluations = 0u64;
    match spec.mode {
        AdversaryMode::FixedSet => {
            let profiles = spec
                .fixed_profiles
                .as_ref()
                .filter(|p| !p.is_empty())
                .ok_or_else(|| Error::EmptySearchSpace("fixed adversary has no profiles".into()))?;
            for profile in profiles {
                let blocks = crate::stopping::resolve_profile(family, profile)?;
                let v = score(&eval, &blocks);
                evaluations += 1;
                consider(&mut best, v, || profile.to_string());
            }
        }
        AdversaryMode::BruteBlocks => {
            if spec.max_blocks == 0 {
                return Err(Error::InvalidParameter("max_blocks must be >= 1".into()));
            }
            if !spec.duration_grid.is_finite() || spec.duration_grid <= 0.0 {
                return Err(Error::InvalidParameter("duration_grid must be > 0".into()));
            }
            if !spec.horizon.is_finite() || spec.horizon <= 0.0 {
                return Err(Error::InvalidParameter("horizon must be > 0".into()));
            }
            let units = (spec.horizon / spec.duration_grid + 1e-9).floor() as u64;
            let mut buf: Vec<(usize, Option<f64>)> = Vec::with_capacity(spec.max_blocks);
            enumerate_blocks(
                family.num_states(),
                spec.max_blocks,
                spec.duration_grid,
                units,
                &mut buf,
                &mut |blocks| {
                    let v = score(&eval, blocks);
                    evaluations += 1;
                    consider(&mut best, v, || eval.encode(blocks));
                },
            );
        }
    }
    let (value, enc) =
        best.ok_or_else(|| Error::EmptySearchSpace("no profiles enumerated".into()))?;
    Ok((value, eval.to_profile(&enc), evaluations))
}

/// Keeps the smaller ratio; on exact ties keeps the lexicographically
/// smaller encoding so the reduction is order-independent.
fn consider(best: &mut Option<(f64, String)>, r: f64, encode: impl FnOnce() -> String) {
    match best {
        None => *best = Some((r, encode())),
        Some((v, enc)) => {
            if r < *v {
                *best = Some((r, encode()));
            } else if r == *v {
                let e = encode();
                if e < *enc {
                    *enc = e;
                }
            }
        }
    }
}

/// Depth-first enumeration of alternating-state block profiles. Finite
/// durations are positive multiples of `grid` with total at most
/// `budget_units * grid`; every profile ends with an infinite block.
fn enumerate_blocks(
    num_states: usize,
    max_blocks: usize,
    grid: f64,
    budget_units: u64,
    buf: &mut Vec<(usize, Option<f64>)>,
    f: &mut impl FnMut(&[(usize, Option<f64>)]),
) {
    let prev = buf.last().map(|&(s, _)| s);
    for s in 0..num_states {
        if prev == Some(s) {
            continue;
        }
        buf.push((s, None));
        f(buf);
        buf.pop();
        if buf.len() + 2 <= max_blocks {
            for m in 1..=budget_units {
                let d = m as f64 * grid;
                buf.push((s, Some(d)));
                enumerate_blocks(num_states, max_blocks, grid, budget_units - m, buf, f);
                buf.pop();
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fixed adversary sets for the example family
// ---------------------------------------------------------------------------

fn require_example(family: &ChannelFamily) -> Result<()> {
    if is_example_family(family) {
        Ok(())
    } else {
        Err(Error::InvalidFamily(
            "fixed adversary sets are defined for the built-in example family only".into(),
        ))
    }
}

/// The two profiles with a unit prefix of state 1 followed by a constant
/// tail: `1^inf` and `1^1,2^inf`.
pub fn s_hat_1(family: &ChannelFamily) -> Result<Vec<StateProfile>> {
    require_example(family)?;
    Ok(vec![
        StateProfile::from_prefix_and_tail(&[("1", 1.0)], "1")?,
        StateProfile::from_prefix_and_tail(&[("1", 1.0)], "2")?,
    ])
}

/// Profiles with a unit prefix of state 2, then a window of duration 3/4
/// whose state-1 and state-2 times are in exact ratio 1:2, then a constant
/// tail. Orderings inside the window are enumerated as interleavings of
/// grid-sized cells; a grid too coarse to split the window falls back to the
/// single canonical ordering `1^(1/4),2^(1/2)`.
pub fn s_hat_2(family: &ChannelFamily, grid: f64) -> Result<Vec<StateProfile>> {
    require_example(family)?;
    if !grid.is_finite() || grid <= 0.0 {
        return Err(Error::InvalidParameter("grid must be > 0".into()));
    }
    let m1 = (0.25 / grid).round() as usize;
    let m2 = (0.5 / grid).round() as usize;
    let exact = m1 >= 1
        && m2 >= 1
        && (m1 as f64 * grid - 0.25).abs() <= 1e-9
        && (m2 as f64 * grid - 0.5).abs() <= 1e-9;

    let mut arrangements: Vec<Vec<(&str, f64)>> = Vec::new();
    if exact {
        let total = m1 + m2;
        if total > 24 {
            return Err(Error::InvalidParameter(format!(
                "grid {grid} yields {total} window cells; refusing to enumerate"
            )));
        }
        // Choose the positions of the state-1 cells.
        let mut cells = vec!["2"; total];
        enumerate_choices(total, m1, &mut |positions| {
            for c in cells.iter_mut() {
                *c = "2";
            }
            for &p in positions {
                cells[p] = "1";
            }
            arrangements.push(cells.iter().map(|&s| (s, grid)).collect());
        });
    } else {
        arrangements.push(vec![("1", 0.25), ("2", 0.5)]);
    }

    let mut out = Vec::with_capacity(arrangements.len() * 2);
    for arrangement in &arrangements {
        for tail in ["1", "2"] {
            let mut prefix: Vec<(&str, f64)> = vec![("2", 1.0)];
            prefix.extend(arrangement.iter().copied());
            out.push(StateProfile::from_prefix_and_tail(&prefix, tail)?);
        }
    }
    Ok(out)
}

/// Calls `f` with every sorted `k`-subset of `0..n`.
fn enumerate_choices(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        let needed = k - cur.len();
        for i in start..=(n - needed) {
            cur.push(i);
            rec(n, k, i + 1, cur, f);
            cur.pop();
        }
    }
    let mut cur = Vec::with_capacity(k);
    rec(n, k, 0, &mut cur, f);
}

// ---------------------------------------------------------------------------
// Closed-form worst case for two-piece policies on the example family
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCase {
    Case1,
    Case2,
    Case3,
}

impl std::fmt::Display for SplitCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitCase::Case1 => write!(f, "case1"),
            SplitCase::Case2 => write!(f, "case2"),
            SplitCase::Case3 => write!(f, "case3"),
        }
    }
}

/// Result of the closed-form case analysis: the binding slowdown factor
/// `beta` (so the worst-case ratio is `1/beta`), the case attaining it, and
/// the clairvoyant time `r*` at which it binds.
#[derive(Debug, Clone, Copy)]
pub struct CaseSplit {
    pub beta: f64,
    pub case: SplitCase,
    pub r_star: f64,
    /// The three per-case bounds in case order.
    pub candidates: [f64; 3],
}

/// Closed-form worst-case analysis for the two-piece symmetric policy
/// `(p1 until t, then 2/3)` on the example family, split by the clairvoyant
/// stopping time `r`.
///
/// Case 1 covers `r` in `[1, t]` and binds at `r* = 1`; Case 2 covers
/// `[t, (t+2)/2]`, with the binding endpoint picked by the sign of
/// `t + (t+3)(1 - 3 p1)`; Case 3 covers `[(t+2)/2, 2]` and binds at
/// `r* = (t+2)/2`. The returned `beta` is the maximum over the three.
pub fn worst_case_case_split(p1: f64, t: f64) -> Result<CaseSplit> {
    let eps = 1e-12;
    if !(-eps..=2.0 / 3.0 + eps).contains(&p1) {
        return Err(Error::InvalidParameter(format!(
            "p1 must lie in [0, 2/3], got {p1}"
        )));
    }
    if !((1.0 - eps)..=(2.0 + eps)).contains(&t) {
        return Err(Error::InvalidParameter(format!("t must lie in [1, 2], got {t}")));
    }

    let c1 = (9.0 * p1 + 2.0 * t - 3.0 * p1 * t) / 2.0;
    let r1 = 1.0;

    let cond2 = t + (t + 3.0) * (1.0 - 3.0 * p1) >= 0.0;
    let (c2, r2) = if cond2 {
        ((9.0 * p1 + 4.0 * t - 6.0 * p1 * t - 3.0) / t, t)
    } else {
        ((2.0 * t - 3.0 * p1 * t + 6.0) / (t + 2.0), (t + 2.0) / 2.0)
    };

    let c3 = (2.0 * t - 3.0 * p1 * t + 6.0) / (t + 2.0);
    let r3 = (t + 2.0) / 2.0;

    let candidates = [c1, c2, c3];
    let mut beta = c1;
    let mut case = SplitCase::Case1;
    let mut r_star = r1;
    if c2 > beta {
        beta = c2;
        case = SplitCase::Case2;
        r_star = r2;
    }
    if c3 > beta {
        beta = c3;
        case = SplitCase::Case3;
        r_star = r3;
    }
    Ok(CaseSplit {
        beta,
        case,
        r_star,
        candidates,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{example_family, symmetric_input, Dmc, Distribution};
    use crate::policy::Duration;
    use crate::stopping::{optimal_stopping_time, ratio};

    fn single(p: f64) -> Policy {
        Policy::single(symmetric_input(p).unwrap())
    }

    fn two_piece(p1: f64, t: f64) -> Policy {
        Policy::two(
            symmetric_input(p1).unwrap(),
            t,
            symmetric_input(2.0 / 3.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn brute_blocks_balanced_policy() {
        let fam = example_family();
        let spec = AdversarySpec::brute(3, 0.25, 4.0);
        let res = worst_case(&fam, &single(2.0 / 3.0), &spec).unwrap();
        assert_eq!(res.ratio, 1.0 / 3.0);
        // Any witness must start with a state-1 block of duration >= 1.
        let first = &res.witness.blocks()[0];
        assert_eq!(first.label, "1");
        match first.duration {
            Duration::Finite(d) => assert!(d >= 1.0),
            Duration::Infinite => {}
        }
        assert!(res.evaluations > 0);
    }

    #[test]
    fn single_state_family_ratio_is_rate_over_capacity() {
        // One state: the ratio is I(p)/C regardless of the sequence.
        let dmc = Dmc::new(vec![
            vec![0.9, 0.1, 0.0],
            vec![0.1, 0.8, 0.1],
            vec![0.0, 0.1, 0.9],
        ])
        .unwrap();
        let fam = ChannelFamily::new(vec![("a".into(), dmc.clone())]).unwrap();
        let p = Distribution::uniform(3);
        let policy = Policy::single(p.clone());
        let spec = AdversarySpec::brute(3, 0.5, 3.0);
        let res = worst_case(&fam, &policy, &spec).unwrap();
        let expected = crate::channel::mutual_information(&p, &dmc).unwrap() / fam.state(0).capacity;
        assert!((res.ratio - expected).abs() < 1e-9);
        assert_eq!(res.witness.to_string(), "a^inf");
    }

    #[test]
    fn brute_blocks_two_piece_reaches_eleven_twentyfourths() {
        let fam = example_family();
        let spec = AdversarySpec::brute(4, 0.125, 4.0);
        let res = worst_case(&fam, &two_piece(10.0 / 33.0, 1.5), &spec).unwrap();
        assert!(
            res.ratio >= 11.0 / 24.0 - 1e-9,
            "ratio = {} below 11/24",
            res.ratio
        );
    }

    #[test]
    fn worst_case_matches_direct_ratio_on_witness() {
        let fam = example_family();
        let policy = two_piece(0.4, 1.25);
        let spec = AdversarySpec::brute(3, 0.25, 4.0);
        let res = worst_case(&fam, &policy, &spec).unwrap();
        let direct = ratio(&fam, &policy, &res.witness).unwrap();
        assert!((res.ratio - direct).abs() <= 1e-12);
    }

    #[test]
    fn refining_grid_never_increases_ratio() {
        let fam = example_family();
        let policy = two_piece(0.35, 1.5);
        let mut last = f64::INFINITY;
        for grid in [0.5, 0.25, 0.125, 0.0625] {
            let res = worst_case(&fam, &policy, &AdversarySpec::brute(4, grid, 4.0)).unwrap();
            assert!(
                res.ratio <= last + 1e-15,
                "grid {grid}: {} > {last}",
                res.ratio
            );
            last = res.ratio;
        }
    }

    #[test]
    fn default_horizon_covers_all_stopping_times() {
        let fam = example_family();
        let policy = two_piece(10.0 / 33.0, 1.5);
        // Finite duration 1.5 plus the worst tail crossing 1/(1/3).
        let horizon = AdversarySpec::default_horizon(&fam, &policy).unwrap();
        assert_eq!(horizon, 4.5);
        let spec = AdversarySpec::brute(4, 0.25, horizon);
        let res = worst_case(&fam, &policy, &spec).unwrap();
        // No enumerated profile stops later than the horizon.
        let tau = crate::stopping::stopping_time_fluid(&fam, &policy, &res.witness)
            .unwrap()
            .tau
            .finite()
            .unwrap();
        assert!(tau <= horizon);
    }

    #[test]
    fn empty_fixed_set_errors() {
        let fam = example_family();
        let spec = AdversarySpec::fixed(vec![]);
        assert!(matches!(
            worst_case(&fam, &single(0.5), &spec),
            Err(Error::EmptySearchSpace(_))
        ));
    }

    #[test]
    fn s_hat_1_profiles() {
        let fam = example_family();
        let profiles = s_hat_1(&fam).unwrap();
        assert_eq!(profiles.len(), 2);
        assert_eq!(profiles[0].to_string(), "1^inf");
        assert_eq!(profiles[1].to_string(), "1^1,2^inf");
        for p in &profiles {
            let tau = optimal_stopping_time(&fam, p).unwrap().tau.finite().unwrap();
            assert_eq!(tau, 1.0);
        }
    }

    #[test]
    fn s_hat_2_members_have_optimal_time_seven_fourths() {
        let fam = example_family();
        let profiles = s_hat_2(&fam, 0.125).unwrap();
        // C(6,2) interleavings, two tails each.
        assert_eq!(profiles.len(), 30);
        for p in &profiles {
            let tau = optimal_stopping_time(&fam, p).unwrap().tau.finite().unwrap();
            assert_eq!(tau, 1.75, "{p}");
        }
    }

    #[test]
    fn s_hat_2_coarse_grid_single_ordering() {
        let fam = example_family();
        let profiles = s_hat_2(&fam, 0.75).unwrap();
        assert_eq!(profiles.len(), 2);
        assert_eq!(profiles[0].to_string(), "2^1,1^0.25,2^0.5,1^inf");
        assert_eq!(profiles[1].to_string(), "2^1,1^0.25,2^inf");
    }

    #[test]
    fn fixed_sets_reject_other_families() {
        let dmc = Dmc::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let fam = ChannelFamily::new(vec![("1".into(), dmc)]).unwrap();
        assert!(s_hat_1(&fam).is_err());
        assert!(s_hat_2(&fam, 0.25).is_err());
    }

    #[test]
    fn case_split_at_optimum() {
        let cs = worst_case_case_split(10.0 / 33.0, 1.5).unwrap();
        assert!((cs.beta - 24.0 / 11.0).abs() < 1e-12, "beta = {}", cs.beta);
        assert!(matches!(cs.case, SplitCase::Case1 | SplitCase::Case3));
        // Both the case-1 and case-3 bounds attain the optimum.
        assert!((cs.candidates[0] - 24.0 / 11.0).abs() < 1e-12);
        assert!((cs.candidates[2] - 24.0 / 11.0).abs() < 1e-12);
        // The case-2 bound is dominated.
        assert!(cs.candidates[1] < cs.beta);
    }

    #[test]
    fn case_split_boundary_values() {
        let cs = worst_case_case_split(2.0 / 3.0, 1.0).unwrap();
        assert!((cs.beta - 3.0).abs() < 1e-12, "beta = {}", cs.beta);
        assert_eq!(cs.case, SplitCase::Case1);
        assert_eq!(cs.r_star, 1.0);
        assert!(worst_case_case_split(0.8, 1.5).is_err());
        assert!(worst_case_case_split(0.2, 2.5).is_err());
    }

    #[test]
    fn case_split_matches_brute_force() {
        // The analytic bound and the numeric adversary validate each other.
        let fam = example_family();
        let spec = AdversarySpec::brute(4, 0.0625, 4.0);
        for (i, &t) in [1.0, 1.375, 1.5, 1.75, 2.0].iter().enumerate() {
            let p1 = i as f64 * (2.0 / 3.0) / 4.0;
            let cs = worst_case_case_split(p1, t).unwrap();
            let res = worst_case(&fam, &two_piece(p1, t), &spec).unwrap();
            let beta_brute = 1.0 / res.ratio;
            assert!(
                (beta_brute - cs.beta).abs() <= 0.06,
                "p1={p1} t={t}: brute {beta_brute} vs closed {cs:?}"
            );
        }
    }
}
