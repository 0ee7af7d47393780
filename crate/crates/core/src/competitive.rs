//! Outer optimization over policies: competitive-ratio and regret search,
//! the fixed-set upper bound for the example family, and the chain
//! reproduction routine tying the pieces together.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{worst_case, worst_case_case_split, worst_regret, AdversarySpec};
use crate::channel::{is_example_family, symmetric_input, ChannelFamily, Distribution};
use crate::error::{Error, Result};
use crate::policy::{Duration, Piece, Policy, StateProfile};

// ---------------------------------------------------------------------------
// Search space
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    /// Distributions restricted to `symmetric_input(p)`, `p` on a grid.
    ExampleSymmetric,
    /// All distributions with entries on a grid over the full simplex.
    FullSimplex,
}

/// Grid description for the policy search.
#[derive(Debug, Clone)]
pub struct PolicySearchSpace {
    pub ell: usize,
    /// Distribution grid step; the grid has `round(1/p_grid)` cells.
    pub p_grid: f64,
    /// Switch-time grid step (unused when `ell == 1`).
    pub t_grid: f64,
    /// Switch times are drawn from this closed interval.
    pub t_range: (f64, f64),
    pub parametrization: Parametrization,
    /// Coordinate-descent refinement around the grid argmax.
    pub refine: bool,
}

impl PolicySearchSpace {
    pub fn example_symmetric(ell: usize, p_grid: f64, t_grid: f64, t_range: (f64, f64)) -> Self {
        Self {
            ell,
            p_grid,
            t_grid,
            t_range,
            parametrization: Parametrization::ExampleSymmetric,
            refine: false,
        }
    }

    fn validate(&self, family: &ChannelFamily) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::InvalidParameter("ell must be >= 1".into()));
        }
        if !self.p_grid.is_finite() || self.p_grid <= 0.0 || self.p_grid > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "p_grid must lie in (0,1], got {}",
                self.p_grid
            )));
        }
        if self.ell > 1 {
            if !self.t_grid.is_finite() || self.t_grid <= 0.0 {
                return Err(Error::InvalidParameter("t_grid must be > 0".into()));
            }
            if !(self.t_range.0 > 0.0 && self.t_range.1 >= self.t_range.0) {
                return Err(Error::InvalidParameter(format!(
                    "invalid t_range {:?}",
                    self.t_range
                )));
            }
        }
        if self.parametrization == Parametrization::ExampleSymmetric && family.input_size() != 4 {
            return Err(Error::InvalidParameter(
                "the symmetric parametrization needs a four-symbol input alphabet".into(),
            ));
        }
        Ok(())
    }
}

/// One evaluated policy: its scalar parameters `(p_1..p_ell, t_1..t_{ell-1})`
/// (distribution entries are flattened under the full-simplex
/// parametrization), its worst-case score, and the witness encoding.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub params: Vec<f64>,
    pub worst_ratio: f64,
    pub witness: String,
}

/// Report of a competitive-ratio optimization.
#[derive(Debug, Clone)]
pub struct CompetitiveReport {
    /// Best worst-case ratio found: a lower bound on the restricted-adversary
    /// competitive ratio of the searched policy class.
    pub cr_lower: f64,
    pub best_policy: Policy,
    pub worst_witness: StateProfile,
    pub cr_upper: Option<f64>,
    pub diagnostics: Vec<(String, f64)>,
}

/// Report of a regret optimization.
#[derive(Debug, Clone)]
pub struct RegretReport {
    pub regret: f64,
    pub best_policy: Policy,
    pub worst_witness: StateProfile,
    pub diagnostics: Vec<(String, f64)>,
}

// ---------------------------------------------------------------------------
// Candidate enumeration
// ---------------------------------------------------------------------------

/// A grid of values `i/denominator`, exact at every representable rational.
pub fn unit_grid(denominator: usize) -> Vec<f64> {
    (0..=denominator)
        .map(|i| i as f64 / denominator as f64)
        .collect()
}

/// An `n`-point uniform grid on `[0,1]` with each value in `inject` snapped
/// onto its nearest grid point.
pub fn unit_grid_with(n: usize, inject: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    for &v in inject {
        let nearest = (0..n)
            .min_by(|&a, &b| {
                (grid[a] - v)
                    .abs()
                    .partial_cmp(&(grid[b] - v).abs())
                    .unwrap()
            })
            .unwrap();
        grid[nearest] = v;
    }
    grid
}

#[derive(Debug, Clone)]
struct Candidate {
    params: Vec<f64>,
    dists: Vec<Distribution>,
    switches: Vec<f64>,
}

impl Candidate {
    fn policy(&self) -> Policy {
        let mut pieces = Vec::with_capacity(self.dists.len());
        let mut prev = 0.0;
        for (i, dist) in self.dists.iter().enumerate() {
            let duration = if i == self.dists.len() - 1 {
                Duration::Infinite
            } else {
                let d = self.switches[i] - prev;
                prev = self.switches[i];
                Duration::Finite(d)
            };
            pieces.push(Piece {
                dist: dist.clone(),
                duration,
            });
        }
        Policy::new(pieces).expect("candidate policies are well-formed")
    }
}

fn dist_grid(space: &PolicySearchSpace, family: &ChannelFamily) -> Result<Vec<(Vec<f64>, Distribution)>> {
    let denom = (1.0 / space.p_grid).round() as usize;
    if denom == 0 {
        return Err(Error::EmptySearchSpace("p_grid produces no values".into()));
    }
    match space.parametrization {
        Parametrization::ExampleSymmetric => Ok(unit_grid(denom)
            .into_iter()
            .map(|p| (vec![p], symmetric_input(p).expect("grid p lies in [0,1]")))
            .collect()),
        Parametrization::FullSimplex => {
            let dim = family.input_size();
            let mut out = Vec::new();
            let mut counts = vec![0usize; dim];
            compositions(denom, dim, 0, &mut counts, &mut |c| {
                let probs: Vec<f64> = c.iter().map(|&x| x as f64 / denom as f64).collect();
                let dist = Distribution::new(probs.clone()).expect("grid point is a distribution");
                out.push((probs, dist));
            });
            Ok(out)
        }
    }
}

fn compositions(
    total: usize,
    parts: usize,
    idx: usize,
    counts: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if idx == parts - 1 {
        counts[idx] = total;
        f(counts);
        return;
    }
    for v in 0..=total {
        counts[idx] = v;
        compositions(total - v, parts, idx + 1, counts, f);
    }
}

fn switch_grid(space: &PolicySearchSpace) -> Vec<f64> {
    let (a, b) = space.t_range;
    let count = ((b - a) / space.t_grid + 1e-9).floor() as usize;
    (0..=count).map(|j| a + j as f64 * space.t_grid).collect()
}

fn candidates(family: &ChannelFamily, space: &PolicySearchSpace) -> Result<Vec<Candidate>> {
    space.validate(family)?;
    let dists = dist_grid(space, family)?;
    let mut out = Vec::new();
    if space.ell == 1 {
        for (params, dist) in &dists {
            out.push(Candidate {
                params: params.clone(),
                dists: vec![dist.clone()],
                switches: vec![],
            });
        }
    } else {
        let times = switch_grid(space);
        let mut time_tuples: Vec<Vec<f64>> = Vec::new();
        let mut cur = Vec::with_capacity(space.ell - 1);
        increasing_tuples(&times, space.ell - 1, 0, &mut cur, &mut |t| {
            time_tuples.push(t.to_vec())
        });
        if time_tuples.is_empty() {
            return Err(Error::EmptySearchSpace(
                "no increasing switch-time tuples in t_range".into(),
            ));
        }
        let mut dist_tuples: Vec<Vec<usize>> = Vec::new();
        let mut idxs = vec![0usize; space.ell];
        cartesian(dists.len(), space.ell, 0, &mut idxs, &mut |ix| {
            dist_tuples.push(ix.to_vec())
        });
        for ix in &dist_tuples {
            for times in &time_tuples {
                let mut params = Vec::new();
                for &i in ix {
                    params.extend_from_slice(&dists[i].0);
                }
                params.extend_from_slice(times);
                out.push(Candidate {
                    params,
                    dists: ix.iter().map(|&i| dists[i].1.clone()).collect(),
                    switches: times.clone(),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySearchSpace("policy grid is empty".into()));
    }
    Ok(out)
}

fn increasing_tuples(
    values: &[f64],
    len: usize,
    start: usize,
    cur: &mut Vec<f64>,
    f: &mut impl FnMut(&[f64]),
) {
    if cur.len() == len {
        f(cur);
        return;
    }
    for i in start..values.len() {
        cur.push(values[i]);
        increasing_tuples(values, len, i + 1, cur, f);
        cur.pop();
    }
}

fn cartesian(n: usize, len: usize, idx: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if idx == len {
        f(cur);
        return;
    }
    for v in 0..n {
        cur[idx] = v;
        cartesian(n, len, idx + 1, cur, f);
    }
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

/// Scores every policy on the grid. Rows keep enumeration order, so output
/// is deterministic regardless of the number of worker threads.
pub fn scan_policies(
    family: &ChannelFamily,
    space: &PolicySearchSpace,
    adversary: &AdversarySpec,
) -> Result<Vec<ScanRow>> {
    let cands = candidates(family, space)?;
    cands
        .par_iter()
        .map(|cand| {
            let res = worst_case(family, &cand.policy(), adversary)?;
            Ok(ScanRow {
                params: cand.params.clone(),
                worst_ratio: res.ratio,
                witness: res.witness.to_string(),
            })
        })
        .collect()
}

/// Grid search (optionally refined) for the policy maximizing the worst-case
/// ratio under the given adversary. The result is a certified lower bound on
/// the restricted-adversary competitive ratio.
pub fn optimize_cr(
    family: &ChannelFamily,
    space: &PolicySearchSpace,
    adversary: &AdversarySpec,
) -> Result<CompetitiveReport> {
    let cands = candidates(family, space)?;
    let scored: Vec<f64> = cands
        .par_iter()
        .map(|cand| worst_case(family, &cand.policy(), adversary).map(|r| r.ratio))
        .collect::<Result<_>>()?;
    // First maximum in enumeration order: the lexicographically smallest
    // parameter vector among ties.
    let mut best = 0usize;
    for (i, &v) in scored.iter().enumerate() {
        if v > scored[best] {
            best = i;
        }
    }
    let mut best_cand = cands[best].clone();
    let mut best_value = scored[best];
    if space.refine && space.parametrization == Parametrization::ExampleSymmetric {
        (best_cand, best_value) = refine_candidate(family, space, adversary, best_cand, best_value)?;
    }
    let policy = best_cand.policy();
    let witness = worst_case(family, &policy, adversary)?;
    debug_assert_eq!(witness.ratio, best_value);
    Ok(CompetitiveReport {
        cr_lower: best_value,
        best_policy: policy,
        worst_witness: witness.witness,
        cr_upper: None,
        diagnostics: vec![
            ("policies_evaluated".into(), cands.len() as f64),
            ("profile_evaluations_per_policy".into(), witness.evaluations as f64),
        ],
    })
}

/// Coordinate descent around the grid argmax, halving the step five times.
fn refine_candidate(
    family: &ChannelFamily,
    space: &PolicySearchSpace,
    adversary: &AdversarySpec,
    mut cand: Candidate,
    mut value: f64,
) -> Result<(Candidate, f64)> {
    let ell = space.ell;
    for level in 1..=5u32 {
        let p_step = space.p_grid / f64::powi(2.0, level as i32);
        let t_step = space.t_grid / f64::powi(2.0, level as i32);
        let mut improved = true;
        let mut sweeps = 0;
        while improved && sweeps < 8 {
            improved = false;
            sweeps += 1;
            for coord in 0..cand.params.len() {
                let (step, lo, hi) = if coord < ell {
                    (p_step, 0.0, 1.0)
                } else {
                    (t_step, space.t_range.0, space.t_range.1)
                };
                for dir in [-1.0, 1.0] {
                    let mut trial = cand.clone();
                    let v = trial.params[coord] + dir * step;
                    if v < lo || v > hi {
                        continue;
                    }
                    trial.params[coord] = v;
                    if coord < ell {
                        trial.dists[coord] = symmetric_input(v)?;
                    } else {
                        let ti = coord - ell;
                        trial.switches[ti] = v;
                        let ordered = trial.switches.windows(2).all(|w| w[0] < w[1]);
                        if !ordered {
                            continue;
                        }
                    }
                    let score = worst_case(family, &trial.policy(), adversary)?.ratio;
                    if score > value {
                        value = score;
                        cand = trial;
                        improved = true;
                    }
                }
            }
        }
    }
    Ok((cand, value))
}

/// Grid search for the policy minimizing the worst-case regret.
pub fn optimize_regret(
    family: &ChannelFamily,
    space: &PolicySearchSpace,
    adversary: &AdversarySpec,
) -> Result<RegretReport> {
    let cands = candidates(family, space)?;
    let scored: Vec<f64> = cands
        .par_iter()
        .map(|cand| worst_regret(family, &cand.policy(), adversary).map(|r| r.regret))
        .collect::<Result<_>>()?;
    let mut best = 0usize;
    for (i, &v) in scored.iter().enumerate() {
        if v < scored[best] {
            best = i;
        }
    }
    let policy = cands[best].policy();
    let witness = worst_regret(family, &policy, adversary)?;
    Ok(RegretReport {
        regret: scored[best],
        best_policy: policy,
        worst_witness: witness.witness,
        diagnostics: vec![("policies_evaluated".into(), cands.len() as f64)],
    })
}

// ---------------------------------------------------------------------------
// Fixed-set upper bound (example family)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpperBoundCase {
    A,
    B,
    C,
    D,
}

impl std::fmt::Display for UpperBoundCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpperBoundCase::A => write!(f, "A"),
            UpperBoundCase::B => write!(f, "B"),
            UpperBoundCase::C => write!(f, "C"),
            UpperBoundCase::D => write!(f, "D"),
        }
    }
}

/// Upper-bound evaluation at one `(p1, p2)` point.
#[derive(Debug, Clone, Copy)]
pub struct UpperBound {
    pub value: f64,
    pub case: UpperBoundCase,
    /// Ratios for the unit-1-prefix profiles with tails 1 and 2.
    pub shat1_ratios: [f64; 2],
    /// Ratio shared by every member of the 1:2-mix set.
    pub shat2_ratio: f64,
}

/// Tail rate of the symmetric input `p2` under state `s` (0-based).
fn tail_rate(s: usize, p2: f64) -> f64 {
    if s == 0 {
        1.0 - p2
    } else {
        p2 / 2.0
    }
}

/// Stopping time of the profile `1^1, s^inf` for the three-interval policy
/// `(p1 on (0,1], p2 on (1, 7/4], balanced tail)`, and whether it falls at
/// or beyond 7/4.
fn shat1_tau(p1: f64, rate: f64) -> (f64, bool) {
    if p1 == 0.0 {
        // Everything arrives during the unit prefix.
        return (1.0, false);
    }
    if p1 >= 0.75 * rate {
        (1.75 + 3.0 * p1 - 2.25 * rate, true)
    } else {
        (1.0 + p1 / rate, false)
    }
}

/// Competitive-ratio upper bound from the two fixed adversary sets, for the
/// three-interval policy parametrized by `(p1, p2)` with a balanced tail.
/// Returns the minimum of the three closed-form ratios and the case label
/// describing which side of 7/4 each unit-prefix stopping time falls on.
pub fn upper_bound_fixed_sets(p1: f64, p2: f64) -> Result<UpperBound> {
    for (name, v) in [("p1", p1), ("p2", p2)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "{name} must lie in [0,1], got {v}"
            )));
        }
    }
    let (tau1, ge1) = shat1_tau(p1, tail_rate(0, p2));
    let (tau2, ge2) = shat1_tau(p1, tail_rate(1, p2));
    let shat1_ratios = [1.0 / tau1, 1.0 / tau2];
    let shat2_ratio = 1.75 / (4.0 - 1.5 * p1);
    let value = shat1_ratios[0].min(shat1_ratios[1]).min(shat2_ratio);
    let case = match (ge1, ge2) {
        (true, true) => UpperBoundCase::A,
        (true, false) => UpperBoundCase::B,
        (false, false) => UpperBoundCase::C,
        (false, true) => UpperBoundCase::D,
    };
    Ok(UpperBound {
        value,
        case,
        shat1_ratios,
        shat2_ratio,
    })
}

/// Maximum of [`upper_bound_fixed_sets`] over an `n x n` grid with the
/// closed-form optimum `(1/3, 2/3)` snapped onto the grid.
pub fn upper_bound_grid_max(n: usize) -> Result<(UpperBound, (f64, f64))> {
    let grid = unit_grid_with(n, &[1.0 / 3.0, 2.0 / 3.0]);
    let mut best: Option<(UpperBound, (f64, f64))> = None;
    for &p1 in &grid {
        for &p2 in &grid {
            let ub = upper_bound_fixed_sets(p1, p2)?;
            if best.as_ref().is_none_or(|(b, _)| ub.value > b.value) {
                best = Some((ub, (p1, p2)));
            }
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// `max_p min(p, 1/3)` over the given grid of `p` values.
pub fn cr1_closed_form(p_values: &[f64]) -> f64 {
    p_values
        .iter()
        .map(|&p| p.min(1.0 / 3.0))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Chain reproduction
// ---------------------------------------------------------------------------

/// Values and pass flags for the competitive-ratio chain on the example
/// family: single-piece optimum, two-piece lower bound, and fixed-set upper
/// bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub cr1_closed_form: f64,
    pub cr1_fixed_set: f64,
    pub cr1_brute: f64,
    pub cr2_policy: [f64; 3],
    pub cr2_lower: f64,
    pub case_split_beta: f64,
    pub cr_upper: f64,
    pub cr_upper_argmax: [f64; 2],
    pub cr_upper_case: String,
    pub separation: f64,
    pub tolerance: f64,
    pub pass_a: bool,
    pub pass_b: bool,
    pub pass_c: bool,
    pub pass_separation: bool,
    pub all_pass: bool,
}

/// Runs the three chain steps on the example family.
///
/// (a) single-piece optimization against the two-sequence adversary
/// `{2^inf, 1^1 2^inf}` plus the closed form `max_p min(p, 1/3)`;
/// (b) the fixed two-piece policy `(10/33 at 3/2, then 2/3)` scored by the
/// brute-force block adversary, cross-checked by the case analysis;
/// (c) the fixed-set upper bound maximized over a `(p1, p2)` grid.
/// `fast` shrinks the grids and widens the brute-force tolerance to 0.03.
pub fn reproduce_chain(family: &ChannelFamily, fast: bool) -> Result<ChainReport> {
    if !is_example_family(family) {
        return Err(Error::InvalidFamily(
            "chain reproduction is defined for the built-in example family".into(),
        ));
    }
    let (p_denom, brute_grid, ub_points, tol) = if fast {
        (12usize, 0.125, 21usize, 0.03)
    } else {
        (60usize, 0.0625, 101usize, 0.02)
    };

    // (a) Single-piece chain step.
    let p_values = unit_grid(p_denom);
    let cr1_closed = cr1_closed_form(&p_values);
    let two_sequences = vec![
        StateProfile::constant("2"),
        StateProfile::from_prefix_and_tail(&[("1", 1.0)], "2")?,
    ];
    let space1 = PolicySearchSpace::example_symmetric(1, 1.0 / p_denom as f64, 0.0, (1.0, 2.0));
    let fixed = optimize_cr(family, &space1, &AdversarySpec::fixed(two_sequences))?;
    let brute1 = optimize_cr(family, &space1, &AdversarySpec::brute(3, brute_grid, 4.0))?;
    let third = 1.0 / 3.0;
    let pass_a = cr1_closed == third
        && (fixed.cr_lower - third).abs() <= 1e-12
        && (brute1.cr_lower - third).abs() <= tol;

    // (b) Two-piece chain step at the closed-form optimum.
    let p1 = 10.0 / 33.0;
    let t = 1.5;
    let p2 = 2.0 / 3.0;
    let policy = Policy::two(symmetric_input(p1)?, t, symmetric_input(p2)?)?;
    let brute2 = worst_case(family, &policy, &AdversarySpec::brute(4, brute_grid, 4.0))?;
    let split = worst_case_case_split(p1, t)?;
    let pass_b = brute2.ratio >= 11.0 / 24.0 - tol
        && (split.beta - 24.0 / 11.0).abs() <= 1e-9;

    // (c) Fixed-set upper bound.
    let (ub, argmax) = upper_bound_grid_max(ub_points)?;
    let pass_c = (ub.value - 0.5).abs() <= 1e-9
        && (argmax.0 - 1.0 / 3.0).abs() <= 1e-12
        && (argmax.1 - 2.0 / 3.0).abs() <= 1e-12;

    let separation = brute2.ratio - fixed.cr_lower;
    let pass_separation = separation > 0.0;

    Ok(ChainReport {
        cr1_closed_form: cr1_closed,
        cr1_fixed_set: fixed.cr_lower,
        cr1_brute: brute1.cr_lower,
        cr2_policy: [p1, t, p2],
        cr2_lower: brute2.ratio,
        case_split_beta: split.beta,
        cr_upper: ub.value,
        cr_upper_argmax: [argmax.0, argmax.1],
        cr_upper_case: ub.case.to_string(),
        separation,
        tolerance: tol,
        pass_a,
        pass_b,
        pass_c,
        pass_separation,
        all_pass: pass_a && pass_b && pass_c && pass_separation,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{example_family, Dmc};

    #[test]
    fn upper_bound_at_optimum() {
        let ub = upper_bound_fixed_sets(1.0 / 3.0, 2.0 / 3.0).unwrap();
        assert!((ub.value - 0.5).abs() < 1e-12, "value = {}", ub.value);
        assert_eq!(ub.case, UpperBoundCase::A);
    }

    #[test]
    fn upper_bound_at_zero_p1() {
        // Unit-prefix ratio is 1, mix ratio is (7/4)/4.
        for p2 in [0.0, 0.3, 2.0 / 3.0, 1.0] {
            let ub = upper_bound_fixed_sets(0.0, p2).unwrap();
            assert!((ub.shat1_ratios[0] - 1.0).abs() < 1e-12);
            assert!((ub.shat1_ratios[1] - 1.0).abs() < 1e-12);
            assert!((ub.value - 7.0 / 16.0).abs() < 1e-12, "p2={p2}: {ub:?}");
            assert_eq!(ub.case, UpperBoundCase::C);
        }
        assert!(upper_bound_fixed_sets(-0.1, 0.5).is_err());
        assert!(upper_bound_fixed_sets(0.5, 1.2).is_err());
    }

    #[test]
    fn upper_bound_grid_attains_half() {
        let (ub, argmax) = upper_bound_grid_max(101).unwrap();
        assert!((ub.value - 0.5).abs() <= 1e-9, "max = {}", ub.value);
        assert!((argmax.0 - 1.0 / 3.0).abs() <= 1e-12);
        assert!((argmax.1 - 2.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_cr1() {
        let grid = unit_grid(60);
        assert_eq!(cr1_closed_form(&grid), 1.0 / 3.0);
        // Any grid point at or above 1/3 attains the maximum.
        assert_eq!(cr1_closed_form(&[2.0 / 3.0]), 1.0 / 3.0);
        assert_eq!(cr1_closed_form(&[0.2]), 0.2);
    }

    #[test]
    fn optimize_cr_single_piece_fixed_set() {
        let fam = example_family();
        let space = PolicySearchSpace::example_symmetric(1, 1.0 / 60.0, 0.0, (1.0, 2.0));
        let adversary = AdversarySpec::fixed(vec![
            StateProfile::constant("2"),
            StateProfile::from_prefix_and_tail(&[("1", 1.0)], "2").unwrap(),
        ]);
        let report = optimize_cr(&fam, &space, &adversary).unwrap();
        assert!(
            (report.cr_lower - 1.0 / 3.0).abs() <= 1e-12,
            "cr = {}",
            report.cr_lower
        );
    }

    #[test]
    fn optimize_cr_single_state_family_hits_one() {
        // Noiseless binary channel; the capacity achiever is on the grid.
        let dmc = Dmc::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let fam = ChannelFamily::new(vec![("s".into(), dmc)]).unwrap();
        let space = PolicySearchSpace {
            ell: 1,
            p_grid: 0.25,
            t_grid: 0.0,
            t_range: (1.0, 2.0),
            parametrization: Parametrization::FullSimplex,
            refine: false,
        };
        let adversary = AdversarySpec::brute(2, 0.5, 3.0);
        let report = optimize_cr(&fam, &space, &adversary).unwrap();
        assert!((report.cr_lower - 1.0).abs() <= 1e-9, "cr = {}", report.cr_lower);
    }

    #[test]
    fn optimize_regret_single_state_family_is_zero() {
        let dmc = Dmc::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let fam = ChannelFamily::new(vec![("s".into(), dmc)]).unwrap();
        let space = PolicySearchSpace {
            ell: 1,
            p_grid: 0.25,
            t_grid: 0.0,
            t_range: (1.0, 2.0),
            parametrization: Parametrization::FullSimplex,
            refine: false,
        };
        let adversary = AdversarySpec::brute(2, 0.5, 3.0);
        let report = optimize_regret(&fam, &space, &adversary).unwrap();
        assert!(report.regret.abs() <= 1e-9, "regret = {}", report.regret);
    }

    #[test]
    fn empty_policy_grid_errors() {
        let fam = example_family();
        let space = PolicySearchSpace {
            ell: 2,
            p_grid: 0.5,
            t_grid: 1.0,
            t_range: (2.0, 1.0),
            parametrization: Parametrization::ExampleSymmetric,
            refine: false,
        };
        assert!(optimize_cr(&fam, &space, &AdversarySpec::brute(2, 0.5, 3.0)).is_err());
    }

    #[test]
    fn scan_rows_match_optimize() {
        let fam = example_family();
        let space = PolicySearchSpace::example_symmetric(1, 1.0 / 12.0, 0.0, (1.0, 2.0));
        let adversary = AdversarySpec::brute(3, 0.25, 4.0);
        let rows = scan_policies(&fam, &space, &adversary).unwrap();
        assert_eq!(rows.len(), 13);
        let report = optimize_cr(&fam, &space, &adversary).unwrap();
        let best_row = rows
            .iter()
            .map(|r| r.worst_ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best_row, report.cr_lower);
    }

    #[test]
    fn reproduce_fast_chain_passes() {
        let fam = example_family();
        let report = reproduce_chain(&fam, true).unwrap();
        assert!(report.pass_a, "{report:?}");
        assert!(report.pass_b, "{report:?}");
        assert!(report.pass_c, "{report:?}");
        assert!(report.pass_separation);
        assert!(report.all_pass);
        assert!(report.cr2_lower <= report.cr_upper + 1e-12);
    }

    #[test]
    fn unit_grid_contains_exact_thirds() {
        let g = unit_grid(60);
        assert!(g.contains(&(1.0 / 3.0)));
        assert!(g.contains(&(2.0 / 3.0)));
        let gi = unit_grid_with(101, &[1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(gi.len(), 101);
        assert!(gi.contains(&(1.0 / 3.0)));
        assert!(gi.contains(&(2.0 / 3.0)));
    }
}
