//! Channel-family data model and information measures.
//!
//! A state-indexed family of discrete memoryless channels, mutual information
//! and capacity in bits, and the built-in two-state example family used
//! throughout the test suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on simplex constraints (entry sums) at construction time.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Default convergence tolerance for the capacity solver, in bits.
pub const CAPACITY_TOL: f64 = 1e-9;

/// Default iteration cap for the capacity solver. Boundary-supported optima
/// converge slowly, so the cap is generous.
pub const CAPACITY_MAX_ITER: u32 = 400_000;

// ---------------------------------------------------------------------------
// Distribution
// ---------------------------------------------------------------------------

/// A probability distribution over a finite alphabet.
///
/// Entries are validated once at construction; all operations may assume a
/// valid simplex point afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {p}, expected a nonnegative real"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1 within {SIMPLEX_TOL:e}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

/// Total variation distance between two vectors of the same length.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    0.5 * a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Dmc
// ---------------------------------------------------------------------------

/// A single discrete memoryless channel as a row-stochastic matrix.
///
/// Row `x` holds the output distribution `w(y|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dmc {
    rows: Vec<Vec<f64>>,
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidChannelRow {
                row: 0,
                reason: "channel has no rows".into(),
            });
        }
        let m = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidChannelRow {
                    row: i,
                    reason: format!("row has {} entries, expected {m}", row.len()),
                });
            }
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidChannelRow {
                        row: i,
                        reason: format!("entry {p} is not a nonnegative real"),
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidChannelRow {
                    row: i,
                    reason: format!("row sums to {sum}, expected 1 within {SIMPLEX_TOL:e}"),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

// ---------------------------------------------------------------------------
// ChannelFamily
// ---------------------------------------------------------------------------

/// One state of a family: a label, its channel, and its capacity data.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub label: String,
    pub channel: Dmc,
    /// Capacity in bits and an input distribution attaining it.
    pub capacity: f64,
    pub capacity_input: Distribution,
}

/// A state-indexed family of channels over shared input/output alphabets,
/// with per-state capacities precomputed at construction.
#[derive(Debug, Clone)]
pub struct ChannelFamily {
    states: Vec<ChannelState>,
    input_size: usize,
    output_size: usize,
}

impl ChannelFamily {
    /// Builds a family, solving for each state's capacity numerically.
    pub fn new(states: Vec<(String, Dmc)>) -> Result<Self> {
        let mut solved = Vec::with_capacity(states.len());
        for (label, channel) in states {
            let cap = capacity(&channel, CAPACITY_TOL, CAPACITY_MAX_ITER)?;
            solved.push((label, channel, cap.capacity, cap.maximizer));
        }
        Self::with_capacities(solved)
    }

    /// Builds a family from states whose capacities are already known, e.g.
    /// in closed form. No capacity solve is performed.
    pub fn with_capacities(states: Vec<(String, Dmc, f64, Distribution)>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidFamily("family needs at least one state".into()));
        }
        let input_size = states[0].1.input_size();
        let output_size = states[0].1.output_size();
        let mut seen = std::collections::HashSet::new();
        for (label, dmc, cap, max_in) in &states {
            if dmc.input_size() != input_size || dmc.output_size() != output_size {
                return Err(Error::InvalidFamily(format!(
                    "state `{label}` has alphabet {}x{}, expected {input_size}x{output_size}",
                    dmc.input_size(),
                    dmc.output_size()
                )));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::InvalidFamily(format!("duplicate state label `{label}`")));
            }
            if !cap.is_finite() || *cap < 0.0 {
                return Err(Error::InvalidFamily(format!(
                    "state `{label}` has invalid capacity {cap}"
                )));
            }
            if max_in.len() != input_size {
                return Err(Error::InvalidFamily(format!(
                    "state `{label}` capacity input has wrong dimension"
                )));
            }
        }
        let states = states
            .into_iter()
            .map(|(label, channel, capacity, capacity_input)| ChannelState {
                label,
                channel,
                capacity,
                capacity_input,
            })
            .collect();
        Ok(Self {
            states,
            input_size,
            output_size,
        })
    }

    pub fn states(&self) -> &[ChannelState] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s.label == label)
    }

    pub fn state(&self, idx: usize) -> &ChannelState {
        &self.states[idx]
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.capacity).collect()
    }

    /// Loads a family from the JSON channel format:
    /// `{"input_size": N, "output_size": M, "states": [{"label": ..., "rows": [[...]]}]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FamilyJson = serde_json::from_str(text)?;
        let mut states = Vec::with_capacity(raw.states.len());
        for st in raw.states {
            if st.rows.len() != raw.input_size {
                return Err(Error::InvalidFamily(format!(
                    "state `{}` has {} rows, expected input_size {}",
                    st.label,
                    st.rows.len(),
                    raw.input_size
                )));
            }
            for (i, row) in st.rows.iter().enumerate() {
                if row.len() != raw.output_size {
                    return Err(Error::InvalidChannelRow {
                        row: i,
                        reason: format!(
                            "state `{}`: row has {} entries, expected output_size {}",
                            st.label,
                            row.len(),
                            raw.output_size
                        ),
                    });
                }
            }
            let dmc = Dmc::new(st.rows).map_err(|e| match e {
                Error::InvalidChannelRow { row, reason } => Error::InvalidChannelRow {
                    row,
                    reason: format!("state `{}`: {reason}", st.label),
                },
                other => other,
            })?;
            states.push((st.label, dmc));
        }
        Self::new(states)
    }

    pub fn to_json(&self) -> String {
        let raw = FamilyJson {
            input_size: self.input_size,
            output_size: self.output_size,
            states: self
                .states
                .iter()
                .map(|s| StateJson {
                    label: s.label.clone(),
                    rows: s.channel.rows().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("family serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    input_size: usize,
    output_size: usize,
    states: Vec<StateJson>,
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    label: String,
    rows: Vec<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Information measures
// ---------------------------------------------------------------------------

/// Mutual information I(X;Y) in bits for the joint `p(x) w(y|x)`.
///
/// Terms with `p(x) = 0` or `w(y|x) = 0` contribute nothing; output symbols
/// with zero marginal cannot carry positive weight and are skipped.
pub fn mutual_information(p: &Distribution, w: &Dmc) -> Result<f64> {
    if p.len() != w.input_size() {
        return Err(Error::DimensionMismatch(format!(
            "input distribution has {} entries, channel expects {}",
            p.len(),
            w.input_size()
        )));
    }
    let probs = p.probs();
    let m = w.output_size();
    let mut q = vec![0.0f64; m];
    for (x, &px) in probs.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        for (y, &wxy) in w.row(x).iter().enumerate() {
            q[y] += px * wxy;
        }
    }
    let mut info = 0.0f64;
    for (x, &px) in probs.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let mut row_term = 0.0f64;
        for (y, &wxy) in w.row(x).iter().enumerate() {
            if wxy > 0.0 && q[y] > 0.0 {
                row_term += wxy * (wxy / q[y]).log2();
            }
        }
        info += px * row_term;
    }
    Ok(info.max(0.0))
}

/// Result of the capacity solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Lower capacity bound attained by `maximizer`, in bits.
    pub capacity: f64,
    pub maximizer: Distribution,
    pub iterations: u32,
    /// Gap between the upper and lower capacity bounds at the last iteration.
    pub residual: f64,
}

/// Channel capacity by alternating maximization (Blahut-Arimoto).
///
/// Iterates the multiplicative update with the standard bracket
/// `I(p) <= C <= max_x D(w(.|x) || q_p)` as the stopping rule; returns once
/// the bracket width drops below `tol` bits.
pub fn capacity(w: &Dmc, tol: f64, max_iter: u32) -> Result<CapacityResult> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    let n = w.input_size();
    let m = w.output_size();
    let mut p = vec![1.0 / n as f64; n];
    let mut d = vec![0.0f64; n];
    let mut q = vec![0.0f64; m];
    let mut best: Option<CapacityResult> = None;

    for iter in 1..=max_iter {
        for qy in q.iter_mut() {
            *qy = 0.0;
        }
        for (x, &px) in p.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (y, &wxy) in w.row(x).iter().enumerate() {
                q[y] += px * wxy;
            }
        }
        // d[x] = D(w(.|x) || q), the per-input information density.
        let mut upper = f64::NEG_INFINITY;
        let mut lower = 0.0f64;
        for x in 0..n {
            let mut dx = 0.0f64;
            for (y, &wxy) in w.row(x).iter().enumerate() {
                if wxy > 0.0 && q[y] > 0.0 {
                    dx += wxy * (wxy / q[y]).log2();
                }
            }
            d[x] = dx;
            upper = upper.max(dx);
            lower += p[x] * dx;
        }
        let lower = lower.max(0.0);
        let residual = (upper - lower).max(0.0);
        let result = CapacityResult {
            capacity: lower,
            maximizer: Distribution {
                probs: p.clone(),
            },
            iterations: iter,
            residual,
        };
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(result.clone());
        }
        if residual <= tol {
            return Ok(result);
        }
        // Multiplicative update p <- p * 2^d, renormalized.
        let mut norm = 0.0f64;
        for x in 0..n {
            p[x] *= (d[x] - lower).exp2();
            norm += p[x];
        }
        for px in p.iter_mut() {
            *px /= norm;
        }
    }

    let best = best.expect("at least one iteration ran");
    Err(Error::CapacityNotConverged {
        iterations: max_iter,
        residual: best.residual,
        best: Box::new(best),
    })
}

// ---------------------------------------------------------------------------
// Example family
// ---------------------------------------------------------------------------

/// The symmetric input parametrization over the four-symbol alphabet:
/// `(p/2, p/2, (1-p)/2, (1-p)/2)`.
pub fn symmetric_input(p: f64) -> Result<Distribution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "symmetric input parameter must lie in [0,1], got {p}"
        )));
    }
    Ok(Distribution {
        probs: vec![p / 2.0, p / 2.0, (1.0 - p) / 2.0, (1.0 - p) / 2.0],
    })
}

/// The built-in two-state family over X = {1,2,3,4}, Y = {1,2,3,4,e}
/// (index 4 is the erasure symbol, an ordinary output column).
///
/// State 1: inputs 3,4 pass through noiselessly; inputs 1,2 map to a uniform
/// output on {3,4}. State 2: inputs 1,2 pass through with probability 0.5 and
/// erase otherwise; inputs 3,4 map to a uniform output on {1,2} with
/// probability 0.5 and erase otherwise. Capacities are 1 and 0.5 bits, with
/// maximizers supported on the noiseless half of the alphabet; both are known
/// in closed form, so the family is built with exact capacity data.
pub fn example_family() -> ChannelFamily {
    let w1 = Dmc::new(vec![
        vec![0.0, 0.0, 0.5, 0.5, 0.0],
        vec![0.0, 0.0, 0.5, 0.5, 0.0],
        vec![0.0, 0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0, 0.0],
    ])
    .expect("example channel 1 is row-stochastic");
    let w2 = Dmc::new(vec![
        vec![0.5, 0.0, 0.0, 0.0, 0.5],
        vec![0.0, 0.5, 0.0, 0.0, 0.5],
        vec![0.25, 0.25, 0.0, 0.0, 0.5],
        vec![0.25, 0.25, 0.0, 0.0, 0.5],
    ])
    .expect("example channel 2 is row-stochastic");
    let c1_input = Distribution {
        probs: vec![0.0, 0.0, 0.5, 0.5],
    };
    let c2_input = Distribution {
        probs: vec![0.5, 0.5, 0.0, 0.0],
    };
    ChannelFamily::with_capacities(vec![
        ("1".to_string(), w1, 1.0, c1_input),
        ("2".to_string(), w2, 0.5, c2_input),
    ])
    .expect("example family is valid")
}

/// True when `family` is structurally the built-in example family.
pub fn is_example_family(family: &ChannelFamily) -> bool {
    let example = example_family();
    family.num_states() == 2
        && family
            .states()
            .iter()
            .zip(example.states())
            .all(|(a, b)| a.label == b.label && a.channel == b.channel)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(p: f64) -> Distribution {
        symmetric_input(p).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        // Within the simplex tolerance.
        assert!(Distribution::new(vec![0.5, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn symmetric_input_values() {
        let close = |got: &[f64], want: &[f64]| {
            got.iter()
                .zip(want)
                .all(|(a, b)| (a - b).abs() <= 1e-15)
        };
        assert!(close(
            sym(2.0 / 3.0).probs(),
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]
        ));
        assert_eq!(sym(0.0).probs(), &[0.0, 0.0, 0.5, 0.5]);
        assert!(close(
            sym(10.0 / 33.0).probs(),
            &[5.0 / 33.0, 5.0 / 33.0, 23.0 / 66.0, 23.0 / 66.0]
        ));
        assert!(symmetric_input(1.5).is_err());
        assert!(symmetric_input(-0.01).is_err());
    }

    #[test]
    fn example_family_rows() {
        let fam = example_family();
        assert_eq!(fam.input_size(), 4);
        assert_eq!(fam.output_size(), 5);
        // State 1, input 3 (0-based index 2): point mass on output 3.
        assert_eq!(fam.state(0).channel.row(2), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        // State 2, input 1: half direct, half erased.
        assert_eq!(fam.state(1).channel.row(0), &[0.5, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn mutual_information_examples() {
        let fam = example_family();
        let w1 = &fam.state(0).channel;
        let w2 = &fam.state(1).channel;
        // Rate parametrizations of the example family.
        let i1 = mutual_information(&sym(0.4), w1).unwrap();
        assert!((i1 - 0.6).abs() < 1e-12, "got {i1}");
        let i2 = mutual_information(&sym(2.0 / 3.0), w2).unwrap();
        assert!((i2 - 1.0 / 3.0).abs() < 1e-12, "got {i2}");
        // Identical rows carry no information.
        let flat = Dmc::new(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let i0 = mutual_information(&Distribution::uniform(2), &flat).unwrap();
        assert_eq!(i0, 0.0);
    }

    #[test]
    fn mutual_information_dimension_mismatch() {
        let fam = example_family();
        let p = Distribution::uniform(3);
        assert!(mutual_information(&p, &fam.state(0).channel).is_err());
    }

    #[test]
    fn closed_form_rates_on_grid() {
        let fam = example_family();
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let i1 = mutual_information(&sym(p), &fam.state(0).channel).unwrap();
            let i2 = mutual_information(&sym(p), &fam.state(1).channel).unwrap();
            assert!((i1 - (1.0 - p)).abs() <= 1e-9, "p={p}: I1={i1}");
            assert!((i2 - p / 2.0).abs() <= 1e-9, "p={p}: I2={i2}");
        }
    }

    #[test]
    fn capacity_example_channels() {
        let fam = example_family();
        let c1 = capacity(&fam.state(0).channel, 1e-9, CAPACITY_MAX_ITER).unwrap();
        assert!((c1.capacity - 1.0).abs() < 1e-6, "C1 = {}", c1.capacity);
        let c2 = capacity(&fam.state(1).channel, 1e-9, CAPACITY_MAX_ITER).unwrap();
        assert!((c2.capacity - 0.5).abs() < 1e-6, "C2 = {}", c2.capacity);
    }

    #[test]
    fn capacity_noiseless_bsc() {
        let bsc = Dmc::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = capacity(&bsc, 1e-9, 1000).unwrap();
        assert!((c.capacity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn capacity_nonconvergence_carries_best() {
        let fam = example_family();
        let err = capacity(&fam.state(1).channel, 1e-13, 2).unwrap_err();
        match err {
            Error::CapacityNotConverged { best, .. } => {
                assert!(best.capacity > 0.0 && best.capacity < 0.6);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn capacity_dominates_any_input() {
        let fam = example_family();
        for st in fam.states() {
            let cap = capacity(&st.channel, 1e-9, CAPACITY_MAX_ITER).unwrap();
            for i in 0..=100 {
                let p = sym(i as f64 / 100.0);
                let mi = mutual_information(&p, &st.channel).unwrap();
                assert!(
                    cap.capacity >= mi - 1e-9,
                    "state {}: capacity {} < I {mi}",
                    st.label,
                    cap.capacity
                );
            }
        }
    }

    #[test]
    fn family_json_round_trip() {
        let fam = example_family();
        let text = fam.to_json();
        let back = ChannelFamily::from_json(&text).unwrap();
        assert_eq!(back.num_states(), 2);
        assert_eq!(back.state(0).channel, fam.state(0).channel);
        assert!((back.state(0).capacity - 1.0).abs() < 1e-6);
    }

    #[test]
    fn family_json_rejects_bad_row() {
        let text = r#"{"input_size": 2, "output_size": 2,
            "states": [{"label": "1", "rows": [[0.5, 0.5], [0.9, 0.2]]}]}"#;
        let err = ChannelFamily::from_json(text).unwrap_err();
        match err {
            Error::InvalidChannelRow { row, .. } => assert_eq!(row, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn example_capacities_match_solver() {
        // The fixture's closed-form capacity data agrees with the solver.
        let fam = example_family();
        for st in fam.states() {
            let solved = capacity(&st.channel, 1e-9, CAPACITY_MAX_ITER).unwrap();
            assert!(
                (solved.capacity - st.capacity).abs() < 1e-6,
                "state {}: stored {} vs solved {}",
                st.label,
                st.capacity,
                solved.capacity
            );
        }
    }
}
