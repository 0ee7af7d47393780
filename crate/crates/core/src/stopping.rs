//! Stopping times in the fluid and integer models, and the per-profile
//! competitive ratio and regret they induce.
//!
//! Fluid semantics: times are measured in units of the message length `k`,
//! information accumulates at the constant rate of the current
//! (policy piece, state) cell, and the stopping time is the exact
//! piecewise-linear crossing of accumulated information with 1. This is the
//! large-`k` normalization in which the decode-error slack of a concrete
//! code vanishes; it is not configurable here. Finite message lengths are
//! served by the integer model and the simulation harness, which inflate
//! the stopping time explicitly.

use serde::{Deserialize, Serialize};

use crate::channel::{mutual_information, ChannelFamily};
use crate::error::{Error, Result};
use crate::policy::{Policy, StateProfile};

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

/// A normalized stopping time, or unbounded when accumulation stalls forever.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tau {
    Finite(f64),
    Unbounded,
}

impl Tau {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Tau::Finite(t) => Some(*t),
            Tau::Unbounded => None,
        }
    }

    /// `1/tau`, with the unbounded case contributing rate 0.
    pub fn inverse(&self) -> f64 {
        match self {
            Tau::Finite(t) => 1.0 / t,
            Tau::Unbounded => 0.0,
        }
    }
}

/// An integer-model stopping time in channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegerTau {
    Finite(u64),
    Unbounded,
}

impl IntegerTau {
    pub fn finite(&self) -> Option<u64> {
        match self {
            IntegerTau::Finite(n) => Some(*n),
            IntegerTau::Unbounded => None,
        }
    }
}

/// A point of the accumulation trace: normalized time and accumulated
/// information in units of `k` bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time: f64,
    pub info: f64,
}

/// Outcome of a fluid stopping-time computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingResult {
    pub tau: Tau,
    /// Accumulation at each visited segment boundary, ending at the crossing
    /// point when `tau` is finite. Nondecreasing in both coordinates.
    pub trace: Vec<TracePoint>,
}

// ---------------------------------------------------------------------------
// Resolution helpers
// ---------------------------------------------------------------------------

/// Per-(piece, state) information rates in bits per channel use.
pub(crate) fn rate_table(family: &ChannelFamily, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    policy
        .pieces()
        .iter()
        .map(|piece| {
            family
                .states()
                .iter()
                .map(|st| mutual_information(&piece.dist, &st.channel))
                .collect()
        })
        .collect()
}

/// Profile blocks with labels resolved to state indices.
pub(crate) fn resolve_profile(
    family: &ChannelFamily,
    profile: &StateProfile,
) -> Result<Vec<(usize, Option<f64>)>> {
    profile
        .blocks()
        .iter()
        .map(|b| {
            let idx = family
                .state_index(&b.label)
                .ok_or_else(|| Error::UnknownState(b.label.clone()))?;
            Ok((idx, b.duration.finite()))
        })
        .collect()
}

pub(crate) fn piece_durations(policy: &Policy) -> Vec<Option<f64>> {
    policy.pieces().iter().map(|p| p.duration.finite()).collect()
}

// ---------------------------------------------------------------------------
// Fluid sweep
// ---------------------------------------------------------------------------

/// Piecewise-linear accumulation over the merged (piece, block) segments.
/// `rate(piece, state)` must be nonnegative.
pub(crate) fn fluid_sweep(
    piece_durs: &[Option<f64>],
    blocks: &[(usize, Option<f64>)],
    rate: impl Fn(usize, usize) -> f64,
    want_trace: bool,
) -> (Tau, Vec<TracePoint>) {
    let mut trace = Vec::new();
    if want_trace {
        trace.push(TracePoint { time: 0.0, info: 0.0 });
    }
    let mut t = 0.0f64;
    let mut acc = 0.0f64;
    let mut pi = 0usize;
    let mut bi = 0usize;
    let mut rem_piece = piece_durs[0];
    let mut rem_block = blocks[0].1;

    loop {
        let r = rate(pi, blocks[bi].0);
        let seg = match (rem_piece, rem_block) {
            (None, None) => None,
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => Some(a.min(b)),
        };
        match seg {
            None => {
                // Both tails are infinite: constant rate from here on.
                return if r > 0.0 {
                    let tau = t + (1.0 - acc) / r;
                    if want_trace {
                        trace.push(TracePoint { time: tau, info: 1.0 });
                    }
                    (Tau::Finite(tau), trace)
                } else {
                    (Tau::Unbounded, trace)
                };
            }
            Some(len) => {
                if r > 0.0 && acc + r * len >= 1.0 {
                    let tau = t + (1.0 - acc) / r;
                    if want_trace {
                        trace.push(TracePoint { time: tau, info: 1.0 });
                    }
                    return (Tau::Finite(tau), trace);
                }
                acc += r * len;
                t += len;
                if want_trace {
                    trace.push(TracePoint { time: t, info: acc });
                }
                // Advance whichever cursor the segment exhausted.
                if let Some(a) = rem_piece {
                    let left = a - len;
                    if left <= 0.0 {
                        pi += 1;
                        rem_piece = piece_durs[pi];
                    } else {
                        rem_piece = Some(left);
                    }
                }
                if let Some(b) = rem_block {
                    let left = b - len;
                    if left <= 0.0 {
                        bi += 1;
                        rem_block = blocks[bi].1;
                    } else {
                        rem_block = Some(left);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Fluid stopping time of `policy` against `profile`: the exact normalized
/// time at which accumulated mutual information reaches 1 (i.e. `k` bits).
pub fn stopping_time_fluid(
    family: &ChannelFamily,
    policy: &Policy,
    profile: &StateProfile,
) -> Result<StoppingResult> {
    if policy.pieces()[0].dist.len() != family.input_size() {
        return Err(Error::DimensionMismatch(format!(
            "policy alphabet {} does not match family input size {}",
            policy.pieces()[0].dist.len(),
            family.input_size()
        )));
    }
    let rates = rate_table(family, policy)?;
    let blocks = resolve_profile(family, profile)?;
    let durs = piece_durations(policy);
    let (tau, trace) = fluid_sweep(&durs, &blocks, |p, s| rates[p][s], true);
    Ok(StoppingResult { tau, trace })
}

/// Clairvoyant stopping time: accumulation at the per-state capacity rate.
pub fn optimal_stopping_time(
    family: &ChannelFamily,
    profile: &StateProfile,
) -> Result<StoppingResult> {
    let caps = family.capacities();
    let blocks = resolve_profile(family, profile)?;
    let (tau, trace) = fluid_sweep(&[None], &blocks, |_, s| caps[s], true);
    Ok(StoppingResult { tau, trace })
}

/// Integer-model stopping time for a concrete message length `k` in bits:
/// the smallest number of channel uses whose cumulative per-symbol mutual
/// information reaches `k`. Durations are scaled by `k` and rounded to the
/// nearest integer, ties rounding up.
pub fn stopping_time_integer(
    family: &ChannelFamily,
    policy: &Policy,
    profile: &StateProfile,
    k: u32,
) -> Result<IntegerTau> {
    if k == 0 {
        return Ok(IntegerTau::Finite(0));
    }
    let rates = rate_table(family, policy)?;
    let blocks = resolve_profile(family, profile)?;
    let piece_ns: Vec<Option<u64>> = policy
        .pieces()
        .iter()
        .map(|p| p.duration.finite().map(|d| round_to_symbols(d, k)))
        .collect();
    let block_ns: Vec<(usize, Option<u64>)> = blocks
        .iter()
        .map(|&(s, d)| (s, d.map(|d| round_to_symbols(d, k))))
        .collect();

    let target = k as f64;
    let mut t = 0u64;
    let mut acc = 0.0f64;
    let mut pi = 0usize;
    let mut bi = 0usize;
    let mut rem_piece = piece_ns[0];
    let mut rem_block = block_ns[0].1;

    loop {
        let r = rates[pi][block_ns[bi].0];
        let seg = match (rem_piece, rem_block) {
            (None, None) => None,
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => Some(a.min(b)),
        };
        let cross_within = |acc: f64, limit: Option<u64>| -> Option<u64> {
            if r <= 0.0 || acc + r * limit.map_or(f64::INFINITY, |l| l as f64) < target {
                return None;
            }
            let mut m = ((target - acc) / r).ceil() as u64;
            // Guard the float ceiling against off-by-one at exact crossings.
            while m > 1 && acc + (m - 1) as f64 * r >= target {
                m -= 1;
            }
            while acc + m as f64 * r < target {
                m += 1;
            }
            Some(m)
        };
        match seg {
            None => {
                return match cross_within(acc, None) {
                    Some(m) => Ok(IntegerTau::Finite(t + m)),
                    None => Ok(IntegerTau::Unbounded),
                };
            }
            Some(len) => {
                if let Some(m) = cross_within(acc, Some(len)) {
                    if m <= len {
                        return Ok(IntegerTau::Finite(t + m));
                    }
                }
                acc += r * len as f64;
                t += len;
                if let Some(a) = rem_piece {
                    let left = a.saturating_sub(len);
                    if left == 0 {
                        pi += 1;
                        rem_piece = piece_ns[pi];
                    } else {
                        rem_piece = Some(left);
                    }
                }
                if let Some(b) = rem_block {
                    let left = b.saturating_sub(len);
                    if left == 0 {
                        bi += 1;
                        rem_block = block_ns[bi].1;
                    } else {
                        rem_block = Some(left);
                    }
                }
            }
        }
    }
}

/// Rounds a normalized duration to symbols, ties away from zero (i.e. up).
pub(crate) fn round_to_symbols(duration: f64, k: u32) -> u64 {
    (duration * k as f64).round() as u64
}

/// Competitive ratio of one profile: clairvoyant over policy stopping time.
/// An unbounded policy stopping time yields ratio 0.
pub fn ratio(family: &ChannelFamily, policy: &Policy, profile: &StateProfile) -> Result<f64> {
    let opt = optimal_stopping_time(family, profile)?.tau;
    let pol = stopping_time_fluid(family, policy, profile)?.tau;
    Ok(ratio_from_taus(opt, pol))
}

pub(crate) fn ratio_from_taus(opt: Tau, pol: Tau) -> f64 {
    match (opt, pol) {
        (Tau::Finite(a), Tau::Finite(b)) => a / b,
        // Stalled accumulation: the policy never finishes.
        _ => 0.0,
    }
}

/// Regret of one profile in bits per channel use: `1/tau* - 1/tau`, with
/// unbounded times contributing rate 0.
pub fn regret_value(
    family: &ChannelFamily,
    policy: &Policy,
    profile: &StateProfile,
) -> Result<f64> {
    let opt = optimal_stopping_time(family, profile)?.tau;
    let pol = stopping_time_fluid(family, policy, profile)?.tau;
    Ok(opt.inverse() - pol.inverse())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
