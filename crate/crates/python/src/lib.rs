//! Python bindings: channel families, stopping times, worst-case search,
//! the chain reproduction, and the Monte Carlo harness.
//!
//! Policies are passed as strings: the shorthand `single:<p>` /
//! `two:<p1>@<t>,<p2>` for the four-symbol symmetric parametrization, or a
//! JSON document `{"pieces": [{"p": [...], "duration": ...}]}`. Profiles use
//! the block grammar `label^duration,...,label^inf`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use avc_competitive_core::adversary::{
    worst_case, worst_case_case_split, worst_regret, AdversarySpec,
};
use avc_competitive_core::channel::{self, ChannelFamily, Distribution, Dmc};
use avc_competitive_core::competitive::{reproduce_chain, upper_bound_fixed_sets};
use avc_competitive_core::policy::{parse_policy_shorthand, Policy, StateProfile};
use avc_competitive_core::sim::{run_sim_with, DecoderConfig, SimOptions};
use avc_competitive_core::stopping::{
    optimal_stopping_time, ratio, regret_value, stopping_time_fluid,
};

fn err<T>(e: avc_competitive_core::Error) -> PyResult<T> {
    Err(PyValueError::new_err(e.to_string()))
}

fn parse_policy(text: &str) -> PyResult<Policy> {
    let parsed = if text.trim_start().starts_with('{') {
        Policy::from_json(text)
    } else {
        parse_policy_shorthand(text)
    };
    parsed.or_else(err)
}

fn parse_profile(text: &str) -> PyResult<StateProfile> {
    StateProfile::parse(text).or_else(err)
}

/// Optional stopping time plus the accumulation trace as (time, info) pairs.
type TauWithTrace = (Option<f64>, Vec<(f64, f64)>);

/// A state-indexed family of discrete memoryless channels.
#[pyclass]
struct Family {
    inner: ChannelFamily,
}

#[pymethods]
impl Family {
    /// The built-in two-state example family.
    #[staticmethod]
    fn example() -> Family {
        Family {
            inner: channel::example_family(),
        }
    }

    /// Load a family from the channel JSON format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Family> {
        ChannelFamily::from_json(text)
            .map(|inner| Family { inner })
            .or_else(err)
    }

    fn labels(&self) -> Vec<String> {
        self.inner.states().iter().map(|s| s.label.clone()).collect()
    }

    fn capacities(&self) -> Vec<f64> {
        self.inner.capacities()
    }

    #[getter]
    fn input_size(&self) -> usize {
        self.inner.input_size()
    }

    #[getter]
    fn output_size(&self) -> usize {
        self.inner.output_size()
    }

    /// Mutual information in bits of an input distribution through one state.
    fn mutual_information(&self, label: &str, p: Vec<f64>) -> PyResult<f64> {
        let idx = self
            .inner
            .state_index(label)
            .ok_or_else(|| PyValueError::new_err(format!("unknown state `{label}`")))?;
        let dist = Distribution::new(p).or_else(err)?;
        channel::mutual_information(&dist, &self.inner.state(idx).channel).or_else(err)
    }

    /// Fluid stopping time of a policy against a profile: `(tau, trace)`,
    /// where `tau` is None when accumulation never reaches the target.
    fn stopping_time(&self, policy: &str, profile: &str) -> PyResult<TauWithTrace> {
        let res = stopping_time_fluid(&self.inner, &parse_policy(policy)?, &parse_profile(profile)?)
            .or_else(err)?;
        let trace = res.trace.iter().map(|t| (t.time, t.info)).collect();
        Ok((res.tau.finite(), trace))
    }

    /// Clairvoyant stopping time (per-state capacity accumulation).
    fn optimal_stopping_time(&self, profile: &str) -> PyResult<Option<f64>> {
        Ok(optimal_stopping_time(&self.inner, &parse_profile(profile)?)
            .or_else(err)?
            .tau
            .finite())
    }

    fn ratio(&self, policy: &str, profile: &str) -> PyResult<f64> {
        ratio(&self.inner, &parse_policy(policy)?, &parse_profile(profile)?).or_else(err)
    }

    fn regret(&self, policy: &str, profile: &str) -> PyResult<f64> {
        regret_value(&self.inner, &parse_policy(policy)?, &parse_profile(profile)?).or_else(err)
    }

    /// Worst-case ratio over block-form profiles:
    /// `(ratio, witness, evaluations)`.
    #[pyo3(signature = (policy, max_blocks=4, grid=0.0625, horizon=4.0))]
    fn worst_case_blocks(
        &self,
        policy: &str,
        max_blocks: usize,
        grid: f64,
        horizon: f64,
    ) -> PyResult<(f64, String, u64)> {
        let res = worst_case(
            &self.inner,
            &parse_policy(policy)?,
            &AdversarySpec::brute(max_blocks, grid, horizon),
        )
        .or_else(err)?;
        Ok((res.ratio, res.witness.to_string(), res.evaluations))
    }

    /// Worst-case regret over block-form profiles:
    /// `(regret, witness, evaluations)`.
    #[pyo3(signature = (policy, max_blocks=4, grid=0.0625, horizon=4.0))]
    fn worst_regret_blocks(
        &self,
        policy: &str,
        max_blocks: usize,
        grid: f64,
        horizon: f64,
    ) -> PyResult<(f64, String, u64)> {
        let res = worst_regret(
            &self.inner,
            &parse_policy(policy)?,
            &AdversarySpec::brute(max_blocks, grid, horizon),
        )
        .or_else(err)?;
        Ok((res.regret, res.witness.to_string(), res.evaluations))
    }

    /// Monte Carlo decoding-error estimate. Returns
    /// `(trials, errors, decode_time)`.
    #[pyo3(signature = (policy, profile, k, delta=0.25, g=0.1, trials=200, seed=0, min_subchunk=4, ensemble=false, decode_time=None))]
    #[allow(clippy::too_many_arguments)]
    fn run_sim(
        &self,
        policy: &str,
        profile: &str,
        k: u32,
        delta: f64,
        g: f64,
        trials: u64,
        seed: u64,
        min_subchunk: usize,
        ensemble: bool,
        decode_time: Option<usize>,
    ) -> PyResult<(u64, u64, usize)> {
        let config = DecoderConfig {
            g,
            delta,
            min_subchunk,
        };
        let opts = SimOptions {
            ensemble,
            decode_time_override: decode_time,
            allow_large_k: false,
        };
        let out = run_sim_with(
            &self.inner,
            &parse_policy(policy)?,
            &parse_profile(profile)?,
            k,
            &config,
            trials,
            seed,
            &opts,
        )
        .or_else(err)?;
        Ok((out.trials, out.errors, out.decode_time))
    }
}

/// The four-symbol symmetric input `(p/2, p/2, (1-p)/2, (1-p)/2)`.
#[pyfunction]
fn symmetric_input(p: f64) -> PyResult<Vec<f64>> {
    channel::symmetric_input(p)
        .map(|d| d.probs().to_vec())
        .or_else(err)
}

/// Channel capacity of a row-stochastic matrix:
/// `(capacity, maximizer, iterations, residual)`.
#[pyfunction]
#[pyo3(signature = (rows, tol=1e-9, max_iter=400_000))]
fn capacity(rows: Vec<Vec<f64>>, tol: f64, max_iter: u32) -> PyResult<(f64, Vec<f64>, u32, f64)> {
    let dmc = Dmc::new(rows).or_else(err)?;
    let res = channel::capacity(&dmc, tol, max_iter).or_else(err)?;
    Ok((
        res.capacity,
        res.maximizer.probs().to_vec(),
        res.iterations,
        res.residual,
    ))
}

/// Mutual information in bits for `p(x) w(y|x)`.
#[pyfunction]
fn mutual_information(p: Vec<f64>, rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let dist = Distribution::new(p).or_else(err)?;
    let dmc = Dmc::new(rows).or_else(err)?;
    channel::mutual_information(&dist, &dmc).or_else(err)
}

/// Closed-form worst-case factor for the two-piece symmetric policy:
/// `(beta, case, r_star)`.
#[pyfunction]
fn case_split(p1: f64, t: f64) -> PyResult<(f64, String, f64)> {
    let cs = worst_case_case_split(p1, t).or_else(err)?;
    Ok((cs.beta, cs.case.to_string(), cs.r_star))
}

/// Fixed-set upper bound at one `(p1, p2)` point: `(value, case)`.
#[pyfunction]
fn upper_bound(p1: f64, p2: f64) -> PyResult<(f64, String)> {
    let ub = upper_bound_fixed_sets(p1, p2).or_else(err)?;
    Ok((ub.value, ub.case.to_string()))
}

/// Run the chain checks on the example family; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (fast=false))]
fn reproduce(fast: bool) -> PyResult<String> {
    let family = channel::example_family();
    let report = reproduce_chain(&family, fast).or_else(err)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

#[pymodule]
fn avc_competitive(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Family>()?;
    m.add_function(wrap_pyfunction!(symmetric_input, m)?)?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(case_split, m)?)?;
    m.add_function(wrap_pyfunction!(upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    Ok(())
}
