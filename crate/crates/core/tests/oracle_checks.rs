//! Cross-validation between the numeric adversary search, the closed-form
//! case analysis, and the fixed-set upper bound.

use avc_competitive_core::adversary::{
    s_hat_1, s_hat_2, worst_case, worst_case_case_split, worst_regret, AdversarySpec,
};
use avc_competitive_core::channel::{example_family, symmetric_input};
use avc_competitive_core::competitive::{
    optimize_cr, optimize_regret, reproduce_chain, upper_bound_fixed_sets, PolicySearchSpace,
};
use avc_competitive_core::policy::{Duration, Piece, Policy, StateProfile};
use avc_competitive_core::stopping::{
    optimal_stopping_time, ratio, regret_value, stopping_time_fluid,
};

fn two_piece(p1: f64, t: f64) -> Policy {
    Policy::two(
        symmetric_input(p1).unwrap(),
        t,
        symmetric_input(2.0 / 3.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn brute_force_tracks_case_analysis_on_grid() {
    // 11x11 sweep of (p1, t): the block adversary at grid 1/16 must agree
    // with the closed-form slowdown factor within 0.06.
    let fam = example_family();
    let spec = AdversarySpec::brute(4, 0.0625, 4.0);
    let mut max_gap = 0.0f64;
    for i in 0..=10 {
        let p1 = i as f64 * (2.0 / 3.0) / 10.0;
        for j in 0..=10 {
            let t = 1.0 + j as f64 / 10.0;
            let closed = worst_case_case_split(p1, t).unwrap();
            let brute = worst_case(&fam, &two_piece(p1, t), &spec).unwrap();
            let beta_brute = 1.0 / brute.ratio;
            let gap = (beta_brute - closed.beta).abs();
            max_gap = max_gap.max(gap);
            assert!(
                gap <= 0.06,
                "p1={p1} t={t}: brute beta {beta_brute} vs closed {} (case {:?})",
                closed.beta,
                closed.case
            );
        }
    }
    // The agreement is tight somewhere, not just within tolerance everywhere.
    assert!(max_gap < 0.06, "max gap {max_gap}");
}

#[test]
fn worst_case_lower_bounds_every_enumerated_profile() {
    let fam = example_family();
    let policy = two_piece(0.25, 1.25);
    let spec = AdversarySpec::brute(3, 0.25, 3.0);
    let res = worst_case(&fam, &policy, &spec).unwrap();
    for profile_text in [
        "1^inf",
        "2^inf",
        "1^1,2^inf",
        "2^1,1^inf",
        "2^1.5,1^0.25,2^inf",
        "1^0.5,2^2,1^inf",
    ] {
        let profile = StateProfile::parse(profile_text).unwrap();
        let r = ratio(&fam, &policy, &profile).unwrap();
        assert!(
            res.ratio <= r + 1e-12,
            "{profile_text}: min {} above profile ratio {r}",
            res.ratio
        );
    }
}

#[test]
fn upper_bound_matches_explicit_profile_ratios() {
    // The closed-form fixed-set bound equals the exact fluid-model minimum
    // over the constructed profiles, for sampled (p1, p2).
    let fam = example_family();
    for i in 0..50 {
        let p1 = (i as f64 * 37.0 % 101.0) / 100.0;
        let p2 = (i as f64 * 53.0 % 101.0) / 100.0;
        let ub = upper_bound_fixed_sets(p1, p2).unwrap();
        let policy = Policy::new(vec![
            Piece {
                dist: symmetric_input(p1).unwrap(),
                duration: Duration::Finite(1.0),
            },
            Piece {
                dist: symmetric_input(p2).unwrap(),
                duration: Duration::Finite(0.75),
            },
            Piece {
                dist: symmetric_input(2.0 / 3.0).unwrap(),
                duration: Duration::Infinite,
            },
        ])
        .unwrap();
        let mut min_ratio = f64::INFINITY;
        for profile in s_hat_1(&fam)
            .unwrap()
            .into_iter()
            .chain(s_hat_2(&fam, 0.25).unwrap())
        {
            let r = ratio(&fam, &policy, &profile).unwrap();
            min_ratio = min_ratio.min(r);
        }
        assert!(
            (ub.value - min_ratio).abs() <= 1e-9,
            "p1={p1} p2={p2}: closed {} vs fluid {min_ratio}",
            ub.value
        );
    }
}

#[test]
fn shat2_ratio_closed_form_matches_fluid() {
    let fam = example_family();
    for i in 0..50 {
        let p1 = (i as f64 * 41.0 % 101.0) / 100.0;
        let p2 = (i as f64 * 29.0 % 101.0) / 100.0;
        let policy = Policy::new(vec![
            Piece {
                dist: symmetric_input(p1).unwrap(),
                duration: Duration::Finite(1.0),
            },
            Piece {
                dist: symmetric_input(p2).unwrap(),
                duration: Duration::Finite(0.75),
            },
            Piece {
                dist: symmetric_input(2.0 / 3.0).unwrap(),
                duration: Duration::Infinite,
            },
        ])
        .unwrap();
        let expected = 1.75 / (4.0 - 1.5 * p1);
        for profile in s_hat_2(&fam, 0.25).unwrap() {
            let tau = stopping_time_fluid(&fam, &policy, &profile)
                .unwrap()
                .tau
                .finite()
                .expect("mix profiles always finish");
            let tau_opt = optimal_stopping_time(&fam, &profile)
                .unwrap()
                .tau
                .finite()
                .unwrap();
            assert!((tau_opt - 1.75).abs() <= 1e-12);
            assert!(
                (tau_opt / tau - expected).abs() <= 1e-9,
                "p1={p1} p2={p2} {profile}: ratio {} vs {expected}",
                tau_opt / tau
            );
        }
    }
}

#[test]
fn more_pieces_never_hurt_on_nested_grids() {
    // The one-piece optimum is embedded in the two-piece grid (equal
    // distributions in both pieces), so the searched value is monotone.
    let fam = example_family();
    let adversary = AdversarySpec::brute(3, 0.125, 4.0);
    let space1 = PolicySearchSpace::example_symmetric(1, 1.0 / 12.0, 0.0, (1.0, 2.0));
    let space2 = PolicySearchSpace::example_symmetric(2, 1.0 / 12.0, 0.5, (1.0, 2.0));
    let one = optimize_cr(&fam, &space1, &adversary).unwrap();
    let two = optimize_cr(&fam, &space2, &adversary).unwrap();
    assert!(
        two.cr_lower >= one.cr_lower - 1e-12,
        "ell=2 value {} below ell=1 value {}",
        two.cr_lower,
        one.cr_lower
    );
}

#[test]
fn two_piece_search_beats_eleven_twentyfourths() {
    let fam = example_family();
    let space = PolicySearchSpace::example_symmetric(2, 1.0 / 66.0, 0.125, (1.0, 2.0));
    let adversary = AdversarySpec::brute(3, 0.125, 4.0);
    let report = optimize_cr(&fam, &space, &adversary).unwrap();
    assert!(
        report.cr_lower >= 11.0 / 24.0 - 0.02,
        "cr_lower = {}",
        report.cr_lower
    );
}

#[test]
fn refinement_never_decreases_the_score() {
    let fam = example_family();
    let adversary = AdversarySpec::brute(3, 0.125, 4.0);
    let coarse = PolicySearchSpace::example_symmetric(1, 0.25, 0.0, (1.0, 2.0));
    let base = optimize_cr(&fam, &coarse, &adversary).unwrap();
    let mut refined_space = coarse.clone();
    refined_space.refine = true;
    let refined = optimize_cr(&fam, &refined_space, &adversary).unwrap();
    assert!(refined.cr_lower >= base.cr_lower - 1e-15);
}

#[test]
fn single_policy_worst_regret_examples() {
    let fam = example_family();
    let policy = Policy::single(symmetric_input(2.0 / 3.0).unwrap());
    let spec = AdversarySpec::brute(3, 0.25, 4.0);
    let res = worst_regret(&fam, &policy, &spec).unwrap();
    // The all-ones sequence forces 1/tau* - 1/3 = 2/3; nothing is worse.
    assert!((res.regret - 2.0 / 3.0).abs() <= 1e-12, "regret = {}", res.regret);
    let direct = regret_value(&fam, &policy, &res.witness).unwrap();
    assert!((res.regret - direct).abs() <= 1e-12);
    let ones = regret_value(&fam, &policy, &StateProfile::constant("1")).unwrap();
    assert!((ones - 2.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn regret_optimization_matches_direct_scan() {
    // Independent double loop over the same grids reproduces the report.
    let fam = example_family();
    let space = PolicySearchSpace::example_symmetric(1, 1.0 / 12.0, 0.0, (1.0, 2.0));
    let adversary = AdversarySpec::brute(3, 0.25, 4.0);
    let report = optimize_regret(&fam, &space, &adversary).unwrap();

    let mut best = f64::INFINITY;
    for i in 0..=12 {
        let p = i as f64 / 12.0;
        let policy = Policy::single(symmetric_input(p).unwrap());
        let worst = worst_regret(&fam, &policy, &adversary).unwrap().regret;
        best = best.min(worst);
    }
    assert!(
        (report.regret - best).abs() <= 1e-12,
        "report {} vs scan {best}",
        report.regret
    );
    assert!((report.regret - 2.0 / 3.0).abs() <= 1e-9);
}

#[test]
fn chain_report_is_bitwise_deterministic() {
    let fam = example_family();
    let a = serde_json::to_string(&reproduce_chain(&fam, true).unwrap()).unwrap();
    let b = serde_json::to_string(&reproduce_chain(&fam, true).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn chain_lower_bound_below_upper_bound() {
    let fam = example_family();
    let report = reproduce_chain(&fam, true).unwrap();
    assert!(report.cr2_lower <= report.cr_upper + 1e-12);
    assert!(report.cr1_fixed_set < report.cr2_lower);
}
