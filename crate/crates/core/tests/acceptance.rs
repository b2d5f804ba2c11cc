//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Seeds and tolerances are fixed below.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::Instant;

use common::{agree, sample_perp, sample_pure, sample_r, sample_rbar, within_binomial};
use qmeter_core::comparison::{
    analytic_success, conclusive_classes, fixed_pair_unlabeled_success, kappa_state,
    optimal_test_state, pairwise_success_angle, phi_q, qubit_basis_at_angle, unlabeled_operators,
    Observable, OutcomeClass, Relation, Scenario,
};
use qmeter_core::haar::{haar_state, perp_moment, pure_moment, r_operator, rbar, seeded_rng};
use qmeter_core::protocol::{
    run_campaign, run_sweep, CampaignConfig, CampaignResult, GroundTruth, StateChoice,
};
use qmeter_core::symmetry::{named_basis, slots, symmetrizer, BasisFamily, PairSplit};
use qmeter_core::tensor::span_projector;
use qmeter_core::{rank, support_projector, Operator, StateVector, TOL_RANK};

const SEED: u64 = 20_240_601;
const ANALYTIC_TOL: f64 = 1e-10;
const SPECTRAL_TOL: f64 = 1e-9;
const RATE_SIGMAS: f64 = 3.0;
const CAMPAIGN_TRIALS: u64 = 1_000_000;
const SWEEP_TRIALS: u64 = 100_000;
const MOMENT_SAMPLES: usize = 100_000;
const LABELED_BUDGET_S: f64 = 60.0;
const UNLABELED_BUDGET_S: f64 = 120.0;
const MOMENT_BUDGET_S: f64 = 120.0;

struct Gate {
    failed: usize,
    total: usize,
}

impl Gate {
    fn line(&mut self, criterion: u32, passed: bool, text: String) {
        self.total += 1;
        if !passed {
            self.failed += 1;
        }
        println!(
            "[{}] {criterion} {text}",
            if passed { "PASS" } else { "FAIL" }
        );
    }
}

fn campaign(scenario: Scenario, test_state: StateChoice, seed: u64) -> CampaignResult {
    let config = CampaignConfig {
        scenario,
        trials: CAMPAIGN_TRIALS,
        seed,
        ground_truth: GroundTruth::Both,
        test_state,
    };
    run_campaign(&config, 0).expect("campaign runs")
}

/// Largest absolute eigenvalue of the Hermitian difference.
fn projector_distance(a: &Operator, b: &Operator) -> f64 {
    (a - b)
        .eigenvalues()
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

fn rate_line(result: &CampaignResult, expected: f64) -> (bool, String) {
    let t = result.different.as_ref().expect("different truth was run");
    let (ok, z) = within_binomial(t.different_verdicts, t.trials, expected, RATE_SIGMAS);
    (
        ok,
        format!("MC {:.6} over {} trials (z {z:+.2})", t.rate, t.trials),
    )
}

fn labeled_rates(gate: &mut Gate) {
    for d in 2..=5usize {
        let start = Instant::now();
        let scenario = Scenario::Labeled { dim: d };
        let state = optimal_test_state(scenario).unwrap();
        let classes = conclusive_classes(scenario, &state).unwrap();
        let analytic = analytic_success(scenario, &state, &classes).unwrap().total;
        let dev = (analytic - 1.0 / d as f64).abs();
        let result = campaign(scenario, StateChoice::Optimal, SEED + d as u64);
        let (mc_ok, mc) = rate_line(&result, 1.0 / d as f64);
        let secs = start.elapsed().as_secs_f64();
        gate.line(
            1,
            dev <= ANALYTIC_TOL && mc_ok && secs < LABELED_BUDGET_S,
            format!("labeled d={d}: analytic {analytic:.12} (dev {dev:.1e}) | {mc} | {secs:.1} s"),
        );
        let fp = result.false_positives.unwrap();
        gate.line(
            3,
            fp == 0,
            format!("labeled d={d}, devices equal: {fp} Different verdicts in {CAMPAIGN_TRIALS}"),
        );
    }
}

fn unlabeled_rates(gate: &mut Gate) {
    let start = Instant::now();
    let scenario = Scenario::UnlabeledQubit;
    let phi = optimal_test_state(scenario).unwrap();
    let sd = OutcomeClass::Unlabeled(Relation::Same, Relation::Diff);
    let ds = OutcomeClass::Unlabeled(Relation::Diff, Relation::Same);
    let breakdown = analytic_success(scenario, &phi, &[sd, ds]).unwrap();
    let split_dev = [sd, ds]
        .iter()
        .map(|c| (breakdown.class(*c).unwrap() - 2.0 / 9.0).abs())
        .fold(0.0, f64::max);
    let total_dev = (breakdown.total - 4.0 / 9.0).abs();
    let result = campaign(scenario, StateChoice::Optimal, SEED + 10);
    let (mc_ok, mc) = rate_line(&result, 4.0 / 9.0);
    let mut all_ok = total_dev <= ANALYTIC_TOL && split_dev <= ANALYTIC_TOL && mc_ok;
    let mut text = format!(
        "phi_Q: analytic {:.12} (2/9 split dev {split_dev:.1e}) | {mc}",
        breakdown.total
    );
    let fp = result.false_positives.unwrap();
    gate.line(
        3,
        fp == 0,
        format!("phi_Q, devices equal: {fp} Different verdicts in {CAMPAIGN_TRIALS}"),
    );
    for j in 1..=3usize {
        let state = kappa_state(j).unwrap();
        let classes = conclusive_classes(scenario, &state).unwrap();
        let analytic = analytic_success(scenario, &state, &classes).unwrap().total;
        let dev = (analytic - 1.0 / 9.0).abs();
        let result = campaign(
            scenario,
            StateChoice::Kappa { index: j },
            SEED + 10 + j as u64,
        );
        let (ok, mc) = rate_line(&result, 1.0 / 9.0);
        all_ok &= dev <= ANALYTIC_TOL
            && ok
            && classes == [OutcomeClass::Unlabeled(Relation::Diff, Relation::Diff)];
        text += &format!(" || kappa{j}: analytic {analytic:.12} | {mc}");
        let fp = result.false_positives.unwrap();
        gate.line(
            3,
            fp == 0,
            format!("kappa{j}, devices equal: {fp} Different verdicts in {CAMPAIGN_TRIALS}"),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    gate.line(
        2,
        all_ok && secs < UNLABELED_BUDGET_S,
        format!("unlabeled rates: {text} | {secs:.1} s"),
    );
}

fn angle_law(gate: &mut Gate) {
    let start = Instant::now();
    let thetas: Vec<f64> = (0..=32).map(|i| i as f64 * FRAC_PI_2 / 32.0).collect();
    let state = optimal_test_state(Scenario::UnlabeledQubit).unwrap();
    let a = Observable::computational(2, false).unwrap();
    let classes = [
        OutcomeClass::Unlabeled(Relation::Same, Relation::Diff),
        OutcomeClass::Unlabeled(Relation::Diff, Relation::Same),
    ];
    let direct_dev = thetas
        .iter()
        .map(|&t| {
            let b = qubit_basis_at_angle(t, false);
            (fixed_pair_unlabeled_success(&a, &b, &state, &classes).unwrap()
                - pairwise_success_angle(t))
            .abs()
        })
        .fold(0.0, f64::max);
    gate.line(
        4,
        direct_dev <= SPECTRAL_TOL,
        format!("angle law, direct 16x16 evaluation on 33 points: max dev {direct_dev:.1e}"),
    );
    let rows = run_sweep(&thetas, SWEEP_TRIALS, SEED + 20, 0).unwrap();
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for row in &rows {
        let (ok, z) = within_binomial(
            row.successes,
            row.trials,
            pairwise_success_angle(row.theta),
            RATE_SIGMAS,
        );
        worst = worst.max(z.abs());
        if !ok {
            misses.push(format!("theta={:.4} z={z:+.2}", row.theta));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    gate.line(
        4,
        misses.is_empty(),
        format!(
            "angle law, {SWEEP_TRIALS}-shot estimates on 33 points: max |z| {worst:.2}{} | {secs:.1} s",
            if misses.is_empty() { String::new() } else { format!(", outside 3 sigma: {}", misses.join(", ")) }
        ),
    );
}

fn subspace_facts(gate: &mut Gate) {
    let p = |s: &[usize]| symmetrizer(&slots(s), 4, 2).unwrap();
    let ops = unlabeled_operators(2).unwrap();
    let get = |x, y| ops.get_xy(x, y);
    use Relation::{Diff, Same};
    let ranks = [
        ("P1234", rank(&p(&[1, 2, 3, 4]), TOL_RANK), 5),
        (
            "P12 (x) P34",
            rank(&(&p(&[1, 2]) * &p(&[3, 4])), TOL_RANK),
            9,
        ),
        ("P12 (x) I", rank(&p(&[1, 2]), TOL_RANK), 12),
        (
            "support O_eq(diff,diff)",
            rank(
                &support_projector(&get(Diff, Diff).o_equal, TOL_RANK).unwrap(),
                TOL_RANK,
            ),
            13,
        ),
        ("Q(diff,diff)", rank(&get(Diff, Diff).q, TOL_RANK), 3),
        ("Q(same,diff)", rank(&get(Same, Diff).q, TOL_RANK), 1),
        ("Q(same,same)", rank(&get(Same, Same).q, TOL_RANK), 0),
    ];
    let rank_ok = ranks.iter().all(|(_, got, want)| got == want);
    let listing: Vec<String> = ranks
        .iter()
        .map(|(n, got, want)| format!("{n}={got}/{want}"))
        .collect();
    gate.line(5, rank_ok, format!("ranks: {}", listing.join(", ")));

    let q = &(&p(&[1, 2, 3]) - &p(&[1, 2, 3, 4])) + &(&p(&[1, 2, 4]) - &p(&[1, 2, 3, 4]));
    let nonzero: Vec<f64> = q
        .eigenvalues()
        .into_iter()
        .filter(|l| l.abs() > SPECTRAL_TOL)
        .collect();
    let expected = [
        2.0 / 3.0,
        2.0 / 3.0,
        2.0 / 3.0,
        4.0 / 3.0,
        4.0 / 3.0,
        4.0 / 3.0,
    ];
    let spec_dev = if nonzero.len() == 6 {
        nonzero
            .iter()
            .zip(expected)
            .map(|(l, e)| (l - e).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    gate.line(
        5,
        spec_dev <= SPECTRAL_TOL,
        format!(
            "spec(Q123+Q124) = {{2/3 x3, 4/3 x3}}: {} nonzero, max dev {spec_dev:.1e}",
            nonzero.len()
        ),
    );

    let omega = named_basis(BasisFamily::Omega, PairSplit::S12_34, 2).unwrap();
    let omega_p = named_basis(BasisFamily::OmegaPrime, PairSplit::S12_34, 2).unwrap();
    let mut cross_dev: f64 = 0.0;
    for (j, w) in omega.iter().enumerate() {
        for (k, wp) in omega_p.iter().enumerate() {
            let target = if j == k { -2.0 } else { 0.0 };
            cross_dev = cross_dev.max((w.inner(wp) - qmeter_core::C64::new(target, 0.0)).norm());
        }
    }
    gate.line(
        5,
        cross_dev <= ANALYTIC_TOL,
        format!("<omega_j|omega'_k> = -2 delta_jk: max dev {cross_dev:.1e}"),
    );

    let k2 = &named_basis(BasisFamily::KappaPrime, PairSplit::S12_34, 2).unwrap()[0];
    let value = (&p(&[1, 3]) * &p(&[2, 4])).expectation(k2);
    gate.line(
        5,
        (value - 0.25).abs() <= ANALYTIC_TOL,
        format!("<kappa2'|P13 (x) P24|kappa2'> = {value:.12}"),
    );
}

fn moment_oracles(gate: &mut Gate) {
    let start = Instant::now();
    let mut rows: Vec<(String, bool, f64)> = Vec::new();
    let mut record = |name: String, a: qmeter_core::haar::MomentAgreement| {
        rows.push((name, a.passed, a.max_sigma))
    };
    let mut seed = SEED + 100;
    let mut next = || {
        seed += 1;
        seed
    };
    for (k, d) in [(1, 2), (2, 2), (3, 2), (4, 2), (1, 3), (2, 3)] {
        let expected = pure_moment(k, d).unwrap().payload;
        record(
            format!("pure k={k} d={d}"),
            agree(&sample_pure(k, d, MOMENT_SAMPLES, next()), &expected),
        );
    }
    let zero2 = StateVector::basis(2, &[0]).unwrap();
    let zero3 = StateVector::basis(3, &[0]).unwrap();
    let random3 = haar_state(3, &mut seeded_rng(SEED, 1));
    for (k, psi, label) in [
        (1, &zero2, "d=2 |0>"),
        (2, &zero2, "d=2 |0>"),
        (2, &zero3, "d=3 |0>"),
        (2, &random3, "d=3 random"),
    ] {
        let expected = perp_moment(k, psi).unwrap();
        record(
            format!("perp k={k} {label}"),
            agree(&sample_perp(k, psi, MOMENT_SAMPLES, next()), &expected),
        );
    }
    for split in PairSplit::ALL {
        let expected = r_operator(split, 2).unwrap().payload;
        record(
            format!("R {split} d=2"),
            agree(&sample_r(split, 2, MOMENT_SAMPLES, next()), &expected),
        );
    }
    for d in [2, 3] {
        for relation in Relation::ALL {
            let expected = rbar(relation, d).unwrap().payload;
            record(
                format!("Rbar {relation} d={d}"),
                agree(&sample_rbar(relation, d, MOMENT_SAMPLES, next()), &expected),
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let all = rows.iter().all(|(_, ok, _)| *ok);
    let worst = rows.iter().map(|(_, _, s)| *s).fold(0.0, f64::max);
    let failures: Vec<&str> = rows
        .iter()
        .filter(|(_, ok, _)| !ok)
        .map(|(n, _, _)| n.as_str())
        .collect();
    gate.line(
        6,
        all && secs < MOMENT_BUDGET_S,
        format!(
            "{} moment operators vs {MOMENT_SAMPLES}-sample means at 5 sigma: max {worst:.2} sigma{} | {secs:.1} s",
            rows.len(),
            if failures.is_empty() { String::new() } else { format!(", failed: {}", failures.join(", ")) }
        ),
    );
}

fn q_extraction(gate: &mut Gate) {
    let ops = unlabeled_operators(2).unwrap();
    let kappas = named_basis(BasisFamily::Kappa, PairSplit::S12_34, 2).unwrap();
    let dd = projector_distance(
        &ops.get_xy(Relation::Diff, Relation::Diff).q,
        &span_projector(&kappas).unwrap(),
    );
    gate.line(
        7,
        dd < SPECTRAL_TOL,
        format!("Q(diff,diff) vs span{{kappa1..3}}: distance {dd:.1e}"),
    );
    let phi = Operator::projector_onto(&phi_q());
    let sd = projector_distance(&ops.get_xy(Relation::Same, Relation::Diff).q, &phi);
    let ds = projector_distance(&ops.get_xy(Relation::Diff, Relation::Same).q, &phi);
    gate.line(
        7,
        sd.max(ds) < SPECTRAL_TOL,
        format!("Q(same,diff), Q(diff,same) vs |phi_Q><phi_Q|: distances {sd:.1e}, {ds:.1e}"),
    );
}

fn determinism(gate: &mut Gate) {
    let configs = [
        (Scenario::Labeled { dim: 3 }, StateChoice::Optimal),
        (Scenario::UnlabeledQubit, StateChoice::Optimal),
        (Scenario::UnlabeledQubit, StateChoice::Kappa { index: 3 }),
    ];
    let mut ok = true;
    for (scenario, test_state) in configs {
        let config = CampaignConfig {
            scenario,
            trials: 50_000,
            seed: SEED + 30,
            ground_truth: GroundTruth::Both,
            test_state,
        };
        let outputs: Vec<String> = [1, 1, 2, 4]
            .iter()
            .map(|&w| serde_json::to_string_pretty(&run_campaign(&config, w).unwrap()).unwrap())
            .collect();
        ok &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    let thetas = [0.1, 0.7, 1.3];
    let sweeps: Vec<String> = [1, 3]
        .iter()
        .map(|&w| serde_json::to_string(&run_sweep(&thetas, 20_000, SEED, w).unwrap()).unwrap())
        .collect();
    ok &= sweeps[0] == sweeps[1];
    gate.line(
        8,
        ok,
        "campaign and sweep outputs byte-identical across repeated runs and 1/2/3/4 workers"
            .to_string(),
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut gate = Gate {
        failed: 0,
        total: 0,
    };
    labeled_rates(&mut gate);
    unlabeled_rates(&mut gate);
    angle_law(&mut gate);
    subspace_facts(&mut gate);
    moment_oracles(&mut gate);
    q_extraction(&mut gate);
    determinism(&mut gate);
    println!(
        "acceptance: {} of {} lines passed in {:.1} s",
        gate.total - gate.failed,
        gate.total,
        start.elapsed().as_secs_f64()
    );
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
