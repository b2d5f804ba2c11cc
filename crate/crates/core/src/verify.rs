//! Closed-form identity checks behind `qmeter verify`.
//!
//! Every check compares a computed scalar with an expected value under an
//! absolute tolerance. Structural facts (ranks, memberships) are phrased as
//! numbers too, so one report format covers all of them.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};
use std::fmt::Write as _;

use serde::Serialize;

use crate::comparison::{
    analytic_success, conclusive_classes, fixed_pair_unlabeled_success, kappa_state,
    labeled_outcome_probabilities, max_success_on_subspace, optimal_test_state,
    pairwise_success_angle, phi_q, qubit_basis_at_angle, unlabeled_operators, Hypothesis,
    Observable, OutcomeClass, Relation, Scenario, TestState,
};
use crate::error::Result;
use crate::haar::{perp_moment, pure_moment, r_operator, rbar};
use crate::symmetry::{
    antisymmetrizer, named_basis, slots, swap, symmetrizer, BasisFamily, PairSplit,
};
use crate::tensor::{
    kron, rank, span_projector, support_projector, Operator, StateVector, TOL_ABS, TOL_RANK,
};

/// Tolerance for eigenvalue and projector-distance checks.
pub const TOL_SPECTRAL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// What the expected value rests on.
    pub basis: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render_text(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.chars().count())
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let pad = width - c.name.chars().count();
            let _ = writeln!(
                out,
                "[{}] {}{}  computed={:.12e}  expected={:.12e}  tol={:.0e}  ({})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                " ".repeat(pad),
                c.computed,
                c.expected,
                c.tolerance,
                c.basis
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(
            out,
            "{} checks, {} passed, {} failed",
            self.checks.len(),
            self.checks.len() - failed,
            failed
        );
        out
    }
}

/// Inputs that tests may replace to make sure the suite notices.
#[derive(Clone, Debug)]
pub struct VerifyInputs {
    pub phi_q: StateVector,
}

impl Default for VerifyInputs {
    fn default() -> Self {
        Self { phi_q: phi_q() }
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn push(&mut self, name: &str, basis: &str, computed: f64, expected: f64, tolerance: f64) {
        let passed = (computed - expected).abs() <= tolerance;
        self.checks.push(Check {
            name: name.to_string(),
            basis: basis.to_string(),
            computed,
            expected,
            tolerance,
            passed,
        });
    }

    fn rank(&mut self, name: &str, basis: &str, op: &Operator, expected: usize) {
        self.push(name, basis, rank(op, TOL_RANK) as f64, expected as f64, 0.0);
    }
}

fn sym(s: &[usize]) -> Result<Operator> {
    symmetrizer(&slots(s), 4, 2)
}

fn anti(s: &[usize]) -> Result<Operator> {
    antisymmetrizer(&slots(s), 4, 2)
}

/// `max_v ‖P v − v‖` over `vectors`.
fn outside(p: &Operator, vectors: &[StateVector]) -> f64 {
    vectors
        .iter()
        .map(|v| p.apply(v).max_abs_diff(v))
        .fold(0.0, f64::max)
}

fn max_over<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> Result<f64>) -> Result<f64> {
    items
        .into_iter()
        .try_fold(0.0, |acc: f64, x| Ok(acc.max(f(x)?)))
}

pub fn run() -> Result<VerifyReport> {
    run_with(&VerifyInputs::default())
}

pub fn run_with(inputs: &VerifyInputs) -> Result<VerifyReport> {
    let mut s = Suite { checks: Vec::new() };
    let id4 = Operator::identity(2, 4);
    let p1234 = sym(&[1, 2, 3, 4])?;
    let p12 = sym(&[1, 2])?;
    let p34 = sym(&[3, 4])?;
    let p123 = sym(&[1, 2, 3])?;
    let p124 = sym(&[1, 2, 4])?;
    let p12_p34 = &p12 * &p34;

    // Dimension counts.
    s.rank(
        "rank P1234 = 5",
        "symmetric subspace of four qubits",
        &p1234,
        5,
    );
    s.rank(
        "rank P12 (x) P34 = 9",
        "product of pair symmetrizers",
        &p12_p34,
        9,
    );
    s.rank(
        "rank P12 (x) I = 12",
        "pair symmetrizer on four qubits",
        &p12,
        12,
    );
    s.rank(
        "rank P123 = 8",
        "three-slot symmetrizer times a free qubit",
        &p123,
        8,
    );
    let q123 = &p123 - &p1234;
    let q124 = &p124 - &p1234;
    s.rank("rank Q123 = 3", "P123 - P1234", &q123, 3);
    s.rank("rank Q12 = 7", "P12 - P1234", &(&p12 - &p1234), 7);
    let nest_big = (&(&p123 * &p1234) * &p123).max_abs_diff(&p1234);
    let nest_small = (&(&p12 * &p123) * &p12).max_abs_diff(&p123);
    s.push(
        "P1234 <= P123 <= P12",
        "nested symmetrizers",
        nest_big.max(nest_small),
        0.0,
        TOL_ABS,
    );

    // Swap algebra.
    let s23 = swap(2, 3, 4, 2)?;
    let s24 = swap(2, 4, 4, 2)?;
    let s34 = swap(3, 4, 4, 2)?;
    s.push(
        "S34 = S24 S23 S24",
        "transposition identity",
        (&(&s24 * &s23) * &s24).max_abs_diff(&s34),
        0.0,
        TOL_ABS,
    );
    let p13_p24 = &sym(&[1, 3])? * &sym(&[2, 4])?;
    let p14_p23 = &sym(&[1, 4])? * &sym(&[2, 3])?;
    s.push(
        "P13 (x) P24 = S23 (P12 (x) P34) S23",
        "slot relabeling",
        (&(&s23 * &p12_p34) * &s23).max_abs_diff(&p13_p24),
        0.0,
        TOL_ABS,
    );

    // Spectrum of Q123 + Q124.
    let sum = &q123 + &q124;
    let eig = sum.hermitian_eigen();
    let nonzero: Vec<(f64, &StateVector)> = eig
        .values
        .iter()
        .copied()
        .zip(&eig.vectors)
        .filter(|(l, _)| l.abs() > TOL_SPECTRAL)
        .collect();
    let expected = [2.0 / 3.0; 3].into_iter().chain([4.0 / 3.0; 3]);
    let spectral_dev = if nonzero.len() == 6 {
        nonzero
            .iter()
            .zip(expected)
            .map(|((l, _), e)| (l - e).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    s.push(
        "spec(Q123+Q124) = {2/3,4/3}",
        "eigenvalues with multiplicity 3 each",
        spectral_dev,
        0.0,
        TOL_SPECTRAL,
    );
    let upper: Vec<StateVector> = nonzero
        .iter()
        .filter(|(l, _)| *l > 1.0)
        .map(|(_, v)| (*v).clone())
        .collect();
    let lower: Vec<StateVector> = nonzero
        .iter()
        .filter(|(l, _)| *l < 1.0)
        .map(|(_, v)| (*v).clone())
        .collect();
    let p12_m34 = &p12 * &anti(&[3, 4])?;
    s.push(
        "4/3 eigenvectors lie in P12 (x) P34-",
        "spectral projector",
        outside(&p12_m34, &upper),
        0.0,
        TOL_SPECTRAL,
    );
    s.push(
        "2/3 eigenvectors lie in P12 (x) P34+",
        "spectral projector",
        outside(&p12_p34, &lower),
        0.0,
        TOL_SPECTRAL,
    );

    // Explicit qubit bases.
    let eta = named_basis(BasisFamily::Eta, PairSplit::S12_34, 2)?;
    let eta_dev = max_over(0..eta.len(), |i| {
        max_over(0..eta.len(), |j| {
            Ok((eta[i].inner(&eta[j]) - crate::tensor::c(if i == j { 1.0 } else { 0.0 })).norm())
        })
    })?;
    s.push(
        "<eta_i|eta_j> = delta_ij",
        "orthonormal basis of P1234",
        eta_dev,
        0.0,
        TOL_ABS,
    );
    s.push(
        "eta span P1234",
        "projector distance",
        span_projector(&eta)?.max_abs_diff(&p1234),
        0.0,
        TOL_SPECTRAL,
    );
    let omega = named_basis(BasisFamily::Omega, PairSplit::S12_34, 2)?;
    let omega_p = named_basis(BasisFamily::OmegaPrime, PairSplit::S12_34, 2)?;
    let cross = max_over(0..3, |j| {
        max_over(0..3, |k| {
            let target = if j == k { -2.0 } else { 0.0 };
            Ok((omega[j].inner(&omega_p[k]) - crate::tensor::c(target)).norm())
        })
    })?;
    s.push(
        "<omega_j|omega'_k> = -2 delta_jk",
        "explicit vectors",
        cross,
        0.0,
        TOL_ABS,
    );
    let omega_norm = max_over(&omega, |w| Ok((w.norm().powi(2) - 6.0).abs()))?;
    s.push(
        "|omega_j|^2 = 6",
        "explicit vectors",
        omega_norm,
        0.0,
        TOL_ABS,
    );
    s.push(
        "omega span Q123",
        "projector distance",
        span_projector(&omega)?.max_abs_diff(&q123),
        0.0,
        TOL_SPECTRAL,
    );
    let kappa = named_basis(BasisFamily::Kappa, PairSplit::S12_34, 2)?;
    let kappa2p = named_basis(BasisFamily::KappaPrime, PairSplit::S12_34, 2)?;
    s.push(
        "<kappa2'|P13 (x) P24|kappa2'> = 1/4",
        "explicit vectors",
        p13_p24.expectation(&kappa2p[0]),
        0.25,
        TOL_ABS,
    );
    let kappa_leak = kappa
        .iter()
        .map(|k| p13_p24.apply(k).norm().max(p14_p23.apply(k).norm()))
        .fold(0.0, f64::max);
    s.push(
        "P13 (x) P24 kappa_j = P14 (x) P23 kappa_j = 0",
        "explicit vectors",
        kappa_leak,
        0.0,
        TOL_ABS,
    );

    // Haar moments.
    let trace_dev = max_over(
        (1..=4).flat_map(|k| (2..=4).map(move |d| (k, d))),
        |(k, d)| Ok((pure_moment(k, d)?.payload.trace().re - 1.0).abs()),
    )?;
    s.push(
        "tr pure_moment(k,d) = 1",
        "k <= 4, d <= 4",
        trace_dev,
        0.0,
        TOL_ABS,
    );
    s.push(
        "pure_moment(2,2) = P12/3",
        "closed form with d2 = 3",
        pure_moment(2, 2)?
            .payload
            .max_abs_diff(&symmetrizer(&slots(&[1, 2]), 2, 2)?.scale(1.0 / 3.0)),
        0.0,
        TOL_ABS,
    );
    let completeness = max_over(2..=5, |d| {
        let total = rbar(Relation::Same, d)?.payload.scale(d as f64)
            + rbar(Relation::Diff, d)?.payload.scale((d * (d - 1)) as f64);
        Ok(total.max_abs_diff(&Operator::identity(d, 2)))
    })?;
    s.push(
        "d Rs + d(d-1) Rd = I",
        "completeness, d = 2..5",
        completeness,
        0.0,
        TOL_ABS,
    );
    let zero = StateVector::basis(2, &[0])?;
    let perp = perp_moment(2, &zero)?;
    let ones = Operator::projector_onto(&StateVector::basis(2, &[1, 1])?);
    s.push(
        "perp_moment(2, |0>) = |11><11|",
        "unique orthogonal direction",
        perp.max_abs_diff(&ones),
        0.0,
        TOL_ABS,
    );
    let r1234 = r_operator(PairSplit::S12_34, 2)?.payload;
    let rp = &r1234 * &p34;
    let min_eig = rp.eigenvalues().first().copied().unwrap_or(0.0);
    s.push(
        "R12-34 P34 >= 0",
        "smallest eigenvalue clipped at zero",
        (-min_eig).max(0.0),
        0.0,
        TOL_ABS,
    );
    s.push(
        "support R12-34 P34 = P12 (x) P34",
        "projector distance",
        support_projector(&rp, TOL_RANK)?.max_abs_diff(&p12_p34),
        0.0,
        TOL_SPECTRAL,
    );
    s.push(
        "R13-24 = S23 R12-34 S23",
        "slot relabeling",
        (&(&s23 * &r1234) * &s23).max_abs_diff(&r_operator(PairSplit::S13_24, 2)?.payload),
        0.0,
        TOL_ABS,
    );

    // Class operators and no-error subspaces.
    let ops = unlabeled_operators(2)?;
    let sum_eq = ops
        .classes
        .iter()
        .fold(Operator::zeros(2, 4), |acc, c| acc + &c.o_equal);
    let sum_ne = ops
        .classes
        .iter()
        .fold(Operator::zeros(2, 4), |acc, c| acc + &c.o_different);
    s.push(
        "sum of A=B class operators = I",
        "completeness",
        sum_eq.max_abs_diff(&id4),
        0.0,
        TOL_ABS,
    );
    s.push(
        "sum of A!=B class operators = I",
        "completeness",
        sum_ne.max_abs_diff(&id4),
        0.0,
        TOL_ABS,
    );
    let get = |x, y| ops.get_xy(x, y);
    use Relation::{Diff, Same};
    let supports = [
        (Same, Same, p12_p34.clone()),
        (Same, Diff, p12.clone()),
        (Diff, Same, p34.clone()),
        (Diff, Diff, id4.clone()),
    ];
    let support_dev = supports
        .iter()
        .map(|(x, y, p)| get(*x, *y).pi_different.max_abs_diff(p))
        .fold(0.0, f64::max);
    s.push(
        "A!=B supports are P12 (x) P34, P12, P34, I",
        "projector distance",
        support_dev,
        0.0,
        TOL_SPECTRAL,
    );
    s.rank(
        "rank support O_eq(diff,diff) = 13",
        "support of A=B operator",
        &get(Diff, Diff).pi_equal,
        13,
    );
    s.rank(
        "rank Q(same,same) = 0",
        "support difference",
        &get(Same, Same).q,
        0,
    );
    s.rank(
        "rank Q(diff,diff) = 3",
        "support difference",
        &get(Diff, Diff).q,
        3,
    );
    s.rank(
        "rank Q(same,diff) = 1",
        "support difference",
        &get(Same, Diff).q,
        1,
    );
    s.rank(
        "rank Q(diff,same) = 1",
        "support difference",
        &get(Diff, Same).q,
        1,
    );
    s.push(
        "Q(diff,diff) = span{kappa}",
        "projector distance",
        get(Diff, Diff).q.max_abs_diff(&span_projector(&kappa)?),
        0.0,
        TOL_SPECTRAL,
    );

    let phi = &inputs.phi_q;
    let phi_proj = Operator::projector_onto(phi);
    s.push(
        "Q(same,diff) = |phi_Q><phi_Q|",
        "projector distance",
        get(Same, Diff).q.max_abs_diff(&phi_proj),
        0.0,
        TOL_SPECTRAL,
    );
    s.push(
        "Q(diff,same) = |phi_Q><phi_Q|",
        "projector distance",
        get(Diff, Same).q.max_abs_diff(&phi_proj),
        0.0,
        TOL_SPECTRAL,
    );
    let triples = [[1, 2, 3], [1, 2, 4], [1, 3, 4], [2, 3, 4]];
    let sym_leak = max_over(triples, |t| Ok(sym(&t)?.apply(phi).norm()))?;
    s.push(
        "P_jkl phi_Q = 0 for all triples",
        "antisymmetric pairs",
        sym_leak,
        0.0,
        TOL_ABS,
    );
    s.push(
        "P12 (x) P34 phi_Q = phi_Q",
        "pair symmetry",
        p12_p34.apply(phi).max_abs_diff(phi),
        0.0,
        TOL_ABS,
    );

    // Success probabilities.
    let scenario = Scenario::UnlabeledQubit;
    let sd = OutcomeClass::Unlabeled(Same, Diff);
    let ds = OutcomeClass::Unlabeled(Diff, Same);
    let phi_state = TestState::pure(phi).ok();
    let phi_rate = phi_state
        .as_ref()
        .and_then(|st| analytic_success(scenario, st, &[sd, ds]).ok())
        .map_or(f64::NAN, |b| b.total);
    s.push(
        "4/9 success",
        "phi_Q on (same,diff) and (diff,same)",
        phi_rate,
        4.0 / 9.0,
        TOL_ABS,
    );
    let phi_error = phi_state.as_ref().map_or(f64::NAN, |st| {
        st.expectation(&get(Same, Diff).o_equal) + st.expectation(&get(Diff, Same).o_equal)
    });
    s.push(
        "phi_Q never fires for A=B",
        "A=B class operators",
        phi_error,
        0.0,
        TOL_ABS,
    );
    let split = phi_state
        .as_ref()
        .map_or(f64::NAN, |st| st.expectation(&get(Same, Diff).o_different));
    s.push(
        "phi_Q (same,diff) = 2/9",
        "A!=B class operator",
        split,
        2.0 / 9.0,
        TOL_ABS,
    );
    let kappa_dev = max_over(1..=3, |j| {
        let st = kappa_state(j)?;
        let classes = conclusive_classes(scenario, &st)?;
        let rate = analytic_success(scenario, &st, &classes)?.total;
        Ok(if classes == [OutcomeClass::Unlabeled(Diff, Diff)] {
            (rate - 1.0 / 9.0).abs()
        } else {
            f64::INFINITY
        })
    })?;
    s.push(
        "kappa_j success = 1/9",
        "diff,diff only",
        kappa_dev,
        0.0,
        TOL_ABS,
    );
    s.push(
        "max over Q(diff,diff) = 1/9",
        "largest eigenvalue of Q O Q",
        max_success_on_subspace(&get(Diff, Diff).q, &get(Diff, Diff).o_different),
        1.0 / 9.0,
        TOL_SPECTRAL,
    );
    let pair = &get(Same, Diff).o_different + &get(Diff, Same).o_different;
    s.push(
        "max over Q(same,diff) = 4/9",
        "largest eigenvalue of Q O Q",
        max_success_on_subspace(&get(Same, Diff).q, &pair),
        4.0 / 9.0,
        TOL_SPECTRAL,
    );

    let labeled_dev = max_over(2..=5, |d| {
        let sc = Scenario::Labeled { dim: d };
        let st = optimal_test_state(sc)?;
        let classes = conclusive_classes(sc, &st)?;
        Ok((analytic_success(sc, &st, &classes)?.total - 1.0 / d as f64).abs())
    })?;
    s.push(
        "labeled success = 1/d",
        "antisymmetric state, d = 2..5",
        labeled_dev,
        0.0,
        TOL_ABS,
    );
    let jj = max_over(2..=5, |d| {
        Ok(
            labeled_outcome_probabilities(&optimal_test_state(Scenario::Labeled { dim: d })?, d)?
                .jj_equal
                .abs(),
        )
    })?;
    s.push(
        "labeled q_jj(A=B) = 0",
        "antisymmetric state, d = 2..5",
        jj,
        0.0,
        TOL_ABS,
    );
    let labeled_eq = crate::comparison::class_operator(
        Scenario::Labeled { dim: 3 },
        OutcomeClass::Labeled(Same),
        Hypothesis::Equal,
    )?;
    s.push(
        "labeled A=B same operator = 3 P12/6",
        "d = 3 closed form",
        labeled_eq.max_abs_diff(&symmetrizer(&slots(&[1, 2]), 2, 3)?.scale(0.5)),
        0.0,
        TOL_ABS,
    );

    let a = Observable::computational(2, false)?;
    let direct = |theta: f64| -> Result<f64> {
        let b = qubit_basis_at_angle(theta, false);
        match &phi_state {
            Some(st) => fixed_pair_unlabeled_success(&a, &b, st, &[sd, ds]),
            None => Ok(f64::NAN),
        }
    };
    s.push(
        "fixed pair at pi/6 = 1/2",
        "direct evaluation with phi_Q",
        direct(FRAC_PI_6)?,
        0.5,
        TOL_SPECTRAL,
    );
    s.push(
        "fixed pair at pi/4 = 2/3",
        "direct evaluation with phi_Q",
        direct(FRAC_PI_4)?,
        2.0 / 3.0,
        TOL_SPECTRAL,
    );
    let law_dev = max_over(0..=32, |i| {
        let theta = i as f64 * std::f64::consts::FRAC_PI_2 / 32.0;
        Ok((direct(theta)? - pairwise_success_angle(theta)).abs())
    })?;
    s.push(
        "fixed pair = (2/3) sin^2 2theta",
        "33-point grid on [0, pi/2]",
        law_dev,
        0.0,
        TOL_SPECTRAL,
    );

    let singlet_dev = {
        let sc = Scenario::Labeled { dim: 2 };
        let st = optimal_test_state(sc)?;
        let z = Observable::computational(2, true)?;
        let x = qubit_basis_at_angle(FRAC_PI_4, true);
        crate::comparison::labeled_fixed_pair_success(&z, &x, &st)?
    };
    s.push(
        "singlet, Z vs X, same outcome = 1/2",
        "direct 4x4 evaluation",
        singlet_dev,
        0.5,
        TOL_ABS,
    );
    let mixed_pair = kron(&Operator::identity(2, 2), &Operator::identity(2, 2))?.scale(1.0 / 16.0);
    s.push(
        "maximally mixed state has no conclusive class",
        "count of error-free classes",
        conclusive_classes(scenario, &TestState::new(mixed_pair)?)?.len() as f64,
        0.0,
        0.0,
    );

    Ok(VerifyReport { checks: s.checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::singlet;

    #[test]
    fn suite_passes_and_is_large_enough() {
        let report = run().unwrap();
        for c in report.failures() {
            eprintln!("{c:?}");
        }
        assert!(report.passed());
        assert!(report.checks.len() >= 30);
        assert!(report.get("spec(Q123+Q124) = {2/3,4/3}").is_some());
    }

    #[test]
    fn sign_flipped_phi_q_is_caught() {
        let s = singlet();
        let a = crate::symmetry::place_on_pairs(&[(&s, [1, 3]), (&s, [2, 4])]).unwrap();
        let b = crate::symmetry::place_on_pairs(&[(&s, [1, 4]), (&s, [2, 3])]).unwrap();
        let flipped = (&a - &b).normalized().unwrap();
        let report = run_with(&VerifyInputs { phi_q: flipped }).unwrap();
        assert!(!report.get("4/9 success").unwrap().passed);
        assert!(!report.passed());
    }

    #[test]
    fn text_report_lists_every_check() {
        let report = run().unwrap();
        let text = report.render_text();
        assert_eq!(text.lines().count(), report.checks.len() + 1);
        assert!(text.contains("[PASS] 4/9 success"));
    }
}
