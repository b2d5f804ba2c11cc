//! Labeled and unlabeled comparison of sharp non-degenerate observables.
//!
//! An observable is an orthonormal basis `{ψ_j}` with effects `A_j = ψ_j`.
//! Two devices are compared by feeding them a joint test state and sorting
//! the outcome pattern into classes that depend only on whether repeated
//! outcomes coincide:
//!
//! - labeled, one use each: `same` (`j = k`) or `diff`;
//! - unlabeled qubits, two uses each: `(x, y)` with `x` the relation of the
//!   two outcomes on device A (slots 1, 2) and `y` on device B (slots 3, 4).
//!
//! For each class there is an operator under each hypothesis,
//! `O^{A=B}` and `O^{A≠B}`, whose expectation in the test state is the
//! Haar-averaged class probability. A class certifies a difference for a
//! state `ρ` exactly when `tr(ρ O^{A=B}) = 0`; the no-error subspace
//! `Q = Π(O^{A≠B}) − Π(O^{A=B})` collects the useful part of the state space.
//! `Q` is always derived from supports here, never written down by hand.

use std::fmt;
use std::path::Path;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::haar::{haar_unitary, r_operator, rbar, ElementwiseMean};
use crate::symmetry::{
    antisymmetric_dim, antisymmetrizer, named_basis, place_on_pairs, singlet, slots, symmetric_dim,
    symmetrizer, BasisFamily, PairSplit,
};
use crate::tensor::{c, kron, support_projector, Operator, StateVector, C64, TOL_ABS, TOL_RANK};

/// A class counts as conclusive for `ρ` iff `tr(ρ O^{A=B}) ≤ NO_ERROR_TOL`.
pub const NO_ERROR_TOL: f64 = 1e-10;

/// Whether repeated outcomes of one device coincide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Same,
    Diff,
}

impl Relation {
    pub const ALL: [Relation; 2] = [Relation::Same, Relation::Diff];

    pub fn of(j: usize, k: usize) -> Self {
        if j == k {
            Relation::Same
        } else {
            Relation::Diff
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Same => "same",
            Relation::Diff => "diff",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeClass {
    /// Single use of each labeled device: relation between `j` and `k`.
    Labeled(Relation),
    /// Two uses of each unlabeled device: relation on A, relation on B.
    Unlabeled(Relation, Relation),
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeClass::Labeled(r) => write!(f, "{r}"),
            OutcomeClass::Unlabeled(x, y) => write!(f, "{x},{y}"),
        }
    }
}

impl Serialize for OutcomeClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Which comparison task is being solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Labeled devices in dimension `dim`, each used once.
    Labeled { dim: usize },
    /// Unlabeled qubit devices, each used twice.
    UnlabeledQubit,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        match self {
            Scenario::Labeled { dim } => *dim,
            Scenario::UnlabeledQubit => 2,
        }
    }

    pub fn num_factors(&self) -> usize {
        match self {
            Scenario::Labeled { .. } => 2,
            Scenario::UnlabeledQubit => 4,
        }
    }

    pub fn classes(&self) -> Vec<OutcomeClass> {
        match self {
            Scenario::Labeled { .. } => Relation::ALL
                .iter()
                .map(|&r| OutcomeClass::Labeled(r))
                .collect(),
            Scenario::UnlabeledQubit => Relation::ALL
                .iter()
                .cartesian_product(Relation::ALL.iter())
                .map(|(&x, &y)| OutcomeClass::Unlabeled(x, y))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Labeled { dim } if *dim < 2 => Err(Error::Config(format!(
                "dimension must be at least 2 (got {dim})"
            ))),
            Scenario::Labeled { dim } if dim * dim > crate::tensor::MAX_SIDE => {
                Err(Error::Config(format!("dimension {dim} is too large")))
            }
            _ => Ok(()),
        }
    }

    /// Class of a raw outcome tuple: `(j, k)` or `(j, k, a, b)`.
    pub fn classify(&self, outcomes: &[usize]) -> Result<OutcomeClass> {
        match (self, outcomes) {
            (Scenario::Labeled { .. }, [j, k]) => Ok(OutcomeClass::Labeled(Relation::of(*j, *k))),
            (Scenario::UnlabeledQubit, [j, k, a, b]) => Ok(OutcomeClass::Unlabeled(
                Relation::of(*j, *k),
                Relation::of(*a, *b),
            )),
            _ => Err(Error::InvalidArguments(format!(
                "{} outcomes do not fit {self}",
                outcomes.len()
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Labeled { dim } => write!(f, "labeled(d={dim})"),
            Scenario::UnlabeledQubit => f.write_str("unlabeled_qubit"),
        }
    }
}

/// Ground-truth hypothesis about the two devices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    Equal,
    Different,
}

/// A sharp non-degenerate observable: the columns of `basis` are the
/// orthonormal vectors `ψ_j`, and outcome `j` has effect `|ψ_j⟩⟨ψ_j|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    basis: DMatrix<C64>,
    labeled: bool,
}

impl Observable {
    pub fn new(basis: DMatrix<C64>, labeled: bool) -> Result<Self> {
        let d = basis.nrows();
        if d < 2 || basis.ncols() != d {
            return Err(Error::InvalidArguments(format!(
                "an observable needs d ≥ 2 orthonormal vectors in C^d (got {}×{})",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let gram = basis.adjoint() * &basis;
        let dev = (gram - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > TOL_ABS {
            return Err(Error::InvalidArguments(format!(
                "basis is not orthonormal (Gram deviation {dev:e})"
            )));
        }
        Ok(Self { basis, labeled })
    }

    /// The computational basis `|0⟩, …, |d−1⟩`.
    pub fn computational(d: usize, labeled: bool) -> Result<Self> {
        Self::new(DMatrix::identity(d, d), labeled)
    }

    /// `A^U` for a Haar-random `U`.
    pub fn haar<R: Rng + ?Sized>(d: usize, labeled: bool, rng: &mut R) -> Self {
        Self {
            basis: haar_unitary(d, rng),
            labeled,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn is_labeled(&self) -> bool {
        self.labeled
    }

    pub fn basis_matrix(&self) -> &DMatrix<C64> {
        &self.basis
    }

    pub fn vector(&self, j: usize) -> StateVector {
        StateVector::new(self.dim(), 1, self.basis.column(j).into_owned()).expect("single slot")
    }

    pub fn effect(&self, j: usize) -> Operator {
        Operator::projector_onto(&self.vector(j))
    }

    /// Observable with outcome `j` reporting the effect of outcome `perm[j]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dim();
        if !perm.iter().copied().sorted().eq(0..d) {
            return Err(Error::InvalidArguments(format!(
                "{perm:?} is not a permutation of 0..{d}"
            )));
        }
        let basis = DMatrix::from_fn(d, d, |r, j| self.basis[(r, perm[j])]);
        Ok(Self {
            basis,
            labeled: self.labeled,
        })
    }

    /// `A_same = Σ_j A_j ⊗ A_j` or `A_diff = Σ_{j≠k} A_j ⊗ A_k = I − A_same`.
    pub fn pair_class_operator(&self, relation: Relation) -> Operator {
        let d = self.dim();
        let mut same = Operator::zeros(d, 2);
        for j in 0..d {
            let e = self.effect(j);
            same = same + kron(&e, &e).expect("same dimension");
        }
        match relation {
            Relation::Same => same,
            Relation::Diff => Operator::identity(d, 2) - same,
        }
    }
}

/// Qubit basis `{cos θ|0⟩ + sin θ|1⟩, −sin θ|0⟩ + cos θ|1⟩}`.
pub fn qubit_basis_at_angle(theta: f64, labeled: bool) -> Observable {
    let (s, co) = theta.sin_cos();
    let basis = DMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)]);
    Observable::new(basis, labeled).expect("rotation is orthonormal")
}

/// Angle `θ ∈ [0, π/4]` between two qubit observables, `cos θ = |⟨ψ|φ⟩|`,
/// minimized over the two ways of pairing their outcomes.
pub fn observable_angle(a: &Observable, b: &Observable) -> Result<f64> {
    if a.dim() != 2 || b.dim() != 2 {
        return Err(Error::Unsupported(
            "angles are defined for qubit observables".into(),
        ));
    }
    let psi = a.vector(0);
    let overlap = |j| psi.inner(&b.vector(j)).norm().min(1.0).acos();
    Ok(overlap(0).min(overlap(1)))
}

/// Success probability `(2/3)·sin²(2θ)` of the optimal unlabeled qubit test
/// for a fixed pair of observables at angle `θ`.
pub fn pairwise_success_angle(theta: f64) -> f64 {
    2.0 / 3.0 * (2.0 * theta).sin().powi(2)
}

/// A density operator used as the joint input of the compared devices.
#[derive(Clone, Debug)]
pub struct TestState {
    rho: Operator,
    ensemble: Vec<(f64, StateVector)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TestStateFile {
    dim_local: usize,
    num_factors: usize,
    real: Vec<Vec<f64>>,
    #[serde(default)]
    imag: Option<Vec<Vec<f64>>>,
}

impl TestState {
    /// Validates `rho` (Hermitian, PSD, unit trace, all within
    /// [`TOL_ABS`]) and precomputes its eigen-ensemble for sampling.
    pub fn new(rho: Operator) -> Result<Self> {
        if !rho.is_hermitian(TOL_ABS) {
            return Err(Error::InvalidState(
                "density matrix is not Hermitian".into(),
            ));
        }
        let tr = rho.trace();
        if (tr - c(1.0)).norm() > TOL_ABS {
            return Err(Error::InvalidState(format!(
                "density matrix has trace {}",
                tr.re
            )));
        }
        let eig = rho.hermitian_eigen();
        if let Some(&min) = eig.values.first() {
            if min < -TOL_ABS {
                return Err(Error::InvalidState(format!(
                    "density matrix has eigenvalue {min:e}"
                )));
            }
        }
        let mut ensemble: Vec<(f64, StateVector)> = eig
            .values
            .into_iter()
            .zip(eig.vectors)
            .filter(|(w, _)| *w > 1e-14)
            .collect();
        let total: f64 = ensemble.iter().map(|(w, _)| w).sum();
        for (w, _) in &mut ensemble {
            *w /= total;
        }
        ensemble.reverse();
        Ok(Self { rho, ensemble })
    }

    pub fn pure(v: &StateVector) -> Result<Self> {
        if !v.is_normalized(TOL_ABS) {
            return Err(Error::InvalidState(format!(
                "state vector has norm {}",
                v.norm()
            )));
        }
        Ok(Self {
            rho: Operator::projector_onto(v),
            ensemble: vec![(1.0, v.clone())],
        })
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn dim_local(&self) -> usize {
        self.rho.dim_local()
    }

    pub fn num_factors(&self) -> usize {
        self.rho.num_factors()
    }

    /// Eigen-decomposition `ρ = Σ w_i |v_i⟩⟨v_i|`, heaviest first.
    pub fn ensemble(&self) -> &[(f64, StateVector)] {
        &self.ensemble
    }

    pub fn purity(&self) -> f64 {
        self.rho.trace_product(&self.rho).re
    }

    pub fn support_rank(&self) -> usize {
        self.ensemble.len()
    }

    /// `Re tr(ρ O)`.
    pub fn expectation(&self, op: &Operator) -> f64 {
        self.rho.trace_product(op).re
    }

    /// Reads a state from the JSON layout documented in
    /// `docs/test_state.schema.json`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TestStateFile = serde_json::from_str(text)?;
        let side = Operator::zeros(file.dim_local.max(1), file.num_factors.max(1)).side();
        let rows_ok = |m: &Vec<Vec<f64>>| m.len() == side && m.iter().all(|r| r.len() == side);
        if !rows_ok(&file.real) || !file.imag.as_ref().is_none_or(rows_ok) {
            return Err(Error::InvalidState(format!(
                "matrices must be {side}×{side}"
            )));
        }
        let m = DMatrix::from_fn(side, side, |i, j| {
            C64::new(
                file.real[i][j],
                file.imag.as_ref().map_or(0.0, |im| im[i][j]),
            )
        });
        Self::new(Operator::new(file.dim_local, file.num_factors, m)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let m = self.rho.matrix();
        let rows = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        let file = TestStateFile {
            dim_local: self.dim_local(),
            num_factors: self.num_factors(),
            real: rows(|z| z.re),
            imag: Some(rows(|z| z.im)),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

fn check_labeled_state(rho: &TestState, d: usize) -> Result<()> {
    if rho.dim_local() != d || rho.num_factors() != 2 {
        return Err(Error::InvalidState(format!(
            "labeled comparison needs a state on C^{d} ⊗ C^{d}, got (C^{})^⊗{}",
            rho.dim_local(),
            rho.num_factors()
        )));
    }
    Ok(())
}

/// Haar-averaged single-shot probabilities for labeled devices.
///
/// `jj_*`/`jk_*` are the probabilities of one specific outcome pair with
/// `j = k` / `j ≠ k`; `same_*`/`diff_*` are the class totals `d·q̄_jj` and
/// `d(d−1)·q̄_jk`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LabeledProbabilities {
    pub jj_equal: f64,
    pub jk_equal: f64,
    pub jj_different: f64,
    pub jk_different: f64,
    pub same_equal: f64,
    pub diff_equal: f64,
    pub same_different: f64,
    pub diff_different: f64,
}

pub fn labeled_outcome_probabilities(rho: &TestState, d: usize) -> Result<LabeledProbabilities> {
    check_labeled_state(rho, d)?;
    let df = d as f64;
    let d2 = symmetric_dim(d, 2) as f64;
    let p_sym = symmetrizer(&slots(&[1, 2]), 2, d)?;
    let tr_rho = rho.rho().trace().re;
    let tr_sym = rho.expectation(&p_sym);
    let jj_equal = tr_sym / d2;
    let jk_equal = (tr_rho / df - tr_sym / d2) / (df - 1.0);
    let jj_different = tr_rho / (df * df);
    let jk_different = tr_rho / (df * df);
    Ok(LabeledProbabilities {
        jj_equal,
        jk_equal,
        jj_different,
        jk_different,
        same_equal: df * jj_equal,
        diff_equal: df * (df - 1.0) * jk_equal,
        same_different: df * jj_different,
        diff_different: df * (df - 1.0) * jk_different,
    })
}

/// `Σ_j tr(ρ A_j ⊗ B_j)`: probability that fixed labeled devices report the
/// same outcome.
pub fn labeled_fixed_pair_success(a: &Observable, b: &Observable, rho: &TestState) -> Result<f64> {
    if !a.is_labeled() || !b.is_labeled() {
        return Err(Error::InvalidArguments(
            "labeled comparison needs labeled observables".into(),
        ));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "observables of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    check_labeled_state(rho, a.dim())?;
    (0..a.dim()).try_fold(0.0, |acc, j| {
        Ok(acc + rho.expectation(&kron(&a.effect(j), &b.effect(j))?))
    })
}

/// Probability of reporting outcomes `(j, a)` when each unlabeled device is
/// used once, averaged over uniformly random labelings of both devices.
pub fn single_use_unlabeled_probability(
    a: &Observable,
    b: &Observable,
    rho: &TestState,
    j: usize,
    k: usize,
) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::Dimension(format!(
            "observables of dimension {d} and {}",
            b.dim()
        )));
    }
    check_labeled_state(rho, d)?;
    if j >= d || k >= d {
        return Err(Error::InvalidArguments(format!(
            "outcome ({j},{k}) out of range"
        )));
    }
    let mut table = vec![vec![0.0; d]; d];
    for (x, row) in table.iter_mut().enumerate() {
        for (y, cell) in row.iter_mut().enumerate() {
            *cell = rho.expectation(&kron(&a.effect(x), &b.effect(y))?);
        }
    }
    let perms: Vec<Vec<usize>> = (0..d).permutations(d).collect();
    let total: f64 = perms
        .iter()
        .cartesian_product(perms.iter())
        .map(|(p, q)| table[p[j]][q[k]])
        .sum();
    Ok(total / (perms.len() * perms.len()) as f64)
}

/// Class operator `O_class` under `hypothesis`: its expectation in a test
/// state is the Haar-averaged probability of observing that class.
///
/// Under `A ≠ B` the operators are products of two-slot moments for any
/// dimension. Under `A = B` the unlabeled closed forms are qubit-only.
pub fn class_operator(
    scenario: Scenario,
    class: OutcomeClass,
    hypothesis: Hypothesis,
) -> Result<Operator> {
    scenario.validate()?;
    let d = scenario.dim();
    let weight = |r: Relation| match r {
        Relation::Same => d as f64,
        Relation::Diff => (d * (d - 1)) as f64,
    };
    // Class total of one device used twice: Σ_{j,k ∈ class} ∫ ψ_j ⊗ ψ_k.
    let two_shot = |r: Relation| -> Result<Operator> { Ok(rbar(r, d)?.payload.scale(weight(r))) };
    match (scenario, class, hypothesis) {
        (Scenario::Labeled { .. }, OutcomeClass::Labeled(r), Hypothesis::Equal) => two_shot(r),
        (Scenario::Labeled { .. }, OutcomeClass::Labeled(r), Hypothesis::Different) => {
            Ok(Operator::identity(d, 2).scale(weight(r) / (d * d) as f64))
        }
        (Scenario::UnlabeledQubit, OutcomeClass::Unlabeled(x, y), Hypothesis::Different) => {
            kron(&two_shot(x)?, &two_shot(y)?)
        }
        (Scenario::UnlabeledQubit, OutcomeClass::Unlabeled(x, y), Hypothesis::Equal) => {
            qubit_equal_operator(x, y)
        }
        _ => Err(Error::InvalidArguments(format!(
            "class {class} does not belong to {scenario}"
        ))),
    }
}

/// `O^{A≠B}_{x,y} = c_x c_y R̄_x ⊗ R̄_y` for unlabeled devices in any
/// dimension, `c_same = d`, `c_diff = d(d−1)`.
pub fn unlabeled_different_operator(x: Relation, y: Relation, d: usize) -> Result<Operator> {
    let weight = |r: Relation| match r {
        Relation::Same => d as f64,
        Relation::Diff => (d * (d - 1)) as f64,
    };
    kron(
        &rbar(x, d)?.payload.scale(weight(x)),
        &rbar(y, d)?.payload.scale(weight(y)),
    )
}

/// `O^{A=B}_{x,y} = ∫dU A^U_x ⊗ A^U_y` for qubits. With `d = 2` the only
/// vector orthogonal to `ψ` is `ψ⊥ = I − ψ`, so every term reduces to
/// symmetrizers and the pair moments `R`.
fn qubit_equal_operator(x: Relation, y: Relation) -> Result<Operator> {
    let d = 2usize;
    let df = d as f64;
    let p = |s: &[usize]| symmetrizer(&slots(s), 4, d);
    let d3 = symmetric_dim(d, 3) as f64;
    let d4 = symmetric_dim(d, 4) as f64;
    let r = |split| -> Result<Operator> { Ok(r_operator(split, d)?.payload) };
    let op = match (x, y) {
        (Relation::Same, Relation::Same) => {
            p(&[1, 2, 3, 4])?.scale(df / d4)
                + (r(PairSplit::S12_34)? * p(&[3, 4])?).scale(df * (df - 1.0))
        }
        (Relation::Same, Relation::Diff) => {
            (p(&[1, 2, 3])? + p(&[1, 2, 4])?).scale(df / d3)
                - p(&[1, 2, 3, 4])?.scale(2.0 * df / d4)
        }
        (Relation::Diff, Relation::Same) => {
            (p(&[1, 3, 4])? + p(&[2, 3, 4])?).scale(df / d3)
                - p(&[1, 2, 3, 4])?.scale(2.0 * df / d4)
        }
        (Relation::Diff, Relation::Diff) => (r(PairSplit::S13_24)? * p(&[2, 4])?
            + r(PairSplit::S14_23)? * p(&[2, 3])?)
        .scale(df * (df - 1.0)),
    };
    Ok(op)
}

/// Operators of one unlabeled outcome class under both hypotheses.
#[derive(Clone, Debug)]
pub struct ClassOperators {
    pub class: OutcomeClass,
    pub o_equal: Operator,
    pub o_different: Operator,
    pub pi_equal: Operator,
    pub pi_different: Operator,
    /// No-error subspace `Π_different − Π_equal`.
    pub q: Operator,
}

/// All four unlabeled qubit classes.
#[derive(Clone, Debug)]
pub struct HypothesisOperators {
    pub classes: Vec<ClassOperators>,
}

impl HypothesisOperators {
    pub fn get(&self, class: OutcomeClass) -> Option<&ClassOperators> {
        self.classes.iter().find(|c| c.class == class)
    }

    pub fn get_xy(&self, x: Relation, y: Relation) -> &ClassOperators {
        self.get(OutcomeClass::Unlabeled(x, y))
            .expect("all four classes are present")
    }
}

/// Builds `O`, `Π` and `Q` for every unlabeled class. The equal-hypothesis
/// closed forms exist for qubits only.
pub fn unlabeled_operators(d: usize) -> Result<HypothesisOperators> {
    if d != 2 {
        return Err(Error::Unsupported(format!(
            "closed-form equal-device operators are available for qubits only (d={d})"
        )));
    }
    let scenario = Scenario::UnlabeledQubit;
    let classes = scenario
        .classes()
        .into_iter()
        .map(|class| {
            let o_equal = class_operator(scenario, class, Hypothesis::Equal)?;
            let o_different = class_operator(scenario, class, Hypothesis::Different)?;
            let pi_equal = support_projector(&o_equal, TOL_RANK)?;
            let pi_different = support_projector(&o_different, TOL_RANK)?;
            let nested = (&pi_different * &pi_equal).max_abs_diff(&pi_equal);
            if nested > 1e-8 {
                return Err(Error::Consistency(format!(
                    "support under A=B is not contained in support under A≠B for {class} (deviation {nested:e})"
                )));
            }
            let q = &pi_different - &pi_equal;
            Ok(ClassOperators { class, o_equal, o_different, pi_equal, pi_different, q })
        })
        .collect::<Result<_>>()?;
    Ok(HypothesisOperators { classes })
}

/// `|φ_Q⟩ = (|ψ⁻_13 ψ⁻_24⟩ + |ψ⁻_14 ψ⁻_23⟩)/√3`.
pub fn phi_q() -> StateVector {
    let s = singlet();
    let a = place_on_pairs(&[(&s, [1, 3]), (&s, [2, 4])]).expect("disjoint pairs");
    let b = place_on_pairs(&[(&s, [1, 4]), (&s, [2, 3])]).expect("disjoint pairs");
    (&a + &b).scale(c(1.0 / 3f64.sqrt()))
}

/// `κ_j` (`j ∈ {1, 2, 3}`) as a pure test state.
pub fn kappa_state(j: usize) -> Result<TestState> {
    if !(1..=3).contains(&j) {
        return Err(Error::InvalidArguments(format!(
            "κ index must be 1, 2 or 3 (got {j})"
        )));
    }
    let kappas = named_basis(BasisFamily::Kappa, PairSplit::S12_34, 2)?;
    TestState::pure(&kappas[j - 1])
}

/// Normalized antisymmetric projector `P⁻_12 / d₋` for labeled devices, or
/// `|φ_Q⟩⟨φ_Q|` for unlabeled qubits.
pub fn optimal_test_state(scenario: Scenario) -> Result<TestState> {
    scenario.validate()?;
    match scenario {
        Scenario::Labeled { dim } => {
            let anti = antisymmetrizer(&slots(&[1, 2]), 2, dim)?;
            TestState::new(anti.scale(1.0 / antisymmetric_dim(dim) as f64))
        }
        Scenario::UnlabeledQubit => TestState::pure(&phi_q()),
    }
}

fn check_state_fits(scenario: Scenario, state: &TestState) -> Result<()> {
    if state.dim_local() != scenario.dim() || state.num_factors() != scenario.num_factors() {
        return Err(Error::InvalidState(format!(
            "{scenario} needs a state on (C^{})^⊗{}, got (C^{})^⊗{}",
            scenario.dim(),
            scenario.num_factors(),
            state.dim_local(),
            state.num_factors()
        )));
    }
    Ok(())
}

/// Classes whose equal-device probability vanishes for `state`.
pub fn conclusive_classes(scenario: Scenario, state: &TestState) -> Result<Vec<OutcomeClass>> {
    check_state_fits(scenario, state)?;
    let mut out = Vec::new();
    for class in scenario.classes() {
        let o = class_operator(scenario, class, Hypothesis::Equal)?;
        if state.expectation(&o) <= NO_ERROR_TOL {
            out.push(class);
        }
    }
    Ok(out)
}

/// Per-class and total conditional success probabilities.
#[derive(Clone, Debug, Serialize)]
pub struct SuccessBreakdown {
    pub per_class: Vec<(OutcomeClass, f64)>,
    pub total: f64,
}

impl SuccessBreakdown {
    pub fn class(&self, class: OutcomeClass) -> Option<f64> {
        self.per_class
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, p)| *p)
    }
}

/// `tr(ρ O^{A≠B})` for each claimed class, after checking its no-error
/// condition `tr(ρ O^{A=B}) ≤ NO_ERROR_TOL`.
pub fn analytic_success(
    scenario: Scenario,
    state: &TestState,
    claimed: &[OutcomeClass],
) -> Result<SuccessBreakdown> {
    check_state_fits(scenario, state)?;
    let mut per_class = Vec::with_capacity(claimed.len());
    for &class in claimed {
        let error = state.expectation(&class_operator(scenario, class, Hypothesis::Equal)?);
        if error > NO_ERROR_TOL {
            return Err(Error::Unambiguity {
                class: class.to_string(),
                probability: error,
            });
        }
        let success = state.expectation(&class_operator(scenario, class, Hypothesis::Different)?);
        per_class.push((class, success));
    }
    let total = per_class.iter().map(|(_, p)| p).sum();
    Ok(SuccessBreakdown { per_class, total })
}

/// `A_x ⊗ B_y` for a fixed pair of qubit observables (A on slots 1, 2).
pub fn fixed_pair_class_operator(
    a: &Observable,
    b: &Observable,
    x: Relation,
    y: Relation,
) -> Result<Operator> {
    kron(&a.pair_class_operator(x), &b.pair_class_operator(y))
}

/// `Σ_{class} tr(ρ A_x ⊗ B_y)` over the given unlabeled classes.
pub fn fixed_pair_unlabeled_success(
    a: &Observable,
    b: &Observable,
    state: &TestState,
    classes: &[OutcomeClass],
) -> Result<f64> {
    classes.iter().try_fold(0.0, |acc, class| match class {
        OutcomeClass::Unlabeled(x, y) => {
            Ok(acc + state.expectation(&fixed_pair_class_operator(a, b, *x, *y)?))
        }
        OutcomeClass::Labeled(_) => {
            Err(Error::InvalidArguments("expected unlabeled classes".into()))
        }
    })
}

/// `max_{ρ ≤ Q} tr(ρ O)`, the largest eigenvalue of `Q O Q`.
pub fn max_success_on_subspace(q: &Operator, o: &Operator) -> f64 {
    let compressed = &(q * o) * q;
    compressed.eigenvalues().last().copied().unwrap_or(0.0)
}

/// Monte Carlo estimate of `∫dU A^U_x ⊗ A^U_y` for unlabeled devices in any
/// dimension, one accumulator per class.
///
/// Experimental: for `d ≥ 3` these integrals have no closed form here; the
/// estimate is the only representation offered.
pub fn equal_operators_monte_carlo<R: Rng + ?Sized>(
    d: usize,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<(OutcomeClass, ElementwiseMean)>> {
    if !(2..=4).contains(&d) {
        return Err(Error::Unsupported(format!(
            "Monte Carlo class operators need 2 ≤ d ≤ 4 (got {d})"
        )));
    }
    let classes: Vec<(Relation, Relation)> = Relation::ALL
        .iter()
        .cartesian_product(Relation::ALL.iter())
        .map(|(&x, &y)| (x, y))
        .collect();
    let mut acc: Vec<ElementwiseMean> =
        classes.iter().map(|_| ElementwiseMean::new(d, 4)).collect();
    for _ in 0..samples {
        let a = Observable::haar(d, false, rng);
        let same = a.pair_class_operator(Relation::Same);
        let diff = Operator::identity(d, 2) - &same;
        for ((x, y), slot) in classes.iter().zip(acc.iter_mut()) {
            let pick = |r: &Relation| if *r == Relation::Same { &same } else { &diff };
            slot.push(&kron(pick(x), pick(y))?);
        }
    }
    Ok(classes
        .into_iter()
        .map(|(x, y)| OutcomeClass::Unlabeled(x, y))
        .zip(acc)
        .collect())
}
