//! Dense complex linear algebra on small tensor-product spaces.
//!
//! Every operator and vector lives on `(C^d)^{⊗n}`. Computational-basis
//! indices are written in base `d` with tensor slot 1 as the most significant
//! digit, so `|x_1 x_2 … x_n⟩` has index `x_1·d^{n-1} + … + x_n`. Slots are
//! numbered from 1 in the public API to match the usual subsystem labels.
//!
//! Rank and support are both derived from a single Hermitian
//! eigendecomposition, with one relative cut ([`TOL_RANK`]).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance for identity checks (`max|A − B|`).
pub const TOL_ABS: f64 = 1e-10;

/// Relative eigenvalue cut used by [`rank`] and [`support_projector`].
pub const TOL_RANK: f64 = 1e-8;

/// Largest supported total dimension `d^n`.
pub const MAX_SIDE: usize = 4096;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn checked_side(dim_local: usize, num_factors: usize) -> Result<usize> {
    if dim_local == 0 || num_factors == 0 {
        return Err(Error::InvalidArguments(format!(
            "local dimension and number of factors must be positive (got d={dim_local}, n={num_factors})"
        )));
    }
    let exp =
        u32::try_from(num_factors).map_err(|_| Error::Unsupported("too many factors".into()))?;
    match dim_local.checked_pow(exp) {
        Some(side) if side <= MAX_SIDE => Ok(side),
        _ => Err(Error::Unsupported(format!(
            "space (C^{dim_local})^⊗{num_factors} exceeds {MAX_SIDE} dimensions"
        ))),
    }
}

/// A dense operator on `(C^d)^{⊗n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim_local: usize,
    num_factors: usize,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(dim_local: usize, num_factors: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let side = checked_side(dim_local, num_factors)?;
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::Dimension(format!(
                "expected a {side}×{side} matrix for (C^{dim_local})^⊗{num_factors}, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            dim_local,
            num_factors,
            matrix,
        })
    }

    /// Builds a single-factor operator from a `d × d` matrix.
    pub fn local(matrix: DMatrix<C64>) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(d, 1, matrix)
    }

    pub fn identity(dim_local: usize, num_factors: usize) -> Self {
        let side = checked_side(dim_local, num_factors).expect("valid space");
        Self {
            dim_local,
            num_factors,
            matrix: DMatrix::identity(side, side),
        }
    }

    pub fn zeros(dim_local: usize, num_factors: usize) -> Self {
        let side = checked_side(dim_local, num_factors).expect("valid space");
        Self {
            dim_local,
            num_factors,
            matrix: DMatrix::zeros(side, side),
        }
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &StateVector, v: &StateVector) -> Result<Self> {
        u.check_same_space(v)?;
        let matrix = &u.amplitudes * v.amplitudes.adjoint();
        Ok(Self {
            dim_local: u.dim_local,
            num_factors: u.num_factors,
            matrix,
        })
    }

    /// `|v⟩⟨v|`.
    pub fn projector_onto(v: &StateVector) -> Self {
        Self::outer(v, v).expect("same space")
    }

    pub fn dim_local(&self) -> usize {
        self.dim_local
    }

    pub fn num_factors(&self) -> usize {
        self.num_factors
    }

    /// Side length `d^n` of the matrix.
    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            ..*self
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * c(factor),
            ..*self
        }
    }

    pub fn same_space(&self, other: &Self) -> bool {
        self.dim_local == other.dim_local && self.num_factors == other.num_factors
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert!(self.same_space(other), "operators act on different spaces");
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.same_space(other) && self.max_abs_diff(other) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let adj = self.matrix.adjoint();
        self.matrix
            .iter()
            .zip(adj.iter())
            .all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && (self * self).max_abs_diff(self) <= tol
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert!(self.same_space(other), "operators act on different spaces");
        // tr(AB) = Σ_ij A_ij B_ji without forming the product.
        let n = self.side();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * other.matrix[(j, i)];
            }
        }
        acc
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert!(
            self.dim_local == v.dim_local && self.num_factors == v.num_factors,
            "operator and vector act on different spaces"
        );
        StateVector {
            amplitudes: &self.matrix * &v.amplitudes,
            ..v.clone()
        }
    }

    /// Real part of `⟨v|self|v⟩`.
    pub fn expectation(&self, v: &StateVector) -> f64 {
        v.inner(&self.apply(v)).re
    }

    /// Eigendecomposition of the Hermitian part `(M + M†)/2`, eigenvalues
    /// sorted in ascending order.
    pub fn hermitian_eigen(&self) -> HermitianEigen {
        let herm = (&self.matrix + self.matrix.adjoint()) * c(0.5);
        let eig = SymmetricEigen::new(herm);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| StateVector {
                dim_local: self.dim_local,
                num_factors: self.num_factors,
                amplitudes: eig.eigenvectors.column(i).into_owned(),
            })
            .collect();
        HermitianEigen { values, vectors }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.hermitian_eigen().values
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Operator on (C^{})^⊗{}",
            self.dim_local, self.num_factors
        )?;
        for row in self.matrix.row_iter() {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                assert!(self.same_space(rhs), "operators act on different spaces");
                Operator {
                    dim_local: self.dim_local,
                    num_factors: self.num_factors,
                    matrix: &self.matrix $op &rhs.matrix,
                }
            }
        }
        impl $trait for Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                &self $op &rhs
            }
        }
        impl $trait<&Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                &self $op rhs
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-1.0)
    }
}

/// Eigenpairs of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

/// A (not necessarily normalized) vector in `(C^d)^{⊗n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dim_local: usize,
    num_factors: usize,
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(dim_local: usize, num_factors: usize, amplitudes: DVector<C64>) -> Result<Self> {
        let side = checked_side(dim_local, num_factors)?;
        if amplitudes.len() != side {
            return Err(Error::Dimension(format!(
                "expected {side} amplitudes for (C^{dim_local})^⊗{num_factors}, got {}",
                amplitudes.len()
            )));
        }
        Ok(Self {
            dim_local,
            num_factors,
            amplitudes,
        })
    }

    pub fn zeros(dim_local: usize, num_factors: usize) -> Self {
        let side = checked_side(dim_local, num_factors).expect("valid space");
        Self {
            dim_local,
            num_factors,
            amplitudes: DVector::zeros(side),
        }
    }

    /// Computational basis ket `|x_1 … x_n⟩` from its digits (slot 1 first).
    pub fn basis(dim_local: usize, digits: &[usize]) -> Result<Self> {
        let mut v = Self::zeros(dim_local, digits.len());
        let mut index = 0;
        for &x in digits {
            if x >= dim_local {
                return Err(Error::InvalidArguments(format!(
                    "digit {x} out of range for d={dim_local}"
                )));
            }
            index = index * dim_local + x;
        }
        v.amplitudes[index] = c(1.0);
        Ok(v)
    }

    pub fn dim_local(&self) -> usize {
        self.dim_local
    }

    pub fn num_factors(&self) -> usize {
        self.num_factors
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.dim_local == other.dim_local && self.num_factors == other.num_factors {
            Ok(())
        } else {
            Err(Error::Dimension("vectors live in different spaces".into()))
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(
            self.amplitudes.len(),
            other.amplitudes.len(),
            "vectors live in different spaces"
        );
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= TOL_ABS {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            amplitudes: &self.amplitudes * factor,
            ..self.clone()
        }
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.dim_local != other.dim_local {
            return Err(Error::Dimension(format!(
                "cannot tensor vectors with local dimensions {} and {}",
                self.dim_local, other.dim_local
            )));
        }
        let num_factors = self.num_factors + other.num_factors;
        checked_side(self.dim_local, num_factors)?;
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        Ok(Self {
            dim_local: self.dim_local,
            num_factors,
            amplitudes,
        })
    }

    /// Applies a `d × d` matrix to tensor slot `slot` (1-based) and the
    /// identity elsewhere.
    pub fn apply_local(&self, slot: usize, local: &DMatrix<C64>) -> Self {
        let mut out = self.clone();
        apply_local_in_place(
            self.amplitudes.as_slice(),
            out.amplitudes.as_mut_slice(),
            self.dim_local,
            self.num_factors,
            slot,
            local,
        );
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        self.check_same_space(rhs).expect("same space");
        StateVector {
            amplitudes: &self.amplitudes + &rhs.amplitudes,
            ..self.clone()
        }
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        self.check_same_space(rhs).expect("same space");
        StateVector {
            amplitudes: &self.amplitudes - &rhs.amplitudes,
            ..self.clone()
        }
    }
}

/// `out = (I ⊗ … ⊗ local ⊗ … ⊗ I) input` with `local` on slot `slot` (1-based).
pub(crate) fn apply_local_in_place(
    input: &[C64],
    out: &mut [C64],
    d: usize,
    n: usize,
    slot: usize,
    local: &DMatrix<C64>,
) {
    assert!((1..=n).contains(&slot), "slot {slot} out of range 1..={n}");
    assert_eq!(local.nrows(), d);
    let inner = d.pow((n - slot) as u32);
    let outer = input.len() / (inner * d);
    for o in 0..outer {
        let base = o * d * inner;
        for i in 0..inner {
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for col in 0..d {
                    acc += local[(r, col)] * input[base + col * inner + i];
                }
                out[base + r * inner + i] = acc;
            }
        }
    }
}

/// Kronecker product `a ⊗ b`; the factors of `a` occupy the leading slots.
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    if a.dim_local != b.dim_local {
        return Err(Error::Dimension(format!(
            "kron of operators with local dimensions {} and {}",
            a.dim_local, b.dim_local
        )));
    }
    let num_factors = a.num_factors + b.num_factors;
    checked_side(a.dim_local, num_factors)?;
    Ok(Operator {
        dim_local: a.dim_local,
        num_factors,
        matrix: a.matrix.kronecker(&b.matrix),
    })
}

/// Left-to-right Kronecker product of a non-empty list.
pub fn kron_all(ops: &[Operator]) -> Result<Operator> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::InvalidArguments("empty Kronecker product".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, op| kron(&acc, op))
}

/// Number of eigenvalues with `|λ| > tol_rank · max|λ|`; zero for a
/// numerically vanishing operator.
pub fn rank(m: &Operator, tol_rank: f64) -> usize {
    let values = m.eigenvalues();
    let largest = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if largest <= TOL_ABS {
        return 0;
    }
    values
        .iter()
        .filter(|v| v.abs() > tol_rank * largest)
        .count()
}

/// Projector onto the span of the eigenvectors of a PSD operator whose
/// eigenvalues exceed `tol_rank · λ_max`.
pub fn support_projector(m: &Operator, tol_rank: f64) -> Result<Operator> {
    let eig = m.hermitian_eigen();
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -TOL_ABS {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let largest = eig.values.last().copied().unwrap_or(0.0);
    let mut proj = Operator::zeros(m.dim_local, m.num_factors);
    if largest <= TOL_ABS {
        return Ok(proj);
    }
    for (value, vector) in eig.values.iter().zip(&eig.vectors) {
        if *value > tol_rank * largest {
            proj.matrix += &vector.amplitudes * vector.amplitudes.adjoint();
        }
    }
    Ok(proj)
}

/// Projector onto the span of the given vectors (need not be orthogonal).
pub fn span_projector(vectors: &[StateVector]) -> Result<Operator> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidArguments("empty span".into()))?;
    let mut gram = Operator::zeros(first.dim_local, first.num_factors);
    for v in vectors {
        first.check_same_space(v)?;
        gram.matrix += &v.amplitudes * v.amplitudes.adjoint();
    }
    support_projector(&gram, TOL_RANK)
}
