//! Haar-measure moment operators and seeded Haar sampling.
//!
//! The analytic constructors are closed forms in symmetrizers:
//!
//! - `∫dψ ψ^{⊗k} = P⁺_{1…k} / d_k`
//! - `∫dψ⊥ ψ⊥^{⊗k} = (I − ψ)^{⊗k} P⁺_{1…k} / (d−1)_k` over unit vectors
//!   orthogonal to a fixed `ψ`, where `(d−1)_k` is the symmetric dimension
//!   of `k` copies of `C^{d−1}`
//! - `R_{12−34} = ∫ ψ^{⊗2} ⊗ (I − ψ)^{⊗2}`, expanded by inclusion–exclusion
//!
//! Sampling uses ChaCha8 streams so that results are reproducible across
//! platforms: `(seed, stream)` fully determines every draw.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::comparison::Relation;
use crate::error::{Error, Result};
use crate::symmetry::{slots, symmetric_dim, symmetrizer, PairSplit, SubsystemSet};
use crate::tensor::{c, kron_all, Operator, StateVector, C64, TOL_ABS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    PurePower,
    PerpPower,
    RPair(PairSplit),
    Rbar(Relation),
}

/// An analytic Haar moment together with its provenance.
#[derive(Clone, Debug)]
pub struct MomentOperator {
    pub kind: MomentKind,
    pub order: usize,
    pub dim: usize,
    pub payload: Operator,
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArguments(format!(
            "local dimension must be at least 2 (got {d})"
        )));
    }
    Ok(())
}

/// `∫dψ ψ^{⊗k} = P⁺_{1…k} / d_k`.
pub fn pure_moment(k: usize, d: usize) -> Result<MomentOperator> {
    check_dim(d)?;
    if k == 0 {
        return Err(Error::InvalidArguments(
            "moment order must be at least 1".into(),
        ));
    }
    let sym = symmetrizer(&SubsystemSet::new(1..=k)?, k, d)?;
    Ok(MomentOperator {
        kind: MomentKind::PurePower,
        order: k,
        dim: d,
        payload: sym.scale(1.0 / symmetric_dim(d, k) as f64),
    })
}

/// Average of `ψ⊥^{⊗k}` over unit vectors orthogonal to the single-slot
/// unit vector `psi`.
pub fn perp_moment(k: usize, psi: &StateVector) -> Result<Operator> {
    let d = psi.dim_local();
    check_dim(d)?;
    if psi.num_factors() != 1 {
        return Err(Error::InvalidState("expected a single-slot vector".into()));
    }
    if !psi.is_normalized(TOL_ABS) {
        return Err(Error::InvalidState(format!(
            "vector has norm {}",
            psi.norm()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArguments(
            "moment order must be at least 1".into(),
        ));
    }
    let complement = Operator::identity(d, 1) - Operator::projector_onto(psi);
    let power = kron_all(&vec![complement; k])?;
    let sym = symmetrizer(&SubsystemSet::new(1..=k)?, k, d)?;
    Ok((power * sym).scale(1.0 / symmetric_dim(d - 1, k) as f64))
}

/// `R = ∫ ψ^{⊗2} ⊗ (I − ψ)^{⊗2}` with `ψ` on the first pair of `split`
/// and `I − ψ` on the second.
pub fn r_operator(split: PairSplit, d: usize) -> Result<MomentOperator> {
    check_dim(d)?;
    let p = |s: &[usize]| symmetrizer(&slots(s), 4, d);
    let d2 = symmetric_dim(d, 2) as f64;
    let d3 = symmetric_dim(d, 3) as f64;
    let d4 = symmetric_dim(d, 4) as f64;
    let base = p(&[1, 2])?.scale(1.0 / d2) + p(&[1, 2, 3, 4])?.scale(1.0 / d4)
        - (p(&[1, 2, 3])? + p(&[1, 2, 4])?).scale(1.0 / d3);
    let s = split.relabeling(d);
    Ok(MomentOperator {
        kind: MomentKind::RPair(split),
        order: 4,
        dim: d,
        payload: &(&s * &base) * &s.adjoint(),
    })
}

/// Two-slot moments `R̄_same = ∫ψ⊗ψ = P⁺/d_2` and
/// `R̄_diff = ∫ψ⊗ψ⊥ = (I/d − P⁺/d_2)/(d−1)`.
pub fn rbar(relation: Relation, d: usize) -> Result<MomentOperator> {
    check_dim(d)?;
    let sym = symmetrizer(&slots(&[1, 2]), 2, d)?;
    let d2 = symmetric_dim(d, 2) as f64;
    let payload = match relation {
        Relation::Same => sym.scale(1.0 / d2),
        Relation::Diff => (Operator::identity(d, 2).scale(1.0 / d as f64) - sym.scale(1.0 / d2))
            .scale(1.0 / (d - 1) as f64),
    };
    Ok(MomentOperator {
        kind: MomentKind::Rbar(relation),
        order: 2,
        dim: d,
        payload,
    })
}

/// Deterministic generator for `(seed, stream)`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random `d × d` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` folded back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| complex_normal(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        let phase = if norm > 0.0 { rjj / norm } else { c(1.0) };
        col *= phase;
    }
    q
}

/// [`haar_unitary`] drawn from a fresh generator seeded with `seed`.
pub fn haar_unitary_seeded(d: usize, seed: u64) -> Result<Operator> {
    check_dim(d)?;
    Operator::local(haar_unitary(d, &mut seeded_rng(seed, 0)))
}

/// Haar-random unit vector in `C^d`.
pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> StateVector {
    loop {
        let amps = nalgebra::DVector::from_fn(d, |_, _| complex_normal(rng));
        let v = StateVector::new(d, 1, amps).expect("single slot");
        if let Ok(u) = v.normalized() {
            return u;
        }
    }
}

/// Uniformly random unit vector orthogonal to the single-slot vector `psi`.
pub fn haar_state_orthogonal_to<R: Rng + ?Sized>(
    psi: &StateVector,
    rng: &mut R,
) -> Result<StateVector> {
    let d = psi.dim_local();
    check_dim(d)?;
    let psi = psi.normalized()?;
    loop {
        let g = haar_state(d, rng);
        let overlap = psi.inner(&g);
        let projected = &g - &psi.scale(overlap);
        if let Ok(u) = projected.normalized() {
            return Ok(u);
        }
    }
}

/// Running elementwise mean and standard error of operator-valued samples.
#[derive(Clone, Debug)]
pub struct ElementwiseMean {
    dim_local: usize,
    num_factors: usize,
    count: u64,
    sum: Vec<C64>,
    sum_sq_re: Vec<f64>,
    sum_sq_im: Vec<f64>,
}

/// Worst-case agreement between a Monte Carlo mean and an analytic value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MomentAgreement {
    /// Largest `|Δ| / σ` over entries with nonzero spread.
    pub max_sigma: f64,
    /// Largest `|Δ|` over all entries.
    pub max_abs_deviation: f64,
    pub passed: bool,
}

impl ElementwiseMean {
    pub fn new(dim_local: usize, num_factors: usize) -> Self {
        let side = Operator::zeros(dim_local, num_factors).side();
        Self {
            dim_local,
            num_factors,
            count: 0,
            sum: vec![C64::new(0.0, 0.0); side * side],
            sum_sq_re: vec![0.0; side * side],
            sum_sq_im: vec![0.0; side * side],
        }
    }

    pub fn push(&mut self, sample: &Operator) {
        assert!(
            sample.dim_local() == self.dim_local && sample.num_factors() == self.num_factors,
            "sample lives in a different space"
        );
        for (i, z) in sample.matrix().iter().enumerate() {
            self.sum[i] += z;
            self.sum_sq_re[i] += z.re * z.re;
            self.sum_sq_im[i] += z.im * z.im;
        }
        self.count += 1;
    }

    /// Combines two accumulators over the same space.
    pub fn merge(mut self, other: &Self) -> Self {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq_re[i] += other.sum_sq_re[i];
            self.sum_sq_im[i] += other.sum_sq_im[i];
        }
        self.count += other.count;
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Operator {
        let side = (self.sum.len() as f64).sqrt() as usize;
        let n = self.count.max(1) as f64;
        let m = DMatrix::from_iterator(side, side, self.sum.iter().map(|z| z / n));
        Operator::new(self.dim_local, self.num_factors, m).expect("shape preserved")
    }

    fn standard_error(sum: f64, sum_sq: f64, n: f64) -> f64 {
        if n < 2.0 {
            return f64::INFINITY;
        }
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    /// Checks every real and imaginary entry of the mean against `expected`:
    /// `|Δ| ≤ n_sigma · σ + abs_floor`.
    pub fn agreement(&self, expected: &Operator, n_sigma: f64, abs_floor: f64) -> MomentAgreement {
        let n = self.count as f64;
        let mut max_sigma: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        let mut passed = self.count >= 2;
        for (i, e) in expected.matrix().iter().enumerate() {
            let parts = [
                (self.sum[i].re, self.sum_sq_re[i], e.re),
                (self.sum[i].im, self.sum_sq_im[i], e.im),
            ];
            for (s, sq, target) in parts {
                let dev = (s / n - target).abs();
                let se = Self::standard_error(s, sq, n);
                max_abs = max_abs.max(dev);
                if se > 0.0 {
                    max_sigma = max_sigma.max(dev / se);
                }
                if dev > n_sigma * se + abs_floor {
                    passed = false;
                }
            }
        }
        MomentAgreement {
            max_sigma,
            max_abs_deviation: max_abs,
            passed,
        }
    }
}
