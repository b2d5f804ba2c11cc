//! Permutation action on `(C^d)^{⊗n}`: swaps, symmetrizers over arbitrary
//! slot subsets, pair antisymmetrizers, and the explicit four-qubit bases
//! (`η`, `κ`, `ω`) used to cross-check the no-error subspaces.
//!
//! Symmetrizers are built as the plain average over all `|S|!` permutation
//! matrices of the subset; at most 24 terms are ever needed here.

use std::fmt;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{c, Operator, StateVector, C64};

/// Ordered set of distinct tensor slots, numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemSet(Vec<usize>);

impl SubsystemSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        if v.is_empty() {
            return Err(Error::InvalidArguments("empty subsystem set".into()));
        }
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArguments(format!("repeated slot in {v:?}")));
        }
        if v[0] == 0 {
            return Err(Error::InvalidArguments("slots are numbered from 1".into()));
        }
        Ok(Self(v))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.0.binary_search(&slot).is_ok()
    }

    fn check_fits(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max <= n => Ok(()),
            _ => Err(Error::InvalidArguments(format!(
                "subsystem set {:?} exceeds {n} slots",
                self.0
            ))),
        }
    }
}

impl fmt::Display for SubsystemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.0 {
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// Shorthand for building a [`SubsystemSet`] from a literal slot list.
pub fn slots(indices: &[usize]) -> SubsystemSet {
    SubsystemSet::new(indices.iter().copied()).expect("valid slot list")
}

fn digits_of(mut index: usize, d: usize, n: usize, out: &mut [usize]) {
    for slot in (0..n).rev() {
        out[slot] = index % d;
        index /= d;
    }
}

fn index_of(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &x| acc * d + x)
}

/// Permutation operator moving the content of slot `i` to slot `image[i]`
/// (both 0-based): `|x_1 … x_n⟩ ↦ |y⟩` with `y_{image[i]} = x_i`.
pub fn permutation_operator(image: &[usize], d: usize) -> Result<Operator> {
    let n = image.len();
    if !image.iter().copied().sorted().eq(0..n) {
        return Err(Error::InvalidArguments(format!(
            "{image:?} is not a permutation"
        )));
    }
    let side = d.pow(n as u32);
    let mut m = DMatrix::zeros(side, side);
    accumulate_permutation(&mut m, image, d, c(1.0));
    Ok(from_matrix(d, n, m))
}

fn from_matrix(d: usize, n: usize, m: DMatrix<C64>) -> Operator {
    Operator::new(d, n, m).expect("shape preserved")
}

fn accumulate_permutation(m: &mut DMatrix<C64>, image: &[usize], d: usize, weight: C64) {
    let n = image.len();
    let side = m.nrows();
    let mut x = vec![0; n];
    let mut y = vec![0; n];
    for col in 0..side {
        digits_of(col, d, n, &mut x);
        for (i, &target) in image.iter().enumerate() {
            y[target] = x[i];
        }
        m[(index_of(&y, d), col)] += weight;
    }
}

/// Swap operator exchanging slots `a` and `b` (1-based) of an `n`-slot space.
pub fn swap(a: usize, b: usize, n: usize, d: usize) -> Result<Operator> {
    if a == b || a == 0 || b == 0 || a > n || b > n {
        return Err(Error::InvalidArguments(format!(
            "cannot swap slots {a} and {b} of {n}"
        )));
    }
    let mut image: Vec<usize> = (0..n).collect();
    image.swap(a - 1, b - 1);
    permutation_operator(&image, d)
}

/// Projector onto the subspace symmetric under every permutation of the
/// slots in `s`, acting as the identity on the other slots.
pub fn symmetrizer(s: &SubsystemSet, n: usize, d: usize) -> Result<Operator> {
    s.check_fits(n)?;
    let mut m = DMatrix::zeros(d.pow(n as u32), d.pow(n as u32));
    let members: Vec<usize> = s.indices().iter().map(|i| i - 1).collect();
    let k = members.len();
    let count: usize = (1..=k).product();
    let weight = c(1.0 / count as f64);
    for perm in members.iter().copied().permutations(k) {
        let mut image: Vec<usize> = (0..n).collect();
        for (from, to) in members.iter().zip(perm) {
            image[*from] = to;
        }
        accumulate_permutation(&mut m, &image, d, weight);
    }
    Ok(from_matrix(d, n, m))
}

/// Projector onto the antisymmetric subspace of a slot pair.
pub fn antisymmetrizer(s: &SubsystemSet, n: usize, d: usize) -> Result<Operator> {
    if s.len() != 2 {
        return Err(Error::Unsupported(format!(
            "antisymmetrizer over {} slots; only pairs are supported",
            s.len()
        )));
    }
    let sym = symmetrizer(s, n, d)?;
    Ok(Operator::identity(d, n) - sym)
}

/// Dimension of the symmetric subspace of `k` copies of `C^d`:
/// `(d+k−1)! / ((d−1)! k!)`.
pub fn symmetric_dim(d: usize, k: usize) -> usize {
    // C(d+k-1, k) computed incrementally; exact at every step.
    (1..=k).fold(1usize, |acc, i| acc * (d - 1 + i) / i)
}

/// Dimension `d(d−1)/2` of the antisymmetric subspace of `C^d ⊗ C^d`.
pub fn antisymmetric_dim(d: usize) -> usize {
    d * (d - 1) / 2
}

/// A partition of the four slots into two ordered pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairSplit {
    #[serde(rename = "12-34")]
    S12_34,
    #[serde(rename = "13-24")]
    S13_24,
    #[serde(rename = "14-23")]
    S14_23,
}

impl PairSplit {
    pub const ALL: [PairSplit; 3] = [PairSplit::S12_34, PairSplit::S13_24, PairSplit::S14_23];

    /// The two pairs, first pair first.
    pub fn pairs(self) -> ([usize; 2], [usize; 2]) {
        match self {
            PairSplit::S12_34 => ([1, 2], [3, 4]),
            PairSplit::S13_24 => ([1, 3], [2, 4]),
            PairSplit::S14_23 => ([1, 4], [2, 3]),
        }
    }

    /// Unitary `S` with `P_a⁺ ⊗ P_b⁺ = S (P_12⁺ ⊗ P_34⁺) S†` for this split
    /// `(a, b)`, composed from slot swaps: `S_23` for 13-24 and `S_34 S_23`
    /// for 14-23.
    pub fn relabeling(self, d: usize) -> Operator {
        match self {
            PairSplit::S12_34 => Operator::identity(d, 4),
            PairSplit::S13_24 => swap(2, 3, 4, d).expect("valid swap"),
            PairSplit::S14_23 => {
                swap(3, 4, 4, d).expect("valid swap") * swap(2, 3, 4, d).expect("valid swap")
            }
        }
    }
}

impl fmt::Display for PairSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ([a, b], [x, y]) = self.pairs();
        write!(f, "{a}{b}-{x}{y}")
    }
}

/// Two-slot vectors `|φ^±_{jk}⟩ = (|jk⟩ ± |kj⟩)/√2` for `j < k` and
/// `|φ⁺_{jj}⟩ = |jj⟩`.
pub fn phi_pair(d: usize, j: usize, k: usize, symmetric: bool) -> Result<StateVector> {
    if j >= d || k >= d {
        return Err(Error::InvalidArguments(format!(
            "basis labels ({j},{k}) out of range for d={d}"
        )));
    }
    if j == k {
        return if symmetric {
            StateVector::basis(d, &[j, j])
        } else {
            Err(Error::InvalidArguments(
                "antisymmetric φ⁻_jj vanishes".into(),
            ))
        };
    }
    let a = StateVector::basis(d, &[j, k])?;
    let b = StateVector::basis(d, &[k, j])?;
    let sum = if symmetric { &a + &b } else { &a - &b };
    Ok(sum.scale(c(std::f64::consts::FRAC_1_SQRT_2)))
}

/// Singlet `(|01⟩ − |10⟩)/√2` on two qubit slots.
pub fn singlet() -> StateVector {
    phi_pair(2, 0, 1, false).expect("valid labels")
}

/// Product of two-slot vectors placed on disjoint slot pairs that together
/// cover `1..=n`; `pairs[i] = (v, [a, b])` puts the first slot of `v` on `a`.
pub fn place_on_pairs(pairs: &[(&StateVector, [usize; 2])]) -> Result<StateVector> {
    let d = pairs
        .first()
        .map(|(v, _)| v.dim_local())
        .ok_or_else(|| Error::InvalidArguments("no pairs given".into()))?;
    let n = 2 * pairs.len();
    let covered: Vec<usize> = pairs
        .iter()
        .flat_map(|(_, p)| p.iter().copied())
        .sorted()
        .collect();
    if covered != (1..=n).collect::<Vec<_>>() {
        return Err(Error::InvalidArguments(format!(
            "pairs must cover slots 1..={n} exactly once"
        )));
    }
    if pairs
        .iter()
        .any(|(v, _)| v.dim_local() != d || v.num_factors() != 2)
    {
        return Err(Error::Dimension(
            "pair vectors must be two-slot vectors of equal dimension".into(),
        ));
    }
    let side = d.pow(n as u32);
    let mut amps = DVector::zeros(side);
    let mut x = vec![0; n];
    for (index, amp) in amps.iter_mut().enumerate() {
        digits_of(index, d, n, &mut x);
        *amp = pairs.iter().fold(c(1.0), |acc, (v, [a, b])| {
            acc * v.amplitudes()[x[a - 1] * d + x[b - 1]]
        });
    }
    StateVector::new(d, n, amps)
}

/// Families of explicit four-qubit vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisFamily {
    /// Orthonormal basis `η_0..η_4` of the completely symmetric subspace.
    Eta,
    /// Orthonormal `κ_1, κ_2, κ_3`: the part of `P_12⁺ ⊗ P_34⁺` orthogonal to
    /// the symmetric subspace and to both other pair splits.
    Kappa,
    /// The remaining vector `κ_2′` completing the `κ` family to a basis of
    /// `P_12⁺ ⊗ P_34⁺ − P_1234⁺`.
    KappaPrime,
    /// Unnormalized orthogonal basis `ω_1..ω_3` of `P_123⁺ − P_1234⁺`
    /// (squared norm 6 each).
    Omega,
    /// Unnormalized orthogonal basis `ω_1′..ω_3′` of `P_124⁺ − P_1234⁺`.
    OmegaPrime,
}

/// Explicit four-qubit vectors of `family`, in their conventional order,
/// relabeled to `split` by [`PairSplit::relabeling`].
pub fn named_basis(family: BasisFamily, split: PairSplit, d: usize) -> Result<Vec<StateVector>> {
    if d != 2 {
        return Err(Error::Unsupported(format!(
            "explicit four-slot bases exist for qubits only (d={d})"
        )));
    }
    let p00 = phi_pair(2, 0, 0, true)?;
    let p11 = phi_pair(2, 1, 1, true)?;
    let p01 = phi_pair(2, 0, 1, true)?;
    let m01 = phi_pair(2, 0, 1, false)?;
    let t = |a: &StateVector, b: &StateVector| a.tensor(b).expect("qubit pairs");
    let on = |a: &StateVector, pa: [usize; 2], b: &StateVector, pb: [usize; 2]| {
        place_on_pairs(&[(a, pa), (b, pb)]).expect("disjoint pairs")
    };
    let lin = |terms: &[(f64, StateVector)]| {
        terms
            .iter()
            .skip(1)
            .fold(terms[0].1.scale(c(terms[0].0)), |acc, (w, v)| {
                &acc + &v.scale(c(*w))
            })
    };
    let r2 = std::f64::consts::FRAC_1_SQRT_2;

    let base = match family {
        BasisFamily::Eta => vec![
            t(&p00, &p00),
            lin(&[(r2, t(&p00, &p01)), (r2, t(&p01, &p00))]),
            lin(&[
                ((2.0f64 / 3.0).sqrt(), t(&p01, &p01)),
                ((1.0f64 / 6.0).sqrt(), t(&p00, &p11)),
                ((1.0f64 / 6.0).sqrt(), t(&p11, &p00)),
            ]),
            lin(&[(r2, t(&p11, &p01)), (r2, t(&p01, &p11))]),
            t(&p11, &p11),
        ],
        BasisFamily::Kappa => vec![
            lin(&[(r2, t(&p00, &p01)), (-r2, t(&p01, &p00))]),
            lin(&[(r2, t(&p00, &p11)), (-r2, t(&p11, &p00))]),
            lin(&[(r2, t(&p11, &p01)), (-r2, t(&p01, &p11))]),
        ],
        BasisFamily::KappaPrime => {
            let s = (1.0f64 / 3.0).sqrt();
            vec![lin(&[
                (s, t(&p01, &p01)),
                (-s, t(&p00, &p11)),
                (-s, t(&p11, &p00)),
            ])]
        }
        BasisFamily::Omega => vec![
            lin(&[
                (1.0, on(&p00, [1, 2], &m01, [3, 4])),
                (1.0, on(&p00, [1, 3], &m01, [2, 4])),
                (1.0, on(&p00, [2, 3], &m01, [1, 4])),
            ]),
            lin(&[
                (1.0, t(&p00, &p11)),
                (-1.0, t(&p11, &p00)),
                (2.0, t(&p01, &m01)),
            ]),
            lin(&[
                (1.0, on(&p11, [1, 2], &m01, [3, 4])),
                (1.0, on(&p11, [1, 3], &m01, [2, 4])),
                (1.0, on(&p11, [2, 3], &m01, [1, 4])),
            ]),
        ],
        BasisFamily::OmegaPrime => vec![
            lin(&[
                (-1.0, on(&p00, [1, 2], &m01, [3, 4])),
                (1.0, on(&p00, [1, 4], &m01, [2, 3])),
                (1.0, on(&p00, [2, 4], &m01, [1, 3])),
            ]),
            lin(&[
                (1.0, t(&p00, &p11)),
                (-1.0, t(&p11, &p00)),
                (-2.0, t(&p01, &m01)),
            ]),
            lin(&[
                (-1.0, on(&p11, [1, 2], &m01, [3, 4])),
                (1.0, on(&p11, [1, 4], &m01, [2, 3])),
                (1.0, on(&p11, [2, 4], &m01, [1, 3])),
            ]),
        ],
    };
    let relabel = split.relabeling(2);
    Ok(base.iter().map(|v| relabel.apply(v)).collect())
}
