//! Brute-force Monte Carlo oracles shared by the integration tests and the
//! acceptance harness. Each sampler builds its tensor directly from Haar
//! draws, without touching the symmetrizer algebra it is meant to check.

#![allow(dead_code)]

use qmeter_core::comparison::Relation;
use qmeter_core::haar::{
    haar_state, haar_state_orthogonal_to, seeded_rng, ElementwiseMean, MomentAgreement,
};
use qmeter_core::symmetry::PairSplit;
use qmeter_core::tensor::kron_all;
use qmeter_core::{Operator, StateVector};

pub const MOMENT_SIGMAS: f64 = 5.0;
pub const MOMENT_FLOOR: f64 = 1e-12;

fn project(v: &StateVector) -> Operator {
    Operator::projector_onto(v)
}

/// Mean of `ψ^{⊗k}` over Haar-random `ψ ∈ C^d`.
pub fn sample_pure(k: usize, d: usize, samples: usize, seed: u64) -> ElementwiseMean {
    let mut rng = seeded_rng(seed, 0);
    let mut acc = ElementwiseMean::new(d, k);
    for _ in 0..samples {
        let p = project(&haar_state(d, &mut rng));
        acc.push(&kron_all(&vec![p; k]).unwrap());
    }
    acc
}

/// Mean of `φ^{⊗k}` over unit `φ` uniformly distributed orthogonal to `psi`.
pub fn sample_perp(k: usize, psi: &StateVector, samples: usize, seed: u64) -> ElementwiseMean {
    let mut rng = seeded_rng(seed, 0);
    let mut acc = ElementwiseMean::new(psi.dim_local(), k);
    for _ in 0..samples {
        let p = project(&haar_state_orthogonal_to(psi, &mut rng).unwrap());
        acc.push(&kron_all(&vec![p; k]).unwrap());
    }
    acc
}

/// Mean of `ψ` on the first pair of `split` and `I − ψ` on the second.
pub fn sample_r(split: PairSplit, d: usize, samples: usize, seed: u64) -> ElementwiseMean {
    let (first, _) = split.pairs();
    let mut rng = seeded_rng(seed, 0);
    let mut acc = ElementwiseMean::new(d, 4);
    for _ in 0..samples {
        let p = project(&haar_state(d, &mut rng));
        let q = Operator::identity(d, 1) - &p;
        let factors: Vec<Operator> = (1..=4)
            .map(|slot| {
                if first.contains(&slot) {
                    p.clone()
                } else {
                    q.clone()
                }
            })
            .collect();
        acc.push(&kron_all(&factors).unwrap());
    }
    acc
}

/// Mean of `ψ ⊗ ψ` (same) or `ψ ⊗ φ` with `φ ⊥ ψ` (diff).
pub fn sample_rbar(relation: Relation, d: usize, samples: usize, seed: u64) -> ElementwiseMean {
    let mut rng = seeded_rng(seed, 0);
    let mut acc = ElementwiseMean::new(d, 2);
    for _ in 0..samples {
        let psi = haar_state(d, &mut rng);
        let other = match relation {
            Relation::Same => psi.clone(),
            Relation::Diff => haar_state_orthogonal_to(&psi, &mut rng).unwrap(),
        };
        acc.push(&kron_all(&[project(&psi), project(&other)]).unwrap());
    }
    acc
}

pub fn agree(mean: &ElementwiseMean, expected: &Operator) -> MomentAgreement {
    mean.agreement(expected, MOMENT_SIGMAS, MOMENT_FLOOR)
}

/// `|x − p| ≤ n_sigma · sqrt(p(1−p)/n)`, or an exact match when `p` is 0 or 1.
pub fn within_binomial(successes: u64, trials: u64, p: f64, n_sigma: f64) -> (bool, f64) {
    let n = trials as f64;
    let x = successes as f64 / n;
    let sigma = (p * (1.0 - p) / n).sqrt();
    if sigma == 0.0 {
        return ((x - p).abs() == 0.0, 0.0);
    }
    let z = (x - p) / sigma;
    (z.abs() <= n_sigma, z)
}
