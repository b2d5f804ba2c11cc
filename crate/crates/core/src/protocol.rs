//! Shot-level simulation of the comparison protocol.
//!
//! Each trial measures the test state with the devices' bases, sorts the
//! outcome tuple into its class and reports `Different` when the class is
//! conclusive. Campaigns draw the devices at random under a fixed ground
//! truth and count verdicts.
//!
//! Trials are grouped into fixed chunks, each with its own ChaCha stream
//! derived from `(seed, purpose, chunk)`. Counts are integer sums over
//! chunks, so results do not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparison::{
    analytic_success, conclusive_classes, fixed_pair_unlabeled_success, kappa_state,
    optimal_test_state, qubit_basis_at_angle, Observable, OutcomeClass, Relation, Scenario,
    SuccessBreakdown, TestState,
};
use crate::error::{Error, Result};
use crate::haar::seeded_rng;
use crate::tensor::{apply_local_in_place, C64, TOL_ABS};

/// Probabilities below this are treated as exact zeros before sampling.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Trials per deterministic chunk.
pub const CHUNK_TRIALS: u64 = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Different,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    pub outcomes: Vec<usize>,
    pub class: OutcomeClass,
    pub verdict: Verdict,
}

/// Joint Born distribution of measuring each slot of `state` in the basis
/// given by the columns of `bases[slot]`, indexed by the outcome digits in
/// slot order. Entries below [`PROBABILITY_CLAMP`] are zeroed and the rest
/// renormalized.
pub fn outcome_distribution(state: &TestState, bases: &[&DMatrix<C64>]) -> Result<Vec<f64>> {
    let adjoints: Vec<DMatrix<C64>> = bases.iter().map(|b| b.adjoint()).collect();
    let mut scratch = BornScratch::default();
    scratch.distribution(state, &adjoints)
}

#[derive(Default)]
struct BornScratch {
    a: Vec<C64>,
    b: Vec<C64>,
    probs: Vec<f64>,
}

impl BornScratch {
    fn distribution(&mut self, state: &TestState, adjoints: &[DMatrix<C64>]) -> Result<Vec<f64>> {
        let d = state.dim_local();
        let n = state.num_factors();
        if adjoints.len() != n || adjoints.iter().any(|u| u.nrows() != d || u.ncols() != d) {
            return Err(Error::Dimension(format!("need {n} bases of dimension {d}")));
        }
        let side = d.pow(n as u32);
        self.probs.clear();
        self.probs.resize(side, 0.0);
        self.b.resize(side, C64::new(0.0, 0.0));
        for (w, v) in state.ensemble() {
            self.a.clear();
            self.a.extend(v.amplitudes().iter());
            for (slot, u) in adjoints.iter().enumerate() {
                apply_local_in_place(&self.a, &mut self.b, d, n, slot + 1, u);
                std::mem::swap(&mut self.a, &mut self.b);
            }
            for (p, amp) in self.probs.iter_mut().zip(&self.a) {
                *p += w * amp.norm_sqr();
            }
        }
        let mut total = 0.0;
        for p in &mut self.probs {
            if *p < PROBABILITY_CLAMP {
                *p = 0.0;
            }
            total += *p;
        }
        if (total - 1.0).abs() > TOL_ABS {
            return Err(Error::Consistency(format!(
                "outcome probabilities sum to {total}"
            )));
        }
        Ok(self.probs.iter().map(|p| p / total).collect())
    }
}

/// Inverse-CDF draw from a normalized distribution.
pub fn sample_outcome<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn digits(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in (0..n).rev() {
        out[slot] = index % d;
        index /= d;
    }
    out
}

fn random_permutation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// A test state paired with the classes it certifies.
pub struct Protocol {
    scenario: Scenario,
    state: TestState,
    conclusive: Vec<OutcomeClass>,
}

impl Protocol {
    /// Uses every class that is conclusive for `state`.
    pub fn new(scenario: Scenario, state: TestState) -> Result<Self> {
        let conclusive = conclusive_classes(scenario, &state)?;
        if conclusive.is_empty() {
            return Err(Error::InvalidState(format!(
                "no outcome class of {scenario} is error-free for this state"
            )));
        }
        Ok(Self {
            scenario,
            state,
            conclusive,
        })
    }

    /// Uses only `claimed`, which must each satisfy the no-error condition.
    pub fn with_classes(
        scenario: Scenario,
        state: TestState,
        claimed: Vec<OutcomeClass>,
    ) -> Result<Self> {
        analytic_success(scenario, &state, &claimed)?;
        Ok(Self {
            scenario,
            state,
            conclusive: claimed,
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn state(&self) -> &TestState {
        &self.state
    }

    pub fn conclusive(&self) -> &[OutcomeClass] {
        &self.conclusive
    }

    pub fn analytic_success(&self) -> Result<SuccessBreakdown> {
        analytic_success(self.scenario, &self.state, &self.conclusive)
    }

    fn verdict(&self, class: OutcomeClass) -> Verdict {
        if self.conclusive.contains(&class) {
            Verdict::Different
        } else {
            Verdict::Inconclusive
        }
    }

    fn check_pair(&self, a: &Observable, b: &Observable) -> Result<()> {
        let d = self.scenario.dim();
        if a.dim() != d || b.dim() != d {
            return Err(Error::Dimension(format!(
                "{} needs d={d} observables, got {} and {}",
                self.scenario,
                a.dim(),
                b.dim()
            )));
        }
        Ok(())
    }

    fn shot<R: Rng + ?Sized>(&self, bases: &[&DMatrix<C64>], rng: &mut R) -> Result<ShotRecord> {
        let probs = outcome_distribution(&self.state, bases)?;
        let outcomes = digits(
            sample_outcome(&probs, rng),
            self.scenario.dim(),
            bases.len(),
        );
        let class = self.scenario.classify(&outcomes)?;
        Ok(ShotRecord {
            outcomes,
            class,
            verdict: self.verdict(class),
        })
    }

    /// One use of each labeled device: `A` on slot 1, `B` on slot 2.
    pub fn run_labeled_trial<R: Rng + ?Sized>(
        &self,
        a: &Observable,
        b: &Observable,
        rng: &mut R,
    ) -> Result<ShotRecord> {
        if !matches!(self.scenario, Scenario::Labeled { .. }) {
            return Err(Error::InvalidArguments(format!(
                "labeled trial requested for {}",
                self.scenario
            )));
        }
        if !a.is_labeled() || !b.is_labeled() {
            return Err(Error::InvalidArguments(
                "labeled trial needs labeled observables".into(),
            ));
        }
        self.check_pair(a, b)?;
        self.shot(&[a.basis_matrix(), b.basis_matrix()], rng)
    }

    /// Two uses of each unlabeled device: `A` on slots 1, 2 and `B` on
    /// slots 3, 4. Each device reports outcomes under a fresh random
    /// labeling.
    pub fn run_unlabeled_trial<R: Rng + ?Sized>(
        &self,
        a: &Observable,
        b: &Observable,
        rng: &mut R,
    ) -> Result<ShotRecord> {
        if self.scenario != Scenario::UnlabeledQubit {
            return Err(Error::InvalidArguments(format!(
                "unlabeled trial requested for {}",
                self.scenario
            )));
        }
        self.check_pair(a, b)?;
        let a = a.relabeled(&random_permutation(a.dim(), rng))?;
        let b = b.relabeled(&random_permutation(b.dim(), rng))?;
        let (ua, ub) = (a.basis_matrix(), b.basis_matrix());
        self.shot(&[ua, ua, ub, ub], rng)
    }

    fn run_trial<R: Rng + ?Sized>(
        &self,
        a: &Observable,
        b: &Observable,
        rng: &mut R,
    ) -> Result<ShotRecord> {
        match self.scenario {
            Scenario::Labeled { .. } => self.run_labeled_trial(a, b, rng),
            Scenario::UnlabeledQubit => self.run_unlabeled_trial(a, b, rng),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    Equal,
    Different,
    Both,
}

impl GroundTruth {
    fn runs(self) -> (bool, bool) {
        match self {
            GroundTruth::Equal => (true, false),
            GroundTruth::Different => (false, true),
            GroundTruth::Both => (true, true),
        }
    }
}

/// Which test state a campaign feeds the devices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateChoice {
    Optimal,
    Kappa { index: usize },
    Custom { path: PathBuf },
}

impl fmt::Display for StateChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateChoice::Optimal => f.write_str("optimal"),
            StateChoice::Kappa { index } => write!(f, "kappa{index}"),
            StateChoice::Custom { path } => write!(f, "custom({})", path.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scenario: Scenario,
    pub trials: u64,
    pub seed: u64,
    pub ground_truth: GroundTruth,
    pub test_state: StateChoice,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if let StateChoice::Kappa { index } = self.test_state {
            if self.scenario != Scenario::UnlabeledQubit {
                return Err(Error::Config(
                    "κ test states exist for the unlabeled qubit scenario only".into(),
                ));
            }
            if !(1..=3).contains(&index) {
                return Err(Error::Config(format!(
                    "κ index must be 1, 2 or 3 (got {index})"
                )));
            }
        }
        Ok(())
    }

    pub fn resolve_state(&self) -> Result<TestState> {
        match &self.test_state {
            StateChoice::Optimal => optimal_test_state(self.scenario),
            StateChoice::Kappa { index } => kappa_state(*index),
            StateChoice::Custom { path } => TestState::from_json_file(path),
        }
    }
}

/// Verdict counts under one ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthTally {
    pub trials: u64,
    pub class_counts: BTreeMap<String, u64>,
    pub different_verdicts: u64,
    /// `different_verdicts / trials`.
    pub rate: f64,
    /// `sqrt(rate (1 − rate) / trials)`.
    pub standard_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub version: String,
    pub seed: u64,
    pub num_trials: u64,
    pub config: CampaignConfig,
    pub conclusive_classes: Vec<String>,
    pub analytic_per_class: BTreeMap<String, f64>,
    /// Conditional success probability predicted for `A ≠ B`.
    pub analytic_success: f64,
    /// Empirical success rate under `A ≠ B`, when that truth was run.
    pub success_estimate: Option<f64>,
    pub standard_error: Option<f64>,
    /// `Different` verdicts under `A = B`, when that truth was run.
    pub false_positives: Option<u64>,
    pub different: Option<TruthTally>,
    pub equal: Option<TruthTally>,
}

const PURPOSE_DIFFERENT: u64 = 1;
const PURPOSE_EQUAL: u64 = 2;
const PURPOSE_SWEEP: u64 = 3;

/// Stream id for a chunk: purpose in the top byte, a sub-index (such as a
/// grid point) in the next three bytes, the chunk index in the low half.
pub fn stream_id(purpose: u64, sub: u64, chunk: u64) -> u64 {
    debug_assert!(purpose < 1 << 8 && sub < 1 << 24 && chunk < 1 << 32);
    purpose << 56 | sub << 32 | chunk
}

fn chunk_sizes(trials: u64) -> Vec<u64> {
    let full = trials / CHUNK_TRIALS;
    let rest = trials % CHUNK_TRIALS;
    let mut sizes = vec![CHUNK_TRIALS; full as usize];
    if rest > 0 {
        sizes.push(rest);
    }
    sizes
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn tally(
    protocol: &Protocol,
    trials: u64,
    seed: u64,
    equal: bool,
    pool: &rayon::ThreadPool,
) -> Result<TruthTally> {
    let classes = protocol.scenario.classes();
    let d = protocol.scenario.dim();
    let labeled = matches!(protocol.scenario, Scenario::Labeled { .. });
    let purpose = if equal {
        PURPOSE_EQUAL
    } else {
        PURPOSE_DIFFERENT
    };
    let sizes = chunk_sizes(trials);
    let counts: Vec<Vec<u64>> = pool.install(|| {
        sizes
            .par_iter()
            .enumerate()
            .map(|(chunk, &size)| {
                let mut rng = seeded_rng(seed, stream_id(purpose, 0, chunk as u64));
                let mut counts = vec![0u64; classes.len()];
                for _ in 0..size {
                    let a = Observable::haar(d, labeled, &mut rng);
                    let b = if equal {
                        a.clone()
                    } else {
                        Observable::haar(d, labeled, &mut rng)
                    };
                    let shot = protocol.run_trial(&a, &b, &mut rng)?;
                    let idx = classes
                        .iter()
                        .position(|c| *c == shot.class)
                        .expect("known class");
                    counts[idx] += 1;
                }
                Ok(counts)
            })
            .collect::<Result<_>>()
    })?;
    let mut totals = vec![0u64; classes.len()];
    for chunk in counts {
        for (t, c) in totals.iter_mut().zip(chunk) {
            *t += c;
        }
    }
    let different_verdicts = classes
        .iter()
        .zip(&totals)
        .filter(|(c, _)| protocol.conclusive.contains(c))
        .map(|(_, n)| n)
        .sum();
    let rate = different_verdicts as f64 / trials as f64;
    Ok(TruthTally {
        trials,
        class_counts: classes.iter().map(|c| c.to_string()).zip(totals).collect(),
        different_verdicts,
        rate,
        standard_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
    })
}

/// Runs a campaign on `workers` threads (0 picks the available parallelism).
pub fn run_campaign(config: &CampaignConfig, workers: usize) -> Result<CampaignResult> {
    config.validate()?;
    let state = config.resolve_state()?;
    let protocol = Protocol::new(config.scenario, state)?;
    let breakdown = protocol.analytic_success()?;
    let pool = build_pool(workers)?;
    let (run_equal, run_different) = config.ground_truth.runs();
    let different = run_different
        .then(|| tally(&protocol, config.trials, config.seed, false, &pool))
        .transpose()?;
    let equal = run_equal
        .then(|| tally(&protocol, config.trials, config.seed, true, &pool))
        .transpose()?;
    Ok(CampaignResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        num_trials: config.trials,
        config: config.clone(),
        conclusive_classes: protocol.conclusive.iter().map(|c| c.to_string()).collect(),
        analytic_per_class: breakdown
            .per_class
            .iter()
            .map(|(c, p)| (c.to_string(), *p))
            .collect(),
        analytic_success: breakdown.total,
        success_estimate: different.as_ref().map(|t| t.rate),
        standard_error: different.as_ref().map(|t| t.standard_error),
        false_positives: equal.as_ref().map(|t| t.different_verdicts),
        different,
        equal,
    })
}

/// One grid point of a fixed-pair angle sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub trials: u64,
    pub successes: u64,
    pub empirical: f64,
    /// `Σ tr(ρ A_x ⊗ B_y)` over the conclusive classes, evaluated directly.
    pub analytic: f64,
    pub standard_error: f64,
}

/// Fixed-pair sweep with the optimal unlabeled qubit state: `A` is the
/// computational basis and `B` is rotated by each `θ`.
pub fn run_sweep(thetas: &[f64], trials: u64, seed: u64, workers: usize) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    if thetas.is_empty() {
        return Err(Error::Config("the θ grid is empty".into()));
    }
    if thetas.len() >= 1 << 24 {
        return Err(Error::Config("the θ grid is too long".into()));
    }
    if let Some(bad) = thetas.iter().find(|t| !t.is_finite()) {
        return Err(Error::Config(format!("θ must be finite (got {bad})")));
    }
    let scenario = Scenario::UnlabeledQubit;
    let protocol = Protocol::new(scenario, optimal_test_state(scenario)?)?;
    let pool = build_pool(workers)?;
    let a = Observable::computational(2, false)?;
    let sizes = chunk_sizes(trials);
    thetas
        .iter()
        .enumerate()
        .map(|(g, &theta)| {
            let b = qubit_basis_at_angle(theta, false);
            let analytic =
                fixed_pair_unlabeled_success(&a, &b, protocol.state(), protocol.conclusive())?;
            let per_chunk: Vec<u64> = pool.install(|| {
                sizes
                    .par_iter()
                    .enumerate()
                    .map(|(chunk, &size)| {
                        let mut rng =
                            seeded_rng(seed, stream_id(PURPOSE_SWEEP, g as u64, chunk as u64));
                        let mut hits = 0;
                        for _ in 0..size {
                            if protocol.run_unlabeled_trial(&a, &b, &mut rng)?.verdict
                                == Verdict::Different
                            {
                                hits += 1;
                            }
                        }
                        Ok(hits)
                    })
                    .collect::<Result<_>>()
            })?;
            let successes: u64 = per_chunk.iter().sum();
            let empirical = successes as f64 / trials as f64;
            Ok(SweepRow {
                theta,
                trials,
                successes,
                empirical,
                analytic,
                standard_error: (empirical * (1.0 - empirical) / trials as f64).sqrt(),
            })
        })
        .collect()
}

/// Counts `Different` verdicts for a fixed pair of observables.
pub fn fixed_pair_hits(
    protocol: &Protocol,
    a: &Observable,
    b: &Observable,
    trials: u64,
    seed: u64,
    stream: u64,
) -> Result<u64> {
    let mut rng = seeded_rng(seed, stream);
    let mut hits = 0;
    for _ in 0..trials {
        if protocol.run_trial(a, b, &mut rng)?.verdict == Verdict::Different {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Relation of the two reported outcomes of each device in a shot.
pub fn shot_relations(shot: &ShotRecord) -> Vec<Relation> {
    shot.outcomes
        .chunks(2)
        .map(|p| Relation::of(p[0], p[p.len() - 1]))
        .collect()
}
