//! End-to-end stochastic verification of the attack: runs the protocol with
//! the malicious device, tallies empirical round-pair and test-round
//! statistics, and compares them against the exact tables.
//!
//! A run is driven by a single ChaCha12 stream seeded from the config. Per
//! protocol round the stream is consumed in this order: one round-type
//! uniform (test round iff u < `test_round_fraction`), then for test rounds
//! one uniform each for x and y, then the device draws in the order
//! documented in [`crate::devices`]. Identical configs therefore produce
//! bit-identical outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::analysis::{
    conditional_entropy, pair_distribution, AnalysisError, KeyRoundParams, PairDistribution,
    RoundOutcome,
};
use crate::devices::{
    joint_key_round_with_bias, joint_round, BobDeviceState, KeepProbability,
};
use crate::quantum::{chsh_value, AliceInput, Bit, BobInput, CorrelationTable, OutcomeDistribution};
use crate::scalar::Scalar;

/// Declared statistical tolerances, calibrated at the sample sizes below.
pub const ENTROPY_TOLERANCE_BITS: f64 = 0.005;
pub const TV_TOLERANCE: f64 = 0.002;
pub const CHSH_TOLERANCE: f64 = 0.01;
pub const ALICE_ZERO_TOLERANCE: f64 = 0.002;
/// Pair count below which the entropy and TV flags read "insufficient sample".
pub const CALIBRATION_PAIRS: u64 = 1_000_000;
/// Round counts below which the CHSH and p₀ flags read "insufficient sample".
pub const CALIBRATION_ROUNDS: u64 = 1_000_000;

/// Errors raised by the simulation layer.
#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("number of key-round pairs must be at least 1")]
    NoPairs,
    #[error("test-round fraction {value} outside [0, 1)")]
    TestFractionOutOfRange { value: f64 },
    #[error("p0 override {value} outside [0, 1]")]
    P0OverrideOutOfRange { value: f64 },
    #[error("empirical distribution has no samples")]
    EmptySample,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Validated configuration of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig<S: Scalar> {
    seed: u64,
    num_pairs: u64,
    p0_override: Option<S>,
    p: KeepProbability<S>,
    test_round_fraction: S,
}

impl<S: Scalar> SimulationConfig<S> {
    /// `p0_override` forces Alice's key-round marginal to a biased coin
    /// (with Bob's honest output copying Alice's); `None` uses the honest
    /// quantum devices, whose marginal is p₀ = 1/2.
    pub fn new(
        seed: u64,
        num_pairs: u64,
        p: KeepProbability<S>,
        p0_override: Option<S>,
        test_round_fraction: S,
    ) -> Result<Self, SimulationError> {
        if num_pairs == 0 {
            return Err(SimulationError::NoPairs);
        }
        if !(test_round_fraction >= S::zero() && test_round_fraction < S::one()) {
            return Err(SimulationError::TestFractionOutOfRange {
                value: test_round_fraction.to_real(),
            });
        }
        if let Some(p0) = p0_override {
            if !(S::zero()..=S::one()).contains(&p0) {
                return Err(SimulationError::P0OverrideOutOfRange { value: p0.to_real() });
            }
        }
        Ok(Self { seed, num_pairs, p0_override, p, test_round_fraction })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_pairs(&self) -> u64 {
        self.num_pairs
    }

    pub fn p0_override(&self) -> Option<S> {
        self.p0_override
    }

    /// Alice's key-round zero-probability: the override if set, otherwise
    /// the honest Born value 1/2.
    pub fn effective_p0(&self) -> S {
        self.p0_override.unwrap_or_else(S::half)
    }

    pub fn keep_probability(&self) -> KeepProbability<S> {
        self.p
    }

    pub fn test_round_fraction(&self) -> S {
        self.test_round_fraction
    }

    /// The exact pair distribution this run is expected to converge to.
    pub fn exact_pair_distribution(&self) -> PairDistribution<S> {
        let params = KeyRoundParams::new(self.effective_p0(), self.p)
            .expect("validated config parameters");
        pair_distribution(&params)
    }
}

/// Empirical counterpart of [`PairDistribution`]: raw counts per
/// (a₂, s₂, t₂, a₁, s₁, t₁) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalPairDistribution {
    counts: [u64; RoundOutcome::COUNT * RoundOutcome::COUNT],
    total: u64,
}

impl EmpiricalPairDistribution {
    pub fn new() -> Self {
        Self { counts: [0; RoundOutcome::COUNT * RoundOutcome::COUNT], total: 0 }
    }

    fn index(second: RoundOutcome, first: RoundOutcome) -> usize {
        second.index() * RoundOutcome::COUNT + first.index()
    }

    pub fn tally(&mut self, second: RoundOutcome, first: RoundOutcome) {
        self.counts[Self::index(second, first)] += 1;
        self.total += 1;
    }

    pub fn count(&self, second: RoundOutcome, first: RoundOutcome) -> u64 {
        self.counts[Self::index(second, first)]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (RoundOutcome, RoundOutcome, u64)> + '_ {
        RoundOutcome::all().flat_map(move |second| {
            RoundOutcome::all().map(move |first| (second, first, self.count(second, first)))
        })
    }

    /// Plug-in probability table: counts divided by the total.
    pub fn normalized<S: Scalar>(&self) -> Result<PairDistribution<S>, SimulationError> {
        if self.total == 0 {
            return Err(SimulationError::EmptySample);
        }
        let total = S::from_u64(self.total).expect("total fits the scalar");
        let mut probs = [S::zero(); RoundOutcome::COUNT * RoundOutcome::COUNT];
        for (i, &count) in self.counts.iter().enumerate() {
            probs[i] = S::from_u64(count).expect("count fits the scalar") / total;
        }
        Ok(PairDistribution::from_probabilities(probs)?)
    }
}

impl Default for EmpiricalPairDistribution {
    fn default() -> Self {
        Self::new()
    }
}

/// Raw input/output counts of the test rounds, indexed by
/// (x, y ∈ {1, 2}, a, b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TestRoundCounts {
    counts: [[[[u64; 2]; 2]; 2]; 2],
    total: u64,
}

impl TestRoundCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tally(&mut self, x: AliceInput, y: BobInput, a: Bit, b: Bit) {
        debug_assert!(y != BobInput::Y3, "test rounds use y in {{1, 2}}");
        self.counts[x.index()][y.index()][a.index()][b.index()] += 1;
        self.total += 1;
    }

    pub fn count(&self, x: AliceInput, y: BobInput, a: Bit, b: Bit) -> u64 {
        self.counts[x.index()][y.index()][a.index()][b.index()]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn setting_total(&self, x: AliceInput, y: BobInput) -> u64 {
        let cell = self.counts[x.index()][y.index()];
        cell[0][0] + cell[0][1] + cell[1][0] + cell[1][1]
    }

    /// Normalizes each observed setting into a correlation table. Settings
    /// with no samples stay absent.
    pub fn to_correlation_table<S: Scalar>(&self) -> CorrelationTable<S> {
        let mut table = CorrelationTable::new();
        for x in AliceInput::ALL {
            for y in [BobInput::Y1, BobInput::Y2] {
                let total = self.setting_total(x, y);
                if total == 0 {
                    continue;
                }
                let denom = S::from_u64(total).expect("count fits the scalar");
                let mut probs = [[S::zero(); 2]; 2];
                for a in Bit::ALL {
                    for b in Bit::ALL {
                        probs[a.index()][b.index()] =
                            S::from_u64(self.count(x, y, a, b)).expect("count fits the scalar")
                                / denom;
                    }
                }
                let dist = OutcomeDistribution::new(probs)
                    .expect("normalized counts form a distribution");
                table.insert(x, y, dist);
            }
        }
        table
    }

    /// Empirical CHSH value; `None` until every test setting has samples.
    pub fn chsh_estimate<S: Scalar>(&self) -> Option<S> {
        chsh_value(&self.to_correlation_table::<S>()).ok()
    }
}

/// Everything tallied during one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput<S: Scalar> {
    pub config: SimulationConfig<S>,
    pub pairs: EmpiricalPairDistribution,
    pub test_counts: TestRoundCounts,
    pub key_rounds: u64,
    pub key_round_zeros: u64,
    pub honest_key_rounds: u64,
    pub honest_key_agreements: u64,
    pub test_rounds: u64,
}

/// Runs `num_pairs` key-round pairs, interleaving test rounds with the
/// configured probability (uniform x ∈ {1, 2}, y ∈ {1, 2}). Pairs align on
/// Bob's counter parity: the even-counter round is the honest first round,
/// the following key round replays it. Deterministic given the seed.
pub fn run_simulation<S: Scalar>(config: &SimulationConfig<S>) -> SimulationOutput<S> {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut dev = BobDeviceState::new();
    let mut pairs = EmpiricalPairDistribution::new();
    let mut test_counts = TestRoundCounts::new();
    let mut key_rounds = 0u64;
    let mut key_round_zeros = 0u64;
    let mut honest_key_rounds = 0u64;
    let mut honest_key_agreements = 0u64;
    let mut pending: Option<RoundOutcome> = None;

    let fraction = config.test_round_fraction.to_real();
    let keep = config.p;

    while pairs.total() < config.num_pairs {
        let is_test = rng.gen::<f64>() < fraction;
        if is_test {
            let x = if rng.gen::<f64>() < 0.5 { AliceInput::X1 } else { AliceInput::X2 };
            let y = if rng.gen::<f64>() < 0.5 { BobInput::Y1 } else { BobInput::Y2 };
            let (record, next) = joint_round(dev, x, y, keep, &mut rng);
            test_counts.tally(x, y, record.a_raw, record.b_raw);
            dev = next;
        } else {
            let honest = dev.next_key_round_is_honest();
            let (record, next) = match config.p0_override {
                Some(p0) => joint_key_round_with_bias(dev, p0, keep, &mut rng),
                None => joint_round(dev, AliceInput::X1, BobInput::Y3, keep, &mut rng),
            };
            dev = next;
            key_rounds += 1;
            if record.a_raw == Bit::Zero {
                key_round_zeros += 1;
            }
            let triple = RoundOutcome::new(record.a_final, record.s, record.t);
            if honest {
                honest_key_rounds += 1;
                if record.a_raw == record.b_raw {
                    honest_key_agreements += 1;
                }
                pending = Some(triple);
            } else {
                let first = pending.take().expect("replay round always follows an honest round");
                pairs.tally(triple, first);
            }
        }
    }

    SimulationOutput {
        config: *config,
        pairs,
        test_counts,
        key_rounds,
        key_round_zeros,
        honest_key_rounds,
        honest_key_agreements,
        test_rounds: test_counts.total(),
    }
}

/// Plug-in estimator of the conditional entropy: the exact formula applied
/// to the normalized counts.
pub fn empirical_entropy<S: Scalar>(
    emp: &EmpiricalPairDistribution,
) -> Result<S, SimulationError> {
    Ok(conditional_entropy(&emp.normalized()?)?)
}

/// Standardized deviation of one cell's count from its expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellZScore<S: Scalar> {
    pub second: RoundOutcome,
    pub first: RoundOutcome,
    pub z: S,
}

/// A cell that carries samples although the exact table assigns it
/// probability zero. Any such cell is a hard failure signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportViolation {
    pub second: RoundOutcome,
    pub first: RoundOutcome,
    pub count: u64,
}

/// Empirical-vs-exact comparison: total variation distance, worst absolute
/// cell deviation, per-cell z-scores and off-support cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport<S: Scalar> {
    pub tv_distance: S,
    pub max_abs_deviation: S,
    pub z_scores: Vec<CellZScore<S>>,
    pub support_violations: Vec<SupportViolation>,
}

pub fn compare_to_exact<S: Scalar>(
    emp: &EmpiricalPairDistribution,
    exact: &PairDistribution<S>,
) -> Result<ComparisonReport<S>, SimulationError> {
    if emp.total() == 0 {
        return Err(SimulationError::EmptySample);
    }
    let n = S::from_u64(emp.total()).expect("total fits the scalar");
    let mut tv = S::zero();
    let mut max_dev = S::zero();
    let mut z_scores = Vec::new();
    let mut support_violations = Vec::new();

    for (second, first, count) in emp.iter() {
        let q = exact.prob(second, first);
        let freq = S::from_u64(count).expect("count fits the scalar") / n;
        let dev = (freq - q).abs();
        tv += dev;
        max_dev = max_dev.max(dev);

        if q == S::zero() {
            if count > 0 {
                support_violations.push(SupportViolation { second, first, count });
            }
        } else {
            let expected = n * q;
            let variance = n * q * (S::one() - q);
            let z = if variance > S::zero() {
                (S::from_u64(count).expect("count fits the scalar") - expected)
                    / variance.sqrt()
            } else {
                S::zero()
            };
            z_scores.push(CellZScore { second, first, z });
        }
    }

    Ok(ComparisonReport {
        tv_distance: tv * S::half(),
        max_abs_deviation: max_dev,
        z_scores,
        support_violations,
    })
}

/// Tri-state verdict of one report check. Statistical checks read
/// "insufficient sample" instead of failing when the run is smaller than the
/// tolerance's calibration size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckFlag {
    Pass,
    Fail,
    InsufficientSample,
}

impl std::fmt::Display for CheckFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            CheckFlag::Pass => "pass",
            CheckFlag::Fail => "fail",
            CheckFlag::InsufficientSample => "insufficient-sample",
        };
        f.write_str(text)
    }
}

impl CheckFlag {
    fn statistical(enough_samples: bool, ok: bool) -> Self {
        match (enough_samples, ok) {
            (false, _) => CheckFlag::InsufficientSample,
            (true, true) => CheckFlag::Pass,
            (true, false) => CheckFlag::Fail,
        }
    }
}

/// Where the report's p₀ came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P0Source {
    Born,
    Override,
}

impl std::fmt::Display for P0Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            P0Source::Born => "born",
            P0Source::Override => "override",
        })
    }
}

/// Comma-separated run summary: config echo, sample sizes, empirical vs
/// exact figures, and pass/fail flags under the declared tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<S: Scalar> {
    pub seed: u64,
    pub num_pairs: u64,
    pub p0: S,
    pub p0_source: P0Source,
    pub p: S,
    pub test_round_fraction: S,
    pub key_rounds: u64,
    pub test_rounds: u64,
    pub empirical_entropy: S,
    pub exact_entropy: S,
    pub tv_distance: S,
    pub max_cell_deviation: S,
    pub chsh_estimate: Option<S>,
    pub alice_zero_frequency: S,
    pub honest_agreement_frequency: S,
    pub support_violations: u64,
    pub entropy_flag: CheckFlag,
    pub tv_flag: CheckFlag,
    pub chsh_flag: CheckFlag,
    pub alice_zero_flag: CheckFlag,
    pub honest_agreement_flag: CheckFlag,
    pub support_flag: CheckFlag,
}

impl<S: Scalar> RunReport<S> {
    pub fn from_output(output: &SimulationOutput<S>) -> Result<Self, SimulationError> {
        let config = &output.config;
        let exact = config.exact_pair_distribution();
        let exact_entropy = conditional_entropy(&exact)?;
        let empirical = empirical_entropy::<S>(&output.pairs)?;
        let comparison = compare_to_exact(&output.pairs, &exact)?;

        let p0 = config.effective_p0();
        let alice_zero_frequency = ratio::<S>(output.key_round_zeros, output.key_rounds);
        let honest_agreement_frequency =
            ratio::<S>(output.honest_key_agreements, output.honest_key_rounds);
        let chsh_estimate = output.test_counts.chsh_estimate::<S>();

        let entropy_ok =
            (empirical - exact_entropy).abs().to_real() <= ENTROPY_TOLERANCE_BITS;
        let tv_ok = comparison.tv_distance.to_real() < TV_TOLERANCE;
        let chsh_ok = chsh_estimate
            .map(|s| (s.to_real() - 2.0 * std::f64::consts::SQRT_2).abs() <= CHSH_TOLERANCE)
            .unwrap_or(false);
        let alice_zero_ok =
            (alice_zero_frequency - p0).abs().to_real() <= ALICE_ZERO_TOLERANCE;

        Ok(Self {
            seed: config.seed(),
            num_pairs: config.num_pairs(),
            p0,
            p0_source: if config.p0_override().is_some() {
                P0Source::Override
            } else {
                P0Source::Born
            },
            p: config.keep_probability().value(),
            test_round_fraction: config.test_round_fraction(),
            key_rounds: output.key_rounds,
            test_rounds: output.test_rounds,
            empirical_entropy: empirical,
            exact_entropy,
            tv_distance: comparison.tv_distance,
            max_cell_deviation: comparison.max_abs_deviation,
            chsh_estimate,
            alice_zero_frequency,
            honest_agreement_frequency,
            support_violations: comparison.support_violations.len() as u64,
            entropy_flag: CheckFlag::statistical(
                config.num_pairs() >= CALIBRATION_PAIRS,
                entropy_ok,
            ),
            tv_flag: CheckFlag::statistical(config.num_pairs() >= CALIBRATION_PAIRS, tv_ok),
            chsh_flag: CheckFlag::statistical(output.test_rounds >= CALIBRATION_ROUNDS, chsh_ok),
            alice_zero_flag: CheckFlag::statistical(
                output.key_rounds >= CALIBRATION_ROUNDS,
                alice_zero_ok,
            ),
            honest_agreement_flag: if output.honest_key_agreements == output.honest_key_rounds {
                CheckFlag::Pass
            } else {
                CheckFlag::Fail
            },
            support_flag: if comparison.support_violations.is_empty() {
                CheckFlag::Pass
            } else {
                CheckFlag::Fail
            },
        })
    }

    /// Renders the report as a two-line CSV (header and one value row).
    pub fn to_csv(&self) -> String {
        let chsh = match self.chsh_estimate {
            Some(value) => value.to_string(),
            None => "NaN".to_string(),
        };
        let header = "seed,pairs,p0,p0_source,p,test_fraction,key_rounds,test_rounds,\
                      empirical_entropy,exact_entropy,tv_distance,max_cell_deviation,\
                      chsh_estimate,alice_zero_frequency,honest_agreement_frequency,\
                      support_violations,entropy_flag,tv_flag,chsh_flag,alice_zero_flag,\
                      honest_agreement_flag,support_flag";
        format!(
            "{header}\n{},{},{},{},{},{},{},{},{},{},{},{},{chsh},{},{},{},{},{},{},{},{},{}\n",
            self.seed,
            self.num_pairs,
            self.p0,
            self.p0_source,
            self.p,
            self.test_round_fraction,
            self.key_rounds,
            self.test_rounds,
            self.empirical_entropy,
            self.exact_entropy,
            self.tv_distance,
            self.max_cell_deviation,
            self.alice_zero_frequency,
            self.honest_agreement_frequency,
            self.support_violations,
            self.entropy_flag,
            self.tv_flag,
            self.chsh_flag,
            self.alice_zero_flag,
            self.honest_agreement_flag,
            self.support_flag,
        )
    }
}

fn ratio<S: Scalar>(numerator: u64, denominator: u64) -> S {
    if denominator == 0 {
        return S::zero();
    }
    S::from_u64(numerator).expect("count fits the scalar")
        / S::from_u64(denominator).expect("count fits the scalar")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{KeepDecision, KeySymbol};

    fn config(seed: u64, pairs: u64, p: f64) -> SimulationConfig<f64> {
        SimulationConfig::new(seed, pairs, KeepProbability::new(p).unwrap(), None, 0.0).unwrap()
    }

    fn outcome(a: KeySymbol, s: KeepDecision, t: KeepDecision) -> RoundOutcome {
        RoundOutcome::new(a, s, t)
    }

    use KeepDecision::{Discard as B, Keep as T};
    use KeySymbol::{One, Zero};

    #[test]
    fn config_validation() {
        let keep = KeepProbability::new(0.5).unwrap();
        assert!(matches!(
            SimulationConfig::<f64>::new(1, 0, keep, None, 0.0),
            Err(SimulationError::NoPairs)
        ));
        assert!(matches!(
            SimulationConfig::new(1, 1, keep, None, 1.0),
            Err(SimulationError::TestFractionOutOfRange { .. })
        ));
        assert!(matches!(
            SimulationConfig::new(1, 1, keep, Some(1.5), 0.0),
            Err(SimulationError::P0OverrideOutOfRange { .. })
        ));
        assert!(SimulationConfig::new(1, 1, keep, Some(0.3), 0.5).is_ok());
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = config(42, 5_000, 0.5);
        let first = run_simulation(&cfg);
        let second = run_simulation(&cfg);
        assert_eq!(first, second);
    }

    #[test]
    fn different_seeds_differ() {
        let a = run_simulation(&config(1, 5_000, 0.5));
        let b = run_simulation(&config(2, 5_000, 0.5));
        assert_ne!(a.pairs, b.pairs);
    }

    #[test]
    fn honest_rounds_always_agree() {
        let output = run_simulation(&config(7, 20_000, 0.4));
        assert_eq!(output.honest_key_rounds, output.honest_key_agreements);
        assert_eq!(output.honest_key_rounds, 20_000);
        assert_eq!(output.key_rounds, 40_000);
    }

    #[test]
    fn simulator_stays_on_exact_support() {
        for seed in 0..5 {
            let cfg = config(seed, 20_000, 0.5);
            let output = run_simulation(&cfg);
            let exact = cfg.exact_pair_distribution();
            for (second, first, count) in output.pairs.iter() {
                if count > 0 {
                    assert!(
                        exact.prob(second, first) > 0.0,
                        "off-support cell {second:?} {first:?} at seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn test_rounds_are_interleaved_and_tallied() {
        let cfg = SimulationConfig::new(
            11,
            10_000,
            KeepProbability::new(0.5).unwrap(),
            None,
            0.5,
        )
        .unwrap();
        let output = run_simulation(&cfg);
        assert_eq!(output.pairs.total(), 10_000);
        assert!(output.test_rounds > 15_000, "expected ~20k test rounds");
        // Honest/replay alignment is untouched by the interleaving.
        assert_eq!(output.honest_key_rounds, output.honest_key_agreements);
        let sum: u64 = (0..2)
            .flat_map(|x| (0..2).map(move |y| (x, y)))
            .map(|(x, y)| {
                output.test_counts.setting_total(
                    AliceInput::ALL[x],
                    [BobInput::Y1, BobInput::Y2][y],
                )
            })
            .sum();
        assert_eq!(sum, output.test_rounds);
    }

    #[test]
    fn empirical_entropy_of_point_mass_is_zero() {
        let mut emp = EmpiricalPairDistribution::new();
        for _ in 0..100 {
            emp.tally(outcome(Zero, T, T), outcome(Zero, T, T));
        }
        assert_eq!(empirical_entropy::<f64>(&emp).unwrap(), 0.0);
    }

    #[test]
    fn empirical_entropy_matches_exact_keep_one_table() {
        // Counts proportional to the p = 1, p0 = 1/2 table: uniform over the
        // four (a2, a1) bit pairs with all flags ⊤.
        let mut emp = EmpiricalPairDistribution::new();
        for a2 in [Zero, One] {
            for a1 in [Zero, One] {
                for _ in 0..250 {
                    emp.tally(outcome(a2, T, T), outcome(a1, T, T));
                }
            }
        }
        assert_eq!(empirical_entropy::<f64>(&emp).unwrap(), 2.0);
    }

    #[test]
    fn empty_sample_is_rejected() {
        let emp = EmpiricalPairDistribution::new();
        assert!(matches!(
            empirical_entropy::<f64>(&emp),
            Err(SimulationError::EmptySample)
        ));
    }

    #[test]
    fn comparison_of_exactly_proportional_counts_is_zero() {
        // The (p0, p) = (1/2, 1/2) table is dyadic: 64 samples reproduce it
        // exactly.
        let cfg = config(0, 1, 0.5);
        let exact = cfg.exact_pair_distribution();
        let mut emp = EmpiricalPairDistribution::new();
        for (second, first, prob) in exact.iter() {
            let count = (prob * 64.0).round() as u64;
            for _ in 0..count {
                emp.tally(second, first);
            }
        }
        assert_eq!(emp.total(), 64);
        let report = compare_to_exact(&emp, &exact).unwrap();
        assert_eq!(report.tv_distance, 0.0);
        assert_eq!(report.max_abs_deviation, 0.0);
        assert!(report.support_violations.is_empty());
    }

    #[test]
    fn off_support_counts_are_flagged() {
        let cfg = config(0, 1, 0.5);
        let exact = cfg.exact_pair_distribution();
        let mut emp = EmpiricalPairDistribution::new();
        // (a1 = 0, s1 = ⊥, ...) is impossible: zeros are never discarded.
        emp.tally(outcome(Zero, T, T), outcome(Zero, B, B));
        let report = compare_to_exact(&emp, &exact).unwrap();
        assert_eq!(report.support_violations.len(), 1);
        assert_eq!(report.support_violations[0].count, 1);
    }

    #[test]
    fn override_path_converges_to_its_exact_table() {
        let cfg = SimulationConfig::new(
            5,
            100_000,
            KeepProbability::new(0.7).unwrap(),
            Some(0.3),
            0.0,
        )
        .unwrap();
        let output = run_simulation(&cfg);
        let report = compare_to_exact(&output.pairs, &cfg.exact_pair_distribution()).unwrap();
        assert!(report.tv_distance < 0.01, "tv = {}", report.tv_distance);
        assert!(report.support_violations.is_empty());
    }

    #[test]
    fn report_flags_small_runs_as_insufficient() {
        let cfg = config(3, 1, 0.5);
        let output = run_simulation(&cfg);
        let report = RunReport::from_output(&output).unwrap();
        assert_eq!(report.entropy_flag, CheckFlag::InsufficientSample);
        assert_eq!(report.tv_flag, CheckFlag::InsufficientSample);
        assert_eq!(report.chsh_flag, CheckFlag::InsufficientSample);
        assert_eq!(report.alice_zero_flag, CheckFlag::InsufficientSample);
        assert_eq!(report.honest_agreement_flag, CheckFlag::Pass);
        assert_eq!(report.support_flag, CheckFlag::Pass);
        let csv = report.to_csv();
        assert!(csv.contains("insufficient-sample"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn report_csv_is_deterministic() {
        let cfg = config(9, 2_000, 0.5);
        let a = RunReport::from_output(&run_simulation(&cfg)).unwrap().to_csv();
        let b = RunReport::from_output(&run_simulation(&cfg)).unwrap().to_csv();
        assert_eq!(a, b);
    }
}
