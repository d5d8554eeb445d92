//! Closed-form analysis of the pair-replay attack: the exact two-round joint
//! distribution over outputs and announcements, its conditional Shannon
//! entropy, the per-round rate, parameter sweeps, and the comparison against
//! an imported collective-attack bound.
//!
//! A round pair consists of an honest key round followed by a replay key
//! round. Writing p₀ for Alice's probability of outputting 0 and p for the
//! keep probability, the first round has exactly five reachable
//! (a₁, s₁, t₁) triples and the second round's distribution depends on the
//! first only through whether the underlying outcome was 0 (Bob replays a 0,
//! which is never discarded) or 1 (Bob replays a 1, kept with probability p).
//! All operations here are pure functions.

use std::path::Path;

use thiserror::Error;

use crate::curve::{self, CurveError};
use crate::devices::{DeviceError, KeepDecision, KeepProbability, KeySymbol};
use crate::scalar::Scalar;

/// Errors raised by the exact-analysis layer.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("parameter {name} = {value} outside [0, 1]")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("negative probability entry {value}")]
    NegativeProbability { value: f64 },
    #[error("distribution is not normalized: total mass {sum}")]
    NotNormalized { sum: f64 },
    #[error("curve p-column must be strictly increasing (violation at point {index})")]
    NonMonotoneGrid { index: usize },
    #[error("curve value out of range at point {index}: {value}")]
    CurveValueOutOfRange { index: usize, value: f64 },
    #[error("curve needs at least two points, got {points}")]
    TooFewPoints { points: usize },
    #[error("curves do not overlap: p-ranges [{a_min}, {a_max}] and [{b_min}, {b_max}]")]
    EmptyOverlap { a_min: f64, a_max: f64, b_min: f64, b_max: f64 },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// One round's published data: the key symbol and both keep flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoundOutcome {
    pub a: KeySymbol,
    pub s: KeepDecision,
    pub t: KeepDecision,
}

impl RoundOutcome {
    pub const COUNT: usize = 12;

    pub fn new(a: KeySymbol, s: KeepDecision, t: KeepDecision) -> Self {
        Self { a, s, t }
    }

    pub fn index(self) -> usize {
        self.a.index() * 4 + self.s.index() * 2 + self.t.index()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= Self::COUNT {
            return None;
        }
        Some(Self {
            a: KeySymbol::from_index(index / 4)?,
            s: KeepDecision::from_index((index / 2) % 2)?,
            t: KeepDecision::from_index(index % 2)?,
        })
    }

    pub fn all() -> impl Iterator<Item = RoundOutcome> {
        (0..Self::COUNT).map(|i| Self::from_index(i).unwrap())
    }

    /// Index of the announcement part (s, t) alone, in 0..4.
    fn announcement_index(self) -> usize {
        self.s.index() * 2 + self.t.index()
    }
}

/// Parameters of a key round: Alice's zero-probability p₀ (p₁ = 1 − p₀ is
/// always derived) and the keep probability p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRoundParams<S: Scalar> {
    p0: S,
    p: KeepProbability<S>,
}

impl<S: Scalar> KeyRoundParams<S> {
    pub fn new(p0: S, p: KeepProbability<S>) -> Result<Self, AnalysisError> {
        if !(S::zero()..=S::one()).contains(&p0) {
            return Err(AnalysisError::ParameterOutOfRange {
                name: "p0",
                value: p0.to_real(),
            });
        }
        Ok(Self { p0, p })
    }

    pub fn p0(&self) -> S {
        self.p0
    }

    pub fn p1(&self) -> S {
        S::one() - self.p0
    }

    pub fn keep(&self) -> S {
        self.p.value()
    }

    pub fn keep_probability(&self) -> KeepProbability<S> {
        self.p
    }
}

/// Probability table over the twelve (a, s, t) triples of a single round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundDistribution<S: Scalar> {
    probs: [S; RoundOutcome::COUNT],
}

impl<S: Scalar> RoundDistribution<S> {
    fn zero() -> Self {
        Self { probs: [S::zero(); RoundOutcome::COUNT] }
    }

    pub fn prob(&self, outcome: RoundOutcome) -> S {
        self.probs[outcome.index()]
    }

    pub fn sum(&self) -> S {
        let mut acc = S::zero();
        for &p in &self.probs {
            acc += p;
        }
        acc
    }

    /// Outcomes carrying non-zero probability.
    pub fn support(&self) -> impl Iterator<Item = (RoundOutcome, S)> + '_ {
        RoundOutcome::all()
            .map(|o| (o, self.prob(o)))
            .filter(|&(_, p)| p > S::zero())
    }
}

/// Distribution of the first (honest) key round of a pair. Only five triples
/// are reachable: a 0 is always kept by both parties, and because honest
/// outputs agree exactly, a discard by either party implies the raw outcome
/// was 1 on both sides.
pub fn first_round_distribution<S: Scalar>(params: &KeyRoundParams<S>) -> RoundDistribution<S> {
    let (p0, p1, p) = (params.p0(), params.p1(), params.keep());
    let q = S::one() - p;
    let mut dist = RoundDistribution::zero();
    let mut set = |a, s, t, value| {
        dist.probs[RoundOutcome::new(a, s, t).index()] = value;
    };
    set(KeySymbol::Zero, KeepDecision::Keep, KeepDecision::Keep, p0);
    set(KeySymbol::One, KeepDecision::Keep, KeepDecision::Keep, p1 * p * p);
    set(KeySymbol::Discarded, KeepDecision::Keep, KeepDecision::Discard, p1 * p * q);
    set(KeySymbol::Discarded, KeepDecision::Discard, KeepDecision::Keep, p1 * q * p);
    set(KeySymbol::Discarded, KeepDecision::Discard, KeepDecision::Discard, p1 * q * q);
    dist
}

/// Which conditional branch the second round follows, determined by the
/// underlying first-round outcome: `Zero` iff a₁ = 0; any a₁ ∈ {1, ⊥} means
/// the raw outcome (for both parties) was 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstRoundBranch {
    Zero,
    OneOrDiscarded,
}

impl FirstRoundBranch {
    pub fn from_symbol(a1: KeySymbol) -> Self {
        match a1 {
            KeySymbol::Zero => FirstRoundBranch::Zero,
            KeySymbol::One | KeySymbol::Discarded => FirstRoundBranch::OneOrDiscarded,
        }
    }
}

/// Distribution of the second (replay) key round conditioned on the first
/// round's branch. Bob replays the memorized raw bit; Alice's fresh outcome
/// is an independent p₀/p₁ draw.
pub fn second_round_conditional<S: Scalar>(
    params: &KeyRoundParams<S>,
    branch: FirstRoundBranch,
) -> RoundDistribution<S> {
    let (p0, p1, p) = (params.p0(), params.p1(), params.keep());
    let q = S::one() - p;
    let mut dist = RoundDistribution::zero();
    let mut set = |a, s, t, value| {
        dist.probs[RoundOutcome::new(a, s, t).index()] = value;
    };
    match branch {
        // Bob replays a 0, which is never discarded: t₂ = ⊤ always.
        FirstRoundBranch::Zero => {
            set(KeySymbol::Zero, KeepDecision::Keep, KeepDecision::Keep, p0);
            set(KeySymbol::One, KeepDecision::Keep, KeepDecision::Keep, p1 * p);
            set(KeySymbol::Discarded, KeepDecision::Discard, KeepDecision::Keep, p1 * q);
        }
        // Bob replays a 1 and keeps it with probability p.
        FirstRoundBranch::OneOrDiscarded => {
            set(KeySymbol::Zero, KeepDecision::Keep, KeepDecision::Keep, p0 * p);
            set(KeySymbol::One, KeepDecision::Keep, KeepDecision::Keep, p1 * p * p);
            set(KeySymbol::Discarded, KeepDecision::Discard, KeepDecision::Keep, p1 * q * p);
            set(
                KeySymbol::Discarded,
                KeepDecision::Keep,
                KeepDecision::Discard,
                (p0 + p1 * p) * q,
            );
            set(KeySymbol::Discarded, KeepDecision::Discard, KeepDecision::Discard, p1 * q * q);
        }
    }
    dist
}

/// Exact joint probability table over (a₂, s₂, t₂, a₁, s₁, t₁) for one
/// attack round pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution<S: Scalar> {
    probs: [S; RoundOutcome::COUNT * RoundOutcome::COUNT],
}

impl<S: Scalar> PairDistribution<S> {
    pub const CELLS: usize = RoundOutcome::COUNT * RoundOutcome::COUNT;

    /// Wraps a raw table, rejecting negative or non-finite entries.
    /// Normalization is checked where the table is consumed (entropy).
    pub fn from_probabilities(
        probs: [S; RoundOutcome::COUNT * RoundOutcome::COUNT],
    ) -> Result<Self, AnalysisError> {
        for &p in &probs {
            if p < S::zero() || !p.is_finite() {
                return Err(AnalysisError::NegativeProbability { value: p.to_real() });
            }
        }
        Ok(Self { probs })
    }

    fn index(second: RoundOutcome, first: RoundOutcome) -> usize {
        second.index() * RoundOutcome::COUNT + first.index()
    }

    pub fn prob(&self, second: RoundOutcome, first: RoundOutcome) -> S {
        self.probs[Self::index(second, first)]
    }

    pub fn sum(&self) -> S {
        let mut acc = S::zero();
        for &p in &self.probs {
            acc += p;
        }
        acc
    }

    pub fn iter(&self) -> impl Iterator<Item = (RoundOutcome, RoundOutcome, S)> + '_ {
        RoundOutcome::all().flat_map(move |second| {
            RoundOutcome::all().map(move |first| (second, first, self.prob(second, first)))
        })
    }

    /// Marginal over the second round, which must reproduce the first-round
    /// distribution by the law of total probability.
    pub fn first_round_marginal(&self) -> RoundDistribution<S> {
        let mut marginal = RoundDistribution::zero();
        for (second, first, p) in self.iter() {
            let _ = second;
            marginal.probs[first.index()] += p;
        }
        marginal
    }
}

/// The factorized pair distribution: p(a₂s₂t₂ | branch(a₁)) · p(a₁s₁t₁).
/// Neither device sees s₁ or t₁, so the second round depends on the first
/// only through its branch.
pub fn pair_distribution<S: Scalar>(params: &KeyRoundParams<S>) -> PairDistribution<S> {
    let first = first_round_distribution(params);
    let cond_zero = second_round_conditional(params, FirstRoundBranch::Zero);
    let cond_one = second_round_conditional(params, FirstRoundBranch::OneOrDiscarded);
    let mut probs = [S::zero(); RoundOutcome::COUNT * RoundOutcome::COUNT];
    for first_outcome in RoundOutcome::all() {
        let base = first.prob(first_outcome);
        let conditional = match FirstRoundBranch::from_symbol(first_outcome.a) {
            FirstRoundBranch::Zero => &cond_zero,
            FirstRoundBranch::OneOrDiscarded => &cond_one,
        };
        for second_outcome in RoundOutcome::all() {
            probs[PairDistribution::<S>::index(second_outcome, first_outcome)] =
                conditional.prob(second_outcome) * base;
        }
    }
    PairDistribution { probs }
}

/// −r·log₂(r) with the 0·log 0 = 0 convention.
fn entropy_term<S: Scalar>(r: S) -> S {
    if r > S::zero() {
        -r * r.log2()
    } else {
        S::zero()
    }
}

/// Conditional Shannon entropy H(A₁A₂ | S₁S₂T₁T₂) in bits:
/// Σ over announcement tuples of p(s₁t₁s₂t₂) · H(A₁A₂ | s₁t₁s₂t₂).
/// Announcement tuples of probability zero contribute nothing.
pub fn conditional_entropy<S: Scalar>(dist: &PairDistribution<S>) -> Result<S, AnalysisError> {
    let sum = dist.sum();
    if (sum - S::one()).abs() > normalization_gate::<S>() {
        return Err(AnalysisError::NotNormalized { sum: sum.to_real() });
    }

    let mut entropy = S::zero();
    // 16 announcement tuples (s1, t1, s2, t2), 9 (a1, a2) cells each.
    for ann1 in 0..4 {
        for ann2 in 0..4 {
            let mut group_total = S::zero();
            let mut cells = [S::zero(); 9];
            let mut n = 0;
            for a1 in KeySymbol::ALL {
                for a2 in KeySymbol::ALL {
                    let first = RoundOutcome::from_index(a1.index() * 4 + ann1).unwrap();
                    let second = RoundOutcome::from_index(a2.index() * 4 + ann2).unwrap();
                    debug_assert_eq!(first.announcement_index(), ann1);
                    let p = dist.prob(second, first);
                    group_total += p;
                    cells[n] = p;
                    n += 1;
                }
            }
            if group_total > S::zero() {
                let mut group_entropy = S::zero();
                for &cell in &cells {
                    group_entropy += entropy_term(cell / group_total);
                }
                entropy += group_total * group_entropy;
            }
        }
    }
    Ok(entropy)
}

fn normalization_gate<S: Scalar>() -> S {
    S::validation_tolerance() * S::from_real(1e3)
}

/// The attacker's entropy per protocol round: H(A₁A₂ | S₁S₂T₁T₂) / 2 bits.
pub fn attack_rate<S: Scalar>(params: &KeyRoundParams<S>) -> S {
    let entropy = conditional_entropy(&pair_distribution(params))
        .expect("constructed pair distributions are normalized");
    entropy / (S::one() + S::one())
}

/// One sample of the entropy-per-round curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint<S: Scalar> {
    pub p: S,
    pub entropy_per_round: S,
}

/// Evaluates [`attack_rate`] over a grid of keep probabilities, preserving
/// the grid order. Every grid point must lie in [0, 1].
pub fn sweep<S: Scalar>(p0: S, p_grid: &[S]) -> Result<Vec<SweepPoint<S>>, AnalysisError> {
    p_grid
        .iter()
        .map(|&p| {
            let keep = KeepProbability::new(p)?;
            let params = KeyRoundParams::new(p0, keep)?;
            Ok(SweepPoint { p, entropy_per_round: attack_rate(&params) })
        })
        .collect()
}

/// A collective-attack entropy curve imported from external tooling.
/// The p column is strictly increasing and both columns lie in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IidCurve<S: Scalar> {
    points: Vec<(S, S)>,
}

impl<S: Scalar> IidCurve<S> {
    pub fn new(points: Vec<(S, S)>) -> Result<Self, AnalysisError> {
        for (index, &(p, ent)) in points.iter().enumerate() {
            if !(S::zero()..=S::one()).contains(&p) {
                return Err(AnalysisError::CurveValueOutOfRange { index, value: p.to_real() });
            }
            if !(S::zero()..=S::one()).contains(&ent) {
                return Err(AnalysisError::CurveValueOutOfRange { index, value: ent.to_real() });
            }
        }
        validate_strictly_increasing(points.iter().map(|&(p, _)| p))?;
        Ok(Self { points })
    }

    /// Reads a `p,ent` CSV file (the plot-data format) and validates it.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, AnalysisError> {
        let raw = curve::read_curve(path.as_ref())?;
        Self::new(
            raw.into_iter()
                .map(|(p, ent)| (S::from_real(p), S::from_real(ent)))
                .collect(),
        )
    }

    pub fn points(&self) -> &[(S, S)] {
        &self.points
    }
}

fn validate_strictly_increasing<S: Scalar>(
    values: impl Iterator<Item = S>,
) -> Result<(), AnalysisError> {
    let mut prev: Option<S> = None;
    for (index, value) in values.enumerate() {
        if let Some(prev) = prev {
            if value <= prev {
                return Err(AnalysisError::NonMonotoneGrid { index });
            }
        }
        prev = Some(value);
    }
    Ok(())
}

/// Piecewise-linear interpolation on a curve with strictly increasing knots;
/// `x` must lie within the knot range.
fn interpolate<S: Scalar>(points: &[(S, S)], x: S) -> S {
    let hi = points.partition_point(|&(p, _)| p < x);
    if hi == 0 {
        return points[0].1;
    }
    if hi == points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[hi - 1];
    let (x1, y1) = points[hi];
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

struct OverlapGrid<S: Scalar> {
    attack: Vec<(S, S)>,
    iid: Vec<(S, S)>,
    knots: Vec<S>,
}

/// Validates both curves and assembles the union of their knots over the
/// common p-range.
fn overlap_grid<S: Scalar>(
    attack: &[SweepPoint<S>],
    iid: &IidCurve<S>,
) -> Result<OverlapGrid<S>, AnalysisError> {
    if attack.len() < 2 {
        return Err(AnalysisError::TooFewPoints { points: attack.len() });
    }
    if iid.points().len() < 2 {
        return Err(AnalysisError::TooFewPoints { points: iid.points().len() });
    }
    validate_strictly_increasing(attack.iter().map(|pt| pt.p))?;

    let attack_pts: Vec<(S, S)> = attack.iter().map(|pt| (pt.p, pt.entropy_per_round)).collect();
    let iid_pts = iid.points().to_vec();

    let (a_min, a_max) = (attack_pts[0].0, attack_pts[attack_pts.len() - 1].0);
    let (b_min, b_max) = (iid_pts[0].0, iid_pts[iid_pts.len() - 1].0);
    let lo = a_min.max(b_min);
    let hi = a_max.min(b_max);
    if lo >= hi {
        return Err(AnalysisError::EmptyOverlap {
            a_min: a_min.to_real(),
            a_max: a_max.to_real(),
            b_min: b_min.to_real(),
            b_max: b_max.to_real(),
        });
    }

    let mut knots: Vec<S> = attack_pts
        .iter()
        .chain(iid_pts.iter())
        .map(|&(p, _)| p)
        .filter(|&p| p >= lo && p <= hi)
        .collect();
    knots.sort_by(|a, b| a.partial_cmp(b).expect("curve knots are finite"));
    knots.dedup();

    Ok(OverlapGrid { attack: attack_pts, iid: iid_pts, knots })
}

/// Maximal p-intervals on which the linearly interpolated gap
/// (iid − attack) is strictly positive, i.e. where the coherent attack
/// leaves the eavesdropper with less entropy than the collective bound.
/// Intervals are clipped to the common p-range of the two curves.
pub fn crossover_region<S: Scalar>(
    attack: &[SweepPoint<S>],
    iid: &IidCurve<S>,
) -> Result<Vec<(S, S)>, AnalysisError> {
    let grid = overlap_grid(attack, iid)?;
    let gap: Vec<S> = grid
        .knots
        .iter()
        .map(|&p| interpolate(&grid.iid, p) - interpolate(&grid.attack, p))
        .collect();

    let mut intervals: Vec<(S, S)> = Vec::new();
    let mut current: Option<(S, S)> = None;
    for w in 0..grid.knots.len().saturating_sub(1) {
        let (x0, x1) = (grid.knots[w], grid.knots[w + 1]);
        let (g0, g1) = (gap[w], gap[w + 1]);
        // Where is the linear segment strictly positive?
        let sub = if g0 > S::zero() && g1 > S::zero() {
            Some((x0, x1))
        } else if g0 > S::zero() {
            Some((x0, x0 + (x1 - x0) * g0 / (g0 - g1)))
        } else if g1 > S::zero() {
            Some((x0 + (x1 - x0) * g0 / (g0 - g1), x1))
        } else {
            None
        };
        match (current, sub) {
            (None, Some(interval)) => current = Some(interval),
            (Some((start, end)), Some((sub_start, sub_end))) => {
                // Extend only across a knot where the gap is still strictly
                // positive; a gap touching zero at the knot separates two
                // maximal intervals.
                if sub_start == end && g0 > S::zero() {
                    current = Some((start, sub_end));
                } else {
                    intervals.push((start, end));
                    current = Some((sub_start, sub_end));
                }
            }
            (Some(interval), None) => {
                intervals.push(interval);
                current = None;
            }
            (None, None) => {}
        }
    }
    if let Some(interval) = current {
        intervals.push(interval);
    }
    Ok(intervals)
}

/// The largest gap (iid − attack) over the common p-range and the p where it
/// occurs. The gap of piecewise-linear curves attains its maximum at a knot.
pub fn max_entropy_gap<S: Scalar>(
    attack: &[SweepPoint<S>],
    iid: &IidCurve<S>,
) -> Result<(S, S), AnalysisError> {
    let grid = overlap_grid(attack, iid)?;
    let mut best = (grid.knots[0], S::neg_infinity());
    for &p in &grid.knots {
        let gap = interpolate(&grid.iid, p) - interpolate(&grid.attack, p);
        if gap > best.1 {
            best = (p, gap);
        }
    }
    Ok(best)
}
