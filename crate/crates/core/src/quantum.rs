//! Exact Born-rule engine for the two-qubit honest statistics.
//!
//! The protocol devices share the maximally entangled pair
//! |Φ⁺⟩ = (|00⟩ + |11⟩)/√2 and measure the five CHSH-style observables
//! M₁ = Z, M₂ = X (Alice) and N₁ = (Z+X)/√2, N₂ = (Z−X)/√2, N₃ = Z (Bob).
//! Outcomes are relabelled eigenvalue +1 ↦ bit 0 and eigenvalue −1 ↦ bit 1,
//! so the ±1 eigenprojectors are simply (I ± O)/2.
//!
//! Everything here is a pure function over immutable values and can be called
//! from any number of threads.

use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

/// 2×2 complex matrix in row-major order.
pub type Matrix2<S> = [[Complex<S>; 2]; 2];

/// Errors raised while validating quantum-layer values.
#[derive(Debug, Error)]
pub enum QuantumError {
    /// State vector norm differs from 1 beyond the validation tolerance.
    #[error("state is not normalized: |amplitudes|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    /// Matrix is not equal to its conjugate transpose.
    #[error("observable is not Hermitian (max deviation {max_deviation:e})")]
    NotHermitian { max_deviation: f64 },
    /// Matrix squared is not the identity, so eigenvalues are not ±1.
    #[error("observable does not square to identity (max deviation {max_deviation:e})")]
    NotInvolutory { max_deviation: f64 },
    /// Probabilities of a single setting do not sum to 1.
    #[error("outcome probabilities sum to {sum}, expected 1")]
    NotAProbabilityDistribution { sum: f64 },
    /// Probability outside [0, 1].
    #[error("probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },
    /// A correlation-table cell required by the CHSH combination is absent.
    #[error("correlation table has no entry for setting (x={x}, y={y})")]
    MissingSetting { x: u8, y: u8 },
}

/// A classical bit, the outcome alphabet of every measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn index(self) -> usize {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Bit::Zero),
            1 => Some(Bit::One),
            _ => None,
        }
    }

    pub const ALL: [Bit; 2] = [Bit::Zero, Bit::One];
}

/// Alice's measurement setting, x ∈ {1, 2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AliceInput {
    X1,
    X2,
}

impl AliceInput {
    pub fn index(self) -> usize {
        match self {
            AliceInput::X1 => 0,
            AliceInput::X2 => 1,
        }
    }

    pub fn value(self) -> u8 {
        self.index() as u8 + 1
    }

    pub const ALL: [AliceInput; 2] = [AliceInput::X1, AliceInput::X2];
}

impl TryFrom<u8> for AliceInput {
    type Error = QuantumError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(AliceInput::X1),
            2 => Ok(AliceInput::X2),
            _ => Err(QuantumError::MissingSetting { x: value, y: 0 }),
        }
    }
}

/// Bob's measurement setting, y ∈ {1, 2, 3}; y = 3 marks a key round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BobInput {
    Y1,
    Y2,
    Y3,
}

impl BobInput {
    pub fn index(self) -> usize {
        match self {
            BobInput::Y1 => 0,
            BobInput::Y2 => 1,
            BobInput::Y3 => 2,
        }
    }

    pub fn value(self) -> u8 {
        self.index() as u8 + 1
    }

    pub const ALL: [BobInput; 3] = [BobInput::Y1, BobInput::Y2, BobInput::Y3];
}

impl TryFrom<u8> for BobInput {
    type Error = QuantumError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(BobInput::Y1),
            2 => Ok(BobInput::Y2),
            3 => Ok(BobInput::Y3),
            _ => Err(QuantumError::MissingSetting { x: 0, y: value }),
        }
    }
}

/// Which half of the shared pair a measurement acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// Pure two-qubit state in the basis order |00⟩, |01⟩, |10⟩, |11⟩
/// (first qubit Alice, second Bob). Always normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState<S: Scalar> {
    amplitudes: [Complex<S>; 4],
}

impl<S: Scalar> TwoQubitState<S> {
    /// Validates that the amplitudes have unit norm.
    pub fn new(amplitudes: [Complex<S>; 4]) -> Result<Self, QuantumError> {
        let norm_sq = norm_sq(&amplitudes);
        if (norm_sq - S::one()).abs() > S::validation_tolerance() {
            return Err(QuantumError::NotNormalized {
                norm_sq: norm_sq.to_real(),
            });
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex<S>; 4] {
        &self.amplitudes
    }

    pub fn norm_sq(&self) -> S {
        norm_sq(&self.amplitudes)
    }
}

/// Builds |Φ⁺⟩ = (|00⟩ + |11⟩)/√2.
pub fn bell_state<S: Scalar>() -> TwoQubitState<S> {
    let s = S::FRAC_1_SQRT_2();
    let zero = Complex::new(S::zero(), S::zero());
    TwoQubitState::new([Complex::new(s, S::zero()), zero, zero, Complex::new(s, S::zero())])
        .expect("Bell state is normalized")
}

/// 2×2 Hermitian observable with eigenvalues ±1. Outcome convention:
/// eigenvalue +1 ↦ bit 0, eigenvalue −1 ↦ bit 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryObservable<S: Scalar> {
    matrix: Matrix2<S>,
}

impl<S: Scalar> BinaryObservable<S> {
    /// Validates Hermiticity and that the matrix squares to the identity.
    pub fn new(matrix: Matrix2<S>) -> Result<Self, QuantumError> {
        let tol = S::validation_tolerance();

        let mut herm_dev = S::zero();
        for i in 0..2 {
            for j in 0..2 {
                let dev = (matrix[i][j] - matrix[j][i].conj()).norm_sqr().sqrt();
                herm_dev = herm_dev.max(dev);
            }
        }
        if herm_dev > tol {
            return Err(QuantumError::NotHermitian {
                max_deviation: herm_dev.to_real(),
            });
        }

        let mut invol_dev = S::zero();
        for i in 0..2 {
            for j in 0..2 {
                let mut entry = Complex::new(S::zero(), S::zero());
                for k in 0..2 {
                    entry += matrix[i][k] * matrix[k][j];
                }
                let expected = if i == j { S::one() } else { S::zero() };
                let dev = (entry - Complex::new(expected, S::zero())).norm_sqr().sqrt();
                invol_dev = invol_dev.max(dev);
            }
        }
        if invol_dev > tol {
            return Err(QuantumError::NotInvolutory {
                max_deviation: invol_dev.to_real(),
            });
        }

        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix2<S> {
        &self.matrix
    }

    /// Eigenprojector for the given outcome: (I + O)/2 for bit 0,
    /// (I − O)/2 for bit 1.
    pub fn projector(&self, outcome: Bit) -> Matrix2<S> {
        let half = S::half();
        let sign = match outcome {
            Bit::Zero => S::one(),
            Bit::One => -S::one(),
        };
        let mut p = [[Complex::new(S::zero(), S::zero()); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { S::one() } else { S::zero() };
                p[i][j] = (Complex::new(id, S::zero())
                    + Complex::new(sign, S::zero()) * self.matrix[i][j])
                    * Complex::new(half, S::zero());
            }
        }
        p
    }
}

fn real_matrix<S: Scalar>(rows: [[S; 2]; 2]) -> Matrix2<S> {
    let mut m = [[Complex::new(S::zero(), S::zero()); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = Complex::new(rows[i][j], S::zero());
        }
    }
    m
}

/// Pauli Z = diag(1, −1).
pub fn pauli_z<S: Scalar>() -> BinaryObservable<S> {
    BinaryObservable::new(real_matrix([[S::one(), S::zero()], [S::zero(), -S::one()]]))
        .expect("Pauli Z is a valid observable")
}

/// Pauli X = off-diagonal ones.
pub fn pauli_x<S: Scalar>() -> BinaryObservable<S> {
    BinaryObservable::new(real_matrix([[S::zero(), S::one()], [S::one(), S::zero()]]))
        .expect("Pauli X is a valid observable")
}

/// Alice's observable for input x: M₁ = Z, M₂ = X.
pub fn alice_observable<S: Scalar>(x: AliceInput) -> BinaryObservable<S> {
    match x {
        AliceInput::X1 => pauli_z(),
        AliceInput::X2 => pauli_x(),
    }
}

/// Bob's observable for input y: N₁ = (Z+X)/√2, N₂ = (Z−X)/√2, N₃ = Z.
pub fn bob_observable<S: Scalar>(y: BobInput) -> BinaryObservable<S> {
    let s = S::FRAC_1_SQRT_2();
    match y {
        BobInput::Y1 => BinaryObservable::new(real_matrix([[s, s], [s, -s]]))
            .expect("(Z+X)/sqrt(2) is a valid observable"),
        BobInput::Y2 => BinaryObservable::new(real_matrix([[s, -s], [-s, -s]]))
            .expect("(Z-X)/sqrt(2) is a valid observable"),
        BobInput::Y3 => pauli_z(),
    }
}

fn norm_sq<S: Scalar>(amplitudes: &[Complex<S>; 4]) -> S {
    let mut acc = S::zero();
    for a in amplitudes {
        acc += a.norm_sqr();
    }
    acc
}

/// Applies a one-qubit matrix to Alice's half of the state vector.
fn apply_alice<S: Scalar>(m: &Matrix2<S>, amp: &[Complex<S>; 4]) -> [Complex<S>; 4] {
    let mut out = [Complex::new(S::zero(), S::zero()); 4];
    for i in 0..2 {
        for k in 0..2 {
            out[2 * i + k] = m[i][0] * amp[k] + m[i][1] * amp[2 + k];
        }
    }
    out
}

/// Applies a one-qubit matrix to Bob's half of the state vector.
fn apply_bob<S: Scalar>(m: &Matrix2<S>, amp: &[Complex<S>; 4]) -> [Complex<S>; 4] {
    let mut out = [Complex::new(S::zero(), S::zero()); 4];
    for i in 0..2 {
        for k in 0..2 {
            out[2 * i + k] = m[k][0] * amp[2 * i] + m[k][1] * amp[2 * i + 1];
        }
    }
    out
}

/// Joint outcome probabilities p(a, b) for one pair of observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution<S: Scalar> {
    probs: [[S; 2]; 2],
}

impl<S: Scalar> OutcomeDistribution<S> {
    /// Validates entries in [0, 1] and total probability 1.
    pub fn new(probs: [[S; 2]; 2]) -> Result<Self, QuantumError> {
        let tol = S::validation_tolerance();
        let mut sum = S::zero();
        for row in &probs {
            for &p in row {
                if p < -tol || p > S::one() + tol {
                    return Err(QuantumError::ProbabilityOutOfRange { value: p.to_real() });
                }
                sum += p;
            }
        }
        if (sum - S::one()).abs() > tol {
            return Err(QuantumError::NotAProbabilityDistribution { sum: sum.to_real() });
        }
        Ok(Self { probs })
    }

    pub fn prob(&self, a: Bit, b: Bit) -> S {
        self.probs[a.index()][b.index()]
    }

    pub fn sum(&self) -> S {
        let mut acc = S::zero();
        for row in &self.probs {
            for &p in row {
                acc += p;
            }
        }
        acc
    }

    /// p(a = b).
    pub fn prob_equal(&self) -> S {
        self.prob(Bit::Zero, Bit::Zero) + self.prob(Bit::One, Bit::One)
    }

    /// E = p(a=b) − p(a≠b).
    pub fn correlator(&self) -> S {
        self.prob_equal() - self.prob(Bit::Zero, Bit::One) - self.prob(Bit::One, Bit::Zero)
    }

    /// Σ_b p(a, b).
    pub fn alice_marginal(&self, a: Bit) -> S {
        self.prob(a, Bit::Zero) + self.prob(a, Bit::One)
    }

    /// Σ_a p(a, b).
    pub fn bob_marginal(&self, b: Bit) -> S {
        self.prob(Bit::Zero, b) + self.prob(Bit::One, b)
    }
}

/// Born-rule joint distribution of one round: p(a, b) = ‖(P_a ⊗ P_b)|ψ⟩‖².
pub fn outcome_distribution<S: Scalar>(
    state: &TwoQubitState<S>,
    obs_alice: &BinaryObservable<S>,
    obs_bob: &BinaryObservable<S>,
) -> OutcomeDistribution<S> {
    let mut probs = [[S::zero(); 2]; 2];
    for a in Bit::ALL {
        let pa = obs_alice.projector(a);
        let after_alice = apply_alice(&pa, state.amplitudes());
        for b in Bit::ALL {
            let pb = obs_bob.projector(b);
            let projected = apply_bob(&pb, &after_alice);
            probs[a.index()][b.index()] = norm_sq(&projected);
        }
    }
    OutcomeDistribution { probs }
}

/// Samples one projective measurement on the given half of the pair and
/// returns the outcome together with the collapsed, renormalized state.
///
/// The branch is chosen by comparing `u · (n₀ + n₁) < n₀` for a uniform draw
/// `u ∈ [0, 1)`, so a branch whose projected norm is exactly zero can never
/// be selected.
pub fn measure<S: Scalar, R: Rng + ?Sized>(
    state: &TwoQubitState<S>,
    observable: &BinaryObservable<S>,
    party: Party,
    rng: &mut R,
) -> (Bit, TwoQubitState<S>) {
    let apply = |outcome: Bit| -> [Complex<S>; 4] {
        let p = observable.projector(outcome);
        match party {
            Party::Alice => apply_alice(&p, state.amplitudes()),
            Party::Bob => apply_bob(&p, state.amplitudes()),
        }
    };
    let v0 = apply(Bit::Zero);
    let v1 = apply(Bit::One);
    let n0 = norm_sq(&v0);
    let n1 = norm_sq(&v1);
    let u = S::from_real(rng.gen::<f64>());

    let (outcome, projected, norm) = if u * (n0 + n1) < n0 {
        (Bit::Zero, v0, n0)
    } else {
        (Bit::One, v1, n1)
    };

    let scale = norm.sqrt().recip();
    let mut amplitudes = projected;
    for a in &mut amplitudes {
        *a *= Complex::new(scale, S::zero());
    }
    (outcome, TwoQubitState { amplitudes })
}

/// Conditional probability table p(ab|xy) over the full input alphabet.
/// Settings are optional so partially observed (empirical) tables fit too.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationTable<S: Scalar> {
    cells: [[Option<OutcomeDistribution<S>>; 3]; 2],
}

impl<S: Scalar> CorrelationTable<S> {
    pub fn new() -> Self {
        Self { cells: [[None; 3]; 2] }
    }

    pub fn insert(&mut self, x: AliceInput, y: BobInput, dist: OutcomeDistribution<S>) {
        self.cells[x.index()][y.index()] = Some(dist);
    }

    pub fn setting(&self, x: AliceInput, y: BobInput) -> Option<&OutcomeDistribution<S>> {
        self.cells[x.index()][y.index()].as_ref()
    }

    pub fn prob(&self, a: Bit, b: Bit, x: AliceInput, y: BobInput) -> Option<S> {
        self.setting(x, y).map(|d| d.prob(a, b))
    }

    /// Largest deviation from the no-signalling conditions: Alice's marginal
    /// must not depend on y and Bob's must not depend on x.
    pub fn no_signalling_deviation(&self) -> S {
        let mut dev = S::zero();
        for x in AliceInput::ALL {
            for a in Bit::ALL {
                let marginals: Vec<S> = BobInput::ALL
                    .iter()
                    .filter_map(|&y| self.setting(x, y).map(|d| d.alice_marginal(a)))
                    .collect();
                for w in marginals.windows(2) {
                    dev = dev.max((w[0] - w[1]).abs());
                }
            }
        }
        for y in BobInput::ALL {
            for b in Bit::ALL {
                let marginals: Vec<S> = AliceInput::ALL
                    .iter()
                    .filter_map(|&x| self.setting(x, y).map(|d| d.bob_marginal(b)))
                    .collect();
                for w in marginals.windows(2) {
                    dev = dev.max((w[0] - w[1]).abs());
                }
            }
        }
        dev
    }
}

/// The honest table: Born statistics of the standard observables on |Φ⁺⟩
/// for every setting pair.
pub fn honest_correlation_table<S: Scalar>() -> CorrelationTable<S> {
    let state = bell_state();
    let mut table = CorrelationTable::new();
    for x in AliceInput::ALL {
        let ma = alice_observable(x);
        for y in BobInput::ALL {
            let nb = bob_observable(y);
            table.insert(x, y, outcome_distribution(&state, &ma, &nb));
        }
    }
    table
}

/// CHSH combination S = E₁₁ + E₁₂ + E₂₁ − E₂₂ with
/// E_xy = p(a=b|xy) − p(a≠b|xy). Requires all four test settings.
pub fn chsh_value<S: Scalar>(table: &CorrelationTable<S>) -> Result<S, QuantumError> {
    let mut correlators = [[S::zero(); 2]; 2];
    for x in AliceInput::ALL {
        for y in [BobInput::Y1, BobInput::Y2] {
            let dist = table.setting(x, y).ok_or(QuantumError::MissingSetting {
                x: x.value(),
                y: y.value(),
            })?;
            correlators[x.index()][y.index()] = dist.correlator();
        }
    }
    Ok(correlators[0][0] + correlators[0][1] + correlators[1][0] - correlators[1][1])
}
