//! Round-level state machines: Alice's honest device, Bob's malicious
//! counter-and-replay device, and the postselection step.
//!
//! Bob's device counts key-round inputs (y = 3). On an even count it measures
//! N₃ = Z honestly and memorizes the outcome; on an odd count it replays the
//! memorized outcome instead of measuring. Test inputs (y ∈ {1, 2}) never
//! touch the counter. Postselection applies to key rounds (x = 1, y = 3)
//! only: an outcome 0 is always kept, an outcome 1 is kept with probability
//! p, and a round survives only if both parties keep.
//!
//! Randomness contract: every random decision consumes exactly one uniform
//! `f64` from the caller's stream, in this order within a round:
//! Alice's outcome, Bob's outcome (honest measurements only; replay rounds
//! consume nothing for Bob), then Alice's keep coin and Bob's keep coin
//! (key rounds only; the coins are drawn even when the corresponding outcome
//! is 0 and the flag is forced to keep).

use rand::Rng;
use thiserror::Error;

use crate::quantum::{
    alice_observable, bell_state, bob_observable, measure, AliceInput, Bit, BobInput, Party,
    TwoQubitState,
};
use crate::scalar::Scalar;

/// Errors raised while validating device-layer values.
#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("keep probability {value} outside [0, 1]")]
    KeepProbabilityOutOfRange { value: f64 },
    #[error("device state is inconsistent: counter {counter} with memory present = {has_memory}")]
    InconsistentDeviceState { counter: u64, has_memory: bool },
}

/// Probability that a key-round outcome 1 is kept. Outcome 0 is always kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeepProbability<S: Scalar>(S);

impl<S: Scalar> KeepProbability<S> {
    pub fn new(p: S) -> Result<Self, DeviceError> {
        if !(S::zero()..=S::one()).contains(&p) {
            return Err(DeviceError::KeepProbabilityOutOfRange { value: p.to_real() });
        }
        Ok(Self(p))
    }

    pub fn value(self) -> S {
        self.0
    }
}

/// A party's public keep/discard flag: ⊥ discards, ⊤ keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeepDecision {
    Discard,
    Keep,
}

impl KeepDecision {
    pub fn index(self) -> usize {
        match self {
            KeepDecision::Discard => 0,
            KeepDecision::Keep => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(KeepDecision::Discard),
            1 => Some(KeepDecision::Keep),
            _ => None,
        }
    }

    pub fn is_keep(self) -> bool {
        self == KeepDecision::Keep
    }

    pub const ALL: [KeepDecision; 2] = [KeepDecision::Discard, KeepDecision::Keep];
}

/// A published key symbol: the raw bit for kept rounds, ⊥ for discarded ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeySymbol {
    Zero,
    One,
    Discarded,
}

impl KeySymbol {
    pub fn index(self) -> usize {
        match self {
            KeySymbol::Zero => 0,
            KeySymbol::One => 1,
            KeySymbol::Discarded => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(KeySymbol::Zero),
            1 => Some(KeySymbol::One),
            2 => Some(KeySymbol::Discarded),
            _ => None,
        }
    }

    pub const ALL: [KeySymbol; 3] = [KeySymbol::Zero, KeySymbol::One, KeySymbol::Discarded];
}

impl From<Bit> for KeySymbol {
    fn from(bit: Bit) -> Self {
        match bit {
            Bit::Zero => KeySymbol::Zero,
            Bit::One => KeySymbol::One,
        }
    }
}

/// The public flags (s, t) announced for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AnnouncementPair {
    pub s: KeepDecision,
    pub t: KeepDecision,
}

impl AnnouncementPair {
    pub fn round_kept(self) -> bool {
        self.s.is_keep() && self.t.is_keep()
    }
}

/// Bob's malicious device state: the key-round counter C and the replay
/// memory. The memory is present if and only if C ≥ 1, and only honest
/// (even-C) key rounds overwrite it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BobDeviceState {
    counter: u64,
    memory: Option<Bit>,
}

impl BobDeviceState {
    /// Fresh device: C = 0, nothing memorized.
    pub fn new() -> Self {
        Self { counter: 0, memory: None }
    }

    /// Reconstructs a mid-protocol state, validating the memory invariant.
    pub fn with_history(counter: u64, memory: Option<Bit>) -> Result<Self, DeviceError> {
        if memory.is_some() != (counter >= 1) {
            return Err(DeviceError::InconsistentDeviceState {
                counter,
                has_memory: memory.is_some(),
            });
        }
        Ok(Self { counter, memory })
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn memory(&self) -> Option<Bit> {
        self.memory
    }

    /// True when the next key round will be answered honestly (C even).
    pub fn next_key_round_is_honest(&self) -> bool {
        self.counter % 2 == 0
    }
}

impl Default for BobDeviceState {
    fn default() -> Self {
        Self::new()
    }
}

/// Everything observed in one protocol round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub x: AliceInput,
    pub y: BobInput,
    pub a_raw: Bit,
    pub b_raw: Bit,
    pub s: KeepDecision,
    pub t: KeepDecision,
    pub a_final: KeySymbol,
}

impl RoundRecord {
    pub fn announcements(&self) -> AnnouncementPair {
        AnnouncementPair { s: self.s, t: self.t }
    }
}

/// Alice measures M_x on her half of a fresh pair. Returns her outcome and
/// the collapsed joint state, which carries the conditional statistics for
/// Bob's subsequent measurement.
pub fn alice_measure<S: Scalar, R: Rng + ?Sized>(
    state: &TwoQubitState<S>,
    x: AliceInput,
    rng: &mut R,
) -> (Bit, TwoQubitState<S>) {
    measure(state, &alice_observable(x), Party::Alice, rng)
}

/// One step of Bob's device. `state` must be the post-measurement state
/// returned by [`alice_measure`], so honest measurements here sample the
/// Born distribution conditioned on Alice's outcome.
///
/// Panics if a replay round is requested while no outcome is memorized;
/// [`BobDeviceState`] makes that unrepresentable through its constructors.
pub fn bob_device_step<S: Scalar, R: Rng + ?Sized>(
    dev: BobDeviceState,
    state: &TwoQubitState<S>,
    y: BobInput,
    rng: &mut R,
) -> (Bit, BobDeviceState) {
    match y {
        BobInput::Y1 | BobInput::Y2 => {
            let (b, _) = measure(state, &bob_observable(y), Party::Bob, rng);
            (b, dev)
        }
        BobInput::Y3 => {
            if dev.next_key_round_is_honest() {
                let (b, _) = measure(state, &bob_observable(BobInput::Y3), Party::Bob, rng);
                (
                    b,
                    BobDeviceState { counter: dev.counter + 1, memory: Some(b) },
                )
            } else {
                let b = dev
                    .memory
                    .expect("replay key round reached without a memorized outcome");
                (b, BobDeviceState { counter: dev.counter + 1, memory: dev.memory })
            }
        }
    }
}

/// Bob's key-round step with a classical bit source instead of a
/// measurement: honest rounds output `alice_raw` (the perfect-correlation
/// premise of the honest strategy), replay rounds output the memory.
/// Used by the simulator's biased-p₀ path.
pub fn bob_key_step_classical(
    dev: BobDeviceState,
    alice_raw: Bit,
) -> (Bit, BobDeviceState) {
    if dev.next_key_round_is_honest() {
        (
            alice_raw,
            BobDeviceState { counter: dev.counter + 1, memory: Some(alice_raw) },
        )
    } else {
        let b = dev
            .memory
            .expect("replay key round reached without a memorized outcome");
        (b, BobDeviceState { counter: dev.counter + 1, memory: dev.memory })
    }
}

/// Key-round postselection. Outcome 0 is never discarded; outcome 1 is kept
/// with probability p. Both coins are drawn from independent uniforms, and
/// the published symbol is ⊥ unless both parties keep.
pub fn postselect<S: Scalar, R: Rng + ?Sized>(
    a_raw: Bit,
    b_raw: Bit,
    p: KeepProbability<S>,
    rng: &mut R,
) -> (AnnouncementPair, KeySymbol) {
    let keep = p.value().to_real();
    let coin_a = rng.gen::<f64>() < keep;
    let coin_b = rng.gen::<f64>() < keep;
    let s = if a_raw == Bit::Zero || coin_a {
        KeepDecision::Keep
    } else {
        KeepDecision::Discard
    };
    let t = if b_raw == Bit::Zero || coin_b {
        KeepDecision::Keep
    } else {
        KeepDecision::Discard
    };
    let announcements = AnnouncementPair { s, t };
    let a_final = if announcements.round_kept() {
        KeySymbol::from(a_raw)
    } else {
        KeySymbol::Discarded
    };
    (announcements, a_final)
}

/// One full protocol round: a fresh Bell pair is consumed, both devices
/// step, and postselection is applied when (and only when) x = 1 and y = 3.
pub fn joint_round<S: Scalar, R: Rng + ?Sized>(
    dev: BobDeviceState,
    x: AliceInput,
    y: BobInput,
    p: KeepProbability<S>,
    rng: &mut R,
) -> (RoundRecord, BobDeviceState) {
    let state = bell_state::<S>();
    let (a_raw, collapsed) = alice_measure(&state, x, rng);
    let (b_raw, dev) = bob_device_step(dev, &collapsed, y, rng);
    let (s, t, a_final) = if x == AliceInput::X1 && y == BobInput::Y3 {
        let (ann, a_final) = postselect(a_raw, b_raw, p, rng);
        (ann.s, ann.t, a_final)
    } else {
        (KeepDecision::Keep, KeepDecision::Keep, KeySymbol::from(a_raw))
    };
    (
        RoundRecord { x, y, a_raw, b_raw, s, t, a_final },
        dev,
    )
}

/// Key round (x = 1, y = 3) with Alice's marginal forced to a biased coin
/// p(a = 0) = `p0` and Bob's honest output set equal to Alice's raw bit.
/// Draw order: Alice's outcome coin, then the two keep coins (replay rounds
/// consume nothing for Bob, matching the quantum path).
pub fn joint_key_round_with_bias<S: Scalar, R: Rng + ?Sized>(
    dev: BobDeviceState,
    p0: S,
    p: KeepProbability<S>,
    rng: &mut R,
) -> (RoundRecord, BobDeviceState) {
    debug_assert!((S::zero()..=S::one()).contains(&p0));
    let a_raw = if rng.gen::<f64>() < p0.to_real() {
        Bit::Zero
    } else {
        Bit::One
    };
    let honest = dev.next_key_round_is_honest();
    let (b_raw, dev) = bob_key_step_classical(dev, a_raw);
    if honest {
        // Honest rounds consume Bob's outcome draw, like the quantum path.
        let _ = rng.gen::<f64>();
    }
    let (ann, a_final) = postselect(a_raw, b_raw, p, rng);
    (
        RoundRecord {
            x: AliceInput::X1,
            y: BobInput::Y3,
            a_raw,
            b_raw,
            s: ann.s,
            t: ann.t,
            a_final,
        },
        dev,
    )
}
