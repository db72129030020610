//! Primary-user occupancy of a licensed channel.
//!
//! Each channel alternates between idle (OFF) and busy (ON) periods with
//! geometric sojourns: an idle channel turns busy with probability `1/alpha`
//! per slot and a busy one turns idle with probability `1/beta`, so the mean
//! idle and busy durations are `alpha` and `beta` slots and the stationary
//! idle probability is `alpha / (alpha + beta)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quorum::ChannelId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("mean idle/busy durations must be positive and finite (alpha={alpha}, beta={beta})")]
    NonPositive { alpha: f64, beta: f64 },
    #[error("mean sojourn durations must be at least one slot (alpha={alpha}, beta={beta})")]
    SubSlotSojourn { alpha: f64, beta: f64 },
    #[error("idle probability {0} must lie strictly between 0 and 1")]
    IdleProbability(f64),
    #[error("sojourn scale {0} must be positive and finite")]
    Scale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelState {
    Idle,
    Busy,
}

/// How the per-slot occupancy evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChannelProcess {
    /// Two-state Markov chain with geometric sojourns.
    #[default]
    Markov,
    /// Independent Bernoulli draw each slot with the stationary idle
    /// probability.
    Iid,
}

// Absorbs rounding in `p * scale` when a mean lands on exactly one slot.
const SOJOURN_EPS: f64 = 1e-9;

/// Stationary idle probability `alpha / (alpha + beta)`.
pub fn stationary_idle(alpha: f64, beta: f64) -> Result<f64, ChannelError> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(ChannelError::NonPositive { alpha, beta });
    }
    Ok(alpha / (alpha + beta))
}

/// One licensed channel and its primary-user state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuChannel {
    id: ChannelId,
    alpha: f64,
    beta: f64,
    state: ChannelState,
}

impl PuChannel {
    /// Creates a channel in the given state. Sojourn means below one slot
    /// have no geometric realisation and are rejected.
    pub fn new(
        id: ChannelId,
        alpha: f64,
        beta: f64,
        state: ChannelState,
    ) -> Result<Self, ChannelError> {
        stationary_idle(alpha, beta)?;
        if alpha < 1.0 - SOJOURN_EPS || beta < 1.0 - SOJOURN_EPS {
            return Err(ChannelError::SubSlotSojourn { alpha, beta });
        }
        Ok(Self {
            id,
            alpha,
            beta,
            state,
        })
    }

    /// Creates a channel with its initial state drawn from the stationary
    /// distribution.
    pub fn stationary<R: Rng + ?Sized>(
        id: ChannelId,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> Result<Self, ChannelError> {
        let mut ch = Self::new(id, alpha, beta, ChannelState::Idle)?;
        if !rng.random_bool(ch.idle_probability()) {
            ch.state = ChannelState::Busy;
        }
        Ok(ch)
    }

    /// Channel whose stationary idle probability equals `p_idle`, with mean
    /// idle `p_idle * scale` and mean busy `(1 - p_idle) * scale`.
    pub fn from_target_pi<R: Rng + ?Sized>(
        id: ChannelId,
        p_idle: f64,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self, ChannelError> {
        let (alpha, beta) = sojourns_for(p_idle, scale)?;
        Self::stationary(id, alpha, beta, rng)
    }

    pub fn id(&self) -> ChannelId {
        self.id
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn state(&self) -> ChannelState {
        self.state
    }

    pub fn idle_probability(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn is_idle(&self) -> bool {
        self.state == ChannelState::Idle
    }

    /// Advances the chain by one slot and returns the new state.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ChannelState {
        let leave = match self.state {
            ChannelState::Idle => 1.0 / self.alpha,
            ChannelState::Busy => 1.0 / self.beta,
        };
        // One draw per slot regardless of state keeps streams aligned
        // across parameter settings.
        let u: f64 = rng.random();
        if u < leave {
            self.state = match self.state {
                ChannelState::Idle => ChannelState::Busy,
                ChannelState::Busy => ChannelState::Idle,
            };
        }
        self.state
    }

    /// Replaces the state with an independent stationary draw.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ChannelState {
        let u: f64 = rng.random();
        self.state = if u < self.idle_probability() {
            ChannelState::Idle
        } else {
            ChannelState::Busy
        };
        self.state
    }

    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        process: ChannelProcess,
        rng: &mut R,
    ) -> ChannelState {
        match process {
            ChannelProcess::Markov => self.step(rng),
            ChannelProcess::Iid => self.resample(rng),
        }
    }
}

/// `(alpha, beta)` realising idle probability `p_idle` at the given scale.
pub fn sojourns_for(p_idle: f64, scale: f64) -> Result<(f64, f64), ChannelError> {
    if !(p_idle > 0.0 && p_idle < 1.0) {
        return Err(ChannelError::IdleProbability(p_idle));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ChannelError::Scale(scale));
    }
    let alpha = p_idle * scale;
    Ok((alpha, scale - alpha))
}
