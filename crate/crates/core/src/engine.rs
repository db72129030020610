//! Slotted rendezvous simulation.
//!
//! Every slot runs four phases in order: transmitters without work start new
//! attempts, pending pairs are resolved on the slot's channel, the primary
//! users' channels advance one step, and at a cycle boundary every user draws
//! a fresh quorum selection (after the adaptive controller has classified the
//! offered load, when the scheme is adaptive).
//!
//! All users share one slot-to-channel map, so every awake user sits on the
//! same channel in a given slot. Two users meet when both are awake; the
//! meeting succeeds when the channel is free of primary users and no other
//! met pair contends for it.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelError, ChannelProcess, ChannelState, PuChannel};
use crate::metrics::{CellKey, MetricsAccumulator, MetricsError, MetricsReport};
use crate::quorum::{
    self, build_grid, scheme_to_rc, AdaptiveThresholds, ChannelId, GridQuorum, QuorumError,
    QuorumSelection, SelectionScheme, TrafficRegion,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Quorum(#[from] QuorumError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// What happens when several met pairs find the same idle channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ContentionPolicy {
    /// Every contender fails and keeps its attempt.
    AllFail,
    /// One contender, chosen uniformly, succeeds.
    #[default]
    RandomWinner,
}

/// How a transmitter picks its receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PairingPolicy {
    /// Receiver fixed when the attempt starts, held until success.
    #[default]
    Persistent,
    /// Receiver redrawn every slot; the attempt's start slot is kept.
    PerSlot,
}

/// Primary-user activity parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Occupancy {
    /// Every channel realises idle probability `p_i` with mean idle
    /// `p_i * sojourn_scale` and mean busy `(1 - p_i) * sojourn_scale` slots.
    TargetPi { p_i: f64, sojourn_scale: f64 },
    /// Shared mean idle/busy durations.
    Explicit { alpha: f64, beta: f64 },
    /// One `(alpha, beta)` pair per channel.
    PerChannel(Vec<(f64, f64)>),
}

impl Occupancy {
    /// `(alpha, beta)` for every channel.
    pub fn sojourns(&self, num_channels: usize) -> Result<Vec<(f64, f64)>, SimError> {
        match self {
            Occupancy::TargetPi { p_i, sojourn_scale } => {
                Ok(vec![
                    channel::sojourns_for(*p_i, *sojourn_scale)?;
                    num_channels
                ])
            }
            Occupancy::Explicit { alpha, beta } => Ok(vec![(*alpha, *beta); num_channels]),
            Occupancy::PerChannel(v) if v.len() == num_channels => Ok(v.clone()),
            Occupancy::PerChannel(v) => Err(SimError::Config(format!(
                "{} per-channel sojourn pairs given for {num_channels} channels",
                v.len()
            ))),
        }
    }

    /// Nominal stationary idle probability (mean over channels).
    pub fn p_i(&self) -> f64 {
        match self {
            Occupancy::TargetPi { p_i, .. } => *p_i,
            Occupancy::Explicit { alpha, beta } => alpha / (alpha + beta),
            Occupancy::PerChannel(v) => {
                v.iter().map(|(a, b)| a / (a + b)).sum::<f64>() / v.len().max(1) as f64
            }
        }
    }
}

/// A stretch of slots with its own attempt rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPhase {
    pub slots: u64,
    pub attempt_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_channels: usize,
    pub num_users: usize,
    /// Users `0..k` originate attempts; everyone can receive. `None` means
    /// every user transmits.
    pub transmitters: Option<usize>,
    pub scheme: SelectionScheme,
    pub occupancy: Occupancy,
    pub channel_process: ChannelProcess,
    /// Pins every channel to one state for the whole run.
    pub forced_channels: Option<ChannelState>,
    pub total_slots: u64,
    pub seed: u64,
    pub contention: ContentionPolicy,
    pub pairing: PairingPolicy,
    /// Per-slot probability that an idle transmitter starts an attempt.
    pub attempt_rate: f64,
    /// Optional schedule overriding `attempt_rate`; after the last phase the
    /// base rate applies again.
    pub load_phases: Vec<LoadPhase>,
    /// Slots of pending-attempt history the load classifier averages over.
    pub load_window: usize,
    /// Per-user `(rows, cols)` held for the whole run instead of random
    /// selections.
    pub fixed_selections: Option<Vec<(Vec<usize>, Vec<usize>)>>,
    pub reselect_each_cycle: bool,
}

pub const DEFAULT_SOJOURN_SCALE: f64 = 10.0;
pub const DEFAULT_LOAD_WINDOW: usize = 256;

impl SimConfig {
    /// Saturated-traffic defaults for one sweep cell.
    pub fn new(num_channels: usize, num_users: usize, scheme: SelectionScheme, p_i: f64) -> Self {
        Self {
            num_channels,
            num_users,
            transmitters: None,
            scheme,
            occupancy: Occupancy::TargetPi {
                p_i,
                sojourn_scale: DEFAULT_SOJOURN_SCALE,
            },
            channel_process: ChannelProcess::Markov,
            forced_channels: None,
            total_slots: 100_000,
            seed: 0,
            contention: ContentionPolicy::default(),
            pairing: PairingPolicy::default(),
            attempt_rate: 1.0,
            load_phases: Vec::new(),
            load_window: DEFAULT_LOAD_WINDOW,
            fixed_selections: None,
            reselect_each_cycle: true,
        }
    }

    pub fn transmitter_count(&self) -> usize {
        self.transmitters.unwrap_or(self.num_users)
    }

    pub fn validate(&self) -> Result<GridQuorum, SimError> {
        let grid = build_grid(self.num_channels)?;
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.num_users < 2 {
            return bad(format!("need at least 2 users, got {}", self.num_users));
        }
        if self.total_slots < grid.cycle_len() as u64 {
            return bad(format!(
                "total_slots {} shorter than one {}-slot cycle",
                self.total_slots,
                grid.cycle_len()
            ));
        }
        if !matches!(self.transmitters, None | Some(1..))
            || self.transmitter_count() > self.num_users
        {
            return bad(format!(
                "transmitters must be in 1..={}, got {:?}",
                self.num_users, self.transmitters
            ));
        }
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !rate_ok(self.attempt_rate) {
            return bad(format!("attempt_rate {} outside [0, 1]", self.attempt_rate));
        }
        if let Some(p) = self.load_phases.iter().find(|p| !rate_ok(p.attempt_rate)) {
            return bad(format!(
                "load phase attempt_rate {} outside [0, 1]",
                p.attempt_rate
            ));
        }
        if self.load_window == 0 {
            return bad("load_window must be at least 1 slot".into());
        }
        if let SelectionScheme::Adaptive(th) = self.scheme {
            AdaptiveThresholds::new(th.low, th.high)?;
        }
        for (i, (alpha, beta)) in self
            .occupancy
            .sojourns(self.num_channels)?
            .into_iter()
            .enumerate()
        {
            PuChannel::new(i + 1, alpha, beta, ChannelState::Idle)?;
        }
        if let Some(fixed) = &self.fixed_selections {
            if fixed.len() != self.num_users {
                return bad(format!(
                    "{} fixed selections for {} users",
                    fixed.len(),
                    self.num_users
                ));
            }
            for (rows, cols) in fixed {
                QuorumSelection::from_parts(&grid, rows.iter().copied(), cols.iter().copied())?;
            }
        }
        Ok(grid)
    }

    pub fn cell_key(&self, grid: &GridQuorum) -> CellKey {
        CellKey {
            scheme: self.scheme.label().to_string(),
            n: grid.n(),
            num_channels: self.num_channels,
            users: self.num_users,
            p_i: self.occupancy.p_i(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub receiver: usize,
    pub start_slot: u64,
}

/// A secondary user's control-transceiver state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrUser {
    pub id: usize,
    pub selection: QuorumSelection,
    pub pending: Option<Attempt>,
    pub awake_slots: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairEventKind {
    NotMet,
    Blocked,
    ContentionLoss,
    Rendezvous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEvent {
    pub transmitter: usize,
    pub receiver: usize,
    pub kind: PairEventKind,
}

/// Counts for one resolved slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: u64,
    pub channel: Option<ChannelId>,
    pub channel_idle: bool,
    pub awake_users: usize,
    pub successful_rdv_count: usize,
    pub blocking_count: usize,
    pub contention_losses: usize,
    pub not_met: usize,
}

/// One cycle-boundary decision of the adaptive controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerDecision {
    pub slot: u64,
    /// Smoothed offered load; `None` on cold start.
    pub load: Option<f64>,
    pub region: TrafficRegion,
    pub rows: usize,
    pub cols: usize,
}

/// Thresholds a smoothed load. A load equal to a threshold belongs to the
/// region above it.
pub fn classify_load(load: f64, th: &AdaptiveThresholds) -> TrafficRegion {
    if load < th.low {
        TrafficRegion::Low
    } else if load >= th.high {
        TrafficRegion::High
    } else {
        TrafficRegion::Moderate
    }
}

const STREAM_SELECT: u64 = 1;
const STREAM_ATTEMPT: u64 = 2;
const STREAM_PAIRING: u64 = 3;
const STREAM_CONTENTION: u64 = 4;
const STREAM_CHANNEL_BASE: u64 = 1 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn fill_mask(grid: &GridQuorum, sel: &QuorumSelection, out: &mut [u64]) {
    let n = grid.n();
    out.fill(0);
    let mut set = |k: usize| {
        if k < grid.num_channels() {
            out[k / 64] |= 1 << (k % 64);
        }
    };
    for &r in sel.rows() {
        (0..n).for_each(|j| set((r - 1) * n + j));
    }
    for &c in sel.cols() {
        (0..n).for_each(|i| set(i * n + c - 1));
    }
}

/// State of one simulation run.
pub struct Simulation {
    config: SimConfig,
    grid: GridQuorum,
    cell: CellKey,
    channels: Vec<PuChannel>,
    channel_rngs: Vec<ChaCha8Rng>,
    users: Vec<CrUser>,
    select_rng: ChaCha8Rng,
    attempt_rng: ChaCha8Rng,
    pairing_rng: ChaCha8Rng,
    contention_rng: ChaCha8Rng,
    slot: u64,
    acc: MetricsAccumulator,
    rc: (usize, usize),
    load_samples: VecDeque<u32>,
    load_sum: u64,
    controller_log: Vec<ControllerDecision>,
    awake: Vec<bool>,
    // Per-user bitmap of awake slots in the current cycle, `mask_words`
    // words per user; bit `k` is slot index `k + 1`.
    masks: Vec<u64>,
    mask_words: usize,
    contenders: Vec<usize>,
}

/// Report plus the adaptive controller's decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub accumulator: MetricsAccumulator,
    pub controller_log: Vec<ControllerDecision>,
}

impl Simulation {
    /// Builds the grid, draws every user's first selection and initialises
    /// the channels from their stationary distribution.
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        let grid = config.validate()?;
        let seed = config.seed;

        let mut channels = Vec::with_capacity(config.num_channels);
        let mut channel_rngs = Vec::with_capacity(config.num_channels);
        for (i, (alpha, beta)) in config
            .occupancy
            .sojourns(config.num_channels)?
            .into_iter()
            .enumerate()
        {
            let mut rng = stream(seed, STREAM_CHANNEL_BASE + i as u64);
            let ch = match config.forced_channels {
                Some(state) => PuChannel::new(i + 1, alpha, beta, state)?,
                None => PuChannel::stationary(i + 1, alpha, beta, &mut rng)?,
            };
            channels.push(ch);
            channel_rngs.push(rng);
        }

        let region = TrafficRegion::Moderate;
        let rc = scheme_to_rc(&config.scheme, region);
        let mut select_rng = stream(seed, STREAM_SELECT);
        let mut users = Vec::with_capacity(config.num_users);
        for id in 0..config.num_users {
            let selection = match &config.fixed_selections {
                Some(fixed) => {
                    let (rows, cols) = &fixed[id];
                    QuorumSelection::from_parts(&grid, rows.iter().copied(), cols.iter().copied())?
                }
                None => quorum::select(&grid, rc.0, rc.1, &mut select_rng)?,
            };
            users.push(CrUser {
                id,
                selection,
                pending: None,
                awake_slots: 0,
            });
        }

        let mut controller_log = Vec::new();
        if config.scheme.is_adaptive() {
            controller_log.push(ControllerDecision {
                slot: 0,
                load: None,
                region,
                rows: rc.0,
                cols: rc.1,
            });
        }

        let mask_words = grid.cycle_len().div_ceil(64);
        let mut masks = vec![0; mask_words * config.num_users];
        for (u, m) in users.iter().zip(masks.chunks_mut(mask_words)) {
            fill_mask(&grid, &u.selection, m);
        }

        let cell = config.cell_key(&grid);
        Ok(Self {
            masks,
            mask_words,
            acc: MetricsAccumulator::new(cell.clone()),
            cell,
            awake: vec![false; config.num_users],
            contenders: Vec::with_capacity(config.num_users),
            grid,
            channels,
            channel_rngs,
            users,
            select_rng,
            attempt_rng: stream(seed, STREAM_ATTEMPT),
            pairing_rng: stream(seed, STREAM_PAIRING),
            contention_rng: stream(seed, STREAM_CONTENTION),
            slot: 0,
            rc,
            load_samples: VecDeque::with_capacity(config.load_window),
            load_sum: 0,
            controller_log,
            config,
        })
    }

    pub fn grid(&self) -> &GridQuorum {
        &self.grid
    }

    pub fn users(&self) -> &[CrUser] {
        &self.users
    }

    pub fn channels(&self) -> &[PuChannel] {
        &self.channels
    }

    pub fn accumulator(&self) -> &MetricsAccumulator {
        &self.acc
    }

    pub fn controller_log(&self) -> &[ControllerDecision] {
        &self.controller_log
    }

    /// Next slot to be simulated (0-based).
    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Rows and columns currently in use by the scheme.
    pub fn current_rc(&self) -> (usize, usize) {
        self.rc
    }

    pub fn pending_count(&self) -> usize {
        self.users.iter().filter(|u| u.pending.is_some()).count()
    }

    fn attempt_rate_at(&self, slot: u64) -> f64 {
        let mut end = 0;
        for phase in &self.config.load_phases {
            end += phase.slots;
            if slot < end {
                return phase.attempt_rate;
            }
        }
        self.config.attempt_rate
    }

    /// Idle transmitters start attempts towards a uniformly chosen receiver;
    /// in per-slot pairing mode every pending attempt redraws its receiver.
    pub fn form_attempts(&mut self) {
        let slot = self.slot;
        let rate = self.attempt_rate_at(slot);
        let users = self.config.num_users;
        for tx in 0..self.config.transmitter_count() {
            let redraw = match self.users[tx].pending {
                None => rate >= 1.0 || (rate > 0.0 && self.attempt_rng.random_bool(rate)),
                Some(_) => self.config.pairing == PairingPolicy::PerSlot,
            };
            if !redraw {
                continue;
            }
            let mut rx = self.pairing_rng.random_range(0..users - 1);
            if rx >= tx {
                rx += 1;
            }
            let start_slot = self.users[tx].pending.map_or(slot, |a| a.start_slot);
            self.users[tx].pending = Some(Attempt {
                receiver: rx,
                start_slot,
            });
        }
    }

    fn record_load(&mut self) {
        let pending = self.pending_count() as u32;
        if self.load_samples.len() == self.config.load_window {
            if let Some(old) = self.load_samples.pop_front() {
                self.load_sum -= old as u64;
            }
        }
        self.load_samples.push_back(pending);
        self.load_sum += pending as u64;
    }

    /// Offered load (pending attempts per channel) averaged over the window.
    pub fn smoothed_load(&self) -> Option<f64> {
        (!self.load_samples.is_empty()).then(|| {
            self.load_sum as f64 / (self.load_samples.len() * self.config.num_channels) as f64
        })
    }

    /// Region of the smoothed offered load; `Moderate` before any sample.
    pub fn classify_region(&self) -> TrafficRegion {
        let th = match self.config.scheme {
            SelectionScheme::Adaptive(th) => th,
            _ => AdaptiveThresholds::default(),
        };
        self.smoothed_load()
            .map_or(TrafficRegion::Moderate, |load| classify_load(load, &th))
    }

    /// Resolves every pending pair in the current slot.
    pub fn resolve_slot(&mut self, mut events: Option<&mut Vec<PairEvent>>) -> SlotOutcome {
        let slot = self.slot;
        let index = (slot % self.grid.cycle_len() as u64) as usize + 1;
        let channel = self.grid.channel_at(index);
        let (word, bit) = ((index - 1) / 64, (index - 1) % 64);
        let idle = channel.is_some_and(|c| self.channels[c - 1].is_idle());
        let mut out = SlotOutcome {
            slot,
            channel,
            channel_idle: idle,
            ..SlotOutcome::default()
        };

        let masks = self.masks.chunks_exact(self.mask_words);
        for ((u, awake), m) in self.users.iter_mut().zip(self.awake.iter_mut()).zip(masks) {
            *awake = (m[word] >> bit) & 1 == 1;
            if *awake {
                u.awake_slots += 1;
                out.awake_users += 1;
            }
        }
        self.acc.total_awake_slots += out.awake_users as u64;

        self.contenders.clear();
        for tx in 0..self.users.len() {
            let Some(attempt) = self.users[tx].pending else {
                continue;
            };
            let met = self.awake[tx] && self.awake[attempt.receiver];
            let kind = if !met {
                out.not_met += 1;
                PairEventKind::NotMet
            } else if !idle {
                out.blocking_count += 1;
                PairEventKind::Blocked
            } else {
                self.contenders.push(tx);
                continue;
            };
            if let Some(ev) = events.as_deref_mut() {
                ev.push(PairEvent {
                    transmitter: tx,
                    receiver: attempt.receiver,
                    kind,
                });
            }
        }

        let winner = match (self.contenders.len(), self.config.contention) {
            (0, _) => None,
            (1, _) => Some(self.contenders[0]),
            (_, ContentionPolicy::AllFail) => None,
            (k, ContentionPolicy::RandomWinner) => {
                Some(self.contenders[self.contention_rng.random_range(0..k)])
            }
        };
        for &tx in &self.contenders {
            let attempt = self.users[tx].pending.expect("contender has an attempt");
            let kind = if Some(tx) == winner {
                self.users[tx].pending = None;
                self.acc.record_ttr(slot - attempt.start_slot + 1);
                out.successful_rdv_count += 1;
                PairEventKind::Rendezvous
            } else {
                out.contention_losses += 1;
                PairEventKind::ContentionLoss
            };
            if let Some(ev) = events.as_deref_mut() {
                ev.push(PairEvent {
                    transmitter: tx,
                    receiver: attempt.receiver,
                    kind,
                });
            }
        }

        self.acc.total_slots += 1;
        self.acc.total_rdv += out.successful_rdv_count as u64;
        self.acc.total_blocking += out.blocking_count as u64;
        self.acc.contention_losses += out.contention_losses as u64;
        out
    }

    fn step_channels(&mut self) {
        if self.config.forced_channels.is_some() {
            return;
        }
        let process = self.config.channel_process;
        for (ch, rng) in self.channels.iter_mut().zip(self.channel_rngs.iter_mut()) {
            ch.advance(process, rng);
        }
    }

    /// At a cycle boundary every user draws a fresh selection; the adaptive
    /// scheme first maps the current traffic region to its row/column
    /// counts. Returns whether anything was redrawn.
    pub fn reselect_on_cycle(&mut self) -> bool {
        if !self.slot.is_multiple_of(self.grid.cycle_len() as u64)
            || !self.config.reselect_each_cycle
            || self.config.fixed_selections.is_some()
        {
            return false;
        }
        if self.config.scheme.is_adaptive() {
            let region = self.classify_region();
            self.rc = scheme_to_rc(&self.config.scheme, region);
            self.controller_log.push(ControllerDecision {
                slot: self.slot,
                load: self.smoothed_load(),
                region,
                rows: self.rc.0,
                cols: self.rc.1,
            });
        }
        let (r, c) = self.rc;
        for (u, m) in self
            .users
            .iter_mut()
            .zip(self.masks.chunks_mut(self.mask_words))
        {
            quorum::select_into(&self.grid, r, c, &mut self.select_rng, &mut u.selection)
                .expect("row/column counts validated against the grid");
            fill_mask(&self.grid, &u.selection, m);
        }
        true
    }

    /// Simulates one slot.
    pub fn step(&mut self, events: Option<&mut Vec<PairEvent>>) -> SlotOutcome {
        let cycle_len = self.grid.cycle_len() as u64;
        if self.slot.is_multiple_of(cycle_len) && (self.slot / cycle_len).is_power_of_two() {
            self.check_meetings();
        }
        self.form_attempts();
        self.record_load();
        let out = self.resolve_slot(events);
        self.step_channels();
        self.slot += 1;
        self.reselect_on_cycle();
        out
    }

    /// The slots where the engine's bitmaps wake both ends of a pending pair
    /// must equal the slots where both hop sequences sit on the same
    /// channel, and the quorum intersection restricted to real channels.
    /// Checked at power-of-two cycles only, to keep debug runs fast.
    #[cfg(debug_assertions)]
    fn check_meetings(&self) {
        use quorum::HopAction;
        use std::collections::BTreeSet;

        let words = self.mask_words;
        let mask =
            |u: usize, s: usize| (self.masks[u * words + (s - 1) / 64] >> ((s - 1) % 64)) & 1 == 1;
        let mut checked = BTreeSet::new();
        for (tx, user) in self.users.iter().enumerate() {
            let Some(attempt) = user.pending else {
                continue;
            };
            let key = (
                user.selection.clone(),
                self.users[attempt.receiver].selection.clone(),
            );
            if !checked.insert(key.clone()) {
                continue;
            }
            let a = quorum::hop_sequence(&self.grid, &key.0);
            let b = quorum::hop_sequence(&self.grid, &key.1);
            let via_hops: BTreeSet<usize> = (1..=self.grid.cycle_len())
                .filter(|&s| {
                    matches!((a[s - 1], b[s - 1]), (HopAction::Awake(x), HopAction::Awake(y)) if x == y)
                })
                .collect();
            let via_sets: BTreeSet<usize> = quorum::intersection(&key.0, &key.1)
                .into_iter()
                .filter(|&s| self.grid.channel_at(s).is_some())
                .collect();
            let via_masks: BTreeSet<usize> = (1..=self.grid.cycle_len())
                .filter(|&s| mask(tx, s) && mask(attempt.receiver, s))
                .collect();
            assert_eq!(
                via_hops, via_sets,
                "meeting slots of pair ({tx}, {})",
                attempt.receiver
            );
            assert_eq!(
                via_masks, via_sets,
                "awake bitmaps of pair ({tx}, {})",
                attempt.receiver
            );
        }
    }

    #[cfg(not(debug_assertions))]
    fn check_meetings(&self) {}

    /// Finalises the run: open attempts are counted as censored.
    pub fn finish(mut self) -> Result<RunOutput, SimError> {
        self.acc.censored_attempts = self.pending_count() as u64;
        debug_assert_eq!(
            self.acc.total_awake_slots,
            self.users.iter().map(|u| u.awake_slots).sum::<u64>()
        );
        let report = MetricsReport::from_accumulator(&self.acc, Some(self.config.seed))?;
        debug_assert_eq!(report.cell_key(), self.cell);
        Ok(RunOutput {
            report,
            accumulator: self.acc,
            controller_log: self.controller_log,
        })
    }

    pub fn run_to_end(mut self) -> Result<RunOutput, SimError> {
        while self.slot < self.config.total_slots {
            self.step(None);
        }
        self.finish()
    }
}

/// Runs a whole configuration and returns its metrics and controller log.
pub fn run_detailed(config: SimConfig) -> Result<RunOutput, SimError> {
    Simulation::new(config)?.run_to_end()
}

/// Runs a whole configuration and returns its metrics.
pub fn run(config: SimConfig) -> Result<MetricsReport, SimError> {
    run_detailed(config).map(|o| o.report)
}
