//! Transmission policies behind one per-snapshot step interface.
//!
//! Every policy sees the same inputs at each snapshot with buffered data and
//! answers TX or IDLE. A transmission always drains the whole buffer, and all
//! policies transmit once the oldest buffered byte reaches the age deadline.

use serde::{Deserialize, Serialize};

use crate::bandit::{reward_idle, reward_tx, Arm, BanditConfig, BanditContext, LinUcb, RateSource};
use crate::blackspot::BlackSpotMap;
use crate::error::{Error, Result};
use crate::geo::Point;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Idle,
    Tx,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Idle => "IDLE",
            Action::Tx => "TX",
        }
    }
}

impl From<Arm> for Action {
    fn from(a: Arm) -> Self {
        match a {
            Arm::Idle => Action::Idle,
            Arm::Tx => Action::Tx,
        }
    }
}

/// Untransmitted sensor data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferState {
    /// bytes
    pub buffered_bytes: f64,
    /// Age of the oldest unsent byte at the last update, s.
    pub first_item_age: f64,
    /// s
    pub last_tx_time: f64,
    oldest_item_time: Option<f64>,
}

impl BufferState {
    /// Empty buffer; `start` counts as the last transmission.
    pub fn new(start: f64) -> Self {
        Self {
            buffered_bytes: 0.0,
            first_item_age: 0.0,
            last_tx_time: start,
            oldest_item_time: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.buffered_bytes <= 0.0
    }

    /// Adds `bytes` generated since `since` and advances the age to `now`.
    pub fn accrue(&mut self, now: f64, since: f64, bytes: f64) {
        if bytes > 0.0 {
            self.buffered_bytes += bytes;
            self.oldest_item_time.get_or_insert(since);
        }
        self.first_item_age = self.oldest_item_time.map_or(0.0, |t| now - t);
    }

    /// Empties the buffer at `now` and returns the bytes sent.
    pub fn drain(&mut self, now: f64) -> f64 {
        let bytes = self.buffered_bytes;
        self.buffered_bytes = 0.0;
        self.first_item_age = 0.0;
        self.oldest_item_time = None;
        self.last_tx_time = now;
        bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeDecision {
    pub action: Action,
    /// The age deadline, not the policy, caused the transmission.
    pub forced_by_deadline: bool,
    pub in_black_spot: bool,
}

impl SchemeDecision {
    fn chosen(action: Action, in_black_spot: bool) -> Self {
        Self {
            action,
            forced_by_deadline: false,
            in_black_spot,
        }
    }

    fn forced(in_black_spot: bool) -> Self {
        Self {
            action: Action::Tx,
            forced_by_deadline: true,
            in_black_spot,
        }
    }
}

/// Transmits every `interval` seconds.
pub fn periodic_step(buffer: &BufferState, now: f64, interval: f64) -> Result<SchemeDecision> {
    if !(interval > 0.0) {
        return Err(Error::config(format!("periodic interval must be > 0, got {interval}")));
    }
    let tx = now - buffer.last_tx_time >= interval;
    Ok(SchemeDecision::chosen(if tx { Action::Tx } else { Action::Idle }, false))
}

/// Transmission probability law shared by CAT (on SINR) and ML-CAT (on predicted rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbabilisticConfig {
    /// Quality at which the probability starts to rise.
    pub min: f64,
    /// Quality at which the quality factor saturates at 1.
    pub max: f64,
    pub gamma: f64,
    /// Scale by `Δt / Δt_max`.
    pub time_ramp: bool,
}

impl Default for ProbabilisticConfig {
    fn default() -> Self {
        Self {
            min: -5.0,
            max: 25.0,
            gamma: 2.0,
            time_ramp: true,
        }
    }
}

impl ProbabilisticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max > self.min) {
            return Err(Error::config(format!(
                "probabilistic anchors need max > min, got {}..{}",
                self.min, self.max
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::config("probabilistic gamma must be > 0"));
        }
        Ok(())
    }

    pub fn probability(&self, quality: f64, age: f64, dt_max: f64) -> f64 {
        let q = ((quality - self.min) / (self.max - self.min)).clamp(0.0, 1.0).powf(self.gamma);
        if self.time_ramp {
            q * (age / dt_max).clamp(0.0, 1.0)
        } else {
            q
        }
    }
}

/// Draws TX with the configured probability of `quality`; `u` is uniform in [0, 1).
pub fn probabilistic_step(quality: f64, age: f64, dt_max: f64, cfg: &ProbabilisticConfig, u: f64) -> SchemeDecision {
    if age >= dt_max {
        return SchemeDecision::forced(false);
    }
    let tx = u < cfg.probability(quality, age, dt_max);
    SchemeDecision::chosen(if tx { Action::Tx } else { Action::Idle }, false)
}

pub fn cat_step(sinr: f64, buffer: &BufferState, dt_max: f64, cfg: &ProbabilisticConfig, u: f64) -> SchemeDecision {
    probabilistic_step(sinr, buffer.first_item_age, dt_max, cfg, u)
}

pub fn mlcat_step(predicted_rate: f64, buffer: &BufferState, dt_max: f64, cfg: &ProbabilisticConfig, u: f64) -> SchemeDecision {
    probabilistic_step(predicted_rate, buffer.first_item_age, dt_max, cfg, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QConfig {
    pub rate_bins: usize,
    pub age_bins: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub learning_rate: f64,
    pub discount: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            rate_bins: 10,
            age_bins: 12,
            epsilon_start: 0.3,
            epsilon_end: 0.02,
            learning_rate: 0.1,
            discount: 0.9,
        }
    }
}

impl QConfig {
    pub fn validate(&self) -> Result<()> {
        let eps_ok = (0.0..=1.0).contains(&self.epsilon_start) && (0.0..=1.0).contains(&self.epsilon_end);
        if self.rate_bins == 0 || self.age_bins == 0 || !eps_ok {
            return Err(Error::config("rlcat needs bins >= 1 and epsilons in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) || !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("rlcat learning_rate and discount must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Geometric decay from `epsilon_start` at epoch 0 to `epsilon_end` at the last epoch.
    pub fn epsilon(&self, epoch: usize, total_epochs: usize) -> f64 {
        if total_epochs <= 1 || self.epsilon_start <= 0.0 {
            return self.epsilon_end;
        }
        let f = epoch.min(total_epochs - 1) as f64 / (total_epochs - 1) as f64;
        self.epsilon_start * (self.epsilon_end / self.epsilon_start).powf(f)
    }
}

/// Action values over a (rate bin, age bin) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableState {
    pub rate_bins: usize,
    pub age_bins: usize,
    /// `[idle, tx]` per state, rate-major.
    pub table: Vec<[f64; 2]>,
    pub epsilon: f64,
}

impl QTableState {
    pub fn new(rate_bins: usize, age_bins: usize, epsilon: f64) -> Self {
        Self {
            rate_bins,
            age_bins,
            table: vec![[0.0; 2]; rate_bins * age_bins],
            epsilon,
        }
    }

    /// State index of a context normalized to [0, 1] per feature.
    pub fn state(&self, x: &[f64; 2]) -> usize {
        let bin = |v: f64, n: usize| ((v.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1);
        bin(x[0], self.rate_bins) * self.age_bins + bin(x[1], self.age_bins)
    }

    /// Highest-valued action; ties go to TX.
    pub fn greedy(&self, state: usize) -> Action {
        let [idle, tx] = self.table[state];
        if tx >= idle {
            Action::Tx
        } else {
            Action::Idle
        }
    }

    /// `Q(s,a) += lr·(r + discount·max Q(s',·) − Q(s,a))`; a terminal step has no `s'`.
    pub fn update(&mut self, state: usize, action: Action, reward: f64, next: Option<usize>, lr: f64, discount: f64) {
        let future = next.map_or(0.0, |n| self.table[n][0].max(self.table[n][1]));
        let q = &mut self.table[state][action_index(action)];
        *q += lr * (reward + discount * future - *q);
    }
}

fn action_index(a: Action) -> usize {
    match a {
        Action::Idle => 0,
        Action::Tx => 1,
    }
}

/// ε-greedy choice; `u_explore` and `u_action` are uniform in [0, 1).
pub fn rlcat_step(q: &QTableState, ctx: &BanditContext, cfg: &BanditConfig, u_explore: f64, u_action: f64) -> SchemeDecision {
    if ctx.buffer_age >= cfg.dt_max {
        return SchemeDecision::forced(false);
    }
    let action = if u_explore < q.epsilon {
        if u_action < 0.5 {
            Action::Idle
        } else {
            Action::Tx
        }
    } else {
        q.greedy(q.state(&ctx.features(cfg)))
    };
    SchemeDecision::chosen(action, false)
}

/// Deadline first, then black-spot avoidance, then the bandit.
pub fn bscb_step(bandit: &LinUcb, ctx: &BanditContext, position: Point, map: &BlackSpotMap, cfg: &BanditConfig) -> SchemeDecision {
    let in_black_spot = map.contains(position);
    if ctx.buffer_age >= cfg.dt_max {
        return SchemeDecision::forced(in_black_spot);
    }
    if in_black_spot {
        return SchemeDecision::chosen(Action::Idle, true);
    }
    SchemeDecision::chosen(bandit.select(ctx, cfg).into(), false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Periodic,
    Cat,
    Mlcat,
    Rlcat,
    Bscb,
    /// BS-CB without black-spot avoidance.
    Linucb,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::Periodic,
        SchemeKind::Cat,
        SchemeKind::Mlcat,
        SchemeKind::Rlcat,
        SchemeKind::Bscb,
        SchemeKind::Linucb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Periodic => "periodic",
            SchemeKind::Cat => "cat",
            SchemeKind::Mlcat => "mlcat",
            SchemeKind::Rlcat => "rlcat",
            SchemeKind::Bscb => "bscb",
            SchemeKind::Linucb => "linucb",
        }
    }

    /// Whether state carries over between epochs.
    pub fn learns(self) -> bool {
        matches!(self, SchemeKind::Rlcat | SchemeKind::Bscb | SchemeKind::Linucb)
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scheme `{s}`")))
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What BS-CB learns from steps it idles through inside a black spot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlackSpotUpdates {
    /// Nothing; the bandit did not choose.
    #[default]
    Off,
    /// Update the IDLE arm with the idle reward.
    IdleReward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    /// Periodic interval, s
    pub periodic_interval: f64,
    pub cat: ProbabilisticConfig,
    /// Anchors on the predicted rate; `max` defaults to the bandit's `s_max`.
    pub mlcat_min: f64,
    pub mlcat_max: Option<f64>,
    pub mlcat_gamma: f64,
    pub rlcat: QConfig,
    pub blackspot_updates: BlackSpotUpdates,
    /// Whether deadline-forced transmissions update the bandit's TX arm.
    pub learn_forced: bool,
    /// Seed of the random draws of CAT, ML-CAT and RL-CAT.
    pub seed: u64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            periodic_interval: 10.0,
            cat: ProbabilisticConfig::default(),
            mlcat_min: 0.0,
            mlcat_max: None,
            mlcat_gamma: 2.0,
            rlcat: QConfig::default(),
            blackspot_updates: BlackSpotUpdates::Off,
            learn_forced: true,
            seed: 0,
        }
    }
}

impl SchemeConfig {
    pub fn mlcat(&self, bandit: &BanditConfig) -> ProbabilisticConfig {
        ProbabilisticConfig {
            min: self.mlcat_min,
            max: self.mlcat_max.unwrap_or(bandit.s_max),
            gamma: self.mlcat_gamma,
            time_ramp: self.cat.time_ramp,
        }
    }

    pub fn validate(&self, bandit: &BanditConfig) -> Result<()> {
        if !(self.periodic_interval > 0.0) {
            return Err(Error::config("periodic_interval must be > 0"));
        }
        self.cat.validate()?;
        self.mlcat(bandit).validate()?;
        self.rlcat.validate()
    }
}

/// Per-snapshot inputs of a decision.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub epoch: usize,
    pub index: usize,
    pub now: f64,
    pub position: Point,
    pub sinr: f64,
    /// MBit/s
    pub predicted: f64,
    pub buffer: &'a BufferState,
}

/// Outcome of a decision, fed back for learning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feedback {
    /// Transmission achieved `achieved` MBit/s with data of age `age`.
    Tx { achieved: f64, age: f64 },
    /// Idled; the buffer will be `next_age` old at the next decision.
    Idle { next_age: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PendingTransition {
    state: usize,
    action: Action,
    reward: f64,
}

/// Uniform draw in [0, 1) keyed on (seed, epoch, index, stream).
fn uniform(seed: u64, epoch: usize, index: usize, stream: u64) -> f64 {
    let h = seed::mix(seed::mix(seed::mix(seed, epoch as u64), index as u64), stream);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// A policy with its learning state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub config: SchemeConfig,
    pub bandit_config: BanditConfig,
    pub bandit: LinUcb,
    pub q: QTableState,
    #[serde(skip)]
    pending: Option<PendingTransition>,
    #[serde(skip)]
    last_context: Option<BanditContext>,
}

impl Scheme {
    pub fn new(kind: SchemeKind, config: SchemeConfig, bandit_config: BanditConfig) -> Result<Self> {
        bandit_config.validate()?;
        config.validate(&bandit_config)?;
        let q = QTableState::new(config.rlcat.rate_bins, config.rlcat.age_bins, config.rlcat.epsilon_start);
        Ok(Self {
            kind,
            config,
            bandit_config,
            bandit: LinUcb::new(),
            q,
            pending: None,
            last_context: None,
        })
    }

    pub fn needs_black_spot_map(&self) -> bool {
        self.kind == SchemeKind::Bscb
    }

    /// Prepares epoch `epoch` of `total_epochs`.
    pub fn begin_epoch(&mut self, epoch: usize, total_epochs: usize) {
        self.q.epsilon = self.config.rlcat.epsilon(epoch, total_epochs);
        self.pending = None;
        self.last_context = None;
    }

    /// Closes the epoch; an open Q-learning transition ends without successor.
    pub fn end_epoch(&mut self) {
        if let Some(p) = self.pending.take() {
            let c = self.config.rlcat;
            self.q.update(p.state, p.action, p.reward, None, c.learning_rate, c.discount);
        }
    }

    pub fn context(&self, input: &StepInput) -> BanditContext {
        BanditContext::new(input.predicted, input.buffer.first_item_age)
    }

    pub fn decide(&mut self, input: &StepInput, map: Option<&BlackSpotMap>) -> Result<SchemeDecision> {
        let bc = &self.bandit_config;
        let ctx = self.context(input);
        let age = input.buffer.first_item_age;
        let u = |stream| uniform(self.config.seed, input.epoch, input.index, stream);
        let decision = match self.kind {
            SchemeKind::Periodic => {
                if age >= bc.dt_max {
                    SchemeDecision::forced(false)
                } else {
                    periodic_step(input.buffer, input.now, self.config.periodic_interval)?
                }
            }
            SchemeKind::Cat => cat_step(input.sinr, input.buffer, bc.dt_max, &self.config.cat, u(1)),
            SchemeKind::Mlcat => {
                mlcat_step(input.predicted, input.buffer, bc.dt_max, &self.config.mlcat(bc), u(2))
            }
            SchemeKind::Rlcat => {
                let state = self.q.state(&ctx.features(bc));
                if let Some(p) = self.pending.take() {
                    let c = self.config.rlcat;
                    self.q.update(p.state, p.action, p.reward, Some(state), c.learning_rate, c.discount);
                }
                rlcat_step(&self.q, &ctx, bc, u(3), u(4))
            }
            SchemeKind::Bscb => {
                let map = map.ok_or_else(|| Error::config("bscb needs a black-spot map"))?;
                bscb_step(&self.bandit, &ctx, input.position, map, bc)
            }
            SchemeKind::Linucb => {
                if age >= bc.dt_max {
                    SchemeDecision::forced(false)
                } else {
                    SchemeDecision::chosen(self.bandit.select(&ctx, bc).into(), false)
                }
            }
        };
        self.last_context = Some(ctx);
        Ok(decision)
    }

    /// Applies the outcome of the last decision; returns the reward learned from, if any.
    pub fn feedback(&mut self, decision: &SchemeDecision, outcome: Feedback) -> Result<Option<f64>> {
        let Some(ctx) = self.last_context.take() else {
            return Ok(None);
        };
        let bc = &self.bandit_config;
        let reward = match outcome {
            Feedback::Tx { achieved, age } => {
                let rate = match bc.reward_rate_source {
                    RateSource::Measured => achieved,
                    RateSource::Predicted => ctx.predicted_rate,
                };
                reward_tx(rate, age, bc)
            }
            Feedback::Idle { next_age } => reward_idle(next_age, bc),
        };
        match self.kind {
            SchemeKind::Periodic | SchemeKind::Cat | SchemeKind::Mlcat => Ok(None),
            SchemeKind::Rlcat => {
                self.pending = Some(PendingTransition {
                    state: self.q.state(&ctx.features(bc)),
                    action: decision.action,
                    reward,
                });
                Ok(Some(reward))
            }
            SchemeKind::Bscb | SchemeKind::Linucb => {
                let blocked = decision.action == Action::Idle && decision.in_black_spot;
                if blocked && self.config.blackspot_updates == BlackSpotUpdates::Off {
                    return Ok(None);
                }
                if decision.forced_by_deadline && !self.config.learn_forced {
                    return Ok(None);
                }
                let arm = match decision.action {
                    Action::Idle => Arm::Idle,
                    Action::Tx => Arm::Tx,
                };
                self.bandit.update(arm, &ctx, reward, bc)?;
                Ok(Some(reward))
            }
        }
    }

    /// Drops the context of the last decision without learning from it.
    pub fn discard(&mut self) {
        self.last_context = None;
    }
}
