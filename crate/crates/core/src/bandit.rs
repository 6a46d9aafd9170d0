//! Two-arm LinUCB over the context (predicted rate, buffer age).
//!
//! Each arm keeps a ridge regression with unit regularization:
//! `A = I + Σ x xᵀ`, `b = Σ r x`, `θ = A⁻¹ b`. An arm's score is
//! `θᵀx + α·sqrt(xᵀ A⁻¹ x)`; the higher score is played.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Context dimension.
pub const DIM: usize = 2;

/// Upper clamp of the normalized context features.
pub const CONTEXT_CLAMP: f64 = 1.5;

pub type Vector = [f64; DIM];
pub type Matrix = [[f64; DIM]; DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Idle,
    Tx,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Idle, Arm::Tx];

    pub fn index(self) -> usize {
        match self {
            Arm::Idle => 0,
            Arm::Tx => 1,
        }
    }
}

/// Exploration weight for confidence level `delta`.
pub fn alpha_from_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(1.0 + ((2.0 / delta).ln() / 2.0).sqrt())
}

/// Which rate the transmit reward is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Rate achieved by the transmission.
    #[default]
    Measured,
    /// Rate predicted before transmitting.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditConfig {
    pub delta: f64,
    /// Explicit exploration weight; derived from `delta` when absent.
    pub alpha: Option<f64>,
    /// Target data rate S*, MBit/s
    pub s_target: f64,
    /// Normalization rate S_max, MBit/s
    pub s_max: f64,
    /// Age deadline, s
    pub dt_max: f64,
    /// Weight of the data-rate term against the age term.
    pub w: f64,
    /// Reward for idling into the deadline, ≤ 0.
    pub omega_punish: f64,
    pub reward_rate_source: RateSource,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            alpha: None,
            s_target: 10.0,
            s_max: 20.0,
            dt_max: 120.0,
            w: 0.9,
            omega_punish: -1.0,
            reward_rate_source: RateSource::Measured,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_none() {
            alpha_from_delta(self.delta).map_err(|e| Error::config(e.to_string()))?;
        }
        if self.alpha.is_some_and(|a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::config("bandit.alpha must be finite and >= 0"));
        }
        if !(self.s_max > 0.0) || !(self.dt_max > 0.0) || !(self.s_target >= 0.0) {
            return Err(Error::config("bandit needs s_max > 0, dt_max > 0 and s_target >= 0"));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::config(format!("bandit.w must lie in [0, 1], got {}", self.w)));
        }
        if !(self.omega_punish <= 0.0) {
            return Err(Error::config("bandit.omega_punish must be <= 0"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
            .unwrap_or_else(|| alpha_from_delta(self.delta).expect("validated delta"))
    }
}

/// Transmit reward: `w·(S − S*)/S_max + Δt·(1 − w)/Δt_max`.
pub fn reward_tx(rate: f64, buffer_age: f64, cfg: &BanditConfig) -> f64 {
    cfg.w * (rate - cfg.s_target) / cfg.s_max + buffer_age * (1.0 - cfg.w) / cfg.dt_max
}

/// Idle reward: the punishment once the age reaches the deadline, else 0.
pub fn reward_idle(buffer_age: f64, cfg: &BanditConfig) -> f64 {
    if buffer_age >= cfg.dt_max {
        cfg.omega_punish
    } else {
        0.0
    }
}

/// Raw bandit context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditContext {
    /// MBit/s
    pub predicted_rate: f64,
    /// s
    pub buffer_age: f64,
}

impl BanditContext {
    pub fn new(predicted_rate: f64, buffer_age: f64) -> Self {
        Self {
            predicted_rate,
            buffer_age,
        }
    }

    /// Feature vector scaled by `S_max` and `Δt_max`, clamped to [0, 1.5].
    pub fn features(&self, cfg: &BanditConfig) -> Vector {
        [
            (self.predicted_rate / cfg.s_max).clamp(0.0, CONTEXT_CLAMP),
            (self.buffer_age / cfg.dt_max).clamp(0.0, CONTEXT_CLAMP),
        ]
    }
}

fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn mat_vec(m: &Matrix, v: &Vector) -> Vector {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn inverse(m: &Matrix) -> Option<Matrix> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Ridge-regression state of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmDoc", into = "ArmDoc")]
pub struct ArmState {
    a: Matrix,
    b: Vector,
    a_inv: Matrix,
    theta: Vector,
    pulls: u64,
}

#[derive(Serialize, Deserialize)]
struct ArmDoc {
    a: Matrix,
    b: Vector,
    #[serde(default)]
    pulls: u64,
}

impl TryFrom<ArmDoc> for ArmState {
    type Error = Error;

    fn try_from(d: ArmDoc) -> Result<Self> {
        let symmetric = d.a[0][1] == d.a[1][0];
        let a_inv = inverse(&d.a)
            .filter(|_| symmetric && d.a[0][0] > 0.0)
            .ok_or_else(|| Error::Format("arm matrix A is not symmetric positive definite".into()))?;
        Ok(Self {
            theta: mat_vec(&a_inv, &d.b),
            a: d.a,
            b: d.b,
            a_inv,
            pulls: d.pulls,
        })
    }
}

impl From<ArmState> for ArmDoc {
    fn from(s: ArmState) -> Self {
        Self {
            a: s.a,
            b: s.b,
            pulls: s.pulls,
        }
    }
}

impl Default for ArmState {
    fn default() -> Self {
        Self::new()
    }
}

impl ArmState {
    pub fn new() -> Self {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        Self {
            a: id,
            b: [0.0; DIM],
            a_inv: id,
            theta: [0.0; DIM],
            pulls: 0,
        }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn a_inv(&self) -> &Matrix {
        &self.a_inv
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    /// `xᵀ A⁻¹ x`
    pub fn width_sq(&self, x: &Vector) -> f64 {
        dot(x, &mat_vec(&self.a_inv, x)).max(0.0)
    }

    pub fn score(&self, x: &Vector, alpha: f64) -> f64 {
        dot(&self.theta, x) + alpha * self.width_sq(x).sqrt()
    }

    /// `A += x xᵀ`, `b += r x`, `θ = A⁻¹ b`.
    pub fn update(&mut self, x: &Vector, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::invalid(format!("reward must be finite, got {reward}")));
        }
        for i in 0..DIM {
            for j in 0..DIM {
                self.a[i][j] += x[i] * x[j];
            }
            self.b[i] += reward * x[i];
        }
        self.a_inv = inverse(&self.a).expect("A = I + Σxxᵀ stays positive definite");
        self.theta = mat_vec(&self.a_inv, &self.b);
        self.pulls += 1;
        Ok(())
    }
}

/// Arm with the highest upper confidence bound; ties go to [`Arm::Tx`].
pub fn select_arm(states: &[ArmState; 2], x: &Vector, alpha: f64) -> Arm {
    let idle = states[Arm::Idle.index()].score(x, alpha);
    let tx = states[Arm::Tx.index()].score(x, alpha);
    if tx >= idle {
        Arm::Tx
    } else {
        Arm::Idle
    }
}

pub const BANDIT_FORMAT: &str = "bscb-bandit";
pub const BANDIT_VERSION: u32 = 1;

/// Two-arm LinUCB learner.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinUcb {
    pub arms: [ArmState; 2],
}

#[derive(Serialize, Deserialize)]
struct BanditDocument {
    format: String,
    version: u32,
    config: BanditConfig,
    idle: ArmState,
    tx: ArmState,
}

impl LinUcb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn arm(&self, arm: Arm) -> &ArmState {
        &self.arms[arm.index()]
    }

    pub fn select(&self, ctx: &BanditContext, cfg: &BanditConfig) -> Arm {
        select_arm(&self.arms, &ctx.features(cfg), cfg.alpha())
    }

    pub fn update(&mut self, arm: Arm, ctx: &BanditContext, reward: f64, cfg: &BanditConfig) -> Result<()> {
        self.arms[arm.index()].update(&ctx.features(cfg), reward)
    }

    /// JSON snapshot of both arms with the configuration they were trained under.
    pub fn to_json(&self, cfg: &BanditConfig) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BanditDocument {
            format: BANDIT_FORMAT.into(),
            version: BANDIT_VERSION,
            config: cfg.clone(),
            idle: self.arms[0].clone(),
            tx: self.arms[1].clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<(Self, BanditConfig)> {
        let doc: BanditDocument = serde_json::from_str(json)?;
        if doc.format != BANDIT_FORMAT || doc.version != BANDIT_VERSION {
            return Err(Error::Format(format!(
                "expected {BANDIT_FORMAT} v{BANDIT_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        Ok((Self { arms: [doc.idle, doc.tx] }, doc.config))
    }

    pub fn save(&self, cfg: &BanditConfig, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json(cfg)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, BanditConfig)> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}
