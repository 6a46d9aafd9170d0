//! Black-spot-aware contextual bandit scheduling of delay-tolerant vehicular
//! sensor uploads.
//!
//! The pipeline has three learned stages that feed a per-snapshot transmit/idle
//! decision:
//!
//! 1. [`predictor`]: a regression forest maps the radio, mobility and
//!    application context of a snapshot to an achievable uplink data rate.
//! 2. [`blackspot`]: prediction errors are clustered geographically; clusters
//!    whose RMSE exceeds an operator-specific threshold become rotated ellipses
//!    in which predictions are not trusted.
//! 3. [`bandit`]: a two-arm LinUCB bandit decides, from the predicted rate and
//!    the age of the buffered data, whether to transmit now or keep buffering.
//!
//! [`schemes`] wraps these (and the reference policies) behind one step
//! interface, [`sim`] replays drive traces through a scheme epoch by epoch,
//! and [`metrics`] turns the resulting transmissions into resource, energy and
//! age-of-information figures.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod blackspot;
pub mod error;
pub mod experiment;
pub mod geo;
pub mod metrics;
pub mod predictor;
pub mod schemes;
pub mod sim;
pub mod stats;
pub mod synthetic;
pub mod trace;

mod seed;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use bandit::{alpha_from_delta, reward_idle, reward_tx, Arm, ArmState, BanditConfig, BanditContext, LinUcb};
pub use blackspot::{BlackSpotEllipse, BlackSpotMap, Cluster};
pub use error::{Error, Result};
pub use geo::{GeoOrigin, Point};
pub use metrics::{EfficiencyIndicators, PowerModel, ResourceLookupTable};
pub use predictor::{ForestModel, PredictionRecord, RatePredictor};
pub use schemes::{Action, BufferState, SchemeDecision, SchemeKind};
pub use sim::{ChannelRealizationModel, EpochResult, TrainingReport};
pub use synthetic::SyntheticScenarioConfig;
pub use trace::{ContextSnapshot, DriveTrace};
