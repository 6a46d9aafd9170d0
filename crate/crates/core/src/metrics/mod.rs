//! Resource, energy and efficiency accounting of transmissions.

mod lookup;
mod power;
mod report;

pub use lookup::{resource_occupation, ResourceLookupTable, Transmission, DEFAULT_PRBS};
pub use power::{energy, PowerModel};
pub use report::{comparative_report, ComparativeReport, Deltas, RunGroup, SchemeSummary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyIndicators {
    /// Mean data rate relative to the target rate.
    pub e_s: f64,
    /// Remaining fraction of the age deadline.
    pub e_aoi: f64,
}

/// `E_S = S̄ / S*` and `E_AoI = 1 − Δt̄ / Δt_max`.
pub fn efficiency(mean_rate: f64, mean_aoi: f64, s_target: f64, dt_max: f64) -> Result<EfficiencyIndicators> {
    if !(s_target > 0.0) || !(dt_max > 0.0) {
        return Err(Error::invalid("efficiency needs s_target > 0 and dt_max > 0"));
    }
    Ok(EfficiencyIndicators {
        e_s: mean_rate / s_target,
        e_aoi: 1.0 - mean_aoi / dt_max,
    })
}
