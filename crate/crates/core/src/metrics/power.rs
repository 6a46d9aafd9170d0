//! Uplink transmit power and device power draw.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerModel {
    /// `(rsrp dBm, tx power dBm)` anchors, interpolated and extrapolated linearly.
    pub rsrp_anchors: Vec<(f64, f64)>,
    /// Bounds of the transmit power, dBm.
    pub tx_power_min: f64,
    pub tx_power_max: f64,
    /// Device draw below `stage_threshold_dbm`, W.
    pub low_stage_w: f64,
    /// Transmit power at which the high amplification stage engages, dBm.
    pub stage_threshold_dbm: f64,
    /// Device draw at the threshold and at `tx_power_max`, W.
    pub high_stage_w: (f64, f64),
    /// Device draw while not transmitting, W.
    pub idle_w: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            rsrp_anchors: vec![(-120.0, 23.0), (-70.0, -10.0)],
            tx_power_min: -40.0,
            tx_power_max: 23.0,
            low_stage_w: 0.6,
            stage_threshold_dbm: 10.0,
            high_stage_w: (1.0, 2.5),
            idle_w: 0.0,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        if self.rsrp_anchors.len() < 2 {
            return Err(Error::config("power model needs at least two RSRP anchors"));
        }
        let ok = self
            .rsrp_anchors
            .windows(2)
            .all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1);
        if !ok {
            return Err(Error::config(
                "RSRP anchors must be sorted by RSRP with non-increasing transmit power",
            ));
        }
        if !(self.tx_power_min < self.tx_power_max)
            || !(self.stage_threshold_dbm < self.tx_power_max)
        {
            return Err(Error::config("transmit power bounds are inconsistent"));
        }
        let (h0, h1) = self.high_stage_w;
        if !(self.low_stage_w > 0.0 && self.low_stage_w <= h0 && h0 <= h1) || !(self.idle_w >= 0.0) {
            return Err(Error::config("device power stages must be positive and non-decreasing"));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(json)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// Transmit power in dBm needed at `rsrp` dBm.
    pub fn tx_power_from_rsrp(&self, rsrp: f64) -> f64 {
        let a = &self.rsrp_anchors;
        let i = a.partition_point(|p| p.0 <= rsrp).clamp(1, a.len() - 1);
        let ((x0, y0), (x1, y1)) = (a[i - 1], a[i]);
        let p = y0 + (rsrp - x0) * (y1 - y0) / (x1 - x0);
        p.clamp(self.tx_power_min, self.tx_power_max)
    }

    /// Device power draw in W while transmitting at `tx_power` dBm.
    pub fn device_power(&self, tx_power: f64) -> f64 {
        if tx_power < self.stage_threshold_dbm {
            return self.low_stage_w;
        }
        let (h0, h1) = self.high_stage_w;
        let f = ((tx_power - self.stage_threshold_dbm) / (self.tx_power_max - self.stage_threshold_dbm))
            .clamp(0.0, 1.0);
        h0 + f * (h1 - h0)
    }

    /// Energy in J of transmitting for `duration` s at `rsrp` dBm.
    pub fn tx_energy(&self, rsrp: f64, duration: f64) -> f64 {
        self.device_power(self.tx_power_from_rsrp(rsrp)) * duration
    }
}

/// Energy in J at constant power `watts` for `duration` s.
pub fn energy(watts: f64, duration: f64) -> f64 {
    watts * duration
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_and_clamps() {
        let m = PowerModel::default();
        m.validate().unwrap();
        assert_eq!(m.tx_power_from_rsrp(-70.0), -10.0);
        assert_eq!(m.tx_power_from_rsrp(-120.0), 23.0);
        assert_eq!(m.tx_power_from_rsrp(-140.0), 23.0);
        assert_eq!(m.tx_power_from_rsrp(-20.0), -40.0);
        assert!((m.tx_power_from_rsrp(-95.0) - 6.5).abs() < 1e-12);
    }

    #[test]
    fn device_stages() {
        let m = PowerModel::default();
        assert_eq!(m.device_power(0.0), 0.6);
        assert_eq!(m.device_power(10.0), 1.0);
        assert_eq!(m.device_power(23.0), 2.5);
        assert_eq!(energy(1.5, 2.0), 3.0);
    }

    #[test]
    fn monotone_in_rsrp() {
        let m = PowerModel::default();
        let mut last = f64::INFINITY;
        for i in 0..200 {
            let p = m.device_power(m.tx_power_from_rsrp(-150.0 + i as f64 * 0.6));
            assert!(p <= last && p > 0.0);
            last = p;
        }
    }
}
