//! CQI → MCS → TBS lookup for uplink resource accounting.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PRB count of a 10 MHz carrier.
pub const DEFAULT_PRBS: u32 = 50;

/// MCS index for CQI 1..=15.
const CQI_TO_MCS: [u8; 15] = [0, 0, 2, 4, 6, 8, 11, 13, 15, 18, 20, 22, 24, 26, 28];

/// PUSCH TBS index for MCS 0..=28.
const MCS_TO_ITBS: [u8; 29] = [
    0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 19, 20, 21, 22, 23, 24,
    25, 26,
];

/// Transport block bits at 50 PRBs for TBS index 0..=26.
const TBS_50_PRB: [u32; 27] = [
    1384, 1800, 2216, 2856, 3496, 4392, 5160, 6200, 6968, 7992, 8760, 9912, 11448, 12960, 14112,
    15264, 16416, 18336, 19848, 21384, 22920, 25456, 27376, 28336, 30576, 31704, 36696,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceLookupTable {
    /// MCS index for CQI 1..=15.
    pub cqi_to_mcs: Vec<u8>,
    /// TBS index per MCS index.
    pub mcs_to_tbs_index: Vec<u8>,
    /// Transport block bits per TBS index, keyed by PRB count.
    pub tbs_bits: BTreeMap<u32, Vec<u32>>,
    /// PRBs available per subframe.
    pub bandwidth_prbs: u32,
}

impl Default for ResourceLookupTable {
    fn default() -> Self {
        Self {
            cqi_to_mcs: CQI_TO_MCS.to_vec(),
            mcs_to_tbs_index: MCS_TO_ITBS.to_vec(),
            tbs_bits: BTreeMap::from([(DEFAULT_PRBS, TBS_50_PRB.to_vec())]),
            bandwidth_prbs: DEFAULT_PRBS,
        }
    }
}

impl ResourceLookupTable {
    pub fn validate(&self) -> Result<()> {
        if self.cqi_to_mcs.len() != 15 {
            return Err(Error::config("cqi_to_mcs needs 15 entries (CQI 1..=15)"));
        }
        if let Some(m) = self.cqi_to_mcs.iter().find(|&&m| m as usize >= self.mcs_to_tbs_index.len()) {
            return Err(Error::config(format!("MCS {m} has no TBS index")));
        }
        if !self.tbs_bits.contains_key(&self.bandwidth_prbs) {
            return Err(Error::config(format!("no TBS column for {} PRBs", self.bandwidth_prbs)));
        }
        let monotone = |v: &[u8]| v.windows(2).all(|w| w[0] <= w[1]);
        if !monotone(&self.cqi_to_mcs) || !monotone(&self.mcs_to_tbs_index) {
            return Err(Error::config("CQI/MCS maps must be non-decreasing"));
        }
        let max_itbs = *self.mcs_to_tbs_index.iter().max().unwrap_or(&0) as usize;
        for (prbs, col) in &self.tbs_bits {
            if col.len() <= max_itbs || col.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::config(format!(
                    "TBS column for {prbs} PRBs must cover index {max_itbs} and be non-decreasing"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(json)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// Transport block bits for `cqi` on `prbs` resource blocks; 0 for CQI 0.
    pub fn cqi_to_tbs(&self, cqi: u8, prbs: u32) -> Result<u32> {
        if cqi > 15 {
            return Err(Error::invalid(format!("CQI {cqi} outside 0..=15")));
        }
        let column = self
            .tbs_bits
            .get(&prbs)
            .ok_or_else(|| Error::invalid(format!("no TBS entry for {prbs} PRBs")))?;
        if cqi == 0 {
            return Ok(0);
        }
        let mcs = self.cqi_to_mcs[cqi as usize - 1] as usize;
        Ok(column[self.mcs_to_tbs_index[mcs] as usize])
    }

    /// PRB·subframes needed to carry `bits` at `cqi` within `duration` seconds.
    ///
    /// The bits are spread evenly over the event's 1 ms subframes and each
    /// subframe is charged `ceil(bits_sf / tbs_per_prb(cqi))` PRBs, where
    /// `tbs_per_prb = TBS(cqi, N_prb) / N_prb`. A slow transmission therefore
    /// pays the PRB granularity in every subframe it stays active. An event
    /// never takes fewer subframes than the full bandwidth needs. CQI 0 is
    /// charged as CQI 1, since the data was sent regardless.
    pub fn prb_subframes(&self, bits: u64, cqi: u8, duration: f64) -> u64 {
        if bits == 0 {
            return 0;
        }
        let n = self.bandwidth_prbs as u64;
        let tbs = self.cqi_to_tbs(cqi.clamp(1, 15), self.bandwidth_prbs).expect("validated table") as u64;
        let wall = if duration.is_finite() && duration > 0.0 {
            (duration * 1000.0 - 1e-9).ceil().max(1.0) as u64
        } else {
            1
        };
        let subframes = wall.max(bits.div_ceil(tbs));
        let (q, r) = (bits / subframes, bits % subframes);
        let per = |b: u64| (b * n).div_ceil(tbs);
        r * per(q + 1) + (subframes - r) * per(q)
    }
}

/// Anything that occupied the uplink for a known number of bits at a known CQI.
pub trait Transmission {
    fn bits(&self) -> u64;
    fn cqi(&self) -> u8;
    /// s
    fn duration(&self) -> f64;
}

/// Total PRB·subframes of a sequence of transmissions.
pub fn resource_occupation<'a, T: Transmission + 'a>(
    events: impl IntoIterator<Item = &'a T>,
    table: &ResourceLookupTable,
) -> u64 {
    events
        .into_iter()
        .map(|e| table.prb_subframes(e.bits(), e.cqi(), e.duration()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Ev(u64, u8);

    impl Transmission for Ev {
        fn bits(&self) -> u64 {
            self.0
        }
        fn cqi(&self) -> u8 {
            self.1
        }
        fn duration(&self) -> f64 {
            0.001
        }
    }

    #[test]
    fn default_table_is_valid() {
        ResourceLookupTable::default().validate().unwrap();
    }

    #[test]
    fn lookup_values() {
        let t = ResourceLookupTable::default();
        assert_eq!(t.cqi_to_tbs(15, 50).unwrap(), 36696);
        assert_eq!(t.cqi_to_tbs(1, 50).unwrap(), 1384);
        assert_eq!(t.cqi_to_tbs(0, 50).unwrap(), 0);
        assert!(t.cqi_to_tbs(7, 25).is_err());
        assert!(t.cqi_to_tbs(16, 50).is_err());
        let sweep: Vec<u32> = (1..=15).map(|c| t.cqi_to_tbs(c, 50).unwrap()).collect();
        assert!(sweep.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn one_block_costs_the_full_bandwidth() {
        let t = ResourceLookupTable::default();
        assert_eq!(t.prb_subframes(36696, 15, 0.001), 50);
        assert_eq!(t.prb_subframes(36697, 15, 0.001), 51);
        assert_eq!(t.prb_subframes(0, 15, 1.0), 0);
        assert!(t.prb_subframes(80_000, 5, 0.01) >= t.prb_subframes(80_000, 15, 0.01));
        assert_eq!(resource_occupation::<Ev>([], &t), 0);
        let evs = [Ev(36696, 15), Ev(36696, 15)];
        assert_eq!(resource_occupation(&evs, &t), 100);
    }

    #[test]
    fn slow_events_pay_granularity_per_subframe() {
        let t = ResourceLookupTable::default();
        // 1000 bits per subframe need ceil(1000 * 50 / 36696) = 2 PRBs each.
        assert_eq!(t.prb_subframes(1_000_000, 15, 1.0), 2000);
        // Without a duration the event is as short as the bandwidth allows:
        // 28 subframes of about 35714 bits, 49 PRBs each.
        assert_eq!(t.prb_subframes(1_000_000, 15, 0.0), 28 * 49);
    }
}
