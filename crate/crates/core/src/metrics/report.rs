//! Scheme comparison summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::EpochResult;
use crate::stats::Quartiles;

/// Results of one scheme, e.g. one epoch result per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunGroup {
    pub scheme: String,
    /// Identifies the shared configuration; groups should agree on it.
    pub config_tag: String,
    pub results: Vec<EpochResult>,
}

/// Relative change of each mean against the baseline; −0.5 is half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub data_rate: Option<f64>,
    pub prbs: Option<f64>,
    pub energy: Option<f64>,
    pub aoi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub config_tag: String,
    pub runs: usize,
    pub data_rate: Quartiles,
    pub prbs: Quartiles,
    pub energy: Quartiles,
    pub aoi: Quartiles,
    pub delta_vs_baseline: Deltas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparativeReport {
    pub baseline: String,
    pub schemes: Vec<SchemeSummary>,
    /// Schemes whose config tag differs from the baseline's.
    pub mismatched_configs: Vec<String>,
    pub notes: Vec<String>,
}

fn relative(value: f64, base: f64) -> Option<f64> {
    (base != 0.0).then(|| (value - base) / base)
}

/// Quartiles per scheme and relative deltas against `periodic` (or the first group).
pub fn comparative_report(groups: &[RunGroup]) -> Result<ComparativeReport> {
    if groups.len() < 2 {
        return Err(Error::invalid("a comparison needs at least two schemes"));
    }
    if let Some(g) = groups.iter().find(|g| g.results.is_empty()) {
        return Err(Error::invalid(format!("scheme {} has no results", g.scheme)));
    }
    let base = groups.iter().find(|g| g.scheme == "periodic").unwrap_or(&groups[0]);
    let quartiles = |g: &RunGroup, f: fn(&EpochResult) -> f64| {
        Quartiles::of(&g.results.iter().map(f).collect::<Vec<_>>()).expect("non-empty group")
    };
    let rate = |e: &EpochResult| e.mean_data_rate;
    let prbs = |e: &EpochResult| e.total_prbs as f64;
    let energy = |e: &EpochResult| e.total_energy;
    let aoi = |e: &EpochResult| e.mean_aoi;
    let b = [
        quartiles(base, rate).mean,
        quartiles(base, prbs).mean,
        quartiles(base, energy).mean,
        quartiles(base, aoi).mean,
    ];

    let schemes = groups
        .iter()
        .map(|g| {
            let (r, p, e, a) = (quartiles(g, rate), quartiles(g, prbs), quartiles(g, energy), quartiles(g, aoi));
            SchemeSummary {
                scheme: g.scheme.clone(),
                config_tag: g.config_tag.clone(),
                runs: g.results.len(),
                delta_vs_baseline: Deltas {
                    data_rate: relative(r.mean, b[0]),
                    prbs: relative(p.mean, b[1]),
                    energy: relative(e.mean, b[2]),
                    aoi: relative(a.mean, b[3]),
                },
                data_rate: r,
                prbs: p,
                energy: e,
                aoi: a,
            }
        })
        .collect();
    let mismatched_configs = groups
        .iter()
        .filter(|g| g.config_tag != base.config_tag)
        .map(|g| g.scheme.clone())
        .collect();
    Ok(ComparativeReport {
        baseline: base.scheme.clone(),
        schemes,
        mismatched_configs,
        notes: vec![
            "PRBs assume every requested resource block is granted; they are a lower bound.".into(),
            "PRB·subframes spread each transmission over its 1 ms subframes, ceil(bits_sf · N_prb / TBS(cqi, N_prb)) per subframe.".into(),
            "Achieved rates come from a log-normal residual model, not a protocol simulation.".into(),
        ],
    })
}

impl ComparativeReport {
    pub fn scheme(&self, name: &str) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|s| s.scheme == name)
    }

    /// Box-plot table: one row per scheme and metric.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scheme", "metric", "min", "q1", "median", "q3", "max", "mean", "delta_vs_baseline"])?;
        for s in &self.schemes {
            let d = s.delta_vs_baseline;
            let rows = [
                ("data_rate", &s.data_rate, d.data_rate),
                ("prbs", &s.prbs, d.prbs),
                ("energy", &s.energy, d.energy),
                ("aoi", &s.aoi, d.aoi),
            ];
            for (metric, q, delta) in rows {
                out.write_record([
                    s.scheme.clone(),
                    metric.to_string(),
                    q.min.to_string(),
                    q.q1.to_string(),
                    q.median.to_string(),
                    q.q3.to_string(),
                    q.max.to_string(),
                    q.mean.to_string(),
                    delta.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(rate: f64, prbs: u64) -> EpochResult {
        EpochResult {
            epoch: 1,
            mean_data_rate: rate,
            mean_aoi: 10.0,
            max_aoi: 10.0,
            total_prbs: prbs,
            total_energy: 5.0,
            tx_count: 3,
            deadline_violations: 0,
            blackspot_tx: 0,
            bytes_sent: 1.0,
            bytes_generated: 1.0,
            tx_time: 1.0,
        }
    }

    fn group(scheme: &str, tag: &str, prbs: u64) -> RunGroup {
        RunGroup {
            scheme: scheme.into(),
            config_tag: tag.into(),
            results: vec![result(4.0, prbs), result(6.0, prbs)],
        }
    }

    #[test]
    fn identical_runs_have_zero_deltas() {
        let r = comparative_report(&[group("periodic", "x", 100), group("bscb", "x", 100)]).unwrap();
        let d = r.scheme("bscb").unwrap().delta_vs_baseline;
        assert_eq!((d.data_rate, d.prbs, d.energy, d.aoi), (Some(0.0), Some(0.0), Some(0.0), Some(0.0)));
        assert!(r.mismatched_configs.is_empty());
    }

    #[test]
    fn half_the_prbs_is_minus_fifty_percent() {
        let r = comparative_report(&[group("bscb", "x", 50), group("periodic", "y", 100)]).unwrap();
        assert_eq!(r.baseline, "periodic");
        assert_eq!(r.scheme("bscb").unwrap().delta_vs_baseline.prbs, Some(-0.5));
        assert_eq!(r.mismatched_configs, vec!["bscb".to_string()]);
    }

    #[test]
    fn needs_two_schemes() {
        assert!(comparative_report(&[group("periodic", "x", 1)]).is_err());
    }
}
