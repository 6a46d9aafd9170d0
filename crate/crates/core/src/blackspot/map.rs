//! Black-spot maps: membership queries, persistence and run statistics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ellipse::BlackSpotEllipse;
use crate::error::{Error, Result};
use crate::geo::{GeoOrigin, Point};
use crate::trace::DriveTrace;

/// Absolute slack on bounding boxes so the prefilter never rejects a boundary point.
const BOX_SLACK_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
struct BoundingBox {
    min: Point,
    max: Point,
}

impl BoundingBox {
    fn of(e: &BlackSpotEllipse) -> Self {
        let (hx, hy) = e.half_extents();
        let pad = Point::new(hx + BOX_SLACK_M, hy + BOX_SLACK_M);
        Self {
            min: e.center - pad,
            max: e.center + pad,
        }
    }

    fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Operator-specific set of regions with untrustworthy predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MapDoc", into = "MapDoc")]
pub struct BlackSpotMap {
    pub mno_id: String,
    /// RMSE threshold the ellipses exceed, MBit/s
    pub threshold_used: f64,
    /// Frame of the planar coordinates, when known.
    pub origin: Option<GeoOrigin>,
    ellipses: Vec<BlackSpotEllipse>,
    boxes: Vec<BoundingBox>,
}

impl PartialEq for BlackSpotMap {
    fn eq(&self, other: &Self) -> bool {
        self.mno_id == other.mno_id
            && self.threshold_used == other.threshold_used
            && self.origin == other.origin
            && self.ellipses == other.ellipses
    }
}

#[derive(Serialize, Deserialize)]
struct MapDoc {
    mno: String,
    rmse_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<GeoOrigin>,
    ellipses: Vec<BlackSpotEllipse>,
}

impl TryFrom<MapDoc> for BlackSpotMap {
    type Error = Error;

    fn try_from(d: MapDoc) -> Result<Self> {
        let mut map = BlackSpotMap::new(d.mno, d.rmse_max, d.ellipses)?;
        map.origin = d.origin;
        Ok(map)
    }
}

impl From<BlackSpotMap> for MapDoc {
    fn from(m: BlackSpotMap) -> Self {
        Self {
            mno: m.mno_id,
            rmse_max: m.threshold_used,
            origin: m.origin,
            ellipses: m.ellipses,
        }
    }
}

impl BlackSpotMap {
    pub fn new(mno_id: impl Into<String>, threshold_used: f64, ellipses: Vec<BlackSpotEllipse>) -> Result<Self> {
        for (i, e) in ellipses.iter().enumerate() {
            if !e.is_valid() {
                return Err(Error::invalid(format!("ellipse {i} is malformed: {e:?}")));
            }
            if !(e.source_rmse > threshold_used) {
                return Err(Error::invalid(format!(
                    "ellipse {i} has rmse {} not above the threshold {threshold_used}",
                    e.source_rmse
                )));
            }
        }
        let boxes = ellipses.iter().map(BoundingBox::of).collect();
        Ok(Self {
            mno_id: mno_id.into(),
            threshold_used,
            origin: None,
            ellipses,
            boxes,
        })
    }

    pub fn empty(mno_id: impl Into<String>, threshold_used: f64) -> Self {
        Self::new(mno_id, threshold_used, Vec::new()).expect("empty map is valid")
    }

    pub fn with_origin(mut self, origin: GeoOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn ellipses(&self) -> &[BlackSpotEllipse] {
        &self.ellipses
    }

    pub fn is_empty(&self) -> bool {
        self.ellipses.is_empty()
    }

    /// True if any ellipse contains `p`; bounding boxes are checked first.
    pub fn contains(&self, p: Point) -> bool {
        self.boxes
            .iter()
            .zip(&self.ellipses)
            .any(|(b, e)| b.contains(p) && e.contains(p))
    }

    /// Same answer as [`contains`](Self::contains) without the prefilter.
    pub fn contains_exhaustive(&self, p: Point) -> bool {
        self.ellipses.iter().any(|e| e.contains(p))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// GeoJSON feature collection with each ellipse as a 32-gon in lon/lat.
    pub fn to_geojson(&self) -> serde_json::Value {
        let origin = self.origin.unwrap_or_default();
        let features: Vec<_> = self
            .ellipses
            .iter()
            .map(|e| {
                let mut ring: Vec<[f64; 2]> = e
                    .polygon(32)
                    .into_iter()
                    .map(|p| {
                        let (lat, lon) = origin.unproject(p);
                        [lon, lat]
                    })
                    .collect();
                ring.push(ring[0]);
                serde_json::json!({
                    "type": "Feature",
                    "geometry": { "type": "Polygon", "coordinates": [ring] },
                    "properties": {
                        "rmse": e.source_rmse,
                        "a": e.semi_major,
                        "b": e.semi_minor,
                        "rot": e.rotation,
                    },
                })
            })
            .collect();
        serde_json::json!({
            "type": "FeatureCollection",
            "properties": { "mno": self.mno_id, "rmse_max": self.threshold_used },
            "features": features,
        })
    }
}

pub fn in_black_spot(p: Point, map: &BlackSpotMap) -> bool {
    map.contains(p)
}

/// One contiguous stretch of a drive spent inside black spots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackSpotRun {
    pub first: usize,
    pub last: usize,
    /// m
    pub distance: f64,
    /// s
    pub duration: f64,
}

/// Distances and durations of all in-black-spot runs of a drive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlackSpotStatistics {
    pub runs: Vec<BlackSpotRun>,
}

impl BlackSpotStatistics {
    pub fn distances(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.distance).collect()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.duration).collect()
    }

    pub fn distance_ecdf(&self) -> Vec<(f64, f64)> {
        crate::stats::ecdf(&self.distances())
    }

    pub fn duration_ecdf(&self) -> Vec<(f64, f64)> {
        crate::stats::ecdf(&self.durations())
    }
}

/// Measures each maximal run of consecutive snapshots inside the map.
///
/// A run spanning snapshots `i..=j` covers the path and time from `i` to `j`.
pub fn black_spot_statistics(trace: &DriveTrace, map: &BlackSpotMap) -> BlackSpotStatistics {
    let snaps = trace.snapshots();
    let inside: Vec<bool> = snaps.iter().map(|s| map.contains(s.position)).collect();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < snaps.len() {
        if !inside[i] {
            i += 1;
            continue;
        }
        let first = i;
        while i + 1 < snaps.len() && inside[i + 1] {
            i += 1;
        }
        let distance = snaps[first..=i]
            .windows(2)
            .map(|w| w[0].position.distance(w[1].position))
            .sum();
        runs.push(BlackSpotRun {
            first,
            last: i,
            distance,
            duration: snaps[i].timestamp - snaps[first].timestamp,
        });
        i += 1;
    }
    BlackSpotStatistics { runs }
}
