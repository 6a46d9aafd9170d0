//! Reproducible synthetic drive traces.
//!
//! A scenario has two random sources. The *layout* seed fixes the road
//! geometry, base stations, connectivity hotspots, shadowing and the planted
//! error regions, so repeated drives see the same world. The *noise* seed
//! fixes everything that differs between drives: start time, speed profile,
//! fast fading, measurement payloads and label noise.
//!
//! Ground-truth labels follow
//! `S = rate_cap * sigmoid((sinr - sinr_offset) / sinr_scale) * sat(payload) * congestion(s) + noise`
//! with `sat(p) = p / (p + payload_half_saturation)`. Inside a planted error
//! region the rate is additionally scaled by a uniform factor in
//! `[error_region_floor, 1]`, modelling link disruptions no context feature
//! explains.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoOrigin, Point};
use crate::seed;
use crate::trace::{ContextSnapshot, DriveTrace};

/// Data-rate multiplier applying from `from_m` (arc length) until the next segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongestionSegment {
    pub from_m: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenarioConfig {
    /// m
    pub track_length: f64,
    /// m/s
    pub mean_speed: f64,
    pub hotspot_count: usize,
    pub noise_seed: u64,
    pub layout_seed: u64,
    /// Piecewise-constant multiplier over arc length; 1.0 before the first segment.
    pub congestion_profile: Vec<CongestionSegment>,
    /// Planted regions of unexplained rate disruptions.
    pub error_region_count: usize,
    /// m
    pub error_region_length: f64,
    /// Lower bound of the disruption factor.
    pub error_region_floor: f64,
    /// s
    pub sample_interval: f64,
    /// m
    pub cell_spacing: f64,
    pub mno_id: String,
    /// MBit/s
    pub rate_cap: f64,
    pub sinr_offset: f64,
    pub sinr_scale: f64,
    /// dB, SINR offset at a reference RSRP of -110 dBm
    pub sinr_base: f64,
    /// dB added to the SINR at a hotspot center
    pub hotspot_gain: f64,
    /// bytes
    pub payload_half_saturation: f64,
    /// bytes, measurement payloads are log-uniform in this range
    pub payload_min: f64,
    pub payload_max: f64,
    /// MBit/s standard deviation of the additive label noise
    pub label_noise: f64,
    /// Seconds of day at which the drive starts; drawn from the noise seed when absent.
    pub start_time: Option<f64>,
    pub origin: GeoOrigin,
}

impl Default for SyntheticScenarioConfig {
    fn default() -> Self {
        Self {
            track_length: 20_000.0,
            mean_speed: 15.0,
            hotspot_count: 10,
            noise_seed: 1,
            layout_seed: 7,
            congestion_profile: vec![
                CongestionSegment { from_m: 0.0, multiplier: 1.0 },
                CongestionSegment { from_m: 4_000.0, multiplier: 0.7 },
                CongestionSegment { from_m: 7_500.0, multiplier: 0.95 },
                CongestionSegment { from_m: 12_000.0, multiplier: 0.6 },
                CongestionSegment { from_m: 15_000.0, multiplier: 0.9 },
            ],
            error_region_count: 8,
            error_region_length: 100.0,
            error_region_floor: 0.05,
            sample_interval: 1.0,
            cell_spacing: 1_200.0,
            mno_id: "A".into(),
            rate_cap: 25.0,
            sinr_offset: 0.0,
            sinr_scale: 10.0,
            sinr_base: 3.0,
            hotspot_gain: 12.0,
            payload_half_saturation: 1_000_000.0,
            payload_min: 250_000.0,
            payload_max: 6_000_000.0,
            label_noise: 0.5,
            start_time: None,
            origin: GeoOrigin::default(),
        }
    }
}

impl SyntheticScenarioConfig {
    /// The fixed scenario used for convergence, trade-off and comparison runs.
    pub fn stationary() -> Self {
        Self::default()
    }

    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        self.noise_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("track_length", self.track_length),
            ("mean_speed", self.mean_speed),
            ("sample_interval", self.sample_interval),
            ("cell_spacing", self.cell_spacing),
            ("rate_cap", self.rate_cap),
            ("sinr_scale", self.sinr_scale),
            ("payload_half_saturation", self.payload_half_saturation),
            ("payload_min", self.payload_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("synthetic.{name} must be > 0, got {v}")));
            }
        }
        if self.payload_max < self.payload_min {
            return Err(Error::config("synthetic.payload_max must be >= payload_min"));
        }
        if !(self.label_noise >= 0.0) || !(self.error_region_length >= 0.0) {
            return Err(Error::config("synthetic noise and region lengths must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.error_region_floor) {
            return Err(Error::config("synthetic.error_region_floor must be in [0, 1]"));
        }
        if self.congestion_profile.iter().any(|c| !(c.multiplier >= 0.0)) {
            return Err(Error::config("congestion multipliers must be >= 0"));
        }
        Ok(())
    }

    pub fn congestion_at(&self, arc: f64) -> f64 {
        self.congestion_profile
            .iter()
            .filter(|c| c.from_m <= arc)
            .max_by(|a, b| a.from_m.total_cmp(&b.from_m))
            .map_or(1.0, |c| c.multiplier)
    }

    /// Payload saturation of the ground-truth function.
    pub fn payload_saturation(&self, payload: f64) -> f64 {
        payload / (payload + self.payload_half_saturation)
    }
}

#[derive(Debug, Clone)]
struct Sinusoid {
    amplitude: f64,
    wavelength: f64,
    phase: f64,
}

impl Sinusoid {
    fn random(rng: &mut impl Rng, amplitude: f64, wavelengths: (f64, f64)) -> Self {
        Self {
            amplitude,
            wavelength: rng.random_range(wavelengths.0..wavelengths.1),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    fn at(&self, s: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * s / self.wavelength + self.phase).sin()
    }
}

#[derive(Debug, Clone)]
struct BaseStation {
    position: Point,
    cell_id: String,
    carrier_freq: f64,
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    center: f64,
    width: f64,
}

/// Position-dependent part of a scenario, shared by all drives.
#[derive(Debug, Clone)]
pub struct ScenarioLayout {
    track: Vec<Point>,
    step: f64,
    stations: Vec<BaseStation>,
    hotspots: Vec<Bump>,
    error_regions: Vec<(f64, f64)>,
    shadowing: Vec<Sinusoid>,
}

const TRACK_STEP_M: f64 = 5.0;

impl ScenarioLayout {
    pub fn new(cfg: &SyntheticScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seed::rng(cfg.layout_seed, 0x1a);
        let heading0 = rng.random_range(0.0..std::f64::consts::TAU);
        let turns: Vec<Sinusoid> = [0.6, 0.4, 0.25]
            .into_iter()
            .map(|a| Sinusoid::random(&mut rng, a, (1_500.0, 6_000.0)))
            .collect();
        let n = (cfg.track_length / TRACK_STEP_M).ceil() as usize + 2;
        let mut track = Vec::with_capacity(n);
        let mut p = Point::default();
        for i in 0..n {
            track.push(p);
            let s = i as f64 * TRACK_STEP_M;
            let heading = heading0 + turns.iter().map(|t| t.at(s)).sum::<f64>();
            p = p + Point::new(heading.cos(), heading.sin()) * TRACK_STEP_M;
        }
        let mut layout = Self {
            track,
            step: TRACK_STEP_M,
            stations: Vec::new(),
            hotspots: Vec::new(),
            error_regions: Vec::new(),
            shadowing: Vec::new(),
        };

        let n_cells = (cfg.track_length / cfg.cell_spacing).ceil() as usize;
        for k in 0..n_cells {
            let s = (k as f64 + 0.5 + rng.random_range(-0.2..0.2)) * cfg.cell_spacing;
            let side = if k % 2 == 0 { 1.0 } else { -1.0 };
            let offset = rng.random_range(150.0..600.0) * side;
            let freq = [800.0, 1800.0, 2600.0][rng.random_range(0..3)];
            layout.stations.push(BaseStation {
                position: layout.at(s) + layout.normal(s) * offset,
                cell_id: format!("{}-{:04}", cfg.mno_id, 1000 + k),
                carrier_freq: freq,
            });
        }
        for _ in 0..cfg.hotspot_count {
            layout.hotspots.push(Bump {
                center: rng.random_range(0.0..cfg.track_length),
                width: rng.random_range(100.0..250.0),
            });
        }
        // Error regions are spread over equal-length strata so they do not overlap.
        let strata = cfg.track_length / cfg.error_region_count.max(1) as f64;
        for k in 0..cfg.error_region_count {
            let half = cfg.error_region_length / 2.0;
            let lo = k as f64 * strata + half;
            let hi = ((k + 1) as f64 * strata - half).max(lo + f64::EPSILON);
            let c = rng.random_range(lo..hi);
            layout.error_regions.push((c - half, c + half));
        }
        layout.shadowing = [2.5, 2.0, 1.5]
            .into_iter()
            .map(|a| Sinusoid::random(&mut rng, a, (120.0, 700.0)))
            .collect();
        Ok(layout)
    }

    /// Point on the road at arc length `s`.
    pub fn at(&self, s: f64) -> Point {
        let u = (s / self.step).max(0.0);
        let i = (u.floor() as usize).min(self.track.len() - 2);
        let f = (u - i as f64).min(1.0);
        self.track[i] + (self.track[i + 1] - self.track[i]) * f
    }

    fn normal(&self, s: f64) -> Point {
        let d = self.at(s + self.step) - self.at(s);
        let n = d.norm().max(f64::EPSILON);
        Point::new(-d.y / n, d.x / n)
    }

    /// Arc-length intervals of the planted error regions.
    pub fn error_regions(&self) -> &[(f64, f64)] {
        &self.error_regions
    }

    pub fn in_error_region(&self, s: f64) -> bool {
        self.error_regions.iter().any(|&(a, b)| s >= a && s <= b)
    }

    fn hotspot_level(&self, s: f64) -> f64 {
        self.hotspots
            .iter()
            .map(|h| (-(s - h.center).powi(2) / (2.0 * h.width * h.width)).exp())
            .fold(0.0, f64::max)
    }

    fn serving(&self, p: Point) -> (&BaseStation, f64) {
        self.stations
            .iter()
            .map(|b| (b, b.position.distance(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one base station")
    }
}

/// SINR thresholds (dB) at which CQI 1..=15 become usable.
const CQI_THRESHOLDS: [f64; 15] = [
    -6.7, -4.7, -2.3, 0.2, 2.4, 4.3, 5.9, 8.1, 10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7,
];

pub fn cqi_from_sinr(sinr: f64) -> u8 {
    CQI_THRESHOLDS.iter().take_while(|&&t| sinr >= t).count() as u8
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Timing-advance step in meters (16 Ts of round-trip time).
const TA_STEP_M: f64 = 78.12;

pub fn generate_synthetic_trace(cfg: &SyntheticScenarioConfig) -> Result<DriveTrace> {
    let layout = ScenarioLayout::new(cfg)?;
    generate_on_layout(cfg, &layout)
}

/// Generates one drive over an already built layout.
pub fn generate_on_layout(cfg: &SyntheticScenarioConfig, layout: &ScenarioLayout) -> Result<DriveTrace> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.noise_seed, 0x2b);
    let start = cfg
        .start_time
        .unwrap_or_else(|| (rng.random_range(7.0..19.0) * 3600.0_f64).round());
    let speed_wave = Sinusoid::random(&mut rng, 0.25, (300.0, 900.0));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (ln_min, ln_max) = (cfg.payload_min.ln(), cfg.payload_max.ln());

    let mut snapshots = Vec::new();
    let mut labels = Vec::new();
    let mut s = 0.0;
    let mut t = start;
    while s <= cfg.track_length {
        let position = layout.at(s);
        let (station, distance) = layout.serving(position);
        let hot = layout.hotspot_level(s);
        let shadow: f64 = layout.shadowing.iter().map(|w| w.at(s)).sum();

        let rsrp = (-5.0 - 35.0 * distance.max(10.0).log10() + shadow + 6.0 * hot
            + 1.5 * unit.sample(&mut rng))
        .clamp(-140.0, -44.0);
        let sinr = (0.55 * (rsrp + 110.0) + cfg.sinr_base + cfg.hotspot_gain * hot + 0.5 * shadow
            + 2.0 * unit.sample(&mut rng))
        .clamp(-10.0, 30.0);
        let rsrq = (-12.0 + 0.35 * sinr + 0.5 * unit.sample(&mut rng)).clamp(-20.0, -3.0);
        let velocity = (cfg.mean_speed * (1.0 + speed_wave.at(t - start))
            + 0.5 * unit.sample(&mut rng))
        .max(0.5);
        let payload = rng.random_range(ln_min..=ln_max).exp().round();

        let mut rate = cfg.rate_cap
            * sigmoid((sinr - cfg.sinr_offset) / cfg.sinr_scale)
            * cfg.payload_saturation(payload)
            * cfg.congestion_at(s);
        let disruption: f64 = rng.random_range(cfg.error_region_floor..=1.0);
        if layout.in_error_region(s) {
            rate *= disruption;
        }
        rate += cfg.label_noise * unit.sample(&mut rng);

        snapshots.push(ContextSnapshot {
            timestamp: t,
            position,
            rsrp,
            rsrq,
            sinr,
            cqi: cqi_from_sinr(sinr),
            ta: (distance / TA_STEP_M).round() as u32,
            carrier_freq: station.carrier_freq,
            velocity,
            cell_id: station.cell_id.clone(),
            payload_size: payload,
        });
        labels.push(Some(rate.max(0.05)));

        t += cfg.sample_interval;
        s += velocity * cfg.sample_interval;
    }
    DriveTrace::new(cfg.mno_id.clone(), cfg.origin, snapshots, labels)
}

/// Independent drives over one layout; drive `k` uses noise stream `k` of `base_seed`.
pub fn generate_drives(cfg: &SyntheticScenarioConfig, base_seed: u64, count: usize) -> Result<Vec<DriveTrace>> {
    let layout = ScenarioLayout::new(cfg)?;
    (0..count)
        .map(|k| {
            let drive = cfg.clone().with_noise_seed(seed::mix(base_seed, 0xd00 + k as u64));
            generate_on_layout(&drive, &layout)
        })
        .collect()
}
