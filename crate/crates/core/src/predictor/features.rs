use crate::seed::fnv1a;
use crate::trace::ContextSnapshot;

pub const FEATURE_COUNT: usize = 10;

/// Feature order of [`extract_features`]. Stable; persisted models refer to it.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "rsrp",
    "rsrq",
    "sinr",
    "cqi",
    "ta",
    "carrier_freq",
    "velocity",
    "cell_id_hash",
    "payload_size",
    "time_of_day",
];

pub const PAYLOAD_INDEX: usize = 8;

pub type Features = [f64; FEATURE_COUNT];

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Maps a cell identifier to `[0, 1)`; the empty identifier maps to 0.
pub fn cell_id_hash(cell_id: &str) -> f64 {
    if cell_id.is_empty() {
        return 0.0;
    }
    (fnv1a(cell_id.as_bytes()) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn extract_features(s: &ContextSnapshot) -> Features {
    [
        s.rsrp,
        s.rsrq,
        s.sinr,
        f64::from(s.cqi),
        f64::from(s.ta),
        s.carrier_freq,
        s.velocity,
        cell_id_hash(&s.cell_id),
        s.payload_size,
        s.timestamp.rem_euclid(SECONDS_PER_DAY),
    ]
}
