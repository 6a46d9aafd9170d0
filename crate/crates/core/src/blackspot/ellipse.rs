//! Rotated ellipses and their fit to point clusters.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::geo::Point;

/// How far a fitted ellipse reaches along its axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    /// Farthest member projection, inflated until every member is inside.
    #[default]
    Max,
    /// Two standard deviations along each principal axis.
    #[serde(rename = "2sigma")]
    TwoSigma,
}

/// Rotated ellipse `(c·vx + s·vy)²/a² + (s·vx − c·vy)²/b² ≤ 1` with
/// `v = p − center`, `c = cos(rotation)`, `s = sin(rotation)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "EllipseDoc", into = "EllipseDoc")]
pub struct BlackSpotEllipse {
    pub center: Point,
    /// m
    pub semi_major: f64,
    /// m
    pub semi_minor: f64,
    /// radians in [-π/2, π/2)
    pub rotation: f64,
    /// RMSE of the cluster the ellipse was fitted to, MBit/s
    pub source_rmse: f64,
}

#[derive(Serialize, Deserialize)]
struct EllipseDoc {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    rot: f64,
    rmse: f64,
}

impl From<EllipseDoc> for BlackSpotEllipse {
    fn from(d: EllipseDoc) -> Self {
        Self {
            center: Point::new(d.cx, d.cy),
            semi_major: d.a,
            semi_minor: d.b,
            rotation: d.rot,
            source_rmse: d.rmse,
        }
    }
}

impl From<BlackSpotEllipse> for EllipseDoc {
    fn from(e: BlackSpotEllipse) -> Self {
        Self {
            cx: e.center.x,
            cy: e.center.y,
            a: e.semi_major,
            b: e.semi_minor,
            rot: e.rotation,
            rmse: e.source_rmse,
        }
    }
}

/// Maps an angle onto [-π/2, π/2); an axis and its opposite are the same.
pub fn normalize_axis_angle(angle: f64) -> f64 {
    let r = (angle + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if r >= FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

impl BlackSpotEllipse {
    pub fn circle(center: Point, radius: f64, source_rmse: f64) -> Self {
        Self {
            center,
            semi_major: radius,
            semi_minor: radius,
            rotation: 0.0,
            source_rmse,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.semi_minor > 0.0
            && self.semi_major >= self.semi_minor
            && self.semi_major.is_finite()
            && (-FRAC_PI_2..FRAC_PI_2).contains(&self.rotation)
            && self.center.x.is_finite()
            && self.center.y.is_finite()
    }

    /// Left-hand side of the membership inequality; ≤ 1 means inside.
    pub fn level(&self, p: Point) -> f64 {
        let (s, c) = self.rotation.sin_cos();
        let v = p - self.center;
        let u = c * v.x + s * v.y;
        let w = s * v.x - c * v.y;
        u * u / (self.semi_major * self.semi_major) + w * w / (self.semi_minor * self.semi_minor)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.level(p) <= 1.0
    }

    /// Half widths of the axis-aligned bounding box.
    pub fn half_extents(&self) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let (a, b) = (self.semi_major, self.semi_minor);
        (
            ((a * c).powi(2) + (b * s).powi(2)).sqrt(),
            ((a * s).powi(2) + (b * c).powi(2)).sqrt(),
        )
    }

    /// `n` points on the boundary, counter-clockwise.
    pub fn polygon(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let local = Point::new(self.semi_major * t.cos(), self.semi_minor * t.sin());
                self.center + local.rotated(self.rotation)
            })
            .collect()
    }
}

pub fn point_in_ellipse(p: Point, e: &BlackSpotEllipse) -> bool {
    e.contains(p)
}

/// Fits an ellipse to member positions along their principal axis.
///
/// Semi-axes never fall below `floor`. Coincident members give a circle of
/// radius `floor`.
pub fn fit_ellipse(positions: &[Point], floor: f64, extent: Extent, source_rmse: f64) -> BlackSpotEllipse {
    let Some(center) = Point::centroid(positions) else {
        return BlackSpotEllipse::circle(Point::default(), floor, source_rmse);
    };
    let n = positions.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in positions {
        let v = *p - center;
        sxx += v.x * v.x;
        syy += v.y * v.y;
        sxy += v.x * v.y;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    if sxx + syy == 0.0 {
        return BlackSpotEllipse::circle(center, floor, source_rmse);
    }

    let rotation = normalize_axis_angle(0.5 * (2.0 * sxy).atan2(sxx - syy));
    let (s, c) = rotation.sin_cos();
    let project = |p: &Point| {
        let v = *p - center;
        ((c * v.x + s * v.y).abs(), (s * v.x - c * v.y).abs())
    };

    let (a0, b0) = match extent {
        Extent::Max => positions
            .iter()
            .map(project)
            .fold((0.0_f64, 0.0_f64), |(a, b), (u, w)| (a.max(u), b.max(w))),
        Extent::TwoSigma => {
            let half_tr = 0.5 * (sxx + syy);
            let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
            (2.0 * (half_tr + disc).sqrt(), 2.0 * (half_tr - disc).max(0.0).sqrt())
        }
    };
    let (mut a, mut b) = (a0.max(floor), b0.max(floor));
    if extent == Extent::Max {
        // Max projections alone miss members near the box corners.
        let k = positions
            .iter()
            .map(project)
            .map(|(u, w)| ((u / a).powi(2) + (w / b).powi(2)).sqrt())
            .fold(1.0_f64, f64::max);
        a *= k;
        b *= k;
    }

    let mut e = BlackSpotEllipse {
        center,
        semi_major: a,
        semi_minor: b,
        rotation,
        source_rmse,
    };
    if b > a {
        e.semi_major = b;
        e.semi_minor = a;
        e.rotation = normalize_axis_angle(rotation + FRAC_PI_2);
    }
    e
}
