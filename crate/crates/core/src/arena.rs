//! Arena geometry: stimulus zones, built-in experiment layouts, pixel to
//! millimetre calibration and area-based chance levels.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance (mm) used for on-edge membership and boundary checks.
const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ArenaError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("zone {0}: polygon needs at least 3 vertices")]
    TooFewVertices(String),
    #[error("zone {0}: polygon has zero area")]
    ZeroArea(String),
    #[error("zone {0}: polygon is self-intersecting")]
    SelfIntersecting(String),
    #[error("zone {zone}: vertex ({x}, {y}) lies outside the {width} x {height} mm arena")]
    OutsideArena {
        zone: String,
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    #[error("zones {0} and {1} overlap")]
    Overlap(String, String),
    #[error("duplicate zone id {0}")]
    DuplicateZone(String),
    #[error("unknown preset {0:?} (expected exp1a, exp1b, exp2 or exp3)")]
    UnknownPreset(String),
    #[error("degenerate calibration: corners are collinear or coincident")]
    DegenerateCalibration,
}

/// Left or right half of the apparatus (pump group / breathing side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(format!("invalid side {other:?}")),
        }
    }
}

/// The four preference metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Interface,
    Face,
    Heating,
    Breathing,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Interface,
        Metric::Face,
        Metric::Heating,
        Metric::Breathing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Interface => "interface",
            Metric::Face => "face",
            Metric::Heating => "heating",
            Metric::Breathing => "breathing",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interface" => Ok(Metric::Interface),
            "face" => Ok(Metric::Face),
            "heating" => Ok(Metric::Heating),
            "breathing" => Ok(Metric::Breathing),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

pub type Point = [f64; 2];

/// A contact area on the arena floor, in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: String,
    pub polygon: Vec<Point>,
    pub heated: bool,
    pub has_face: bool,
    pub breathing_group: Option<Side>,
}

impl Zone {
    pub fn rect(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Zone {
        Zone {
            id: id.to_string(),
            polygon: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            heated: false,
            has_face: false,
            breathing_group: None,
        }
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }

    pub fn contains(&self, p: Point) -> bool {
        point_in_polygon(p, &self.polygon)
    }

    /// Closest point of the zone (boundary or interior) to `p`.
    pub fn nearest_point(&self, p: Point) -> Point {
        if self.contains(p) {
            return p;
        }
        let n = self.polygon.len();
        let mut best = self.polygon[0];
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let q = closest_on_segment(p, self.polygon[i], self.polygon[(i + 1) % n]);
            let d = dist2(p, q);
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArenaLayout {
    pub experiment_id: String,
    pub width: f64,
    pub height: f64,
    pub zones: Vec<Zone>,
    pub breathing_period: f64,
    pub session_len: f64,
}

impl ArenaLayout {
    /// Checks every layout invariant; constructors and loaders call this.
    pub fn validate(&self) -> Result<(), ArenaError> {
        if !(self.width.is_finite() && self.width > 0.0 && self.height.is_finite() && self.height > 0.0)
        {
            return Err(ArenaError::Schema(
                "arena width and height must be positive".into(),
            ));
        }
        if !(self.breathing_period.is_finite() && self.breathing_period > 0.0) {
            return Err(ArenaError::Schema("breathing_period_s must be positive".into()));
        }
        if !(self.session_len.is_finite() && self.session_len > 0.0) {
            return Err(ArenaError::Schema("session_len_s must be positive".into()));
        }
        for (i, z) in self.zones.iter().enumerate() {
            if self.zones[..i].iter().any(|o| o.id == z.id) {
                return Err(ArenaError::DuplicateZone(z.id.clone()));
            }
            validate_polygon(z)?;
            for v in &z.polygon {
                if v[0] < -GEOM_EPS
                    || v[0] > self.width + GEOM_EPS
                    || v[1] < -GEOM_EPS
                    || v[1] > self.height + GEOM_EPS
                {
                    return Err(ArenaError::OutsideArena {
                        zone: z.id.clone(),
                        x: v[0],
                        y: v[1],
                        width: self.width,
                        height: self.height,
                    });
                }
            }
        }
        for i in 0..self.zones.len() {
            for j in i + 1..self.zones.len() {
                if interiors_overlap(&self.zones[i].polygon, &self.zones[j].polygon) {
                    return Err(ArenaError::Overlap(
                        self.zones[i].id.clone(),
                        self.zones[j].id.clone(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.id == id)
    }

    /// Index of the first zone containing `p`.
    pub fn zone_at(&self, p: Point) -> Option<usize> {
        self.zones.iter().position(|z| z.contains(p))
    }

    /// Whether a metric can be computed on this layout at all: the binary
    /// cues need both a cued and an uncued alternative.
    pub fn metric_applies(&self, metric: Metric) -> bool {
        let split = |f: &dyn Fn(&Zone) -> bool| {
            self.zones.iter().any(f) && !self.zones.iter().all(f)
        };
        match metric {
            Metric::Interface => !self.zones.is_empty(),
            Metric::Face => split(&|z| z.has_face),
            Metric::Heating => split(&|z| z.heated),
            Metric::Breathing => {
                self.zones.iter().any(|z| z.breathing_group == Some(Side::Left))
                    && self.zones.iter().any(|z| z.breathing_group == Some(Side::Right))
            }
        }
    }

    pub fn to_document(&self) -> LayoutDocument {
        LayoutDocument {
            experiment_id: Some(self.experiment_id.clone()),
            arena: ArenaDims {
                width_mm: self.width,
                height_mm: self.height,
            },
            zones: self
                .zones
                .iter()
                .map(|z| ZoneDocument {
                    id: z.id.clone(),
                    vertices_mm: z.polygon.clone(),
                    heated: z.heated,
                    has_face: z.has_face,
                    breathing_group: z.breathing_group,
                })
                .collect(),
            breathing_period_s: Some(self.breathing_period),
            session_len_s: Some(self.session_len),
        }
    }
}

/// JSON layout document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment_id: Option<String>,
    pub arena: ArenaDims,
    pub zones: Vec<ZoneDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breathing_period_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_len_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaDims {
    pub width_mm: f64,
    pub height_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneDocument {
    pub id: String,
    pub vertices_mm: Vec<Point>,
    #[serde(default)]
    pub heated: bool,
    #[serde(default)]
    pub has_face: bool,
    #[serde(default)]
    pub breathing_group: Option<Side>,
}

pub const DEFAULT_BREATHING_PERIOD: f64 = 300.0;
pub const DEFAULT_SESSION_LEN: f64 = 1800.0;

/// Builds and validates a layout from a parsed document.
pub fn load_layout(doc: LayoutDocument) -> Result<ArenaLayout, ArenaError> {
    let layout = ArenaLayout {
        experiment_id: doc.experiment_id.unwrap_or_else(|| "custom".to_string()),
        width: doc.arena.width_mm,
        height: doc.arena.height_mm,
        zones: doc
            .zones
            .into_iter()
            .map(|z| Zone {
                id: z.id,
                polygon: z.vertices_mm,
                heated: z.heated,
                has_face: z.has_face,
                breathing_group: z.breathing_group,
            })
            .collect(),
        breathing_period: doc.breathing_period_s.unwrap_or(DEFAULT_BREATHING_PERIOD),
        session_len: doc.session_len_s.unwrap_or(DEFAULT_SESSION_LEN),
    };
    layout.validate()?;
    Ok(layout)
}

/// Parses a JSON layout document and validates it.
pub fn load_layout_str(json: &str) -> Result<ArenaLayout, ArenaError> {
    let doc: LayoutDocument =
        serde_json::from_str(json).map_err(|e| ArenaError::Schema(e.to_string()))?;
    load_layout(doc)
}

/// Names of the built-in layouts.
pub const PRESETS: [&str; 4] = ["exp1a", "exp1b", "exp2", "exp3"];

pub const ARENA_WIDTH_MM: f64 = 900.0;
pub const ARENA_HEIGHT_MM: f64 = 600.0;
/// Footprint of a horizontal interface base.
pub const BASE_LONG_MM: f64 = 200.0;
pub const BASE_SHORT_MM: f64 = 100.0;
/// Area fraction of the two vertical-interface contact triangles together.
pub const EXP3_CHANCE: f64 = 0.019;

/// The experiment layouts as built-in presets. The arena is 900 x 600 mm
/// with x along the long walls; "left" is the x = 0 short wall.
pub fn preset(name: &str) -> Result<ArenaLayout, ArenaError> {
    let (w, h) = (ARENA_WIDTH_MM, ARENA_HEIGHT_MM);
    let (long, short) = (BASE_LONG_MM, BASE_SHORT_MM);
    let mid_lo = (h - long) / 2.0;
    let mid_hi = (h + long) / 2.0;
    let side_pair = || {
        let mut left = Zone::rect("left", 0.0, mid_lo, short, mid_hi);
        left.breathing_group = Some(Side::Left);
        let mut right = Zone::rect("right", w - short, mid_lo, w, mid_hi);
        right.breathing_group = Some(Side::Right);
        (left, right)
    };
    let zones = match name {
        "exp1a" => {
            let (l, r) = side_pair();
            vec![l, r]
        }
        "exp1b" => {
            // The faceplate side was counterbalanced; the preset puts it left.
            let (mut l, r) = side_pair();
            l.has_face = true;
            vec![l, r]
        }
        "exp2" => {
            let mut zones = vec![
                Zone::rect("left_bottom", 0.0, 0.0, long, short),
                Zone::rect("left_top", 0.0, h - short, long, h),
                Zone::rect("right_bottom", w - long, 0.0, w, short),
                Zone::rect("right_top", w - long, h - short, w, h),
            ];
            for z in &mut zones {
                z.has_face = true;
                z.breathing_group = Some(if z.id.starts_with("left") {
                    Side::Left
                } else {
                    Side::Right
                });
                z.heated = z.id == "left_bottom" || z.id == "right_top";
            }
            zones
        }
        "exp3" => {
            // Right isosceles triangles with the hypotenuse on the short wall
            // and the right angle (where the two panels meet) pointing inward.
            let tri_area = EXP3_CHANCE * w * h / 2.0;
            let leg = (2.0 * tri_area).sqrt();
            let half_hyp = leg / std::f64::consts::SQRT_2;
            let depth = half_hyp;
            let cy = h / 2.0;
            let left = Zone {
                id: "left".into(),
                polygon: vec![[0.0, cy - half_hyp], [depth, cy], [0.0, cy + half_hyp]],
                heated: false,
                has_face: true,
                breathing_group: Some(Side::Left),
            };
            let right = Zone {
                id: "right".into(),
                polygon: vec![[w, cy - half_hyp], [w, cy + half_hyp], [w - depth, cy]],
                heated: true,
                has_face: true,
                breathing_group: Some(Side::Right),
            };
            vec![left, right]
        }
        other => return Err(ArenaError::UnknownPreset(other.to_string())),
    };
    let layout = ArenaLayout {
        experiment_id: name.to_string(),
        width: w,
        height: h,
        zones,
        breathing_period: DEFAULT_BREATHING_PERIOD,
        session_len: DEFAULT_SESSION_LEN,
    };
    layout.validate()?;
    Ok(layout)
}

/// No-preference baseline for a metric: the fraction of the floor covered
/// by contact zones for the interface metric, one half for the binary cues.
pub fn chance_level(layout: &ArenaLayout, metric: Metric) -> f64 {
    match metric {
        Metric::Interface => {
            let covered: f64 = layout.zones.iter().map(Zone::area).sum();
            (covered / layout.area()).min(1.0)
        }
        Metric::Face | Metric::Heating | Metric::Breathing => 0.5,
    }
}

/// Shoelace area, always non-negative.
pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc / 2.0
}

/// Boundary-inclusive even-odd membership test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    if on_boundary(p, poly) {
        return true;
    }
    strictly_inside(p, poly)
}

fn on_boundary(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    (0..n).any(|i| dist2(p, closest_on_segment(p, poly[i], poly[(i + 1) % n])) <= GEOM_EPS * GEOM_EPS)
}

/// Even-odd ray cast; undefined for points on the boundary.
fn strictly_inside(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn sign(v: f64, scale: f64) -> i8 {
    if v > GEOM_EPS * scale {
        1
    } else if v < -GEOM_EPS * scale {
        -1
    } else {
        0
    }
}

/// Segments cross at a single interior point of both.
fn segments_cross_properly(a: Point, b: Point, c: Point, d: Point) -> bool {
    let scale = 1.0 + dist2(a, b).sqrt() * dist2(c, d).sqrt();
    let d1 = sign(cross(a, b, c), scale);
    let d2 = sign(cross(a, b, d), scale);
    let d3 = sign(cross(c, d, a), scale);
    let d4 = sign(cross(c, d, b), scale);
    d1 * d2 < 0 && d3 * d4 < 0
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    if segments_cross_properly(a, b, c, d) {
        return true;
    }
    let eps2 = GEOM_EPS * GEOM_EPS;
    dist2(c, closest_on_segment(c, a, b)) <= eps2
        || dist2(d, closest_on_segment(d, a, b)) <= eps2
        || dist2(a, closest_on_segment(a, c, d)) <= eps2
        || dist2(b, closest_on_segment(b, c, d)) <= eps2
}

fn validate_polygon(z: &Zone) -> Result<(), ArenaError> {
    let poly = &z.polygon;
    if poly.len() < 3 {
        return Err(ArenaError::TooFewVertices(z.id.clone()));
    }
    if poly.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
        return Err(ArenaError::Schema(format!("zone {}: non-finite vertex", z.id)));
    }
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(ArenaError::SelfIntersecting(z.id.clone()));
            }
        }
    }
    if polygon_area(poly) <= GEOM_EPS {
        return Err(ArenaError::ZeroArea(z.id.clone()));
    }
    Ok(())
}

/// A point strictly inside a simple polygon, found by scanning a horizontal
/// line through the middle of its vertical extent.
fn interior_point(poly: &[Point]) -> Option<Point> {
    let ymin = poly.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let ymax = poly.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    // Avoid passing exactly through a vertex.
    for frac in [0.5, 0.437, 0.613, 0.281, 0.739] {
        let y = ymin + frac * (ymax - ymin);
        if poly.iter().any(|p| (p[1] - y).abs() < 1e-9) {
            continue;
        }
        let n = poly.len();
        let mut xs: Vec<f64> = (0..n)
            .filter_map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                if (a[1] > y) != (b[1] > y) {
                    Some(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]))
                } else {
                    None
                }
            })
            .collect();
        xs.sort_by(f64::total_cmp);
        if xs.len() >= 2 && xs[1] - xs[0] > 1e-9 {
            return Some([(xs[0] + xs[1]) / 2.0, y]);
        }
    }
    None
}

/// Interiors of two simple polygons intersect. Shared edges and touching
/// corners do not count as overlap.
fn interiors_overlap(a: &[Point], b: &[Point]) -> bool {
    let (na, nb) = (a.len(), b.len());
    for i in 0..na {
        for j in 0..nb {
            if segments_cross_properly(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]) {
                return true;
            }
        }
    }
    let strictly_in = |p: Point, poly: &[Point]| !on_boundary(p, poly) && strictly_inside(p, poly);
    let probes = |poly: &[Point]| {
        let n = poly.len();
        let mut pts: Vec<Point> = poly.to_vec();
        pts.extend((0..n).map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]
        }));
        pts.extend(interior_point(poly));
        pts
    };
    probes(a).into_iter().any(|p| strictly_in(p, b)) || probes(b).into_iter().any(|p| strictly_in(p, a))
}

/// Affine map from image pixels to arena millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTransform {
    /// Row-major 2x2 linear part.
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
    /// RMS residual over the calibration points, mm.
    pub residual: f64,
}

impl CalibrationTransform {
    pub fn identity() -> Self {
        CalibrationTransform {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
            residual: 0.0,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        let m = &self.linear;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + self.translation[0],
            m[1][0] * p[0] + m[1][1] * p[1] + self.translation[1],
        ]
    }

    /// Maps millimetres back to pixels.
    pub fn invert(&self, p: Point) -> Option<Point> {
        let m = Matrix2::new(
            self.linear[0][0],
            self.linear[0][1],
            self.linear[1][0],
            self.linear[1][1],
        );
        let inv = m.try_inverse()?;
        let v = inv * Vector2::new(p[0] - self.translation[0], p[1] - self.translation[1]);
        Some([v[0], v[1]])
    }

    pub fn determinant(&self) -> f64 {
        self.linear[0][0] * self.linear[1][1] - self.linear[0][1] * self.linear[1][0]
    }
}

/// Millimetre corners matching `calibrate`'s pixel corner order:
/// (0,0), (w,0), (w,h), (0,h).
pub fn arena_corners(width: f64, height: f64) -> [Point; 4] {
    [[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]]
}

/// Least-squares affine fit taking the four pixel corners onto the arena
/// corners, in the order of [`arena_corners`].
pub fn calibrate(pixel_corners: &[Point; 4], arena_mm: (f64, f64)) -> Result<CalibrationTransform, ArenaError> {
    if pixel_corners
        .iter()
        .any(|p| !(p[0].is_finite() && p[1].is_finite()))
        || !(arena_mm.0 > 0.0 && arena_mm.1 > 0.0)
    {
        return Err(ArenaError::DegenerateCalibration);
    }
    let targets = arena_corners(arena_mm.0, arena_mm.1);

    // Rank check on the centred pixel scatter.
    let cx = pixel_corners.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let cy = pixel_corners.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pixel_corners {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let trace = sxx + syy;
    if trace <= 0.0 || (sxx * syy - sxy * sxy) <= 1e-10 * trace * trace {
        return Err(ArenaError::DegenerateCalibration);
    }

    let mut ata = Matrix3::<f64>::zeros();
    let mut atx = Vector3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (p, t) in pixel_corners.iter().zip(targets.iter()) {
        let row = Vector3::new(p[0], p[1], 1.0);
        ata += row * row.transpose();
        atx += row * t[0];
        aty += row * t[1];
    }
    let chol = ata.cholesky().ok_or(ArenaError::DegenerateCalibration)?;
    let cx = chol.solve(&atx);
    let cy = chol.solve(&aty);
    let mut tf = CalibrationTransform {
        linear: [[cx[0], cx[1]], [cy[0], cy[1]]],
        translation: [cx[2], cy[2]],
        residual: 0.0,
    };
    if tf.determinant().abs() < 1e-12 {
        return Err(ArenaError::DegenerateCalibration);
    }
    let ss: f64 = pixel_corners
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| dist2(tf.apply(*p), *t))
        .sum();
    tf.residual = (ss / 4.0).sqrt();
    Ok(tf)
}
