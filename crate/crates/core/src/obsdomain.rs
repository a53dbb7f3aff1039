//! Moving observation regions ω(t) ⊂ Ω̄ and boundary regions Γ(t) ⊂ ∂Ω.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::geometry::{square_perimeter_coord, square_perimeter_point, DomainKind, Point};

/// Guard band used when reducing angles into a window.
pub const SEAM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Interior,
    Boundary,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Interior => "interior",
            Mode::Boundary => "boundary",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "interior" => Some(Mode::Interior),
            "boundary" => Some(Mode::Boundary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionLaw {
    ConstantSpeed {
        v: f64,
    },
    /// 1D only: bounce between the walls, resting `delta` at each.
    Reflecting1D {
        v: f64,
        delta: f64,
    },
    /// Static until `t0`, then constant speed `v`.
    StopAndGo {
        v: f64,
        t0: f64,
    },
    /// Piecewise-linear displacement through the knots (t_i, θ_i), held
    /// constant outside the knot range.
    Piecewise {
        knots: Vec<(f64, f64)>,
    },
}

impl MotionLaw {
    /// Displacement (angle, perimeter length or window travel) at time t.
    pub fn displacement(&self, t: f64) -> f64 {
        match self {
            MotionLaw::ConstantSpeed { v } | MotionLaw::Reflecting1D { v, .. } => v * t,
            MotionLaw::StopAndGo { v, t0 } => {
                if t < *t0 {
                    0.0
                } else {
                    v * (t - t0)
                }
            }
            MotionLaw::Piecewise { knots } => piecewise_eval(knots, t),
        }
    }

    pub fn max_speed(&self) -> f64 {
        match self {
            MotionLaw::ConstantSpeed { v }
            | MotionLaw::Reflecting1D { v, .. }
            | MotionLaw::StopAndGo { v, .. } => v.abs(),
            MotionLaw::Piecewise { knots } => knots
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MotionLaw::ConstantSpeed { .. } => "constant_speed",
            MotionLaw::Reflecting1D { .. } => "reflecting_1d",
            MotionLaw::StopAndGo { .. } => "stop_and_go",
            MotionLaw::Piecewise { .. } => "piecewise",
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite")))
            }
        };
        match self {
            MotionLaw::ConstantSpeed { v } => finite(*v, "v"),
            MotionLaw::Reflecting1D { v, delta } => {
                finite(*v, "v")?;
                if !(*delta >= 0.0) || !delta.is_finite() {
                    return Err(Error::InvalidParameter("delta must be >= 0".into()));
                }
                Ok(())
            }
            MotionLaw::StopAndGo { v, t0 } => {
                finite(*v, "v")?;
                finite(*t0, "t0")
            }
            MotionLaw::Piecewise { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidParameter(
                        "piecewise law needs at least one knot".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidParameter(
                        "piecewise knot times must increase".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn piecewise_eval(knots: &[(f64, f64)], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= t);
    let (t0, y0) = knots[i - 1];
    let (t1, y1) = knots[i];
    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovingDomainSpec {
    pub kind: DomainKind,
    pub mode: Mode,
    /// Angular length (disk, sphere), half side (square) or window length (1D).
    pub a: f64,
    /// Radial (disk) or latitudinal (sphere) width; unused otherwise.
    pub eps: Option<f64>,
    pub law: MotionLaw,
    /// Position of the window at zero displacement: left edge (1D), leading
    /// angle (disk, sphere), or perimeter coordinate (square).
    pub offset: f64,
}

impl MovingDomainSpec {
    pub fn interval(v: f64, a: f64, delta: f64) -> Self {
        MovingDomainSpec {
            kind: DomainKind::Interval01,
            mode: Mode::Interior,
            a,
            eps: None,
            law: MotionLaw::Reflecting1D { v, delta },
            offset: 0.0,
        }
    }

    pub fn disk(v: f64, a: f64, eps: f64) -> Self {
        MovingDomainSpec {
            kind: DomainKind::UnitDisk,
            mode: Mode::Interior,
            a,
            eps: Some(eps),
            law: MotionLaw::ConstantSpeed { v },
            offset: 0.0,
        }
    }

    pub fn sphere(v: f64, a: f64, eps: f64) -> Self {
        MovingDomainSpec {
            kind: DomainKind::UnitSphere,
            mode: Mode::Interior,
            a,
            eps: Some(eps),
            law: MotionLaw::ConstantSpeed { v },
            offset: 0.0,
        }
    }

    pub fn square(v: f64, a: f64) -> Self {
        MovingDomainSpec {
            kind: DomainKind::UnitSquare,
            mode: Mode::Interior,
            a,
            eps: None,
            law: MotionLaw::ConstantSpeed { v },
            offset: 0.0,
        }
    }

    pub fn boundary(kind: DomainKind, v: f64, a: f64) -> Self {
        MovingDomainSpec {
            kind,
            mode: Mode::Boundary,
            a,
            eps: None,
            law: MotionLaw::ConstantSpeed { v },
            offset: 0.0,
        }
    }

    pub fn with_law(mut self, law: MotionLaw) -> Self {
        self.law = law;
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::EmptyRegion(format!(
                "a = {} must be positive",
                self.a
            )));
        }
        let need_eps = self.mode == Mode::Interior
            && matches!(self.kind, DomainKind::UnitDisk | DomainKind::UnitSphere);
        if need_eps {
            let eps = self.eps.unwrap_or(0.0);
            if !(eps > 0.0) {
                return Err(Error::EmptyRegion(format!("eps = {eps} must be positive")));
            }
            let cap = if self.kind == DomainKind::UnitDisk {
                1.0
            } else {
                FRAC_PI_2
            };
            if eps >= cap {
                return Err(Error::InvalidParameter(format!(
                    "eps = {eps} must be below {cap}"
                )));
            }
        }
        match self.kind {
            DomainKind::Interval01 => {
                if self.a >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "window length a = {} must be below 1",
                        self.a
                    )));
                }
                if !(0.0..=1.0 - self.a).contains(&self.offset) {
                    return Err(Error::InvalidParameter(format!(
                        "offset = {} must lie in [0, 1 - a]",
                        self.offset
                    )));
                }
            }
            DomainKind::UnitSphere if self.mode == Mode::Boundary => {
                return Err(Error::NoBoundary(DomainKind::UnitSphere));
            }
            _ => {
                if matches!(self.law, MotionLaw::Reflecting1D { .. }) {
                    return Err(Error::InvalidParameter(
                        "reflecting_1d law needs the interval".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Left edge L(t) of the 1D window.
    pub fn window_left(&self, t: f64) -> f64 {
        let span = 1.0 - self.a;
        let (v, delta, tau) = match &self.law {
            MotionLaw::ConstantSpeed { v } => (*v, 0.0, t),
            MotionLaw::Reflecting1D { v, delta } => (*v, *delta, t),
            MotionLaw::StopAndGo { v, t0 } => (*v, 0.0, (t - t0).max(0.0)),
            MotionLaw::Piecewise { knots } => {
                return (self.offset + piecewise_eval(knots, t)).clamp(0.0, span);
            }
        };
        if v == 0.0 {
            return self.offset;
        }
        let v = v.abs();
        let rise = span / v;
        let period = 2.0 * (rise + delta);
        let u = (tau + self.offset / v).rem_euclid(period);
        if u < rise {
            v * u
        } else if u < rise + delta {
            span
        } else if u < 2.0 * rise + delta {
            span - v * (u - rise - delta)
        } else {
            0.0
        }
    }

    /// Times in (t_a, t_b) where L(t) changes slope, in increasing order.
    pub fn window_kinks(&self, t_a: f64, t_b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let (v, delta, start) = match &self.law {
            MotionLaw::ConstantSpeed { v } => (*v, 0.0, 0.0),
            MotionLaw::Reflecting1D { v, delta } => (*v, *delta, 0.0),
            MotionLaw::StopAndGo { v, t0 } => {
                if *t0 > t_a && *t0 < t_b {
                    out.push(*t0);
                }
                (*v, 0.0, *t0)
            }
            MotionLaw::Piecewise { knots } => {
                // knots plus the times where the clamp engages
                let span = 1.0 - self.a;
                let mut ts: Vec<f64> = knots.iter().map(|k| k.0).collect();
                for w in knots.windows(2) {
                    let (ta, ya) = (w[0].0, self.offset + w[0].1);
                    let (tb, yb) = (w[1].0, self.offset + w[1].1);
                    for level in [0.0, span] {
                        if (ya - level) * (yb - level) < 0.0 {
                            ts.push(ta + (level - ya) * (tb - ta) / (yb - ya));
                        }
                    }
                }
                ts.retain(|t| *t > t_a && *t < t_b);
                ts.sort_by(f64::total_cmp);
                return ts;
            }
        };
        if v == 0.0 {
            return out;
        }
        let v = v.abs();
        let rise = (1.0 - self.a) / v;
        let period = 2.0 * (rise + delta);
        let shift = self.offset / v;
        // u = (t - start) + shift on the moving branch
        let lo = t_a.max(start);
        if lo >= t_b {
            return out;
        }
        let u_lo = lo - start + shift;
        let u_hi = t_b - start + shift;
        let mut n = (u_lo / period).floor() - 1.0;
        while n * period <= u_hi {
            for phase in [0.0, rise, rise + delta, 2.0 * rise + delta] {
                let t = n * period + phase - shift + start;
                if t > t_a && t < t_b && t > start {
                    out.push(t);
                }
            }
            n += 1.0;
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        out
    }

    /// Leading angle or perimeter coordinate of the window at time t.
    pub fn window_angle(&self, t: f64) -> f64 {
        self.offset + self.law.displacement(t)
    }

    /// Center of the square box at time t.
    pub fn square_center(&self, t: f64) -> crate::geometry::Vec2 {
        square_perimeter_point(self.window_angle(t))
    }

    /// Maximum speed of any point of the region's boundary.
    pub fn v_max(&self) -> f64 {
        self.law.max_speed()
    }

    pub fn contains(&self, t: f64, p: &Point) -> bool {
        match (self.kind, self.mode) {
            (DomainKind::Interval01, Mode::Interior) => {
                let x = match p.as_line() {
                    Some(x) => x,
                    None => return false,
                };
                let l = self.window_left(t);
                x > l && x < l + self.a
            }
            (DomainKind::Interval01, Mode::Boundary) => {
                let x = match p.as_line() {
                    Some(x) => x,
                    None => return false,
                };
                let l = self.window_left(t);
                (x == 0.0 || x == 1.0) && x >= l && x <= l + self.a
            }
            (DomainKind::UnitDisk, Mode::Interior) => {
                let q = match p.as_plane() {
                    Some(q) => q,
                    None => return false,
                };
                let r = q.norm();
                r > 1.0 - self.eps.unwrap_or(0.0)
                    && in_window(q.angle(), self.window_angle(t), self.a, TAU)
            }
            (DomainKind::UnitDisk, Mode::Boundary) => {
                let q = match p.as_plane() {
                    Some(q) => q,
                    None => return false,
                };
                (q.norm() - 1.0).abs() <= 1e-9
                    && in_window(q.angle(), self.window_angle(t), self.a, TAU)
            }
            (DomainKind::UnitSphere, Mode::Interior) => {
                let (lon, lat) = match p.as_sphere() {
                    Some(s) => s.lon_lat(),
                    None => return false,
                };
                lat.abs() < self.eps.unwrap_or(0.0)
                    && in_window(lon, self.window_angle(t), self.a, TAU)
            }
            (DomainKind::UnitSphere, Mode::Boundary) => false,
            (DomainKind::UnitSquare, Mode::Interior) => {
                let q = match p.as_plane() {
                    Some(q) => q,
                    None => return false,
                };
                let c = self.square_center(t);
                (q.x - c.x).abs() < self.a && (q.y - c.y).abs() < self.a
            }
            (DomainKind::UnitSquare, Mode::Boundary) => {
                let q = match p.as_plane() {
                    Some(q) => q,
                    None => return false,
                };
                match square_perimeter_coord(q) {
                    Some(s) => in_window(s, self.window_angle(t), 2.0 * self.a, 4.0),
                    None => false,
                }
            }
        }
    }

    /// Lower bound on the time a unit-speed ray currently at p needs to
    /// enter ω; zero when p is inside.
    pub fn safe_step(&self, t: f64, p: &Point) -> f64 {
        let v = self.v_max();
        match (self.kind, self.mode) {
            (DomainKind::Interval01, _) => {
                let x = p.as_line().unwrap_or(0.0);
                let l = self.window_left(t);
                (l - x).max(x - l - self.a).max(0.0) / (1.0 + v)
            }
            (DomainKind::UnitDisk, _) => {
                let q = p.as_plane().unwrap_or_default();
                let r = q.norm();
                let radial = (1.0 - self.eps.unwrap_or(0.0) - r).max(0.0);
                let c = angular_gap(q.angle(), self.window_angle(t), self.a, TAU);
                let angular = if c > 0.0 && r > 0.0 {
                    (c / (2.0 / r + v)).min(r / 2.0)
                } else {
                    0.0
                };
                radial.max(angular)
            }
            (DomainKind::UnitSphere, _) => {
                let (lon, lat) = p.as_sphere().map(|s| s.lon_lat()).unwrap_or((0.0, 0.0));
                let band = (lat.abs() - self.eps.unwrap_or(0.0)).max(0.0);
                let c = angular_gap(lon, self.window_angle(t), self.a, TAU);
                let m = (FRAC_PI_2 - lat.abs()) / 2.0;
                let angular = if c > 0.0 {
                    (c / (1.0 / (lat.abs() + m).cos() + v)).min(m)
                } else {
                    0.0
                };
                band.max(angular)
            }
            (DomainKind::UnitSquare, _) => {
                let q = p.as_plane().unwrap_or_default();
                let c = self.square_center(t);
                let d = ((q.x - c.x).abs() - self.a)
                    .max((q.y - c.y).abs() - self.a)
                    .max(0.0);
                d / (1.0 + v)
            }
        }
    }

    /// Smallest spatial feature of the region.
    pub fn min_feature(&self) -> f64 {
        match self.kind {
            DomainKind::UnitDisk | DomainKind::UnitSphere if self.mode == Mode::Interior => {
                self.a.min(2.0 * self.eps.unwrap_or(0.0))
            }
            _ => self.a,
        }
    }

    pub fn min_feature_timescale(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.min_feature() / (4.0 * (1.0 + self.v_max())))
    }
}

/// True when `x` lies in the open window (start, start + len) modulo `period`.
pub fn in_window(x: f64, start: f64, len: f64, period: f64) -> bool {
    if len >= period {
        return true;
    }
    let mut rel = (x - start).rem_euclid(period);
    if rel > period - SEAM_GUARD {
        rel -= period;
    }
    rel > 0.0 && rel < len
}

/// Distance from `x` to the window (start, start + len) modulo `period`.
pub fn angular_gap(x: f64, start: f64, len: f64, period: f64) -> f64 {
    if len >= period {
        return 0.0;
    }
    let rel = (x - start).rem_euclid(period);
    if rel > 0.0 && rel < len {
        0.0
    } else {
        (rel - len).max(0.0).min(period - rel)
    }
}

/// Thin space-time neighbourhood of the boundary of Q ∩ ([0, T] × Ω̄).
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSpec {
    pub base: MovingDomainSpec,
    pub t_max: f64,
    pub h: f64,
}

/// Shell region built from a 1D base: distance in the (t, x) plane to a set
/// of segments below `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellRegion {
    pub spec: ShellSpec,
    segments: Vec<[(f64, f64); 2]>,
}

impl ShellRegion {
    pub fn segments(&self) -> &[[(f64, f64); 2]] {
        &self.segments
    }

    pub fn distance(&self, t: f64, x: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| segment_distance(*s, (t, x)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, t: f64, p: &Point) -> bool {
        match p.as_line() {
            Some(x) => self.distance(t, x) < self.spec.h,
            None => false,
        }
    }

    pub fn safe_step(&self, t: f64, p: &Point) -> f64 {
        let x = p.as_line().unwrap_or(0.0);
        (self.distance(t, x) - self.spec.h).max(0.0) / std::f64::consts::SQRT_2
    }

    pub fn min_feature_timescale(&self) -> f64 {
        self.spec.h / (4.0 * (1.0 + self.spec.base.v_max()))
    }
}

fn segment_distance(seg: [(f64, f64); 2], p: (f64, f64)) -> f64 {
    let (a, b) = (seg[0], seg[1]);
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let s = if len2 > 0.0 {
        (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = (a.0 + s * d.0, a.1 + s * d.1);
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

const WALL_TOL: f64 = 1e-12;

pub fn boundary_shell(s: &ShellSpec) -> Result<ShellRegion> {
    if !(s.h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shell thickness h = {} must be positive",
            s.h
        )));
    }
    if !(s.t_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shell horizon T = {} must be positive",
            s.t_max
        )));
    }
    s.base.validate()?;
    if s.base.kind != DomainKind::Interval01 || s.base.mode != Mode::Interior {
        return Err(Error::Unsupported {
            kind: s.base.kind,
            what: "shell regions (interval interior only)".into(),
        });
    }
    if s.h >= s.base.min_feature() {
        return Err(Error::InvalidParameter(format!(
            "h = {} must be below the region's feature size",
            s.h
        )));
    }
    let base = &s.base;
    let mut ts = vec![0.0];
    ts.extend(base.window_kinks(0.0, s.t_max));
    ts.push(s.t_max);
    let mut segments = Vec::new();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let (l0, l1) = (base.window_left(t0), base.window_left(t1));
        // lateral edges resting on a wall are not part of the relative boundary
        if !(l0 <= WALL_TOL && l1 <= WALL_TOL) {
            segments.push([(t0, l0), (t1, l1)]);
        }
        let (r0, r1) = (l0 + base.a, l1 + base.a);
        if !(r0 >= 1.0 - WALL_TOL && r1 >= 1.0 - WALL_TOL) {
            segments.push([(t0, r0), (t1, r1)]);
        }
    }
    for t in [0.0, s.t_max] {
        let l = base.window_left(t);
        segments.push([(t, l), (t, l + base.a)]);
    }
    Ok(ShellRegion {
        spec: s.clone(),
        segments,
    })
}

/// Anything `gcc` can test rays against.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Moving(MovingDomainSpec),
    /// Union with OR semantics; all members share kind and mode.
    Union(Vec<MovingDomainSpec>),
    Shell(ShellRegion),
}

impl From<MovingDomainSpec> for Region {
    fn from(s: MovingDomainSpec) -> Self {
        Region::Moving(s)
    }
}

impl From<ShellRegion> for Region {
    fn from(s: ShellRegion) -> Self {
        Region::Shell(s)
    }
}

impl Region {
    pub fn kind(&self) -> DomainKind {
        match self {
            Region::Moving(s) => s.kind,
            Region::Union(v) => v.first().map(|s| s.kind).unwrap_or(DomainKind::Interval01),
            Region::Shell(s) => s.spec.base.kind,
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Region::Moving(s) => s.mode,
            Region::Union(v) => v.first().map(|s| s.mode).unwrap_or(Mode::Interior),
            Region::Shell(_) => Mode::Interior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Moving(s) => s.validate(),
            Region::Union(v) => {
                let first = v
                    .first()
                    .ok_or_else(|| Error::EmptyRegion("empty union".into()))?;
                for s in v {
                    s.validate()?;
                    if s.kind != first.kind || s.mode != first.mode {
                        return Err(Error::InvalidParameter(
                            "union members must share geometry and mode".into(),
                        ));
                    }
                }
                Ok(())
            }
            Region::Shell(_) => Ok(()),
        }
    }

    pub fn contains(&self, t: f64, p: &Point) -> bool {
        match self {
            Region::Moving(s) => s.contains(t, p),
            Region::Union(v) => v.iter().any(|s| s.contains(t, p)),
            Region::Shell(s) => s.contains(t, p),
        }
    }

    pub fn safe_step(&self, t: f64, p: &Point) -> f64 {
        match self {
            Region::Moving(s) => s.safe_step(t, p),
            Region::Union(v) => v
                .iter()
                .map(|s| s.safe_step(t, p))
                .fold(f64::INFINITY, f64::min),
            Region::Shell(s) => s.safe_step(t, p),
        }
    }

    pub fn min_feature_timescale(&self) -> Result<f64> {
        match self {
            Region::Moving(s) => s.min_feature_timescale(),
            Region::Union(v) => {
                self.validate()?;
                v.iter()
                    .map(|s| s.min_feature_timescale())
                    .try_fold(f64::INFINITY, |m, x| x.map(|x| m.min(x)))
            }
            Region::Shell(s) => Ok(s.min_feature_timescale()),
        }
    }

    /// The single moving spec, if this region is one.
    pub fn as_moving(&self) -> Option<&MovingDomainSpec> {
        match self {
            Region::Moving(s) => Some(s),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Vec2, Vec3};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn contains_examples() {
        let s = MovingDomainSpec::interval(0.5, 0.2, 0.0);
        assert!(s.contains(0.4, &Point::Line(0.35)));
        assert!(!s.contains(0.4, &Point::Line(0.45)));

        let d = MovingDomainSpec::disk(0.0, 0.2, 0.1);
        for t in [0.0, 3.0, 100.0] {
            assert!(d.contains(t, &Point::disk_polar(1.0, 0.1)));
        }
        assert!(!d.contains(0.0, &Point::disk_polar(0.9, 0.1)));

        let sp = MovingDomainSpec::sphere(0.0, TAU, 0.2);
        assert!(!sp.contains(0.0, &Point::sphere_lon_lat(0.3, 0.2)));
        assert!(sp.contains(0.0, &Point::sphere_lon_lat(0.3, 0.1999)));
    }

    #[test]
    fn min_feature_examples() {
        assert_abs_diff_eq!(
            MovingDomainSpec::disk(2.0, PI / 2.0, 0.1)
                .min_feature_timescale()
                .unwrap(),
            0.2 / 12.0
        );
        assert_abs_diff_eq!(
            MovingDomainSpec::interval(0.5, 0.25, 0.0)
                .min_feature_timescale()
                .unwrap(),
            0.25 / 6.0
        );
        assert_abs_diff_eq!(
            MovingDomainSpec::square(0.0, 0.3)
                .min_feature_timescale()
                .unwrap(),
            0.3 / 4.0
        );
        assert!(matches!(
            MovingDomainSpec::disk(1.0, 0.0, 0.1).min_feature_timescale(),
            Err(Error::EmptyRegion(_))
        ));
        assert!(matches!(
            MovingDomainSpec::disk(1.0, 0.3, 0.0).min_feature_timescale(),
            Err(Error::EmptyRegion(_))
        ));
    }

    #[test]
    fn reflecting_window_matches_hand_computation() {
        // v = 0.5, a = 0.5, delta = 0.2: rise time 1, period 2.4
        let s = MovingDomainSpec::interval(0.5, 0.5, 0.2);
        let cases = [
            (0.0, 0.0),
            (0.5, 0.25),
            (1.0, 0.5),
            (1.1, 0.5),
            (1.2, 0.5),
            (1.7, 0.25),
            (2.2, 0.0),
            (2.3, 0.0),
            (2.9, 0.25),
        ];
        for (t, l) in cases {
            assert_abs_diff_eq!(s.window_left(t), l, epsilon = 1e-12);
        }
        let k = s.window_kinks(0.0, 5.0);
        let expect = [1.0, 1.2, 2.2, 2.4, 3.4, 3.6, 4.6, 4.8];
        assert_eq!(k.len(), expect.len());
        for (a, b) in k.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn stop_and_go_and_piecewise() {
        let s = MovingDomainSpec::disk(0.0, 1.0, 0.1)
            .with_law(MotionLaw::StopAndGo { v: 2.0, t0: 3.0 });
        assert_eq!(s.window_angle(1.0), 0.0);
        assert_abs_diff_eq!(s.window_angle(4.0), 2.0);
        let p = MovingDomainSpec::disk(0.0, 1.0, 0.1).with_law(MotionLaw::Piecewise {
            knots: vec![(0.0, 0.0), (1.0, 2.0), (3.0, 1.0)],
        });
        assert_abs_diff_eq!(p.window_angle(0.5), 1.0);
        assert_abs_diff_eq!(p.window_angle(2.0), 1.5);
        assert_abs_diff_eq!(p.window_angle(9.0), 1.0);
        assert_abs_diff_eq!(p.v_max(), 2.0);
    }

    #[test]
    fn boundary_mode_membership() {
        let d = MovingDomainSpec::boundary(DomainKind::UnitDisk, 0.0, PI / 2.0);
        assert!(d.contains(0.0, &Point::disk_polar(1.0, 0.5)));
        assert!(!d.contains(0.0, &Point::disk_polar(0.99, 0.5)));
        let sq = MovingDomainSpec::boundary(DomainKind::UnitSquare, 0.0, 0.5).with_offset(1.0);
        assert!(sq.contains(0.0, &Point::Plane(Vec2::new(1.0, 0.5))));
        assert!(!sq.contains(0.0, &Point::Plane(Vec2::new(0.5, 0.0))));
        let one = MovingDomainSpec::interval(0.0, 0.3, 0.0).with_offset(0.7);
        let one = MovingDomainSpec {
            mode: Mode::Boundary,
            ..one
        };
        assert!(one.contains(5.0, &Point::Line(1.0)));
        assert!(!one.contains(5.0, &Point::Line(0.0)));
        assert!(MovingDomainSpec::boundary(DomainKind::UnitSphere, 0.0, 1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn square_box_follows_perimeter() {
        let s = MovingDomainSpec::square(1.0, 0.1);
        assert_eq!(s.square_center(0.0), Vec2::new(0.0, 0.0));
        let c = s.square_center(1.5);
        assert_abs_diff_eq!(c.x, 1.0);
        assert_abs_diff_eq!(c.y, 0.5);
        assert!(s.contains(1.5, &Point::Plane(Vec2::new(0.95, 0.55))));
        assert!(!s.contains(1.5, &Point::Plane(Vec2::new(0.85, 0.55))));
    }

    #[test]
    fn shell_examples() {
        let base = MovingDomainSpec::interval(0.0, 0.2, 0.0).with_offset(0.3);
        let h = 0.02;
        let shell = boundary_shell(&ShellSpec {
            base,
            t_max: 2.0,
            h,
        })
        .unwrap();
        let t = 1.0;
        for x in [0.29, 0.31, 0.49, 0.51] {
            assert!(shell.contains(t, &Point::Line(x)), "x={x}");
        }
        for x in [0.27, 0.33, 0.4, 0.47, 0.53] {
            assert!(!shell.contains(t, &Point::Line(x)), "x={x}");
        }
        for x in [0.29, 0.35, 0.4, 0.45, 0.51] {
            assert!(shell.contains(0.01, &Point::Line(x)), "cap x={x}");
        }
        // moving base: lateral edges drift with the window
        let moving = MovingDomainSpec::interval(0.5, 0.2, 0.0).with_offset(0.3);
        let shell = boundary_shell(&ShellSpec {
            base: moving.clone(),
            t_max: 2.0,
            h,
        })
        .unwrap();
        let l = moving.window_left(0.6);
        assert_abs_diff_eq!(l, 0.6);
        assert!(shell.contains(0.6, &Point::Line(l + 0.01)));
        assert!(!shell.contains(0.6, &Point::Line(l + 0.1)));
        assert!(boundary_shell(&ShellSpec {
            base: moving,
            t_max: 2.0,
            h: 0.0
        })
        .is_err());
    }

    #[test]
    fn shell_contains_boundary_points_and_excludes_far_points() {
        use rand::{Rng, SeedableRng};
        let base = MovingDomainSpec::interval(0.7, 0.25, 0.1).with_offset(0.2);
        let h = 0.02;
        let t_max = 3.0;
        let shell = boundary_shell(&ShellSpec {
            base: base.clone(),
            t_max,
            h,
        })
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let inside =
            |t: f64, x: f64| (0.0..=t_max).contains(&t) && base.contains(t, &Point::Line(x));
        let mut boundary_points = 0;
        while boundary_points < 1000 {
            // random boundary point: lateral edge or cap
            let t = rng.gen_range(0.0..t_max);
            let pick = rng.gen_range(0..4);
            let (tt, x) = match pick {
                0 => (t, base.window_left(t)),
                1 => (t, base.window_left(t) + base.a),
                2 => (0.0, base.window_left(0.0) + rng.gen_range(0.0..base.a)),
                _ => (t_max, base.window_left(t_max) + rng.gen_range(0.0..base.a)),
            };
            if x <= 0.0 || x >= 1.0 {
                continue;
            }
            boundary_points += 1;
            assert!(shell.contains(tt, &Point::Line(x)), "({tt}, {x})");
        }
        // brute-force distance oracle on a grid of the space-time boundary
        let mut far = 0;
        while far < 1000 {
            let t = rng.gen_range(-0.5..t_max + 0.5);
            let x = rng.gen_range(0.0..1.0);
            let mut d = f64::INFINITY;
            let n = 400;
            for i in 0..=n {
                for j in 0..=n {
                    let (s, y) = (
                        t - 3.0 * h + 6.0 * h * i as f64 / n as f64,
                        x - 3.0 * h + 6.0 * h * j as f64 / n as f64,
                    );
                    if !(0.0..=1.0).contains(&y) {
                        continue;
                    }
                    if inside(s, y) != inside(t, x) {
                        d = d.min(((s - t).powi(2) + (y - x).powi(2)).sqrt());
                    }
                }
                if d < 1.5 * h {
                    break;
                }
            }
            if d > 1.5 * h {
                far += 1;
                assert!(!shell.contains(t, &Point::Line(x)), "({t}, {x})");
            }
        }
    }

    #[test]
    fn safe_step_is_conservative() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let specs = [
            MovingDomainSpec::disk(3.0, 1.0, 0.2),
            MovingDomainSpec::sphere(2.0, 1.0, 0.3),
            MovingDomainSpec::square(2.0, 0.2),
            MovingDomainSpec::interval(0.7, 0.2, 0.1),
        ];
        for spec in specs {
            for _ in 0..2000 {
                let (state, t) = match spec.kind {
                    DomainKind::Interval01 => (
                        crate::rayflow::RayState::interval(
                            rng.gen_range(0.0..1.0),
                            if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                            0.0,
                        ),
                        rng.gen_range(0.0..5.0),
                    ),
                    DomainKind::UnitSphere => {
                        let p =
                            Vec3::from_lon_lat(rng.gen_range(0.0..TAU), rng.gen_range(-1.5..1.5));
                        let d = Vec3::new(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        );
                        (
                            crate::rayflow::RayState::sphere(p, d, 0.0),
                            rng.gen_range(0.0..5.0),
                        )
                    }
                    kind => {
                        let p = if kind == DomainKind::UnitDisk {
                            Vec2::from_angle(rng.gen_range(0.0..TAU))
                                * rng.gen_range(0.0f64..1.0).sqrt()
                        } else {
                            Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))
                        };
                        (
                            crate::rayflow::RayState::planar(kind, p, rng.gen_range(0.0..TAU), 0.0),
                            rng.gen_range(0.0..5.0),
                        )
                    }
                };
                let traj = crate::rayflow::Trajectory::from_state(&state).unwrap();
                let step = spec.safe_step(t, &traj.position(t));
                if step == 0.0 {
                    assert!(
                        spec.contains(t, &traj.position(t)) || spec.kind != DomainKind::Interval01
                    );
                    continue;
                }
                let n = 50;
                for i in 1..n {
                    let s = t + step * i as f64 / n as f64;
                    assert!(
                        !spec.contains(s, &traj.position(s)),
                        "{:?} t={t} step={step}",
                        spec.kind
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn contains_is_monotone_in_window_size(
            v in 0.0f64..5.0, a in 0.05f64..3.0, eps in 0.05f64..0.5, grow in 0.0f64..1.0,
            t in 0.0f64..20.0, r in 0.0f64..1.0, th in 0.0f64..TAU,
        ) {
            let small = MovingDomainSpec::disk(v, a, eps);
            let big = MovingDomainSpec::disk(v, a + grow, (eps + grow).min(0.99));
            let p = Point::disk_polar(r, th);
            prop_assert!(!small.contains(t, &p) || big.contains(t, &p));
            let small = MovingDomainSpec::sphere(v, a, eps);
            let big = MovingDomainSpec::sphere(v, a + grow, (eps + grow).min(1.5));
            let p = Point::sphere_lon_lat(th, r - 0.5);
            prop_assert!(!small.contains(t, &p) || big.contains(t, &p));
        }

        #[test]
        fn rotating_windows_are_periodic(v in 0.1f64..5.0, t in 0.0f64..10.0, r in 0.0f64..1.0, th in 0.0f64..TAU) {
            let d = MovingDomainSpec::disk(v, 1.0, 0.3);
            let p = Point::disk_polar(r, th);
            let q = Point::sphere_lon_lat(th, r - 0.5);
            let s = MovingDomainSpec::sphere(v, 1.0, 0.3);
            let per = TAU / v;
            // skip points within rounding distance of a window edge
            let rel = (th - v * t).rem_euclid(TAU);
            prop_assume!(rel.min((rel - 1.0).abs()).min(TAU - rel) > 1e-9);
            prop_assert_eq!(d.contains(t, &p), d.contains(t + per, &p));
            prop_assert_eq!(s.contains(t, &q), s.contains(t + per, &q));
        }

        #[test]
        fn reflecting_window_is_continuous_and_periodic(v in 0.05f64..4.0, a in 0.05f64..0.9, delta in 0.0f64..1.0, t in 0.0f64..30.0) {
            let s = MovingDomainSpec::interval(v, a, delta);
            let per = 2.0 * ((1.0 - a) / v + delta);
            prop_assert!((s.window_left(t) - s.window_left(t + per)).abs() < 1e-9);
            let h = 1e-7;
            prop_assert!((s.window_left(t + h) - s.window_left(t)).abs() <= v * h * 1.0001 + 1e-12);
            let l = s.window_left(t);
            prop_assert!(l >= 0.0 && l <= 1.0 - a + 1e-12);
        }
    }
}
