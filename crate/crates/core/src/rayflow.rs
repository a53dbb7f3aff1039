//! Generalized rays at unit speed on the four model domains.
//!
//! Every ray is reduced to a closed-form [`Trajectory`]: the interval and the
//! square through folding of the unfolded line, the disk through its chord
//! recursion (θ_{k+1} = θ_k + α, t_{k+1} = t_k + 2 sin(α/2)), the sphere through
//! its great circle. Gliding rays on the disk and square boundaries are kept as
//! their own variants.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{
    boundary_param_inverse, corner_reflect, fold, reflect_specular, square_normal,
    square_perimeter_coord, square_perimeter_point, DomainKind, Point, UnfoldState, Vec2, Vec3,
    CORNER_TOL, TANGENCY_TOL,
};

/// Maximum number of bounces a single trace may produce.
pub const MAX_BOUNCES: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RayMode {
    Interior,
    GlidingCcw,
    GlidingCw,
}

impl RayMode {
    pub fn name(self) -> &'static str {
        match self {
            RayMode::Interior => "interior",
            RayMode::GlidingCcw => "gliding_ccw",
            RayMode::GlidingCw => "gliding_cw",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "interior" => Some(RayMode::Interior),
            "gliding_ccw" => Some(RayMode::GlidingCcw),
            "gliding_cw" => Some(RayMode::GlidingCw),
            _ => None,
        }
    }
}

/// Unit direction of travel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Line(f64),
    Plane(Vec2),
    Sphere(Vec3),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayState {
    pub kind: DomainKind,
    pub pos: Point,
    /// `None` in gliding mode.
    pub dir: Option<Direction>,
    pub t: f64,
    pub mode: RayMode,
}

impl RayState {
    pub fn interval(x: f64, dir: f64, t: f64) -> Self {
        RayState {
            kind: DomainKind::Interval01,
            pos: Point::Line(x),
            dir: Some(Direction::Line(dir.signum())),
            t,
            mode: RayMode::Interior,
        }
    }

    pub fn planar(kind: DomainKind, pos: Vec2, angle: f64, t: f64) -> Self {
        RayState {
            kind,
            pos: Point::Plane(pos),
            dir: Some(Direction::Plane(Vec2::from_angle(angle))),
            t,
            mode: RayMode::Interior,
        }
    }

    /// Gliding ray starting at boundary coordinate `s` (disk angle or square
    /// perimeter coordinate).
    pub fn gliding(kind: DomainKind, s: f64, ccw: bool, t: f64) -> Result<Self> {
        if !matches!(kind, DomainKind::UnitDisk | DomainKind::UnitSquare) {
            return Err(Error::Unsupported {
                kind,
                what: "gliding rays".into(),
            });
        }
        Ok(RayState {
            kind,
            pos: crate::geometry::boundary_param(kind, s)?,
            dir: None,
            t,
            mode: if ccw {
                RayMode::GlidingCcw
            } else {
                RayMode::GlidingCw
            },
        })
    }

    pub fn sphere(pos: Vec3, tangent: Vec3, t: f64) -> Self {
        let p = pos.normalized();
        let d = (tangent - p * tangent.dot(p)).normalized();
        RayState {
            kind: DomainKind::UnitSphere,
            pos: Point::Sphere(p),
            dir: Some(Direction::Sphere(d)),
            t,
            mode: RayMode::Interior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceEvent {
    pub t: f64,
    pub point: Point,
    /// Boundary arclength coordinate of `point`.
    pub s: f64,
    pub dir_in: Direction,
    pub dir_out: Direction,
    pub transversal: bool,
    pub corner: bool,
}

/// A disk ray described by its boundary hits.
///
/// `alpha` is the anticlockwise angle from one hit point to the next; values
/// above π are rays that appear to travel clockwise. `alpha == 0` encodes the
/// gliding ray, whose direction is then given by `orientation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskChordRay {
    pub theta0: f64,
    pub alpha: f64,
    pub t0: f64,
    pub orientation: f64,
}

impl DiskChordRay {
    pub fn chord_time(&self) -> f64 {
        2.0 * (self.alpha / 2.0).sin()
    }

    pub fn is_gliding(&self) -> bool {
        self.chord_time() <= TANGENCY_TOL
    }

    /// Index of the chord in use at time `t` and the time elapsed on it.
    pub fn chord_at(&self, t: f64) -> (i64, f64) {
        let dt = self.chord_time();
        let k = ((t - self.t0) / dt).floor();
        (k as i64, t - self.t0 - k * dt)
    }

    pub fn bounce_angle(&self, k: i64) -> f64 {
        self.theta0 + k as f64 * self.alpha
    }

    pub fn bounce_time(&self, k: i64) -> f64 {
        self.t0 + k as f64 * self.chord_time()
    }

    pub fn position(&self, t: f64) -> Vec2 {
        if self.is_gliding() {
            return Vec2::from_angle(self.theta0 + self.orientation * (t - self.t0));
        }
        let (k, s) = self.chord_at(t);
        let p = Vec2::from_angle(self.bounce_angle(k));
        let q = Vec2::from_angle(self.bounce_angle(k + 1));
        p + (q - p) * (s / self.chord_time())
    }

    pub fn chord_direction(&self, k: i64) -> Vec2 {
        let p = Vec2::from_angle(self.bounce_angle(k));
        let q = Vec2::from_angle(self.bounce_angle(k + 1));
        ((q - p) * (1.0 / self.chord_time())).normalized()
    }

    /// Chord ray starting at boundary angle `theta0` at time `t0`.
    pub fn new(theta0: f64, alpha: f64, t0: f64) -> Self {
        DiskChordRay {
            theta0,
            alpha: alpha.rem_euclid(TAU),
            t0,
            orientation: 1.0,
        }
    }
}

/// A unit-speed great circle: position cos u · N + sin u · W with
/// u = phase + orientation · t, N the ascending node and W the in-plane
/// vector 90° ahead of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreatCircleRay {
    pub node: f64,
    /// Inclination in [0, π/2].
    pub inclination: f64,
    pub phase: f64,
    pub orientation: f64,
}

impl GreatCircleRay {
    fn frame(&self) -> (Vec3, Vec3) {
        let (sn, cn) = self.node.sin_cos();
        let (si, ci) = self.inclination.sin_cos();
        (Vec3::new(cn, sn, 0.0), Vec3::new(-sn * ci, cn * ci, si))
    }

    fn u(&self, t: f64) -> f64 {
        self.phase + self.orientation * t
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let (n, w) = self.frame();
        let (su, cu) = self.u(t).sin_cos();
        (n * cu + w * su).normalized()
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        let (n, w) = self.frame();
        let (su, cu) = self.u(t).sin_cos();
        (n * (-su) + w * cu) * self.orientation
    }

    pub fn latitude(&self, t: f64) -> f64 {
        (self.inclination.sin() * self.u(t).sin())
            .clamp(-1.0, 1.0)
            .asin()
    }

    /// Longitude, unwrapped around the node.
    pub fn longitude(&self, t: f64) -> f64 {
        let u = self.u(t);
        self.node + (self.inclination.cos() * u.sin()).atan2(u.cos())
    }

    pub fn from_state(p: Vec3, d: Vec3, t: f64) -> Self {
        let n = p.cross(d);
        let (orientation, normal) = if n.z >= 0.0 {
            (1.0, n)
        } else {
            (-1.0, n * -1.0)
        };
        let normal = normal.normalized();
        let inclination = normal.z.clamp(-1.0, 1.0).acos();
        // node direction is z × normal = (-normal.y, normal.x, 0)
        let node = if inclination.sin() > 1e-15 {
            normal.x.atan2(-normal.y)
        } else {
            0.0
        };
        let probe = GreatCircleRay {
            node,
            inclination,
            phase: 0.0,
            orientation,
        };
        let (nv, wv) = probe.frame();
        let u0 = p.dot(wv).atan2(p.dot(nv));
        GreatCircleRay {
            node,
            inclination,
            phase: u0 - orientation * t,
            orientation,
        }
    }
}

/// Closed-form description of a generalized ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    /// x(t) = fold(x0 + dir (t − t0)).
    Interval {
        x0: f64,
        dir: f64,
        t0: f64,
    },
    Disk(DiskChordRay),
    Square(UnfoldState),
    /// Perimeter coordinate s(t) = s0 + sign (t − t0), corners traversed.
    SquareGlide {
        s0: f64,
        sign: f64,
        t0: f64,
    },
    Sphere(GreatCircleRay),
}

impl Trajectory {
    pub fn kind(&self) -> DomainKind {
        match self {
            Trajectory::Interval { .. } => DomainKind::Interval01,
            Trajectory::Disk(_) => DomainKind::UnitDisk,
            Trajectory::Square(_) | Trajectory::SquareGlide { .. } => DomainKind::UnitSquare,
            Trajectory::Sphere(_) => DomainKind::UnitSphere,
        }
    }

    pub fn is_gliding(&self) -> bool {
        match self {
            Trajectory::Disk(r) => r.is_gliding(),
            Trajectory::SquareGlide { .. } => true,
            _ => false,
        }
    }

    /// Ray lying along a flat edge of the square (infinite-order contact).
    pub fn is_edge_gliding(&self) -> bool {
        match self {
            Trajectory::SquareGlide { .. } => true,
            Trajectory::Square(u) => {
                let on_edge = |z: f64| fold(z).min(1.0 - fold(z)) <= CORNER_TOL;
                (u.s.abs() <= TANGENCY_TOL && on_edge(u.y0))
                    || (u.c.abs() <= TANGENCY_TOL && on_edge(u.x0))
            }
            _ => false,
        }
    }

    pub fn from_state(state: &RayState) -> Result<Self> {
        match (state.kind, state.mode) {
            (DomainKind::Interval01, RayMode::Interior) => {
                let x = state
                    .pos
                    .as_line()
                    .ok_or_else(|| bad_state("interval position"))?;
                let dir = match state.dir {
                    Some(Direction::Line(d)) if d != 0.0 => d.signum(),
                    _ => return Err(bad_state("interval direction must be ±1")),
                };
                Ok(Trajectory::Interval {
                    x0: x.clamp(0.0, 1.0),
                    dir,
                    t0: state.t,
                })
            }
            (DomainKind::Interval01, _) => Err(Error::Unsupported {
                kind: DomainKind::Interval01,
                what: "gliding rays".into(),
            }),
            (DomainKind::UnitDisk, RayMode::Interior) => {
                let p = state
                    .pos
                    .as_plane()
                    .ok_or_else(|| bad_state("disk position"))?;
                let d = match state.dir {
                    Some(Direction::Plane(d)) => d.normalized(),
                    _ => return Err(bad_state("disk direction")),
                };
                Ok(Trajectory::Disk(disk_chord_from_state(p, d, state.t)))
            }
            (DomainKind::UnitDisk, mode) => {
                let theta = boundary_param_inverse(DomainKind::UnitDisk, &state.pos)?;
                let orientation = if mode == RayMode::GlidingCcw {
                    1.0
                } else {
                    -1.0
                };
                Ok(Trajectory::Disk(DiskChordRay {
                    theta0: theta,
                    alpha: 0.0,
                    t0: state.t,
                    orientation,
                }))
            }
            (DomainKind::UnitSquare, RayMode::Interior) => {
                let p = state
                    .pos
                    .as_plane()
                    .ok_or_else(|| bad_state("square position"))?;
                let d = match state.dir {
                    Some(Direction::Plane(d)) => d.normalized(),
                    _ => return Err(bad_state("square direction")),
                };
                Ok(Trajectory::Square(UnfoldState {
                    x0: p.x.clamp(0.0, 1.0),
                    y0: p.y.clamp(0.0, 1.0),
                    c: d.x,
                    s: d.y,
                    t0: state.t,
                }))
            }
            (DomainKind::UnitSquare, mode) => {
                let s0 = boundary_param_inverse(DomainKind::UnitSquare, &state.pos)?;
                let sign = if mode == RayMode::GlidingCcw {
                    1.0
                } else {
                    -1.0
                };
                Ok(Trajectory::SquareGlide {
                    s0,
                    sign,
                    t0: state.t,
                })
            }
            (DomainKind::UnitSphere, RayMode::Interior) => {
                let p = state
                    .pos
                    .as_sphere()
                    .ok_or_else(|| bad_state("sphere position"))?;
                let d = match state.dir {
                    Some(Direction::Sphere(d)) => d,
                    _ => return Err(bad_state("sphere direction")),
                };
                let p = p.normalized();
                let d = (d - p * d.dot(p)).normalized();
                Ok(Trajectory::Sphere(GreatCircleRay::from_state(
                    p, d, state.t,
                )))
            }
            (DomainKind::UnitSphere, _) => Err(Error::NoBoundary(DomainKind::UnitSphere)),
        }
    }

    pub fn position(&self, t: f64) -> Point {
        match *self {
            Trajectory::Interval { x0, dir, t0 } => Point::Line(fold(x0 + dir * (t - t0))),
            Trajectory::Disk(r) => Point::Plane(r.position(t)),
            Trajectory::Square(u) => eval_square_unfolded(&u, t),
            Trajectory::SquareGlide { s0, sign, t0 } => {
                Point::Plane(square_perimeter_point(s0 + sign * (t - t0)))
            }
            Trajectory::Sphere(g) => Point::Sphere(g.position(t)),
        }
    }

    /// Unit velocity at time `t` (one-sided from the right at bounces).
    pub fn direction(&self, t: f64) -> Option<Direction> {
        match *self {
            Trajectory::Interval { x0, dir, t0 } => {
                let z = x0 + dir * (t - t0);
                let sgn = if z.rem_euclid(2.0) < 1.0 { 1.0 } else { -1.0 };
                let sgn = if dir < 0.0 && z.rem_euclid(1.0) == 0.0 {
                    -sgn
                } else {
                    sgn
                };
                Some(Direction::Line(dir * sgn))
            }
            Trajectory::Disk(r) if !r.is_gliding() => {
                let (k, _) = r.chord_at(t);
                Some(Direction::Plane(r.chord_direction(k)))
            }
            Trajectory::Square(u) => {
                let vx = unfold_velocity(u.x0 + u.c * (t - u.t0), u.c);
                let vy = unfold_velocity(u.y0 + u.s * (t - u.t0), u.s);
                Some(Direction::Plane(Vec2::new(vx, vy)))
            }
            Trajectory::Sphere(g) => Some(Direction::Sphere(g.velocity(t))),
            _ => None,
        }
    }

    /// Ray state at time `t`.
    pub fn state_at(&self, t: f64) -> RayState {
        let mode = match *self {
            Trajectory::Disk(r) if r.is_gliding() => {
                if r.orientation > 0.0 {
                    RayMode::GlidingCcw
                } else {
                    RayMode::GlidingCw
                }
            }
            Trajectory::SquareGlide { sign, .. } => {
                if sign > 0.0 {
                    RayMode::GlidingCcw
                } else {
                    RayMode::GlidingCw
                }
            }
            _ => RayMode::Interior,
        };
        RayState {
            kind: self.kind(),
            pos: self.position(t),
            dir: self.direction(t),
            t,
            mode,
        }
    }

    /// Bounce events with time in (t_from, t_to], in time order, passed to
    /// `visit`; returning `false` from `visit` stops the walk.
    pub fn walk_bounces(
        &self,
        t_from: f64,
        t_to: f64,
        mut visit: impl FnMut(&BounceEvent) -> bool,
    ) -> Result<usize> {
        let mut count = 0usize;
        let guard = |count: &mut usize| -> Result<()> {
            *count += 1;
            if *count > MAX_BOUNCES {
                Err(Error::BounceOverflow(MAX_BOUNCES))
            } else {
                Ok(())
            }
        };
        match *self {
            Trajectory::Interval { x0, dir, t0 } => {
                // crossings of x0 + dir (t - t0) through the integers
                let z_from = x0 + dir * (t_from - t0);
                let mut m = if dir > 0.0 {
                    z_from.floor() + 1.0
                } else {
                    z_from.ceil() - 1.0
                };
                loop {
                    let t = t0 + (m - x0) / dir;
                    if t > t_to {
                        break;
                    }
                    if t > t_from {
                        guard(&mut count)?;
                        let x = fold(m);
                        let din = if x == 1.0 { 1.0 } else { -1.0 };
                        let ev = BounceEvent {
                            t,
                            point: Point::Line(x),
                            s: x,
                            dir_in: Direction::Line(din),
                            dir_out: Direction::Line(-din),
                            transversal: true,
                            corner: false,
                        };
                        if !visit(&ev) {
                            break;
                        }
                    }
                    m += dir;
                }
            }
            Trajectory::Disk(r) => {
                if r.is_gliding() {
                    return Ok(0);
                }
                let (mut k, _) = r.chord_at(t_from);
                k += 1;
                loop {
                    let t = r.bounce_time(k);
                    if t > t_to {
                        break;
                    }
                    if t > t_from {
                        guard(&mut count)?;
                        let theta = r.bounce_angle(k);
                        let ev = BounceEvent {
                            t,
                            point: Point::Plane(Vec2::from_angle(theta)),
                            s: theta.rem_euclid(TAU),
                            dir_in: Direction::Plane(r.chord_direction(k - 1)),
                            dir_out: Direction::Plane(r.chord_direction(k)),
                            transversal: true,
                            corner: false,
                        };
                        if !visit(&ev) {
                            break;
                        }
                    }
                    k += 1;
                }
            }
            Trajectory::Square(u) => {
                let mut xs = AxisCrossings::new(u.x0, u.c, u.t0, t_from);
                let mut ys = AxisCrossings::new(u.y0, u.s, u.t0, t_from);
                loop {
                    let tx = xs.peek();
                    let ty = ys.peek();
                    let t = tx.min(ty);
                    if !(t <= t_to) {
                        break;
                    }
                    let corner = (tx - ty).abs() <= CORNER_TOL;
                    if corner {
                        xs.advance();
                        ys.advance();
                    } else if tx < ty {
                        xs.advance();
                    } else {
                        ys.advance();
                    }
                    if t <= t_from {
                        continue;
                    }
                    guard(&mut count)?;
                    let ev = square_event(&u, t, corner);
                    if !visit(&ev) {
                        break;
                    }
                }
            }
            Trajectory::SquareGlide { .. } => {}
            Trajectory::Sphere(_) => return Err(Error::NoBoundary(DomainKind::UnitSphere)),
        }
        Ok(count)
    }
}

fn bad_state(what: &str) -> Error {
    Error::InvalidParameter(format!("ray state: {what}"))
}

fn unfold_velocity(z: f64, c: f64) -> f64 {
    if z.rem_euclid(2.0) < 1.0 {
        c
    } else {
        -c
    }
}

/// Times at which z0 + c (t − t0) crosses an integer, in increasing order.
struct AxisCrossings {
    z0: f64,
    c: f64,
    t0: f64,
    next_m: f64,
}

impl AxisCrossings {
    fn new(z0: f64, c: f64, t0: f64, t_from: f64) -> Self {
        let z = z0 + c * (t_from - t0);
        let next_m = if c > 0.0 {
            z.floor() + 1.0
        } else {
            z.ceil() - 1.0
        };
        let mut me = AxisCrossings { z0, c, t0, next_m };
        // step back once so a crossing exactly at t_from is visible to the caller
        if c.abs() > TANGENCY_TOL {
            let prev = next_m - c.signum();
            if me.time_of(prev) >= t_from - 1e-300 {
                me.next_m = prev;
            }
        }
        me
    }

    fn time_of(&self, m: f64) -> f64 {
        self.t0 + (m - self.z0) / self.c
    }

    fn peek(&self) -> f64 {
        if self.c.abs() <= TANGENCY_TOL {
            f64::INFINITY
        } else {
            self.time_of(self.next_m)
        }
    }

    fn advance(&mut self) {
        self.next_m += self.c.signum();
    }
}

fn square_event(u: &UnfoldState, t: f64, corner: bool) -> BounceEvent {
    let eps = 1e-7;
    let before = Vec2::new(
        unfold_velocity(u.x0 + u.c * (t - eps - u.t0), u.c),
        unfold_velocity(u.y0 + u.s * (t - eps - u.t0), u.s),
    );
    let after = Vec2::new(
        unfold_velocity(u.x0 + u.c * (t + eps - u.t0), u.c),
        unfold_velocity(u.y0 + u.s * (t + eps - u.t0), u.s),
    );
    let p = eval_square_unfolded(u, t).as_plane().unwrap();
    let n = square_normal(p);
    let s = square_perimeter_coord(p).unwrap_or(0.0);
    BounceEvent {
        t,
        point: Point::Plane(p),
        s,
        dir_in: Direction::Plane(before),
        dir_out: Direction::Plane(after),
        transversal: corner || before.dot(n).abs() > TANGENCY_TOL,
        corner,
    }
}

fn disk_chord_from_state(p: Vec2, d: Vec2, t: f64) -> DiskChordRay {
    let r = p.norm();
    if r >= 1.0 - 1e-12 {
        let n = p * (1.0 / r);
        let dn = d.dot(n);
        let theta = p.angle();
        if dn.abs() <= TANGENCY_TOL {
            let orientation = if n.x * d.y - n.y * d.x >= 0.0 {
                1.0
            } else {
                -1.0
            };
            return DiskChordRay {
                theta0: theta,
                alpha: 0.0,
                t0: t,
                orientation,
            };
        }
        let d_in = if dn > 0.0 {
            reflect_specular(d, n).unwrap_or(-d)
        } else {
            d
        };
        // chord from p along d_in subtends the angle 2 * asin(|d_in · n|) ... via the far hit
        let pd = Vec2::from_angle(theta).dot(d_in);
        let sf = -2.0 * pd;
        let q = Vec2::from_angle(theta) + d_in * sf;
        let alpha = (q.angle() - theta).rem_euclid(TAU);
        return DiskChordRay {
            theta0: theta,
            alpha,
            t0: t,
            orientation: 1.0,
        };
    }
    let pd = p.dot(d);
    let disc = (pd * pd + 1.0 - r * r).max(0.0).sqrt();
    let sb = pd + disc;
    let sf = -pd + disc;
    let p0 = p - d * sb;
    let p1 = p + d * sf;
    let theta0 = p0.angle();
    let alpha = (p1.angle() - theta0).rem_euclid(TAU);
    DiskChordRay {
        theta0,
        alpha,
        t0: t - sb,
        orientation: 1.0,
    }
}

/// Position of the unfolded square flow at time `t`.
pub fn eval_square_unfolded(u: &UnfoldState, t: f64) -> Point {
    Point::Plane(Vec2::new(
        fold(u.x0 + (t - u.t0) * u.c),
        fold(u.y0 + (t - u.t0) * u.s),
    ))
}

/// Great-circle position as (longitude, latitude).
pub fn eval_great_circle(r: &GreatCircleRay, t: f64) -> (f64, f64) {
    (r.longitude(t), r.latitude(t))
}

/// Next boundary event strictly after `state.t`.
pub fn next_bounce(state: &RayState) -> Result<BounceEvent> {
    if state.kind == DomainKind::UnitSphere {
        return Err(Error::NoBoundary(DomainKind::UnitSphere));
    }
    if state.mode != RayMode::Interior {
        return Err(Error::InvalidParameter(
            "next_bounce needs an interior-mode ray".into(),
        ));
    }
    let traj = Trajectory::from_state(state)?;
    let mut found = None;
    let mut horizon = 4.0;
    while found.is_none() && horizon < 1e6 {
        traj.walk_bounces(state.t, state.t + horizon, |ev| {
            found = Some(*ev);
            false
        })?;
        horizon *= 4.0;
    }
    found.ok_or_else(|| Error::InvalidParameter("ray never reaches the boundary".into()))
}

/// Boundary trajectory of a gliding ray; returns its boundary coordinate at
/// `t` (disk angle or square perimeter coordinate, unreduced).
pub fn glide(state: &RayState, t: f64) -> Result<f64> {
    let sign = match state.mode {
        RayMode::GlidingCcw => 1.0,
        RayMode::GlidingCw => -1.0,
        RayMode::Interior => {
            return Err(Error::InvalidParameter("glide needs a gliding ray".into()))
        }
    };
    match state.kind {
        DomainKind::UnitDisk | DomainKind::UnitSquare => {
            let s0 = boundary_param_inverse(state.kind, &state.pos)?;
            Ok(s0 + sign * (t - state.t))
        }
        kind => Err(Error::Unsupported {
            kind,
            what: "gliding rays".into(),
        }),
    }
}

/// Bounces plus a polyline of the path, suitable for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub events: Vec<BounceEvent>,
    pub path: Vec<(f64, Point)>,
    pub gliding: bool,
}

pub fn trace(state: &RayState, t_max: f64) -> Result<Trace> {
    if !(t_max > state.t) {
        return Err(Error::InvalidParameter(format!(
            "t_max = {t_max} must exceed t = {}",
            state.t
        )));
    }
    let traj = Trajectory::from_state(state)?;
    trace_trajectory(&traj, state.t, t_max)
}

pub fn trace_trajectory(traj: &Trajectory, t_start: f64, t_max: f64) -> Result<Trace> {
    let mut events = Vec::new();
    if traj.kind() != DomainKind::UnitSphere {
        traj.walk_bounces(t_start, t_max, |ev| {
            events.push(*ev);
            true
        })?;
    }
    let mut path = vec![(t_start, traj.position(t_start))];
    let smooth = traj.is_gliding() || traj.kind() == DomainKind::UnitSphere;
    if smooth {
        let n = (((t_max - t_start) / 0.02).ceil() as usize).clamp(2, 200_000);
        for i in 1..=n {
            let t = t_start + (t_max - t_start) * i as f64 / n as f64;
            path.push((t, traj.position(t)));
        }
    } else {
        for ev in &events {
            path.push((ev.t, ev.point));
        }
        path.push((t_max, traj.position(t_max)));
    }
    Ok(Trace {
        events,
        path,
        gliding: traj.is_gliding(),
    })
}

/// Event-driven square billiard: straight segments between wall hits, specular
/// reflection on edges and retroreflection at vertices. Returns the first `n`
/// events after `t`.
pub fn square_event_walk(mut p: Vec2, mut d: Vec2, mut t: f64, n: usize) -> Vec<BounceEvent> {
    let mut out = Vec::with_capacity(n);
    let hit_time = |z: f64, c: f64| -> f64 {
        if c > TANGENCY_TOL {
            (1.0 - z) / c
        } else if c < -TANGENCY_TOL {
            -z / c
        } else {
            f64::INFINITY
        }
    };
    while out.len() < n {
        let tx = hit_time(p.x, d.x);
        let ty = hit_time(p.y, d.y);
        let dt = tx.min(ty);
        if !dt.is_finite() {
            break;
        }
        let q = p + d * dt;
        let corner = (tx - ty).abs() <= CORNER_TOL;
        let (q, d_out) = if corner {
            (Vec2::new(q.x.round(), q.y.round()), corner_reflect(d))
        } else if tx < ty {
            let q = Vec2::new(q.x.round(), q.y.clamp(0.0, 1.0));
            (q, Vec2::new(-d.x, d.y))
        } else {
            let q = Vec2::new(q.x.clamp(0.0, 1.0), q.y.round());
            (q, Vec2::new(d.x, -d.y))
        };
        t += dt;
        out.push(BounceEvent {
            t,
            point: Point::Plane(q),
            s: square_perimeter_coord(q).unwrap_or(0.0),
            dir_in: Direction::Plane(d),
            dir_out: Direction::Plane(d_out),
            transversal: true,
            corner,
        });
        p = q;
        d = d_out;
    }
    out
}

/// Disk polygon ray with `n` vertices starting at angle `theta0`, time `t0`.
pub fn disk_polygon_ray(n: u32, theta0: f64, t0: f64, clockwise: bool) -> DiskChordRay {
    let alpha = if clockwise {
        TAU - TAU / n as f64
    } else {
        TAU / n as f64
    };
    DiskChordRay {
        theta0,
        alpha,
        t0,
        orientation: 1.0,
    }
}

/// Shortest time for a chord ray of opening `alpha` to return to its initial
/// boundary point and direction (`None` if not a rational multiple of 2π
/// with small denominator).
pub fn polygon_period(n: u32) -> f64 {
    2.0 * n as f64 * (PI / n as f64).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    #[test]
    fn next_bounce_examples() {
        // disk chord with opening π/2 from θ = 0
        let traj = Trajectory::Disk(DiskChordRay::new(0.0, PI / 2.0, 0.0));
        let st = traj.state_at(0.0);
        let ev = next_bounce(&st).unwrap();
        assert_abs_diff_eq!(ev.t, SQRT_2, epsilon = 1e-12);
        let p = ev.point.as_plane().unwrap();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);

        let ev = next_bounce(&RayState::interval(0.3, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(ev.t, 0.7, epsilon = 1e-12);
        assert_eq!(ev.point, Point::Line(1.0));

        let ev = next_bounce(&RayState::planar(
            DomainKind::UnitSquare,
            Vec2::new(0.25, 0.5),
            0.0,
            0.0,
        ))
        .unwrap();
        assert_abs_diff_eq!(ev.t, 0.75, epsilon = 1e-12);
        assert!(ev.transversal && !ev.corner);
        assert_eq!(ev.point, Point::Plane(Vec2::new(1.0, 0.5)));

        let sphere = RayState::sphere(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 0.0);
        assert!(matches!(next_bounce(&sphere), Err(Error::NoBoundary(_))));
    }

    #[test]
    fn disk_state_conversion_matches_chord() {
        // start at the midpoint of the chord from θ = 0 to θ = 2π/3
        let r = DiskChordRay::new(0.0, TAU / 3.0, 0.0);
        let mid = r.chord_time() / 2.0;
        let st = Trajectory::Disk(r).state_at(mid);
        let back = Trajectory::from_state(&st).unwrap();
        for i in 0..50 {
            let t = mid + 0.137 * i as f64;
            let a = Trajectory::Disk(r).position(t);
            let b = back.position(t);
            assert!(a.distance(&b) < 1e-12, "t={t}");
        }
    }

    #[test]
    fn disk_boundary_start_outward_direction_reflects_first() {
        let st = RayState::planar(DomainKind::UnitDisk, Vec2::new(1.0, 0.0), 0.3, 0.0);
        let traj = Trajectory::from_state(&st).unwrap();
        let d = traj.direction(0.01).unwrap();
        match d {
            Direction::Plane(v) => assert!(v.x < 0.0),
            _ => unreachable!(),
        }
        // tangent start glides
        let st = RayState::planar(DomainKind::UnitDisk, Vec2::new(1.0, 0.0), PI / 2.0, 0.0);
        assert!(Trajectory::from_state(&st).unwrap().is_gliding());
    }

    #[test]
    fn trace_examples() {
        // diagonal of the square is 2√2-periodic
        let st = RayState::planar(DomainKind::UnitSquare, Vec2::new(0.0, 0.0), PI / 4.0, 0.0);
        let traj = Trajectory::from_state(&st).unwrap();
        let period = 2.0 * SQRT_2;
        for i in 0..20 {
            let t = 0.1 + 0.31 * i as f64;
            assert!(traj.position(t).distance(&traj.position(t + period)) < 1e-12);
        }
        let tr = trace(&st, 3.0).unwrap();
        assert!(tr.events[0].corner);
        assert_abs_diff_eq!(tr.events[0].t, SQRT_2, epsilon = 1e-12);

        // diameter: 4-periodic through the origin
        let r = DiskChordRay::new(0.3, PI, 0.0);
        let tr = trace_trajectory(&Trajectory::Disk(r), 0.0, 8.5).unwrap();
        let ts: Vec<f64> = tr.events.iter().map(|e| e.t).collect();
        for (i, t) in ts.iter().enumerate() {
            assert_abs_diff_eq!(*t, 2.0 * (i + 1) as f64, epsilon = 1e-12);
        }
        assert!(
            Trajectory::Disk(r)
                .position(1.0)
                .distance(&Point::Plane(Vec2::default()))
                < 1e-12
        );
        assert!(
            Trajectory::Disk(r)
                .position(0.4)
                .distance(&Trajectory::Disk(r).position(4.4))
                < 1e-12
        );

        // interval bounces at 0.5, 1.5, 2.5
        let tr = trace(&RayState::interval(0.5, 1.0, 0.0), 3.0).unwrap();
        let ts: Vec<f64> = tr.events.iter().map(|e| e.t).collect();
        assert_eq!(ts.len(), 3);
        for (i, t) in ts.iter().enumerate() {
            assert_abs_diff_eq!(*t, 0.5 + i as f64, epsilon = 1e-12);
        }
        assert!(trace(&RayState::interval(0.5, 1.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn unfolded_examples() {
        let h = SQRT_2 / 2.0;
        let u = UnfoldState {
            x0: 0.0,
            y0: 0.0,
            c: h,
            s: h,
            t0: 0.0,
        };
        let p = eval_square_unfolded(&u, SQRT_2).as_plane().unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);

        let u = UnfoldState {
            x0: 0.2,
            y0: 0.5,
            c: 1.0,
            s: 0.0,
            t0: 0.0,
        };
        let p = eval_square_unfolded(&u, 1.4).as_plane().unwrap();
        assert_abs_diff_eq!(p.x, 0.4, epsilon = 1e-12);

        let u = UnfoldState::new(0.3, 0.7, 1.1, 2.0);
        assert_eq!(
            eval_square_unfolded(&u, 2.0),
            Point::Plane(Vec2::new(0.3, 0.7))
        );
    }

    #[test]
    fn great_circle_examples() {
        let polar = GreatCircleRay {
            node: 0.0,
            inclination: PI / 2.0,
            phase: 0.0,
            orientation: 1.0,
        };
        assert_abs_diff_eq!(
            eval_great_circle(&polar, PI / 2.0).1,
            PI / 2.0,
            epsilon = 1e-12
        );

        let eq = GreatCircleRay {
            node: 0.4,
            inclination: 0.0,
            phase: 0.0,
            orientation: 1.0,
        };
        for t in [0.1, 1.0, 2.5] {
            let (th, ph) = eval_great_circle(&eq, t);
            assert_abs_diff_eq!(ph, 0.0);
            assert_abs_diff_eq!(th, 0.4 + t, epsilon = 1e-12);
        }
        let g = GreatCircleRay {
            node: 1.0,
            inclination: 0.7,
            phase: 0.3,
            orientation: 1.0,
        };
        for k in -3..4 {
            let t = -0.3 + k as f64 * PI;
            assert_abs_diff_eq!(g.latitude(t), 0.0, epsilon = 1e-12);
        }
        // unit speed, on the sphere
        for i in 0..10 {
            let t = 0.3 * i as f64;
            let dt = 1e-6;
            let v = (g.position(t + dt) - g.position(t - dt)).norm() / (2.0 * dt);
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(g.position(t).norm(), 1.0, epsilon = 1e-12);
            let (lon, lat) = g.position(t).lon_lat();
            assert_abs_diff_eq!(lat, g.latitude(t), epsilon = 1e-12);
            assert!(crate::geometry::wrap_pi(lon - g.longitude(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_state_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let d = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let st = RayState::sphere(p, d, 0.7);
            let traj = Trajectory::from_state(&st).unwrap();
            assert!(traj.position(0.7).distance(&st.pos) < 1e-12);
            match (traj.direction(0.7).unwrap(), st.dir.unwrap()) {
                (Direction::Sphere(a), Direction::Sphere(b)) => assert!((a - b).norm() < 1e-12),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn glide_examples() {
        let st = RayState::gliding(DomainKind::UnitDisk, 0.0, true, 0.0).unwrap();
        assert_abs_diff_eq!(glide(&st, PI).unwrap(), PI);
        let st = RayState::gliding(DomainKind::UnitSquare, 0.5, true, 0.0).unwrap();
        let s = glide(&st, 1.0).unwrap();
        assert_abs_diff_eq!(s, 1.5);
        assert_eq!(square_perimeter_point(s), Vec2::new(1.0, 0.5));
        assert!(RayState::gliding(DomainKind::Interval01, 0.0, true, 0.0).is_err());
        assert!(RayState::gliding(DomainKind::UnitSphere, 0.0, true, 0.0).is_err());
        // small α chords approach the glide: angle gap α, time gap 2 sin(α/2) → α
        for alpha in [1e-2, 1e-4, 1e-6] {
            let r = DiskChordRay::new(0.0, alpha, 0.0);
            assert_abs_diff_eq!(r.chord_time() / alpha, 1.0, epsilon = alpha * alpha);
        }
    }

    #[test]
    fn unfolding_agrees_with_event_driven_walk() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let d = Vec2::from_angle(rng.gen_range(0.0..TAU));
            let events = square_event_walk(p, d, 0.0, 100);
            let u = UnfoldState {
                x0: p.x,
                y0: p.y,
                c: d.x,
                s: d.y,
                t0: 0.0,
            };
            let traj = Trajectory::Square(u);
            let mut from_unfold = Vec::new();
            traj.walk_bounces(0.0, events.last().unwrap().t + 1e-9, |ev| {
                from_unfold.push(*ev);
                true
            })
            .unwrap();
            assert_eq!(from_unfold.len(), events.len());
            for (a, b) in events.iter().zip(&from_unfold) {
                assert!((a.t - b.t).abs() < 1e-9);
                assert!(a.point.distance(&b.point) < 1e-9);
                assert!(eval_square_unfolded(&u, a.t).distance(&a.point) < 1e-9);
            }
        }
    }

    #[test]
    fn disk_chord_recursion_and_periodicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let alpha = rng.gen_range(0.01..TAU - 0.01);
            let r = DiskChordRay::new(rng.gen_range(0.0..TAU), alpha, 0.0);
            let tr = trace_trajectory(&Trajectory::Disk(r), 0.0, 30.0).unwrap();
            for w in tr.events.windows(2) {
                let dtheta = (w[1].s - w[0].s).rem_euclid(TAU);
                let diff = crate::geometry::wrap_pi(dtheta - alpha);
                assert!(diff.abs() < 1e-10);
                assert_abs_diff_eq!(w[1].t - w[0].t, 2.0 * (alpha / 2.0).sin(), epsilon = 1e-10);
            }
            // unit speed along segments
            for w in tr.path.windows(2) {
                let dt = w[1].0 - w[0].0;
                if dt > 1e-6 {
                    assert_abs_diff_eq!(w[1].1.distance(&w[0].1) / dt, 1.0, epsilon = 1e-10);
                }
            }
        }
        for n in 2..12u32 {
            let r = disk_polygon_ray(n, 0.4, 0.0, false);
            let traj = Trajectory::Disk(r);
            let per = polygon_period(n);
            let t = 0.123;
            assert!(traj.position(t).distance(&traj.position(t + per)) < 1e-9);
        }
        // square rational slope p/q returns after 2√(p²+q²)
        for (p, q) in [(1.0f64, 2.0f64), (2.0, 3.0), (3.0, 1.0)] {
            let angle = p.atan2(q);
            let u = UnfoldState::new(0.13, 0.71, angle, 0.0);
            let per = 2.0 * (p * p + q * q).sqrt();
            assert!(
                eval_square_unfolded(&u, 0.2).distance(&eval_square_unfolded(&u, 0.2 + per)) < 1e-9
            );
        }
    }

    #[test]
    fn time_reversal_retraces() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in [DomainKind::UnitDisk, DomainKind::UnitSquare] {
            for _ in 0..100 {
                let p = Vec2::new(rng.gen_range(0.05..0.45), rng.gen_range(0.05..0.45));
                let st = RayState::planar(kind, p, rng.gen_range(0.0..TAU), 0.0);
                let fwd = Trajectory::from_state(&st).unwrap();
                let t_end = 7.3;
                let mut end = fwd.state_at(t_end);
                if let Some(Direction::Plane(d)) = end.dir {
                    end.dir = Some(Direction::Plane(-d));
                }
                end.t = -t_end;
                let back = Trajectory::from_state(&end).unwrap();
                for i in 0..40 {
                    let t = t_end * i as f64 / 40.0;
                    assert!(fwd.position(t).distance(&back.position(-t)) < 1e-9);
                }
            }
        }
    }
}
