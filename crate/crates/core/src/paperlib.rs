//! Closed-form control times, precession speeds, the regular-polygon lemma,
//! and constructive counterexamples for rational-speed obstructions.

use std::f64::consts::{PI, SQRT_2, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gcc::{first_hit_trajectory, RayFamily, SampledRay};
use crate::geometry::{square_perimeter_coord, DomainKind};
use crate::obsdomain::{angular_gap, MovingDomainSpec, Region};

/// Number of grid points used when placing a window phase.
pub const PHASE_GRID: usize = 10_000;
/// Number of grid points used for square ray positions.
pub const POSITION_GRID: usize = 1_000;

/// Control time of the 1D reflecting window.
///
/// The fourth case (v > 1, δ > 0) grows with v, unlike the other three, and
/// disagrees with the simulated control time; see [`t0_1d_is_flagged`].
pub fn t0_1d(v: f64, a: f64, delta: f64) -> Result<f64> {
    if !(v >= 0.0) || !(a > 0.0 && a < 1.0) || !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need v >= 0, a in (0,1), delta >= 0 (got {v}, {a}, {delta})"
        )));
    }
    if v < 1.0 {
        Ok(2.0 * (1.0 - a) / (1.0 + v))
    } else if v == 1.0 && delta > 0.0 {
        Ok(1.0 - a)
    } else if delta == 0.0 {
        if v == 1.0 {
            return Err(Error::FormulaUndefined(
                "v = 1 with delta = 0 is not covered".into(),
            ));
        }
        Ok((1.0 - a) * (3.0 * v + 1.0) / (v * (1.0 + v)))
    } else {
        Ok((2.0 * (1.0 - a) + v * delta) * (1.0 + v))
    }
}

/// True for the (v > 1, δ > 0) branch of [`t0_1d`].
pub fn t0_1d_is_flagged(v: f64, delta: f64) -> bool {
    v > 1.0 && delta > 0.0
}

/// Angular speed of the bounce points of an anticlockwise chord ray.
pub fn precession_ccw(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < TAU) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (0, 2π)"
        )));
    }
    Ok(alpha / (2.0 * (alpha / 2.0).sin()))
}

/// Angular speed of the even bounce points of a clockwise chord ray.
pub fn precession_cw(alpha: f64) -> Result<f64> {
    if !(alpha > PI && alpha < TAU) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (π, 2π)"
        )));
    }
    Ok((alpha - PI) / (2.0 * (alpha / 2.0).sin()))
}

fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// α ∈ (0, 2π) with precession_ccw(α) = v, for v > 1.
pub fn precession_ccw_inverse(v: f64) -> Result<f64> {
    if !(v > 1.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("v = {v} must exceed 1")));
    }
    Ok(bisect_increasing(
        |a| a / (2.0 * (a / 2.0).sin()),
        v,
        0.0,
        TAU,
    ))
}

/// α ∈ (π, 2π) with precession_cw(α) = v, for v > 0.
pub fn precession_cw_inverse(v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("v = {v} must be positive")));
    }
    Ok(bisect_increasing(
        |a| (a - PI) / (2.0 * (a / 2.0).sin()),
        v,
        PI,
        TAU,
    ))
}

/// Speeds for which the stop-and-go schedule satisfies the t-GCC.
pub fn stop_and_go_interval(a: f64) -> Result<(f64, f64)> {
    if !(0.8 * PI - 1e-12..=PI).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "a = {a} outside [4π/5, π]: empty interval"
        )));
    }
    let s = (a / 2.0).sin();
    Ok(((PI - a) / (2.0 * s), (3.0 * a - 2.0 * PI) / (4.0 * s)))
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The set {k p π / q mod 2π : k = 1..2q} as sorted residues j, meaning the
/// angles j π / q with 0 ≤ j < 2q.
pub fn polygon_vertex_set(p: u64, q: u64) -> Result<Vec<u64>> {
    if p == 0 || q == 0 || gcd(p, q) != 1 {
        return Err(Error::InvalidParameter(format!(
            "p = {p}, q = {q} must be coprime positive integers"
        )));
    }
    if p % 2 == 1 {
        Ok((0..2 * q).collect())
    } else {
        Ok((0..q).map(|k| 2 * k).collect())
    }
}

pub fn polygon_vertex_angles(p: u64, q: u64) -> Result<Vec<f64>> {
    Ok(polygon_vertex_set(p, q)?
        .into_iter()
        .map(|j| j as f64 * PI / q as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedThresholds {
    pub kind: DomainKind,
    /// Sufficient-speed bound (disk, square) or small-speed bound (sphere).
    pub v0: f64,
    /// Sphere sufficient-speed bound.
    pub v1: Option<f64>,
}

pub fn speed_thresholds(kind: DomainKind, a: f64, eps: f64) -> Result<SpeedThresholds> {
    match kind {
        DomainKind::UnitSphere => {
            check_angle_params(a, eps)?;
            Ok(SpeedThresholds {
                kind,
                v0: a / TAU,
                v1: Some((TAU - a + 2.0 * eps) / (2.0 * eps)),
            })
        }
        DomainKind::UnitDisk => {
            check_angle_params(a, eps)?;
            Ok(SpeedThresholds {
                kind,
                v0: (TAU + 2.0 * eps - a) / (2.0 * eps),
                v1: None,
            })
        }
        DomainKind::UnitSquare => {
            if !(a > 0.0 && a < 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "a = {a} must lie in (0, 1/2)"
                )));
            }
            Ok(SpeedThresholds {
                kind,
                v0: (2.0 - a) / a,
                v1: None,
            })
        }
        DomainKind::Interval01 => Err(Error::Unsupported {
            kind,
            what: "speed thresholds (use t0_1d)".into(),
        }),
    }
}

fn check_angle_params(a: f64, eps: f64) -> Result<()> {
    if !(a > 0.0 && a < TAU) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need a in (0, 2π), eps > 0 (got {a}, {eps})"
        )));
    }
    Ok(())
}

/// Two-sided bounds on T₀ in the asymptotic regimes.
pub fn asymptotic_bounds(kind: DomainKind, v: f64, a: f64, eps: f64) -> Result<(f64, f64)> {
    let th = speed_thresholds(kind, a, eps)?;
    match kind {
        DomainKind::UnitSphere => {
            if v > th.v1.unwrap_or(f64::INFINITY) {
                let lo = PI - 2.0 * eps;
                Ok((lo, lo + 2.0 * (PI + eps) / v))
            } else if v > 0.0 && v < th.v0 {
                let lo = (PI - a) / v;
                Ok((lo, lo + TAU))
            } else {
                Err(Error::NoClosedForm(format!(
                    "sphere speed v = {v} between {} and {:?}",
                    th.v0, th.v1
                )))
            }
        }
        DomainKind::UnitDisk => {
            if v > th.v0 {
                let lo = 2.0 - 2.0 * eps;
                Ok((lo, lo + (TAU + 2.0 * eps) / v))
            } else {
                Err(Error::NoClosedForm(format!(
                    "disk speed v = {v} below {}",
                    th.v0
                )))
            }
        }
        DomainKind::UnitSquare => {
            if v > th.v0 {
                let lo = (SQRT_2 * (1.0 - 2.0 * a)).max(0.0);
                Ok((lo, lo + (4.0 + 2.0 * a) / v))
            } else {
                Err(Error::NoClosedForm(format!(
                    "square speed v = {v} below {}",
                    th.v0
                )))
            }
        }
        DomainKind::Interval01 => unreachable!(),
    }
}

/// Arithmetic obstruction to the t-GCC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstruction {
    /// v = 1: equatorial ray rotating with the window.
    SphereEquatorial,
    /// v = p/q: meridian ray crossing the equator at t_k = t0 + kπ.
    SphereTransversal { p: u64, q: u64 },
    /// Regular n-gon ray with 2 v sin(π/n) = 2π p/q.
    DiskPolygon { n: u64, p: u64, q: u64 },
    /// v > 1 equal to the anticlockwise precession speed of some α.
    DiskPrecession { v: f64 },
    /// v > 0 equal to the clockwise precession speed of some α ∈ (π, 2π).
    DiskClockwise { v: f64 },
    /// Slope p/q (direction (q, p)) and v = (r_num/r_den) √(p² + q²).
    Square {
        p: u64,
        q: u64,
        r_num: u64,
        r_den: u64,
    },
}

impl Obstruction {
    pub fn kind(&self) -> DomainKind {
        match self {
            Obstruction::SphereEquatorial | Obstruction::SphereTransversal { .. } => {
                DomainKind::UnitSphere
            }
            Obstruction::Square { .. } => DomainKind::UnitSquare,
            _ => DomainKind::UnitDisk,
        }
    }

    pub fn speed(&self) -> f64 {
        match *self {
            Obstruction::SphereEquatorial => 1.0,
            Obstruction::SphereTransversal { p, q } => p as f64 / q as f64,
            Obstruction::DiskPolygon { n, p, q } => {
                PI * p as f64 / (q as f64 * (PI / n as f64).sin())
            }
            Obstruction::DiskPrecession { v } | Obstruction::DiskClockwise { v } => v,
            Obstruction::Square { p, q, r_num, r_den } => {
                r_num as f64 / r_den as f64 * ((p * p + q * q) as f64).sqrt()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Obstruction::SphereEquatorial => "sphere_equatorial",
            Obstruction::SphereTransversal { .. } => "sphere_transversal",
            Obstruction::DiskPolygon { .. } => "disk_polygon",
            Obstruction::DiskPrecession { .. } => "disk_precession",
            Obstruction::DiskClockwise { .. } => "disk_clockwise",
            Obstruction::Square { .. } => "square",
        }
    }

    fn validate(&self) -> Result<()> {
        let coprime = |p: u64, q: u64| {
            if q == 0 || gcd(p, q) != 1 {
                Err(Error::InvalidParameter(format!(
                    "p = {p}, q = {q} must be coprime with q > 0"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            Obstruction::SphereEquatorial => Ok(()),
            Obstruction::SphereTransversal { p, q } => {
                coprime(p, q)?;
                if p == 0 {
                    return Err(Error::InvalidParameter(
                        "sphere speed must be positive".into(),
                    ));
                }
                Ok(())
            }
            Obstruction::DiskPolygon { n, p, q } => {
                if n < 2 {
                    return Err(Error::InvalidParameter("polygon needs n >= 2".into()));
                }
                coprime(p, q)
            }
            Obstruction::DiskPrecession { v } => precession_ccw_inverse(v).map(|_| ()),
            Obstruction::DiskClockwise { v } => precession_cw_inverse(v).map(|_| ()),
            Obstruction::Square { p, q, r_num, r_den } => {
                if p == 0 && q == 0 {
                    return Err(Error::InvalidParameter(
                        "slope p/q needs p or q nonzero".into(),
                    ));
                }
                if gcd(p, q) != 1 {
                    return Err(Error::InvalidParameter(format!(
                        "p = {p}, q = {q} must be coprime"
                    )));
                }
                if r_num == 0 || r_den == 0 {
                    return Err(Error::InvalidParameter(
                        "r must be a positive rational".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub obstruction: Obstruction,
    pub v: f64,
    /// Region (window length a and width ε set to the values used).
    pub spec: MovingDomainSpec,
    pub ray: SampledRay,
    pub valid_a0: f64,
    pub valid_eps0: Option<f64>,
    /// Minimal distance kept between the ray and the region.
    pub clearance: f64,
    pub horizon: f64,
    /// Enlarged window length for the sharpness check.
    pub sharp_a: f64,
}

/// Largest circular gap of a point set modulo `period`: (start, length).
fn largest_gap(points: &[f64], period: f64) -> (f64, f64) {
    let mut pts: Vec<f64> = points.iter().map(|x| x.rem_euclid(period)).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if pts.len() == 1 {
        return (pts[0], period);
    }
    let mut best = (pts[pts.len() - 1], pts[0] + period - pts[pts.len() - 1]);
    for w in pts.windows(2) {
        if w[1] - w[0] > best.1 {
            best = (w[0], w[1] - w[0]);
        }
    }
    best
}

/// Brute-force window phase on a uniform grid maximizing the distance from
/// the window to the point set; the first index wins ties.
fn best_phase(points: &[f64], a: f64, period: f64) -> (f64, f64) {
    let mut pts: Vec<f64> = points.iter().map(|x| x.rem_euclid(period)).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let scores: Vec<f64> = (0..PHASE_GRID)
        .into_par_iter()
        .map(|j| {
            let phi = period * j as f64 / PHASE_GRID as f64;
            pts.iter()
                .map(|d| angular_gap(*d, phi, a, period))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut best = (0usize, f64::NEG_INFINITY);
    for (j, s) in scores.iter().enumerate() {
        if *s > best.1 {
            best = (j, *s);
        }
    }
    (period * best.0 as f64 / PHASE_GRID as f64, best.1)
}

/// Time a chord of opening α spends in the ring r > 1 − ε after a bounce,
/// or `None` if the chord never leaves the ring.
fn ring_exit_time(alpha: f64, eps: f64) -> Option<f64> {
    let s = (alpha / 2.0).sin().abs();
    let disc = s * s - (2.0 * eps - eps * eps);
    if disc < 0.0 {
        None
    } else {
        Some(s - disc.sqrt())
    }
}

fn largest_eps(ok: impl Fn(f64) -> bool, cap: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, cap);
    if ok(hi) {
        return Some(hi);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 0.0 {
        Some(lo)
    } else {
        None
    }
}

fn too_large(a: f64, a0: f64) -> Error {
    Error::ObstructionFails(format!("region too large: a = {a} exceeds a0 = {a0}"))
}

/// Builds a ray and window placement that never meet, for the given
/// obstruction. `a` and `eps` default to the largest admissible values.
pub fn make_counterexample(
    ob: Obstruction,
    a: Option<f64>,
    eps: Option<f64>,
) -> Result<Counterexample> {
    ob.validate()?;
    let v = ob.speed();
    match ob {
        Obstruction::SphereEquatorial | Obstruction::SphereTransversal { .. } => {
            sphere_counterexample(ob, v, a, eps)
        }
        Obstruction::Square { p, q, r_num, r_den } => {
            square_counterexample(ob, p, q, r_num, r_den, v, a)
        }
        _ => disk_counterexample(ob, v, a, eps),
    }
}

fn angular_setup(points: &[f64], a: Option<f64>) -> Result<(f64, f64, f64, f64)> {
    let (_, gap) = largest_gap(points, TAU);
    let a0 = gap / 2.0;
    let a_used = a.unwrap_or(a0);
    if a_used > a0 {
        return Err(too_large(a_used, a0));
    }
    if !(a_used > 0.0) {
        return Err(Error::EmptyRegion(format!("a = {a_used}")));
    }
    let (phase, clearance) = best_phase(points, a_used, TAU);
    if !(clearance > 0.0) {
        return Err(Error::ObstructionFails(
            "no window phase with positive clearance".into(),
        ));
    }
    Ok((a0, a_used, phase, clearance))
}

fn sphere_counterexample(
    ob: Obstruction,
    v: f64,
    a: Option<f64>,
    eps: Option<f64>,
) -> Result<Counterexample> {
    let horizon: f64 = 100.0;
    let cap = PI / 2.0 - 1e-9;
    let (ray, points, eps0) = match ob {
        Obstruction::SphereEquatorial => {
            let ray = SampledRay::new(RayFamily::Sphere { orientation: 1.0 }, vec![0.0, 0.0, 0.0]);
            // longitude t against window v t: the relative angle is constant
            (ray, vec![0.0], None)
        }
        _ => {
            let ray = SampledRay::new(
                RayFamily::Sphere { orientation: 1.0 },
                vec![0.0, PI / 2.0, 0.0],
            );
            let k_max = (horizon / PI).ceil() as i64 + 1;
            let pts: Vec<f64> = (0..=k_max)
                .map(|k| k as f64 * PI - v * k as f64 * PI)
                .collect();
            (ray, pts, Some(()))
        }
    };
    let (a0, a_used, phase, clearance) = angular_setup(&points, a)?;
    // meridian ray: latitude changes at unit speed, longitude is fixed while
    // in the band, the window moves v ε during a crossing
    let eps0 = match eps0 {
        None => cap,
        Some(()) => (clearance / (2.0 * v)).min(cap),
    };
    let eps_used = eps.unwrap_or(eps0);
    if eps_used > eps0 {
        return Err(Error::ObstructionFails(format!(
            "eps = {eps_used} exceeds eps0 = {eps0}"
        )));
    }
    let spec = MovingDomainSpec::sphere(v, a_used, eps_used).with_offset(phase);
    finish(ob, v, spec, ray, a0, Some(eps0), clearance, horizon)
}

fn disk_counterexample(
    ob: Obstruction,
    v: f64,
    a: Option<f64>,
    eps: Option<f64>,
) -> Result<Counterexample> {
    let horizon: f64 = 200.0;
    let alpha = match ob {
        Obstruction::DiskPolygon { n, .. } => TAU / n as f64,
        Obstruction::DiskPrecession { v } => precession_ccw_inverse(v)?,
        Obstruction::DiskClockwise { v } => precession_cw_inverse(v)?,
        _ => unreachable!(),
    };
    if let (Obstruction::DiskClockwise { .. }, Some(a)) = (ob, a) {
        if a >= PI {
            return Err(too_large(a, PI));
        }
    }
    let dt = 2.0 * (alpha / 2.0).sin();
    let k_max = (horizon / dt).ceil() as i64 + 1;
    let points: Vec<f64> = (0..=k_max)
        .map(|k| k as f64 * alpha - v * k as f64 * dt)
        .collect();
    let (a0, a_used, phase, clearance) = angular_setup(&points, a)?;
    let ok = |e: f64| match ring_exit_time(alpha, e) {
        Some(s) => s * (1.0 / (1.0 - e) + v) <= clearance / 2.0,
        None => false,
    };
    let eps0 = largest_eps(ok, 0.999)
        .ok_or_else(|| Error::ObstructionFails("no ring width keeps the clearance".into()))?;
    let eps_used = eps.unwrap_or(eps0);
    if eps_used > eps0 {
        return Err(Error::ObstructionFails(format!(
            "eps = {eps_used} exceeds eps0 = {eps0}"
        )));
    }
    let ray = SampledRay::new(RayFamily::DiskChord, vec![0.0, alpha, 0.0]);
    let spec = MovingDomainSpec::disk(v, a_used, eps_used).with_offset(phase);
    finish(ob, v, spec, ray, a0, Some(eps0), clearance, horizon)
}

/// Smallest m ≥ 1 with 2 r (p² + q²) m ∈ 4ℤ: the window returns to its
/// start after m periods of the ray.
fn joint_periods(p: u64, q: u64, r_num: u64, r_den: u64) -> u64 {
    let num = r_num * (p * p + q * q);
    (1..=4 * r_den)
        .find(|m| (num * m).is_multiple_of(2 * r_den))
        .unwrap_or(4 * r_den)
}

fn square_counterexample(
    ob: Obstruction,
    p: u64,
    q: u64,
    r_num: u64,
    r_den: u64,
    v: f64,
    a: Option<f64>,
) -> Result<Counterexample> {
    let horizon: f64 = 200.0;
    let norm = ((p * p + q * q) as f64).sqrt();
    let beta = (p as f64).atan2(q as f64);
    let period = 2.0 * norm;
    let m = joint_periods(p, q, r_num, r_den);
    let span = period * m as f64;
    let start = |i: usize| -> (f64, f64) {
        let z = (i as f64 + 0.5) / POSITION_GRID as f64;
        if p == 0 {
            (0.0, z)
        } else {
            (z, 0.0)
        }
    };
    // bounce times and perimeter points over one joint period
    let bounces = |x0: f64, y0: f64| -> Vec<(f64, f64)> {
        let ray = SampledRay::new(RayFamily::SquareState, vec![x0, y0, beta]);
        let traj = ray.trajectory().expect("square ray");
        let mut out = vec![(
            0.0,
            square_perimeter_coord(crate::geometry::Vec2::new(x0, y0)).unwrap_or(0.0),
        )];
        let _ = traj.walk_bounces(0.0, span, |ev| {
            out.push((ev.t, ev.s));
            true
        });
        out
    };
    let perim_dist = |s: f64, d: f64| {
        let r = (s - d).rem_euclid(4.0);
        r.min(4.0 - r)
    };
    let scores: Vec<(usize, f64)> = (0..POSITION_GRID)
        .into_par_iter()
        .map(|i| {
            let (x0, y0) = start(i);
            let bs = bounces(x0, y0);
            let mut best = (0usize, f64::NEG_INFINITY);
            for j in 0..PHASE_GRID {
                let off = 4.0 * j as f64 / PHASE_GRID as f64;
                let sc = bs
                    .iter()
                    .map(|(t, s)| perim_dist(*s, off + v * t))
                    .fold(f64::INFINITY, f64::min);
                if sc > best.1 {
                    best = (j, sc);
                }
            }
            best
        })
        .collect();
    let mut pick = (0usize, 0usize, f64::NEG_INFINITY);
    for (i, (j, s)) in scores.iter().enumerate() {
        if *s > pick.2 {
            pick = (i, *j, *s);
        }
    }
    if !(pick.2 > 0.0) {
        return Err(Error::ObstructionFails(
            "no start and phase keep the window off the bounce points".into(),
        ));
    }
    let (x0, y0) = start(pick.0);
    let offset = 4.0 * pick.1 as f64 / PHASE_GRID as f64;
    let ray = SampledRay::new(RayFamily::SquareState, vec![x0, y0, beta]);
    let traj = ray.trajectory()?;
    // continuous L∞ clearance over the verification horizon
    let probe = MovingDomainSpec::square(v, 1.0).with_offset(offset);
    let h = 1e-3;
    let n = (horizon.min(span) / h).ceil() as usize;
    let sampled = (0..=n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * h;
            let pos = traj.position(t).as_plane().unwrap();
            let c = probe.square_center(t);
            (pos.x - c.x).abs().max((pos.y - c.y).abs())
        })
        .reduce(|| f64::INFINITY, f64::min);
    let clearance = sampled - h * (1.0 + v);
    if !(clearance > 0.0) {
        return Err(Error::ObstructionFails(
            "ray passes too close to the window path".into(),
        ));
    }
    let a0 = clearance / 2.0;
    let a_used = a.unwrap_or(a0);
    if a_used > a0 {
        return Err(too_large(a_used, a0));
    }
    let spec = MovingDomainSpec::square(v, a_used).with_offset(offset);
    let mut c = finish(ob, v, spec, ray, a0, None, clearance, horizon)?;
    c.sharp_a = sampled + 1e-9;
    Ok(c)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ob: Obstruction,
    v: f64,
    spec: MovingDomainSpec,
    ray: SampledRay,
    a0: f64,
    eps0: Option<f64>,
    clearance: f64,
    horizon: f64,
) -> Result<Counterexample> {
    let sharp_a = (2.0 * spec.a + clearance).min(TAU);
    let c = Counterexample {
        obstruction: ob,
        v,
        spec,
        ray,
        valid_a0: a0,
        valid_eps0: eps0,
        clearance,
        horizon,
        sharp_a,
    };
    if let Some(t) = replay(&c)? {
        return Err(Error::ObstructionFails(format!("replay hit at t = {t}")));
    }
    Ok(c)
}

/// First hit of the counterexample ray over its verification horizon
/// (`None` means the obstruction holds).
pub fn replay(c: &Counterexample) -> Result<Option<f64>> {
    replay_with(&c.spec, &c.ray, c.horizon)
}

pub fn replay_with(spec: &MovingDomainSpec, ray: &SampledRay, horizon: f64) -> Result<Option<f64>> {
    let region = Region::Moving(spec.clone());
    first_hit_trajectory(&region, &ray.trajectory()?, 0.0, horizon)
}

/// Region with the window enlarged past the clearance, same center.
pub fn sharpened_spec(c: &Counterexample) -> MovingDomainSpec {
    let mut s = c.spec.clone();
    if s.kind != DomainKind::UnitSquare {
        let center = s.offset + s.a / 2.0;
        s.offset = center - c.sharp_a / 2.0;
    }
    s.a = c.sharp_a;
    s
}

/// Replays the ray against the enlarged window; a hit confirms the
/// construction depends on its margin.
pub fn sharpness_check(c: &Counterexample) -> Result<Option<f64>> {
    replay_with(&sharpened_spec(c), &c.ray, c.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeSet;

    #[test]
    fn t0_1d_cases() {
        assert_abs_diff_eq!(t0_1d(0.5, 0.25, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t0_1d(1.0, 0.5, 0.2).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t0_1d(2.0, 0.25, 0.0).unwrap(), 0.875, epsilon = 1e-15);
        assert_abs_diff_eq!(t0_1d(3.0, 0.5, 0.1).unwrap(), 5.2, epsilon = 1e-12);
        assert!(t0_1d_is_flagged(3.0, 0.1));
        assert!(matches!(
            t0_1d(1.0, 0.5, 0.0),
            Err(Error::FormulaUndefined(_))
        ));
    }

    #[test]
    fn precession_examples() {
        assert_abs_diff_eq!(precession_ccw(PI).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(precession_ccw(1e-8).unwrap(), 1.0, epsilon = 1e-12);
        let alpha = precession_ccw_inverse(2.0).unwrap();
        // plain bisection oracle on the monotone formula
        let (mut lo, mut hi) = (PI, TAU - 1e-9);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid / (2.0 * (mid / 2.0).sin()) < 2.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((alpha - lo).abs() < 1e-10, "{alpha}");
        assert!((alpha - 3.788).abs() < 5e-3);
        assert!((precession_ccw(alpha).unwrap() - 2.0).abs() < 1e-10);
        assert!(precession_cw(PI + 1e-9).unwrap() < 1e-8);
        let alpha = precession_cw_inverse(0.5).unwrap();
        assert!(alpha > PI && alpha < TAU);
        assert!((precession_cw(alpha).unwrap() - 0.5).abs() < 1e-10);
        assert!(precession_ccw(0.0).is_err() && precession_cw(PI).is_err());
    }

    #[test]
    fn precession_monotone_and_inverse() {
        let n = 10_000;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..n {
            let a = TAU * i as f64 / n as f64;
            let w = precession_ccw(a).unwrap();
            assert!(w > prev);
            prev = w;
            let back = precession_ccw_inverse(w).unwrap();
            assert!((back - a).abs() < 1e-10, "{a} {back}");
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 1..n {
            let a = PI + PI * i as f64 / n as f64;
            let w = precession_cw(a).unwrap();
            assert!(w > prev);
            prev = w;
            let back = precession_cw_inverse(w).unwrap();
            assert!((back - a).abs() < 1e-10, "{a} {back}");
        }
    }

    #[test]
    fn stop_and_go_examples() {
        let (lo, hi) = stop_and_go_interval(0.9 * PI).unwrap();
        // independent evaluation of both ends of the admissible chain
        let s = (0.45 * PI).sin();
        assert_abs_diff_eq!(lo, 0.1 * PI / (2.0 * s), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.7 * PI / (4.0 * s), epsilon = 1e-15);
        assert!((lo - 0.15904).abs() < 1e-5 && (hi - 0.55663).abs() < 1e-5);
        let (lo, hi) = stop_and_go_interval(PI).unwrap();
        assert_abs_diff_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, PI / 4.0, epsilon = 1e-15);
        // h(π) = π/4 matches the clockwise precession context
        let (lo, hi) = stop_and_go_interval(0.8 * PI).unwrap();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-12);
        assert!(stop_and_go_interval(0.5 * PI).is_err());
    }

    #[test]
    fn polygon_vertex_examples() {
        assert_eq!(
            polygon_vertex_set(3, 4).unwrap(),
            (0..8).collect::<Vec<u64>>()
        );
        assert_eq!(polygon_vertex_set(2, 3).unwrap(), vec![0, 2, 4]);
        assert!(polygon_vertex_set(2, 4).is_err());
    }

    #[test]
    fn polygon_vertex_set_matches_enumeration() {
        for p in 1..=30u64 {
            for q in 1..=30u64 {
                if gcd(p, q) != 1 {
                    continue;
                }
                let brute: BTreeSet<u64> = (1..=2 * q).map(|k| (k * p) % (2 * q)).collect();
                let got: BTreeSet<u64> = polygon_vertex_set(p, q).unwrap().into_iter().collect();
                assert_eq!(brute, got, "p={p} q={q}");
            }
        }
    }

    #[test]
    fn threshold_and_bound_examples() {
        let th = speed_thresholds(DomainKind::UnitSphere, PI / 2.0, PI / 12.0).unwrap();
        assert_abs_diff_eq!(th.v1.unwrap(), 10.0, epsilon = 1e-12);
        let (lo, hi) =
            asymptotic_bounds(DomainKind::UnitSphere, 20.0, PI / 2.0, PI / 12.0).unwrap();
        assert_abs_diff_eq!(lo, PI - PI / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            hi,
            PI - PI / 6.0 + 2.0 * (PI + PI / 12.0) / 20.0,
            epsilon = 1e-12
        );
        let th = speed_thresholds(DomainKind::UnitDisk, PI / 2.0, 0.1).unwrap();
        assert_abs_diff_eq!(th.v0, (TAU + 0.2 - PI / 2.0) / 0.2, epsilon = 1e-12);
        assert!((th.v0 - 24.5620).abs() < 1e-4);
        let (lo, _) = asymptotic_bounds(DomainKind::UnitSquare, 20.0, 0.25, 0.0).unwrap();
        assert_abs_diff_eq!(
            speed_thresholds(DomainKind::UnitSquare, 0.25, 0.0)
                .unwrap()
                .v0,
            7.0
        );
        assert_abs_diff_eq!(lo, SQRT_2 / 2.0, epsilon = 1e-12);
        assert!(matches!(
            asymptotic_bounds(DomainKind::UnitDisk, 5.0, PI / 2.0, 0.1),
            Err(Error::NoClosedForm(_))
        ));
        let (lo, hi) = asymptotic_bounds(DomainKind::UnitSphere, 0.01, 0.5, 0.2).unwrap();
        assert_abs_diff_eq!(lo, (PI - 0.5) / 0.01, epsilon = 1e-9);
        assert_abs_diff_eq!(hi - lo, TAU, epsilon = 1e-9);
        assert!(matches!(
            asymptotic_bounds(DomainKind::UnitSphere, 3.0, 0.5, 0.2),
            Err(Error::NoClosedForm(_))
        ));
    }

    fn assert_counterexample(c: &Counterexample) {
        assert!(c.clearance > 0.0);
        assert_eq!(replay(c).unwrap(), None, "{:?}", c.obstruction);
        assert!(
            sharpness_check(c).unwrap().is_some(),
            "{:?} not sharp",
            c.obstruction
        );
    }

    #[test]
    fn counterexamples_replay_hit_free() {
        let obs = [
            Obstruction::SphereEquatorial,
            Obstruction::SphereTransversal { p: 1, q: 3 },
            Obstruction::DiskPolygon { n: 2, p: 1, q: 1 },
            Obstruction::DiskPolygon { n: 3, p: 1, q: 2 },
            Obstruction::DiskPrecession { v: 2.0 },
            Obstruction::DiskClockwise { v: 0.5 },
            Obstruction::Square {
                p: 0,
                q: 1,
                r_num: 1,
                r_den: 2,
            },
        ];
        for ob in obs {
            let c = make_counterexample(ob, None, None).unwrap();
            assert_counterexample(&c);
        }
    }

    #[test]
    fn counterexample_rejects_large_windows() {
        let r = make_counterexample(
            Obstruction::DiskPolygon { n: 2, p: 1, q: 1 },
            Some(2.0),
            None,
        );
        assert!(matches!(r, Err(Error::ObstructionFails(_))));
        assert!(
            make_counterexample(Obstruction::DiskPolygon { n: 2, p: 2, q: 2 }, None, None).is_err()
        );
    }

    #[test]
    fn disk_polygon_speed_matches_arithmetic_condition() {
        for (n, p, q) in [(2u64, 1u64, 1u64), (3, 2, 5), (6, 1, 3)] {
            let v = Obstruction::DiskPolygon { n, p, q }.speed();
            let lhs = 2.0 * v * (PI / n as f64).sin();
            assert_abs_diff_eq!(lhs, TAU * p as f64 / q as f64, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            Obstruction::DiskPolygon { n: 2, p: 1, q: 1 }.speed(),
            PI,
            epsilon = 1e-15
        );
    }
}
