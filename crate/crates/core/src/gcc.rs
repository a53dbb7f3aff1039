//! t-GCC checks and control-time estimation over sampled rays.
//!
//! The control time of a region is the supremum over rays of the first time
//! the ray meets it, so a single pass over the sample (plus a local pattern
//! search around the worst ray) gives a lower estimate of it.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, Point, UnfoldState, Vec2};
use crate::obsdomain::{Mode, MovingDomainSpec, Region};
use crate::rayflow::{DiskChordRay, GreatCircleRay, RayState, Trajectory, MAX_BOUNCES};

/// Hit time assigned to rays starting inside ω(0).
pub const HIT_AT_START: f64 = 1e-12;
/// Bisection tolerance on hit times.
pub const HIT_TOL: f64 = 1e-10;
/// Number of step halvings in the pattern search.
pub const REFINE_HALVINGS: usize = 40;

/// Bracketing never steps less than τ / STEP_FLOOR_DIVISOR, τ being the
/// region's feature timescale.
pub const STEP_FLOOR_DIVISOR: f64 = 64.0;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, PartialEq)]
pub struct RaySampling {
    /// 1D starting positions per direction.
    pub interval_positions: usize,
    /// Disk/square grid positions.
    pub positions: usize,
    pub directions: usize,
    pub square_positions: usize,
    pub sphere_nodes: usize,
    pub sphere_inclinations: usize,
    pub sphere_phases: usize,
    /// Start points per orientation for gliding rays.
    pub gliding_starts: usize,
    pub polygon_n_max: u32,
    /// Rotations and chord offsets per polygon ray.
    pub polygon_rotations: usize,
    pub polygon_offsets: usize,
    pub rational_q_max: u32,
    pub rational_starts: usize,
    pub axis_starts: usize,
    pub seed: u64,
    pub jitter: bool,
    /// Run the pattern search around the worst ray in `estimate_t0`.
    pub refine: bool,
}

impl Default for RaySampling {
    fn default() -> Self {
        RaySampling {
            interval_positions: 512,
            positions: 256,
            directions: 256,
            square_positions: 512,
            sphere_nodes: 64,
            sphere_inclinations: 32,
            sphere_phases: 64,
            gliding_starts: 64,
            polygon_n_max: 64,
            polygon_rotations: 8,
            polygon_offsets: 4,
            rational_q_max: 12,
            rational_starts: 8,
            axis_starts: 64,
            seed: 0,
            jitter: true,
            refine: true,
        }
    }
}

impl RaySampling {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Coarser grids for quick runs; special families keep their sizes.
    pub fn coarse(mut self, factor: usize) -> Self {
        let f = factor.max(1);
        self.interval_positions = (self.interval_positions / f).max(8);
        self.positions = (self.positions / f).max(8);
        self.directions = (self.directions / f).max(8);
        self.square_positions = (self.square_positions / f).max(8);
        self.sphere_nodes = (self.sphere_nodes / f).max(4);
        self.sphere_inclinations = (self.sphere_inclinations / f).max(4);
        self.sphere_phases = (self.sphere_phases / f).max(4);
        self
    }
}

/// Parametrized ray family; `params` of a [`SampledRay`] are the continuous
/// coordinates the pattern search moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayFamily {
    /// params: [x0]
    Interval { dir: f64 },
    /// params: [r, φ, β] (polar position, direction angle)
    DiskState,
    /// params: [θ0, α, t0] with t0 ∈ [−2 sin(α/2), 0]
    DiskChord,
    /// params: [θ0]
    DiskGlide { ccw: bool },
    /// params: [x, y, β]
    SquareState,
    /// params: [s0]
    SquareGlide { ccw: bool },
    /// params: [node, ι, phase]
    Sphere { orientation: f64 },
}

impl RayFamily {
    pub fn name(&self) -> String {
        match self {
            RayFamily::Interval { dir } => {
                format!("interval_{}", if *dir > 0.0 { "right" } else { "left" })
            }
            RayFamily::DiskState => "disk_state".into(),
            RayFamily::DiskChord => "disk_chord".into(),
            RayFamily::DiskGlide { ccw } => {
                format!("disk_glide_{}", if *ccw { "ccw" } else { "cw" })
            }
            RayFamily::SquareState => "square_state".into(),
            RayFamily::SquareGlide { ccw } => {
                format!("square_glide_{}", if *ccw { "ccw" } else { "cw" })
            }
            RayFamily::Sphere { orientation } => {
                format!("sphere_{}", if *orientation > 0.0 { "pos" } else { "neg" })
            }
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "interval_right" => RayFamily::Interval { dir: 1.0 },
            "interval_left" => RayFamily::Interval { dir: -1.0 },
            "disk_state" => RayFamily::DiskState,
            "disk_chord" => RayFamily::DiskChord,
            "disk_glide_ccw" => RayFamily::DiskGlide { ccw: true },
            "disk_glide_cw" => RayFamily::DiskGlide { ccw: false },
            "square_state" => RayFamily::SquareState,
            "square_glide_ccw" => RayFamily::SquareGlide { ccw: true },
            "square_glide_cw" => RayFamily::SquareGlide { ccw: false },
            "sphere_pos" => RayFamily::Sphere { orientation: 1.0 },
            "sphere_neg" => RayFamily::Sphere { orientation: -1.0 },
            _ => return None,
        })
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            RayFamily::Interval { .. } => DomainKind::Interval01,
            RayFamily::DiskState | RayFamily::DiskChord | RayFamily::DiskGlide { .. } => {
                DomainKind::UnitDisk
            }
            RayFamily::SquareState | RayFamily::SquareGlide { .. } => DomainKind::UnitSquare,
            RayFamily::Sphere { .. } => DomainKind::UnitSphere,
        }
    }

    fn initial_steps(&self) -> Vec<f64> {
        match self {
            RayFamily::Interval { .. } => vec![1.0 / 64.0],
            RayFamily::DiskState => vec![1.0 / 32.0, TAU / 128.0, TAU / 128.0],
            RayFamily::DiskChord => vec![TAU / 128.0, 0.01, 0.02],
            RayFamily::DiskGlide { .. } => vec![TAU / 128.0],
            RayFamily::SquareState => vec![1.0 / 32.0, 1.0 / 32.0, TAU / 128.0],
            RayFamily::SquareGlide { .. } => vec![1.0 / 32.0],
            RayFamily::Sphere { .. } => vec![TAU / 128.0, PI / 64.0, TAU / 128.0],
        }
    }

    fn clamp(&self, p: &mut [f64]) {
        match self {
            RayFamily::Interval { .. } => p[0] = p[0].clamp(0.0, 1.0),
            RayFamily::DiskState => p[0] = p[0].clamp(0.0, 1.0),
            RayFamily::DiskChord => {
                p[1] = p[1].clamp(1e-12, TAU - 1e-12);
                let dt = 2.0 * (p[1] / 2.0).sin();
                p[2] = p[2].clamp(-dt, 0.0);
            }
            RayFamily::SquareState => {
                p[0] = p[0].clamp(0.0, 1.0);
                p[1] = p[1].clamp(0.0, 1.0);
            }
            RayFamily::Sphere { .. } => p[1] = p[1].clamp(0.0, PI / 2.0),
            RayFamily::DiskGlide { .. } | RayFamily::SquareGlide { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledRay {
    pub family: RayFamily,
    pub params: Vec<f64>,
}

impl SampledRay {
    pub fn new(family: RayFamily, params: Vec<f64>) -> Self {
        let mut p = params;
        family.clamp(&mut p);
        SampledRay { family, params: p }
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let p = &self.params;
        Ok(match self.family {
            RayFamily::Interval { dir } => Trajectory::Interval {
                x0: p[0],
                dir,
                t0: 0.0,
            },
            RayFamily::DiskState => {
                let pos = Vec2::from_angle(p[1]) * p[0];
                return Trajectory::from_state(&RayState::planar(
                    DomainKind::UnitDisk,
                    pos,
                    p[2],
                    0.0,
                ));
            }
            RayFamily::DiskChord => {
                let r = DiskChordRay::new(p[0], p[1], p[2]);
                if r.is_gliding() {
                    // below the tangency tolerance the chord ray is the glide
                    let ccw = p[1] < PI;
                    Trajectory::Disk(DiskChordRay {
                        theta0: p[0],
                        alpha: 0.0,
                        t0: 0.0,
                        orientation: if ccw { 1.0 } else { -1.0 },
                    })
                } else {
                    Trajectory::Disk(r)
                }
            }
            RayFamily::DiskGlide { ccw } => Trajectory::Disk(DiskChordRay {
                theta0: p[0],
                alpha: 0.0,
                t0: 0.0,
                orientation: if ccw { 1.0 } else { -1.0 },
            }),
            RayFamily::SquareState => Trajectory::Square(UnfoldState::new(p[0], p[1], p[2], 0.0)),
            RayFamily::SquareGlide { ccw } => Trajectory::SquareGlide {
                s0: p[0],
                sign: if ccw { 1.0 } else { -1.0 },
                t0: 0.0,
            },
            RayFamily::Sphere { orientation } => Trajectory::Sphere(GreatCircleRay {
                node: p[0],
                inclination: p[1],
                phase: p[2],
                orientation,
            }),
        })
    }

    pub fn state(&self) -> Result<RayState> {
        Ok(self.trajectory()?.state_at(0.0))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse ray '{s}'"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let rest = rest.strip_suffix(')').ok_or_else(bad)?;
        let family = RayFamily::from_name(name.trim()).ok_or_else(bad)?;
        let params = rest
            .split(';')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        if params.len() != family.initial_steps().len() {
            return Err(bad());
        }
        Ok(SampledRay { family, params })
    }
}

impl fmt::Display for SampledRay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.params.iter().map(|x| format!("{x}")).collect();
        write!(f, "{}({})", self.family.name(), p.join(";"))
    }
}

/// Result of testing one ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Hit(f64),
    Miss,
    /// The ray cannot be classified (edge-gliding in boundary mode, bounce
    /// overflow).
    Indeterminate,
}

impl Outcome {
    /// Ordering key for the supremum: misses are worst, indeterminate rays
    /// are ignored.
    fn key(&self) -> f64 {
        match self {
            Outcome::Hit(t) => *t,
            Outcome::Miss => f64::INFINITY,
            Outcome::Indeterminate => f64::NEG_INFINITY,
        }
    }

    pub fn time(&self) -> Option<f64> {
        match self {
            Outcome::Hit(t) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Finite,
    ExceededHorizon,
    Indeterminate,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Finite => "finite",
            Status::ExceededHorizon => "exceeded_horizon",
            Status::Indeterminate => "indeterminate",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "finite" => Some(Status::Finite),
            "exceeded_horizon" => Some(Status::ExceededHorizon),
            "indeterminate" => Some(Status::Indeterminate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TgccVerdict {
    pub satisfied: bool,
    /// Horizon tested (the cap for `estimate_t0`).
    pub t_max: f64,
    /// Sampling lower bound on T₀; infinite if some ray misses.
    pub t0_estimate: f64,
    pub worst_ray: Option<SampledRay>,
    pub margin: f64,
    pub n_rays: usize,
    pub n_miss: usize,
    pub n_indeterminate: usize,
    pub hit_times: Option<Vec<Outcome>>,
}

impl TgccVerdict {
    pub fn status(&self) -> Status {
        if self.n_indeterminate > 0 && self.n_miss == 0 && self.t0_estimate < self.t_max {
            Status::Indeterminate
        } else if self.t0_estimate.is_finite() && self.t0_estimate < self.t_max {
            Status::Finite
        } else {
            Status::ExceededHorizon
        }
    }
}

/// Van der Corput radical inverse.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Deterministic ray sample for a geometry, special families included.
pub fn sample_rays(kind: DomainKind, s: &RaySampling) -> Vec<SampledRay> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut jit = |scale: f64| {
        if s.jitter {
            rng.gen::<f64>() * scale
        } else {
            0.5 * scale
        }
    };
    let mut out = Vec::new();
    match kind {
        DomainKind::Interval01 => {
            for dir in [1.0, -1.0] {
                for i in 0..s.interval_positions {
                    let x = (i as f64 + jit(1.0)) / s.interval_positions as f64;
                    out.push(SampledRay::new(RayFamily::Interval { dir }, vec![x]));
                }
                for x in [0.0, 1.0] {
                    out.push(SampledRay::new(RayFamily::Interval { dir }, vec![x]));
                }
            }
        }
        DomainKind::UnitDisk => {
            let np = s.positions;
            for i in 0..np {
                let r = ((i as f64 + 0.5) / np as f64).sqrt();
                let phi = i as f64 * GOLDEN_ANGLE;
                let off = jit(1.0);
                for j in 0..s.directions {
                    let beta = TAU * (j as f64 + off) / s.directions as f64;
                    out.push(SampledRay::new(RayFamily::DiskState, vec![r, phi, beta]));
                }
            }
            for ccw in [true, false] {
                for i in 0..s.gliding_starts {
                    let th = TAU * i as f64 / s.gliding_starts as f64;
                    out.push(SampledRay::new(RayFamily::DiskGlide { ccw }, vec![th]));
                }
            }
            let chord = |alpha: f64, out: &mut Vec<SampledRay>| {
                let dt = 2.0 * (alpha / 2.0).sin();
                for k in 0..s.polygon_rotations {
                    let th = TAU * k as f64 / s.polygon_rotations as f64 / 2.0;
                    for j in 0..s.polygon_offsets {
                        let t0 = -dt * j as f64 / s.polygon_offsets as f64;
                        out.push(SampledRay::new(RayFamily::DiskChord, vec![th, alpha, t0]));
                    }
                }
            };
            for n in 2..=s.polygon_n_max {
                let alpha = TAU / n as f64;
                chord(alpha, &mut out);
                if n > 2 {
                    chord(TAU - alpha, &mut out);
                }
            }
            for alpha in [1e-3, 1e-6, 1e-10] {
                chord(alpha, &mut out);
                chord(TAU - alpha, &mut out);
            }
        }
        DomainKind::UnitSquare => {
            for i in 0..s.square_positions {
                let x = radical_inverse(i as u64 + 1, 2);
                let y = radical_inverse(i as u64 + 1, 3);
                let off = jit(1.0);
                for j in 0..s.directions {
                    let beta = TAU * (j as f64 + off) / s.directions as f64;
                    out.push(SampledRay::new(RayFamily::SquareState, vec![x, y, beta]));
                }
            }
            // rational slopes p/q, all four quadrants, from points on the bottom edge
            for q in 1..=s.rational_q_max {
                for p in 0..=s.rational_q_max {
                    if gcd(p, q) != 1 {
                        continue;
                    }
                    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                        for (dx, dy) in [(q as f64, p as f64), (p as f64, q as f64)] {
                            let beta = (sy * dy).atan2(sx * dx);
                            for k in 0..s.rational_starts {
                                let x = (k as f64 + 0.5) / s.rational_starts as f64;
                                out.push(SampledRay::new(
                                    RayFamily::SquareState,
                                    vec![x, 0.0, beta],
                                ));
                                out.push(SampledRay::new(
                                    RayFamily::SquareState,
                                    vec![0.0, x, beta],
                                ));
                            }
                        }
                    }
                }
            }
            for k in 0..=s.axis_starts {
                let z = k as f64 / s.axis_starts as f64;
                for beta in [0.0, PI / 2.0, PI, 1.5 * PI] {
                    out.push(SampledRay::new(RayFamily::SquareState, vec![z, z, beta]));
                    out.push(SampledRay::new(
                        RayFamily::SquareState,
                        vec![z, 1.0 - z, beta],
                    ));
                }
            }
            for ccw in [true, false] {
                for i in 0..s.gliding_starts {
                    let s0 = 4.0 * i as f64 / s.gliding_starts as f64;
                    out.push(SampledRay::new(RayFamily::SquareGlide { ccw }, vec![s0]));
                }
            }
        }
        DomainKind::UnitSphere => {
            for orientation in [1.0, -1.0] {
                for i in 0..s.sphere_nodes {
                    let node = TAU * (i as f64 + jit(1.0)) / s.sphere_nodes as f64;
                    for j in 0..s.sphere_inclinations {
                        // include both the equator and the meridians
                        let inc = PI / 2.0 * j as f64 / (s.sphere_inclinations - 1).max(1) as f64;
                        let off = jit(1.0);
                        for k in 0..s.sphere_phases {
                            let phase = TAU * (k as f64 + off) / s.sphere_phases as f64;
                            out.push(SampledRay::new(
                                RayFamily::Sphere { orientation },
                                vec![node, inc, phase],
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Earliest hit of the ray with the region in (0, horizon).
pub fn first_hit_time(region: &Region, ray: &RayState, horizon: f64) -> Result<Option<f64>> {
    if ray.kind != region.kind() {
        return Err(Error::InvalidParameter(format!(
            "ray on {} tested against a region on {}",
            ray.kind.name(),
            region.kind().name()
        )));
    }
    let traj = Trajectory::from_state(ray)?;
    first_hit_trajectory(region, &traj, 0.0, horizon)
}

/// Earliest hit in (t_start, t_start + horizon), for interior or boundary
/// regions.
pub fn first_hit_trajectory(
    region: &Region,
    traj: &Trajectory,
    t_start: f64,
    horizon: f64,
) -> Result<Option<f64>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon = {horizon} must be positive"
        )));
    }
    match outcome_for(region, traj, t_start, horizon)? {
        Outcome::Hit(t) => Ok(Some(t)),
        _ => Ok(None),
    }
}

fn outcome_for(region: &Region, traj: &Trajectory, t_start: f64, horizon: f64) -> Result<Outcome> {
    let t_end = t_start + horizon;
    if region.mode() == Mode::Boundary {
        return boundary_hit(region, traj, t_start, t_end);
    }
    if let (Region::Moving(spec), Trajectory::Interval { .. }) = (region, traj) {
        return Ok(interval_exact_hit(spec, traj, t_start, t_end));
    }
    let tau = region.min_feature_timescale()?;
    Ok(lipschitz_hit(
        region,
        traj,
        t_start,
        t_end,
        tau / STEP_FLOOR_DIVISOR,
    ))
}

fn boundary_hit(region: &Region, traj: &Trajectory, t_start: f64, t_end: f64) -> Result<Outcome> {
    if region.kind() == DomainKind::UnitSphere {
        return Err(Error::NoBoundary(DomainKind::UnitSphere));
    }
    if traj.is_edge_gliding() {
        return Ok(Outcome::Indeterminate);
    }
    if traj.is_gliding() {
        return Ok(Outcome::Miss);
    }
    let mut hit = None;
    let res = traj.walk_bounces(t_start, t_end, |ev| {
        if ev.t < t_end && ev.transversal && region.contains(ev.t, &ev.point) {
            hit = Some(ev.t);
            false
        } else {
            true
        }
    });
    match res {
        Err(Error::BounceOverflow(_)) => Ok(Outcome::Indeterminate),
        Err(e) => Err(e),
        Ok(_) => Ok(hit.map(Outcome::Hit).unwrap_or(Outcome::Miss)),
    }
}

/// 1D: the ray and both window edges are piecewise linear, so the hit set
/// is a finite union of intervals solved piece by piece.
fn interval_exact_hit(
    spec: &MovingDomainSpec,
    traj: &Trajectory,
    t_start: f64,
    t_end: f64,
) -> Outcome {
    let mut cuts = vec![t_start];
    let _ = traj.walk_bounces(t_start, t_end, |ev| {
        cuts.push(ev.t);
        true
    });
    cuts.extend(spec.window_kinks(t_start, t_end));
    cuts.push(t_end);
    cuts.sort_by(f64::total_cmp);
    let x = |t: f64| traj.position(t).as_line().unwrap_or(0.0);
    for w in cuts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        if tb <= ta {
            continue;
        }
        let (xa, xb) = (x(ta), x(tb));
        let (la, lb) = (spec.window_left(ta), spec.window_left(tb));
        // f1 = x - L > 0 and f2 = L + a - x > 0 on (ta, tb)
        let (lo1, hi1) = positive_part(xa - la, xb - lb, ta, tb);
        let (lo2, hi2) = positive_part(la + spec.a - xa, lb + spec.a - xb, ta, tb);
        let lo = lo1.max(lo2);
        let hi = hi1.min(hi2);
        if lo < hi {
            if lo >= t_end {
                break;
            }
            return Outcome::Hit((lo - t_start).max(HIT_AT_START) + t_start);
        }
    }
    Outcome::Miss
}

/// Sub-interval of (ta, tb) where the linear function through (ta, fa),
/// (tb, fb) is positive.
fn positive_part(fa: f64, fb: f64, ta: f64, tb: f64) -> (f64, f64) {
    if fa > 0.0 && fb > 0.0 {
        (ta, tb)
    } else if fa <= 0.0 && fb <= 0.0 {
        (tb, ta)
    } else {
        let tz = ta + (tb - ta) * fa / (fa - fb);
        if fa > 0.0 {
            (ta, tz)
        } else {
            (tz, tb)
        }
    }
}

/// Bracketing by Lipschitz-safe steps (never shorter than `floor`), then
/// bisection of the first bracket.
fn lipschitz_hit(
    region: &Region,
    traj: &Trajectory,
    t_start: f64,
    t_end: f64,
    floor: f64,
) -> Outcome {
    let inside = |t: f64| region.contains(t, &traj.position(t));
    if inside(t_start) {
        return Outcome::Hit(t_start + HIT_AT_START);
    }
    let mut t = t_start;
    loop {
        let step = region.safe_step(t, &traj.position(t)).max(floor);
        let next = (t + step).min(t_end);
        if inside(next) {
            let (mut lo, mut hi) = (t, next);
            while hi - lo > HIT_TOL {
                let mid = 0.5 * (lo + hi);
                if inside(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if hi >= t_end {
                return Outcome::Miss;
            }
            return Outcome::Hit(hi.max(t_start + HIT_AT_START));
        }
        if next >= t_end {
            return Outcome::Miss;
        }
        t = next;
    }
}

fn evaluate(region: &Region, ray: &SampledRay, horizon: f64) -> Outcome {
    let traj = match ray.trajectory() {
        Ok(t) => t,
        Err(_) => return Outcome::Indeterminate,
    };
    match outcome_for(region, &traj, 0.0, horizon) {
        Ok(o) => o,
        Err(_) => Outcome::Indeterminate,
    }
}

fn evaluate_all(region: &Region, rays: &[SampledRay], horizon: f64) -> Vec<Outcome> {
    rays.par_iter()
        .map(|r| evaluate(region, r, horizon))
        .collect()
}

/// Index of the largest key; the first index wins ties.
fn worst_index(outcomes: &[Outcome]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        let k = o.key();
        if k == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| k > b) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

fn check_region(region: &Region) -> Result<()> {
    region.validate()?;
    if region.mode() == Mode::Boundary && region.kind() == DomainKind::UnitSphere {
        return Err(Error::NoBoundary(DomainKind::UnitSphere));
    }
    Ok(())
}

fn verdict_from(
    outcomes: Vec<Outcome>,
    rays: &[SampledRay],
    t_max: f64,
    keep: bool,
) -> TgccVerdict {
    let n_miss = outcomes
        .iter()
        .filter(|o| matches!(o, Outcome::Miss))
        .count();
    let n_ind = outcomes
        .iter()
        .filter(|o| matches!(o, Outcome::Indeterminate))
        .count();
    let worst = worst_index(&outcomes);
    let t0 = worst.map(|i| outcomes[i].key()).unwrap_or(0.0);
    TgccVerdict {
        satisfied: n_miss == 0 && n_ind == 0 && t0 < t_max,
        t_max,
        t0_estimate: t0,
        worst_ray: worst.map(|i| rays[i].clone()),
        margin: HIT_TOL,
        n_rays: rays.len(),
        n_miss,
        n_indeterminate: n_ind,
        hit_times: if keep { Some(outcomes) } else { None },
    }
}

/// Rays through the space-time corners of a moving 1D window. The first-hit
/// time jumps on these isolated rays (a ray that only grazes a corner does not
/// enter the open window), so a jittered sample would miss them.
pub fn corner_rays(region: &Region, horizon: f64) -> Vec<SampledRay> {
    let spec = match region {
        Region::Moving(s) if s.kind == DomainKind::Interval01 && s.mode == Mode::Interior => s,
        _ => return Vec::new(),
    };
    let mut times = vec![0.0];
    times.extend(spec.window_kinks(0.0, horizon));
    let mut out = Vec::new();
    for t in times {
        let left = spec.window_left(t);
        for x in [left, left + spec.a] {
            for dir in [1.0, -1.0] {
                // unfold back to t = 0
                let y = (x - dir * t).rem_euclid(2.0);
                let (x0, d0) = if y <= 1.0 { (y, dir) } else { (2.0 - y, -dir) };
                out.push(SampledRay::new(RayFamily::Interval { dir: d0 }, vec![x0]));
            }
        }
    }
    out
}

/// Does every sampled ray meet the region in (0, T)?
pub fn check_tgcc(region: &Region, t_max: f64, sampling: &RaySampling) -> Result<TgccVerdict> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "T = {t_max} must be positive"
        )));
    }
    check_region(region)?;
    let mut rays = sample_rays(region.kind(), sampling);
    rays.extend(corner_rays(region, t_max));
    check_rays(region, &rays, t_max)
}

/// `check_tgcc` over an explicit ray list; keeps the per-ray table.
pub fn check_rays(region: &Region, rays: &[SampledRay], t_max: f64) -> Result<TgccVerdict> {
    let outcomes = evaluate_all(region, rays, t_max);
    Ok(verdict_from(outcomes, rays, t_max, true))
}

/// Boundary-observation variant: only transversal bounces landing in Γ(t)
/// count.
pub fn check_tgcc_boundary(
    region: &Region,
    t_max: f64,
    sampling: &RaySampling,
) -> Result<TgccVerdict> {
    if region.kind() == DomainKind::UnitSphere {
        return Err(Error::NoBoundary(DomainKind::UnitSphere));
    }
    if region.mode() != Mode::Boundary {
        return Err(Error::InvalidParameter(
            "boundary check needs a boundary-mode region".into(),
        ));
    }
    check_tgcc(region, t_max, sampling)
}

/// Sampling lower bound on T₀: sup of first-hit times, then a pattern search
/// around the worst ray.
pub fn estimate_t0(
    region: &Region,
    sampling: &RaySampling,
    horizon_cap: f64,
) -> Result<TgccVerdict> {
    if !(horizon_cap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon cap = {horizon_cap} must be positive"
        )));
    }
    check_region(region)?;
    let mut rays = sample_rays(region.kind(), sampling);
    rays.extend(corner_rays(region, horizon_cap));
    let outcomes = evaluate_all(region, &rays, horizon_cap);
    let mut v = verdict_from(outcomes, &rays, horizon_cap, false);
    v.satisfied = v.t0_estimate < horizon_cap && v.n_miss == 0;
    if sampling.refine && v.t0_estimate.is_finite() {
        if let Some(worst) = v.worst_ray.clone() {
            let (ray, value, step) = refine(region, worst, v.t0_estimate, horizon_cap);
            v.worst_ray = Some(ray);
            v.t0_estimate = value;
            v.margin = step + HIT_TOL;
            v.satisfied = value < horizon_cap;
            if value.is_infinite() {
                v.n_miss += 1;
            }
        }
    }
    Ok(v)
}

/// Coordinate pattern search maximizing the first-hit time. Moves only on
/// strict improvement; returns the best ray, its value, and the final step.
pub fn refine(
    region: &Region,
    start: SampledRay,
    value: f64,
    horizon: f64,
) -> (SampledRay, f64, f64) {
    let family = start.family;
    let mut steps = family.initial_steps();
    let mut best = start;
    let mut best_val = value;
    for _ in 0..REFINE_HALVINGS {
        for _ in 0..64 {
            let cands: Vec<SampledRay> = (0..steps.len())
                .flat_map(|i| [1.0, -1.0].map(|sgn| (i, sgn)))
                .map(|(i, sgn)| {
                    let mut p = best.params.clone();
                    p[i] += sgn * steps[i];
                    SampledRay::new(family, p)
                })
                .collect();
            let vals: Vec<f64> = cands
                .par_iter()
                .map(|c| evaluate(region, c, horizon).key())
                .collect();
            let mut pick: Option<usize> = None;
            for (i, v) in vals.iter().enumerate() {
                if *v > best_val && pick.is_none_or(|j| *v > vals[j]) {
                    pick = Some(i);
                }
            }
            match pick {
                Some(i) => {
                    best = cands[i].clone();
                    best_val = vals[i];
                }
                None => break,
            }
            if best_val.is_infinite() {
                return (best, best_val, steps.iter().cloned().fold(0.0, f64::max));
            }
        }
        for s in steps.iter_mut() {
            *s *= 0.5;
        }
    }
    (best, best_val, steps.iter().cloned().fold(0.0, f64::max))
}

/// Evaluates a single sampled ray (used by replay and by tests).
pub fn ray_outcome(region: &Region, ray: &SampledRay, horizon: f64) -> Result<Outcome> {
    let traj = ray.trajectory()?;
    outcome_for(region, &traj, 0.0, horizon)
}

/// Position helper for reports.
pub fn ray_position(ray: &SampledRay, t: f64) -> Result<Point> {
    Ok(ray.trajectory()?.position(t))
}

/// Bounce budget exposed for documentation of the overflow guard.
pub const BOUNCE_BUDGET: usize = MAX_BOUNCES;
