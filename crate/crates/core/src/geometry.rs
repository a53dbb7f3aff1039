//! The four model domains and their local boundary geometry.
//!
//! Positions on the sphere are unit 3-vectors; longitude/latitude pairs are
//! only produced at the interface.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// |d·n| at or below this value is treated as tangential incidence.
pub const TANGENCY_TOL: f64 = 1e-9;
/// Square hits within this distance of a vertex retroreflect.
pub const CORNER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainKind {
    Interval01,
    UnitDisk,
    UnitSquare,
    UnitSphere,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Interval01 => "interval",
            DomainKind::UnitDisk => "disk",
            DomainKind::UnitSquare => "square",
            DomainKind::UnitSphere => "sphere",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "interval" | "interval01" | "1d" => Some(DomainKind::Interval01),
            "disk" | "unit_disk" => Some(DomainKind::UnitDisk),
            "square" | "unit_square" => Some(DomainKind::UnitSquare),
            "sphere" | "unit_sphere" => Some(DomainKind::UnitSphere),
            _ => None,
        }
    }

    pub fn has_boundary(self) -> bool {
        self != DomainKind::UnitSphere
    }

    /// Length of the boundary under [`boundary_param`].
    pub fn perimeter(self) -> Option<f64> {
        match self {
            DomainKind::Interval01 => Some(2.0),
            DomainKind::UnitDisk => Some(TAU),
            DomainKind::UnitSquare => Some(4.0),
            DomainKind::UnitSphere => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2 { x: c, y: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    /// Unit vector at longitude `theta`, latitude `phi`.
    pub fn from_lon_lat(theta: f64, phi: f64) -> Vec3 {
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        Vec3::new(cp * ct, cp * st, sp)
    }

    /// (longitude in [0, 2π), latitude in [-π/2, π/2]).
    pub fn lon_lat(self) -> (f64, f64) {
        let u = self.normalized();
        let lat = u.z.clamp(-1.0, 1.0).asin();
        let lon = u.y.atan2(u.x).rem_euclid(TAU);
        (lon, lat)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// A point of one of the model domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Line(f64),
    Plane(Vec2),
    Sphere(Vec3),
}

impl Point {
    pub fn sphere_lon_lat(theta: f64, phi: f64) -> Point {
        Point::Sphere(Vec3::from_lon_lat(theta, phi))
    }

    pub fn disk_polar(r: f64, theta: f64) -> Point {
        Point::Plane(Vec2::from_angle(theta) * r)
    }

    pub fn as_line(&self) -> Option<f64> {
        match *self {
            Point::Line(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_plane(&self) -> Option<Vec2> {
        match *self {
            Point::Plane(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_sphere(&self) -> Option<Vec3> {
        match *self {
            Point::Sphere(p) => Some(p),
            _ => None,
        }
    }

    /// Euclidean distance between two points of the same kind.
    pub fn distance(&self, other: &Point) -> f64 {
        match (self, other) {
            (Point::Line(a), Point::Line(b)) => (a - b).abs(),
            (Point::Plane(a), Point::Plane(b)) => (*a - *b).norm(),
            (Point::Sphere(a), Point::Sphere(b)) => (*a - *b).norm(),
            _ => f64::NAN,
        }
    }

    /// Closed-domain membership within `tol`.
    pub fn in_closed_domain(&self, kind: DomainKind, tol: f64) -> bool {
        match (kind, self) {
            (DomainKind::Interval01, Point::Line(x)) => *x >= -tol && *x <= 1.0 + tol,
            (DomainKind::UnitDisk, Point::Plane(p)) => p.norm() <= 1.0 + tol,
            (DomainKind::UnitSquare, Point::Plane(p)) => {
                p.x >= -tol && p.x <= 1.0 + tol && p.y >= -tol && p.y <= 1.0 + tol
            }
            (DomainKind::UnitSphere, Point::Sphere(p)) => (p.norm() - 1.0).abs() <= tol.max(1e-12),
            _ => false,
        }
    }
}

/// Position and direction of the unfolded square flow at time `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnfoldState {
    pub x0: f64,
    pub y0: f64,
    pub c: f64,
    pub s: f64,
    pub t0: f64,
}

impl UnfoldState {
    pub fn new(x0: f64, y0: f64, angle: f64, t0: f64) -> Self {
        let (s, c) = angle.sin_cos();
        UnfoldState { x0, y0, c, s, t0 }
    }
}

/// Specular reflection d − 2(d·n)n.
pub fn reflect_specular(direction: Vec2, outward_normal: Vec2) -> Result<Vec2> {
    let dn = direction.dot(outward_normal);
    if dn.abs() <= TANGENCY_TOL {
        return Err(Error::Glancing(dn.abs()));
    }
    Ok(direction - outward_normal * (2.0 * dn))
}

/// Right-angle corner: two successive edge reflections.
pub fn corner_reflect(direction: Vec2) -> Vec2 {
    -direction
}

/// Reduction of the unfolded coordinate: 2-periodic, even, identity on [0, 1].
pub fn fold(z: f64) -> f64 {
    let r = z.rem_euclid(2.0);
    if r <= 1.0 {
        r
    } else {
        2.0 - r
    }
}

/// Arclength parametrization of the boundary.
///
/// Interval: s ∈ [0,1) ↦ 0, s ∈ [1,2) ↦ 1. Disk: angle. Square: perimeter
/// coordinate in [0,4), anticlockwise from the origin.
pub fn boundary_param(kind: DomainKind, s: f64) -> Result<Point> {
    match kind {
        DomainKind::Interval01 => {
            let r = s.rem_euclid(2.0);
            Ok(Point::Line(if r < 1.0 { 0.0 } else { 1.0 }))
        }
        DomainKind::UnitDisk => Ok(Point::Plane(Vec2::from_angle(s))),
        DomainKind::UnitSquare => Ok(Point::Plane(square_perimeter_point(s))),
        DomainKind::UnitSphere => Err(Error::NoBoundary(kind)),
    }
}

/// Inverse of [`boundary_param`]; the point must lie on the boundary within 1e-9.
pub fn boundary_param_inverse(kind: DomainKind, p: &Point) -> Result<f64> {
    const TOL: f64 = 1e-9;
    match (kind, p) {
        (DomainKind::Interval01, Point::Line(x)) => {
            if x.abs() <= TOL {
                Ok(0.0)
            } else if (x - 1.0).abs() <= TOL {
                Ok(1.0)
            } else {
                Err(Error::InvalidParameter(format!("{x} is not an endpoint")))
            }
        }
        (DomainKind::UnitDisk, Point::Plane(q)) => {
            if (q.norm() - 1.0).abs() > TOL {
                return Err(Error::InvalidParameter(format!(
                    "{q:?} is not on the circle"
                )));
            }
            Ok(q.angle().rem_euclid(TAU))
        }
        (DomainKind::UnitSquare, Point::Plane(q)) => square_perimeter_coord(*q)
            .ok_or_else(|| Error::InvalidParameter(format!("{q:?} is not on the square boundary"))),
        (DomainKind::UnitSphere, _) => Err(Error::NoBoundary(kind)),
        _ => Err(Error::InvalidParameter(
            "point kind does not match domain".into(),
        )),
    }
}

pub fn square_perimeter_point(s: f64) -> Vec2 {
    let s = s.rem_euclid(4.0);
    if s < 1.0 {
        Vec2::new(s, 0.0)
    } else if s < 2.0 {
        Vec2::new(1.0, s - 1.0)
    } else if s < 3.0 {
        Vec2::new(3.0 - s, 1.0)
    } else {
        Vec2::new(0.0, 4.0 - s)
    }
}

pub fn square_perimeter_coord(q: Vec2) -> Option<f64> {
    const TOL: f64 = 1e-9;
    if q.y.abs() <= TOL && q.x < 1.0 - TOL && q.x >= -TOL {
        Some(q.x.max(0.0))
    } else if (q.x - 1.0).abs() <= TOL && q.y < 1.0 - TOL && q.y >= -TOL {
        Some(1.0 + q.y.max(0.0))
    } else if (q.y - 1.0).abs() <= TOL && q.x > TOL && q.x <= 1.0 + TOL {
        Some(2.0 + (1.0 - q.x.min(1.0)))
    } else if q.x.abs() <= TOL && q.y > TOL && q.y <= 1.0 + TOL {
        Some(3.0 + (1.0 - q.y.min(1.0)))
    } else {
        None
    }
}

/// Outward unit normal of the square at a boundary point (edges only).
pub fn square_normal(q: Vec2) -> Vec2 {
    let d = [q.x, 1.0 - q.x, q.y, 1.0 - q.y];
    let mut best = 0;
    for i in 1..4 {
        if d[i] < d[best] {
            best = i;
        }
    }
    match best {
        0 => Vec2::new(-1.0, 0.0),
        1 => Vec2::new(1.0, 0.0),
        2 => Vec2::new(0.0, -1.0),
        _ => Vec2::new(0.0, 1.0),
    }
}

/// Signed angular difference reduced to (-π, π].
pub fn wrap_pi(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn specular_examples() {
        let r = reflect_specular(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r.x, -1.0);
        assert_abs_diff_eq!(r.y, 0.0);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = reflect_specular(Vec2::new(h, h), Vec2::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(r.x, h, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, -h, epsilon = 1e-15);

        let r = reflect_specular(Vec2::new(0.6, 0.8), Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r.x, -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn tangential_incidence_is_glancing() {
        let e = reflect_specular(Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(e, Error::Glancing(_)));
        assert!(reflect_specular(Vec2::new(1e-10, 1.0).normalized(), Vec2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn corner_examples() {
        assert_eq!(corner_reflect(Vec2::new(0.6, 0.8)), Vec2::new(-0.6, -0.8));
        assert_eq!(corner_reflect(Vec2::new(1.0, 0.0)), Vec2::new(-1.0, -0.0));
        // composition of the two edge reflections
        let d = Vec2::new(0.6, 0.8);
        let twice = reflect_specular(
            reflect_specular(d, Vec2::new(1.0, 0.0)).unwrap(),
            Vec2::new(0.0, 1.0),
        )
        .unwrap();
        assert_eq!(twice, corner_reflect(d));
    }

    #[test]
    fn fold_examples() {
        assert_abs_diff_eq!(fold(2.3), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(fold(1.4), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(fold(-0.2), 0.2, epsilon = 1e-12);
        assert_eq!(fold(1.0), 1.0);
        assert_eq!(fold(0.0), 0.0);
    }

    #[test]
    fn boundary_param_examples() {
        assert_eq!(
            boundary_param(DomainKind::UnitSquare, 0.5).unwrap(),
            Point::Plane(Vec2::new(0.5, 0.0))
        );
        assert_eq!(
            boundary_param(DomainKind::UnitSquare, 1.5).unwrap(),
            Point::Plane(Vec2::new(1.0, 0.5))
        );
        let p = boundary_param(DomainKind::UnitDisk, PI)
            .unwrap()
            .as_plane()
            .unwrap();
        assert_abs_diff_eq!(p.x, -1.0);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
        assert_eq!(
            boundary_param(DomainKind::UnitSphere, 0.0).unwrap_err(),
            Error::NoBoundary(DomainKind::UnitSphere)
        );
        assert_eq!(
            boundary_param(DomainKind::Interval01, 1.2).unwrap(),
            Point::Line(1.0)
        );
    }

    #[test]
    fn square_normals() {
        assert_eq!(square_normal(Vec2::new(1.0, 0.3)), Vec2::new(1.0, 0.0));
        assert_eq!(square_normal(Vec2::new(0.3, 0.0)), Vec2::new(0.0, -1.0));
    }

    #[test]
    fn lon_lat_round_trip() {
        let p = Vec3::from_lon_lat(1.0, 0.3);
        let (lon, lat) = p.lon_lat();
        assert_abs_diff_eq!(lon, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lat, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(p.norm(), 1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn reflection_is_involution(a in 0.0..TAU, b in 0.0..TAU) {
            let d = Vec2::from_angle(a);
            let n = Vec2::from_angle(b);
            prop_assume!(d.dot(n).abs() > 1e-6);
            let r = reflect_specular(d, n).unwrap();
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
            // tangential component preserved
            let tang = Vec2::new(-n.y, n.x);
            prop_assert!((r.dot(tang) - d.dot(tang)).abs() < 1e-12);
            let back = reflect_specular(r, n).unwrap();
            prop_assert!((back - d).norm() < 1e-12);
        }

        #[test]
        fn fold_symmetries(z in -50.0f64..50.0) {
            prop_assert!((fold(z) - fold(z + 2.0)).abs() < 1e-12);
            prop_assert!((fold(z) - fold(-z)).abs() < 1e-12);
            let f = fold(z);
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn boundary_param_inverts(s in 0.0f64..4.0) {
            let p = boundary_param(DomainKind::UnitSquare, s).unwrap();
            let back = boundary_param_inverse(DomainKind::UnitSquare, &p).unwrap();
            let q = boundary_param(DomainKind::UnitSquare, back).unwrap();
            prop_assert!(p.distance(&q) < 1e-12);

            let th = s * PI / 2.0;
            let p = boundary_param(DomainKind::UnitDisk, th).unwrap();
            let back = boundary_param_inverse(DomainKind::UnitDisk, &p).unwrap();
            prop_assert!(wrap_pi(back - th).abs() < 1e-12);
        }
    }
}
