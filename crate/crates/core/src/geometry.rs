//! Specular reflection on smooth half-cylinder (SCS) microstructures.
//!
//! Scene conventions: the tag lies in the `XoY` plane, the collimated beam
//! arrives in the `YoZ` plane with incident angle `alpha` to the `Z` axis,
//! and reflected rays are collected on the background plane `y = d`.
//! Points on that plane are expressed in plane coordinates `(u, v) = (x, z)`.
//!
//! All reflected rays are launched from the origin. For a fixed section
//! angle the rays sweep a circular cone around the cylinder axis, so the
//! pattern on the background plane is a conic that always passes through
//! the top-surface reflection point (the "fixed point").

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating unit vectors and stored angle pairs.
const ANGLE_EPS: f64 = 1e-12;

/// Number of scan steps used to bracket a pattern/circle crossing.
const BRACKET_STEPS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("normal angle theta = {0} rad is outside the open interval (-pi/2, pi/2)")]
    ThetaOutOfDomain(f64),
    #[error("incident angle alpha = {0} rad is outside the open interval (0, pi/2)")]
    AlphaOutOfDomain(f64),
    #[error("invalid detection geometry: {0}")]
    InvalidGeometry(String),
    #[error("axis angle {delta} rad and section angle {phi} rad are inconsistent")]
    InconsistentAngle { delta: f64, phi: f64 },
    #[error("a pattern needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("section angle -pi/2 collapses the pattern to the line u = 0")]
    Degenerate,
    #[error("pattern for axis angle {delta} rad never reaches the detection circle")]
    NoIntersection { delta: f64 },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Angle in `[0, pi]` between two non-zero vectors.
    pub fn angle_to(self, other: Vec3) -> f64 {
        let c = self.dot(other) / (self.norm() * other.norm());
        c.clamp(-1.0, 1.0).acos()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// A point on the background plane, in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    /// Polar angle of `self` seen from `origin`, measured from the +u axis.
    pub fn polar_angle_from(self, origin: Point2) -> f64 {
        (self.v - origin.v).atan2(self.u - origin.u)
    }
}

/// Placement of the beam, the background plane and the sensor ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionGeometry {
    /// Incident angle (angle AOZ), radians.
    pub alpha: f64,
    /// Distance of the background plane `y = d`, millimeters.
    pub plane_distance: f64,
    /// Radius of the detection circle around the fixed point, millimeters.
    pub circle_radius: f64,
    pub sensor_count: usize,
}

impl DetectionGeometry {
    pub fn new(
        alpha: f64,
        plane_distance: f64,
        circle_radius: f64,
        sensor_count: usize,
    ) -> Result<Self> {
        let g = Self {
            alpha,
            plane_distance,
            circle_radius,
            sensor_count,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.plane_distance > 0.0 && self.plane_distance.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!(
                "plane distance must be positive, got {}",
                self.plane_distance
            )));
        }
        if !(self.circle_radius > 0.0 && self.circle_radius.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!(
                "circle radius must be positive, got {}",
                self.circle_radius
            )));
        }
        if self.sensor_count < 2 {
            return Err(GeometryError::InvalidGeometry(format!(
                "at least 2 sensors are required, got {}",
                self.sensor_count
            )));
        }
        Ok(())
    }

    pub fn fixed_point(&self) -> Point2 {
        fixed_point(self)
    }
}

impl Default for DetectionGeometry {
    /// 70 degree incidence, plane at 65 mm, 15 mm circle, 16 sensors.
    fn default() -> Self {
        Self {
            alpha: 70f64.to_radians(),
            plane_distance: 65.0,
            circle_radius: 15.0,
            sensor_count: 16,
        }
    }
}

/// Orientation of one SCS microstructure.
///
/// `delta` is the cylinder axis angle from the X axis in `[0, pi)`;
/// `phi = delta - pi/2` is the cylindrical section angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrostructureAngle {
    delta: f64,
    phi: f64,
}

impl MicrostructureAngle {
    /// Builds an angle from an axis direction; any real value is reduced
    /// modulo pi since a line has no orientation.
    pub fn from_delta(delta: f64) -> Self {
        let mut d = delta.rem_euclid(PI);
        if d >= PI {
            d = 0.0;
        }
        Self {
            delta: d,
            phi: d - FRAC_PI_2,
        }
    }

    pub fn from_phi(phi: f64) -> Self {
        Self::from_delta(phi + FRAC_PI_2)
    }

    pub fn from_degrees(delta_deg: f64) -> Self {
        Self::from_delta(delta_deg.to_radians())
    }

    /// Checked constructor for a redundantly stored pair.
    pub fn new(delta: f64, phi: f64) -> Result<Self> {
        if !(0.0..PI).contains(&delta) || (phi - (delta - FRAC_PI_2)).abs() > ANGLE_EPS {
            return Err(GeometryError::InconsistentAngle { delta, phi });
        }
        Ok(Self { delta, phi })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The mirrored microstructure `pi - delta` (reflection across u = 0).
    pub fn mirrored(&self) -> Self {
        Self::from_delta(PI - self.delta)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < FRAC_PI_2 {
        Ok(())
    } else {
        Err(GeometryError::AlphaOutOfDomain(alpha))
    }
}

/// Direction of the incident ray, `(0, sin a, -cos a)`.
pub fn incident_direction(alpha: f64) -> Vec3 {
    Vec3::new(0.0, alpha.sin(), -alpha.cos())
}

/// Outward normal of the half-cylinder at normal angle `theta`.
pub fn surface_normal(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// Unit vector along the cylindrical axis, `(cos delta, sin delta, 0)`.
pub fn cylinder_axis(phi: f64) -> Vec3 {
    Vec3::new(-phi.sin(), phi.cos(), 0.0)
}

fn reflect_unchecked(alpha: f64, theta: f64, phi: f64) -> Vec3 {
    let a = incident_direction(alpha);
    let n = surface_normal(theta, phi);
    a - n * (2.0 * n.dot(a))
}

/// Mirror reflection `b = a - 2 (n . a) n` of the incident ray.
pub fn reflect_ray(alpha: f64, theta: f64, phi: f64) -> Result<Vec3> {
    check_alpha(alpha)?;
    if !(theta > -FRAC_PI_2 && theta < FRAC_PI_2) {
        return Err(GeometryError::ThetaOutOfDomain(theta));
    }
    Ok(reflect_unchecked(alpha, theta, phi))
}

/// Half-angle of the reflected light cone, `acos(cos phi * sin alpha)`.
pub fn cone_half_angle(alpha: f64, phi: f64) -> f64 {
    (phi.cos() * alpha.sin()).clamp(-1.0, 1.0).acos()
}

/// Landing point of the top-surface reflection, `(0, d / tan alpha)`.
pub fn fixed_point(geom: &DetectionGeometry) -> Point2 {
    Point2::new(0.0, geom.plane_distance / geom.alpha.tan())
}

/// Open interval of normal angles around `theta = 0` whose reflected rays
/// travel toward the background plane (`b_y > 0`).
///
/// `b_y(theta) = sin a cos^2 p + sin p (sin a sin p cos 2t + cos a sin 2t)`,
/// i.e. a constant plus one harmonic in `2 theta`.
pub fn theta_domain(alpha: f64, phi: f64) -> (f64, f64) {
    let (sa, ca) = alpha.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let offset = sa * cp * cp;
    let rc = sa * sp * sp;
    let rs = ca * sp;
    let amp = rc.hypot(rs);
    if amp <= offset || amp == 0.0 {
        return (-FRAC_PI_2, FRAC_PI_2);
    }
    // b_y = offset + amp * cos(2t - beta), positive for |2t - beta| < width.
    let beta = rs.atan2(rc);
    let width = (-offset / amp).clamp(-1.0, 1.0).acos();
    // Shift the positive arc so that it contains 2t = 0.
    let mut lo = beta - width;
    let mut hi = beta + width;
    while hi <= 0.0 {
        lo += 2.0 * PI;
        hi += 2.0 * PI;
    }
    while lo >= 0.0 {
        lo -= 2.0 * PI;
        hi -= 2.0 * PI;
    }
    ((lo / 2.0).max(-FRAC_PI_2), (hi / 2.0).min(FRAC_PI_2))
}

/// Intersection of the reflected ray at `theta` with the background plane,
/// or `None` when the ray does not travel toward it.
pub fn plane_point(geom: &DetectionGeometry, angle: &MicrostructureAngle, theta: f64) -> Option<Point2> {
    let b = reflect_unchecked(geom.alpha, theta, angle.phi());
    if b.y <= 0.0 {
        return None;
    }
    let t = geom.plane_distance / b.y;
    Some(Point2::new(b.x * t, b.z * t))
}

/// Closed-form conic of a non-degenerate pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicDescriptor {
    /// Always nonnegative; see `branch_sign` for the mirror orientation.
    pub eccentricity: f64,
    pub focus: Point2,
    /// Cone half-angle xi, radians.
    pub cone_half_angle: f64,
    pub fixed_point: Point2,
    /// `u` coordinate of the directrix line (parallel to the v axis);
    /// `None` for the circular pattern.
    pub directrix_u: Option<f64>,
    /// Sign of `sin phi`: -1, 0 or +1.
    pub branch_sign: f64,
}

impl ConicDescriptor {
    /// Relative focus-directrix residual of a plane point.
    ///
    /// For a circle the residual compares the focal distance with the
    /// radius through the fixed point.
    pub fn residual(&self, p: Point2) -> f64 {
        let focal = p.distance(self.focus);
        match self.directrix_u {
            Some(du) => {
                let scale = focal.max(f64::MIN_POSITIVE);
                (focal - self.eccentricity * (p.u - du).abs()) / scale
            }
            None => {
                let radius = self.fixed_point.distance(self.focus);
                (focal - radius) / radius
            }
        }
    }
}

/// Eccentricity, focus and directrix from the Dandelin-sphere construction.
pub fn conic_params(geom: &DetectionGeometry, angle: &MicrostructureAngle) -> Result<ConicDescriptor> {
    geom.validate()?;
    let phi = angle.phi();
    let xi = cone_half_angle(geom.alpha, phi);
    let cos_xi = xi.cos();
    if cos_xi.abs() < ANGLE_EPS {
        return Err(GeometryError::Degenerate);
    }
    let d = geom.plane_distance;
    let (sp, cp) = phi.sin_cos();
    let eccentricity = sp.abs() / cos_xi;
    let focus_u = -d * sp / (cp + xi.sin());
    let directrix_u = if eccentricity > 0.0 {
        // (u - f)^2 + v^2 = e^2 (u - D)^2 matched against the cone equation.
        Some((focus_u + d * sp * cp / (cos_xi * cos_xi)) / (eccentricity * eccentricity))
    } else {
        None
    };
    Ok(ConicDescriptor {
        eccentricity,
        focus: Point2::new(focus_u, 0.0),
        cone_half_angle: xi,
        fixed_point: fixed_point(geom),
        directrix_u,
        branch_sign: if sp == 0.0 { 0.0 } else { sp.signum() },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSample {
    pub theta: f64,
    pub point: Point2,
}

/// Sampled reflected curve on the background plane.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationPattern {
    /// Ordered by increasing `theta`; contains `theta = 0` exactly.
    pub samples: Vec<PatternSample>,
    /// `None` when the pattern degenerates to the vertical line `u = 0`.
    pub conic: Option<ConicDescriptor>,
    pub generating_angle: MicrostructureAngle,
}

impl IlluminationPattern {
    pub fn is_degenerate(&self) -> bool {
        self.conic.is_none()
    }

    pub fn points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.samples.iter().map(|s| s.point)
    }

    pub fn top_surface_sample(&self) -> Option<&PatternSample> {
        self.samples.iter().find(|s| s.theta == 0.0)
    }
}

/// Traces `n_samples` rays over the admissible normal-angle interval.
///
/// The negative half receives `n / 2` samples, the positive half the rest
/// minus the `theta = 0` sample; interval ends are excluded since rays
/// there graze the plane.
pub fn sample_pattern(
    geom: &DetectionGeometry,
    angle: &MicrostructureAngle,
    n_samples: usize,
) -> Result<IlluminationPattern> {
    geom.validate()?;
    if n_samples < 3 {
        return Err(GeometryError::TooFewSamples(n_samples));
    }
    let (lo, hi) = theta_domain(geom.alpha, angle.phi());
    let neg = n_samples / 2;
    let pos = n_samples - 1 - neg;
    let thetas = (1..=neg)
        .rev()
        .map(|j| lo * j as f64 / (neg + 1) as f64)
        .chain(std::iter::once(0.0))
        .chain((1..=pos).map(|j| hi * j as f64 / (pos + 1) as f64));
    let samples = thetas
        .filter_map(|theta| plane_point(geom, angle, theta).map(|point| PatternSample { theta, point }))
        .collect();
    let conic = match conic_params(geom, angle) {
        Ok(c) => Some(c),
        Err(GeometryError::Degenerate) => None,
        Err(e) => return Err(e),
    };
    Ok(IlluminationPattern {
        samples,
        conic,
        generating_angle: *angle,
    })
}

/// Finds where one branch of the pattern first leaves the detection circle.
fn branch_crossing(geom: &DetectionGeometry, angle: &MicrostructureAngle, positive: bool) -> Result<Point2> {
    let fp = fixed_point(geom);
    let r = geom.circle_radius;
    let (lo, hi) = theta_domain(geom.alpha, angle.phi());
    let end = if positive { hi } else { lo } * (1.0 - 1e-12);
    let excess = |theta: f64| plane_point(geom, angle, theta).map(|p| p.distance(fp) - r);

    let mut a = 0.0;
    let mut b = None;
    for k in 1..=BRACKET_STEPS {
        let t = end * k as f64 / BRACKET_STEPS as f64;
        match excess(t) {
            Some(f) if f >= 0.0 => {
                b = Some(t);
                break;
            }
            Some(_) => a = t,
            None => break,
        }
    }
    let mut b = b.ok_or(GeometryError::NoIntersection { delta: angle.delta() })?;
    let mut point = None;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let p = plane_point(geom, angle, mid).ok_or(GeometryError::NoIntersection { delta: angle.delta() })?;
        let f = p.distance(fp) - r;
        point = Some(p);
        if f.abs() < 1e-10 || (b - a).abs() < 1e-16 {
            break;
        }
        if f < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    point.ok_or(GeometryError::NoIntersection { delta: angle.delta() })
}

/// Polar angle psi, seen from the fixed point, where the `theta > 0` branch
/// crosses the detection circle.
pub fn circle_intersection_angle(geom: &DetectionGeometry, angle: &MicrostructureAngle) -> Result<f64> {
    geom.validate()?;
    let p = branch_crossing(geom, angle, true)?;
    Ok(p.polar_angle_from(fixed_point(geom)))
}

/// Both circle crossings: `(theta > 0 branch, theta < 0 branch)`.
pub fn circle_intersections(geom: &DetectionGeometry, angle: &MicrostructureAngle) -> Result<(Point2, Point2)> {
    geom.validate()?;
    Ok((branch_crossing(geom, angle, true)?, branch_crossing(geom, angle, false)?))
}
