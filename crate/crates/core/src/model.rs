//! Stick-slip force model of a thin object clamped between a vibrating
//! finger and a passive finger.
//!
//! Every function here is pure. Forces are in newtons, lengths in metres,
//! angular frequencies in rad/s. The vibration phase is `ω·t`.
//!
//! The eccentric rotating mass (ERM) produces a tangential drive
//! `f_v = m·l·ω²·cos(ωt)` and a normal component `f_n = m·l·ω²·sin(ωt)`.
//! The net normal load is `f_N = f_b + f_n + M·g + f_d(r)`, where `f_d` is
//! the couple force holding the object level when it is grasped off its
//! centre of mass. The contact slips whenever `|f_v| > μ_s·|f_N|`.

use thiserror::Error;

use crate::quadrature;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("grasp point (r = {r} m, direction {phi_grip} rad) lies outside the object footprint")]
    GraspOutsideObject { r: f64, phi_grip: f64 },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Eccentric rotating mass motor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmParams<T> {
    /// Eccentric mass `m` (kg).
    pub eccentric_mass: T,
    /// Eccentricity `l` (m).
    pub link_length: T,
    /// Drive frequency `ω` (rad/s).
    pub drive_frequency: T,
}

impl<T: Scalar> ErmParams<T> {
    pub fn new(eccentric_mass: T, link_length: T, drive_frequency: T) -> Result<Self, ModelError> {
        let erm = Self {
            eccentric_mass,
            link_length,
            drive_frequency,
        };
        erm.validate()?;
        Ok(erm)
    }

    /// Builds the motor from a frequency given in Hz.
    pub fn from_hz(eccentric_mass: T, link_length: T, hz: T) -> Result<Self, ModelError> {
        Self::new(eccentric_mass, link_length, hz * T::TAU())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.eccentric_mass > T::zero()) {
            return Err(invalid("erm.eccentric_mass", "must be > 0"));
        }
        if !(self.link_length > T::zero()) {
            return Err(invalid("erm.link_length", "must be > 0"));
        }
        if !(self.drive_frequency >= T::zero()) || !self.drive_frequency.is_finite() {
            return Err(invalid("erm.drive_frequency", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Same motor driven at another frequency.
    pub fn with_frequency(&self, omega: T) -> Self {
        Self {
            drive_frequency: omega,
            ..*self
        }
    }

    /// Force amplitude `m·l·ω²`.
    #[inline]
    pub fn amplitude(&self) -> T {
        self.eccentric_mass * self.link_length * self.drive_frequency * self.drive_frequency
    }
}

/// Finger/object contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams<T> {
    pub mu_static: T,
    pub mu_kinetic: T,
    /// Grip preload `f_b` (N).
    pub grip_preload: T,
    /// Radius `r_d` of the vibrating finger, the lever arm of the tilt couple (m).
    pub finger_radius: T,
    /// Gravitational acceleration (m/s²).
    pub gravity: T,
}

impl<T: Scalar> ContactParams<T> {
    pub const STANDARD_GRAVITY: f64 = 9.81;

    pub fn new(
        mu_static: T,
        mu_kinetic: T,
        grip_preload: T,
        finger_radius: T,
    ) -> Result<Self, ModelError> {
        let c = Self {
            mu_static,
            mu_kinetic,
            grip_preload,
            finger_radius,
            gravity: T::lit(Self::STANDARD_GRAVITY),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.mu_kinetic > T::zero()) {
            return Err(invalid("contact.mu_kinetic", "must be > 0"));
        }
        // equality would let stick and slip share a boundary; keep them strictly ordered
        if !(self.mu_kinetic < self.mu_static) {
            return Err(invalid(
                "contact.mu_kinetic",
                format!(
                    "must be strictly less than contact.mu_static ({} >= {})",
                    self.mu_kinetic, self.mu_static
                ),
            ));
        }
        if !(self.grip_preload >= T::zero()) {
            return Err(invalid("contact.grip_preload", "must be >= 0"));
        }
        if !(self.finger_radius > T::zero()) {
            return Err(invalid("contact.finger_radius", "must be > 0"));
        }
        if !(self.gravity >= T::zero()) {
            return Err(invalid("contact.gravity", "must be >= 0"));
        }
        Ok(())
    }
}

/// Planar footprint of the grasped object, centred on its centre of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape<T> {
    Disk {
        radius: T,
    },
    /// Width along the body x axis, height along the body y axis.
    Rectangle {
        width: T,
        height: T,
    },
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectGeometry<T> {
    pub shape: Shape<T>,
    /// Mass `M` (kg).
    pub mass: T,
    /// Moment of inertia about the COM, normal to the plate (kg·m²).
    pub inertia: T,
    /// Plate thickness (m). Informational only.
    pub thickness: T,
    /// Set when `inertia` was supplied explicitly instead of derived.
    pub inertia_override: bool,
}

impl<T: Scalar> ObjectGeometry<T> {
    /// Uniform disk.
    pub fn disk(radius: T, mass: T, thickness: T) -> Result<Self, ModelError> {
        let g = Self {
            shape: Shape::Disk { radius },
            mass,
            inertia: mass * radius * radius * T::half(),
            thickness,
            inertia_override: false,
        };
        g.validate()?;
        Ok(g)
    }

    /// Uniform rectangular plate.
    pub fn rectangle(width: T, height: T, mass: T, thickness: T) -> Result<Self, ModelError> {
        let g = Self {
            shape: Shape::Rectangle { width, height },
            mass,
            inertia: mass * (width * width + height * height) / T::lit(12.0),
            thickness,
            inertia_override: false,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn point_mass(mass: T, inertia: T) -> Result<Self, ModelError> {
        let g = Self {
            shape: Shape::PointMass,
            mass,
            inertia,
            thickness: T::zero(),
            inertia_override: true,
        };
        g.validate()?;
        Ok(g)
    }

    /// Replaces the derived inertia with an explicit value.
    pub fn with_inertia(mut self, inertia: T) -> Result<Self, ModelError> {
        self.inertia = inertia;
        self.inertia_override = true;
        self.validate()?;
        Ok(self)
    }

    /// Closed-form inertia of a uniform plate with this footprint.
    pub fn uniform_inertia(&self) -> Option<T> {
        match self.shape {
            Shape::Disk { radius } => Some(self.mass * radius * radius * T::half()),
            Shape::Rectangle { width, height } => {
                Some(self.mass * (width * width + height * height) / T::lit(12.0))
            }
            Shape::PointMass => None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.mass > T::zero()) {
            return Err(invalid("object.mass", "must be > 0"));
        }
        if !(self.inertia > T::zero()) {
            return Err(invalid("object.inertia", "must be > 0"));
        }
        if !(self.thickness >= T::zero()) {
            return Err(invalid("object.thickness", "must be >= 0"));
        }
        match self.shape {
            Shape::Disk { radius } if !(radius > T::zero()) => {
                return Err(invalid("object.radius", "must be > 0"))
            }
            Shape::Rectangle { width, height } if !(width > T::zero() && height > T::zero()) => {
                return Err(invalid("object.width", "width and height must be > 0"))
            }
            _ => {}
        }
        if let (Some(uniform), false) = (self.uniform_inertia(), self.inertia_override) {
            if ((self.inertia - uniform) / uniform).abs() > T::lit(0.01) {
                return Err(invalid(
                    "object.inertia",
                    format!(
                        "{} differs from the uniform-plate value {} by more than 1%",
                        self.inertia, uniform
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Whether the grasp point at distance `r` from the COM, in body-frame
    /// direction `phi_grip`, lies on the footprint (boundary included).
    pub fn contains_grasp(&self, r: T, phi_grip: T) -> bool {
        match self.shape {
            Shape::Disk { radius } => r <= radius,
            Shape::Rectangle { width, height } => {
                let tol = T::lit(1e-12) * (width + height);
                (r * phi_grip.cos()).abs() <= width * T::half() + tol
                    && (r * phi_grip.sin()).abs() <= height * T::half() + tol
            }
            Shape::PointMass => true,
        }
    }

    /// Largest distance from the COM to the footprint boundary along a direction.
    pub fn reach(&self, phi_grip: T) -> T {
        match self.shape {
            Shape::Disk { radius } => radius,
            Shape::Rectangle { width, height } => {
                let (s, c) = phi_grip.sin_cos();
                let rx = if c.abs() > T::epsilon() {
                    width * T::half() / c.abs()
                } else {
                    T::infinity()
                };
                let ry = if s.abs() > T::epsilon() {
                    height * T::half() / s.abs()
                } else {
                    T::infinity()
                };
                rx.min(ry)
            }
            Shape::PointMass => T::infinity(),
        }
    }

    /// Distance to the nearest point of the footprint boundary from the COM.
    pub fn inscribed_radius(&self) -> T {
        match self.shape {
            Shape::Disk { radius } => radius,
            Shape::Rectangle { width, height } => width.min(height) * T::half(),
            Shape::PointMass => T::infinity(),
        }
    }
}

/// The object cut in two by the line through the grasp point perpendicular
/// to the COM–grasp axis. Side 1 contains the COM. Distances are measured
/// from the cut line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSplit<T> {
    pub m1: T,
    pub r1: T,
    pub m2: T,
    pub r2: T,
}

impl<T: Scalar> MassSplit<T> {
    /// Net first moment `m1·r1 − m2·r2` about the cut line.
    pub fn moment(&self) -> T {
        self.m1 * self.r1 - self.m2 * self.r2
    }
}

/// Object, motor and contact parameters of one grasp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams<T> {
    pub object: ObjectGeometry<T>,
    pub erm: ErmParams<T>,
    pub contact: ContactParams<T>,
}

impl<T: Scalar> PlantParams<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.object.validate()?;
        self.erm.validate()?;
        self.contact.validate()
    }
}

/// `f_v(t) = m·l·ω²·cos(ωt)`.
pub fn vibration_tangential_force<T: Scalar>(erm: &ErmParams<T>, t: T) -> T {
    erm.amplitude() * (erm.drive_frequency * t).cos()
}

/// `f_n(t) = m·l·ω²·sin(ωt)`.
pub fn vibration_normal_force<T: Scalar>(erm: &ErmParams<T>, t: T) -> T {
    erm.amplitude() * (erm.drive_frequency * t).sin()
}

/// Splits the object at the grasp point.
///
/// Disks use circular-segment formulas. Rectangles are clipped against the
/// half-plane beyond the cut line and integrated exactly as polygons.
pub fn mass_split<T: Scalar>(
    geometry: &ObjectGeometry<T>,
    r: T,
    phi_grip: T,
) -> Result<MassSplit<T>, ModelError> {
    if !(r >= T::zero()) {
        return Err(invalid("r", "grasp distance must be >= 0"));
    }
    if !geometry.contains_grasp(r, phi_grip) {
        return Err(ModelError::GraspOutsideObject {
            r: r.as_f64(),
            phi_grip: phi_grip.as_f64(),
        });
    }
    let total = geometry.mass;
    match geometry.shape {
        Shape::PointMass => Ok(MassSplit {
            m1: total,
            r1: r,
            m2: T::zero(),
            r2: T::zero(),
        }),
        Shape::Disk { radius } => {
            let rr = radius * radius;
            let chord = (rr - r * r).max(T::zero());
            let seg_area = rr * (r / radius).min(T::one()).acos() - r * chord.sqrt();
            if seg_area <= T::epsilon() * rr {
                return Ok(MassSplit {
                    m1: total,
                    r1: r,
                    m2: T::zero(),
                    r2: T::zero(),
                });
            }
            // centroid of the circular segment, from the disk centre
            let seg_centroid = T::two() * chord * chord.sqrt() / (T::lit(3.0) * seg_area);
            let m2 = total * seg_area / (T::PI() * rr);
            let m1 = total - m2;
            Ok(MassSplit {
                m1,
                r1: r + m2 * seg_centroid / m1,
                m2,
                r2: seg_centroid - r,
            })
        }
        Shape::Rectangle { width, height } => {
            let (hw, hh) = (width * T::half(), height * T::half());
            let corners = [(hw, hh), (-hw, hh), (-hw, -hh), (hw, -hh)];
            let (s, c) = phi_grip.sin_cos();
            let piece = clip_half_plane(&corners, c, s, r);
            let (area, cx, cy) = polygon_area_centroid(&piece);
            let full = width * height;
            if area <= T::epsilon() * full {
                return Ok(MassSplit {
                    m1: total,
                    r1: r,
                    m2: T::zero(),
                    r2: T::zero(),
                });
            }
            let m2 = total * area / full;
            let m1 = total - m2;
            let along = c * cx + s * cy;
            // the heavy piece's centroid balances the light one about the COM
            let along1 = -(area * along) / (full - area);
            Ok(MassSplit {
                m1,
                r1: r - along1,
                m2,
                r2: along - r,
            })
        }
    }
}

/// Sutherland–Hodgman clip of a convex polygon to `{p : n·p >= offset}`.
fn clip_half_plane<T: Scalar>(poly: &[(T, T)], nx: T, ny: T, offset: T) -> Vec<(T, T)> {
    let side = |p: (T, T)| nx * p.0 + ny * p.1 - offset;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (dc, dn) = (side(cur), side(next));
        if dc >= T::zero() {
            out.push(cur);
        }
        if (dc >= T::zero()) != (dn >= T::zero()) {
            let k = dc / (dc - dn);
            out.push((cur.0 + k * (next.0 - cur.0), cur.1 + k * (next.1 - cur.1)));
        }
    }
    out
}

fn polygon_area_centroid<T: Scalar>(poly: &[(T, T)]) -> (T, T, T) {
    if poly.len() < 3 {
        return (T::zero(), T::zero(), T::zero());
    }
    let (mut a2, mut cx, mut cy) = (T::zero(), T::zero(), T::zero());
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        let cross = x0 * y1 - x1 * y0;
        a2 = a2 + cross;
        cx = cx + (x0 + x1) * cross;
        cy = cy + (y0 + y1) * cross;
    }
    if a2.abs() <= T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    let six = T::lit(3.0) * a2;
    ((a2 * T::half()).abs(), cx / six, cy / six)
}

/// `f_d = g·(m1·r1 − m2·r2)/r_d`.
pub fn tilt_force<T: Scalar>(split: &MassSplit<T>, contact: &ContactParams<T>) -> T {
    contact.gravity * split.moment() / contact.finger_radius
}

/// Tilt couple force at grasp distance `r`.
///
/// The first moment of the whole plate about any line at distance `r` from
/// its COM is `M·r`, so `m1·r1 − m2·r2 = M·r` for every footprint and cut
/// direction; [`mass_split`] reproduces this split by split.
pub fn tilt_force_at<T: Scalar>(
    geometry: &ObjectGeometry<T>,
    contact: &ContactParams<T>,
    r: T,
) -> T {
    contact.gravity * geometry.mass * r / contact.finger_radius
}

/// Phase-independent part of the normal load, `f_b + M·g + f_d(r)`.
pub fn static_normal_load<T: Scalar>(
    contact: &ContactParams<T>,
    geometry: &ObjectGeometry<T>,
    r: T,
) -> T {
    contact.grip_preload + geometry.mass * contact.gravity + tilt_force_at(geometry, contact, r)
}

/// `f_N(t) = f_b + f_n(t) + M·g + f_d(r)`.
pub fn net_normal_force<T: Scalar>(
    erm: &ErmParams<T>,
    contact: &ContactParams<T>,
    geometry: &ObjectGeometry<T>,
    r: T,
    t: T,
) -> T {
    static_normal_load(contact, geometry, r) + vibration_normal_force(erm, t)
}

/// Instantaneous slip test `|f_v(t)| > μ_s·|f_N(t)|`.
pub fn slip_active<T: Scalar>(
    erm: &ErmParams<T>,
    contact: &ContactParams<T>,
    geometry: &ObjectGeometry<T>,
    r: T,
    t: T,
) -> bool {
    vibration_tangential_force(erm, t).abs()
        > contact.mu_static * net_normal_force(erm, contact, geometry, r, t).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipFeasibility<T> {
    pub feasible: bool,
    /// `m·l·ω²·√(1+μ_s²) − μ_s·(M·g + f_d + f_b)` (N).
    pub margin: T,
}

/// Worst-phase slip condition. The phase maximum of
/// `|cos(ωt) − μ_s·sin(ωt)|` is `√(1+μ_s²)`.
pub fn slip_feasible<T: Scalar>(
    erm: &ErmParams<T>,
    contact: &ContactParams<T>,
    geometry: &ObjectGeometry<T>,
    r: T,
) -> SlipFeasibility<T> {
    let mu = contact.mu_static;
    let drive = erm.amplitude() * (T::one() + mu * mu).sqrt();
    let margin = drive - mu * static_normal_load(contact, geometry, r);
    SlipFeasibility {
        feasible: margin > T::zero(),
        margin,
    }
}

/// Frequency at which the worst-phase slip margin crosses zero.
pub fn min_slip_frequency<T: Scalar>(
    erm: &ErmParams<T>,
    contact: &ContactParams<T>,
    geometry: &ObjectGeometry<T>,
    r: T,
) -> T {
    let mu = contact.mu_static;
    let load = static_normal_load(contact, geometry, r);
    (mu * load / (erm.eccentric_mass * erm.link_length * (T::one() + mu * mu).sqrt())).sqrt()
}

/// Cycle-averaged driving force `F_eff`.
///
/// Averages `|f_v| − μ_k·f_N` over one vibration period, counting only the
/// instants where the contact slips. Slip boundaries are located in closed
/// form so the quadrature only sees smooth pieces.
pub fn effective_net_force<T: Scalar>(
    erm: &ErmParams<T>,
    contact: &ContactParams<T>,
    geometry: &ObjectGeometry<T>,
    r: T,
) -> T {
    if erm.drive_frequency <= T::zero() || !slip_feasible(erm, contact, geometry, r).feasible {
        return T::zero();
    }
    let amp = erm.amplitude();
    let load = static_normal_load(contact, geometry, r);
    cycle_average_drive(amp, load, contact.mu_static, contact.mu_kinetic)
}

/// Mean over `x ∈ [0, 2π)` of `(A|cos x| − μ_k(C + A sin x))·[A|cos x| > μ_s|C + A sin x|]`.
pub(crate) fn cycle_average_drive<T: Scalar>(amp: T, load: T, mu_s: T, mu_k: T) -> T {
    let two_pi = T::TAU();
    let slipping = |x: T| amp * x.cos().abs() > mu_s * (load + amp * x.sin()).abs();
    let drive = |x: T| amp * x.cos().abs() - mu_k * (load + amp * x.sin());

    let mut cuts: Vec<T> = Vec::with_capacity(16);
    cuts.push(T::zero());
    cuts.push(T::FRAC_PI_2());
    cuts.push(T::PI() + T::FRAC_PI_2());
    cuts.push(two_pi);
    // f_N sign changes
    if load.abs() <= amp {
        let s = (-load / amp).asin();
        cuts.push(s);
        cuts.push(T::PI() - s);
    }
    // A·s1·cos x = μ_s·s2·(C + A sin x)  ⇔  s1·cos x − s2·μ_s·sin x = s2·μ_s·C/A
    let norm = (T::one() + mu_s * mu_s).sqrt();
    for s1 in [T::one(), -T::one()] {
        for s2 in [T::one(), -T::one()] {
            let rhs = s2 * mu_s * load / amp / norm;
            if rhs.abs() <= T::one() {
                let alpha = (-s2 * mu_s).atan2(s1);
                let spread = rhs.acos();
                cuts.push(alpha + spread);
                cuts.push(alpha - spread);
            }
        }
    }
    for c in cuts.iter_mut() {
        *c = *c - two_pi * (*c / two_pi).floor();
        if *c < T::zero() || *c > two_pi {
            *c = T::zero();
        }
    }
    cuts.push(two_pi);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon() * two_pi);

    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
    let mut total = T::zero();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= T::zero() || !slipping((lo + hi) * T::half()) {
            continue;
        }
        total = total + quadrature::integrate(drive, lo, hi, tol, T::zero());
    }
    total / two_pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn contact() -> ContactParams<f64> {
        ContactParams::new(0.5, 0.4, 0.3, 0.005).unwrap()
    }

    #[test]
    fn forces_at_quarter_phases() {
        // m·l·ω² = 1 N
        let erm = ErmParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(vibration_tangential_force(&erm, 0.0), 1.0);
        assert!(vibration_tangential_force(&erm, PI / 2.0).abs() < 1e-16);
        assert_eq!(vibration_normal_force(&erm, 0.0), 0.0);
        assert_relative_eq!(vibration_normal_force(&erm, PI / 2.0), 1.0);
    }

    #[test]
    fn rejects_bad_friction_ordering() {
        assert!(ContactParams::new(0.3, 0.3, 1.0, 0.01).is_err());
        let err = ContactParams::new(0.3, 0.4, 1.0, 0.01).unwrap_err();
        assert!(err.to_string().contains("mu_kinetic"), "{err}");
        assert!(ContactParams::new(0.3, 0.2, -1.0, 0.01).is_err());
        assert!(ContactParams::new(0.3, 0.2, 1.0, 0.0).is_err());
    }

    #[test]
    fn geometry_validation() {
        assert!(ObjectGeometry::disk(0.1, 0.0, 0.002).is_err());
        let d = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        assert_relative_eq!(d.inertia, 0.05 * 0.01 / 2.0);
        let mut off = d;
        off.inertia *= 1.02;
        assert!(off.validate().is_err());
        assert!(d.with_inertia(d.inertia * 1.5).is_ok());
        assert!(ObjectGeometry::point_mass(0.1, 0.0).is_err());
        assert!(ObjectGeometry::rectangle(0.08, 0.0, 0.1, 0.001).is_err());
    }

    #[test]
    fn symmetric_splits() {
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let s = mass_split(&disk, 0.0, 0.3).unwrap();
        assert_relative_eq!(s.m1, 0.025, max_relative = 1e-12);
        assert_relative_eq!(s.m2, 0.025, max_relative = 1e-12);
        assert_relative_eq!(s.r1, 4.0 * 0.1 / (3.0 * PI), max_relative = 1e-12);
        assert_relative_eq!(s.r2, 4.0 * 0.1 / (3.0 * PI), max_relative = 1e-12);

        let rect = ObjectGeometry::rectangle(0.08, 0.11, 0.06, 0.001).unwrap();
        let s = mass_split(&rect, 0.0, 0.0).unwrap();
        assert_relative_eq!(s.m1, 0.03, max_relative = 1e-12);
        assert_relative_eq!(s.r1, 0.02, max_relative = 1e-12);
        assert_relative_eq!(s.r2, 0.02, max_relative = 1e-12);
        let s = mass_split(&rect, 0.0, PI / 2.0).unwrap();
        assert_relative_eq!(s.r1, 0.0275, max_relative = 1e-12);
    }

    #[test]
    fn point_mass_split_and_tilt() {
        let pm = ObjectGeometry::point_mass(0.2, 1e-4).unwrap();
        let s = mass_split(&pm, 0.03, 1.0).unwrap();
        assert_eq!(
            s,
            MassSplit {
                m1: 0.2,
                r1: 0.03,
                m2: 0.0,
                r2: 0.0
            }
        );
        let c = contact();
        assert_relative_eq!(
            tilt_force(&s, &c),
            9.81 * 0.2 * 0.03 / 0.005,
            max_relative = 1e-12
        );
    }

    #[test]
    fn grasp_outside_is_rejected() {
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        assert!(matches!(
            mass_split(&disk, 0.11, 0.0),
            Err(ModelError::GraspOutsideObject { .. })
        ));
        let rect = ObjectGeometry::rectangle(0.08, 0.11, 0.06, 0.001).unwrap();
        assert!(mass_split(&rect, 0.045, 0.0).is_err());
        assert!(mass_split(&rect, 0.045, PI / 2.0).is_ok());
        // edge grasp: everything on the COM side
        let s = mass_split(&disk, 0.1, 0.0).unwrap();
        assert_eq!(s.m2, 0.0);
        assert_relative_eq!(s.moment(), 0.05 * 0.1, max_relative = 1e-12);
    }

    #[test]
    fn split_moment_matches_first_moment_identity() {
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let rect = ObjectGeometry::rectangle(0.08, 0.11, 0.06, 0.001).unwrap();
        for k in 0..40 {
            let r = 0.0025 * k as f64;
            let phi = 0.17 * k as f64;
            let s = mass_split(&disk, r, phi).unwrap();
            assert_relative_eq!(s.moment(), 0.05 * r, epsilon = 1e-15, max_relative = 1e-10);
            assert!(s.m1 >= s.m2);
            if rect.contains_grasp(r, phi) {
                let s = mass_split(&rect, r, phi).unwrap();
                assert_relative_eq!(s.moment(), 0.06 * r, epsilon = 1e-15, max_relative = 1e-10);
                assert_relative_eq!(s.m1 + s.m2, 0.06, max_relative = 1e-12);
                assert!(s.m1 >= s.m2);
            }
        }
    }

    #[test]
    fn no_vibration_no_tilt_normal_force() {
        let erm = ErmParams::new(5e-4, 1.5e-3, 0.0).unwrap();
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let c = contact();
        assert_relative_eq!(
            net_normal_force(&erm, &c, &disk, 0.0, 0.37),
            0.3 + 0.05 * 9.81
        );
        for k in 0..100 {
            assert!(!slip_active(&erm, &c, &disk, 0.0, k as f64 * 1e-3));
        }
    }

    #[test]
    fn normal_force_at_sine_peak() {
        let erm = ErmParams::from_hz(5e-4, 1.5e-3, 200.0).unwrap();
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let c = contact();
        let t = PI / 2.0 / erm.drive_frequency;
        let expected = 0.3 + 0.05 * 9.81 + 9.81 * 0.05 * 0.02 / 0.005 + erm.amplitude();
        assert_relative_eq!(
            net_normal_force(&erm, &c, &disk, 0.02, t),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn frictionless_contact_always_slips_off_node() {
        let erm = ErmParams::from_hz(5e-4, 1.5e-3, 100.0).unwrap();
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let mut c = contact();
        c.mu_static = 0.0;
        c.mu_kinetic = 0.0;
        assert!(slip_active(&erm, &c, &disk, 0.0, 1e-4));
        let f = slip_feasible(&erm, &c, &disk, 0.05);
        assert!(f.feasible);
        assert_relative_eq!(f.margin, erm.amplitude());
        // rectified cosine mean
        assert_relative_eq!(
            effective_net_force(&erm, &c, &disk, 0.0),
            2.0 / PI * erm.amplitude(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn zero_frequency_is_infeasible() {
        let erm = ErmParams::new(5e-4, 1.5e-3, 0.0).unwrap();
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let c = contact();
        let f = slip_feasible(&erm, &c, &disk, 0.01);
        assert!(!f.feasible);
        let load = 0.05 * 9.81 + 9.81 * 0.05 * 0.01 / 0.005 + 0.3;
        assert_relative_eq!(f.margin, -0.5 * load, max_relative = 1e-12);
        assert_eq!(effective_net_force(&erm, &c, &disk, 0.01), 0.0);
    }

    #[test]
    fn min_slip_frequency_limits() {
        let erm = ErmParams::new(5e-4, 1.5e-3, 0.0).unwrap();
        let pm = ObjectGeometry::point_mass(0.1, 1e-4).unwrap();
        let mut c = ContactParams::new(0.5, 0.4, 0.0, 0.01).unwrap();
        c.gravity = 0.0;
        assert_eq!(min_slip_frequency(&erm, &c, &pm, 0.0), 0.0);
        c.grip_preload = 1.0;
        let w1 = min_slip_frequency(&erm, &c, &pm, 0.0);
        c.grip_preload = 2.0;
        let w2 = min_slip_frequency(&erm, &c, &pm, 0.0);
        assert_relative_eq!(w2 / w1, 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn effective_force_zero_below_threshold() {
        let c = contact();
        let disk = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let base = ErmParams::new(5e-4, 1.5e-3, 0.0).unwrap();
        let w = min_slip_frequency(&base, &c, &disk, 0.01);
        assert_eq!(
            effective_net_force(&base.with_frequency(0.999 * w), &c, &disk, 0.01),
            0.0
        );
        assert!(effective_net_force(&base.with_frequency(1.01 * w), &c, &disk, 0.01) > 0.0);
    }

    #[test]
    fn f32_model_agrees_with_f64() {
        let c64 = contact();
        let d64 = ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap();
        let e64 = ErmParams::from_hz(5e-4, 1.5e-3, 240.0).unwrap();
        let c32 = ContactParams::<f32>::new(0.5, 0.4, 0.3, 0.005).unwrap();
        let d32 = ObjectGeometry::<f32>::disk(0.1, 0.05, 0.002).unwrap();
        let e32 = ErmParams::<f32>::from_hz(5e-4, 1.5e-3, 240.0).unwrap();
        let f64v = effective_net_force(&e64, &c64, &d64, 0.0);
        let f32v = effective_net_force(&e32, &c32, &d32, 0.0);
        assert!(f64v > 0.0);
        assert_relative_eq!(f32v as f64, f64v, max_relative = 1e-4);
    }
}
