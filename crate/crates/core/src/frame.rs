//! Arm-relative dressing coordinate `(s, l, theta)`.
//!
//! The spine of the coordinate is the progress curve: a straight forearm
//! piece from the hand, a circular arc of radius `r` rounding the elbow
//! corner, and a straight upper-arm piece ending at the shoulder. The arc is
//! tangent to both limbs, so the curve is C1. `s` is normalized arclength
//! along the curve (0 at the hand, 1 at the shoulder), `l` the distance from
//! the point to its foot on the curve and `theta` the angle of the vector
//! from the point to its foot, measured from the body-side arm-plane normal
//! counterclockwise about the curve tangent.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{elbow_angle, ArmPosture, Point3, UnitVec3, Vec3};

/// Default elbow arc radius, meters.
pub const DEFAULT_ARC_RADIUS: f64 = 0.05;
/// Elbow angles at or above `pi - STRAIGHT_MARGIN` use the arc-free curve.
pub const STRAIGHT_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Forearm,
    Elbow,
    Upperarm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressingCoord {
    /// Progress along the arm, 0 at the hand and 1 at the shoulder.
    pub s: f64,
    /// Distance to the progress curve, meters.
    pub l: f64,
    /// Angle around the arm in `[0, 2 pi)`.
    pub theta: f64,
}

impl DressingCoord {
    pub fn new(s: f64, l: f64, theta: f64) -> Self {
        Self { s, l, theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressCurve {
    pub hand: Point3,
    pub elbow: Point3,
    pub shoulder: Point3,
    pub radius: f64,
    /// Transition from the forearm piece to the arc.
    pub hand_elbow: Point3,
    /// Transition from the arc to the upper-arm piece.
    pub elbow_shoulder: Point3,
    /// Length of the forearm piece.
    pub d1: f64,
    /// Length of the upper-arm piece.
    pub d2: f64,
    pub arc_center: Point3,
    pub arc_sweep: f64,
    pub total_length: f64,
    /// Unit direction hand to elbow.
    forearm_dir: Vec3,
    /// Unit direction elbow to shoulder.
    upper_dir: Vec3,
    /// Unit vector from the arc center to `hand_elbow`.
    arc_start: Vec3,
}

impl ProgressCurve {
    /// Builds the three-piece curve. A nearly straight arm collapses the arc
    /// to the elbow point.
    pub fn new(p: &ArmPosture, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "arc radius must be positive, got {radius}"
            )));
        }
        let psi = elbow_angle(p)?;
        let forearm = p.elbow - p.hand;
        let upper = p.shoulder - p.elbow;
        let (lf, lu) = (forearm.norm(), upper.norm());
        let a = forearm / lf;
        let b = upper / lu;
        let shortest = lf.min(lu);

        if psi >= PI - STRAIGHT_MARGIN {
            return Ok(Self {
                hand: p.hand,
                elbow: p.elbow,
                shoulder: p.shoulder,
                radius,
                hand_elbow: p.elbow,
                elbow_shoulder: p.elbow,
                d1: lf,
                d2: lu,
                arc_center: p.elbow,
                arc_sweep: 0.0,
                total_length: lf + lu,
                forearm_dir: a,
                upper_dir: b,
                arc_start: Vec3::zeros(),
            });
        }

        let offset = radius * ((PI - psi) / 2.0).tan();
        if radius >= shortest || offset >= shortest {
            return Err(Error::ArcTooLarge {
                offset: offset.max(radius),
                limb: shortest,
            });
        }
        let bisector = (b - a).normalize();
        let arc_center = p.elbow + bisector * (radius / (psi / 2.0).sin());
        let hand_elbow = p.elbow - a * offset;
        let elbow_shoulder = p.elbow + b * offset;
        let arc_sweep = PI - psi;
        let d1 = lf - offset;
        let d2 = lu - offset;
        Ok(Self {
            hand: p.hand,
            elbow: p.elbow,
            shoulder: p.shoulder,
            radius,
            hand_elbow,
            elbow_shoulder,
            d1,
            d2,
            arc_center,
            arc_sweep,
            total_length: d1 + radius * arc_sweep + d2,
            forearm_dir: a,
            upper_dir: b,
            arc_start: (hand_elbow - arc_center) / radius,
        })
    }

    pub fn is_straight(&self) -> bool {
        self.arc_sweep == 0.0
    }

    pub fn arc_length(&self) -> f64 {
        self.radius * self.arc_sweep
    }

    pub fn forearm_direction(&self) -> &Vec3 {
        &self.forearm_dir
    }

    pub fn upper_arm_direction(&self) -> &Vec3 {
        &self.upper_dir
    }

    /// Unit bisector of the elbow angle pointing into the inner arm area.
    pub fn inner_bisector(&self) -> Option<Vec3> {
        (!self.is_straight()).then(|| (self.upper_dir - self.forearm_dir).normalize())
    }

    /// Progress value of the arc midpoint.
    pub fn arc_midpoint_s(&self) -> f64 {
        (self.d1 + 0.5 * self.arc_length()) / self.total_length
    }

    fn arc_point(&self, omega: f64) -> Point3 {
        self.arc_center
            + (self.arc_start * omega.cos() + self.forearm_dir * omega.sin()) * self.radius
    }

    fn arc_tangent(&self, omega: f64) -> Vec3 {
        self.forearm_dir * omega.cos() - self.arc_start * omega.sin()
    }

    /// Point and unit tangent at arclength `sigma` from the hand.
    pub fn point_at(&self, sigma: f64) -> (Point3, Vec3) {
        let arc_end = self.d1 + self.arc_length();
        if sigma <= self.d1 {
            (self.hand + self.forearm_dir * sigma, self.forearm_dir)
        } else if sigma <= arc_end {
            let omega = (sigma - self.d1) / self.radius;
            (self.arc_point(omega), self.arc_tangent(omega))
        } else {
            (
                self.elbow_shoulder + self.upper_dir * (sigma - arc_end),
                self.upper_dir,
            )
        }
    }

    /// Signed projections of an in-plane point onto the forearm line (from
    /// the hand) and the upper-arm line (from the shoulder).
    pub fn limb_projections(&self, x_arm: &Point3) -> (f64, f64) {
        let d_forearm = (x_arm - self.hand).dot(&self.forearm_dir);
        let d_upperarm = (x_arm - self.shoulder).dot(&(-self.upper_dir));
        (d_forearm, d_upperarm)
    }
}

/// Builds the progress curve for a posture.
pub fn build_progress_curve(p: &ArmPosture, radius: f64) -> Result<ProgressCurve> {
    ProgressCurve::new(p, radius)
}

/// Orthogonal projection onto the plane through the hand with normal `v`.
pub fn project_to_arm_plane(x: &Point3, hand: &Point3, v: &UnitVec3) -> Point3 {
    x + v.as_ref() * (hand.dot(v) - x.dot(v))
}

/// Segment of an in-plane point from its limb projections.
///
/// On an arm folded past a right angle a point can be short of both tangent
/// points while lying on a limb. There the nearest of the three pieces wins.
pub fn classify_segment(x_arm: &Point3, curve: &ProgressCurve) -> Segment {
    let (d_forearm, d_upperarm) = curve.limb_projections(x_arm);
    if d_forearm < curve.d1 && d_upperarm > curve.d2 {
        Segment::Forearm
    } else if d_upperarm < curve.d2 && d_forearm > curve.d1 {
        Segment::Upperarm
    } else if d_forearm < curve.d1 && d_upperarm < curve.d2 && curve.arc_sweep > FRAC_PI_2 {
        nearest_piece(x_arm, curve, d_forearm, d_upperarm)
    } else {
        Segment::Elbow
    }
}

fn nearest_piece(x_arm: &Point3, curve: &ProgressCurve, d_forearm: f64, d_upperarm: f64) -> Segment {
    let forearm = (curve.hand + curve.forearm_dir * d_forearm.max(0.0) - x_arm).norm();
    let upperarm = (curve.shoulder - curve.upper_dir * d_upperarm.max(0.0) - x_arm).norm();
    let ray = x_arm - curve.arc_center;
    let elbow = if ray.norm() < 1e-12 {
        curve.radius
    } else {
        (curve.arc_point(arc_parameter(curve, &ray)) - x_arm).norm()
    };
    if forearm < upperarm && forearm < elbow {
        Segment::Forearm
    } else if upperarm < elbow {
        Segment::Upperarm
    } else {
        Segment::Elbow
    }
}

/// Full result of locating a point against the progress curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    pub coord: DressingCoord,
    pub segment: Segment,
    pub x_arm: Point3,
    pub x_curve: Point3,
    /// Arclength of `x_curve` from the hand.
    pub sigma: f64,
}

fn cross_section(tangent: &Vec3, v: &UnitVec3) -> (Vec3, Vec3) {
    (v.into_inner(), tangent.cross(v))
}

/// Locates `x` on the curve: projects it into the arm plane, picks the
/// segment, finds the foot point and reads off `(s, l, theta)`.
pub fn locate(x: &Point3, curve: &ProgressCurve, v: &UnitVec3) -> Result<Located> {
    let x_arm = project_to_arm_plane(x, &curve.hand, v);
    let segment = classify_segment(&x_arm, curve);
    let (d_forearm, d_upperarm) = curve.limb_projections(&x_arm);
    let (x_curve, sigma) = match segment {
        Segment::Forearm => {
            let d = d_forearm.max(0.0);
            (curve.hand + curve.forearm_dir * d, d)
        }
        Segment::Upperarm => {
            let d = d_upperarm.max(0.0);
            (curve.shoulder - curve.upper_dir * d, curve.total_length - d)
        }
        Segment::Elbow if curve.is_straight() => (curve.elbow, curve.d1),
        Segment::Elbow => {
            let ray = x_arm - curve.arc_center;
            if ray.norm() < 1e-12 {
                return Err(Error::AmbiguousProjection);
            }
            let omega = arc_parameter(curve, &ray);
            (curve.arc_point(omega), curve.d1 + omega * curve.radius)
        }
    };
    let (_, tangent) = curve.point_at(sigma);
    let (e1, e2) = cross_section(&tangent, v);
    let w = x_curve - x;
    let l = w.norm();
    let theta = if l == 0.0 {
        0.0
    } else {
        w.dot(&e2).atan2(w.dot(&e1)).rem_euclid(TAU)
    };
    let theta = if theta >= TAU { 0.0 } else { theta };
    Ok(Located {
        coord: DressingCoord::new(sigma / curve.total_length, l, theta),
        segment,
        x_arm,
        x_curve,
        sigma,
    })
}

/// Arc angle where the line through the arc center and the point meets the
/// arc. Either end of the line may be the one that hits; out-of-range
/// angles are clamped to the nearer arc end.
fn arc_parameter(curve: &ProgressCurve, ray: &Vec3) -> f64 {
    let sweep = curve.arc_sweep;
    let angle = |r: &Vec3| r.dot(&curve.forearm_dir).atan2(r.dot(&curve.arc_start));
    let distance = |w: f64| {
        if w < 0.0 {
            -w
        } else if w > sweep {
            w - sweep
        } else {
            0.0
        }
    };
    let direct = angle(ray);
    let opposite = angle(&-ray);
    let best = if distance(direct) <= distance(opposite) {
        direct
    } else {
        opposite
    };
    best.clamp(0.0, sweep)
}

/// Cartesian to dressing coordinate.
pub fn to_dressing(x: &Point3, curve: &ProgressCurve, v: &UnitVec3) -> Result<DressingCoord> {
    Ok(locate(x, curve, v)?.coord)
}

/// Dressing coordinate to Cartesian: walks `s * total_length` along the
/// curve and steps `l` along the cross-section direction `theta`.
pub fn from_dressing(dc: &DressingCoord, curve: &ProgressCurve, v: &UnitVec3) -> Result<Point3> {
    if !(0.0..=1.0).contains(&dc.s) {
        return Err(Error::OutOfRange(dc.s));
    }
    let (x_curve, tangent) = curve.point_at(dc.s * curve.total_length);
    let (e1, e2) = cross_section(&tangent, v);
    Ok(x_curve - (e1 * dc.theta.cos() + e2 * dc.theta.sin()) * dc.l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Inner,
    Outer,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Inner => f.write_str("Inner"),
            Strategy::Outer => f.write_str("Outer"),
        }
    }
}

/// Inner/outer classification of a dressing path.
///
/// The transition point is the path sample whose progress is closest to the
/// arc midpoint. Its in-plane distance to the elbow is positive inside the
/// elbow angle and negative outside.
pub fn classify_strategy(path: &[Point3], curve: &ProgressCurve) -> Result<(Strategy, f64)> {
    let bisector = curve.inner_bisector().ok_or(Error::DegeneratePosture(
        "straight arm has no inner or outer side",
    ))?;
    let normal = UnitVec3::new_normalize(curve.forearm_dir.cross(&curve.upper_dir));
    let located: Vec<Located> = path
        .iter()
        .map(|x| locate(x, curve, &normal))
        .collect::<Result<_>>()?;
    let (min, max) = located.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.coord.s), hi.max(p.coord.s))
    });
    if !(min < 0.3 && max > 0.7) {
        return Err(Error::PathDoesNotCrossElbow { min, max });
    }
    let mid = curve.arc_midpoint_s();
    let transition = located
        .iter()
        .min_by(|a, b| (a.coord.s - mid).abs().total_cmp(&(b.coord.s - mid).abs()))
        .expect("non-empty path");
    let offset = transition.x_arm - curve.elbow;
    let distance = offset.norm();
    if offset.dot(&bisector) > 0.0 {
        Ok((Strategy::Inner, distance))
    } else {
        Ok((Strategy::Outer, -distance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::arm_plane_normal;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn right_angle() -> ArmPosture {
        ArmPosture::new(Point3::new(0.0, 0.0, -0.25), Point3::new(0.25, 0.0, -0.25))
    }

    #[test]
    fn right_angle_curve() {
        let c = build_progress_curve(&right_angle(), 0.05).unwrap();
        assert_relative_eq!(c.d1, 0.20, epsilon = 1e-12);
        assert_relative_eq!(c.d2, 0.20, epsilon = 1e-12);
        assert_relative_eq!(c.arc_sweep, FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(c.total_length, 0.4 + 0.05 * FRAC_PI_2, epsilon = 1e-12);
        // Independent construction: the fillet of a right-angle corner at
        // (0, -0.25) sits at (0.05, -0.20) with tangent points one radius
        // along each limb.
        assert_relative_eq!(c.arc_center, Point3::new(0.05, 0.0, -0.20), epsilon = 1e-12);
        assert_relative_eq!(c.hand_elbow, Point3::new(0.05, 0.0, -0.25), epsilon = 1e-12);
        assert_relative_eq!(c.elbow_shoulder, Point3::new(0.0, 0.0, -0.20), epsilon = 1e-12);
        let (end, _) = c.point_at(c.d1 + c.arc_length());
        assert_relative_eq!(end, c.elbow_shoulder, epsilon = 1e-12);
    }

    #[test]
    fn nearly_straight_arm_collapses_arc() {
        let p = ArmPosture::new(Point3::new(0.0, 0.0, -0.25), Point3::new(1e-5, 0.0, -0.5));
        let c = build_progress_curve(&p, 0.05).unwrap();
        assert_eq!(c.arc_sweep, 0.0);
        assert_relative_eq!(c.total_length, p.forearm_length() + 0.25, epsilon = 1e-12);
        let q = ArmPosture::new(Point3::new(0.0, 0.0, -0.25), Point3::new(0.01, 0.0, -0.5));
        let cq = build_progress_curve(&q, 0.05).unwrap();
        assert!(cq.arc_sweep > 0.0 && cq.arc_sweep < 0.05);
        assert_relative_eq!(
            cq.total_length,
            q.forearm_length() + 0.25,
            epsilon = 1e-5
        );
    }

    #[test]
    fn arc_too_large() {
        assert!(matches!(
            build_progress_curve(&right_angle(), 0.25),
            Err(Error::ArcTooLarge { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let v = Vec3::z_axis();
        let x = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(project_to_arm_plane(&x, &Point3::new(5.0, 5.0, 0.0), &v), Point3::new(1.0, 2.0, 0.0));
        let inplane = Point3::new(1.0, 2.0, 0.0);
        assert_eq!(project_to_arm_plane(&inplane, &Point3::zeros(), &v), inplane);
    }

    #[test]
    fn segment_examples() {
        let p = right_angle();
        let c = build_progress_curve(&p, 0.05).unwrap();
        assert_eq!(classify_segment(&p.hand, &c), Segment::Forearm);
        assert_eq!(classify_segment(&p.elbow, &c), Segment::Elbow);
        assert_eq!(classify_segment(&p.shoulder, &c), Segment::Upperarm);
    }

    #[test]
    fn folded_arm_keeps_forearm_points_on_the_forearm() {
        let psi = 50f64.to_radians();
        let elbow = Point3::new(0.0, 0.0, -0.25);
        let p = ArmPosture::new(elbow, elbow + Vec3::new(psi.sin(), 0.0, psi.cos()) * 0.25);
        let c = build_progress_curve(&p, 0.05).unwrap();
        let (_, d_u) = c.limb_projections(&p.hand);
        assert!(d_u < c.d2);
        assert_eq!(classify_segment(&p.hand, &c), Segment::Forearm);
        let v = arm_plane_normal(&p, None).unwrap();
        let mid = c.point_at(0.5 * c.d1).0;
        let dc = to_dressing(&mid, &c, &v).unwrap();
        assert_relative_eq!(dc.s * c.total_length, 0.5 * c.d1, epsilon = 1e-12);
        assert!(dc.l < 1e-12);
    }

    #[test]
    fn endpoints() {
        let p = right_angle();
        let c = build_progress_curve(&p, 0.05).unwrap();
        let v = arm_plane_normal(&p, None).unwrap();
        let h = to_dressing(&p.hand, &c, &v).unwrap();
        assert_eq!((h.s, h.l), (0.0, 0.0));
        let s = to_dressing(&p.shoulder, &c, &v).unwrap();
        assert_relative_eq!(s.s, 1.0, epsilon = 1e-15);
        assert_eq!(s.l, 0.0);
        for theta in [0.0, 1.0, 4.0] {
            assert_eq!(from_dressing(&DressingCoord::new(0.0, 0.0, theta), &c, &v).unwrap(), p.hand);
            let top = from_dressing(&DressingCoord::new(1.0, 0.0, theta), &c, &v).unwrap();
            assert_relative_eq!(top, p.shoulder, epsilon = 1e-15);
        }
        assert!(matches!(
            from_dressing(&DressingCoord::new(1.2, 0.0, 0.0), &c, &v),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn forearm_offset_along_normal() {
        // Slightly bent arm hanging along -z; a point above the forearm
        // midpoint, pushed 5 cm along the normal.
        let p = ArmPosture::new(Point3::new(0.0, 0.0, -0.253), Point3::new(0.05, 0.0, -0.512));
        let c = build_progress_curve(&p, 0.05).unwrap();
        let v = arm_plane_normal(&p, None).unwrap();
        let mid = p.hand + c.forearm_direction() * (0.5 * c.d1);
        let x = mid + v.as_ref() * 0.05;
        let dc = to_dressing(&x, &c, &v).unwrap();
        assert_relative_eq!(dc.s, 0.5 * c.d1 / c.total_length, epsilon = 1e-12);
        assert_relative_eq!(dc.l, 0.05, epsilon = 1e-12);
        // The angle is read from the vector pointing back at the curve, which
        // here is -v.
        assert_relative_eq!(dc.theta, PI, epsilon = 1e-12);
    }

    #[test]
    fn behind_the_hand_clamps() {
        let p = right_angle();
        let c = build_progress_curve(&p, 0.05).unwrap();
        let v = arm_plane_normal(&p, None).unwrap();
        let x = p.hand - c.forearm_direction() * 0.03;
        let dc = to_dressing(&x, &c, &v).unwrap();
        assert_eq!(dc.s, 0.0);
        assert_relative_eq!(dc.l, 0.03, epsilon = 1e-12);
    }

    #[test]
    fn arc_center_is_ambiguous() {
        let p = right_angle();
        let c = build_progress_curve(&p, 0.05).unwrap();
        let v = arm_plane_normal(&p, None).unwrap();
        assert!(matches!(
            to_dressing(&c.arc_center, &c, &v),
            Err(Error::AmbiguousProjection)
        ));
    }

    #[test]
    fn strategy_fixtures() {
        let p = right_angle();
        let c = build_progress_curve(&p, 0.05).unwrap();
        let bis = c.inner_bisector().unwrap();
        for (sign, label) in [(-1.0, Strategy::Outer), (1.0, Strategy::Inner)] {
            let transition = p.elbow + bis * (sign * 0.10);
            let path = vec![p.hand, transition, p.shoulder];
            let (got, d) = classify_strategy(&path, &c).unwrap();
            assert_eq!(got, label);
            assert_relative_eq!(d, sign * 0.10, epsilon = 1e-12);
        }
        let short = vec![p.hand, p.hand + Vec3::new(-0.01, 0.0, 0.0)];
        assert!(matches!(
            classify_strategy(&short, &c),
            Err(Error::PathDoesNotCrossElbow { .. })
        ));
    }
}
