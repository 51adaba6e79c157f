//! Planar finger kinematics in hub coordinates.
//!
//! The hub's linkage base joint sits at the origin, `+x` points distally along the
//! extended finger and `+y` points dorsally (toward the hub). A finger's first joint
//! (MCP for the index, CMC for the thumb) sits at `(0, -start_offset)`. Flexion rotates
//! each phalanx clockwise, i.e. toward `-y`.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Perpendicular offset of the thimble joint from the phalanx midpoint, in mm.
pub const ATTACHMENT_OFFSET_MM: f64 = 20.0;

pub const BUILTIN_FINGERS: &str = include_str!("../data/fingers.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Index,
    Thumb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandSize {
    Small,
    Medium,
    Large,
}

impl HandSize {
    pub const ALL: [HandSize; 3] = [HandSize::Small, HandSize::Medium, HandSize::Large];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachmentMode {
    /// Thimble on the distal phalanx.
    Fingertip,
    /// Strap on the middle phalanx (proximal phalanx of the thumb past the MCP).
    SecondPhalanx,
}

impl AttachmentMode {
    pub const ALL: [AttachmentMode; 2] = [AttachmentMode::Fingertip, AttachmentMode::SecondPhalanx];

    /// Index of the phalanx segment the thimble is attached to.
    pub fn segment(self) -> usize {
        match self {
            AttachmentMode::Fingertip => 2,
            AttachmentMode::SecondPhalanx => 1,
        }
    }
}

macro_rules! impl_name {
    ($ty:ty, $($variant:path => $name:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::usage(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"), other
                    ))),
                }
            }
        }
    };
}

impl_name!(Finger, Finger::Index => "index", Finger::Thumb => "thumb");
impl_name!(HandSize, HandSize::Small => "small", HandSize::Medium => "medium", HandSize::Large => "large");
impl_name!(
    AttachmentMode,
    AttachmentMode::Fingertip => "fingertip",
    AttachmentMode::SecondPhalanx => "second_phalanx",
);

/// Closed flexion interval in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointRange<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> JointRange<T> {
    pub fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, q: T) -> bool {
        q >= self.min && q <= self.max
    }

    /// `min, min + step, ...` up to and including `max` (the end point is always present).
    pub fn steps(&self, step: T) -> Vec<T> {
        let mut out = Vec::new();
        let eps = step * T::lit(1e-9);
        let mut k = 0usize;
        loop {
            let q = self.min + step * T::from_usize(k).unwrap();
            if q > self.max + eps {
                break;
            }
            out.push(q.min(self.max));
            k += 1;
        }
        if out.last().is_none_or(|&q| q < self.max - eps) {
            out.push(self.max);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerSpec<T> {
    pub finger: Finger,
    pub size: HandSize,
    pub phalanx_lengths: [T; 3],
    pub joint_ranges: [JointRange<T>; 3],
    /// Palmar distance of the first finger joint below the hub base joint, mm.
    pub start_offset: T,
}

impl<T: Real> FingerSpec<T> {
    pub fn start_joint(&self) -> Point2<T> {
        Point2::new(T::zero(), -self.start_offset)
    }

    pub fn total_length(&self) -> T {
        self.phalanx_lengths.iter().copied().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.phalanx_lengths.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::data(format!("{} {}: phalanx lengths must be positive", self.finger, self.size)));
        }
        if self.joint_ranges.iter().any(|r| !(r.min <= r.max) || !r.min.is_finite() || !r.max.is_finite()) {
            return Err(Error::data(format!("{} {}: joint range min exceeds max", self.finger, self.size)));
        }
        if !(self.start_offset >= T::zero()) || !self.start_offset.is_finite() {
            return Err(Error::data(format!("{} {}: start offset must be non-negative", self.finger, self.size)));
        }
        Ok(())
    }

    /// Full cross product of the three joint ranges sampled every `step` degrees.
    pub fn angle_grid(&self, step: T) -> Vec<JointAngles<T>> {
        let [r1, r2, r3] = &self.joint_ranges;
        let (s1, s2, s3) = (r1.steps(step), r2.steps(step), r3.steps(step));
        let mut out = Vec::with_capacity(s1.len() * s2.len() * s3.len());
        for &q1 in &s1 {
            for &q2 in &s2 {
                for &q3 in &s3 {
                    out.push(JointAngles::new(q1, q2, q3));
                }
            }
        }
        out
    }

    pub fn builtin(finger: Finger, size: HandSize) -> Self {
        builtin_specs()
            .into_iter()
            .find(|s| s.finger == finger && s.size == size)
            .expect("builtin finger table covers every finger and size")
    }
}

#[derive(Debug, Deserialize)]
struct FingerRow {
    finger: String,
    size: String,
    phalanx1_mm: f64,
    phalanx2_mm: f64,
    phalanx3_mm: f64,
    j1_min_deg: f64,
    j1_max_deg: f64,
    j2_min_deg: f64,
    j2_max_deg: f64,
    j3_min_deg: f64,
    j3_max_deg: f64,
    start_offset_mm: f64,
}

/// Loads finger specs from the tabular format of `data/fingers.csv`.
pub fn load_finger_specs<T: Real, R: Read>(reader: R) -> Result<Vec<FingerSpec<T>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<FingerRow>() {
        let r = row?;
        let spec = FingerSpec {
            finger: r.finger.parse().map_err(|_| Error::data(format!("unknown finger '{}'", r.finger)))?,
            size: r.size.parse().map_err(|_| Error::data(format!("unknown size '{}'", r.size)))?,
            phalanx_lengths: [T::lit(r.phalanx1_mm), T::lit(r.phalanx2_mm), T::lit(r.phalanx3_mm)],
            joint_ranges: [
                JointRange::new(T::lit(r.j1_min_deg), T::lit(r.j1_max_deg)),
                JointRange::new(T::lit(r.j2_min_deg), T::lit(r.j2_max_deg)),
                JointRange::new(T::lit(r.j3_min_deg), T::lit(r.j3_max_deg)),
            ],
            start_offset: T::lit(r.start_offset_mm),
        };
        spec.validate()?;
        out.push(spec);
    }
    if out.is_empty() {
        return Err(Error::data("finger dataset is empty"));
    }
    Ok(out)
}

pub fn builtin_specs<T: Real>() -> Vec<FingerSpec<T>> {
    load_finger_specs(BUILTIN_FINGERS.as_bytes()).expect("builtin finger table parses")
}

pub fn builtin_specs_for<T: Real>(finger: Finger) -> Vec<FingerSpec<T>> {
    builtin_specs().into_iter().filter(|s| s.finger == finger).collect()
}

/// Flexion of the three finger joints in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointAngles<T> {
    pub q1: T,
    pub q2: T,
    pub q3: T,
}

impl<T: Real> JointAngles<T> {
    pub fn new(q1: T, q2: T, q3: T) -> Self {
        Self { q1, q2, q3 }
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.q1, self.q2, self.q3]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerPose<T> {
    /// Base joint, second joint, third joint, tip.
    pub joints: [Point2<T>; 4],
}

impl<T: Real> FingerPose<T> {
    pub fn tip(&self) -> Point2<T> {
        self.joints[3]
    }

    pub fn segment(&self, i: usize) -> (Point2<T>, Point2<T>) {
        (self.joints[i], self.joints[i + 1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttachmentPoint<T> {
    pub mode: AttachmentMode,
    pub point: Point2<T>,
}

pub fn forward_kinematics<T: Real>(spec: &FingerSpec<T>, angles: &JointAngles<T>) -> Result<FingerPose<T>> {
    let qs = angles.as_array();
    for (i, (q, range)) in qs.iter().zip(&spec.joint_ranges).enumerate() {
        if !q.is_finite() || !range.contains(*q) {
            return Err(Error::domain(format!(
                "joint {} angle {} outside [{}, {}] for {} {}",
                i + 1,
                q,
                range.min,
                range.max,
                spec.finger,
                spec.size
            )));
        }
    }
    Ok(forward_kinematics_unchecked(spec, angles))
}

/// Forward kinematics without the joint-range check.
pub fn forward_kinematics_unchecked<T: Real>(spec: &FingerSpec<T>, angles: &JointAngles<T>) -> FingerPose<T> {
    let mut joints = [spec.start_joint(); 4];
    let mut heading = T::zero();
    for (i, (&len, &q)) in spec.phalanx_lengths.iter().zip(angles.as_array().iter()).enumerate() {
        heading = heading - q.to_radians();
        joints[i + 1] = joints[i] + Point2::from_angle(heading) * len;
    }
    FingerPose { joints }
}

/// Thimble joint location: phalanx midpoint pushed along the segment's dorsal (left) normal.
pub fn attachment_point<T: Real>(pose: &FingerPose<T>, mode: AttachmentMode) -> AttachmentPoint<T> {
    let (a, b) = pose.segment(mode.segment());
    let normal = (b - a).normalized().expect("phalanx of non-zero length").left_normal();
    AttachmentPoint {
        mode,
        point: a.midpoint(b) + normal * T::lit(ATTACHMENT_OFFSET_MM),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn medium_index() -> FingerSpec<f64> {
        FingerSpec::builtin(Finger::Index, HandSize::Medium)
    }

    #[test]
    fn builtin_table_matches_ranges() {
        let specs: Vec<FingerSpec<f64>> = builtin_specs();
        assert_eq!(specs.len(), 6);
        for s in &specs {
            let (maxes, offset) = match s.finger {
                Finger::Index => ([90.0, 110.0, 90.0], 45.0),
                Finger::Thumb => ([70.0, 80.0, 90.0], 70.0),
            };
            for (r, m) in s.joint_ranges.iter().zip(maxes) {
                assert_eq!(r.min, 0.0);
                assert_eq!(r.max, m);
            }
            assert_eq!(s.start_offset, offset);
        }
    }

    #[test]
    fn straight_finger_tip() {
        let s = medium_index();
        let pose = forward_kinematics(&s, &JointAngles::new(0.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(pose.tip().x, 106.87, epsilon = 1e-9);
        assert_abs_diff_eq!(pose.tip().y, -45.0, epsilon = 1e-9);
    }

    #[test]
    fn quarter_turn_tip() {
        let s = medium_index();
        let pose = forward_kinematics(&s, &JointAngles::new(90.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(pose.tip().x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pose.tip().y, -45.0 - 106.87, epsilon = 1e-9);
    }

    #[test]
    fn out_of_range_angle_is_rejected() {
        let s = medium_index();
        assert!(matches!(
            forward_kinematics(&s, &JointAngles::new(0.0, 111.0, 0.0)),
            Err(Error::Domain(_))
        ));
        assert!(forward_kinematics(&s, &JointAngles::new(-1.0, 0.0, 0.0)).is_err());
        assert!(forward_kinematics(&s, &JointAngles::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn fingertip_attachment_on_straight_finger() {
        let s = medium_index();
        let pose = forward_kinematics(&s, &JointAngles::default()).unwrap();
        let a = attachment_point(&pose, AttachmentMode::Fingertip);
        assert_abs_diff_eq!(a.point.x, 58.36 + 21.75 + 13.38, epsilon = 1e-9);
        assert_abs_diff_eq!(a.point.y, -45.0 + 20.0, epsilon = 1e-9);
        let b = attachment_point(&pose, AttachmentMode::SecondPhalanx);
        assert_abs_diff_eq!(b.point.x, 58.36 + 21.75 / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.point.y, -25.0, epsilon = 1e-9);
    }

    #[test]
    fn grid_sizes() {
        let s = medium_index();
        assert_eq!(s.angle_grid(10.0).len(), 10 * 12 * 10);
        let t: FingerSpec<f64> = FingerSpec::builtin(Finger::Thumb, HandSize::Small);
        assert_eq!(t.angle_grid(10.0).len(), 8 * 9 * 10);
        // a step that does not divide the range still includes the end stop
        assert_eq!(JointRange::new(0.0, 90.0).steps(40.0), vec![0.0, 40.0, 80.0, 90.0]);
    }

    #[test]
    fn loader_rejects_bad_rows() {
        let bad = "finger,size,phalanx1_mm,phalanx2_mm,phalanx3_mm,j1_min_deg,j1_max_deg,j2_min_deg,j2_max_deg,j3_min_deg,j3_max_deg,start_offset_mm\n\
                   index,small,-1,14,10,0,90,0,110,0,90,45\n";
        assert!(matches!(load_finger_specs::<f64, _>(bad.as_bytes()), Err(Error::Data(_))));
        let unknown = "finger,size,phalanx1_mm,phalanx2_mm,phalanx3_mm,j1_min_deg,j1_max_deg,j2_min_deg,j2_max_deg,j3_min_deg,j3_max_deg,start_offset_mm\n\
                   pinky,small,1,14,10,0,90,0,110,0,90,45\n";
        assert!(load_finger_specs::<f64, _>(unknown.as_bytes()).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("Thumb".parse::<Finger>().unwrap(), Finger::Thumb);
        assert_eq!("second_phalanx".parse::<AttachmentMode>().unwrap(), AttachmentMode::SecondPhalanx);
        assert!("ring".parse::<Finger>().is_err());
    }
}
