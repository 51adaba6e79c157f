//! Linkage design-space search.
//!
//! Every `(l1, l2)` pair on a 10 mm lattice is checked against every scenario (hand
//! size x joint-angle grid x attachment mode). A cell is unreachable when any target
//! falls outside the two-link annulus. Otherwise the second link is given increasing
//! arch heights until no scenario collides with the finger.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orient, polyline_distance, polylines_cross, Point2};
use crate::handmodel::{
    attachment_point, forward_kinematics, AttachmentMode, Finger, FingerPose, FingerSpec, HandSize, JointAngles,
};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkageConfig<T> {
    pub l1: T,
    pub l2: T,
    /// Sagitta of the second link, 0 for a straight beam.
    pub arch_height: T,
}

impl<T: Real> LinkageConfig<T> {
    pub fn new(l1: T, l2: T, arch_height: T) -> Self {
        Self { l1, l2, arch_height }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (T::lit(60.0), T::lit(200.0));
        let ok = |v: T, a: T, b: T| v.is_finite() && v >= a && v <= b;
        if !ok(self.l1, lo, hi) || !ok(self.l2, lo, hi) {
            return Err(Error::domain(format!("link lengths ({}, {}) outside [60, 200] mm", self.l1, self.l2)));
        }
        if !ok(self.arch_height, T::zero(), T::lit(30.0)) {
            return Err(Error::domain(format!("arch height {} outside [0, 30] mm", self.arch_height)));
        }
        Ok(())
    }
}

/// Which of the two elbow solutions the linkage uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElbowBranch {
    /// Elbow counter-clockwise of the base-to-target ray. Above the finger when it is
    /// extended and on the outside of the curl when it is flexed.
    #[default]
    Dorsal,
    /// The mirror solution, which threads through the finger.
    Palmar,
    /// A scenario passes if either branch passes (sensitivity analysis only).
    Both,
}

impl fmt::Display for ElbowBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElbowBranch::Dorsal => "dorsal",
            ElbowBranch::Palmar => "palmar",
            ElbowBranch::Both => "both",
        })
    }
}

impl FromStr for ElbowBranch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dorsal" => Ok(ElbowBranch::Dorsal),
            "palmar" => Ok(ElbowBranch::Palmar),
            "both" => Ok(ElbowBranch::Both),
            other => Err(Error::usage(format!("unknown elbow branch '{other}'"))),
        }
    }
}

/// Both circle-intersection elbows, dorsal first. `None` when the target lies outside
/// the annulus `|l1 - l2| <= d <= l1 + l2` or coincides with a base of unequal links.
pub fn ik_two_link_both<T: Real>(base: Point2<T>, target: Point2<T>, l1: T, l2: T) -> Option<[Point2<T>; 2]> {
    let delta = target - base;
    let d = delta.norm();
    let tol = T::epsilon() * T::lit(64.0) * (l1 + l2);
    if !(d <= l1 + l2 + tol) || d < (l1 - l2).abs() - tol {
        return None;
    }
    if d <= T::epsilon() {
        // coincident base and target: l1 == l2 here, any elbow on the circle works
        let up = Point2::new(T::zero(), l1);
        return Some([base + up, base - up]);
    }
    let dir = delta * (T::one() / d);
    let along = ((l1 * l1 - l2 * l2 + d * d) / (d + d)).min(l1).max(-l1);
    let h = (l1 * l1 - along * along).max(T::zero()).sqrt();
    let foot = base + dir * along;
    let n = dir.left_normal();
    Some([foot + n * h, foot - n * h])
}

/// Dorsal elbow for a two-link chain from `base` to `target`, or `None` if unreachable.
pub fn ik_two_link<T: Real>(base: Point2<T>, target: Point2<T>, l1: T, l2: T) -> Option<Point2<T>> {
    ik_two_link_both(base, target, l1, l2).map(|[dorsal, _]| dorsal)
}

/// Maximum chordal deviation allowed when discretizing an arched link, mm.
pub const ARC_CHORD_TOLERANCE_MM: f64 = 0.1;

/// Polyline for the linkage `base -> elbow -> target`.
///
/// The second link is straight when `arch_height` is zero, otherwise a circular arc on the
/// chord `elbow -> target` bulging to the chord's left (the side facing away from the
/// finger for a dorsal elbow). Sagittas above half the chord are rejected.
pub fn linkage_polyline<T: Real>(
    base: Point2<T>,
    elbow: Point2<T>,
    target: Point2<T>,
    arch_height: T,
) -> Result<Vec<Point2<T>>> {
    let mut out = vec![base];
    out.extend(arched_link(elbow, target, arch_height, T::lit(ARC_CHORD_TOLERANCE_MM))?);
    Ok(out)
}

/// Points of the second link from `from` to `to`, both end points included.
pub fn arched_link<T: Real>(from: Point2<T>, to: Point2<T>, sagitta: T, tolerance: T) -> Result<Vec<Point2<T>>> {
    if !(sagitta >= T::zero()) || !sagitta.is_finite() {
        return Err(Error::domain(format!("arch height {sagitta} must be a non-negative number")));
    }
    if sagitta == T::zero() {
        return Ok(vec![from, to]);
    }
    let chord = to - from;
    let c = chord.norm();
    let half = c * T::lit(0.5);
    if sagitta > half * (T::one() + T::epsilon() * T::lit(1024.0)) {
        return Err(Error::domain(format!(
            "arch height {sagitta} exceeds half the chord ({half}); the arc would pass a semicircle"
        )));
    }
    let sagitta = sagitta.min(half);
    let u = chord * (T::one() / c);
    let n = u.left_normal();
    let radius = (half * half + sagitta * sagitta) / (sagitta + sagitta);
    let center = from.midpoint(to) - n * (radius - sagitta);
    // P(theta) = center + r (cos theta n - sin theta u); theta = phi at `from`, -phi at `to`
    let phi = half.atan2(radius - sagitta);
    let max_step = if tolerance < radius {
        T::lit(2.0) * (T::one() - tolerance / radius).acos()
    } else {
        T::PI()
    };
    let segments = ((phi + phi) / max_step).ceil().max(T::one()).to_usize().unwrap_or(1).max(2);
    let mut pts = Vec::with_capacity(segments + 1);
    pts.push(from);
    for k in 1..segments {
        let t = phi - (phi + phi) * T::from_usize(k).unwrap() / T::from_usize(segments).unwrap();
        let (s, co) = t.sin_cos();
        pts.push(center + (n * co - u * s) * radius);
    }
    pts.push(to);
    Ok(pts)
}

/// True iff some linkage segment properly crosses some finger segment, or comes closer
/// than `clearance` when that is positive.
pub fn collides_with_clearance<T: Real>(linkage: &[Point2<T>], finger: &FingerPose<T>, clearance: T) -> bool {
    if clearance > T::zero() {
        polyline_distance(linkage, &finger.joints) < clearance
    } else {
        polylines_cross(linkage, &finger.joints)
    }
}

/// Zero-thickness collision test between a linkage polyline and a finger pose.
pub fn collides<T: Real>(linkage: &[Point2<T>], finger: &FingerPose<T>) -> bool {
    collides_with_clearance(linkage, finger, T::zero())
}

/// One posture the linkage must serve.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    pub size: HandSize,
    pub angles: JointAngles<T>,
    pub mode: AttachmentMode,
    pub pose: FingerPose<T>,
    pub target: Point2<T>,
}

impl<T: Real> Scenario<T> {
    pub fn new(spec: &FingerSpec<T>, angles: JointAngles<T>, mode: AttachmentMode) -> Result<Self> {
        let pose = forward_kinematics(spec, &angles)?;
        let target = attachment_point(&pose, mode).point;
        Ok(Self { size: spec.size, angles, mode, pose, target })
    }
}

/// Cross product of sizes x angle grid x attachment modes.
pub fn scenarios<T: Real>(specs: &[FingerSpec<T>], angle_step: T) -> Result<Vec<Scenario<T>>> {
    let mut out = Vec::new();
    for spec in specs {
        for angles in spec.angle_grid(angle_step) {
            for mode in AttachmentMode::ALL {
                out.push(Scenario::new(spec, angles, mode)?);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions<T> {
    pub length_min: T,
    pub length_max: T,
    pub length_step: T,
    pub arch_step: T,
    pub arch_max: T,
    pub clearance: T,
    pub angle_step: T,
    pub branch: ElbowBranch,
}

impl<T: Real> Default for SearchOptions<T> {
    fn default() -> Self {
        Self {
            length_min: T::lit(60.0),
            length_max: T::lit(200.0),
            length_step: T::lit(10.0),
            arch_step: T::lit(5.0),
            arch_max: T::lit(30.0),
            clearance: T::zero(),
            angle_step: T::lit(10.0),
            branch: ElbowBranch::Dorsal,
        }
    }
}

impl<T: Real> SearchOptions<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !pos(self.length_step) || !pos(self.arch_step) || !pos(self.angle_step) {
            return Err(Error::usage("search steps must be positive"));
        }
        if !(self.length_min > T::zero()) || !(self.length_max >= self.length_min) {
            return Err(Error::usage("link length range must be positive and ordered"));
        }
        if !(self.arch_max >= T::zero()) || !(self.clearance >= T::zero()) {
            return Err(Error::usage("arch cap and clearance must be non-negative"));
        }
        Ok(())
    }

    pub fn lengths(&self) -> Vec<T> {
        lattice(self.length_min, self.length_max, self.length_step)
    }

    pub fn arch_heights(&self) -> Vec<T> {
        lattice(T::zero(), self.arch_max, self.arch_step)
    }
}

fn lattice<T: Real>(lo: T, hi: T, step: T) -> Vec<T> {
    let eps = step * T::lit(1e-9);
    (0..)
        .map(|k| lo + step * T::from_usize(k).unwrap())
        .take_while(|&v| v <= hi + eps)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict<T> {
    Feasible { min_arch: T },
    Unreachable,
    CollisionUnresolved,
}

impl<T: Real> Verdict<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible { .. })
    }

    pub fn min_arch(&self) -> Option<T> {
        match *self {
            Verdict::Feasible { min_arch } => Some(min_arch),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Feasible { .. } => "feasible",
            Verdict::Unreachable => "unreachable",
            Verdict::CollisionUnresolved => "collision_unresolved",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCell<T> {
    pub l1: T,
    pub l2: T,
    pub verdict: Verdict<T>,
}

impl<T: Real> FeasibilityCell<T> {
    pub fn config(&self) -> Option<LinkageConfig<T>> {
        self.verdict.min_arch().map(|h| LinkageConfig::new(self.l1, self.l2, h))
    }
}

fn scenario_clear<T: Real>(sc: &Scenario<T>, elbows: &[Point2<T>], arch: T, clearance: T) -> bool {
    let base = Point2::origin();
    elbows.iter().any(|&elbow| match linkage_polyline(base, elbow, sc.target, arch) {
        Ok(poly) => !collides_with_clearance(&poly, &sc.pose, clearance),
        Err(_) => false,
    })
}

/// Verdict for one `(l1, l2)` pair. Reach is checked first (arching preserves the chord, so
/// it cannot repair reach), then straight and arched second links in increasing height.
pub fn evaluate_config<T: Real>(
    l1: T,
    l2: T,
    scenarios: &[Scenario<T>],
    opts: &SearchOptions<T>,
) -> FeasibilityCell<T> {
    let base = Point2::origin();
    let mut elbows: Vec<Vec<Point2<T>>> = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        match ik_two_link_both(base, sc.target, l1, l2) {
            None => return FeasibilityCell { l1, l2, verdict: Verdict::Unreachable },
            Some([dorsal, palmar]) => elbows.push(match opts.branch {
                ElbowBranch::Dorsal => vec![dorsal],
                ElbowBranch::Palmar => vec![palmar],
                ElbowBranch::Both => vec![dorsal, palmar],
            }),
        }
    }
    // Scenarios that fail at one height are the likeliest to fail at the next; try them first.
    let mut order: Vec<usize> = (0..scenarios.len()).collect();
    for arch in opts.arch_heights() {
        let failing = order
            .iter()
            .position(|&i| !scenario_clear(&scenarios[i], &elbows[i], arch, opts.clearance));
        match failing {
            None => return FeasibilityCell { l1, l2, verdict: Verdict::Feasible { min_arch: arch } },
            Some(pos) => {
                let i = order.remove(pos);
                order.insert(0, i);
            }
        }
    }
    FeasibilityCell { l1, l2, verdict: Verdict::CollisionUnresolved }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityGrid<T> {
    pub finger: Finger,
    pub options: SearchOptions<T>,
    /// Row-major in `(l1, l2)` ascending order.
    pub cells: Vec<FeasibilityCell<T>>,
}

impl<T: Real> FeasibilityGrid<T> {
    pub fn cell(&self, l1: T, l2: T) -> Option<&FeasibilityCell<T>> {
        let tol = self.options.length_step * T::lit(1e-6);
        self.cells.iter().find(|c| (c.l1 - l1).abs() < tol && (c.l2 - l2).abs() < tol)
    }

    pub fn feasible(&self) -> impl Iterator<Item = &FeasibilityCell<T>> {
        self.cells.iter().filter(|c| c.verdict.is_feasible())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["l1_mm", "l2_mm", "verdict", "min_arch_mm"])?;
        for c in &self.cells {
            let arch = c.verdict.min_arch().map(|h| h.to_string()).unwrap_or_default();
            wtr.write_record([c.l1.to_string(), c.l2.to_string(), c.verdict.label().to_string(), arch])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads cells written by [`FeasibilityGrid::write_csv`].
    pub fn read_cells_csv<R: std::io::Read>(reader: R) -> Result<Vec<FeasibilityCell<T>>> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut cells = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 4 {
                return Err(Error::data("grid CSV needs l1_mm,l2_mm,verdict,min_arch_mm"));
            }
            let num = |i: usize| {
                rec[i].trim().parse::<f64>().map(T::lit).map_err(|_| Error::data(format!("bad number {:?}", &rec[i])))
            };
            let verdict = match rec[2].trim() {
                "feasible" => Verdict::Feasible { min_arch: num(3)? },
                "unreachable" => Verdict::Unreachable,
                "collision_unresolved" => Verdict::CollisionUnresolved,
                other => return Err(Error::data(format!("unknown verdict {other:?}"))),
            };
            cells.push(FeasibilityCell { l1: num(0)?, l2: num(1)?, verdict });
        }
        Ok(cells)
    }

    /// Text rendering with `l1` rows and `l2` columns: arch height, `U` unreachable,
    /// `C` collision.
    pub fn ascii_table(&self) -> String {
        let mut rows: BTreeMap<i64, Vec<String>> = BTreeMap::new();
        let mut header: Vec<String> = Vec::new();
        for c in &self.cells {
            let key = c.l1.as_f64().round() as i64;
            let tag = match c.verdict {
                Verdict::Feasible { min_arch } => format!("{}", min_arch.as_f64()),
                Verdict::Unreachable => "U".into(),
                Verdict::CollisionUnresolved => "C".into(),
            };
            rows.entry(key).or_default().push(tag);
            if rows.len() == 1 {
                header.push(format!("{}", c.l2.as_f64()));
            }
        }
        let mut s = format!("{:>5} |", "l1\\l2");
        for h in &header {
            s.push_str(&format!("{h:>4}"));
        }
        s.push('\n');
        for (l1, row) in rows {
            s.push_str(&format!("{l1:>5} |"));
            for t in row {
                s.push_str(&format!("{t:>4}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Evaluates every cell of the length lattice. Cells run in parallel; the result is in
/// canonical order regardless of scheduling.
pub fn search<T: Real>(finger: Finger, specs: &[FingerSpec<T>], opts: &SearchOptions<T>) -> Result<FeasibilityGrid<T>> {
    opts.validate()?;
    let specs: Vec<FingerSpec<T>> = specs.iter().filter(|s| s.finger == finger).cloned().collect();
    if specs.is_empty() {
        return Err(Error::data(format!("no finger specs for {finger}")));
    }
    let scenarios = scenarios(&specs, opts.angle_step)?;
    let lengths = opts.lengths();
    let pairs: Vec<(T, T)> = lengths.iter().flat_map(|&a| lengths.iter().map(move |&b| (a, b))).collect();
    let cells = pairs
        .par_iter()
        .map(|&(l1, l2)| evaluate_config(l1, l2, &scenarios, opts))
        .collect();
    Ok(FeasibilityGrid { finger, options: *opts, cells })
}

/// Shortest feasible configuration: minimal `l1 + l2`, then lower arch, then shorter `l2`.
pub fn select_shortest<T: Real>(grid: &FeasibilityGrid<T>) -> Result<LinkageConfig<T>> {
    grid.feasible()
        .filter_map(FeasibilityCell::config)
        .min_by(|a, b| {
            (a.l1 + a.l2)
                .partial_cmp(&(b.l1 + b.l2))
                .unwrap()
                .then(a.arch_height.partial_cmp(&b.arch_height).unwrap())
                .then(a.l2.partial_cmp(&b.l2).unwrap())
        })
        .ok_or_else(|| Error::Infeasible(format!("no feasible linkage for the {} finger", grid.finger)))
}

/// Failure loads measured on printed parts, N. Kept for reference, not used by the search.
pub mod measured_loads {
    pub const INDEX_FIRST_LINK_N: f64 = 52.6;
    pub const INDEX_SECOND_LINK_N: f64 = 45.3;
    pub const THUMB_SECOND_LINK_N: f64 = 62.5;
    /// Mean and sd over strap thimble samples.
    pub const STRAP_THIMBLE_N: (f64, f64) = (98.98, 14.55);
    /// Mean and sd over fingertip thimble samples.
    pub const FINGERTIP_THIMBLE_N: (f64, f64) = (45.42, 6.11);
}

/// Link dimensions of the built prototype for each finger.
pub fn reference_design<T: Real>(finger: Finger) -> LinkageConfig<T> {
    match finger {
        Finger::Index => LinkageConfig::new(T::lit(170.0), T::lit(130.0), T::lit(30.0)),
        Finger::Thumb => LinkageConfig::new(T::lit(160.0), T::lit(90.0), T::lit(20.0)),
    }
}

/// Smallest arch height on a `step` lattice up to `max` that clears every scenario,
/// regardless of the search cap. `None` when unreachable or nothing on the lattice clears.
pub fn required_arch<T: Real>(
    l1: T,
    l2: T,
    scenarios: &[Scenario<T>],
    opts: &SearchOptions<T>,
    step: T,
    max: T,
) -> Option<T> {
    let fine = SearchOptions { arch_step: step, arch_max: max, ..*opts };
    evaluate_config(l1, l2, scenarios, &fine).verdict.min_arch()
}

/// Comparison of a computed grid with the reference design of its finger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport<T> {
    pub finger: Finger,
    pub cells: usize,
    pub feasible: usize,
    pub unreachable: usize,
    pub collision_unresolved: usize,
    pub selected: Option<LinkageConfig<T>>,
    pub reference: LinkageConfig<T>,
    pub reference_verdict: Verdict<T>,
    /// Arch needed by the reference lengths on a 0.5 mm lattice, up to half of `l2`.
    pub reference_required_arch: Option<T>,
    pub reference_arch_within_step: bool,
    pub selected_is_reference: bool,
}

pub fn grid_report<T: Real>(grid: &FeasibilityGrid<T>, specs: &[FingerSpec<T>]) -> Result<GridReport<T>> {
    let specs: Vec<FingerSpec<T>> = specs.iter().filter(|s| s.finger == grid.finger).cloned().collect();
    let scenarios = scenarios(&specs, grid.options.angle_step)?;
    let reference = reference_design::<T>(grid.finger);
    let verdict = evaluate_config(reference.l1, reference.l2, &scenarios, &grid.options).verdict;
    let required = required_arch(
        reference.l1,
        reference.l2,
        &scenarios,
        &grid.options,
        T::lit(0.5),
        reference.l2 * T::lit(0.5),
    );
    let count = |label: &str| grid.cells.iter().filter(|c| c.verdict.label() == label).count();
    let selected = select_shortest(grid).ok();
    let within = verdict
        .min_arch()
        .is_some_and(|h| (h - reference.arch_height).abs() <= grid.options.arch_step + T::lit(1e-9));
    let same = selected.is_some_and(|c| {
        (c.l1 - reference.l1).abs() < T::lit(1e-9)
            && (c.l2 - reference.l2).abs() < T::lit(1e-9)
            && (c.arch_height - reference.arch_height).abs() < T::lit(1e-9)
    });
    Ok(GridReport {
        finger: grid.finger,
        cells: grid.cells.len(),
        feasible: count("feasible"),
        unreachable: count("unreachable"),
        collision_unresolved: count("collision_unresolved"),
        selected,
        reference,
        reference_verdict: verdict,
        reference_required_arch: required,
        reference_arch_within_step: within,
        selected_is_reference: same,
    })
}

impl<T: Real> fmt::Display for GridReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cfg = |c: &LinkageConfig<T>| format!("({}, {}, arch {})", c.l1, c.l2, c.arch_height);
        writeln!(f, "finger: {}", self.finger)?;
        writeln!(
            f,
            "cells: {} (feasible {}, unreachable {}, collision_unresolved {})",
            self.cells, self.feasible, self.unreachable, self.collision_unresolved
        )?;
        match &self.selected {
            Some(c) => writeln!(f, "shortest feasible: {}", cfg(c))?,
            None => writeln!(f, "shortest feasible: none")?,
        }
        writeln!(f, "reference design: {}", cfg(&self.reference))?;
        match self.reference_verdict {
            Verdict::Feasible { min_arch } => writeln!(f, "reference lengths: feasible, min arch {min_arch}")?,
            v => writeln!(f, "reference lengths: {}", v.label())?,
        }
        match self.reference_required_arch {
            Some(h) => writeln!(f, "reference lengths need arch >= {h} mm (0.5 mm lattice)")?,
            None => writeln!(f, "reference lengths: no arch up to half the second link clears all postures")?,
        }
        writeln!(f, "reference arch within one step: {}", self.reference_arch_within_step)?;
        writeln!(f, "shortest feasible equals reference: {}", self.selected_is_reference)
    }
}

/// Side of the chord `elbow -> target` on which `p` lies (positive = bulge side).
pub fn bulge_side<T: Real>(elbow: Point2<T>, target: Point2<T>, p: Point2<T>) -> T {
    orient(elbow, target, p)
}
