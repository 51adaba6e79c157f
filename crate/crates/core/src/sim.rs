//! Event-level replay of the two virtual tasks: pick-and-place with a grasp tolerance and
//! paired softness probing.
//!
//! Nothing here integrates rigid-body dynamics. Pick-and-place failure is decided purely by
//! how far the fingertip distance drifts from its value at pickup.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{motor_command, ServoRange, SoftnessLabel, SoftnessLevel, SoftnessLevels, SoftnessParams};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::transmission::{BrakeModel, ClutchEngagement, ClutchModel, clutch_engage};

/// Generator for run `index` of a batch seeded with `master`. Each run reads its own ChaCha
/// stream, so results do not depend on how runs are scheduled.
pub fn run_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Goal {
    G1,
    G2,
}

impl Goal {
    pub const ALL: [Goal; 2] = [Goal::G1, Goal::G2];
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G1" => Ok(Goal::G1),
            "G2" => Ok(Goal::G2),
            other => Err(Error::usage(format!("unknown goal {other:?} (G1, G2)"))),
        }
    }
}

/// Scene layout in virtual units: a ball on the right and two rings on the forward axis,
/// the far one (G1) and the near one (G2), equidistant from the ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub start: Point2<f64>,
    pub ball: Point2<f64>,
    pub goals: [Point2<f64>; 2],
    pub ring_radius: f64,
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            start: Point2::new(0.1, 0.0),
            ball: Point2::new(0.2, 0.3),
            goals: [Point2::new(0.0, 0.45), Point2::new(0.0, 0.15)],
            ring_radius: 0.04,
        }
    }
}

impl Scene {
    pub fn goal(&self, g: Goal) -> Point2<f64> {
        match g {
            Goal::G1 => self.goals[0],
            Goal::G2 => self.goals[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickPlaceSample {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    pub fingertip_distance: f64,
    pub grasping: bool,
}

impl PickPlaceSample {
    pub fn hand(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PickPlaceTrajectory {
    pub samples: Vec<PickPlaceSample>,
}

fn check_timestamps(ts: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for t in ts {
        if !t.is_finite() || t <= prev {
            return Err(Error::data("timestamps must be finite and strictly increasing"));
        }
        prev = t;
    }
    Ok(())
}

impl PickPlaceTrajectory {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::data("empty trajectory"));
        }
        check_timestamps(self.samples.iter().map(|s| s.t_ms))
    }

    pub fn load_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let samples = rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
        let t = Self { samples };
        t.validate()?;
        Ok(t)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for s in &self.samples {
            wtr.serialize(s)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Scripted trial: reach the ball, grasp at `grasp_distance`, carry to the goal while the
/// fingertip distance bulges by `deviation` at mid-carry, then stop inside the ring.
pub fn scripted_pick_place(scene: &Scene, goal: Goal, grasp_distance: f64, deviation: f64, dt_ms: f64) -> PickPlaceTrajectory {
    let open = grasp_distance + 0.05;
    let mut samples = Vec::new();
    let mut t = 0.0;
    let mut push = |p: Point2<f64>, d: f64, grasping: bool, t: &mut f64| {
        samples.push(PickPlaceSample { t_ms: *t, x: p.x, y: p.y, fingertip_distance: d, grasping });
        *t += dt_ms;
    };
    let steps = |ms: f64| ((ms / dt_ms).round() as usize).max(2);
    let reach = steps(800.0);
    for i in 0..reach {
        let u = i as f64 / reach as f64;
        push(scene.start + (scene.ball - scene.start) * u, open, false, &mut t);
    }
    let target = scene.goal(goal);
    let carry = steps(1200.0);
    for i in 0..=carry {
        let u = i as f64 / carry as f64;
        let bump = deviation * (std::f64::consts::PI * u).sin();
        push(scene.ball + (target - scene.ball) * u, grasp_distance + bump, true, &mut t);
    }
    push(target, open, false, &mut t);
    PickPlaceTrajectory { samples }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspSpec {
    pub tolerance: f64,
}

impl GraspSpec {
    pub const STUDY_TOLERANCES: [f64; 2] = [0.025, 0.03];

    pub fn new(tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) || !tolerance.is_finite() {
            return Err(Error::domain(format!("grasp tolerance must be positive, got {tolerance}")));
        }
        Ok(Self { tolerance })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialResult {
    Success,
    Drop,
    Oversqueeze,
    NoContact,
    Incomplete,
}

impl fmt::Display for TrialResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialResult::Success => "success",
            TrialResult::Drop => "drop",
            TrialResult::Oversqueeze => "oversqueeze",
            TrialResult::NoContact => "no_contact",
            TrialResult::Incomplete => "incomplete",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Contact { t_ms: f64, fingertip_distance: f64 },
    BrakeEngaged { t_ms: f64, latency_ms: f64 },
    ClutchEngaged { t_ms: f64, latency_ms: f64, theta_clutch: f64 },
    Released { t_ms: f64, deviation: f64 },
    Overpinched { t_ms: f64, deviation: f64 },
    Placed { t_ms: f64, goal: Goal },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub result: TrialResult,
    pub completion_ms: Option<f64>,
    pub grasp_distance: Option<f64>,
    pub events: Vec<Event>,
}

pub fn run_pick_place<R: Rng + ?Sized>(
    trajectory: &PickPlaceTrajectory,
    grasp: &GraspSpec,
    goal: Goal,
    scene: &Scene,
    brake: &BrakeModel,
    rng: &mut R,
) -> Result<TrialOutcome> {
    trajectory.validate()?;
    let samples = &trajectory.samples;
    let t0 = samples[0].t_ms;
    let mut events = Vec::new();
    let Some(pick) = samples
        .iter()
        .position(|s| s.grasping && s.hand().distance(scene.ball) <= scene.ring_radius)
    else {
        return Ok(TrialOutcome { result: TrialResult::NoContact, completion_ms: None, grasp_distance: None, events });
    };
    let d0 = samples[pick].fingertip_distance;
    let t_pick = samples[pick].t_ms;
    events.push(Event::Contact { t_ms: t_pick, fingertip_distance: d0 });
    let latency_ms = brake.sample_latency(rng);
    events.push(Event::BrakeEngaged { t_ms: t_pick + latency_ms, latency_ms });
    let ring = scene.goal(goal);
    let mut result = TrialResult::Incomplete;
    let mut completion = None;
    for s in &samples[pick..] {
        let deviation = s.fingertip_distance - d0;
        if !s.grasping || deviation > grasp.tolerance {
            events.push(Event::Released { t_ms: s.t_ms, deviation });
            result = TrialResult::Drop;
            break;
        }
        if deviation < -grasp.tolerance {
            events.push(Event::Overpinched { t_ms: s.t_ms, deviation });
            result = TrialResult::Oversqueeze;
            break;
        }
        if s.hand().distance(ring) <= scene.ring_radius {
            events.push(Event::Placed { t_ms: s.t_ms, goal });
            result = TrialResult::Success;
            completion = Some(s.t_ms - t0);
            break;
        }
    }
    Ok(TrialOutcome { result, completion_ms: completion, grasp_distance: Some(d0), events })
}

/// Penetration of the virtual fingertip into a ball over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrajectory {
    pub t_ms: Vec<f64>,
    pub s: Vec<f64>,
}

impl ProbeTrajectory {
    pub fn validate(&self) -> Result<()> {
        if self.t_ms.is_empty() || self.t_ms.len() != self.s.len() {
            return Err(Error::data("probe needs equally long, non-empty time and penetration columns"));
        }
        if self.s.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite penetration"));
        }
        check_timestamps(self.t_ms.iter().copied())
    }

    /// Free approach, linear press to `depth`, then linear release.
    pub fn press(depth: f64, approach_ms: f64, press_ms: f64, dt_ms: f64) -> Self {
        let n_approach = (approach_ms / dt_ms).round() as usize;
        let n_press = ((press_ms / dt_ms).round() as usize).max(2);
        let mut t_ms = Vec::new();
        let mut s = Vec::new();
        for i in 0..n_approach {
            t_ms.push(i as f64 * dt_ms);
            s.push(0.0);
        }
        for i in 1..=2 * n_press {
            t_ms.push((n_approach + i - 1) as f64 * dt_ms);
            let u = if i <= n_press { i } else { 2 * n_press - i } as f64 / n_press as f64;
            s.push(depth * u);
        }
        Self { t_ms, s }
    }

    /// Reads `t_ms,s` columns, or a single `s` column sampled every millisecond.
    pub fn load_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let s_col = headers.iter().position(|h| h.trim() == "s").unwrap_or(headers.len().saturating_sub(1));
        let t_col = headers.iter().position(|h| h.trim() == "t_ms");
        let (mut t_ms, mut s) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| {
                rec.get(c)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::data(format!("row {}: bad number in column {c}", i + 1)))
            };
            s.push(num(s_col)?);
            t_ms.push(match t_col {
                Some(c) => num(c)?,
                None => i as f64,
            });
        }
        let p = Self { t_ms, s };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandSample {
    pub t_ms: f64,
    pub s: f64,
    pub command: f64,
    /// Command above the engagement position, the part that depends on stiffness.
    pub rendered: f64,
    /// The clutch had engaged by this sample.
    pub active: bool,
    pub saturated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEngagement {
    pub t_contact_ms: f64,
    pub t_engaged_ms: f64,
    pub theta_eq: f64,
    pub clutch: ClutchEngagement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallTrace {
    pub level: SoftnessLevel<f64>,
    pub engagement: Option<ContactEngagement>,
    pub samples: Vec<CommandSample>,
}

impl BallTrace {
    /// Mean rendered command over samples in contact.
    pub fn mean_rendered(&self) -> f64 {
        let v: Vec<f64> = self.samples.iter().filter(|s| s.s > 0.0).map(|s| s.rendered).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn mean_command(&self) -> f64 {
        let v: Vec<f64> = self.samples.iter().filter(|s| s.s > 0.0).map(|s| s.command).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallSide {
    Left,
    Right,
}

/// Supplies the "which ball was softer" answer for a trial.
pub trait Responder {
    fn softer(&mut self, left: &BallTrace, right: &BallTrace) -> Option<BallSide>;
}

/// Picks the ball that pushed back less.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdealResponder;

impl Responder for IdealResponder {
    fn softer(&mut self, left: &BallTrace, right: &BallTrace) -> Option<BallSide> {
        let (l, r) = (left.mean_rendered(), right.mean_rendered());
        if l < r {
            Some(BallSide::Left)
        } else if r < l {
            Some(BallSide::Right)
        } else {
            None
        }
    }
}

/// Records no answer.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoResponder;

impl Responder for NoResponder {
    fn softer(&mut self, _: &BallTrace, _: &BallTrace) -> Option<BallSide> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftnessRig {
    pub clutch: ClutchModel,
    pub servo: ServoRange<f64>,
    /// Motor angle before engagement; the equilibrium position adds the clutching rotation.
    pub motor_home: f64,
}

impl Default for SoftnessRig {
    fn default() -> Self {
        Self { clutch: ClutchModel::default(), servo: ServoRange::default(), motor_home: 0.0 }
    }
}

fn probe_ball<R: Rng + ?Sized>(rig: &SoftnessRig, level: SoftnessLevel<f64>, probe: &ProbeTrajectory, rng: &mut R) -> Result<BallTrace> {
    let contact = probe.s.iter().position(|&s| s > 0.0);
    let engagement = contact.map(|i| {
        let phase = rng.random_range(0.0..rig.clutch.ratchet_step());
        let clutch = clutch_engage(&rig.clutch, phase, rng);
        ContactEngagement {
            t_contact_ms: probe.t_ms[i],
            t_engaged_ms: probe.t_ms[i] + clutch.latency_ms,
            theta_eq: rig.motor_home + clutch.theta_clutch,
            clutch,
        }
    });
    let theta_eq = engagement.map_or(rig.motor_home, |e| e.theta_eq);
    let params = SoftnessParams::new(level.k, theta_eq)?;
    let samples = probe
        .t_ms
        .iter()
        .zip(&probe.s)
        .map(|(&t, &s)| {
            let raw = motor_command(&params, s.max(0.0))?;
            let out = rig.servo.apply(raw);
            Ok(CommandSample {
                t_ms: t,
                s,
                command: out.angle,
                rendered: out.angle - theta_eq,
                active: engagement.is_some_and(|e| t >= e.t_engaged_ms),
                saturated: out.saturated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BallTrace { level, engagement, samples })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftnessTrial {
    pub left: BallTrace,
    pub right: BallTrace,
    /// Both balls share a level.
    pub catch_trial: bool,
    pub answer: Option<BallSide>,
}

pub fn run_softness_trial<R: Rng + ?Sized>(
    rig: &SoftnessRig,
    left: SoftnessLevel<f64>,
    right: SoftnessLevel<f64>,
    probe: &ProbeTrajectory,
    responder: &mut dyn Responder,
    rng: &mut R,
) -> Result<SoftnessTrial> {
    probe.validate()?;
    if probe.s.iter().any(|&s| s < 0.0) {
        return Err(Error::domain("probe penetration must be non-negative"));
    }
    let l = probe_ball(rig, left, probe, rng)?;
    let r = probe_ball(rig, right, probe, rng)?;
    let answer = responder.softer(&l, &r);
    Ok(SoftnessTrial { catch_trial: left.label == right.label, left: l, right: r, answer })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTrial {
    pub index: usize,
    pub pair: [SoftnessLabel; 2],
    pub trial: SoftnessTrial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftnessSession {
    pub seed: u64,
    pub run: u64,
    pub trials: Vec<SessionTrial>,
}

pub const STUDY_PAIRS: [[SoftnessLabel; 2]; 3] = [
    [SoftnessLabel::A, SoftnessLabel::B],
    [SoftnessLabel::A, SoftnessLabel::C],
    [SoftnessLabel::B, SoftnessLabel::C],
];

/// `repetitions` x {AB, AC, BC} trials in shuffled order with randomized left/right placement.
pub fn softness_session(
    rig: &SoftnessRig,
    levels: &SoftnessLevels<f64>,
    probe: &ProbeTrajectory,
    repetitions: usize,
    seed: u64,
    run: u64,
    responder: &mut dyn Responder,
) -> Result<SoftnessSession> {
    levels.validate()?;
    let mut rng = run_rng(seed, run);
    let mut order: Vec<[SoftnessLabel; 2]> = (0..repetitions).flat_map(|_| STUDY_PAIRS).collect();
    order.shuffle(&mut rng);
    let mut trials = Vec::with_capacity(order.len());
    for (index, pair) in order.into_iter().enumerate() {
        let [mut l, mut r] = pair;
        if rng.random_bool(0.5) {
            std::mem::swap(&mut l, &mut r);
        }
        let trial = run_softness_trial(rig, levels.level(l), levels.level(r), probe, responder, &mut rng)?;
        trials.push(SessionTrial { index, pair, trial });
    }
    Ok(SoftnessSession { seed, run, trials })
}

/// Independent sessions `0..count` under one master seed, evaluated in parallel.
pub fn softness_sessions(
    rig: &SoftnessRig,
    levels: &SoftnessLevels<f64>,
    probe: &ProbeTrajectory,
    repetitions: usize,
    seed: u64,
    count: u64,
) -> Result<Vec<SoftnessSession>> {
    (0..count)
        .into_par_iter()
        .map(|run| softness_session(rig, levels, probe, repetitions, seed, run, &mut IdealResponder))
        .collect()
}

impl SoftnessSession {
    /// Share of non-catch trials in which the answer named the truly softer ball.
    pub fn correct_rate(&self) -> Option<f64> {
        let scored: Vec<bool> = self
            .trials
            .iter()
            .filter(|t| !t.trial.catch_trial)
            .filter_map(|t| {
                let truth = if t.trial.left.level.k < t.trial.right.level.k { BallSide::Left } else { BallSide::Right };
                t.trial.answer.map(|a| a == truth)
            })
            .collect();
        (!scored.is_empty()).then(|| scored.iter().filter(|c| **c).count() as f64 / scored.len() as f64)
    }

    pub fn write_traces_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["trial", "ball", "level", "t_ms", "s", "command", "rendered", "active", "saturated"])?;
        for t in &self.trials {
            for (side, ball) in [("left", &t.trial.left), ("right", &t.trial.right)] {
                for s in &ball.samples {
                    wtr.write_record([
                        t.index.to_string(),
                        side.to_string(),
                        ball.level.label.to_string(),
                        s.t_ms.to_string(),
                        s.s.to_string(),
                        s.command.to_string(),
                        s.rendered.to_string(),
                        s.active.to_string(),
                        s.saturated.to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
