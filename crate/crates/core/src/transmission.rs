//! Tendon-pulley transmission, ratchet-pawl brake, one-way clutch and bevel gearing.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Radii of the tendon loop. With equal radii the main pulley turns by the plain sum of
/// both linkage angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulleyRadii<T> {
    pub first: T,
    pub second: T,
    pub main: T,
}

impl<T: Real> Default for PulleyRadii<T> {
    fn default() -> Self {
        Self { first: T::one(), second: T::one(), main: T::one() }
    }
}

impl<T: Real> PulleyRadii<T> {
    pub fn main_angle(&self, theta1: T, theta2: T) -> T {
        (self.first * theta1 + self.second * theta2) / self.main
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulleyState<T> {
    pub theta1: T,
    pub theta2: T,
    pub main_pulley_angle: T,
}

impl<T: Real> PulleyState<T> {
    pub fn new(theta1: T, theta2: T) -> Self {
        Self { theta1, theta2, main_pulley_angle: pulley_angle(theta1, theta2) }
    }
}

pub fn pulley_angle<T: Real>(theta1: T, theta2: T) -> T {
    PulleyRadii::default().main_angle(theta1, theta2)
}

/// Gaussian timing jitter around a fixed overhead, clamped to an observed range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub overhead_ms: f64,
    pub jitter_sd_ms: f64,
    pub range_ms: [f64; 2],
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.range_ms;
        if !(self.jitter_sd_ms >= 0.0) || !(lo <= hi) || !self.overhead_ms.is_finite() {
            return Err(Error::domain("latency model needs sd >= 0 and an ordered range"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, motion_ms: f64, rng: &mut R) -> f64 {
        let nominal = self.overhead_ms + motion_ms;
        let jitter = if self.jitter_sd_ms > 0.0 {
            Normal::new(0.0, self.jitter_sd_ms).expect("valid sd").sample(rng)
        } else {
            0.0
        };
        (nominal + jitter).clamp(self.range_ms[0], self.range_ms[1])
    }

    /// Expected value of [`LatencyModel::sample`] for a fixed motion time.
    pub fn expected(&self, motion_ms: f64) -> f64 {
        let mu = self.overhead_ms + motion_ms;
        let [a, b] = self.range_ms;
        let s = self.jitter_sd_ms;
        if s == 0.0 {
            return mu.clamp(a, b);
        }
        let cdf = |x: f64| 0.5 * erfc(-(x - mu) / (s * std::f64::consts::SQRT_2));
        let pdf = |x: f64| (-0.5 * ((x - mu) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let (fa, fb) = (cdf(a), cdf(b));
        a * fa + mu * (fb - fa) - s * s * (pdf(b) - pdf(a)) + b * (1.0 - fb)
    }
}

/// Overhead that makes the mean of `latency.expected(motion)` over `motions` equal `target`.
fn calibrate_overhead(latency: &LatencyModel, motions: &[f64], target: f64) -> Result<f64> {
    let mean_motion = motions.iter().sum::<f64>() / motions.len() as f64;
    if !(target > mean_motion + 1e-9 * mean_motion.abs().max(1.0)) {
        return Err(Error::domain(format!(
            "target latency {target} ms does not exceed the mean motion time {mean_motion:.3} ms"
        )));
    }
    let [lo_r, hi_r] = latency.range_ms;
    if !(target > lo_r && target < hi_r) {
        return Err(Error::domain(format!("target latency {target} ms outside the clamp range [{lo_r}, {hi_r}]")));
    }
    let mean_at = |overhead: f64| {
        let m = LatencyModel { overhead_ms: overhead, ..*latency };
        motions.iter().map(|&t| m.expected(t)).sum::<f64>() / motions.len() as f64
    };
    let (mut lo, mut hi) = (lo_r - mean_motion - 10.0 * latency.jitter_sd_ms, hi_r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Direction in which an engaged brake blocks the pulley. Flexion increases the angle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Flexion,
    Extension,
}

pub const BRAKE_LATENCY_MEAN_MS: f64 = 64.475;
pub const BRAKE_LATENCY_SD_MS: f64 = 22.99;
pub const CLUTCH_LATENCY_MEAN_MS: f64 = 88.7;
pub const CLUTCH_LATENCY_SD_MS: f64 = 24.68;
/// No-load servo speed: 60 degrees in 0.07 s.
pub const SERVO_SPEED_DEG_PER_S: f64 = 60.0 / 0.07;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrakeModel {
    pub teeth: u32,
    pub latency: LatencyModel,
}

impl Default for BrakeModel {
    fn default() -> Self {
        let m = Self {
            teeth: 20,
            latency: LatencyModel {
                overhead_ms: BRAKE_LATENCY_MEAN_MS,
                jitter_sd_ms: BRAKE_LATENCY_SD_MS,
                range_ms: [9.0, 108.0],
            },
        };
        m.calibrate_latency(BRAKE_LATENCY_MEAN_MS).expect("default brake calibration")
    }
}

impl BrakeModel {
    pub fn tooth_step(&self) -> f64 {
        360.0 / self.teeth as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.teeth == 0 {
            return Err(Error::domain("brake needs at least one tooth"));
        }
        self.latency.validate()
    }

    /// Calibrates the overhead so the mean (clamped) engagement latency equals `target_ms`.
    pub fn calibrate_latency(&self, target_ms: f64) -> Result<Self> {
        let overhead_ms = calibrate_overhead(&self.latency, &[0.0], target_ms)?;
        Ok(Self { latency: LatencyModel { overhead_ms, ..self.latency }, ..*self })
    }

    pub fn sample_latency<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.latency.sample(0.0, rng)
    }
}

/// Angle at which the pawl stops the pulley: the next tooth boundary in the blocked direction.
pub fn brake_engage<T: Real>(model: &BrakeModel, pulley_angle: T, direction: Direction) -> T {
    let step = T::lit(model.tooth_step());
    let k = pulley_angle / step;
    // Absorb float noise so an angle sitting on a boundary stays on it.
    let snapped = k.round();
    let k = if (k - snapped).abs() < T::lit(1e-9) { snapped } else { k };
    match direction {
        Direction::Flexion => k.ceil() * step,
        Direction::Extension => k.floor() * step,
    }
}

/// Single-owner brake state machine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Brake<T> {
    pub model: BrakeModel,
    pub lock: Option<(T, Direction)>,
}

impl<T: Real> Brake<T> {
    pub fn new(model: BrakeModel) -> Self {
        Self { model, lock: None }
    }

    pub fn engaged(&self) -> bool {
        self.lock.is_some()
    }

    pub fn engage(&mut self, pulley_angle: T, direction: Direction) -> T {
        let at = brake_engage(&self.model, pulley_angle, direction);
        self.lock = Some((at, direction));
        at
    }

    pub fn release(&mut self) {
        self.lock = None;
    }

    /// Where the pulley ends up when asked to move to `requested`.
    pub fn constrain(&self, requested: T) -> T {
        match self.lock {
            None => requested,
            Some((at, Direction::Flexion)) => requested.min(at),
            Some((at, Direction::Extension)) => requested.max(at),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutchModel {
    pub theta_pawl: f64,
    pub ratchet_teeth: u32,
    pub motor_speed: f64,
    pub latency: LatencyModel,
}

impl Default for ClutchModel {
    fn default() -> Self {
        let m = Self {
            theta_pawl: 30.0,
            ratchet_teeth: 12,
            motor_speed: SERVO_SPEED_DEG_PER_S,
            latency: LatencyModel { overhead_ms: 0.0, jitter_sd_ms: 0.0, range_ms: [17.0, 152.0] },
        };
        // Jitter carries the measured spread that the uniform phase does not already explain.
        let motion_sd = m.ratchet_step() / m.motor_speed * 1000.0 / 12f64.sqrt();
        let jitter = (CLUTCH_LATENCY_SD_MS.powi(2) - motion_sd.powi(2)).max(0.0).sqrt();
        let m = Self { latency: LatencyModel { jitter_sd_ms: jitter, ..m.latency }, ..m };
        m.calibrate_latency(CLUTCH_LATENCY_MEAN_MS).expect("default clutch calibration")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutchEngagement {
    pub phase: f64,
    pub theta_align: f64,
    pub theta_clutch: f64,
    pub latency_ms: f64,
}

impl ClutchModel {
    pub fn ratchet_step(&self) -> f64 {
        360.0 / self.ratchet_teeth as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratchet_teeth == 0 || !(self.motor_speed > 0.0) || !(self.theta_pawl >= 0.0) {
            return Err(Error::domain("clutch needs teeth > 0, motor speed > 0 and pawl angle >= 0"));
        }
        self.latency.validate()
    }

    /// Remaining rotation to the next tooth and the total engagement rotation.
    pub fn geometry(&self, phase: f64) -> (f64, f64) {
        let step = self.ratchet_step();
        let align = (step - phase.rem_euclid(step)).rem_euclid(step);
        let align = if align >= step { 0.0 } else { align };
        (align, self.theta_pawl + align)
    }

    pub fn motion_ms(&self, theta_clutch: f64) -> f64 {
        theta_clutch / self.motor_speed * 1000.0
    }

    fn sweep_motions(&self, points: usize) -> Vec<f64> {
        let step = self.ratchet_step();
        (0..points)
            .map(|i| self.motion_ms(self.geometry((i as f64 + 0.5) * step / points as f64).1))
            .collect()
    }

    /// Mean latency over a uniformly distributed phase, including range clamping.
    pub fn expected_latency(&self) -> f64 {
        let m = self.sweep_motions(2000);
        m.iter().map(|&t| self.latency.expected(t)).sum::<f64>() / m.len() as f64
    }

    pub fn calibrate_latency(&self, target_ms: f64) -> Result<Self> {
        let overhead_ms = calibrate_overhead(&self.latency, &self.sweep_motions(2000), target_ms)?;
        Ok(Self { latency: LatencyModel { overhead_ms, ..self.latency }, ..*self })
    }
}

pub fn clutch_engage<R: Rng + ?Sized>(model: &ClutchModel, phase: f64, rng: &mut R) -> ClutchEngagement {
    let (theta_align, theta_clutch) = model.geometry(phase);
    let latency_ms = model.latency.sample(model.motion_ms(theta_clutch), rng);
    ClutchEngagement { phase, theta_align, theta_clutch, latency_ms }
}

/// Bevel stage between the main shaft and the knuckle hub.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BevelMap<T> {
    pub hub_per_shaft: T,
    pub hub_limit: T,
}

impl<T: Real> Default for BevelMap<T> {
    fn default() -> Self {
        Self { hub_per_shaft: T::lit(19.0 / 13.0), hub_limit: T::lit(90.0) }
    }
}

impl<T: Real> BevelMap<T> {
    /// The same gear pair mounted the other way round.
    pub fn inverted(&self) -> Self {
        Self { hub_per_shaft: self.hub_per_shaft.recip(), ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubAngle<T> {
    pub angle: T,
    pub saturated: bool,
}

pub fn bevel_map<T: Real>(map: &BevelMap<T>, shaft_angle: T) -> HubAngle<T> {
    let raw = map.hub_per_shaft * shaft_angle;
    let angle = raw.max(-map.hub_limit).min(map.hub_limit);
    HubAngle { angle, saturated: raw.abs() > map.hub_limit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pulley_sum() {
        assert_eq!(pulley_angle(0.0, 0.0), 0.0);
        assert_eq!(pulley_angle(30.0, 40.0), 70.0);
        assert_eq!(PulleyState::new(10.0f32, 5.0).main_pulley_angle, 15.0);
    }

    #[test]
    fn clutch_geometry_examples() {
        let m = ClutchModel::default();
        assert_eq!(m.geometry(0.0), (0.0, 30.0));
        assert_eq!(m.geometry(15.0), (15.0, 45.0));
        let (_, worst) = m.geometry(1e-9);
        assert!(worst < 60.0 && worst > 59.99);
    }

    #[test]
    fn brake_quantization() {
        let b = BrakeModel::default();
        assert_eq!(b.tooth_step(), 18.0);
        assert_eq!(brake_engage(&b, 100.0, Direction::Flexion), 108.0);
        assert_eq!(brake_engage(&b, 100.0, Direction::Extension), 90.0);
        assert_eq!(brake_engage(&b, 36.0, Direction::Flexion), 36.0);
        assert_eq!(brake_engage(&b, -10.0, Direction::Flexion), 0.0);
    }

    #[test]
    fn brake_round_trip() {
        let mut brake = Brake::new(BrakeModel::default());
        brake.engage(100.0, Direction::Flexion);
        assert_eq!(brake.constrain(130.0), 108.0);
        assert_eq!(brake.constrain(50.0), 50.0);
        brake.release();
        assert_eq!(brake, Brake::new(BrakeModel::default()));
        assert_eq!(brake.constrain(130.0), 130.0);
    }

    #[test]
    fn bevel() {
        let m = BevelMap::<f64>::default();
        assert_eq!(bevel_map(&m, 0.0).angle, 0.0);
        assert!((bevel_map(&m, 13.0).angle - 19.0).abs() < 1e-12);
        let s = bevel_map(&m, 90.0);
        assert_eq!((s.angle, s.saturated), (90.0, true));
        assert!((bevel_map(&m.inverted(), 19.0).angle - 13.0).abs() < 1e-12);
    }

    #[test]
    fn default_overhead() {
        let m = ClutchModel::default();
        assert!((m.latency.overhead_ms - 36.2).abs() < 0.5, "{}", m.latency.overhead_ms);
        assert!((m.expected_latency() - 88.7).abs() < 1e-6);
    }

    #[test]
    fn calibration_rejects_motion_time() {
        let m = ClutchModel::default();
        assert!(m.calibrate_latency(52.5).is_err());
        assert!(BrakeModel::default().calibrate_latency(0.0).is_err());
    }

    #[test]
    fn latency_clamped() {
        let m = ClutchModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..1000 {
            let e = clutch_engage(&m, i as f64 * 0.03, &mut rng);
            assert!((17.0..=152.0).contains(&e.latency_ms));
        }
    }
}
