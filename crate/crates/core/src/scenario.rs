//! Target dynamics, the range/pitch/azimuth sensor model, noise sampling and
//! ground-truth generation for the simulated tracking experiment.
//!
//! The target follows a 3D coordinated-turn model: the horizontal
//! position/velocity block rotates at the (constant, unknown) turn rate
//! `omega`, the vertical channel is constant-velocity.

use nalgebra::SMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    psd_sqrt, symmetrize, wrap_angle, wrapped_residual, MeasCov, MeasJacobian, MeasVec, StateCov, StateVec,
};

/// Below this `|omega * dt|` the turn model switches to its constant-velocity limit.
pub const SMALL_TURN_CUTOFF: f64 = 1e-8;

/// Index of each state component.
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const VX: usize = 3;
    pub const VY: usize = 4;
    pub const VZ: usize = 5;
    pub const OMEGA: usize = 6;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("target coincides with sensor at ({0}, {1}, {2}): range is zero")]
    CoincidentTarget(f64, f64, f64),
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
}

/// A single range / pitch / azimuth observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Range (m).
    pub r: f64,
    /// Pitch (elevation) angle (rad).
    pub phi: f64,
    /// Azimuth angle (rad).
    pub rho: f64,
}

impl Measurement {
    pub fn new(r: f64, phi: f64, rho: f64) -> Self {
        Self { r, phi, rho }
    }

    pub fn to_vector(&self) -> MeasVec {
        MeasVec::new(self.r, self.phi, self.rho)
    }

    pub fn from_vector(v: &MeasVec) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Sensor position in the world frame (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPose {
    pub xs: f64,
    pub ys: f64,
    pub zs: f64,
}

impl SensorPose {
    pub fn new(xs: f64, ys: f64, zs: f64) -> Self {
        Self { xs, ys, zs }
    }
}

/// Process and per-sensor measurement noise covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub q: StateCov,
    pub r_per_sensor: Vec<MeasCov>,
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// State transition `x_k = f(x_{k-1})`.
pub trait Dynamics {
    fn propagate(&self, x: &StateVec) -> StateVec;
    /// Jacobian of `propagate` at `x`.
    fn jacobian(&self, x: &StateVec) -> StateCov;
}

/// Observation `z = h(x)`.
pub trait MeasurementModel {
    fn predict(&self, x: &StateVec) -> Result<MeasVec, ScenarioError>;
    fn jacobian(&self, x: &StateVec) -> Result<MeasJacobian, ScenarioError>;
    /// Channels whose values are angles.
    fn angular_channels(&self) -> [bool; 3] {
        [false; 3]
    }
    /// Canonical difference `a - b` (angular channels wrapped).
    fn residual(&self, a: &MeasVec, b: &MeasVec) -> MeasVec {
        wrapped_residual(a, b, self.angular_channels())
    }
}

/// 3D coordinated-turn dynamics with step `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatedTurn {
    pub dt: f64,
}

impl CoordinatedTurn {
    pub fn new(dt: f64) -> Self {
        Self { dt }
    }

    /// `(sin(wT)/w, (1-cos(wT))/w, cos(wT), sin(wT))` with the small-angle limit.
    fn turn_terms(&self, omega: f64) -> (f64, f64, f64, f64) {
        let t = self.dt;
        let wt = omega * t;
        if wt.abs() < SMALL_TURN_CUTOFF {
            (
                t * (1.0 - wt * wt / 6.0),
                0.5 * wt * t,
                1.0 - 0.5 * wt * wt,
                wt,
            )
        } else {
            let (s, c) = wt.sin_cos();
            // 2 sin^2(wT/2) avoids the cancellation in 1 - cos(wT)
            let half = (0.5 * wt).sin();
            (s / omega, 2.0 * half * half / omega, c, s)
        }
    }
}

impl Dynamics for CoordinatedTurn {
    fn propagate(&self, x: &StateVec) -> StateVec {
        use idx::*;
        let (s_w, c_w, c, s) = self.turn_terms(x[OMEGA]);
        let (vx, vy) = (x[VX], x[VY]);
        let mut out = *x;
        out[X] = x[X] + s_w * vx - c_w * vy;
        out[Y] = x[Y] + c_w * vx + s_w * vy;
        out[Z] = x[Z] + self.dt * x[VZ];
        out[VX] = c * vx - s * vy;
        out[VY] = s * vx + c * vy;
        out
    }

    fn jacobian(&self, x: &StateVec) -> StateCov {
        use idx::*;
        let t = self.dt;
        let w = x[OMEGA];
        let (vx, vy) = (x[VX], x[VY]);
        let (s_w, c_w, c, s) = self.turn_terms(w);
        // d(sin(wT)/w)/dw and d((1-cos(wT))/w)/dw; the closed forms cancel
        // badly for small wT, so a series is used there
        let u = w * t;
        let (ds_w, dc_w) = if u.abs() < 1e-2 {
            let u2 = u * u;
            (
                t * t * u * (-1.0 / 3.0 + u2 / 30.0 - u2 * u2 / 840.0),
                t * t * (0.5 - u2 / 8.0 + u2 * u2 / 144.0 - u2 * u2 * u2 / 5760.0),
            )
        } else {
            (
                (t * c * w - s) / (w * w),
                (t * s * w - c_w * w) / (w * w),
            )
        };
        let mut f = StateCov::identity();
        f[(X, VX)] = s_w;
        f[(X, VY)] = -c_w;
        f[(Y, VX)] = c_w;
        f[(Y, VY)] = s_w;
        f[(Z, VZ)] = t;
        f[(VX, VX)] = c;
        f[(VX, VY)] = -s;
        f[(VY, VX)] = s;
        f[(VY, VY)] = c;
        f[(X, OMEGA)] = vx * ds_w - vy * dc_w;
        f[(Y, OMEGA)] = vx * dc_w + vy * ds_w;
        f[(VX, OMEGA)] = -t * s * vx - t * c * vy;
        f[(VY, OMEGA)] = t * c * vx - t * s * vy;
        f
    }
}

/// Linear transition `x' = F x`; used as an exact-Kalman oracle surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDynamics {
    pub f: StateCov,
}

impl LinearDynamics {
    /// Constant-velocity transition (the `omega = 0` branch of the turn model).
    pub fn constant_velocity(dt: f64) -> Self {
        let mut f = StateCov::identity();
        f[(idx::X, idx::VX)] = dt;
        f[(idx::Y, idx::VY)] = dt;
        f[(idx::Z, idx::VZ)] = dt;
        Self { f }
    }
}

impl Dynamics for LinearDynamics {
    fn propagate(&self, x: &StateVec) -> StateVec {
        self.f * x
    }
    fn jacobian(&self, _x: &StateVec) -> StateCov {
        self.f
    }
}

/// Range / pitch / azimuth sensor at a fixed pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBearingSensor {
    pub pose: SensorPose,
}

impl RangeBearingSensor {
    pub fn new(pose: SensorPose) -> Self {
        Self { pose }
    }

    fn offsets(&self, x: &StateVec) -> (f64, f64, f64) {
        (
            x[idx::X] - self.pose.xs,
            x[idx::Y] - self.pose.ys,
            x[idx::Z] - self.pose.zs,
        )
    }
}

impl MeasurementModel for RangeBearingSensor {
    fn predict(&self, x: &StateVec) -> Result<MeasVec, ScenarioError> {
        let (dx, dy, dz) = self.offsets(x);
        let horiz = dx.hypot(dy);
        let r = horiz.hypot(dz);
        if r == 0.0 {
            return Err(ScenarioError::CoincidentTarget(
                self.pose.xs,
                self.pose.ys,
                self.pose.zs,
            ));
        }
        let (phi, rho) = if horiz == 0.0 {
            (std::f64::consts::FRAC_PI_2.copysign(dz), 0.0)
        } else {
            ((dz / horiz).atan(), wrap_angle(dy.atan2(dx)))
        };
        Ok(MeasVec::new(r, phi, rho))
    }

    fn jacobian(&self, x: &StateVec) -> Result<MeasJacobian, ScenarioError> {
        let (dx, dy, dz) = self.offsets(x);
        let h2 = dx * dx + dy * dy;
        let r2 = h2 + dz * dz;
        if h2 == 0.0 {
            return Err(ScenarioError::CoincidentTarget(
                self.pose.xs,
                self.pose.ys,
                self.pose.zs,
            ));
        }
        let r = r2.sqrt();
        let h = h2.sqrt();
        let mut g = MeasJacobian::zeros();
        g[(0, idx::X)] = dx / r;
        g[(0, idx::Y)] = dy / r;
        g[(0, idx::Z)] = dz / r;
        g[(1, idx::X)] = -dz * dx / (r2 * h);
        g[(1, idx::Y)] = -dz * dy / (r2 * h);
        g[(1, idx::Z)] = h / r2;
        g[(2, idx::X)] = -dy / h2;
        g[(2, idx::Y)] = dx / h2;
        Ok(g)
    }

    fn angular_channels(&self) -> [bool; 3] {
        [false, true, true]
    }
}

/// Linear observation `z = H x`; oracle surrogate for the nonlinear sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMeasurement {
    pub h: MeasJacobian,
}

impl MeasurementModel for LinearMeasurement {
    fn predict(&self, x: &StateVec) -> Result<MeasVec, ScenarioError> {
        Ok(self.h * x)
    }
    fn jacobian(&self, _x: &StateVec) -> Result<MeasJacobian, ScenarioError> {
        Ok(self.h)
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Independent RNG substreams of one Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    InitialState,
    Process,
    Sensor(usize),
    Compensation(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::InitialState => 1,
            Stream::Process => 2,
            Stream::Sensor(i) => 1_000 + i as u64,
            Stream::Compensation(i) => 1_000_000 + i as u64,
        }
    }
}

/// ChaCha8 generator for `(seed, stream)`; streams never overlap, so results
/// do not depend on the order in which runs or nodes draw.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Draw `sqrt_cov * xi`, `xi ~ N(0, I)`.
pub fn sample_gaussian<const N: usize, R: Rng + ?Sized>(
    rng: &mut R,
    sqrt_cov: &SMatrix<f64, N, N>,
) -> nalgebra::SVector<f64, N> {
    let xi = nalgebra::SVector::<f64, N>::from_fn(|_, _| rng.sample(StandardNormal));
    sqrt_cov * xi
}

/// One step of the turn model, plus `w ~ N(0, Q)` when `rng` is given.
pub fn propagate_state<R: Rng + ?Sized>(
    x: &StateVec,
    dt: f64,
    rng: Option<&mut R>,
    q: &StateCov,
) -> StateVec {
    let next = CoordinatedTurn::new(dt).propagate(x);
    match rng {
        Some(rng) => next + sample_gaussian(rng, &psd_sqrt(q)),
        None => next,
    }
}

/// Observe `x` from `pose`, plus `v ~ N(0, R)` when `rng` is given.
pub fn observe<R: Rng + ?Sized>(
    x: &StateVec,
    pose: &SensorPose,
    rng: Option<&mut R>,
    r: &MeasCov,
) -> Result<Measurement, ScenarioError> {
    let clean = RangeBearingSensor::new(*pose).predict(x)?;
    let z = match rng {
        Some(rng) => {
            let noisy = clean + sample_gaussian(rng, &psd_sqrt(r));
            MeasVec::new(noisy[0], noisy[1], wrap_angle(noisy[2]))
        }
        None => clean,
    };
    Ok(Measurement::from_vector(&z))
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub dt: f64,
    /// Horizon `T` in steps.
    pub horizon: usize,
    pub initial_state: StateVec,
    pub initial_cov: StateCov,
    pub sensors: Vec<SensorPose>,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.sensors.is_empty() {
            return bad("at least one sensor is required");
        }
        if self.noise.r_per_sensor.len() != self.sensors.len() {
            return bad("one R matrix is required per sensor");
        }
        if self.initial_state.iter().any(|v| !v.is_finite()) {
            return bad("initial state must be finite");
        }
        if self
            .sensors
            .iter()
            .any(|s| !(s.xs.is_finite() && s.ys.is_finite() && s.zs.is_finite()))
        {
            return bad("sensor positions must be finite");
        }
        check_psd(&self.noise.q, "Q", false)?;
        check_psd(&self.initial_cov, "initial_cov", false)?;
        for r in &self.noise.r_per_sensor {
            // R = 0 is accepted for noiseless data generation; filters reject it.
            check_psd(r, "R", false)?;
        }
        Ok(())
    }

    /// Default tracking scenario: four sensors on the corners of a 20 m
    /// square and a target on an ascending circle of radius 5 m inside it.
    pub fn default_tracking() -> Self {
        let sensors = vec![
            SensorPose::new(0.0, 0.0, 0.0),
            SensorPose::new(20.0, 0.0, 0.0),
            SensorPose::new(20.0, 20.0, 0.0),
            SensorPose::new(0.0, 20.0, 0.0),
        ];
        let r = MeasCov::from_diagonal(&MeasVec::new(0.1 * 0.1, 0.02 * 0.02, 0.02 * 0.02));
        Self {
            dt: 0.1,
            horizon: 200,
            initial_state: default_initial_state(),
            initial_cov: StateCov::from_diagonal(&StateVec::from_column_slice(&[
                4.0, 4.0, 4.0, 1.0, 1.0, 1.0, 0.04,
            ])),
            noise: NoiseSpec {
                q: StateCov::from_diagonal(&StateVec::from_column_slice(&[
                    1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-8,
                ])),
                r_per_sensor: vec![r; sensors.len()],
            },
            sensors,
            seed: 42,
        }
    }
}

fn default_initial_state() -> StateVec {
    // Circle of radius 5 m centred on (10, 10), 2 m/s tangential speed,
    // climbing at 0.2 m/s.
    StateVec::from_column_slice(&[15.0, 10.0, 3.0, 0.0, 2.0, 0.2, 0.4])
}

fn check_psd<const N: usize>(
    m: &SMatrix<f64, N, N>,
    name: &str,
    strict: bool,
) -> Result<(), ScenarioError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ScenarioError::InvalidConfig(format!("{name} has non-finite entries")));
    }
    if crate::linalg::asymmetry(m) > 1e-12 {
        return Err(ScenarioError::InvalidConfig(format!("{name} is not symmetric")));
    }
    let min = crate::linalg::min_eigenvalue(&symmetrize(m));
    let scale = m.abs().max().max(1.0);
    if (strict && min <= 0.0) || min < -1e-12 * scale {
        return Err(ScenarioError::InvalidConfig(format!(
            "{name} is not positive {}definite (min eigenvalue {min:e})",
            if strict { "" } else { "semi-" }
        )));
    }
    Ok(())
}

/// Truth trajectory plus per-sensor noisy measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `T + 1` states, `states[0]` is the initial state.
    pub states: Vec<StateVec>,
    /// `measurements[i][k - 1]` is sensor `i`'s observation of `states[k]`.
    pub measurements: Vec<Vec<Measurement>>,
}

/// Simulate `T` steps. The initial truth is drawn from
/// `N(initial_state, initial_cov)`; every random draw comes from a stream
/// keyed on `cfg.seed`, so identical seeds give bit-identical output.
pub fn generate_truth(cfg: &ScenarioConfig) -> Result<GroundTruth, ScenarioError> {
    cfg.validate()?;
    let mut init_rng = stream_rng(cfg.seed, Stream::InitialState);
    let mut proc_rng = stream_rng(cfg.seed, Stream::Process);
    let mut sensor_rngs: Vec<_> = (0..cfg.sensors.len())
        .map(|i| stream_rng(cfg.seed, Stream::Sensor(i)))
        .collect();

    let model = CoordinatedTurn::new(cfg.dt);
    let q_sqrt = psd_sqrt(&cfg.noise.q);
    let r_sqrt: Vec<MeasCov> = cfg.noise.r_per_sensor.iter().map(psd_sqrt).collect();

    let x0 = cfg.initial_state + sample_gaussian(&mut init_rng, &psd_sqrt(&cfg.initial_cov));
    let mut states = Vec::with_capacity(cfg.horizon + 1);
    states.push(x0);
    let mut measurements = vec![Vec::with_capacity(cfg.horizon); cfg.sensors.len()];
    for _ in 0..cfg.horizon {
        let prev = states.last().expect("nonempty");
        let x = model.propagate(prev) + sample_gaussian(&mut proc_rng, &q_sqrt);
        for (i, pose) in cfg.sensors.iter().enumerate() {
            let clean = RangeBearingSensor::new(*pose).predict(&x)?;
            let noisy = clean + sample_gaussian(&mut sensor_rngs[i], &r_sqrt[i]);
            measurements[i].push(Measurement::new(noisy[0], noisy[1], wrap_angle(noisy[2])));
        }
        states.push(x);
    }
    Ok(GroundTruth {
        states,
        measurements,
    })
}

/// Sensors evenly spaced on a circle, used for node-count sweeps.
pub fn sensors_on_circle(n: usize, center: (f64, f64), radius: f64) -> Vec<SensorPose> {
    (0..n)
        .map(|i| {
            let a = std::f64::consts::PI * (0.25 + 2.0 * i as f64 / n as f64);
            SensorPose::new(center.0 + radius * a.cos(), center.1 + radius * a.sin(), 0.0)
        })
        .collect()
}

/// Reconstruct a position from `(r, phi, rho)` seen from `pose`.
pub fn position_from_measurement(z: &Measurement, pose: &SensorPose) -> [f64; 3] {
    let horiz = z.r * z.phi.cos();
    [
        pose.xs + horiz * z.rho.cos(),
        pose.ys + horiz * z.rho.sin(),
        pose.zs + z.r * z.phi.sin(),
    ]
}
