//! Smooth MPPI over the 2.5D map: noise is injected on action derivatives
//! (steer rate, acceleration) and the actions (steer angle, speed) are their
//! clipped integrals, so sampled and averaged plans stay smooth.

mod scenario;

pub use scenario::{
    bump_band_recipe, lateral_deviation, obstacle_band_recipe, oracle_map, read_scenario_config,
    read_trajectory_csv, rows_to_csv, trajectory_rows, write_trajectory_csv, Scenario,
    ScenarioKind, ScenarioRun, TrajectoryRow, SCENARIO_KEYS, TRAJECTORY_HEADER,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gridmap::{GridMap2p5, TravClass};
use crate::terrain_sim::{plane_roll_pitch, VehicleSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Forward speed (m/s).
    pub v: f64,
    /// Front steering angle (rad).
    pub steer: f64,
}

impl VehicleState {
    pub fn at_rest(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw,
            v: 0.0,
            steer: 0.0,
        }
    }

    pub fn dist2(&self, p: [f64; 2]) -> f64 {
        (self.x - p[0]).powi(2) + (self.y - p[1]).powi(2)
    }
}

/// Per-step `[steer_rate (rad/s), accel (m/s²)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    pub rates: Vec<[f64; 2]>,
    pub dt: f64,
}

impl ControlSequence {
    pub fn zeros(horizon: usize, dt: f64) -> Self {
        Self {
            rates: vec![[0.0; 2]; horizon],
            dt,
        }
    }

    pub fn horizon(&self) -> usize {
        self.rates.len()
    }

    /// Drops the first step and repeats zero at the end.
    pub fn shifted(&self) -> Self {
        let mut rates: Vec<[f64; 2]> = self.rates.iter().skip(1).copied().collect();
        rates.push([0.0; 2]);
        Self { rates, dt: self.dt }
    }
}

/// Stabilizing-cost variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Σ (|roll|/max_roll + |pitch|/max_pitch).
    RollPitch,
    /// Σ over steps and wheels of the map value under each wheel.
    SumWheelImpact,
    /// Σ over steps of the mean map value under the wheels.
    RegressionValue,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::RollPitch => "roll_pitch",
            Policy::SumWheelImpact => "sum_wheel_impact",
            Policy::RegressionValue => "regression_value",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Policy::RollPitch,
            Policy::SumWheelImpact,
            Policy::RegressionValue,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Penalty per step with any wheel on a non-traversable or unknown cell.
    pub penalty: f64,
    pub policy: Policy,
    /// Weight of the `d²` goal attraction, summed over the horizon.
    pub goal_weight: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            alpha1: 0.5,
            alpha2: 0.5,
            penalty: 1e6,
            policy: Policy::RollPitch,
            goal_weight: 0.01,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) {
            return Err(Error::InvalidConfig(
                "alpha weights must be non-negative".into(),
            ));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::InvalidConfig("penalty must be positive".into()));
        }
        if !(self.goal_weight >= 0.0) {
            return Err(Error::InvalidConfig(
                "goal weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Smooth variant: noise on steer rate and acceleration.
    Derivative,
    /// Plain MPPI: noise on steer angle and speed directly.
    Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MppiConfig {
    pub samples: usize,
    pub horizon: usize,
    pub dt: f64,
    pub lambda: f64,
    /// Std of `[steer_rate, accel]` noise.
    pub noise_std: [f64; 2],
    /// Std of `[steer, speed]` noise in [`NoiseMode::Action`].
    pub action_noise_std: [f64; 2],
    pub max_steer_rate: f64,
    pub max_accel: f64,
    pub seed: u64,
    pub noise_mode: NoiseMode,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            samples: 512,
            horizon: 30,
            dt: 0.1,
            lambda: 0.5,
            noise_std: [0.6, 1.5],
            action_noise_std: [0.15, 0.8],
            max_steer_rate: 1.0,
            max_accel: 3.0,
            seed: 0,
            noise_mode: NoiseMode::Derivative,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidConfig("need at least 2 samples".into()));
        }
        if self.horizon == 0 || !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(
                "horizon and dt must be positive".into(),
            ));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        Ok(())
    }
}

/// Map content under one wheel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub cell: Option<(usize, usize)>,
    /// `None` for unknown cells and cells off the map.
    pub class: Option<TravClass>,
    pub value: Option<f64>,
}

impl Contact {
    /// Unknown or off-map contacts count as non-traversable.
    pub fn blocked(&self) -> bool {
        self.class != Some(TravClass::Traversable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `horizon + 1` states, the first being the start.
    pub states: Vec<VehicleState>,
    /// Per step after the start, per wheel.
    pub contacts: Vec<Vec<Contact>>,
    pub roll: Vec<f64>,
    pub pitch: Vec<f64>,
}

fn bicycle(s: [f64; 3], v: f64, curv: f64) -> [f64; 3] {
    [v * s[2].cos(), v * s[2].sin(), v * curv]
}

/// One RK4 step of the kinematic bicycle with steer and speed held.
pub fn integrate(
    state: &VehicleState,
    steer: f64,
    v: f64,
    wheelbase: f64,
    dt: f64,
) -> VehicleState {
    let curv = steer.tan() / wheelbase;
    let s = [state.x, state.y, state.yaw];
    let add =
        |a: [f64; 3], k: [f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
    let k1 = bicycle(s, v, curv);
    let k2 = bicycle(add(s, k1, dt / 2.0), v, curv);
    let k3 = bicycle(add(s, k2, dt / 2.0), v, curv);
    let k4 = bicycle(add(s, k3, dt), v, curv);
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    VehicleState {
        x: out[0],
        y: out[1],
        yaw: out[2],
        v,
        steer,
    }
}

/// Map contacts and roll/pitch of the body at `state`.
pub fn footprint(
    state: &VehicleState,
    vehicle: &VehicleSpec,
    map: &GridMap2p5,
) -> (Vec<Contact>, f64, f64) {
    let mut contacts = Vec::with_capacity(vehicle.wheel_count());
    let mut elev = Vec::with_capacity(vehicle.wheel_count());
    for p in vehicle.wheel_positions(state.x, state.y, state.yaw) {
        match map.cell_of(p[0], p[1]) {
            Some((c, r)) => {
                let cell = map.cell(c, r);
                contacts.push(Contact {
                    cell: Some((c, r)),
                    class: cell.class,
                    value: cell.trav_value,
                });
                elev.push(cell.known().then_some(cell.elevation));
            }
            None => {
                contacts.push(Contact {
                    cell: None,
                    class: None,
                    value: None,
                });
                elev.push(None);
            }
        }
    }
    let known: Vec<f64> = elev.iter().flatten().copied().collect();
    let fill = if known.is_empty() {
        0.0
    } else {
        known.iter().sum::<f64>() / known.len() as f64
    };
    let z: Vec<f64> = elev.iter().map(|e| e.unwrap_or(fill)).collect();
    let (roll, pitch) = plane_roll_pitch(&vehicle.wheel_offsets, &z);
    (contacts, roll, pitch)
}

/// Integrates the control derivatives into clipped actions and drives the
/// bicycle model, sampling the map under every wheel.
pub fn rollout(
    start: &VehicleState,
    controls: &ControlSequence,
    vehicle: &VehicleSpec,
    map: &GridMap2p5,
) -> Result<Trajectory> {
    if !map.contains(start.x, start.y) {
        return Err(Error::InvalidStart);
    }
    let h = controls.horizon();
    let dt = controls.dt;
    let l = vehicle.wheelbase();
    let mut traj = Trajectory {
        states: Vec::with_capacity(h + 1),
        contacts: Vec::with_capacity(h),
        roll: Vec::with_capacity(h),
        pitch: Vec::with_capacity(h),
    };
    traj.states.push(*start);
    let mut s = *start;
    for r in &controls.rates {
        let steer = (s.steer + r[0] * dt).clamp(-vehicle.max_steer, vehicle.max_steer);
        let v = (s.v + r[1] * dt).clamp(0.0, vehicle.speed);
        s = integrate(&s, steer, v, l, dt);
        let (c, roll, pitch) = footprint(&s, vehicle, map);
        traj.states.push(s);
        traj.contacts.push(c);
        traj.roll.push(roll);
        traj.pitch.push(pitch);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    /// `M ×` number of steps with a blocked wheel.
    pub uncertainty: f64,
    pub stabilizing: f64,
    pub goal: f64,
    /// `α₁·U + α₂·S`.
    pub weighted: f64,
    /// `weighted + goal`.
    pub total: f64,
}

/// Two-term trajectory cost plus the goal attraction (zero without a goal).
pub fn cost(
    traj: &Trajectory,
    vehicle: &VehicleSpec,
    params: &CostParams,
    goal: Option<[f64; 2]>,
) -> CostBreakdown {
    let mut blocked_steps = 0usize;
    let mut stab = 0.0;
    for (t, c) in traj.contacts.iter().enumerate() {
        if c.iter().any(Contact::blocked) {
            blocked_steps += 1;
        }
        stab += match params.policy {
            Policy::RollPitch => {
                traj.roll[t].abs() / vehicle.max_roll + traj.pitch[t].abs() / vehicle.max_pitch
            }
            Policy::SumWheelImpact => c.iter().map(|w| w.value.unwrap_or(0.0)).sum(),
            Policy::RegressionValue => {
                c.iter().map(|w| w.value.unwrap_or(0.0)).sum::<f64>() / c.len().max(1) as f64
            }
        };
    }
    let uncertainty = params.penalty * blocked_steps as f64;
    let weighted = params.alpha1 * uncertainty + params.alpha2 * stab;
    let goal = match goal {
        Some(g) => params.goal_weight * traj.states[1..].iter().map(|s| s.dist2(g)).sum::<f64>(),
        None => 0.0,
    };
    CostBreakdown {
        uncertainty,
        stabilizing: stab,
        goal,
        weighted,
        total: weighted + goal,
    }
}

/// `exp(−(c − c_min)/λ)`, normalized. Non-finite costs get weight 0.
pub fn softmin_weights(costs: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let cmin = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !cmin.is_finite() {
        return Err(Error::NoFeasibleSample);
    }
    let mut w: Vec<f64> = costs
        .iter()
        .map(|&c| {
            if c.is_finite() {
                (-(c - cmin) / lambda).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    Ok(w)
}

/// Weighted average of control sequences, accumulated in sample order.
pub fn weighted_average(samples: &[ControlSequence], weights: &[f64]) -> ControlSequence {
    let h = samples[0].horizon();
    let mut rates = vec![[0.0; 2]; h];
    for (s, &w) in samples.iter().zip(weights) {
        for (acc, r) in rates.iter_mut().zip(&s.rates) {
            acc[0] += w * r[0];
            acc[1] += w * r[1];
        }
    }
    ControlSequence {
        rates,
        dt: samples[0].dt,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub controls: ControlSequence,
    pub trajectory: Trajectory,
    pub breakdown: CostBreakdown,
    pub samples: Vec<ControlSequence>,
    pub costs: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Samples `[steer, v]` action paths of a rate sequence from `start`.
fn actions_of(start: &VehicleState, c: &ControlSequence, vehicle: &VehicleSpec) -> Vec<[f64; 2]> {
    let (mut steer, mut v) = (start.steer, start.v);
    c.rates
        .iter()
        .map(|r| {
            steer = (steer + r[0] * c.dt).clamp(-vehicle.max_steer, vehicle.max_steer);
            v = (v + r[1] * c.dt).clamp(0.0, vehicle.speed);
            [steer, v]
        })
        .collect()
}

/// One SMPPI iteration. Sample 0 is the unperturbed nominal.
pub fn smppi_step(
    state: &VehicleState,
    nominal: &ControlSequence,
    map: &GridMap2p5,
    vehicle: &VehicleSpec,
    params: &CostParams,
    cfg: &MppiConfig,
    goal: Option<[f64; 2]>,
) -> Result<StepResult> {
    cfg.validate()?;
    params.validate()?;
    if !map.contains(state.x, state.y) {
        return Err(Error::InvalidStart);
    }
    let h = nominal.horizon();
    let dt = nominal.dt;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_rate = [
        Normal::new(0.0, cfg.noise_std[0]),
        Normal::new(0.0, cfg.noise_std[1]),
    ];
    let n_act = [
        Normal::new(0.0, cfg.action_noise_std[0]),
        Normal::new(0.0, cfg.action_noise_std[1]),
    ];
    let (n_rate, n_act) = match (n_rate, n_act) {
        ([Ok(a), Ok(b)], [Ok(c), Ok(d)]) => ([a, b], [c, d]),
        _ => {
            return Err(Error::InvalidConfig(
                "noise std must be finite and non-negative".into(),
            ))
        }
    };
    let base_actions = actions_of(state, nominal, vehicle);

    let mut samples = Vec::with_capacity(cfg.samples);
    let mut costs = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let mut seq = nominal.clone();
        if i > 0 {
            match cfg.noise_mode {
                NoiseMode::Derivative => {
                    for r in &mut seq.rates {
                        r[0] = (r[0] + n_rate[0].sample(&mut rng))
                            .clamp(-cfg.max_steer_rate, cfg.max_steer_rate);
                        r[1] = (r[1] + n_rate[1].sample(&mut rng))
                            .clamp(-cfg.max_accel, cfg.max_accel);
                    }
                }
                NoiseMode::Action => {
                    let (mut ps, mut pv) = (state.steer, state.v);
                    for (t, r) in seq.rates.iter_mut().enumerate() {
                        let s = (base_actions[t][0] + n_act[0].sample(&mut rng))
                            .clamp(-vehicle.max_steer, vehicle.max_steer);
                        let v = (base_actions[t][1] + n_act[1].sample(&mut rng))
                            .clamp(0.0, vehicle.speed);
                        *r = [(s - ps) / dt, (v - pv) / dt];
                        ps = s;
                        pv = v;
                    }
                }
            }
        }
        let traj = rollout(state, &seq, vehicle, map)?;
        costs.push(cost(&traj, vehicle, params, goal).total);
        samples.push(seq);
    }
    let weights = softmin_weights(&costs, cfg.lambda)?;
    let controls = weighted_average(&samples, &weights);
    debug_assert_eq!(controls.horizon(), h);
    let trajectory = rollout(state, &controls, vehicle, map)?;
    let breakdown = cost(&trajectory, vehicle, params, goal);
    Ok(StepResult {
        controls,
        trajectory,
        breakdown,
        samples,
        costs,
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavOutcome {
    Reached,
    Timeout,
    LeftMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub state: VehicleState,
    pub rates: [f64; 2],
    pub breakdown: CostBreakdown,
    /// Wheel contacts at the executed state.
    pub contacts: Vec<Contact>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavResult {
    /// Executed states, the start first.
    pub states: Vec<VehicleState>,
    pub logs: Vec<StepLog>,
    pub outcome: NavOutcome,
}

impl NavResult {
    pub fn path_xy(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(|s| [s.x, s.y]).collect()
    }

    /// Executed steps with a wheel on a non-traversable map cell.
    pub fn blocked_contacts(&self) -> usize {
        self.logs
            .iter()
            .filter(|l| {
                l.contacts
                    .iter()
                    .any(|c| c.class == Some(TravClass::NonTraversable))
            })
            .count()
    }
}

/// Receding-horizon loop: plan, execute the first action on the model,
/// shift the plan, repeat until within `goal_radius` or `max_steps`.
#[allow(clippy::too_many_arguments)]
pub fn navigate(
    map: &GridMap2p5,
    start: VehicleState,
    goal: [f64; 2],
    vehicle: &VehicleSpec,
    params: &CostParams,
    cfg: &MppiConfig,
    max_steps: usize,
    goal_radius: f64,
) -> Result<NavResult> {
    vehicle.validate()?;
    if !map.contains(start.x, start.y) || !map.contains(goal[0], goal[1]) {
        return Err(Error::InvalidStart);
    }
    let mut state = start;
    let mut states = vec![state];
    let mut logs = Vec::new();
    let mut nominal = ControlSequence::zeros(cfg.horizon, cfg.dt);
    let r2 = goal_radius * goal_radius;
    let mut step_cfg = cfg.clone();
    for step in 0..max_steps {
        if state.dist2(goal) <= r2 {
            return Ok(NavResult {
                states,
                logs,
                outcome: NavOutcome::Reached,
            });
        }
        step_cfg.seed = cfg
            .seed
            .wrapping_add((step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let res = smppi_step(
            &state,
            &nominal,
            map,
            vehicle,
            params,
            &step_cfg,
            Some(goal),
        )?;
        let first = ControlSequence {
            rates: vec![res.controls.rates[0]],
            dt: cfg.dt,
        };
        let one = rollout(&state, &first, vehicle, map)?;
        state = one.states[1];
        states.push(state);
        logs.push(StepLog {
            step,
            state,
            rates: res.controls.rates[0],
            breakdown: res.breakdown,
            contacts: one.contacts[0].clone(),
        });
        if !map.contains(state.x, state.y) {
            return Ok(NavResult {
                states,
                logs,
                outcome: NavOutcome::LeftMap,
            });
        }
        nominal = res.controls.shifted();
    }
    let outcome = if state.dist2(goal) <= r2 {
        NavOutcome::Reached
    } else {
        NavOutcome::Timeout
    };
    Ok(NavResult {
        states,
        logs,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::Cell;
    use rand::Rng;

    fn flat_map(w: usize, h: usize) -> GridMap2p5 {
        let mut m = GridMap2p5::unknown([0.0, 0.0], 0.25, w, h).unwrap();
        for c in &mut m.cells {
            *c = Cell {
                count: 1,
                elevation: 0.0,
                trav_value: Some(0.1),
                class: Some(TravClass::Traversable),
            };
        }
        m
    }

    #[test]
    fn stationary_rollout() {
        let m = flat_map(40, 40);
        let v = VehicleSpec::suv();
        let s = VehicleState::at_rest(5.0, 5.0, 0.3);
        let t = rollout(&s, &ControlSequence::zeros(10, 0.1), &v, &m).unwrap();
        assert!(t.states.iter().all(|x| *x == s));
        assert!(matches!(
            rollout(
                &VehicleState::at_rest(-1.0, 0.0, 0.0),
                &ControlSequence::zeros(3, 0.1),
                &v,
                &m
            ),
            Err(Error::InvalidStart)
        ));
    }

    #[test]
    fn flat_run_is_level() {
        let m = flat_map(80, 40);
        let v = VehicleSpec::compact_car();
        let mut s = VehicleState::at_rest(3.0, 5.0, 0.0);
        s.v = 2.0;
        let t = rollout(&s, &ControlSequence::zeros(20, 0.1), &v, &m).unwrap();
        assert!(t.roll.iter().chain(&t.pitch).all(|a| a.abs() < 1e-9));
        assert!((t.states[20].x - 7.0).abs() < 1e-9);
    }

    #[test]
    fn yaw_matches_closed_form() {
        let m = flat_map(200, 200);
        let v = VehicleSpec::suv();
        let l = v.wheelbase();
        let mut s = VehicleState::at_rest(25.0, 25.0, 0.0);
        s.v = 3.0;
        let rate = 0.05;
        let dt = 0.1;
        let c = ControlSequence {
            rates: vec![[rate, 0.0]; 40],
            dt,
        };
        let t = rollout(&s, &c, &v, &m).unwrap();
        let mut yaw = 0.0;
        for k in 1..=40 {
            let steer = (rate * dt * k as f64).min(v.max_steer);
            yaw += 3.0 * steer.tan() / l * dt;
            assert!((t.states[k].yaw - yaw).abs() < 1e-6);
        }
    }

    #[test]
    fn cost_linear_combination() {
        let m = flat_map(40, 40);
        let v = VehicleSpec::suv();
        let mut t = rollout(
            &VehicleState::at_rest(5.0, 5.0, 0.0),
            &ControlSequence::zeros(2, 0.1),
            &v,
            &m,
        )
        .unwrap();
        t.contacts[0][0].class = Some(TravClass::NonTraversable);
        t.roll = vec![0.0, 0.0];
        t.pitch = vec![0.2 * v.max_pitch, 0.0];
        let p = CostParams {
            alpha1: 0.5,
            alpha2: 0.5,
            penalty: 1.0,
            ..CostParams::default()
        };
        let c = cost(&t, &v, &p, None);
        assert!((c.weighted - 0.6).abs() < 1e-12);
        let c0 = cost(&t, &v, &CostParams { alpha1: 0.0, ..p }, None);
        assert!((c0.weighted - 0.1).abs() < 1e-12);
    }

    #[test]
    fn cost_matches_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = flat_map(60, 60);
        for c in &mut m.cells {
            c.elevation = rng.gen_range(0.0..0.3);
            c.trav_value = Some(rng.gen());
            if rng.gen_bool(0.05) {
                c.class = Some(TravClass::NonTraversable);
                c.trav_value = None;
            }
        }
        let v = VehicleSpec::six_by_six();
        let mut s = VehicleState::at_rest(7.0, 7.0, 0.4);
        s.v = 2.0;
        let c = ControlSequence {
            rates: (0..25)
                .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0)])
                .collect(),
            dt: 0.1,
        };
        let t = rollout(&s, &c, &v, &m).unwrap();
        for policy in [
            Policy::RollPitch,
            Policy::SumWheelImpact,
            Policy::RegressionValue,
        ] {
            let p = CostParams {
                policy,
                alpha1: 0.3,
                alpha2: 0.7,
                penalty: 100.0,
                goal_weight: 0.01,
            };
            let goal = [12.0, 3.0];
            let got = cost(&t, &v, &p, Some(goal));
            let mut u = 0.0;
            let mut st = 0.0;
            let mut g = 0.0;
            for k in 0..25 {
                let state = t.states[k + 1];
                let mut blocked = false;
                let mut vals = Vec::new();
                let mut z = Vec::new();
                for w in v.wheel_positions(state.x, state.y, state.yaw) {
                    let cell = m.at(w[0], w[1]).unwrap();
                    blocked |= cell.class != Some(TravClass::Traversable);
                    vals.push(cell.trav_value.unwrap_or(0.0));
                    z.push(cell.elevation);
                }
                if blocked {
                    u += 100.0;
                }
                let (roll, pitch) = plane_roll_pitch(&v.wheel_offsets, &z);
                st += match policy {
                    Policy::RollPitch => roll.abs() / v.max_roll + pitch.abs() / v.max_pitch,
                    Policy::SumWheelImpact => vals.iter().sum(),
                    Policy::RegressionValue => vals.iter().sum::<f64>() / vals.len() as f64,
                };
                g += 0.01 * ((state.x - goal[0]).powi(2) + (state.y - goal[1]).powi(2));
            }
            let total = 0.3 * u + 0.7 * st + g;
            assert!((got.total - total).abs() <= 1e-12 * total.abs().max(1.0));
        }
    }

    #[test]
    fn softmin_properties() {
        let c = [3.0, 1.0, 7.5, 1.2];
        let w = softmin_weights(&c, 0.5).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = c.iter().map(|x| x + 1234.5).collect();
        let w2 = softmin_weights(&shifted, 0.5).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            softmin_weights(&[f64::INFINITY; 3], 1.0),
            Err(Error::NoFeasibleSample)
        ));
    }

    #[test]
    fn dominant_sample_limit_and_uniform_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<ControlSequence> = (0..8)
            .map(|_| ControlSequence {
                rates: (0..5)
                    .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                    .collect(),
                dt: 0.1,
            })
            .collect();
        let mut costs = vec![1e6 * 5.0; 8];
        costs[3] = 0.0;
        let w = softmin_weights(&costs, 1e-3).unwrap();
        let avg = weighted_average(&samples, &w);
        for (a, b) in avg.rates.iter().zip(&samples[3].rates) {
            assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
        }
        let w = softmin_weights(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 1e300).unwrap();
        let avg = weighted_average(&samples, &w);
        for t in 0..5 {
            let mean: f64 = samples.iter().map(|s| s.rates[t][0]).sum::<f64>() / 8.0;
            assert!((avg.rates[t][0] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn step_is_deterministic_and_normalized() {
        let m = flat_map(80, 60);
        let v = VehicleSpec::suv();
        let cfg = MppiConfig {
            samples: 64,
            horizon: 15,
            seed: 9,
            ..MppiConfig::default()
        };
        let s = VehicleState::at_rest(3.0, 7.0, 0.0);
        let a = smppi_step(
            &s,
            &ControlSequence::zeros(15, 0.1),
            &m,
            &v,
            &CostParams::default(),
            &cfg,
            Some([15.0, 7.0]),
        )
        .unwrap();
        let b = smppi_step(
            &s,
            &ControlSequence::zeros(15, 0.1),
            &m,
            &v,
            &CostParams::default(),
            &cfg,
            Some([15.0, 7.0]),
        )
        .unwrap();
        assert_eq!(a, b);
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // constant offset on every cost leaves the plan unchanged
        let shifted: Vec<f64> = a.costs.iter().map(|c| c + 1e3).collect();
        let w = softmin_weights(&shifted, cfg.lambda).unwrap();
        let c2 = weighted_average(&a.samples, &w);
        for (x, y) in c2.rates.iter().zip(&a.controls.rates) {
            assert!((x[0] - y[0]).abs() < 1e-9 && (x[1] - y[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn goal_at_start_terminates_immediately() {
        let m = flat_map(40, 40);
        let s = VehicleState::at_rest(5.0, 5.0, 0.0);
        let r = navigate(
            &m,
            s,
            [5.0, 5.0],
            &VehicleSpec::suv(),
            &CostParams::default(),
            &MppiConfig::default(),
            50,
            0.5,
        )
        .unwrap();
        assert_eq!(r.outcome, NavOutcome::Reached);
        assert_eq!(r.states.len(), 1);
        assert!(r.logs.is_empty());
    }

    #[test]
    fn flat_map_reaches_goal() {
        let m = flat_map(100, 60);
        let s = VehicleState::at_rest(3.0, 7.0, 0.0);
        let cfg = MppiConfig {
            samples: 128,
            seed: 2,
            ..MppiConfig::default()
        };
        let r = navigate(
            &m,
            s,
            [20.0, 9.0],
            &VehicleSpec::suv(),
            &CostParams::default(),
            &cfg,
            200,
            1.0,
        )
        .unwrap();
        assert_eq!(r.outcome, NavOutcome::Reached);
    }
}
