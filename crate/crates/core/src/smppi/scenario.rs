//! Navigation scenarios, the ground-truth oracle map, scenario config files
//! and the per-step trajectory log.

use std::fmt::Write as _;

use super::{navigate, CostParams, MppiConfig, NavResult, NoiseMode, Policy, VehicleState};
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::gridmap::{Cell, GridMap2p5, TravClass};
use crate::terrain_sim::{
    accumulated_impact, generate_world, simulate_traversal, Feature, HeightField, TerrainRecipe,
    VehicleSpec,
};

/// Map a perfect classifier would produce from `world`: one map cell per
/// world cell, obstacles non-traversable, elevation from the ground
/// surface, and value = local slope magnitude clipped to 1.
pub fn oracle_map(world: &HeightField) -> GridMap2p5 {
    let (w, h) = (world.width, world.height);
    let mut map = GridMap2p5 {
        origin: world.origin,
        resolution: world.resolution,
        width: w,
        height: h,
        cells: vec![Cell::UNKNOWN; w * h],
    };
    for r in 0..h {
        for c in 0..w {
            let z = |cc: usize, rr: usize| world.cell_elevation(cc, rr);
            let (c0, c1) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let (r0, r1) = (r.saturating_sub(1), (r + 1).min(h - 1));
            let gx = (z(c1, r) - z(c0, r)) / ((c1 - c0) as f64 * world.resolution);
            let gy = (z(c, r1) - z(c, r0)) / ((r1 - r0) as f64 * world.resolution);
            let slope = (gx * gx + gy * gy).sqrt().min(1.0);
            let obstacle = world.is_obstacle(c, r);
            *map.cell_mut(c, r) = Cell {
                count: 1,
                elevation: z(c, r),
                trav_value: (!obstacle).then_some(slope),
                class: Some(if obstacle {
                    TravClass::NonTraversable
                } else {
                    TravClass::Traversable
                }),
            };
        }
    }
    map
}

const SCENE_W: usize = 120;
const SCENE_H: usize = 80;
const SCENE_RES: f64 = 0.25;

/// Flat 30 m × 20 m field with an obstacle band over x ∈ [14, 16],
/// y ∈ [6, 14], straddling the y = 10 start/goal line.
pub fn obstacle_band_recipe() -> TerrainRecipe {
    let mut r = TerrainRecipe::flat(SCENE_W, SCENE_H, SCENE_RES);
    r.obstacle_height = 1.5;
    r.explicit.push(Feature::ObstacleRect {
        min: [14.0, 6.0],
        max: [16.0, 14.0],
    });
    r
}

/// Flat field crossed around x = 15 by a washboard of seven ridges. Each
/// ridge peaks at 0.8 m at y = 6 and tapers off as a Gaussian in y, so a
/// vehicle on the y = 10 line can trade lateral detour for lower ridges.
pub fn bump_band_recipe() -> TerrainRecipe {
    let mut r = TerrainRecipe::flat(SCENE_W, SCENE_H, SCENE_RES);
    for k in 0..7 {
        r.explicit.push(Feature::Bump {
            center: [15.0 + (k as f64 - 3.0) * 1.2, 6.0],
            amplitude: 0.8,
            sigma: [0.4, 3.0],
            yaw: 0.0,
        });
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    ObstacleBand,
    BumpBand,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ObstacleBand => "obstacle_band",
            ScenarioKind::BumpBand => "bump_band",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "obstacle_band" => Some(ScenarioKind::ObstacleBand),
            "bump_band" => Some(ScenarioKind::BumpBand),
            _ => None,
        }
    }

    pub fn recipe(self) -> TerrainRecipe {
        match self {
            ScenarioKind::ObstacleBand => obstacle_band_recipe(),
            ScenarioKind::BumpBand => bump_band_recipe(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub world_seed: u64,
    pub vehicle: VehicleSpec,
    pub params: CostParams,
    pub mppi: MppiConfig,
    pub start: VehicleState,
    pub goal: [f64; 2],
    pub max_steps: usize,
    pub goal_radius: f64,
}

/// Outcome of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub world: HeightField,
    pub map: GridMap2p5,
    pub nav: NavResult,
}

impl Scenario {
    fn base(kind: ScenarioKind, vehicle: VehicleSpec, params: CostParams) -> Self {
        Self {
            kind,
            world_seed: 1,
            vehicle,
            params,
            mppi: MppiConfig::default(),
            start: VehicleState::at_rest(3.0, 10.0, 0.0),
            goal: [27.0, 10.0],
            max_steps: 400,
            goal_radius: 1.0,
        }
    }

    /// Obstacle-band run scored with the regression-value policy.
    pub fn obstacle_band(alpha1: f64) -> Self {
        Self::base(
            ScenarioKind::ObstacleBand,
            VehicleSpec::suv(),
            CostParams {
                alpha1,
                policy: Policy::RegressionValue,
                ..CostParams::default()
            },
        )
    }

    /// Bump-band run scored with the roll/pitch policy.
    pub fn bump_band(vehicle: VehicleSpec, alpha2: f64) -> Self {
        Self::base(
            ScenarioKind::BumpBand,
            vehicle,
            CostParams {
                alpha2,
                policy: Policy::RollPitch,
                ..CostParams::default()
            },
        )
    }

    pub fn world(&self) -> Result<HeightField> {
        generate_world(self.world_seed, &self.kind.recipe())
    }

    pub fn run(&self) -> Result<ScenarioRun> {
        let world = self.world()?;
        let map = oracle_map(&world);
        let nav = navigate(
            &map,
            self.start,
            self.goal,
            &self.vehicle,
            &self.params,
            &self.mppi,
            self.max_steps,
            self.goal_radius,
        )?;
        Ok(ScenarioRun { world, map, nav })
    }
}

impl ScenarioRun {
    /// Ground-truth accumulated wheel impact of the executed path.
    pub fn true_impact(&self, vehicle: &VehicleSpec, dt: f64) -> Result<f64> {
        let trace = simulate_traversal(&self.world, vehicle, &self.nav.path_xy(), dt)?;
        Ok(accumulated_impact(&trace, vehicle))
    }
}

/// Largest distance of the path from the straight start–goal line.
pub fn lateral_deviation(path: &[[f64; 2]], start: [f64; 2], goal: [f64; 2]) -> f64 {
    let d = [goal[0] - start[0], goal[1] - start[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len == 0.0 {
        return path
            .iter()
            .map(|p| ((p[0] - start[0]).powi(2) + (p[1] - start[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
    }
    path.iter()
        .map(|p| ((p[0] - start[0]) * d[1] - (p[1] - start[1]) * d[0]).abs() / len)
        .fold(0.0, f64::max)
}

pub const SCENARIO_KEYS: &[&str] = &[
    "scenario",
    "vehicle",
    "world_seed",
    "alpha1",
    "alpha2",
    "penalty",
    "policy",
    "goal_weight",
    "seed",
    "samples",
    "horizon",
    "dt",
    "lambda",
    "noise",
    "max_steps",
    "goal_radius",
    "start_x",
    "start_y",
    "start_yaw",
    "goal_x",
    "goal_y",
];

/// Builds a scenario from a key=value file; absent keys keep the
/// scenario's defaults.
pub fn read_scenario_config(text: &str) -> Result<Scenario> {
    let kv = KvConfig::parse(text, SCENARIO_KEYS)?;
    let kind_name = kv
        .raw("scenario")
        .ok_or_else(|| Error::InvalidConfig("missing key `scenario`".into()))?;
    let kind = ScenarioKind::from_name(kind_name).ok_or_else(|| {
        Error::InvalidConfig(format!("bad value `{kind_name}` for key `scenario`"))
    })?;
    let vehicle = match kv.raw("vehicle") {
        Some(v) => VehicleSpec::preset(v)
            .ok_or_else(|| Error::InvalidConfig(format!("bad value `{v}` for key `vehicle`")))?,
        None => VehicleSpec::suv(),
    };
    let mut s = match kind {
        ScenarioKind::ObstacleBand => {
            let mut s = Scenario::obstacle_band(0.5);
            s.vehicle = vehicle;
            s
        }
        ScenarioKind::BumpBand => Scenario::bump_band(vehicle, 0.5),
    };
    s.world_seed = kv.get_or("world_seed", s.world_seed)?;
    s.params.alpha1 = kv.get_or("alpha1", s.params.alpha1)?;
    s.params.alpha2 = kv.get_or("alpha2", s.params.alpha2)?;
    s.params.penalty = kv.get_or("penalty", s.params.penalty)?;
    s.params.goal_weight = kv.get_or("goal_weight", s.params.goal_weight)?;
    if let Some(p) = kv.raw("policy") {
        s.params.policy = Policy::from_name(p)
            .ok_or_else(|| Error::InvalidConfig(format!("bad value `{p}` for key `policy`")))?;
    }
    s.mppi.seed = kv.get_or("seed", s.mppi.seed)?;
    s.mppi.samples = kv.get_or("samples", s.mppi.samples)?;
    s.mppi.horizon = kv.get_or("horizon", s.mppi.horizon)?;
    s.mppi.dt = kv.get_or("dt", s.mppi.dt)?;
    s.mppi.lambda = kv.get_or("lambda", s.mppi.lambda)?;
    if let Some(n) = kv.raw("noise") {
        s.mppi.noise_mode = match n {
            "derivative" => NoiseMode::Derivative,
            "action" => NoiseMode::Action,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "bad value `{n}` for key `noise`"
                )))
            }
        };
    }
    s.max_steps = kv.get_or("max_steps", s.max_steps)?;
    s.goal_radius = kv.get_or("goal_radius", s.goal_radius)?;
    s.start.x = kv.get_or("start_x", s.start.x)?;
    s.start.y = kv.get_or("start_y", s.start.y)?;
    s.start.yaw = kv.get_or("start_yaw", s.start.yaw)?;
    s.goal[0] = kv.get_or("goal_x", s.goal[0])?;
    s.goal[1] = kv.get_or("goal_y", s.goal[1])?;
    s.params.validate()?;
    s.mppi.validate()?;
    Ok(s)
}

fn class_token(c: Option<TravClass>) -> char {
    match c {
        Some(TravClass::Traversable) => 'T',
        Some(TravClass::NonTraversable) => 'N',
        None => 'U',
    }
}

/// One line of the trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub state: VehicleState,
    pub rates: [f64; 2],
    pub uncertainty: f64,
    pub stabilizing: f64,
    pub goal: f64,
    /// One class letter per wheel: T traversable, N non-traversable, U unknown.
    pub wheels: String,
}

pub const TRAJECTORY_HEADER: &str = "step,x,y,yaw,v,steer,steer_rate,accel,U,S,goal,wheels";

pub fn trajectory_rows(nav: &NavResult) -> Vec<TrajectoryRow> {
    nav.logs
        .iter()
        .map(|l| TrajectoryRow {
            step: l.step,
            state: l.state,
            rates: l.rates,
            uncertainty: l.breakdown.uncertainty,
            stabilizing: l.breakdown.stabilizing,
            goal: l.breakdown.goal,
            wheels: l.contacts.iter().map(|c| class_token(c.class)).collect(),
        })
        .collect()
}

pub fn rows_to_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = format!("{TRAJECTORY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:e},{:.6},{:.6},{}",
            r.step,
            r.state.x,
            r.state.y,
            r.state.yaw,
            r.state.v,
            r.state.steer,
            r.rates[0],
            r.rates[1],
            r.uncertainty,
            r.stabilizing,
            r.goal,
            r.wheels
        );
    }
    s
}

/// Trajectory CSV of an executed run.
pub fn write_trajectory_csv(nav: &NavResult) -> String {
    rows_to_csv(&trajectory_rows(nav))
}

pub fn read_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    const W: &str = "trajectory csv";
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRAJECTORY_HEADER) {
        return Err(Error::parse(W, 1, "bad header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 12 {
            return Err(Error::parse(
                W,
                n,
                format!("expected 12 fields, got {}", f.len()),
            ));
        }
        let x = |j: usize| -> Result<f64> {
            f[j].parse()
                .map_err(|_| Error::parse(W, n, format!("bad number `{}`", f[j])))
        };
        if !f[11].chars().all(|c| matches!(c, 'T' | 'N' | 'U')) {
            return Err(Error::parse(W, n, format!("bad wheel classes `{}`", f[11])));
        }
        rows.push(TrajectoryRow {
            step: f[0]
                .parse()
                .map_err(|_| Error::parse(W, n, format!("bad step `{}`", f[0])))?,
            state: VehicleState {
                x: x(1)?,
                y: x(2)?,
                yaw: x(3)?,
                v: x(4)?,
                steer: x(5)?,
            },
            rates: [x(6)?, x(7)?],
            uncertainty: x(8)?,
            stabilizing: x(9)?,
            goal: x(10)?,
            wheels: f[11].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_map_marks_band() {
        let w = generate_world(1, &obstacle_band_recipe()).unwrap();
        let m = oracle_map(&w);
        assert_eq!(
            m.at(15.0, 10.0).unwrap().class,
            Some(TravClass::NonTraversable)
        );
        assert_eq!(m.at(15.0, 4.0).unwrap().class, Some(TravClass::Traversable));
        assert_eq!(m.at(5.0, 5.0).unwrap().trav_value, Some(0.0));
    }

    #[test]
    fn deviation_of_straight_and_offset_paths() {
        assert_eq!(
            lateral_deviation(&[[0.0, 0.0], [5.0, 0.0]], [0.0, 0.0], [10.0, 0.0]),
            0.0
        );
        assert_eq!(
            lateral_deviation(&[[3.0, -2.0], [5.0, 1.0]], [0.0, 0.0], [10.0, 0.0]),
            2.0
        );
    }

    #[test]
    fn scenario_config_round() {
        let s = read_scenario_config(
            "scenario = bump_band\nvehicle = six_by_six\nalpha2 = 0\nseed = 4\n",
        )
        .unwrap();
        assert_eq!(s.kind, ScenarioKind::BumpBand);
        assert_eq!(s.vehicle.name, "6x6");
        assert_eq!(s.params.alpha2, 0.0);
        assert_eq!(s.mppi.seed, 4);
        assert!(matches!(
            read_scenario_config("scenario = bump_band\nspeed = 3\n"),
            Err(Error::UnknownKey(_))
        ));
        assert!(read_scenario_config("vehicle = suv\n").is_err());
        assert!(read_scenario_config("scenario = bump_band\nlambda = 0\n").is_err());
    }
}
