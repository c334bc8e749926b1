use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Driving capabilities of one vehicle class.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub name: String,
    /// Body-frame wheel positions (x forward, y left), meters.
    pub wheel_offsets: Vec<[f64; 2]>,
    pub mass: f64,
    /// Nominal driving speed, m/s.
    pub speed: f64,
    /// Largest per-wheel dynamic force the vehicle tolerates, N.
    pub impact_tolerance: f64,
    pub max_roll: f64,
    pub max_pitch: f64,
    /// Center of gravity height above the wheel plane, used for load transfer.
    pub cg_height: f64,
    /// Steering angle limit, rad.
    pub max_steer: f64,
}

impl VehicleSpec {
    pub fn compact_car() -> Self {
        Self {
            name: "compact".into(),
            wheel_offsets: vec![[1.3, 0.75], [1.3, -0.75], [-1.3, 0.75], [-1.3, -0.75]],
            mass: 1200.0,
            speed: 4.0,
            impact_tolerance: 2500.0,
            max_roll: 0.2,
            max_pitch: 0.25,
            cg_height: 0.55,
            max_steer: 0.6,
        }
    }

    pub fn suv() -> Self {
        Self {
            name: "suv".into(),
            wheel_offsets: vec![[1.45, 0.82], [1.45, -0.82], [-1.45, 0.82], [-1.45, -0.82]],
            mass: 2100.0,
            speed: 4.0,
            impact_tolerance: 6000.0,
            max_roll: 0.35,
            max_pitch: 0.4,
            cg_height: 0.75,
            max_steer: 0.55,
        }
    }

    pub fn six_by_six() -> Self {
        Self {
            name: "6x6".into(),
            wheel_offsets: vec![
                [1.6, 1.0],
                [1.6, -1.0],
                [0.0, 1.0],
                [0.0, -1.0],
                [-1.6, 1.0],
                [-1.6, -1.0],
            ],
            mass: 6500.0,
            speed: 4.0,
            impact_tolerance: 30000.0,
            max_roll: 0.6,
            max_pitch: 0.7,
            cg_height: 1.0,
            max_steer: 0.5,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "compact" | "compact_car" => Some(Self::compact_car()),
            "suv" => Some(Self::suv()),
            "6x6" | "six_by_six" => Some(Self::six_by_six()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.wheel_offsets.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "{}: needs at least 3 wheels",
                self.name
            )));
        }
        if !(self.mass > 0.0) || !(self.impact_tolerance > 0.0) || !(self.speed > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{}: mass, speed and impact tolerance must be positive",
                self.name
            )));
        }
        if !(self.max_roll > 0.0) || !(self.max_pitch > 0.0) || !(self.max_steer > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{}: angle limits must be positive",
                self.name
            )));
        }
        Ok(())
    }

    pub fn wheel_count(&self) -> usize {
        self.wheel_offsets.len()
    }

    /// Longitudinal distance between the front-most and rear-most axle.
    pub fn wheelbase(&self) -> f64 {
        let (lo, hi) = self
            .wheel_offsets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
                (lo.min(w[0]), hi.max(w[0]))
            });
        hi - lo
    }

    /// Static weight share of one wheel on level ground.
    pub fn static_share(&self) -> f64 {
        self.mass * GRAVITY / self.wheel_count() as f64
    }

    /// World position of each wheel for a body pose.
    pub fn wheel_positions(&self, x: f64, y: f64, yaw: f64) -> impl Iterator<Item = [f64; 2]> + '_ {
        let (s, c) = yaw.sin_cos();
        self.wheel_offsets
            .iter()
            .map(move |o| [x + c * o[0] - s * o[1], y + s * o[0] + c * o[1]])
    }
}

/// Least-squares plane `z = a + b·u + c·w` through wheel elevations in the
/// body frame; returns `(roll, pitch)` with pitch positive nose-up and roll
/// positive left-side-up. Degenerate layouts give zero.
pub fn plane_roll_pitch(offsets: &[[f64; 2]], elevations: &[f64]) -> (f64, f64) {
    let n = offsets.len().min(elevations.len());
    if n < 3 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let (mut su, mut sw, mut sz) = (0.0, 0.0, 0.0);
    for i in 0..n {
        su += offsets[i][0];
        sw += offsets[i][1];
        sz += elevations[i];
    }
    let (mu, mw, mz) = (su / nf, sw / nf, sz / nf);
    let (mut suu, mut sww, mut suw, mut suz, mut swz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let u = offsets[i][0] - mu;
        let w = offsets[i][1] - mw;
        let z = elevations[i] - mz;
        suu += u * u;
        sww += w * w;
        suw += u * w;
        suz += u * z;
        swz += w * z;
    }
    let det = suu * sww - suw * suw;
    if det.abs() < 1e-12 {
        return (0.0, 0.0);
    }
    let b = (suz * sww - swz * suw) / det;
    let c = (swz * suu - suz * suw) / det;
    (c.atan(), b.atan())
}
