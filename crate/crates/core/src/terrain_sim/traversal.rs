//! Quasi-static wheel load simulation along a driven path.

use super::vehicle::{plane_roll_pitch, VehicleSpec, GRAVITY};
use super::world::HeightField;
use crate::error::{Error, Result};

/// Proprioceptive record of one traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub vehicle: String,
    pub timestamps: Vec<f64>,
    /// `(x, y, yaw)` per step.
    pub poses: Vec<[f64; 3]>,
    /// Per step, per wheel contact point on the terrain surface.
    pub contacts: Vec<Vec<[f64; 3]>>,
    /// Per step, per wheel vertical force (N).
    pub wheel_forces: Vec<Vec<f64>>,
    /// Body vertical acceleration (m/s²), the IMU z channel.
    pub z_accel: Vec<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn wheel_count(&self) -> usize {
        self.contacts.first().map_or(0, Vec::len)
    }
}

/// Samples a polyline at constant arc-length spacing; returns `(x, y, heading)`.
pub(crate) fn resample_polyline(path: &[[f64; 2]], spacing: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    if path.len() < 2 {
        if let Some(p) = path.first() {
            out.push([p[0], p[1], 0.0]);
        }
        return out;
    }
    let seg_len: Vec<f64> = path
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .collect();
    let total: f64 = seg_len.iter().sum();
    let steps = (total / spacing).floor() as usize;
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..=steps {
        let s = k as f64 * spacing;
        while seg + 1 < seg_len.len() && s > seg_start + seg_len[seg] {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let (a, b) = (path[seg], path[seg + 1]);
        let t = if seg_len[seg] > 0.0 {
            ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let heading = (b[1] - a[1]).atan2(b[0] - a[0]);
        out.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, heading]);
    }
    out
}

/// Quasi-static wheel loads for one pose: weight share resolved through the
/// roll/pitch of the wheel plane, with load transfer from the CG height.
pub fn static_wheel_loads(vehicle: &VehicleSpec, wheel_z: &[f64]) -> Vec<f64> {
    let n = vehicle.wheel_count() as f64;
    let (roll, pitch) = plane_roll_pitch(&vehicle.wheel_offsets, wheel_z);
    let (mu, mw) = centroid(&vehicle.wheel_offsets);
    let (suu, sww) = vehicle.wheel_offsets.iter().fold((0.0, 0.0), |(a, b), o| {
        (a + (o[0] - mu).powi(2), b + (o[1] - mw).powi(2))
    });
    let weight = vehicle.mass * GRAVITY;
    let normal = weight * roll.cos() * pitch.cos();
    let alpha = if suu > 0.0 {
        -weight * pitch.sin() * vehicle.cg_height / suu
    } else {
        0.0
    };
    let beta = if sww > 0.0 {
        -weight * roll.sin() * vehicle.cg_height / sww
    } else {
        0.0
    };
    vehicle
        .wheel_offsets
        .iter()
        .map(|o| normal / n + alpha * (o[0] - mu) + beta * (o[1] - mw))
        .collect()
}

fn centroid(offsets: &[[f64; 2]]) -> (f64, f64) {
    let n = offsets.len() as f64;
    let (su, sw) = offsets
        .iter()
        .fold((0.0, 0.0), |(a, b), o| (a + o[0], b + o[1]));
    (su / n, sw / n)
}

/// Drives `vehicle` along `path` at its nominal speed, sampling every `dt`.
///
/// Per wheel, force = quasi-static share + `m/n · Δ²z/dt²`, where `Δ²z` is
/// the second difference of that wheel's path elevation (zero at the two
/// endpoints), clamped at zero. Body z-acceleration is the mean of the wheel
/// vertical accelerations.
pub fn simulate_traversal(
    world: &HeightField,
    vehicle: &VehicleSpec,
    path: &[[f64; 2]],
    dt: f64,
) -> Result<SimTrace> {
    vehicle.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt {dt} must be positive")));
    }
    if path.is_empty() {
        return Err(Error::InvalidConfig("empty path".into()));
    }
    let poses = resample_polyline(path, vehicle.speed * dt);
    let n_wheels = vehicle.wheel_count();
    let mut contacts = Vec::with_capacity(poses.len());
    for (step, pose) in poses.iter().enumerate() {
        if !world.contains(pose[0], pose[1]) {
            return Err(Error::PathOutOfBounds { step });
        }
        let mut wheels = Vec::with_capacity(n_wheels);
        for (wheel, p) in vehicle
            .wheel_positions(pose[0], pose[1], pose[2])
            .enumerate()
        {
            let (col, row) = world
                .cell_of(p[0], p[1])
                .ok_or(Error::PathOutOfBounds { step })?;
            if world.is_obstacle(col, row) {
                return Err(Error::PathViolatesMask {
                    step,
                    wheel,
                    col,
                    row,
                });
            }
            wheels.push([p[0], p[1], world.elevation_at(p[0], p[1])]);
        }
        contacts.push(wheels);
    }

    let share_mass = vehicle.mass / n_wheels as f64;
    let steps = poses.len();
    let mut wheel_forces = Vec::with_capacity(steps);
    let mut z_accel = Vec::with_capacity(steps);
    for k in 0..steps {
        let z: Vec<f64> = contacts[k].iter().map(|c| c[2]).collect();
        let mut forces = static_wheel_loads(vehicle, &z);
        let mut acc_sum = 0.0;
        for (w, f) in forces.iter_mut().enumerate() {
            let acc = if k == 0 || k + 1 == steps {
                0.0
            } else {
                (contacts[k + 1][w][2] - 2.0 * contacts[k][w][2] + contacts[k - 1][w][2])
                    / (dt * dt)
            };
            acc_sum += acc;
            *f = (*f + share_mass * acc).max(0.0);
        }
        wheel_forces.push(forces);
        z_accel.push(acc_sum / n_wheels as f64);
    }

    Ok(SimTrace {
        vehicle: vehicle.name.clone(),
        timestamps: (0..steps).map(|k| k as f64 * dt).collect(),
        poses,
        contacts,
        wheel_forces,
        z_accel,
    })
}

/// Total dynamic wheel impact of a trace: Σ over steps and wheels of
/// `|force − static level-ground share|`.
pub fn accumulated_impact(trace: &SimTrace, vehicle: &VehicleSpec) -> f64 {
    let share = vehicle.static_share();
    trace
        .wheel_forces
        .iter()
        .flat_map(|f| f.iter())
        .map(|f| (f - share).abs())
        .sum()
}
