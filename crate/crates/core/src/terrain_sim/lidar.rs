//! Ray-marched spinning LiDAR.

use super::world::HeightField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

/// Beam layout of a spinning sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarConfig {
    pub channels: usize,
    pub azimuth_steps: usize,
    pub max_range: f64,
    /// Elevation angle of the lowest channel (negative looks down), rad.
    pub min_elevation: f64,
    /// Elevation angle of the highest channel, rad.
    pub max_elevation: f64,
}

impl LidarConfig {
    /// 128-channel sensor with a ±22.5° vertical field of view.
    pub fn channels_128(azimuth_steps: usize, max_range: f64) -> Self {
        Self {
            channels: 128,
            azimuth_steps,
            max_range,
            min_elevation: -22.5f64.to_radians(),
            max_elevation: 22.5f64.to_radians(),
        }
    }

    pub fn elevation_angle(&self, channel: usize) -> f64 {
        if self.channels <= 1 {
            self.min_elevation
        } else {
            self.min_elevation
                + (self.max_elevation - self.min_elevation) * channel as f64
                    / (self.channels - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub pose: SensorPose,
    pub channels: usize,
    pub azimuth_steps: usize,
    /// World-frame hit points.
    pub points: Vec<[f64; 3]>,
}

impl HeightField {
    /// True when `p` is below the terrain or inside an obstacle column.
    fn is_solid(&self, p: [f64; 3]) -> bool {
        match self.solid_top(p[0], p[1]) {
            Some(top) => p[2] <= top,
            None => false,
        }
    }
}

/// Ray-marches every (channel, azimuth) beam at half-cell steps; the first
/// step inside solid geometry is refined by bisection and becomes a point.
/// Beams that leave the world or exceed `max_range` are dropped.
pub fn sample_lidar(world: &HeightField, pose: SensorPose, cfg: &LidarConfig) -> Result<LidarScan> {
    if cfg.channels < 1 || cfg.azimuth_steps < 1 {
        return Err(Error::InvalidConfig(
            "lidar needs at least one channel and azimuth step".into(),
        ));
    }
    if !(cfg.max_range > 0.0) {
        return Err(Error::InvalidConfig(
            "lidar max_range must be positive".into(),
        ));
    }
    let origin = [pose.x, pose.y, pose.z];
    match world.solid_top(pose.x, pose.y) {
        None => return Err(Error::InvalidPose("sensor outside the world".into())),
        Some(top) if pose.z <= top => {
            return Err(Error::InvalidPose(format!(
                "sensor z {} is not above the surface at {}",
                pose.z, top
            )))
        }
        _ => {}
    }
    let step = world.resolution / 2.0;
    let mut points = Vec::new();
    for a in 0..cfg.azimuth_steps {
        let az = pose.yaw + std::f64::consts::TAU * a as f64 / cfg.azimuth_steps as f64;
        let (sa, ca) = az.sin_cos();
        for ch in 0..cfg.channels {
            let el = cfg.elevation_angle(ch);
            let (se, ce) = el.sin_cos();
            let dir = [ce * ca, ce * sa, se];
            if let Some(t) = march(world, origin, dir, step, cfg.max_range) {
                points.push([
                    origin[0] + t * dir[0],
                    origin[1] + t * dir[1],
                    origin[2] + t * dir[2],
                ]);
            }
        }
    }
    Ok(LidarScan {
        pose,
        channels: cfg.channels,
        azimuth_steps: cfg.azimuth_steps,
        points,
    })
}

fn at(o: [f64; 3], d: [f64; 3], t: f64) -> [f64; 3] {
    [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]]
}

fn march(world: &HeightField, o: [f64; 3], d: [f64; 3], step: f64, max_range: f64) -> Option<f64> {
    let mut prev = 0.0;
    let mut t = step;
    loop {
        let tt = t.min(max_range);
        let p = at(o, d, tt);
        if !world.contains(p[0], p[1]) {
            return None;
        }
        if world.is_solid(p) {
            let (mut lo, mut hi) = (prev, tt);
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                if world.is_solid(at(o, d, mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        if tt >= max_range {
            return None;
        }
        prev = tt;
        t += step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain_sim::{generate_world, Feature, TerrainRecipe};

    fn one_beam(theta: f64, range: f64) -> LidarConfig {
        LidarConfig {
            channels: 1,
            azimuth_steps: 1,
            max_range: range,
            min_elevation: -theta,
            max_elevation: -theta,
        }
    }

    #[test]
    fn flat_ground_range_matches_plane_intersection() {
        let w = generate_world(1, &TerrainRecipe::flat(64, 64, 0.25)).unwrap();
        let h = 1.8;
        let theta = 0.3f64;
        let pose = SensorPose {
            x: 4.0,
            y: 8.0,
            z: h,
            yaw: 0.0,
        };
        let scan = sample_lidar(&w, pose, &one_beam(theta, 30.0)).unwrap();
        assert_eq!(scan.points.len(), 1);
        let p = scan.points[0];
        let range = ((p[0] - 4.0).powi(2) + (p[1] - 8.0).powi(2) + (p[2] - h).powi(2)).sqrt();
        assert!((range - h / theta.sin()).abs() <= w.resolution / 2.0);
    }

    #[test]
    fn range_cutoff_drops_the_beam() {
        let w = generate_world(1, &TerrainRecipe::flat(64, 64, 0.25)).unwrap();
        let theta = 0.3f64;
        let pose = SensorPose {
            x: 4.0,
            y: 8.0,
            z: 1.8,
            yaw: 0.0,
        };
        let scan = sample_lidar(&w, pose, &one_beam(theta, 1.8 / theta.sin() - 0.5)).unwrap();
        assert!(scan.points.is_empty());
    }

    #[test]
    fn sensor_below_ground_is_invalid() {
        let w = generate_world(1, &TerrainRecipe::flat(64, 64, 0.25)).unwrap();
        let pose = SensorPose {
            x: 4.0,
            y: 8.0,
            z: -0.1,
            yaw: 0.0,
        };
        assert!(matches!(
            sample_lidar(&w, pose, &one_beam(0.1, 10.0)),
            Err(Error::InvalidPose(_))
        ));
    }

    #[test]
    fn points_lie_on_surfaces_and_within_range() {
        let w = generate_world(9, &TerrainRecipe::off_road(96, 96, 0.25)).unwrap();
        let (x, y) = (12.0, 12.0);
        let z = w.solid_top(x, y).unwrap() + 5.0;
        let cfg = LidarConfig::channels_128(90, 20.0);
        let scan = sample_lidar(&w, SensorPose { x, y, z, yaw: 0.3 }, &cfg).unwrap();
        assert!(!scan.points.is_empty());
        assert!(scan.points.len() <= cfg.channels * cfg.azimuth_steps);
        for p in &scan.points {
            let r = ((p[0] - x).powi(2) + (p[1] - y).powi(2) + (p[2] - z).powi(2)).sqrt();
            assert!(r <= cfg.max_range + 1e-9);
            let ground = w.elevation_at(p[0], p[1]);
            let on_ground = (p[2] - ground).abs() <= w.resolution / 2.0;
            let (c, rr) = w.cell_of(p[0], p[1]).unwrap();
            let on_obstacle = w.is_obstacle(c, rr) && p[2] <= ground + w.obstacle_height + 1e-9;
            // beams also graze obstacle walls from a neighboring cell
            let near_obstacle = (-1i64..=1).any(|dc| {
                (-1i64..=1).any(|dr| {
                    let (cc, rc) = (c as i64 + dc, rr as i64 + dr);
                    cc >= 0
                        && rc >= 0
                        && (cc as usize) < w.width
                        && (rc as usize) < w.height
                        && w.is_obstacle(cc as usize, rc as usize)
                })
            });
            assert!(
                on_ground || on_obstacle || near_obstacle,
                "point {p:?} floats"
            );
        }
    }

    #[test]
    fn obstacle_occludes_ground() {
        let mut r = TerrainRecipe::flat(64, 64, 0.25);
        r.explicit.push(Feature::ObstacleRect {
            min: [6.0, 7.0],
            max: [6.9, 9.0],
        });
        let w = generate_world(1, &r).unwrap();
        let theta = 0.1f64;
        let pose = SensorPose {
            x: 2.0,
            y: 8.1,
            z: 1.5,
            yaw: 0.0,
        };
        let scan = sample_lidar(&w, pose, &one_beam(theta, 30.0)).unwrap();
        let p = scan.points[0];
        let dist = ((p[0] - 2.0).powi(2) + (p[1] - 8.1).powi(2) + (p[2] - 1.5).powi(2)).sqrt();
        let ground = 1.5 / theta.sin();
        assert!(dist <= ground);
        // exact slab intersection with the masked cell block, x from 6.0
        let t_box = (6.0 - 2.0) / theta.cos();
        assert!((dist - t_box).abs() <= w.resolution / 2.0);
    }
}
