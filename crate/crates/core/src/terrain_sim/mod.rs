//! Procedural worlds, vehicle traversal and simulated LiDAR.
//!
//! Everything here is a pure function of its inputs and seed.

mod io;
mod lidar;
mod traversal;
mod vehicle;
mod world;

pub(crate) use io::{expect_fields, num, read_header_line};
pub use io::{
    read_scans, read_trace, read_world, write_scans, write_trace, write_world, WORLD_MAGIC,
};
pub use lidar::{sample_lidar, LidarConfig, LidarScan, SensorPose};
pub use traversal::{accumulated_impact, simulate_traversal, static_wheel_loads, SimTrace};
pub use vehicle::{plane_roll_pitch, VehicleSpec, GRAVITY};
pub(crate) use world::SplitMix;
pub use world::{generate_world, Feature, FeatureRange, HeightField, Range, TerrainRecipe};
