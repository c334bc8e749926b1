//! One 128-channel scan from a vehicle standing in an off-road world.

use travbench::terrain_sim::{
    generate_world, sample_lidar, LidarConfig, SensorPose, TerrainRecipe,
};

fn main() -> travbench::Result<()> {
    let world = generate_world(3, &TerrainRecipe::off_road(160, 160, 0.25))?;
    let (x, y) = (20.0, 20.0);
    let pose = SensorPose {
        x,
        y,
        z: world.elevation_at(x, y) + 1.8,
        yaw: 0.0,
    };
    let cfg = LidarConfig::channels_128(180, 20.0);
    let scan = sample_lidar(&world, pose, &cfg)?;

    let on_obstacles = scan
        .points
        .iter()
        .filter(|p| {
            world
                .cell_of(p[0], p[1])
                .is_some_and(|(c, r)| world.is_obstacle(c, r))
        })
        .count();
    println!(
        "{} beams, {} returns, {} on obstacle columns",
        cfg.channels * cfg.azimuth_steps,
        scan.points.len(),
        on_obstacles
    );
    Ok(())
}
