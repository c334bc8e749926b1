//! Drive the three vehicle classes over the same bump and compare the
//! proprioceptive signals they record.

use travbench::terrain_sim::{
    accumulated_impact, generate_world, simulate_traversal, Feature, TerrainRecipe, VehicleSpec,
};

fn main() -> travbench::Result<()> {
    let mut recipe = TerrainRecipe::flat(120, 60, 0.25);
    recipe.explicit.push(Feature::Bump {
        center: [15.0, 7.5],
        amplitude: 0.3,
        sigma: [0.8, 2.0],
        yaw: 0.0,
    });
    let world = generate_world(0, &recipe)?;
    let path = [[3.0, 7.5], [27.0, 7.5]];

    for v in [
        VehicleSpec::compact_car(),
        VehicleSpec::suv(),
        VehicleSpec::six_by_six(),
    ] {
        let trace = simulate_traversal(&world, &v, &path, 0.1)?;
        let peak = trace
            .wheel_forces
            .iter()
            .flatten()
            .fold(0.0f64, |a, &f| a.max(f));
        let max_az = trace.z_accel.iter().fold(0.0f64, |a, z| a.max(z.abs()));
        println!(
            "{:<8} steps={:3} peak wheel force={:8.0} N  max |a_z|={:5.2}  impact={:9.0}",
            v.name,
            trace.len(),
            peak,
            max_az,
            accumulated_impact(&trace, &v)
        );
    }
    Ok(())
}
