//! Generate an off-road world, save it, and report what ended up in it.

use travbench::terrain_sim::{generate_world, read_world, write_world, TerrainRecipe};

fn main() -> travbench::Result<()> {
    let recipe = TerrainRecipe::off_road(160, 160, 0.25);
    let world = generate_world(7, &recipe)?;

    let (lo, hi) = world
        .elevation
        .iter()
        .fold((f32::MAX, f32::MIN), |(a, b), &z| (a.min(z), b.max(z)));
    let obstacles = world.obstacle_mask.iter().filter(|&&o| o).count();
    println!(
        "{}x{} cells at {} m, elevation {lo:.2}..{hi:.2} m, {obstacles} obstacle cells",
        world.width, world.height, world.resolution
    );

    let mut bytes = Vec::new();
    write_world(&world, &mut bytes)?;
    let back = read_world(&mut bytes.as_slice())?;
    assert_eq!(back, world);
    println!("world file: {} bytes, reloads identically", bytes.len());
    Ok(())
}
