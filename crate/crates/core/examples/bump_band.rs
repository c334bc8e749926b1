//! A washboard of ridges across the route: a compact car detours, a 6×6
//! mostly drives through, and dropping the roll/pitch weight sends the car
//! straight over.

use travbench::smppi::{lateral_deviation, Scenario};
use travbench::terrain_sim::VehicleSpec;

fn main() -> travbench::Result<()> {
    let runs = [
        (
            "compact",
            Scenario::bump_band(VehicleSpec::compact_car(), 0.5),
        ),
        ("6x6", Scenario::bump_band(VehicleSpec::six_by_six(), 0.5)),
        (
            "compact, alpha2=0",
            Scenario::bump_band(VehicleSpec::compact_car(), 0.0),
        ),
    ];
    for (name, s) in runs {
        let run = s.run()?;
        let impact = run.true_impact(&s.vehicle, s.mppi.dt)?;
        println!(
            "{name:<18} {:?} in {:3} steps, deviation {:.2} m, wheel impact {impact:.0}",
            run.nav.outcome,
            run.nav.logs.len(),
            lateral_deviation(&run.nav.path_xy(), [s.start.x, s.start.y], s.goal)
        );
    }
    Ok(())
}
