//! SMPPI around an obstacle band, with and without the traversability
//! penalty term.

use travbench::smppi::{lateral_deviation, Scenario};

fn main() -> travbench::Result<()> {
    for alpha1 in [0.5, 0.0] {
        let s = Scenario::obstacle_band(alpha1);
        let run = s.run()?;
        println!(
            "alpha1={alpha1:<3} {:?} after {} steps, {} steps with a wheel on the band, deviation {:.2} m",
            run.nav.outcome,
            run.nav.logs.len(),
            run.nav.blocked_contacts(),
            lateral_deviation(&run.nav.path_xy(), [s.start.x, s.start.y], s.goal)
        );
    }
    Ok(())
}
