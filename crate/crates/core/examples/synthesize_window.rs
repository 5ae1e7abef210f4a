// One window of received samples from three pulsed sources.

use aoaloc::scene::{ArrayGeometry, SourceSet, Trajectory};
use aoaloc::signal::{noise_variance_for_snr_star, NoiseModel, Simulator, SynthesisOptions};
use nalgebra::Vector3;

pub fn run_example() -> aoaloc::Result<()> {
    let geom = ArrayGeometry::uca(6, 0.2, 0.5e9)?;
    let traj = Trajectory {
        initial_position: Vector3::new(27.0, 11.0, 500.0),
        velocity: Vector3::new(44.0, 33.0, 0.0),
        start_time: 0.1,
        window_duration: 0.01,
        window_count: 2,
    };
    let pos = [
        Vector3::new(0.0, 50.0, 4.0),
        Vector3::new(66.0, -85.0, 3.2),
        Vector3::new(-300.0, -100.0, 6.0),
    ];
    let sources = SourceSet::uniform(&pos, 3e-6, 3.0, 3e-3);
    let var = noise_variance_for_snr_star(&sources, &traj.initial_position, 20.0)?;
    let opts = SynthesisOptions {
        noise: NoiseModel { variance: var },
        ..SynthesisOptions::default()
    };
    let sim = Simulator::new(geom, traj, sources, opts, 42)?;
    let cap = sim.synthesize_window(1)?;
    println!(
        "window 1: {} x {} samples, noise variance {:.3e}",
        cap.elements(),
        cap.len(),
        var
    );
    for (k, t) in cap.truth.iter().enumerate() {
        println!(
            "source {k}: theta {:6.2} deg, phi {:7.2} deg, range {:6.1} m, {} active samples",
            t.theta.to_degrees(),
            t.phi.to_degrees(),
            t.range,
            t.active_columns.len()
        );
    }
    let signal: Vec<usize> = cap.clean.keys().copied().collect();
    println!("true SNR over signal samples: {:.2}", cap.true_snr(&signal));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
