// Energy detector on a synthesized window: retained samples, noise and SNR
// estimates against the truth.

use aoaloc::detector::{detect, DetectorConfig};
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
        window_count: 1,
    };
    let sources = SourceSet::reference();
    let var = noise_variance_for_snr_star(&sources, &traj.initial_position, 20.0)?;
    let opts = SynthesisOptions {
        noise: NoiseModel { variance: var },
        ..SynthesisOptions::default()
    };
    let cap = Simulator::new(geom, traj, sources, opts, 3)?.synthesize_window(1)?;

    let det = detect(&cap.samples, &DetectorConfig::default())?;
    let signal: Vec<usize> = cap.clean.keys().copied().collect();
    let hits = det.kept.iter().filter(|g| signal.binary_search(g).is_ok()).count();
    println!(
        "kept {} of {} samples ({} carry signal), {} iterations",
        det.len(),
        cap.len(),
        hits,
        det.iterations
    );
    println!("noise variance: estimated {:.4e}, true {:.4e}", det.noise_var, var);
    let db = |x: f64| 10.0 * x.log10();
    println!(
        "instantaneous SNR: estimated {:.2} dB, true {:.2} dB",
        db(det.inst_snr),
        db(cap.true_snr(&det.kept))
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
