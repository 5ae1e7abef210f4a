// Closed-loop manifold refinement: two pulsed sources, a coarse start
// several degrees off, and the refined angles read back by beamforming.

use aoaloc::detector::{detect, DetectorConfig};
use aoaloc::linalg::CMatrix;
use aoaloc::manifold::{initial_manifold, DirectionBank};
use aoaloc::refiner::{refine_detection, refined_aoas, RefinerConfig};
use aoaloc::rng::{complex_normal, stream, Purpose};
use aoaloc::rough_aoa::{GridSpec, SteeringTable};
use aoaloc::scene::ArrayGeometry;
use aoaloc::signal::{steering_vector, unit_direction};
use aoaloc::sparse::EpsilonModel;

pub fn run_example() -> aoaloc::Result<()> {
    let geom = ArrayGeometry::uca(6, 0.2, 0.5e9)?;
    let truth = [(130.0f64, 40.0f64), (160.0, 250.0)];
    let mut rng = stream(11, Purpose::Noise, 0, 0);
    let noise_var = 1e-3;
    let g = 2000;
    let mut y = CMatrix::zeros(6, g);
    // each source transmits 30-sample pulses at its own offsets
    for (k, &(t, p)) in truth.iter().enumerate() {
        let a = steering_vector(&geom, t.to_radians(), p.to_radians());
        for start in (100 + 170 * k..g - 40).step_by(400) {
            for c in start..start + 30 {
                let amp = ((c - start) as f64 / 30.0 * std::f64::consts::PI).sin();
                let mut col = y.column_mut(c);
                col += &a * aoaloc::linalg::C64::from_polar(amp, 0.4 * k as f64);
            }
        }
    }
    for z in y.iter_mut() {
        *z += complex_normal(&mut rng, noise_var);
    }
    let det = detect(&y, &DetectorConfig::default())?;
    let coarse: Vec<_> = truth
        .iter()
        .enumerate()
        .map(|(k, &(t, p))| Ok((k, unit_direction((t + 4.0).to_radians(), (p - 5.0).to_radians())?)))
        .collect::<aoaloc::Result<_>>()?;
    let a0 = initial_manifold(&DirectionBank::default(), &coarse, &geom)?;
    let cfg = RefinerConfig::default();
    let rep = refine_detection(&det, &a0, &EpsilonModel::shipped(), &cfg)?;
    println!(
        "kept {} samples, {} iterations, converged {}",
        det.len(),
        rep.criteria.len(),
        rep.converged
    );
    let table = SteeringTable::new(&geom, &GridSpec::default().build()?);
    for r in refined_aoas(&rep.manifold, &table, &geom, &cfg) {
        println!(
            "{:?}: theta {:7.3} deg, phi {:7.3} deg",
            r.tag,
            r.theta.to_degrees(),
            r.phi.to_degrees()
        );
    }
    println!("truth {truth:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
