// Coarse directions from the sample covariance: MDL order and 2D-MUSIC
// peaks for three simultaneous sources.

use aoaloc::linalg::{CMatrix, C64};
use aoaloc::rng::{complex_normal, stream, Purpose};
use aoaloc::rough_aoa::{rough_aoa, GridSpec, SteeringTable};
use aoaloc::scene::ArrayGeometry;
use aoaloc::signal::steering_vector;

pub fn run_example() -> aoaloc::Result<()> {
    let geom = ArrayGeometry::uca(6, 0.2, 0.5e9)?;
    let truth = [(120.0f64, 30.0f64), (150.0, 200.0), (165.0, 310.0)];
    let mut rng = stream(5, Purpose::Noise, 0, 0);
    let g = 400;
    let mut y = CMatrix::zeros(6, g);
    for &(t, p) in &truth {
        let a = steering_vector(&geom, t.to_radians(), p.to_radians());
        for c in 0..g {
            let s: C64 = complex_normal(&mut rng, 1.0);
            let mut col = y.column_mut(c);
            col += &a * s;
        }
    }
    for z in y.iter_mut() {
        *z += complex_normal(&mut rng, 0.01);
    }
    let table = SteeringTable::new(&geom, &GridSpec::default().build()?);
    let r = rough_aoa(&y, &table)?;
    println!("MDL order {}", r.order);
    for p in &r.peaks.peaks {
        println!(
            "peak theta {:6.1} deg, phi {:6.1} deg",
            p.theta.to_degrees(),
            p.phi.to_degrees()
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
