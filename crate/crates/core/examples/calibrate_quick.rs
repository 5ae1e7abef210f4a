// Quick calibration of the sparse-coding threshold function for N in {2, 3}.

use aoaloc::scene::ArrayGeometry;
use aoaloc::sparse::{calibrate_f, CalibrationConfig};

pub fn run_example() -> aoaloc::Result<()> {
    let geom = ArrayGeometry::uca(6, 0.2, 0.5e9)?;
    let cfg = CalibrationConfig {
        trials: 4,
        columns: 200,
        realizations: 2,
        ..CalibrationConfig::quick()
    };
    let rep = calibrate_f(&geom, &cfg)?;
    for (n, rms) in &rep.fit_rms {
        println!("N={n}: log10 f fit rms {rms:.4}");
    }
    println!("non-increasing in gamma: {}", rep.monotone_in_gamma);
    println!("non-decreasing in N: {}", rep.monotone_in_n);
    print!("{}", rep.model.to_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
