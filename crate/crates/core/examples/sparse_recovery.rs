// Smallest-support coding of observations against a steering dictionary,
// with the threshold taken from the calibrated model.

use aoaloc::linalg::{CVector, C64};
use aoaloc::scene::ArrayGeometry;
use aoaloc::signal::steering_vector;
use aoaloc::sparse::{epsilon_opt, sparse_recover, EpsilonModel};

pub fn run_example() -> aoaloc::Result<()> {
    let geom = ArrayGeometry::uca(6, 0.2, 0.5e9)?;
    let angles = [(120.0f64, 10.0f64), (140.0, 100.0), (160.0, 220.0), (170.0, 300.0)];
    let cols: Vec<CVector> = angles
        .iter()
        .map(|&(t, p)| steering_vector(&geom, t.to_radians(), p.to_radians()))
        .collect();
    let a = aoaloc::linalg::CMatrix::from_columns(&cols);

    let y = &cols[1] * C64::new(0.8, 0.3) + &cols[3] * C64::new(-0.2, 0.5);
    let noise_var = 1e-4;
    let gamma = 0.5 / noise_var;
    let eps = epsilon_opt(
        &EpsilonModel::shipped(),
        a.ncols(),
        gamma,
        6,
        gamma * noise_var,
        noise_var,
    )?;
    let code = sparse_recover(&y, &a, eps, 3);
    println!(
        "threshold {eps:.4}, support {:?}, residual {:.2e}",
        code.support, code.residual
    );
    for (k, c) in code.support.iter().zip(&code.coefficients) {
        println!("atom {k}: {:.3}{:+.3}j", c.re, c.im);
    }
    let none = sparse_recover(&CVector::zeros(6), &a, eps, 3);
    println!("zero observation -> support {:?}", none.support);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
