// Worst-case localization error when the height iteration stalls: grid
// maximum over the azimuth difference against tan^2(theta).

use aoaloc::harness::experiments::analyze_bound;

pub fn run_example() -> aoaloc::Result<()> {
    let thetas: Vec<f64> = (1..=8).map(|k| 10.0 * k as f64).collect();
    for r in analyze_bound(&thetas, 1e-3, 16.5)? {
        println!(
            "theta {:4.0} deg: max {:12.6} tan^2 {:12.6} e_max {:7.2} m",
            r.theta_deg, r.numeric_max, r.tan2, r.e_max
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
