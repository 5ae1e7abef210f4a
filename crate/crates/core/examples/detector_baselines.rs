// Reference detectors at a matched output size on a block with a few
// strong pulse samples.

use aoaloc::baselines::{false_detection_probability, match_output_size, Baseline};
use aoaloc::linalg::{CMatrix, C64};
use aoaloc::rng::{complex_normal, stream, Purpose};

pub fn run_example() -> aoaloc::Result<()> {
    let mut rng = stream(9, Purpose::Noise, 0, 0);
    let (m, g) = (6, 5000);
    let mut y = CMatrix::from_fn(m, g, |_, _| complex_normal(&mut rng, 1.0));
    let signal: Vec<usize> = (1000..1030).chain(3000..3030).collect();
    for &c in &signal {
        for k in 0..m {
            y[(k, c)] += C64::from_polar(2.0, 0.7 * k as f64);
        }
    }
    let n_out = 40;
    for b in [
        Baseline::Binary { n: 3 },
        Baseline::Glrt {
            snr: 4.0,
            noise_var: 1.0,
        },
        Baseline::SquareLaw,
    ] {
        let m = match_output_size(&b.statistics(&y), n_out);
        let p = false_detection_probability(&m.detected, &signal);
        println!(
            "{:6}: threshold {:8.3}, kept {}, false-detection probability {:?}",
            b.name(),
            m.threshold,
            m.detected.len(),
            p
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
