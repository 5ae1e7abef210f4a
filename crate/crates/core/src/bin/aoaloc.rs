use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aoaloc::harness::config::RunConfig;
use aoaloc::harness::experiments::{analyze_bound, compare_detectors, heatmap, proposed_vs_sld};
use aoaloc::harness::{io, run_pipeline, PreparedRun};
use aoaloc::sparse::{calibrate_f, CalibrationConfig};

#[derive(Parser)]
#[command(
    name = "aoaloc",
    version,
    about = "Multi-source AOA localization from a moving antenna array"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to missing fields.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
}

impl Common {
    fn load(&self) -> aoaloc::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
            cfg.heatmap.trials = t;
        }
        if let Some(s) = self.snr {
            cfg.snr_star_db = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleFormat {
    Csv,
    Bin,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize the windows of trial 0 and write samples and ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "bin")]
        format: SampleFormat,
        /// Also write the height map as CSV.
        #[arg(long)]
        map: bool,
    },
    /// Run the full pipeline over all trials.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Single-source localization error over a grid of source positions.
    Heatmap {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the sparse-recovery threshold model by Monte-Carlo simulation.
    CalibrateF {
        #[command(flatten)]
        common: Common,
        /// Two dictionary sizes and few trials.
        #[arg(long)]
        quick: bool,
        /// Largest dictionary size.
        #[arg(long)]
        n_max: Option<usize>,
        /// Model file to write; `<out>/epsilon_model.csv` by default.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// False-detection probability of all detectors at matched output size.
    CompareDetectors {
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate the worst-case error of a stalled height iteration.
    AnalyzeBound {
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Largest height difference of the map (m).
        #[arg(long, default_value_t = 16.5)]
        dz_max: f64,
        /// Azimuth-difference grid step (rad).
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> aoaloc::Result<()> {
    match cli.cmd {
        Cmd::Synth { common, format, map } => {
            let cfg = common.load()?;
            let run = PreparedRun::new(&cfg)?;
            let scene = run.scene(0)?;
            let sim = run.simulator(&scene)?;
            let dir = &cfg.output_dir;
            std::fs::create_dir_all(dir)?;
            let mut truth = csv::Writer::from_path(dir.join("synth_truth.csv"))?;
            truth.write_record(["window", "source", "theta_deg", "phi_deg", "range_m", "active_columns"])?;
            for i in 1..=run.trajectory.window_count {
                let cap = sim.synthesize_window(i)?;
                match format {
                    SampleFormat::Csv => cap.write_csv(&dir.join(format!("window_{i:03}.csv")))?,
                    SampleFormat::Bin => cap.write_binary(&dir.join(format!("window_{i:03}.bin")))?,
                }
                for (k, t) in cap.truth.iter().enumerate() {
                    truth.write_record([
                        i.to_string(),
                        k.to_string(),
                        t.theta.to_degrees().to_string(),
                        t.phi.to_degrees().to_string(),
                        t.range.to_string(),
                        t.active_columns.len().to_string(),
                    ])?;
                }
                println!(
                    "window {i}: {} samples, noise variance {}",
                    cap.len(),
                    cap.noise_variance
                );
            }
            truth.flush()?;
            if map {
                scene.true_map.write_csv(&dir.join("map.csv"))?;
            }
        }
        Cmd::Run { common } => {
            let cfg = common.load()?;
            let report = run_pipeline(&cfg)?;
            let last = |v: &[Option<f64>]| {
                v.last()
                    .copied()
                    .flatten()
                    .map_or("-".to_string(), |x| format!("{x:.3}"))
            };
            println!("trials {}, windows {}", cfg.trials, report.detected_aoas.len());
            println!(
                "final elevation RMSE {} deg, azimuth RMSE {} deg",
                last(&report.aoa.elevation_deg),
                last(&report.aoa.azimuth_deg)
            );
            println!("final localization RMSE {} m", last(&report.localization.rmse_m));
            println!("window errors {}", report.window_errors);
            println!("outputs in {}", cfg.output_dir.display());
        }
        Cmd::Heatmap { common } => {
            let cfg = common.load()?;
            let cells = heatmap(&cfg)?;
            io::write_heatmap(&cfg.output_dir, &cells, cfg.heatmap.step)?;
            println!("{} cells written to {}", cells.len(), cfg.output_dir.display());
        }
        Cmd::CalibrateF {
            common,
            quick,
            n_max,
            model,
        } => {
            let cfg = common.load()?;
            let mut cal = if quick {
                CalibrationConfig::quick()
            } else {
                CalibrationConfig::default()
            };
            cal.seed = cfg.seed;
            if let Some(t) = common.trials {
                cal.trials = t;
            }
            if let Some(n) = n_max {
                cal.n_values = (2..=n).collect();
            }
            let report = calibrate_f(&cfg.geometry()?, &cal)?;
            for (n, rms) in &report.fit_rms {
                println!("N={n}: fit rms {rms:.4} (log10 f)");
            }
            let pass = |b: bool| if b { "pass" } else { "fail" };
            println!("non-increasing in gamma: {}", pass(report.monotone_in_gamma));
            println!("non-decreasing in N: {}", pass(report.monotone_in_n));
            let path = model.unwrap_or_else(|| cfg.output_dir.join("epsilon_model.csv"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            report.model.save(&path)?;
            println!("model written to {}", path.display());
        }
        Cmd::CompareDetectors { common } => {
            let cfg = common.load()?;
            let rows = compare_detectors(&cfg)?;
            io::write_compare(&cfg.output_dir, &rows)?;
            for r in &rows {
                let p = r.p_false.map_or("-".to_string(), |p| format!("{p:.5}"));
                println!(
                    "{:>8} SNR* {:>5} dB  N_out {:>8.1}  P_false {p}",
                    r.detector, r.snr_star_db, r.n_out
                );
            }
            let (wins, total) = proposed_vs_sld(&rows);
            println!("proposed <= sld on {wins} of {total} SNR* points");
        }
        Cmd::AnalyzeBound { out, dz_max, step } => {
            let thetas: Vec<f64> = (1..=8).map(|k| 10.0 * k as f64).collect();
            let rows = analyze_bound(&thetas, step, dz_max)?;
            io::write_bound(&out, &rows)?;
            for r in &rows {
                println!(
                    "theta {:>4} deg: max {:.9} tan^2 {:.9} diff {:.2e} e_max {:.3} m",
                    r.theta_deg,
                    r.numeric_max,
                    r.tan2,
                    (r.numeric_max - r.tan2).abs(),
                    r.e_max
                );
            }
        }
    }
    Ok(())
}
