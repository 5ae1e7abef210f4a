//! Received-signal synthesis for the moving array.
//!
//! Each source emits a sparse train of short real pulses at Poisson-distributed
//! start times. Within one processing window the array sees every source from
//! a fixed direction (the one at the window midpoint) while path loss, carrier
//! phase and propagation delay follow the true range sample by sample.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::rng::{self, Purpose};
use crate::scene::{ArrayGeometry, SourceSet, Trajectory, SPEED_OF_LIGHT};

/// Unit vector toward elevation `theta` (from +z) and azimuth `phi`.
pub fn unit_direction(theta: f64, phi: f64) -> Result<Vector3<f64>> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) || !(0.0..=2.0 * std::f64::consts::PI).contains(&phi) {
        return Err(Error::Argument(format!(
            "angles out of range: theta={theta}, phi={phi}"
        )));
    }
    Ok(direction(theta, phi))
}

pub(crate) fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Elevation in `[0, pi]` and azimuth in `[0, 2pi)` of a nonzero vector.
pub fn angles_of(u: &Vector3<f64>) -> (f64, f64) {
    let n = u.norm();
    let theta = (u.z / n).clamp(-1.0, 1.0).acos();
    let mut phi = u.y.atan2(u.x);
    if phi < 0.0 {
        phi += 2.0 * std::f64::consts::PI;
    }
    if phi >= 2.0 * std::f64::consts::PI {
        phi = 0.0;
    }
    (theta, phi)
}

/// `exp(j K D^T u)` for a unit direction `u`.
pub fn steering_from_direction(geom: &ArrayGeometry, u: &Vector3<f64>) -> CVector {
    let k = geom.wave_number();
    CVector::from_iterator(
        geom.elements(),
        geom.offsets().iter().map(|d| C64::from_polar(1.0, k * d.dot(u))),
    )
}

pub fn steering_vector(geom: &ArrayGeometry, theta: f64, phi: f64) -> CVector {
    steering_from_direction(geom, &direction(theta, phi))
}

/// Isotropic receive gain.
pub fn isotropic(_theta: f64, _phi: f64) -> f64 {
    1.0
}

/// Complex path loss and gain `G / (sqrt(4 pi) R) * exp(-j K R)`.
pub fn path_gain(range: f64, theta: f64, phi: f64, gain: impl Fn(f64, f64) -> f64, k: f64) -> Result<C64> {
    if !(range > 0.0) {
        return Err(Error::Domain(format!("range must be positive, got {range}")));
    }
    let mag = gain(theta, phi) / ((4.0 * std::f64::consts::PI).sqrt() * range);
    Ok(C64::from_polar(mag, -((k * range) % (2.0 * std::f64::consts::PI))))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PulseShape {
    /// One period of a sine, `sqrt(2P) sin(2 pi t / T_p)`.
    #[default]
    Sine,
    /// Constant `sqrt(P)` over the pulse.
    Rectangular,
}

impl PulseShape {
    /// Amplitude at `t` seconds into a pulse of duration `tp` and power `power`.
    pub fn eval(self, t: f64, tp: f64, power: f64) -> f64 {
        if !(0.0..tp).contains(&t) {
            return 0.0;
        }
        match self {
            PulseShape::Sine => (2.0 * power).sqrt() * (2.0 * std::f64::consts::PI * t / tp).sin(),
            PulseShape::Rectangular => power.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub start_times: Vec<f64>,
    pub shape: PulseShape,
    pub pulse_duration: f64,
    pub power: f64,
}

impl PulseTrain {
    pub fn value_at(&self, t: f64) -> f64 {
        // pulses never overlap in practice, but sum in case they do
        let hi = self.start_times.partition_point(|&s| s <= t);
        let mut v = 0.0;
        for &s in self.start_times[..hi].iter().rev() {
            if t - s >= self.pulse_duration {
                break;
            }
            v += self.shape.eval(t - s, self.pulse_duration, self.power);
        }
        v
    }
}

/// Poisson arrivals with mean spacing `t_avg` over `[0, span)`.
pub fn sample_pulse_train<R: Rng>(t_avg: f64, span: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(t_avg > 0.0) {
        return Err(Error::Argument("mean inter-pulse interval must be positive".into()));
    }
    let exp = Exp::new(1.0 / t_avg).map_err(|e| Error::Argument(e.to_string()))?;
    let mut out = Vec::new();
    let mut t = exp.sample(rng);
    while t < span {
        out.push(t);
        t += exp.sample(rng);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub variance: f64,
}

/// `sigma_v^2` that realizes the requested SNR* at the initial receiver
/// position.
pub fn noise_variance_for_snr_star(sources: &SourceSet, r0: &Vector3<f64>, snr_star_db: f64) -> Result<f64> {
    Ok(received_peak_power(sources, r0)? / 10f64.powf(snr_star_db / 10.0))
}

/// Sum over sources of `P_n / (4 pi R_n^2)`.
pub fn received_peak_power(sources: &SourceSet, r0: &Vector3<f64>) -> Result<f64> {
    let mut total = 0.0;
    for s in &sources.sources {
        let r2 = (r0 - s.position).norm_squared();
        if r2 == 0.0 {
            return Err(Error::Domain("source coincides with the receiver".into()));
        }
        total += s.pulse_power / (4.0 * std::f64::consts::PI * r2);
    }
    Ok(total)
}

/// Standard deviations of the receiver imperfections; `None` disables one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Imperfections {
    /// Array yaw error (rad), applied to the physical array.
    pub yaw_sd: Option<f64>,
    /// Reported position error per axis (m).
    pub position_sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub sample_rate: f64,
    /// Evaluate range, delay and path loss at the window midpoint for every
    /// sample, making each source's block exactly rank one.
    pub freeze_geometry: bool,
    pub shape: PulseShape,
    /// Receiver noise; skipped entirely when the variance is 0.
    pub noise: NoiseModel,
    pub imperfections: Imperfections,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            sample_rate: 10e6,
            freeze_geometry: false,
            shape: PulseShape::Sine,
            noise: NoiseModel { variance: 0.0 },
            imperfections: Imperfections::default(),
        }
    }
}

/// Ground truth of one source in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTruth {
    pub theta: f64,
    pub phi: f64,
    pub range: f64,
    /// Columns where this source's pulse is nonzero.
    pub active_columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayPose {
    pub position: Vector3<f64>,
    pub yaw: f64,
}

/// Samples of one window plus the truth needed to score it.
#[derive(Debug, Clone)]
pub struct WindowCapture {
    pub index: usize,
    pub midpoint: f64,
    pub samples: CMatrix,
    /// Pose as reported to the receiver (position noise included, yaw 0).
    pub reported_pose: ArrayPose,
    /// Pose the samples were actually generated with.
    pub true_pose: ArrayPose,
    /// Noise-free received signal, nonzero columns only.
    pub clean: BTreeMap<usize, CVector>,
    pub truth: Vec<SourceTruth>,
    pub noise_variance: f64,
}

impl WindowCapture {
    pub fn elements(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Noise-free block as a dense matrix.
    pub fn clean_dense(&self) -> CMatrix {
        let mut x = CMatrix::zeros(self.samples.nrows(), self.samples.ncols());
        for (&c, v) in &self.clean {
            x.set_column(c, v);
        }
        x
    }

    /// Signal-to-noise ratio of the given columns computed from the separated
    /// signal and noise parts.
    pub fn true_snr(&self, columns: &[usize]) -> f64 {
        let mut sig = 0.0;
        let mut noise = 0.0;
        for &c in columns {
            let x = self.clean.get(&c);
            for m in 0..self.samples.nrows() {
                let xv = x.map(|v| v[m]).unwrap_or_default();
                sig += xv.norm_sqr();
                noise += (self.samples[(m, c)] - xv).norm_sqr();
            }
        }
        if noise > 0.0 {
            sig / noise
        } else {
            f64::INFINITY
        }
    }

    /// Little-endian binary dump: `M`, `G`, `index` as u64, midpoint as f64,
    /// then row-major interleaved re/im f64 pairs.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let (m, g) = self.samples.shape();
        f.write_all(&(m as u64).to_le_bytes())?;
        f.write_all(&(g as u64).to_le_bytes())?;
        f.write_all(&(self.index as u64).to_le_bytes())?;
        f.write_all(&self.midpoint.to_le_bytes())?;
        for r in 0..m {
            for c in 0..g {
                let z = self.samples[(r, c)];
                f.write_all(&z.re.to_le_bytes())?;
                f.write_all(&z.im.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["element", "column", "re", "im"])?;
        for c in 0..self.samples.ncols() {
            for r in 0..self.samples.nrows() {
                let z = self.samples[(r, c)];
                w.write_record([r.to_string(), c.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a block written by [`WindowCapture::write_binary`]; returns
/// `(index, midpoint, samples)`.
pub fn read_binary(path: &Path) -> Result<(usize, f64, CMatrix)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 {
        return Err(Error::Format("sample file shorter than its header".into()));
    }
    let word = |i: usize| -> [u8; 8] { bytes[i * 8..i * 8 + 8].try_into().expect("8 bytes") };
    let m = u64::from_le_bytes(word(0)) as usize;
    let g = u64::from_le_bytes(word(1)) as usize;
    let index = u64::from_le_bytes(word(2)) as usize;
    let mid = f64::from_le_bytes(word(3));
    if bytes.len() != 32 + m * g * 16 {
        return Err(Error::Format(format!(
            "expected {} bytes for a {m}x{g} block",
            32 + m * g * 16
        )));
    }
    let mut out = CMatrix::zeros(m, g);
    for r in 0..m {
        for c in 0..g {
            let k = 4 + 2 * (r * g + c);
            out[(r, c)] = C64::new(f64::from_le_bytes(word(k)), f64::from_le_bytes(word(k + 1)));
        }
    }
    Ok((index, mid, out))
}

/// Window synthesizer for a fixed scene. Pulse trains are drawn once per
/// source over the whole run so that consecutive windows see one continuous
/// emission.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub geometry: ArrayGeometry,
    pub trajectory: Trajectory,
    pub sources: SourceSet,
    pub options: SynthesisOptions,
    pub seed: u64,
    trains: Vec<PulseTrain>,
}

impl Simulator {
    pub fn new(
        geometry: ArrayGeometry,
        trajectory: Trajectory,
        sources: SourceSet,
        options: SynthesisOptions,
        seed: u64,
    ) -> Result<Self> {
        trajectory.validate()?;
        sources.validate()?;
        if !(options.sample_rate > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if !(options.noise.variance >= 0.0) {
            return Err(Error::Config("noise variance must be non-negative".into()));
        }
        let span = trajectory.end_time();
        let trains = sources
            .sources
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let mut r = rng::stream(seed, Purpose::Pulses, n as u64, 0);
                Ok(PulseTrain {
                    start_times: sample_pulse_train(sources.mean_inter_pulse, span, &mut r)?,
                    shape: options.shape,
                    pulse_duration: s.pulse_duration,
                    power: s.pulse_power,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geometry,
            trajectory,
            sources,
            options,
            seed,
            trains,
        })
    }

    pub fn trains(&self) -> &[PulseTrain] {
        &self.trains
    }

    /// Samples per window, `floor(T f_s)`.
    pub fn samples_per_window(&self) -> usize {
        (self.trajectory.window_duration * self.options.sample_rate + 1e-9).floor() as usize
    }

    fn yaw_for(&self, i: usize) -> f64 {
        match self.options.imperfections.yaw_sd {
            Some(sd) if sd > 0.0 => {
                let mut r = rng::stream(self.seed, Purpose::Yaw, i as u64, 0);
                Normal::new(0.0, sd).expect("finite sd").sample(&mut r)
            }
            _ => 0.0,
        }
    }

    fn position_error(&self, i: usize) -> Vector3<f64> {
        match self.options.imperfections.position_sd {
            Some(sd) if sd > 0.0 => {
                let mut r = rng::stream(self.seed, Purpose::Position, i as u64, 0);
                let n = Normal::new(0.0, sd).expect("finite sd");
                Vector3::new(n.sample(&mut r), n.sample(&mut r), n.sample(&mut r))
            }
            _ => Vector3::zeros(),
        }
    }

    /// Synthesizes window `i` (1-based).
    pub fn synthesize_window(&self, i: usize) -> Result<WindowCapture> {
        let start = self.trajectory.window_start(i)?;
        let mid = self.trajectory.window_midpoint(i)?;
        let fs = self.options.sample_rate;
        let g_len = self.samples_per_window();
        let m = self.geometry.elements();
        let k = self.geometry.wave_number();

        let yaw = self.yaw_for(i);
        let physical = if yaw != 0.0 {
            self.geometry.rotated_yaw(yaw)
        } else {
            self.geometry.clone()
        };
        let r_mid = self.trajectory.position_at(mid);

        let mut clean: BTreeMap<usize, CVector> = BTreeMap::new();
        let mut truth = Vec::with_capacity(self.sources.len());
        for (src, train) in self.sources.sources.iter().zip(&self.trains) {
            let to_src = src.position - r_mid;
            let range_mid = to_src.norm();
            if range_mid == 0.0 {
                return Err(Error::Domain("source coincides with the receiver".into()));
            }
            let (theta, phi) = angles_of(&to_src);
            let a = steering_from_direction(&physical, &(to_src / range_mid));
            let mut active = Vec::new();

            let tau_mid = range_mid / SPEED_OF_LIGHT;
            for &tj in &train.start_times {
                // coarse column span of this pulse, widened for the delay drift
                let arrive = tj + tau_mid;
                if arrive + train.pulse_duration < start - 1e-6
                    || arrive > start + self.trajectory.window_duration + 1e-6
                {
                    continue;
                }
                let lo = (((arrive - start) * fs).floor() as i64 - 4).max(0) as usize;
                let hi =
                    ((((arrive + train.pulse_duration - start) * fs).ceil() as i64 + 4).max(0) as usize).min(g_len);
                for c in lo..hi {
                    let t = start + (c + 1) as f64 / fs;
                    let range = if self.options.freeze_geometry {
                        range_mid
                    } else {
                        (src.position - self.trajectory.position_at(t)).norm()
                    };
                    let amp = train
                        .shape
                        .eval(t - range / SPEED_OF_LIGHT - tj, train.pulse_duration, train.power);
                    if amp == 0.0 {
                        continue;
                    }
                    let beta = path_gain(range, theta, phi, isotropic, k)?;
                    let s = beta * amp;
                    let col = clean.entry(c).or_insert_with(|| CVector::zeros(m));
                    col.axpy(s, &a, C64::new(1.0, 0.0));
                    active.push(c);
                }
            }
            active.sort_unstable();
            active.dedup();
            truth.push(SourceTruth {
                theta,
                phi,
                range: range_mid,
                active_columns: active,
            });
        }

        let var = self.options.noise.variance;
        let mut samples = if var > 0.0 {
            let mut r = rng::stream(self.seed, Purpose::Noise, i as u64, 0);
            let s = (var / 2.0).sqrt();
            let normal = rand_distr::StandardNormal;
            CMatrix::from_fn(m, g_len, |_, _| {
                let re: f64 = r.sample(normal);
                let im: f64 = r.sample(normal);
                C64::new(re * s, im * s)
            })
        } else {
            CMatrix::zeros(m, g_len)
        };
        for (&c, v) in &clean {
            let mut col = samples.column_mut(c);
            col += v;
        }

        Ok(WindowCapture {
            index: i,
            midpoint: mid,
            samples,
            reported_pose: ArrayPose {
                position: r_mid + self.position_error(i),
                yaw: 0.0,
            },
            true_pose: ArrayPose { position: r_mid, yaw },
            clean,
            truth,
            noise_variance: var,
        })
    }
}
