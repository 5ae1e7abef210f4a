//! Matching of estimates to ground truth and the error series built on it.

use nalgebra::Vector3;

use super::pipeline::{TrialRecord, TruthAngle};
use crate::signal::unit_direction;

/// Wraps an angle difference to `(-pi, pi]`.
pub fn wrap_pi(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = x.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// Angle between two `(theta, phi)` directions (rad).
pub fn great_circle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ua, ub) = match (unit_direction(a.0, a.1), unit_direction(b.0, b.1)) {
        (Ok(x), Ok(y)) => (x, y),
        _ => return f64::INFINITY,
    };
    // atan2 form stays accurate for nearly equal directions
    ua.cross(&ub).norm().atan2(ua.dot(&ub))
}

/// Greedy one-to-one matching: repeatedly takes the closest remaining pair
/// with distance `<= radius`. Returns `(left, right, distance)` sorted by
/// distance; ties keep the lower indices first.
pub fn greedy_match(dist: &[Vec<f64>], radius: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, row) in dist.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let rows = dist.len();
    let cols = dist.iter().map(Vec::len).max().unwrap_or(0);
    let (mut used_i, mut used_j) = (vec![false; rows], vec![false; cols]);
    let mut out = Vec::new();
    for (d, i, j) in pairs {
        if !used_i[i] && !used_j[j] {
            used_i[i] = true;
            used_j[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

/// One matched estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleError {
    pub source: usize,
    pub d_theta: f64,
    /// Wrapped to `(-pi, pi]`.
    pub d_phi: f64,
}

/// Matches estimates to the true angles of one window within `radius` rad of
/// great-circle distance.
pub fn match_angles(estimates: &[(f64, f64)], truth: &[TruthAngle], radius: f64) -> Vec<AngleError> {
    let dist: Vec<Vec<f64>> = estimates
        .iter()
        .map(|&e| truth.iter().map(|t| great_circle(e, (t.theta, t.phi))).collect())
        .collect();
    greedy_match(&dist, radius)
        .into_iter()
        .map(|(i, j, _)| AngleError {
            source: truth[j].source,
            d_theta: estimates[i].0 - truth[j].theta,
            d_phi: wrap_pi(estimates[i].1 - truth[j].phi),
        })
        .collect()
}

/// Angle estimates and truth of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAngles {
    pub estimates: Vec<(f64, f64)>,
    pub truth: Vec<TruthAngle>,
}

/// Per-window angle RMSE in degrees; `None` where nothing matched.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AoaRmse {
    pub elevation_deg: Vec<Option<f64>>,
    pub azimuth_deg: Vec<Option<f64>>,
    /// Matched pairs entering the RMSE per window, summed over trials.
    pub matched: Vec<usize>,
}

/// Angle RMSE series pooled over trials (outer slice). Within a trial only
/// sources matched in at least `sufficiency` times as many windows as the
/// most matched source contribute.
pub fn aoa_rmse(trials: &[Vec<WindowAngles>], radius_deg: f64, sufficiency: f64) -> AoaRmse {
    let n = trials.iter().map(Vec::len).max().unwrap_or(0);
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); n];
    let radius = radius_deg.to_radians();
    for windows in trials {
        let matches: Vec<Vec<AngleError>> = windows
            .iter()
            .map(|w| match_angles(&w.estimates, &w.truth, radius))
            .collect();
        let sources = windows
            .iter()
            .flat_map(|w| w.truth.iter().map(|t| t.source + 1))
            .max()
            .unwrap_or(0);
        let mut counts = vec![0usize; sources];
        for m in matches.iter().flatten() {
            counts[m.source] += 1;
        }
        let best = counts.iter().copied().max().unwrap_or(0);
        let enough = |s: usize| best > 0 && counts[s] as f64 >= sufficiency * best as f64;
        for (k, ms) in matches.iter().enumerate() {
            for m in ms.iter().filter(|m| enough(m.source)) {
                sums[k].0 += m.d_theta * m.d_theta;
                sums[k].1 += m.d_phi * m.d_phi;
                sums[k].2 += 1;
            }
        }
    }
    let rms = |s: f64, c: usize| (c > 0).then(|| (s / c as f64).sqrt().to_degrees());
    AoaRmse {
        elevation_deg: sums.iter().map(|s| rms(s.0, s.2)).collect(),
        azimuth_deg: sums.iter().map(|s| rms(s.1, s.2)).collect(),
        matched: sums.iter().map(|s| s.2).collect(),
    }
}

/// Position matching of one window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PositionMatch {
    /// `(track index, source index, distance)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub spurious: usize,
    pub missed: usize,
}

pub fn match_positions(tracks: &[Vector3<f64>], truth: &[Vector3<f64>], radius: f64) -> PositionMatch {
    let dist: Vec<Vec<f64>> = tracks
        .iter()
        .map(|p| truth.iter().map(|q| (p - q).norm()).collect())
        .collect();
    let pairs = greedy_match(&dist, radius);
    PositionMatch {
        spurious: tracks.len() - pairs.len(),
        missed: truth.len() - pairs.len(),
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalizationRmse {
    pub rmse_m: Vec<Option<f64>>,
    pub matched: Vec<usize>,
    pub spurious: Vec<usize>,
    pub missed: Vec<usize>,
}

/// Per-window localization RMSE of the located tracks, pooled over trials.
/// Each trial supplies, per window, the track positions and the truth.
pub fn localization_rmse(trials: &[Vec<(Vec<Vector3<f64>>, Vec<Vector3<f64>>)>], radius: f64) -> LocalizationRmse {
    let n = trials.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = LocalizationRmse {
        rmse_m: vec![None; n],
        matched: vec![0; n],
        spurious: vec![0; n],
        missed: vec![0; n],
    };
    let mut sq = vec![0.0; n];
    for windows in trials {
        for (k, (tracks, truth)) in windows.iter().enumerate() {
            let m = match_positions(tracks, truth, radius);
            sq[k] += m.pairs.iter().map(|p| p.2 * p.2).sum::<f64>();
            out.matched[k] += m.pairs.len();
            out.spurious[k] += m.spurious;
            out.missed[k] += m.missed;
        }
    }
    for k in 0..n {
        if out.matched[k] > 0 {
            out.rmse_m[k] = Some((sq[k] / out.matched[k] as f64).sqrt());
        }
    }
    out
}

pub fn window_angles(trial: &TrialRecord) -> Vec<WindowAngles> {
    trial
        .windows
        .iter()
        .map(|w| WindowAngles {
            estimates: w.estimates.clone(),
            truth: w.truth.clone(),
        })
        .collect()
}

pub fn window_positions(trial: &TrialRecord) -> Vec<(Vec<Vector3<f64>>, Vec<Vector3<f64>>)> {
    trial
        .windows
        .iter()
        .map(|w| (w.located().into_iter().map(|(_, p)| p).collect(), trial.sources.clone()))
        .collect()
}

/// True sources matched, within `radius`, by a track whose reliability
/// exceeds `min_reliability` in the final window.
pub fn reliable_sources(trial: &TrialRecord, radius: f64, min_reliability: f64) -> Vec<usize> {
    let Some(last) = trial.windows.last() else {
        return Vec::new();
    };
    let tracks: Vec<Vector3<f64>> = last
        .tracks
        .iter()
        .filter(|t| t.reliability > min_reliability)
        .filter_map(|t| t.position)
        .collect();
    let mut s: Vec<usize> = match_positions(&tracks, &trial.sources, radius)
        .pairs
        .iter()
        .map(|p| p.1)
        .collect();
    s.sort_unstable();
    s
}

/// Final-window reliability per true source: the reliability of the track
/// matched to it, 0 when none is.
pub fn source_reliability(trial: &TrialRecord, radius: f64) -> Vec<f64> {
    let mut out = vec![0.0; trial.sources.len()];
    let Some(last) = trial.windows.last() else {
        return out;
    };
    let located: Vec<_> = last.tracks.iter().filter(|t| t.position.is_some()).collect();
    let pos: Vec<Vector3<f64>> = located.iter().filter_map(|t| t.position).collect();
    for (i, j, _) in match_positions(&pos, &trial.sources, radius).pairs {
        out[j] = located[i].reliability;
    }
    out
}

/// Summary of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    /// Mean number of angle estimates per window.
    pub detected_aoas: Vec<f64>,
    pub aoa: AoaRmse,
    pub localization: LocalizationRmse,
    /// Mean final reliability per configured source (trial 0 ordering).
    pub reliability: Vec<f64>,
    pub window_seconds_mean: f64,
    pub window_seconds_max: f64,
    pub window_errors: usize,
}

pub fn summarize(trials: &[TrialRecord], aoa_match_deg: f64, pos_match_m: f64, sufficiency: f64) -> MetricsReport {
    let n = trials.iter().map(|t| t.windows.len()).max().unwrap_or(0);
    let mut detected = vec![0.0; n];
    let mut secs = Vec::new();
    let mut errors = 0;
    for t in trials {
        for (k, w) in t.windows.iter().enumerate() {
            detected[k] += w.estimates.len() as f64 / trials.len() as f64;
            secs.push(w.seconds);
            errors += usize::from(w.error.is_some());
        }
    }
    let angles: Vec<_> = trials.iter().map(window_angles).collect();
    let positions: Vec<_> = trials.iter().map(window_positions).collect();
    let sources = trials.iter().map(|t| t.sources.len()).max().unwrap_or(0);
    let mut reliability = vec![0.0; sources];
    for t in trials {
        for (s, r) in source_reliability(t, pos_match_m).into_iter().enumerate() {
            reliability[s] += r / trials.len() as f64;
        }
    }
    MetricsReport {
        detected_aoas: detected,
        aoa: aoa_rmse(&angles, aoa_match_deg, sufficiency),
        localization: localization_rmse(&positions, pos_match_m),
        reliability,
        window_seconds_mean: if secs.is_empty() {
            0.0
        } else {
            secs.iter().sum::<f64>() / secs.len() as f64
        },
        window_seconds_max: secs.iter().copied().fold(0.0, f64::max),
        window_errors: errors,
    }
}
