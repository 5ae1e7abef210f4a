//! Multi-source bookkeeping across windows: direction-to-source assignment,
//! per-source position updates, reliability counters and track expiry.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::gp::{gp_solve, AnchorSummary, GpConfig};
use crate::error::{Error, Result};
use crate::manifold::DirectionBank;
use crate::scene::CityMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Minimum `|u . u_s|` for assigning a direction to source `s`.
    pub xi: f64,
    /// Idle time after which a track is dropped; also the counter reset period (s).
    pub death_time: f64,
    pub gp: GpConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            xi: 10f64.to_radians().cos(),
            death_time: 0.3,
            gp: GpConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < 1.0) || !(self.death_time > 0.0) {
            return Err(Error::Config("tracker needs xi in (0,1) and death_time > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceTrack {
    pub id: u64,
    pub summary: AnchorSummary,
    /// `None` until a second anchor arrives.
    pub position: Option<Vector3<f64>>,
    /// Most recent direction assigned to this source.
    pub last_dir: Vector3<f64>,
    pub hist: u64,
    pub last_seen: f64,
    pub gp_iterations: usize,
    pub diverged: bool,
}

impl SourceTrack {
    pub fn is_pending(&self) -> bool {
        self.position.is_none()
    }
}

/// What one window did to the tracker.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowUpdate {
    /// `(direction index, track id)` pairs updating an existing track.
    pub assigned: Vec<(usize, u64)>,
    /// `(direction index, track id)` pairs that opened a new track.
    pub created: Vec<(usize, u64)>,
    pub purged: Vec<u64>,
    pub counters_reset: bool,
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    /// Tracks in increasing id order.
    pub tracks: Vec<SourceTrack>,
    pub processed_windows: u64,
    pub cfg: TrackerConfig,
    /// Time origin of the counter reset epochs (s).
    pub epoch_origin: f64,
    next_id: u64,
    epoch: Option<i64>,
}

impl TrackerState {
    /// Counters are reset every `death_time` seconds counted from
    /// `epoch_origin`.
    pub fn new(cfg: TrackerConfig, epoch_origin: f64) -> Result<Self> {
        cfg.validate()?;
        if !epoch_origin.is_finite() {
            return Err(Error::Config("epoch origin must be finite".into()));
        }
        Ok(Self {
            tracks: Vec::new(),
            processed_windows: 0,
            cfg,
            epoch_origin,
            next_id: 1,
            epoch: None,
        })
    }

    pub fn track(&self, id: u64) -> Option<&SourceTrack> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// `hist / processed_windows`, 0 before any window.
    pub fn reliability(&self, track: &SourceTrack) -> f64 {
        if self.processed_windows == 0 {
            0.0
        } else {
            (track.hist as f64 / self.processed_windows as f64).min(1.0)
        }
    }

    /// Last known directions seen from `r`: toward the position estimate for
    /// located sources, the single assigned direction for pending ones.
    pub fn direction_bank(&self, r: &Vector3<f64>) -> DirectionBank {
        let mut bank = DirectionBank::default();
        for t in &self.tracks {
            let d = match t.position {
                Some(p) if (p - r).norm() > 0.0 => (p - r).normalize(),
                _ => t.last_dir,
            };
            bank.push(t.id, d);
        }
        bank
    }

    /// Positions of located sources, `(id, position)`.
    pub fn located(&self) -> Vec<(u64, Vector3<f64>)> {
        self.tracks
            .iter()
            .filter_map(|t| t.position.map(|p| (t.id, p)))
            .collect()
    }

    fn epoch_of(&self, t: f64) -> i64 {
        ((t - self.epoch_origin) / self.cfg.death_time).floor() as i64
    }

    /// Processes the refined unit directions of one window observed from
    /// array position `r` at time `t`.
    pub fn assign_and_update(
        &mut self,
        dirs: &[Vector3<f64>],
        r: &Vector3<f64>,
        t: f64,
        map: &CityMap,
    ) -> Result<WindowUpdate> {
        let mut upd = WindowUpdate::default();
        let epoch = self.epoch_of(t);
        if self.epoch.is_some_and(|e| epoch > e) {
            for tr in &mut self.tracks {
                tr.hist = 0;
            }
            self.processed_windows = 0;
            upd.counters_reset = true;
        }
        self.epoch = Some(self.epoch.map_or(epoch, |e| e.max(epoch)));

        let death = self.cfg.death_time;
        upd.purged = self
            .tracks
            .iter()
            .filter(|tr| t - tr.last_seen > death)
            .map(|tr| tr.id)
            .collect();
        self.tracks.retain(|tr| t - tr.last_seen <= death);
        self.processed_windows += 1;

        let bank = self.direction_bank(r);
        // best (track slot, dot) per direction
        let mut claims: Vec<Option<(usize, f64)>> = Vec::with_capacity(dirs.len());
        for u in dirs {
            let mut best: Option<(usize, f64)> = None;
            for (k, d) in bank.dirs.iter().enumerate() {
                let m = u.dot(d).abs();
                if best.is_none_or(|(_, bm)| m > bm) {
                    best = Some((k, m));
                }
            }
            claims.push(best.filter(|&(_, m)| m >= self.cfg.xi));
        }
        // one direction per track: the most aligned, earliest on ties
        let mut winner: Vec<Option<(usize, f64)>> = vec![None; bank.len()];
        for (n, c) in claims.iter().enumerate() {
            if let Some((k, m)) = *c {
                if winner[k].is_none_or(|(_, wm)| m > wm) {
                    winner[k] = Some((n, m));
                }
            }
        }
        let mut is_assigned = vec![false; dirs.len()];
        for (k, w) in winner.iter().enumerate() {
            if let Some((n, _)) = *w {
                is_assigned[n] = true;
                let tr = &mut self.tracks[k];
                let u = dirs[n];
                tr.summary.push(r, &u);
                tr.last_dir = u;
                tr.hist += 1;
                tr.last_seen = t;
                if tr.summary.count >= 2 {
                    let sol = gp_solve(&tr.summary, map, &self.cfg.gp)?;
                    tr.position = Some(sol.position);
                    tr.gp_iterations = sol.iterations;
                    tr.diverged = sol.diverged;
                }
                upd.assigned.push((n, tr.id));
            }
        }
        upd.assigned.sort_unstable();
        for (n, u) in dirs.iter().enumerate() {
            if is_assigned[n] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(SourceTrack {
                id,
                summary: AnchorSummary::from_anchor(r, u),
                position: None,
                last_dir: *u,
                hist: 1,
                last_seen: t,
                gp_iterations: 0,
                diverged: false,
            });
            upd.created.push((n, id));
        }
        Ok(upd)
    }

    /// Appends rows `window,id,x,y,z,reliability,hist` (empty coordinates for
    /// pending tracks).
    pub fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>, window: usize) -> Result<()> {
        for tr in &self.tracks {
            let (x, y, z) = match tr.position {
                Some(p) => (p.x.to_string(), p.y.to_string(), p.z.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                window.to_string(),
                tr.id.to_string(),
                x,
                y,
                z,
                self.reliability(tr).to_string(),
                tr.hist.to_string(),
            ])?;
        }
        Ok(())
    }
}

pub const TRACK_CSV_HEADER: [&str; 7] = ["window", "id", "x", "y", "z", "reliability", "hist"];

/// Writes one table from per-window tracker snapshots.
pub fn write_track_csv(path: &Path, snapshots: &[(usize, TrackerState)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACK_CSV_HEADER)?;
    for (i, s) in snapshots {
        s.write_rows(&mut w, *i)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> CityMap {
        CityMap::flat([-1000.0, -1000.0], 2000.0, 10.0).unwrap()
    }

    fn tracker() -> TrackerState {
        TrackerState::new(TrackerConfig::default(), 0.1).unwrap()
    }

    #[test]
    fn same_direction_is_assigned() {
        let mut tr = tracker();
        let map = flat();
        let r = Vector3::new(0.0, 0.0, 500.0);
        let u = (Vector3::new(100.0, 50.0, 0.0) - r).normalize();
        let a = tr.assign_and_update(&[u], &r, 0.115, &map).unwrap();
        assert_eq!(a.created, vec![(0, 1)]);
        assert!(tr.tracks[0].is_pending());
        let b = tr.assign_and_update(&[u], &r, 0.145, &map).unwrap();
        assert_eq!(b.assigned, vec![(0, 1)]);
        assert_eq!(tr.tracks[0].hist, 2);
        assert!(!tr.tracks[0].is_pending());
    }

    #[test]
    fn orthogonal_direction_opens_a_track() {
        let mut tr = tracker();
        let map = flat();
        let r = Vector3::new(0.0, 0.0, 500.0);
        tr.assign_and_update(&[-Vector3::z()], &r, 0.115, &map).unwrap();
        let up = tr.assign_and_update(&[Vector3::x()], &r, 0.145, &map).unwrap();
        assert_eq!(up.created, vec![(0, 2)]);
        assert_eq!(tr.tracks.len(), 2);
    }

    #[test]
    fn reliability_is_hist_over_windows() {
        let mut tr = tracker();
        let map = flat();
        let r = Vector3::new(0.0, 0.0, 500.0);
        let u = -Vector3::z();
        for (k, dirs) in [vec![u], vec![u], vec![], vec![u]].iter().enumerate() {
            tr.assign_and_update(dirs, &r, 0.115 + 0.03 * k as f64, &map).unwrap();
        }
        assert_eq!(tr.tracks[0].hist, 3);
        assert!((tr.reliability(&tr.tracks[0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn duplicate_claims_keep_the_best() {
        let mut tr = tracker();
        let map = flat();
        let r = Vector3::new(0.0, 0.0, 500.0);
        tr.assign_and_update(&[-Vector3::z()], &r, 0.115, &map).unwrap();
        let near = Vector3::new(0.05, 0.0, -1.0).normalize();
        let nearer = Vector3::new(0.01, 0.0, -1.0).normalize();
        let up = tr.assign_and_update(&[near, nearer], &r, 0.145, &map).unwrap();
        assert_eq!(up.assigned, vec![(1, 1)]);
        assert_eq!(up.created, vec![(0, 2)]);
    }

    #[test]
    fn idle_tracks_die_and_counters_reset() {
        let mut tr = tracker();
        let map = flat();
        let r = Vector3::new(0.0, 0.0, 500.0);
        tr.assign_and_update(&[-Vector3::z()], &r, 0.115, &map).unwrap();
        let up = tr.assign_and_update(&[Vector3::x()], &r, 0.42, &map).unwrap();
        assert_eq!(up.purged, vec![1]);
        assert!(up.counters_reset);
        assert_eq!(tr.processed_windows, 1);
        assert_eq!(tr.tracks.len(), 1);
    }
}
