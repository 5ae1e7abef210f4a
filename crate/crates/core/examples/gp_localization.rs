// Bearing-only localization on a height map: direct solve from two
// anchors, then the multi-source tracker fed window by window.

use aoaloc::localization::{gp_solve, AnchorSummary, GpConfig, TrackerConfig, TrackerState};
use aoaloc::scene::CityMap;
use nalgebra::Vector3;

pub fn run_example() -> aoaloc::Result<()> {
    let mut map = CityMap::flat([-500.0, -500.0], 1000.0, 5.0)?;
    map.fill_rect([120.0, -80.0], [20.0, 20.0], 12.0);
    let sources = [Vector3::new(120.0, -80.0, 12.0), Vector3::new(-200.0, 150.0, 0.0)];

    let anchors: Vec<_> = [Vector3::new(0.0, 0.0, 500.0), Vector3::new(40.0, 30.0, 500.0)]
        .iter()
        .map(|r| (*r, (sources[0] - r).normalize()))
        .collect();
    let sol = gp_solve(&AnchorSummary::from_anchors(&anchors), &map, &GpConfig::default())?;
    println!(
        "two anchors: {:?} after {} iterations",
        sol.position.as_slice(),
        sol.iterations
    );

    let mut tracker = TrackerState::new(TrackerConfig::default(), 0.1)?;
    for i in 0..8 {
        let t = 0.115 + 0.03 * i as f64;
        let r = Vector3::new(44.0 * t, 33.0 * t, 500.0);
        let dirs: Vec<_> = sources.iter().map(|s| (s - r).normalize()).collect();
        tracker.assign_and_update(&dirs, &r, t, &map)?;
    }
    for tr in &tracker.tracks {
        let p = tr.position.unwrap_or_default();
        println!(
            "track {}: ({:.3}, {:.3}, {:.3}), reliability {:.2}",
            tr.id,
            p.x,
            p.y,
            p.z,
            tracker.reliability(tr)
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
