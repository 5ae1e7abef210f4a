// Procedural city, reference sources stamped onto it, and the array.

use aoaloc::scene::{build_city_map, ArrayGeometry, CityParams, SourcePlacement, SourceSet};
use aoaloc::signal::steering_vector;

pub fn run_example() -> aoaloc::Result<()> {
    let params = CityParams {
        extent: 1200.0,
        origin: [-600.0, -600.0],
        cell_size: 2.0,
        ..CityParams::default()
    };
    let mut map = build_city_map(&params)?;
    let mut sources = SourceSet::reference();
    sources
        .sources
        .retain(|s| s.position.x.abs() < 600.0 && s.position.y.abs() < 600.0);
    sources.place_on(&mut map, SourcePlacement::Stamp, [10.0, 10.0]);
    println!(
        "map {:?} cells, height spread {:.2} m",
        map.dims(),
        map.max_height_difference()
    );
    for s in &sources.sources {
        let p = s.position;
        println!(
            "source at ({:7.1}, {:7.1}) z={:5.2}, map {:5.2}",
            p.x,
            p.y,
            p.z,
            map.height_at(p.x, p.y)
        );
    }
    let geom = ArrayGeometry::uca(6, 0.2, 0.5e9)?;
    let a = steering_vector(&geom, 150f64.to_radians(), 0.3);
    println!(
        "steering vector norm^2 = {:.6} (M = {})",
        a.norm_squared(),
        geom.elements()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
