//! Writes an SVG of the 30-point fixture's clustering.
//!
//! cargo run --example plot_svg -- out.svg

use kdmi::cli::render_svg;
use kdmi::{dmi_cluster, fixtures, SolverConfig};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "clusters.svg".into());
    let a = fixtures::kcofactors_30x2();
    let r = dmi_cluster(&a, &SolverConfig::default()).unwrap();
    std::fs::write(&out, render_svg(&a, &r.assignment)).unwrap();
    println!("wrote {out}");
}
