//! Clusters a CSV of points (or a built-in fixture) and prints the result.
//!
//! cargo run --example cluster_points -- [path.csv | fixture-name]

use kdmi::{dmi_cluster, fixtures, SolverConfig};

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "kcofactors_30x2".into());
    let text = match fixtures::fixture_csv(&arg) {
        Some(t) => t.to_string(),
        None => std::fs::read_to_string(&arg).expect("readable CSV"),
    };
    let points = kdmi::cli::parse_csv_matrix(&text).expect("numeric CSV");
    let result = dmi_cluster(&points, &SolverConfig::default()).expect("clusterable input");
    println!("k = {} via {:?}", result.k, result.solver_tag);
    println!("score = {:.6}", result.score);
    for c in 0..result.k {
        println!("cluster {c}: {:?}", result.assignment.members(c));
    }
}
