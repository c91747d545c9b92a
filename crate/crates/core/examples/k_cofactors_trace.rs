//! Runs the local search from a few random starts and prints each score
//! trajectory next to the exact optimum.

use kdmi::clustering::{augment_and_pick, k_cofactors, local_max_certificate, random_init};
use kdmi::{dmi_cluster, fixtures, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let a = fixtures::kcofactors_30x2();
    let a_tilde = augment_and_pick(&a).unwrap().matrix;
    let optimum = dmi_cluster(&a, &SolverConfig::default()).unwrap().score;
    println!("exact optimum {optimum:.4}");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for start in 0..5 {
        let init = random_init(a.rows(), 3, &mut rng).unwrap();
        match k_cofactors(&a_tilde, &init, 100) {
            Ok(run) => {
                let trace: Vec<String> = run.diagnostics.score_trajectory.iter().map(|s| format!("{s:.2}")).collect();
                let cert = local_max_certificate(&a_tilde, &run.assignment, 1e-12).unwrap();
                println!(
                    "start {start}: {} ({:?}, local max: {})",
                    trace.join(" -> "),
                    run.diagnostics.termination,
                    cert.is_local_max()
                );
            }
            Err(e) => println!("start {start}: {e}"),
        }
    }
}
