//! Labels the realized world of a two-world question from signals and
//! forecasts alone.

use kdmi::cli::expected_world_labels;
use kdmi::simulator::{generate_single_task, two_world_spectral};
use kdmi::single_task::spectral_truth_serum;

fn main() {
    let world = two_world_spectral();
    let expected = expected_world_labels(&world.worlds).unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let (d, realized) = generate_single_task(&world, 500, seed).unwrap();
        let s = spectral_truth_serum(&d).unwrap();
        hits += usize::from(s.label == Some(expected[realized]));
        println!(
            "seed {seed}: world {realized}, label {:?}, eigenvalue {:.4}, gap {:.4}, residual {:.1e}",
            s.label, s.eigenvalue, s.gap, s.residual
        );
    }
    println!("{hits}/10 worlds recovered");
}
