//! Clusters the expected answers of honest and strategic crowds: the
//! partition is the same and the score shrinks by |det S|.

use kdmi::simulator::{example12_world, expected_answer_matrix, StrategyMatrix};
use kdmi::{dmi_cluster, SolverConfig};

fn main() {
    let w = example12_world(1);
    let labels: Vec<usize> = (0..w.n_tasks).map(|t| t % 3).collect();
    let s = StrategyMatrix::example();
    let config = SolverConfig::default();
    let honest =
        dmi_cluster(&expected_answer_matrix(&w, &labels, &StrategyMatrix::identity(3)).unwrap(), &config).unwrap();
    let strategic = dmi_cluster(&expected_answer_matrix(&w, &labels, &s).unwrap(), &config).unwrap();
    println!("same partition: {}", honest.assignment.same_partition(&strategic.assignment));
    println!("honest score {:.4}, strategic score {:.4}", honest.score, strategic.score);
    println!("ratio {:.6}, |det S| {:.6}", strategic.score / honest.score, s.determinant().abs());
}
