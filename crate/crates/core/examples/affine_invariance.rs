//! Moves a point cloud by an invertible affine map and clusters both copies.

use kdmi::matrix::determinant;
use kdmi::{dmi_cluster, fixtures, SolverConfig};

fn main() {
    let a = fixtures::affine_7x2();
    let (t, b) = fixtures::transform_t_b();
    let moved = a.matmul(&t).unwrap().add_row_vector(&b).unwrap();
    let config = SolverConfig::default();
    let before = dmi_cluster(&a, &config).unwrap();
    let after = dmi_cluster(&moved, &config).unwrap();
    println!("original:    {:?} score {:.6}", before.assignment.labels(), before.score);
    println!("transformed: {:?} score {:.6}", after.assignment.labels(), after.score);
    println!("score ratio {:.6}, |det T| {:.6}", after.score / before.score, determinant(&t).unwrap().abs());
}
