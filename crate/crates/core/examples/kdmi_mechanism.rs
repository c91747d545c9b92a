//! Simulates a crowd answering three-option tasks, extracts the answers and
//! pays every agent.

use std::collections::BTreeMap;

use kdmi::mechanisms::{align_labels, kdmi_payments};
use kdmi::simulator::{example12_world, generate_reports, StrategyMatrix};
use kdmi::SolverConfig;

fn main() {
    let m = 60;
    let mut strategies = vec![StrategyMatrix::identity(3); m];
    strategies[0] = StrategyMatrix::uniform(3);
    strategies[1] = StrategyMatrix::constant(3, 0);
    let g = generate_reports(&example12_world(m), &strategies, 42).unwrap();
    let out = kdmi_payments(&g.reports, &SolverConfig::default(), 42).unwrap();
    let gold: BTreeMap<usize, usize> = g.truth.iter().copied().enumerate().collect();
    let perm = align_labels(&out.extracted.assignment, &gold).unwrap();
    let correct = g.truth.iter().enumerate().filter(|(t, &c)| perm[out.extracted.assignment.label(*t)] == c).count();
    println!("extracted {correct}/{} answers correctly, quality {:?}", g.truth.len(), out.quality);
    let honest_mean = out.payments[2..].iter().sum::<f64>() / (m - 2) as f64;
    println!("uniform reporter paid {:.1}", out.payments[0]);
    println!("constant reporter paid {:.1}", out.payments[1]);
    println!("honest mean payment {honest_mean:.1}");
}
