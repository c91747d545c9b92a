//! Surprisingly-popular answers, with the prior given or reconstructed from
//! forecasts.

use kdmi::mechanisms::{plurality, sp_choice, surprisingly_popular_multitask};
use kdmi::simulator::{generate_single_task, PredictionRule, SingleTaskWorld};
use kdmi::single_task::surprisingly_popular_single;
use kdmi::DenseMatrix;

fn main() {
    let names = ["good", "so so", "bad"];
    let shares = [0.56, 0.40, 0.04];
    let choice = sp_choice(&shares, &[0.70, 0.26, 0.04]).unwrap();
    println!("shares {shares:?}: plurality good, surprisingly popular {}", names[choice.option]);

    let a = DenseMatrix::from_rows(&[[0.56, 0.40, 0.04], [0.56, 0.34, 0.10], [0.46, 0.44, 0.10]]).unwrap();
    println!("multi-task plurality {:?}", plurality(&a).labels());
    println!("multi-task SP {:?}", surprisingly_popular_multitask(&a).unwrap().labels());

    let world = SingleTaskWorld {
        worlds: vec![vec![0.6, 0.3, 0.1], vec![0.5, 0.45, 0.05]],
        prior: vec![0.5, 0.5],
        prediction: PredictionRule::Posterior,
    };
    let (d, realized) = generate_single_task(&world, 2000, 3).unwrap();
    let sp = surprisingly_popular_single(&d).unwrap();
    println!("single task: realized world {realized}, SP answer {} (tied: {})", names[sp.option], sp.tied);
}
