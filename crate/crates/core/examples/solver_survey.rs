//! Tallies which weight stage `solve` needs on seeded random instances
//! without a forced perfect matching.
//!
//! cargo run --release -p sfm-core --example solver_survey -- [count] [max_n]

use std::collections::BTreeMap;
use std::time::Instant;

use sfm_core::cmfp::{classify, Classification};
use sfm_core::instance::{generate, GenMode};
use sfm_core::solver::{solve, SolveError};

fn main() {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(500, |a| a.parse().expect("count"));
    let max_n: usize = args.next().map_or(8, |a| a.parse().expect("max_n"));
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen = 0;
    let start = Instant::now();
    for seed in 0u64.. {
        if seen == count {
            break;
        }
        let n = 2 + (seed as usize) % (max_n - 1);
        let inst = generate(n, seed, GenMode::Uniform).expect("uniform generation");
        if classify(&inst) == Classification::InCmfp {
            continue;
        }
        seen += 1;
        let t = Instant::now();
        let outcome = solve(&inst);
        if t.elapsed().as_secs_f64() > 1.0 {
            println!("slow: seed {seed} n {n} {:.2?}", t.elapsed());
        }
        let key = match outcome {
            Ok(trace) => format!("{:?}/{}", trace.branch, trace.stage.map_or("none", |s| s.name())),
            Err(SolveError::NoNonIntegralWitness { residual, fallback }) => {
                println!("no witness: seed {seed} n {n} residual {residual} branch {:?}", fallback.branch);
                format!("{:?}/no-witness", fallback.branch)
            }
            Err(e) => {
                println!("error: seed {seed} n {n}: {e}");
                "error".into()
            }
        };
        *tally.entry(key).or_default() += 1;
    }
    for (k, v) in &tally {
        println!("{k}: {v}");
    }
    println!("{seen} instances in {:.2?}", start.elapsed());
}
