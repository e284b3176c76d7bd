//! Runs the solver on seeded non-CMFP instances and, when it reports no
//! non-integral witness, asks the threshold search whether one exists.
//! Forced pairs carry weight 1 in every stable fractional matching and never
//! block, so the search runs on the residual instance.
//!
//! cargo run --release -p sfm-oracle --example certify -- [count] [max_n] [max_lps] [oracle_max_n]

use std::time::Instant;

use sfm_core::cmfp::{classify, cmfp_matching, Classification};
use sfm_core::instance::{generate, GenMode};
use sfm_core::solver::{solve, SolveError};
use sfm_oracle::{nonintegral_stable, Certificate};

fn main() {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(500, |a| a.parse().expect("count"));
    let max_n: usize = args.next().map_or(8, |a| a.parse().expect("max_n"));
    let max_lps: usize = args.next().map_or(200_000, |a| a.parse().expect("max_lps"));
    let oracle_max_n: usize = args.next().map_or(max_n, |a| a.parse().expect("oracle_max_n"));
    let mut seen = 0;
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
        if let Err(SolveError::NoNonIntegralWitness { residual, .. }) = solve(&inst) {
            if residual > oracle_max_n {
                println!("seed {seed} n {n} residual {residual}: not checked");
                continue;
            }
            let start = Instant::now();
            let verdict = match nonintegral_stable(&cmfp_matching(&inst).residual.instance, max_lps).expect("oracle LP")
            {
                Certificate::Witness(_) => "witness exists (solver incomplete)".to_string(),
                Certificate::NoneExists { leaves } => format!("unique stable matching ({leaves} leaves)"),
                Certificate::GaveUp => "undecided".to_string(),
            };
            println!("seed {seed} n {n} residual {residual}: {verdict} in {:.2?}", start.elapsed());
            println!("  {}", inst.to_json_string());
        }
    }
}
