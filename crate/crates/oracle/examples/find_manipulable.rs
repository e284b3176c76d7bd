//! Random search for a manipulable two-matching instance: n = 3, values in
//! 1..=5, stable integral matchings exactly {(1,0,2), (0,1,2)}, every mixture
//! on a 1/16 grid stable, and every mechanism manipulable under the combined
//! misreport family.
//!
//! cargo run --release -p sfm-oracle --example find_manipulable -- [tries] [seed]

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sfm_core::audit::{audit_ic, MisreportFamily, Verdict};
use sfm_core::solver::mechanisms;
use sfm_core::{MatchingInstance, Rational};
use sfm_oracle::{is_stable, permutation_matrix, stable_permutations};

fn main() {
    let mut args = std::env::args().skip(1);
    let tries: usize = args.next().map_or(1_000_000, |a| a.parse().expect("tries"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<i64> = (1..=5).collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<i64> { values.choose_multiple(rng, 3).copied().collect() };
    let (a, b) = (vec![1, 0, 2], vec![0, 1, 2]);
    let (pa, pb) = (permutation_matrix(&a), permutation_matrix(&b));
    for attempt in 0..tries {
        let u: Vec<Vec<i64>> = (0..3).map(|_| draw(&mut rng)).collect();
        let cols: Vec<Vec<i64>> = (0..3).map(|_| draw(&mut rng)).collect();
        let v: Vec<Vec<i64>> = (0..3).map(|m| (0..3).map(|w| cols[w][m]).collect()).collect();
        let inst = MatchingInstance::from_integers(&u, &v).expect("strict by construction");
        if stable_permutations(&inst) != vec![b.clone(), a.clone()] {
            continue;
        }
        let all_mixtures = (0..=16).all(|k| {
            let t = Rational::new(k.into(), 16.into());
            let mix: Vec<Vec<Rational>> = (0..3)
                .map(|m| (0..3).map(|w| &t * &pa[m][w] + (Rational::from_integer(1.into()) - &t) * &pb[m][w]).collect())
                .collect();
            is_stable(&inst, &mix)
        });
        if !all_mixtures {
            continue;
        }
        let manipulable = mechanisms().iter().all(|mech| {
            audit_ic(&inst, mech, &MisreportFamily::combined(None)).expect("audit").verdict()
                == Verdict::ManipulationFound
        });
        if manipulable {
            println!("attempt {attempt}: {}", inst.to_json_string());
            return;
        }
    }
    println!("none found");
}
