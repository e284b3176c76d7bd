//! Randomized invariants checked against the brute-force references in
//! `sfm-oracle`.

use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sfm_core::envy::{self, RotationKind};
use sfm_core::instance::instance_from_json;
use sfm_core::lp::{self, LinearProgram, LpStatus, Relation, Sense};
use sfm_core::rational::{parse_rational, rational_from_json, rational_to_json};
use sfm_core::solver::{self, SolveError};
use sfm_core::{
    blocking_pairs, bvn_decompose, classify, cmfp_matching, convex_combine, enumerate_stable, gale_shapley, generate,
    is_stable, mfp_pairs, unique_sfm, Classification, FractionalMatching, GenMode, IntegralMatching, MatchingInstance,
    Proposers, Rational, Side,
};
use sfm_oracle::{self as oracle, Certificate};

fn mode() -> impl Strategy<Value = GenMode> {
    prop_oneof![Just(GenMode::Uniform), Just(GenMode::Cmfp), Just(GenMode::NoMfp)]
}

fn instance(max_n: usize) -> impl Strategy<Value = MatchingInstance> {
    (2..=max_n, any::<u64>(), mode()).prop_map(|(n, seed, mode)| generate(n, seed, mode).expect("n >= 2"))
}

/// Divides every agent's values by its own positive denominator, which
/// changes no comparison an agent ever makes.
fn rescaled(inst: &MatchingInstance, seed: u64) -> MatchingInstance {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.n();
    let men: Vec<Rational> = (0..n).map(|_| Rational::new(1.into(), rng.gen_range(1..9i64).into())).collect();
    let women: Vec<Rational> = (0..n).map(|_| Rational::new(1.into(), rng.gen_range(1..9i64).into())).collect();
    let u = (0..n).map(|m| (0..n).map(|w| inst.man_value(m, w) * &men[m]).collect()).collect();
    let v = (0..n).map(|m| (0..n).map(|w| inst.woman_value(w, m) * &women[w]).collect()).collect();
    MatchingInstance::new(u, v).expect("scaling keeps strictness")
}

fn perm_of(m: &IntegralMatching) -> Vec<usize> {
    m.permutation().expect("perfect")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn gale_shapley_is_stable_and_side_optimal(inst in instance(6)) {
        let stable = oracle::stable_permutations(&inst);
        let men = gale_shapley(&inst, Proposers::Men);
        let women = gale_shapley(&inst, Proposers::Women);
        prop_assert!(blocking_pairs(&inst, &men).unwrap().is_empty());
        prop_assert!(blocking_pairs(&inst, &women).unwrap().is_empty());
        prop_assert_eq!(perm_of(&men), oracle::men_optimal(&inst, &stable));
        let enumerated: Vec<Vec<usize>> = enumerate_stable(&inst).unwrap().iter().map(perm_of).collect();
        prop_assert_eq!(enumerated, stable);
    }

    #[test]
    fn forced_pairs_are_in_every_stable_matching(inst in instance(6)) {
        let result = cmfp_matching(&inst);
        let stable = oracle::stable_permutations(&inst);
        for (m, w) in result.forced.pairs() {
            prop_assert!(stable.iter().all(|p| p[m] == w));
        }
        if result.classification() == Classification::InCmfp {
            prop_assert_eq!(stable, vec![perm_of(&result.forced)]);
        }
        // Rounds are numbered from 1 and name exactly the forced pairs.
        let from_rounds: Vec<(usize, usize)> = result.rounds.iter().map(|r| (r.man, r.woman)).collect();
        let mut sorted = from_rounds.clone();
        sorted.sort();
        prop_assert_eq!(sorted, result.forced.pairs());
        prop_assert!(result.rounds.iter().enumerate().all(|(i, r)| r.round == i + 1));
        prop_assert!(mfp_pairs(&inst).iter().all(|p| from_rounds.contains(p)));
    }

    #[test]
    fn ordinal_results_ignore_rescaling(inst in instance(6), seed in any::<u64>()) {
        let scaled = rescaled(&inst, seed);
        prop_assert_eq!(cmfp_matching(&inst).forced, cmfp_matching(&scaled).forced);
        prop_assert_eq!(gale_shapley(&inst, Proposers::Men), gale_shapley(&scaled, Proposers::Men));
        prop_assert_eq!(gale_shapley(&inst, Proposers::Women), gale_shapley(&scaled, Proposers::Women));
    }

    #[test]
    fn stability_check_matches_definition(inst in instance(5), seed in any::<u64>(), k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = oracle::random_doubly_stochastic(inst.n(), k, &mut rng);
        let mu = FractionalMatching::new(x.clone()).unwrap();
        let report = is_stable(&inst, &mu).unwrap();
        prop_assert_eq!(report.blocking, oracle::blocking(&inst, &x));
        // Stability of a weight matrix is unchanged by per-agent rescaling.
        prop_assert_eq!(is_stable(&rescaled(&inst, seed), &mu).unwrap().is_stable(), oracle::is_stable(&inst, &x));
    }

    #[test]
    fn bvn_round_trips(n in 1usize..7, k in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = FractionalMatching::new(oracle::random_doubly_stochastic(n, k, &mut rng)).unwrap();
        let parts = bvn_decompose(&mu).unwrap();
        prop_assert!(parts.len() <= (n * n + 2).saturating_sub(2 * n).max(1));
        prop_assert!(parts.iter().all(|(w, m)| w > &Rational::zero() && m.is_perfect()));
        prop_assert_eq!(parts.iter().map(|(w, _)| w.clone()).sum::<Rational>(), Rational::one());
        prop_assert_eq!(convex_combine(&parts).unwrap(), mu);
    }

    #[test]
    fn integral_envy_graph_matches_general_builder(inst in instance(6), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..inst.n()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let base = IntegralMatching::perfect(perm).unwrap();
        for side in [Side::Man, Side::Woman] {
            let fast = envy::build_integral(&inst, &base, side).unwrap();
            prop_assert_eq!(&fast, &envy::build(&inst, &FractionalMatching::from_integral(&base), side).unwrap());
            if let Some(cycle) = fast.find_cycle() {
                let rot = envy::rotate(&inst, &base, side, &cycle, RotationKind::Cycle).unwrap();
                prop_assert!(rot.produced.is_perfect());
                prop_assert_ne!(&rot.produced, &base);
            }
            for sink in fast.sinks() {
                prop_assert!(fast.successors(sink).is_empty());
            }
        }
    }

    #[test]
    fn solver_output_is_stable_and_keeps_forced_pairs(inst in instance(5)) {
        let forced = cmfp_matching(&inst).forced;
        match solver::solve(&inst) {
            Ok(trace) => {
                let x = trace.composed.weights().to_vec();
                prop_assert!(oracle::is_stable(&inst, &x));
                for (m, w) in forced.pairs() {
                    prop_assert!(trace.composed.weight(m, w).is_one());
                }
                let in_cmfp = classify(&inst) == Classification::InCmfp;
                prop_assert_eq!(trace.composed.is_integral(), in_cmfp);
                if !in_cmfp {
                    let weights_sum: Rational = trace.weights.iter().sum();
                    prop_assert_eq!(weights_sum, Rational::one());
                    // The support lives on the residual instance.
                    let combined = convex_combine(
                        &trace.weights.iter().cloned().zip(trace.support.iter().cloned()).collect::<Vec<_>>(),
                    ).unwrap();
                    for (i, &m) in trace.residual_men.iter().enumerate() {
                        for (j, &w) in trace.residual_women.iter().enumerate() {
                            prop_assert_eq!(combined.weight(i, j), trace.composed.weight(m, w));
                        }
                    }
                }
            }
            Err(SolveError::NoNonIntegralWitness { fallback, .. }) => {
                let x = fallback.composed.weights().to_vec();
                prop_assert!(oracle::is_stable(&inst, &x));
                prop_assert!(oracle::is_integral(&x));
                // The solver may only give up when nothing non-integral is stable.
                let certificate = oracle::nonintegral_stable(&inst, 20_000).unwrap();
                prop_assert!(!matches!(certificate, Certificate::Witness(_)), "solver missed a witness");
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn unique_sfm_agrees_with_classification(inst in instance(5)) {
        let (unique, witness) = match unique_sfm(&inst) {
            Ok(pair) => pair,
            Err(SolveError::NoNonIntegralWitness { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        prop_assert_eq!(unique, classify(&inst) == Classification::InCmfp);
        prop_assert!(oracle::is_stable(&inst, witness.weights()));
        prop_assert_eq!(witness.is_integral(), unique);
    }

    #[test]
    fn generator_modes_hold(n in 2usize..9, seed in any::<u64>()) {
        prop_assert_eq!(classify(&generate(n, seed, GenMode::Cmfp).unwrap()), Classification::InCmfp);
        prop_assert!(mfp_pairs(&generate(n, seed, GenMode::NoMfp).unwrap()).is_empty());
        prop_assert_eq!(generate(n, seed, GenMode::Uniform).unwrap(), generate(n, seed, GenMode::Uniform).unwrap());
    }

    #[test]
    fn json_round_trips(inst in instance(6), seed in any::<u64>(), num in -1000i64..1000, den in 1i64..1000) {
        let scaled = rescaled(&inst, seed);
        prop_assert_eq!(instance_from_json(&scaled.to_json()).unwrap(), scaled.clone());
        let q = Rational::new(num.into(), den.into());
        prop_assert_eq!(rational_from_json(&rational_to_json(&q)).unwrap(), q.clone());
        prop_assert_eq!(parse_rational(&q.to_string()).unwrap(), q);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = FractionalMatching::new(oracle::random_doubly_stochastic(inst.n(), 3, &mut rng)).unwrap();
        prop_assert_eq!(FractionalMatching::from_json(&mu.to_json()).unwrap(), mu);
    }

    #[test]
    fn lp_matches_vertex_enumeration(
        rows in proptest::collection::vec((-5i64..6, -5i64..6, 0usize..3, -8i64..9), 0..5),
        c in (-4i64..5, -4i64..5),
    ) {
        // Two variables in [0, 6]: every optimum sits at an intersection of
        // two constraint lines.
        let int = |x: i64| Rational::from_integer(x.into());
        let mut lp = LinearProgram::new(2);
        let mut lines: Vec<(Rational, Rational, Relation, Rational)> = vec![
            (int(1), int(0), Relation::Le, int(6)),
            (int(0), int(1), Relation::Le, int(6)),
            (int(1), int(0), Relation::Ge, int(0)),
            (int(0), int(1), Relation::Ge, int(0)),
        ];
        lp.add(vec![int(1), int(0)], Relation::Le, int(6), "");
        lp.add(vec![int(0), int(1)], Relation::Le, int(6), "");
        for (a, b, rel, rhs) in rows {
            let relation = [Relation::Le, Relation::Ge, Relation::Eq][rel];
            lp.add(vec![int(a), int(b)], relation, int(rhs), "");
            lines.push((int(a), int(b), relation, int(rhs)));
        }
        lp.set_objective(vec![int(c.0), int(c.1)], Sense::Max);
        let mut best: Option<Rational> = None;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let (a1, b1, _, r1) = &lines[i];
                let (a2, b2, _, r2) = &lines[j];
                let det = a1 * b2 - a2 * b1;
                if det.is_zero() {
                    continue;
                }
                let x = (r1 * b2 - r2 * b1) / &det;
                let y = (a1 * r2 - a2 * r1) / &det;
                let point = vec![x, y];
                if lp.is_satisfied_by(&point) {
                    let value = lp.objective_at(&point);
                    if best.as_ref().is_none_or(|b| value > *b) {
                        best = Some(value);
                    }
                }
            }
        }
        let sol = lp::solve(&lp).unwrap();
        match best {
            Some(value) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!(lp.is_satisfied_by(&sol.values));
                prop_assert_eq!(sol.objective_value, value);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}
