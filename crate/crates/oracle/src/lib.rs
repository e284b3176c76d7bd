//! Slow reference checks for cross-validating `sfm-core`.
//!
//! Everything here recomputes from the definitions: utilities as weighted
//! sums, blocking pairs by exhaustive comparison, stable integral matchings by
//! trying all `n!` permutations. The one shared piece is the exact LP solver,
//! used by [`nonintegral_stable`] on a formulation that `sfm-core` never
//! builds.

use itertools::Itertools;
use num_traits::{One, Zero};
use rand::Rng;

use sfm_core::lp::{solve, LinearProgram, LpError, LpStatus, Relation, Sense};
use sfm_core::{MatchingInstance, Rational};

pub type Matrix = Vec<Vec<Rational>>;

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    (0..n).permutations(n).collect()
}

pub fn permutation_matrix(perm: &[usize]) -> Matrix {
    let n = perm.len();
    (0..n).map(|m| (0..n).map(|w| if perm[m] == w { Rational::one() } else { Rational::zero() }).collect()).collect()
}

/// `(men, women)` utilities under weight matrix `x`.
pub fn utilities(inst: &MatchingInstance, x: &[Vec<Rational>]) -> (Vec<Rational>, Vec<Rational>) {
    let n = inst.n();
    let mut men = vec![Rational::zero(); n];
    let mut women = vec![Rational::zero(); n];
    for m in 0..n {
        for w in 0..n {
            men[m] += &x[m][w] * &inst.u()[m][w];
            women[w] += &x[m][w] * &inst.v()[m][w];
        }
    }
    (men, women)
}

/// Pairs `(m, w)` where both strictly prefer each other to their utility.
pub fn blocking(inst: &MatchingInstance, x: &[Vec<Rational>]) -> Vec<(usize, usize)> {
    let (men, women) = utilities(inst, x);
    let n = inst.n();
    (0..n).cartesian_product(0..n).filter(|&(m, w)| inst.u()[m][w] > men[m] && inst.v()[m][w] > women[w]).collect()
}

pub fn is_stable(inst: &MatchingInstance, x: &[Vec<Rational>]) -> bool {
    blocking(inst, x).is_empty()
}

/// Every stable perfect integral matching, as `perm[m] = w`, in
/// lexicographic order.
pub fn stable_permutations(inst: &MatchingInstance) -> Vec<Vec<usize>> {
    permutations(inst.n()).into_iter().filter(|p| is_stable(inst, &permutation_matrix(p))).collect()
}

/// Each man's best partner over the given matchings.
pub fn men_optimal(inst: &MatchingInstance, stable: &[Vec<usize>]) -> Vec<usize> {
    (0..inst.n())
        .map(|m| stable.iter().map(|p| p[m]).max_by(|&a, &b| inst.u()[m][a].cmp(&inst.u()[m][b])).expect("nonempty"))
        .collect()
}

/// Positive integer weights normalized to sum to one.
pub fn random_convex_weights<R: Rng>(k: usize, max: i64, rng: &mut R) -> Vec<Rational> {
    let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=max)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|r| Rational::new(r.into(), total.into())).collect()
}

/// Convex combination of `k` random permutation matrices.
pub fn random_doubly_stochastic<R: Rng>(n: usize, k: usize, rng: &mut R) -> Matrix {
    let weights = random_convex_weights(k, 20, rng);
    let mut x = vec![vec![Rational::zero(); n]; n];
    for weight in weights {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        for (m, &w) in perm.iter().enumerate() {
            x[m][w] += &weight;
        }
    }
    x
}

pub fn is_integral(x: &[Vec<Rational>]) -> bool {
    x.iter().flatten().all(|v| v.is_zero() || v.is_one())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// A stable fractional matching with some weight strictly inside (0, 1).
    Witness(Matrix),
    /// Every stable fractional matching is integral.
    NoneExists { leaves: usize },
    /// The search needed more than the allowed number of LP solves.
    GaveUp,
}

/// Searches all fractional matchings (row and column sums at most one) for a
/// stable non-integral one.
///
/// A matching is stable iff for some threshold vector `t`, with `t_m` either
/// 0 or one of man `m`'s values, man `m` gets at least `t_m` and every woman
/// gets at least `V(m, w)` for each man with `U(m, w) > t_m`. Each threshold
/// vector gives a polytope, and the stable set is their union. The search
/// fixes thresholds man by man, pruning on infeasibility (the constraints of
/// the fixed men alone are a relaxation). At a leaf it takes a vertex; if it
/// is integral it maximizes the L1 distance from it, and any positive
/// distance yields a non-integral midpoint.
pub fn nonintegral_stable(inst: &MatchingInstance, max_lps: usize) -> Result<Certificate, LpError> {
    let n = inst.n();
    let options: Vec<Vec<Rational>> = (0..n)
        .map(|m| {
            let mut vals: Vec<Rational> = inst.u()[m].clone();
            vals.push(Rational::zero());
            vals.sort();
            vals.dedup();
            vals
        })
        .collect();
    let mut search = Search { inst, options, max_lps, lps: 0, leaves: 0 };
    let mut thresholds = Vec::with_capacity(n);
    match search.descend(&mut thresholds)? {
        Some(x) => Ok(Certificate::Witness(x)),
        None if search.lps > search.max_lps => Ok(Certificate::GaveUp),
        None => Ok(Certificate::NoneExists { leaves: search.leaves }),
    }
}

struct Search<'a> {
    inst: &'a MatchingInstance,
    options: Vec<Vec<Rational>>,
    max_lps: usize,
    lps: usize,
    leaves: usize,
}

impl Search<'_> {
    fn var(&self, m: usize, w: usize) -> usize {
        m * self.inst.n() + w
    }

    fn program(&self, thresholds: &[Rational]) -> LinearProgram {
        let n = self.inst.n();
        let mut lp = LinearProgram::new(n * n);
        for m in 0..n {
            let mut row = vec![Rational::zero(); n * n];
            (0..n).for_each(|w| row[self.var(m, w)] = Rational::one());
            lp.add(row, Relation::Le, Rational::one(), format!("row{m}"));
        }
        for w in 0..n {
            let mut col = vec![Rational::zero(); n * n];
            (0..n).for_each(|m| col[self.var(m, w)] = Rational::one());
            lp.add(col, Relation::Le, Rational::one(), format!("col{w}"));
        }
        for (m, t) in thresholds.iter().enumerate() {
            let mut row = vec![Rational::zero(); n * n];
            (0..n).for_each(|w| row[self.var(m, w)] = self.inst.u()[m][w].clone());
            lp.add(row, Relation::Ge, t.clone(), format!("m{m}"));
        }
        for w in 0..n {
            let need = thresholds
                .iter()
                .enumerate()
                .filter(|(m, t)| self.inst.u()[*m][w] > **t)
                .map(|(m, _)| &self.inst.v()[m][w])
                .max();
            if let Some(need) = need {
                let mut col = vec![Rational::zero(); n * n];
                (0..n).for_each(|m| col[self.var(m, w)] = self.inst.v()[m][w].clone());
                lp.add(col, Relation::Ge, need.clone(), format!("w{w}"));
            }
        }
        lp
    }

    fn matrix(&self, values: &[Rational]) -> Matrix {
        values.chunks(self.inst.n()).map(<[Rational]>::to_vec).collect()
    }

    fn descend(&mut self, thresholds: &mut Vec<Rational>) -> Result<Option<Matrix>, LpError> {
        if self.lps > self.max_lps {
            return Ok(None);
        }
        let mut lp = self.program(thresholds);
        self.lps += 1;
        let vertex = solve(&lp)?;
        if vertex.status != LpStatus::Optimal {
            return Ok(None);
        }
        let x = self.matrix(&vertex.values);
        if thresholds.len() == self.inst.n() {
            self.leaves += 1;
            if !is_integral(&x) {
                return Ok(Some(x));
            }
            // Maximize the L1 distance from the integral vertex.
            let objective: Vec<Rational> =
                vertex.values.iter().map(|v| if v.is_zero() { Rational::one() } else { -Rational::one() }).collect();
            let base: Rational = vertex.values.iter().zip(&objective).map(|(v, c)| v * c).sum();
            lp.set_objective(objective, Sense::Max);
            self.lps += 1;
            let far = solve(&lp)?;
            if far.objective_value > base {
                let half = Rational::new(1.into(), 2.into());
                let mid = vertex.values.iter().zip(&far.values).map(|(a, b)| (a + b) * &half).collect::<Vec<_>>();
                return Ok(Some(self.matrix(&mid)));
            }
            return Ok(None);
        }
        let m = thresholds.len();
        for t in self.options[m].clone() {
            thresholds.push(t);
            let found = self.descend(thresholds)?;
            thresholds.pop();
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }
}
