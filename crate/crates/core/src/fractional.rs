//! Fractional matchings: weight tables, utilities, the stability verifier and
//! Birkhoff–von Neumann decomposition.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::instance::MatchingInstance;
use crate::integral::IntegralMatching;
use crate::rational::{rational_from_json, rational_to_string_json, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FractionalError {
    #[error("weight invariant violated: {0}")]
    WeightInvariantViolated(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weights are not convex: {0}")]
    WeightsNotConvex(String),
    #[error("not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
}

/// `weights[i][j]` is the weight on the edge between man `i` and woman `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FractionalMatching {
    weights: Vec<Vec<Rational>>,
}

impl FractionalMatching {
    pub fn new(weights: Vec<Vec<Rational>>) -> Result<Self, FractionalError> {
        let n = weights.len();
        if weights.iter().any(|row| row.len() != n) {
            return Err(FractionalError::DimensionMismatch("weight table must be n x n".into()));
        }
        let one = Rational::one();
        for (i, row) in weights.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if x.is_negative() || *x > one {
                    return Err(FractionalError::WeightInvariantViolated(format!(
                        "weight[{i}][{j}] = {x} outside [0, 1]"
                    )));
                }
            }
            let sum: Rational = row.iter().sum();
            if sum > one {
                return Err(FractionalError::WeightInvariantViolated(format!("row {i} sums to {sum}")));
            }
        }
        for j in 0..n {
            let sum: Rational = weights.iter().map(|row| &row[j]).sum();
            if sum > one {
                return Err(FractionalError::WeightInvariantViolated(format!("column {j} sums to {sum}")));
            }
        }
        Ok(FractionalMatching { weights })
    }

    pub fn zero(n: usize) -> Self {
        FractionalMatching { weights: vec![vec![Rational::zero(); n]; n] }
    }

    pub fn from_integral(matching: &IntegralMatching) -> Self {
        let mut mu = FractionalMatching::zero(matching.n());
        for (m, w) in matching.pairs() {
            mu.weights[m][w] = Rational::one();
        }
        mu
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<Rational>] {
        &self.weights
    }

    pub fn weight(&self, m: usize, w: usize) -> &Rational {
        &self.weights[m][w]
    }

    /// Every row and column sums to exactly 1.
    pub fn is_perfect(&self) -> bool {
        let n = self.n();
        let one = Rational::one();
        (0..n).all(|i| self.weights[i].iter().sum::<Rational>() == one)
            && (0..n).all(|j| self.weights.iter().map(|r| &r[j]).sum::<Rational>() == one)
    }

    /// Edges whose weight is strictly between 0 and 1.
    pub fn fractional_edges(&self) -> Vec<(usize, usize)> {
        let one = Rational::one();
        let mut out = Vec::new();
        for (i, row) in self.weights.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if x.is_positive() && *x < one {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_integral(&self) -> bool {
        self.fractional_edges().is_empty()
    }

    /// The integral matching with the same weights, if every weight is 0 or 1.
    pub fn to_integral(&self) -> Option<IntegralMatching> {
        if !self.is_integral() {
            return None;
        }
        let pairing = self.weights.iter().map(|row| row.iter().position(|x| x.is_one())).collect();
        IntegralMatching::new(pairing).ok()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.weights.iter().map(|row| Value::Array(row.iter().map(rational_to_string_json).collect())).collect(),
        )
    }

    pub fn from_json(value: &Value) -> Result<Self, FractionalError> {
        let bad = |msg: String| FractionalError::WeightInvariantViolated(msg);
        let rows = value.as_array().ok_or_else(|| bad("expected an n x n array".into()))?;
        let weights = rows
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| bad("rows must be arrays".into()))?
                    .iter()
                    .map(|x| rational_from_json(x).map_err(|e| bad(e.to_string())))
                    .collect()
            })
            .collect::<Result<Vec<Vec<Rational>>, _>>()?;
        FractionalMatching::new(weights)
    }
}

impl fmt::Display for FractionalMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.weights {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityProfile {
    pub men: Vec<Rational>,
    pub women: Vec<Rational>,
}

fn check_dims(instance: &MatchingInstance, mu: &FractionalMatching) -> Result<(), FractionalError> {
    if instance.n() != mu.n() {
        return Err(FractionalError::DimensionMismatch(format!(
            "matching is {0}x{0} but instance has n = {1}",
            mu.n(),
            instance.n()
        )));
    }
    Ok(())
}

pub fn utilities(instance: &MatchingInstance, mu: &FractionalMatching) -> Result<UtilityProfile, FractionalError> {
    check_dims(instance, mu)?;
    let n = instance.n();
    let mut men = vec![Rational::zero(); n];
    let mut women = vec![Rational::zero(); n];
    for m in 0..n {
        for w in 0..n {
            let x = mu.weight(m, w);
            if x.is_zero() {
                continue;
            }
            men[m] += x * instance.man_value(m, w);
            women[w] += x * instance.woman_value(w, m);
        }
    }
    Ok(UtilityProfile { men, women })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub blocking: Vec<(usize, usize)>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.blocking.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let blocking: Vec<Value> = self.blocking.iter().map(|&(m, w)| json!([m, w])).collect();
        json!({ "stable": self.is_stable(), "blocking": blocking })
    }
}

/// Blocking pairs under expected utilities, compared strictly and exactly.
pub fn is_stable(instance: &MatchingInstance, mu: &FractionalMatching) -> Result<StabilityReport, FractionalError> {
    let profile = utilities(instance, mu)?;
    Ok(StabilityReport { blocking: blocking_under(instance, &profile) })
}

pub(crate) fn blocking_under(instance: &MatchingInstance, profile: &UtilityProfile) -> Vec<(usize, usize)> {
    let n = instance.n();
    let mut out = Vec::new();
    for m in 0..n {
        for w in 0..n {
            if *instance.man_value(m, w) > profile.men[m] && *instance.woman_value(w, m) > profile.women[w] {
                out.push((m, w));
            }
        }
    }
    out
}

pub fn convex_combine(components: &[(Rational, IntegralMatching)]) -> Result<FractionalMatching, FractionalError> {
    let Some((_, first)) = components.first() else {
        return Err(FractionalError::WeightsNotConvex("no components".into()));
    };
    let n = first.n();
    let mut total = Rational::zero();
    let mut mu = FractionalMatching::zero(n);
    for (x, matching) in components {
        if x.is_negative() {
            return Err(FractionalError::WeightsNotConvex(format!("negative weight {x}")));
        }
        if matching.n() != n {
            return Err(FractionalError::DimensionMismatch(format!("component sizes {n} and {} differ", matching.n())));
        }
        total += x;
        for (m, w) in matching.pairs() {
            mu.weights[m][w] += x;
        }
    }
    if !total.is_one() {
        return Err(FractionalError::WeightsNotConvex(format!("weights sum to {total}")));
    }
    Ok(mu)
}

/// Repeatedly removes the lexicographically least perfect matching on the
/// support, scaled by its bottleneck weight. Components are returned sorted
/// by matching.
pub fn bvn_decompose(mu: &FractionalMatching) -> Result<Vec<(Rational, IntegralMatching)>, FractionalError> {
    let n = mu.n();
    if n == 0 || !mu.is_perfect() {
        return Err(FractionalError::NotDoublyStochastic("row or column sum differs from 1".into()));
    }
    let mut rest = mu.weights.clone();
    let mut remaining = Rational::one();
    let mut out: Vec<(Rational, IntegralMatching)> = Vec::new();
    while remaining.is_positive() {
        let support: Vec<Vec<bool>> = rest.iter().map(|r| r.iter().map(Rational::is_positive).collect()).collect();
        let perm = lex_least_perfect(&support)
            .ok_or_else(|| FractionalError::NotDoublyStochastic("support has no perfect matching".into()))?;
        let step = perm.iter().enumerate().map(|(m, &w)| &rest[m][w]).min().cloned().expect("n >= 1");
        for (m, &w) in perm.iter().enumerate() {
            rest[m][w] -= &step;
        }
        remaining -= &step;
        out.push((step, IntegralMatching::perfect(perm).expect("permutation")));
    }
    out.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(out)
}

fn lex_least_perfect(support: &[Vec<bool>]) -> Option<Vec<usize>> {
    let n = support.len();
    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for m in 0..n {
        let w = (0..n).find(|&w| {
            if used[w] || !support[m][w] {
                return false;
            }
            used[w] = true;
            let ok = completes(support, m + 1, &used);
            used[w] = false;
            ok
        })?;
        used[w] = true;
        perm.push(w);
    }
    Some(perm)
}

/// Whether men `from..n` can be matched into the unused women (Kuhn).
fn completes(support: &[Vec<bool>], from: usize, used: &[bool]) -> bool {
    let n = support.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(m: usize, support: &[Vec<bool>], used: &[bool], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for w in 0..support.len() {
            if used[w] || !support[m][w] || seen[w] {
                continue;
            }
            seen[w] = true;
            if owner[w].is_none_or(|o| augment(o, support, used, seen, owner)) {
                owner[w] = Some(m);
                return true;
            }
        }
        false
    }
    (from..n).all(|m| {
        let mut seen = vec![false; n];
        augment(m, support, used, &mut seen, &mut owner)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn conflict() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![1, 2], vec![2, 1]]).unwrap()
    }

    fn half_half() -> FractionalMatching {
        let h = ratio(1, 2);
        FractionalMatching::new(vec![vec![h.clone(), h.clone()], vec![h.clone(), h]]).unwrap()
    }

    #[test]
    fn half_half_utilities_and_stability() {
        let profile = utilities(&conflict(), &half_half()).unwrap();
        assert!(profile.men.iter().chain(&profile.women).all(|u| *u == ratio(3, 2)));
        assert!(is_stable(&conflict(), &half_half()).unwrap().is_stable());
    }

    #[test]
    fn empty_matching_has_zero_utility() {
        let profile = utilities(&conflict(), &FractionalMatching::zero(2)).unwrap();
        assert!(profile.men.iter().chain(&profile.women).all(Zero::is_zero));
        assert_eq!(is_stable(&conflict(), &FractionalMatching::zero(2)).unwrap().blocking.len(), 4);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(FractionalMatching::new(vec![vec![int(2)]]).is_err());
        assert!(FractionalMatching::new(vec![vec![ratio(-1, 2)]]).is_err());
        let big = ratio(2, 3);
        assert!(FractionalMatching::new(vec![vec![big.clone(), big.clone()], vec![int(0), int(0)]]).is_err());
        assert!(FractionalMatching::new(vec![vec![big.clone(), int(0)], vec![big, int(0)]]).is_err());
    }

    #[test]
    fn combine_and_decompose_round_trip() {
        let id = IntegralMatching::identity(2);
        let swap = IntegralMatching::perfect(vec![1, 0]).unwrap();
        let parts = vec![(ratio(1, 2), id.clone()), (ratio(1, 2), swap.clone())];
        let mu = convex_combine(&parts).unwrap();
        assert_eq!(mu, half_half());
        assert_eq!(bvn_decompose(&mu).unwrap(), parts);
        assert_eq!(bvn_decompose(&FractionalMatching::from_integral(&swap)).unwrap(), vec![(int(1), swap)]);
    }

    #[test]
    fn combine_rejects_non_convex_weights() {
        let id = IntegralMatching::identity(2);
        assert!(matches!(convex_combine(&[(ratio(1, 2), id.clone())]), Err(FractionalError::WeightsNotConvex(_))));
        assert!(matches!(
            convex_combine(&[(int(1), id), (int(0), IntegralMatching::identity(3))]),
            Err(FractionalError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn decompose_rejects_partial() {
        let mu = FractionalMatching::new(vec![vec![ratio(1, 2), int(0)], vec![int(0), int(1)]]).unwrap();
        assert!(matches!(bvn_decompose(&mu), Err(FractionalError::NotDoublyStochastic(_))));
    }

    #[test]
    fn integral_weights_round_trip() {
        let m = IntegralMatching::perfect(vec![2, 0, 1]).unwrap();
        let mu = FractionalMatching::from_integral(&m);
        assert_eq!(mu.to_integral(), Some(m));
        assert!(half_half().to_integral().is_none());
        assert_eq!(FractionalMatching::from_json(&half_half().to_json()).unwrap(), half_half());
    }
}
