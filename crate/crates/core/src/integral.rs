//! Integral (possibly partial) matchings, Gale–Shapley and brute-force
//! enumeration of stable integral matchings.

use std::collections::VecDeque;
use std::fmt;

use num_traits::Zero;
use serde_json::Value;
use thiserror::Error;

use crate::instance::{AgentId, MatchingInstance};
use crate::rational::Rational;

/// Largest `n` accepted by [`enumerate_stable`].
pub const DEFAULT_ENUMERATION_BOUND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntegralError {
    #[error("invalid matching: {0}")]
    InvalidMatching(String),
    #[error("matching has {matching} men but instance has {instance}")]
    DimensionMismatch { matching: usize, instance: usize },
    #[error("enumeration bound exceeded: n = {n} > {bound}")]
    BoundExceeded { n: usize, bound: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Proposers {
    Men,
    Women,
}

/// `pairing[i]` is the woman matched to man `i`, if any.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntegralMatching {
    pairing: Vec<Option<usize>>,
}

impl IntegralMatching {
    pub fn new(pairing: Vec<Option<usize>>) -> Result<Self, IntegralError> {
        let n = pairing.len();
        let mut used = vec![false; n];
        for (m, w) in pairing.iter().enumerate() {
            if let Some(w) = *w {
                if w >= n {
                    return Err(IntegralError::InvalidMatching(format!("man {m} matched to woman {w} out of range")));
                }
                if std::mem::replace(&mut used[w], true) {
                    return Err(IntegralError::InvalidMatching(format!("woman {w} is matched twice")));
                }
            }
        }
        Ok(IntegralMatching { pairing })
    }

    /// A perfect matching from a permutation (`perm[i]` = partner of man `i`).
    pub fn perfect(perm: Vec<usize>) -> Result<Self, IntegralError> {
        IntegralMatching::new(perm.into_iter().map(Some).collect())
    }

    pub fn identity(n: usize) -> Self {
        IntegralMatching { pairing: (0..n).map(Some).collect() }
    }

    pub fn empty(n: usize) -> Self {
        IntegralMatching { pairing: vec![None; n] }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self, IntegralError> {
        let mut pairing = vec![None; n];
        for &(m, w) in pairs {
            if m >= n {
                return Err(IntegralError::InvalidMatching(format!("man {m} out of range")));
            }
            if pairing[m].replace(w).is_some() {
                return Err(IntegralError::InvalidMatching(format!("man {m} is matched twice")));
            }
        }
        IntegralMatching::new(pairing)
    }

    pub fn n(&self) -> usize {
        self.pairing.len()
    }

    pub fn pairing(&self) -> &[Option<usize>] {
        &self.pairing
    }

    pub fn partner_of_man(&self, m: usize) -> Option<usize> {
        self.pairing[m]
    }

    pub fn partner_of_woman(&self, w: usize) -> Option<usize> {
        self.pairing.iter().position(|&p| p == Some(w))
    }

    pub fn partner(&self, agent: AgentId) -> Option<usize> {
        match agent.side {
            crate::instance::Side::Man => self.partner_of_man(agent.index),
            crate::instance::Side::Woman => self.partner_of_woman(agent.index),
        }
    }

    /// `inverse()[w]` is the man matched to woman `w`.
    pub fn inverse(&self) -> Vec<Option<usize>> {
        let mut inv = vec![None; self.n()];
        for (m, w) in self.pairs() {
            inv[w] = Some(m);
        }
        inv
    }

    pub fn is_perfect(&self) -> bool {
        self.pairing.iter().all(Option::is_some)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.pairing.iter().enumerate().filter_map(|(m, w)| w.map(|w| (m, w))).collect()
    }

    /// For a perfect matching, the permutation `m -> w`.
    pub fn permutation(&self) -> Option<Vec<usize>> {
        self.pairing.iter().copied().collect()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.pairs().into_iter().map(|(m, w)| Value::from(vec![m, w])).collect())
    }

    /// Reads `[[m, w], ...]` for an instance of size `n`.
    pub fn from_json(value: &Value, n: usize) -> Result<Self, IntegralError> {
        let bad = || IntegralError::InvalidMatching("expected an array of [man, woman] pairs".into());
        let items = value.as_array().ok_or_else(bad)?;
        let mut pairs = Vec::with_capacity(items.len());
        for item in items {
            let pair = item.as_array().filter(|p| p.len() == 2).ok_or_else(bad)?;
            let m = pair[0].as_u64().ok_or_else(bad)? as usize;
            let w = pair[1].as_u64().ok_or_else(bad)? as usize;
            pairs.push((m, w));
        }
        IntegralMatching::from_pairs(n, &pairs)
    }
}

impl fmt::Display for IntegralMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs().iter().map(|(m, w)| format!("(m{m},w{w})")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Man `m`'s value under `matching`; 0 when unmatched.
pub fn man_utility(instance: &MatchingInstance, matching: &IntegralMatching, m: usize) -> Rational {
    matching.partner_of_man(m).map_or_else(Rational::zero, |w| instance.man_value(m, w).clone())
}

/// Deferred acceptance. Free proposers are queued in index order.
pub fn gale_shapley(instance: &MatchingInstance, proposers: Proposers) -> IntegralMatching {
    let n = instance.n();
    let (proposer, receiver): (fn(usize) -> AgentId, fn(usize) -> AgentId) = match proposers {
        Proposers::Men => (AgentId::man, AgentId::woman),
        Proposers::Women => (AgentId::woman, AgentId::man),
    };
    let orders: Vec<Vec<usize>> = (0..n).map(|p| instance.preference_order(proposer(p))).collect();
    let ranks: Vec<Vec<usize>> = (0..n).map(|r| instance.rank_table(receiver(r))).collect();
    let mut next = vec![0usize; n];
    let mut held: Vec<Option<usize>> = vec![None; n];
    let mut free: VecDeque<usize> = (0..n).collect();
    while let Some(p) = free.pop_front() {
        let r = orders[p][next[p]];
        next[p] += 1;
        match held[r] {
            None => held[r] = Some(p),
            Some(q) if ranks[r][p] < ranks[r][q] => {
                held[r] = Some(p);
                free.push_back(q);
            }
            Some(_) => free.push_back(p),
        }
    }
    let mut pairing = vec![None; n];
    for (r, p) in held.into_iter().enumerate() {
        let p = p.expect("deferred acceptance on a complete table matches everyone");
        match proposers {
            Proposers::Men => pairing[p] = Some(r),
            Proposers::Women => pairing[r] = Some(p),
        }
    }
    IntegralMatching { pairing }
}

/// Pairs `(m, w)` with `U(m,w) > u_m` and `V(m,w) > v_w`, in lexicographic order.
pub fn blocking_pairs(
    instance: &MatchingInstance,
    matching: &IntegralMatching,
) -> Result<Vec<(usize, usize)>, IntegralError> {
    let n = instance.n();
    if matching.n() != n {
        return Err(IntegralError::DimensionMismatch { matching: matching.n(), instance: n });
    }
    let inv = matching.inverse();
    let zero = Rational::zero();
    let mut out = Vec::new();
    for m in 0..n {
        let um = matching.partner_of_man(m).map_or(&zero, |w| instance.man_value(m, w));
        for (w, held) in inv.iter().enumerate() {
            let vw = held.map_or(&zero, |h| instance.woman_value(w, h));
            if instance.man_value(m, w) > um && instance.woman_value(w, m) > vw {
                out.push((m, w));
            }
        }
    }
    Ok(out)
}

pub fn enumerate_stable(instance: &MatchingInstance) -> Result<Vec<IntegralMatching>, IntegralError> {
    enumerate_stable_bounded(instance, DEFAULT_ENUMERATION_BOUND)
}

/// All stable perfect matchings in lexicographic order of their permutations.
pub fn enumerate_stable_bounded(
    instance: &MatchingInstance,
    bound: usize,
) -> Result<Vec<IntegralMatching>, IntegralError> {
    let n = instance.n();
    if n > bound {
        return Err(IntegralError::BoundExceeded { n, bound });
    }
    let mut out = Vec::new();
    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    extend_stable(instance, &mut perm, &mut used, &mut out);
    Ok(out)
}

// A pair blocking among already-assigned agents blocks every completion, so
// partial assignments are pruned as soon as one appears.
fn extend_stable(
    instance: &MatchingInstance,
    perm: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<IntegralMatching>,
) {
    let n = instance.n();
    let m = perm.len();
    if m == n {
        out.push(IntegralMatching { pairing: perm.iter().copied().map(Some).collect() });
        return;
    }
    for w in 0..n {
        if used[w] {
            continue;
        }
        let blocked = (0..m).any(|a| {
            let b = perm[a];
            // (m, b): m's candidate w against b's current man a.
            (instance.man_value(m, b) > instance.man_value(m, w)
                && instance.woman_value(b, m) > instance.woman_value(b, a))
                // (a, w): a against w's candidate m.
                || (instance.man_value(a, w) > instance.man_value(a, b)
                    && instance.woman_value(w, a) > instance.woman_value(w, m))
        });
        if blocked {
            continue;
        }
        used[w] = true;
        perm.push(w);
        extend_stable(instance, perm, used, out);
        perm.pop();
        used[w] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conflict() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![1, 2], vec![2, 1]]).unwrap()
    }

    fn block() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![2, 1]], &[vec![2, 2], vec![1, 1]]).unwrap()
    }

    fn swap() -> IntegralMatching {
        IntegralMatching::perfect(vec![1, 0]).unwrap()
    }

    #[test]
    fn gale_shapley_is_proposer_optimal() {
        assert_eq!(gale_shapley(&conflict(), Proposers::Men), IntegralMatching::identity(2));
        assert_eq!(gale_shapley(&conflict(), Proposers::Women), swap());
    }

    #[test]
    fn mutual_firsts_match_under_both_sides() {
        let soul = MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![2, 1], vec![1, 2]]).unwrap();
        assert_eq!(gale_shapley(&soul, Proposers::Men), IntegralMatching::identity(2));
        assert_eq!(gale_shapley(&soul, Proposers::Women), IntegralMatching::identity(2));
        assert_eq!(enumerate_stable(&soul).unwrap(), vec![IntegralMatching::identity(2)]);
    }

    #[test]
    fn blocking_pairs_examples() {
        assert!(blocking_pairs(&conflict(), &IntegralMatching::identity(2)).unwrap().is_empty());
        assert_eq!(blocking_pairs(&block(), &swap()).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn unmatched_agents_have_zero_utility() {
        let partial = IntegralMatching::new(vec![Some(1), None]).unwrap();
        // Man 1 and woman 0 are both free and value each other positively.
        assert_eq!(blocking_pairs(&conflict(), &partial).unwrap(), vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_stable(&conflict()).unwrap(), vec![IntegralMatching::identity(2), swap()]);
        assert_eq!(enumerate_stable(&block()).unwrap(), vec![IntegralMatching::identity(2)]);
        assert!(matches!(
            enumerate_stable_bounded(&conflict(), 1),
            Err(IntegralError::BoundExceeded { n: 2, bound: 1 })
        ));
    }

    #[test]
    fn rejects_non_injective_pairing() {
        assert!(IntegralMatching::new(vec![Some(0), Some(0)]).is_err());
        assert!(IntegralMatching::from_pairs(2, &[(0, 1), (0, 0)]).is_err());
        assert!(IntegralMatching::new(vec![Some(2), None]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = IntegralMatching::new(vec![Some(2), None, Some(0)]).unwrap();
        assert_eq!(m.to_json(), serde_json::json!([[0, 2], [2, 0]]));
        assert_eq!(IntegralMatching::from_json(&m.to_json(), 3).unwrap(), m);
    }
}
