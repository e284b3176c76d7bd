//! Iterated mutual-first-preference extraction and the uniqueness test built
//! on it.

use serde_json::{json, Value};

use crate::fractional::FractionalMatching;
use crate::instance::{AgentId, MatchingInstance, SubInstance};
use crate::integral::IntegralMatching;
use crate::solver::{self, SolveError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    InCmfp,
    NotInCmfp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Round {
    pub man: usize,
    pub woman: usize,
    /// 1-based extraction round.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmfpResult {
    /// Forced pairs, in original indices; partial unless the instance is CMFP.
    pub forced: IntegralMatching,
    /// Agents left once no mutual first preference remains.
    pub residual: SubInstance,
    pub rounds: Vec<Round>,
}

impl CmfpResult {
    pub fn classification(&self) -> Classification {
        if self.residual.is_empty() {
            Classification::InCmfp
        } else {
            Classification::NotInCmfp
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "cmfp": self.residual.is_empty(),
            "forced": self.forced.to_json(),
            "rounds": self.rounds.iter().map(|r| json!([r.man, r.woman, r.round])).collect::<Vec<_>>(),
            "residual": { "men": self.residual.men, "women": self.residual.women },
        })
    }
}

/// Pairs that are each other's top choice, by increasing man index.
pub fn mfp_pairs(instance: &MatchingInstance) -> Vec<(usize, usize)> {
    let n = instance.n();
    let top_woman = |m: usize| (0..n).max_by(|&a, &b| instance.man_value(m, a).cmp(instance.man_value(m, b)));
    let top_man = |w: usize| (0..n).max_by(|&a, &b| instance.woman_value(w, a).cmp(instance.woman_value(w, b)));
    (0..n)
        .filter_map(|m| {
            let w = top_woman(m)?;
            (top_man(w)? == m).then_some((m, w))
        })
        .collect()
}

/// Removes mutual first preferences one at a time, lowest man index first,
/// until none is left. Each agent keeps a pointer into its preference order
/// that only moves past removed partners, so the whole run is O(n²).
pub fn cmfp_matching(instance: &MatchingInstance) -> CmfpResult {
    let n = instance.n();
    let man_orders: Vec<Vec<usize>> = (0..n).map(|m| instance.preference_order(AgentId::man(m))).collect();
    let woman_orders: Vec<Vec<usize>> = (0..n).map(|w| instance.preference_order(AgentId::woman(w))).collect();
    let mut man_ptr = vec![0usize; n];
    let mut woman_ptr = vec![0usize; n];
    let mut man_gone = vec![false; n];
    let mut woman_gone = vec![false; n];
    let mut forced = IntegralMatching::empty(n);
    let mut pairs = Vec::new();
    let mut rounds = Vec::new();
    loop {
        let mut found = None;
        for m in (0..n).filter(|&m| !man_gone[m]) {
            while woman_gone[man_orders[m][man_ptr[m]]] {
                man_ptr[m] += 1;
            }
            let w = man_orders[m][man_ptr[m]];
            while man_gone[woman_orders[w][woman_ptr[w]]] {
                woman_ptr[w] += 1;
            }
            if woman_orders[w][woman_ptr[w]] == m {
                found = Some((m, w));
                break;
            }
        }
        let Some((m, w)) = found else { break };
        man_gone[m] = true;
        woman_gone[w] = true;
        pairs.push((m, w));
        rounds.push(Round { man: m, woman: w, round: rounds.len() + 1 });
    }
    if !pairs.is_empty() {
        forced = IntegralMatching::from_pairs(n, &pairs).expect("extracted pairs are disjoint");
    }
    let men: Vec<usize> = (0..n).filter(|&m| !man_gone[m]).collect();
    let women: Vec<usize> = (0..n).filter(|&w| !woman_gone[w]).collect();
    CmfpResult { forced, residual: instance.restrict(&men, &women), rounds }
}

pub fn classify(instance: &MatchingInstance) -> Classification {
    cmfp_matching(instance).classification()
}

/// `(true, the forced matching)` on CMFP instances; otherwise `(false, w)`
/// where `w` is the solver's non-integral stable witness.
pub fn unique_sfm(instance: &MatchingInstance) -> Result<(bool, FractionalMatching), SolveError> {
    let result = cmfp_matching(instance);
    if result.residual.is_empty() {
        return Ok((true, FractionalMatching::from_integral(&result.forced)));
    }
    let trace = solver::solve(instance)?;
    Ok((false, trace.composed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soul() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![2, 1], vec![1, 2]]).unwrap()
    }

    fn conflict() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![1, 2], vec![2, 1]]).unwrap()
    }

    fn popularity() -> MatchingInstance {
        let rows = vec![vec![3, 2, 1]; 3];
        let v = vec![vec![3, 3, 3], vec![2, 2, 2], vec![1, 1, 1]];
        MatchingInstance::from_integers(&rows, &v).unwrap()
    }

    #[test]
    fn mfp_examples() {
        assert_eq!(mfp_pairs(&soul()), vec![(0, 0), (1, 1)]);
        assert!(mfp_pairs(&conflict()).is_empty());
        assert_eq!(mfp_pairs(&popularity()), vec![(0, 0)]);
    }

    #[test]
    fn popularity_cascade() {
        let result = cmfp_matching(&popularity());
        assert_eq!(
            result.rounds,
            vec![
                Round { man: 0, woman: 0, round: 1 },
                Round { man: 1, woman: 1, round: 2 },
                Round { man: 2, woman: 2, round: 3 },
            ]
        );
        assert!(result.residual.is_empty());
        assert_eq!(classify(&popularity()), Classification::InCmfp);
    }

    #[test]
    fn conflict_has_full_residual() {
        let result = cmfp_matching(&conflict());
        assert!(result.rounds.is_empty());
        assert_eq!(result.residual.instance, conflict());
        assert_eq!(result.forced, IntegralMatching::empty(2));
        assert_eq!(classify(&conflict()), Classification::NotInCmfp);
    }

    #[test]
    fn unique_sfm_examples() {
        assert_eq!(
            unique_sfm(&soul()).unwrap(),
            (true, FractionalMatching::from_integral(&IntegralMatching::identity(2)))
        );
        let (unique, witness) = unique_sfm(&conflict()).unwrap();
        assert!(!unique);
        assert!(!witness.is_integral());
    }

    #[test]
    fn residual_keeps_original_indices() {
        // m1 and w0 are mutual firsts; m0, m2, w1, w2 remain.
        let inst = MatchingInstance::from_integers(
            &[vec![1, 3, 2], vec![9, 1, 2], vec![1, 2, 3]],
            &[vec![1, 2, 3], vec![9, 1, 1], vec![2, 3, 2]],
        )
        .unwrap();
        let result = cmfp_matching(&inst);
        assert_eq!(result.rounds[0], Round { man: 1, woman: 0, round: 1 });
        assert_eq!(result.forced.partner_of_man(1), Some(0));
        assert_eq!(result.residual.men, vec![0, 2]);
        assert_eq!(result.residual.women, vec![1, 2]);
        assert_eq!(result.residual.instance.man_value(1, 1), inst.man_value(2, 2));
    }
}
