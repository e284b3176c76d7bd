//! Brute-force incentive audits over finite misreport families.
//!
//! A verdict of [`Verdict::NoGainFound`] only certifies that no report in the
//! searched family helps; the space of cardinal reports is a continuum.

use std::collections::HashMap;

use itertools::Itertools;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::cmfp::{classify, Classification};
use crate::fractional::FractionalMatching;
use crate::instance::{AgentId, MatchingInstance, Side};
use crate::rational::{int, rational_to_json, rational_to_string_json, Rational};
use crate::solver::{Mechanism, SolveError};

pub const DEFAULT_FAMILY_BOUND: usize = 1_000_000;
pub const DEFAULT_COALITION_BOUND: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("misreport family too large: {count} candidates exceeds bound {bound}")]
    FamilyTooLarge { count: u128, bound: usize },
    #[error("coalition of {size} agents exceeds bound {bound}")]
    CoalitionTooLarge { size: usize, bound: usize },
    #[error("invalid coalition: {0}")]
    InvalidCoalition(String),
    #[error("mechanism failed: {0}")]
    Mechanism(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    RowPermutations,
    ValueGrid,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisreportFamily {
    pub kind: FamilyKind,
    /// Grid for `ValueGrid`/`Combined`. `None` means `{1, ..., 2n}` plus the
    /// agent's own values.
    pub grid_values: Option<Vec<Rational>>,
    pub bound: usize,
}

impl MisreportFamily {
    pub fn row_permutations() -> Self {
        MisreportFamily { kind: FamilyKind::RowPermutations, grid_values: None, bound: DEFAULT_FAMILY_BOUND }
    }

    pub fn value_grid(values: Option<Vec<Rational>>) -> Self {
        MisreportFamily { kind: FamilyKind::ValueGrid, grid_values: values, bound: DEFAULT_FAMILY_BOUND }
    }

    pub fn combined(values: Option<Vec<Rational>>) -> Self {
        MisreportFamily { kind: FamilyKind::Combined, grid_values: values, bound: DEFAULT_FAMILY_BOUND }
    }

    /// Integers `1..=2n`.
    pub fn integer_grid(n: usize) -> Vec<Rational> {
        (1..=2 * n as i64).map(int).collect()
    }

    pub fn with_bound(mut self, bound: usize) -> Self {
        self.bound = bound;
        self
    }

    pub fn description(&self) -> String {
        let grid = || match &self.grid_values {
            None => "{1..2n} plus own values".to_string(),
            Some(v) => format!("{{{}}}", v.iter().map(|x| x.to_string()).join(", ")),
        };
        match self.kind {
            FamilyKind::RowPermutations => "permutations of the true valuation sequence".into(),
            FamilyKind::ValueGrid => format!("strict assignments from {}", grid()),
            FamilyKind::Combined => format!("permutations plus strict assignments from {}", grid()),
        }
    }

    fn grid_for(&self, truth: &[Rational]) -> Vec<Rational> {
        let mut values = match &self.grid_values {
            Some(v) => v.clone(),
            None => {
                let mut v = MisreportFamily::integer_grid(truth.len());
                v.extend(truth.iter().cloned());
                v
            }
        };
        values.retain(|x| !x.is_negative());
        values.sort();
        values.dedup();
        values
    }

    /// Number of candidate reports before deduplication.
    pub fn count(&self, n: usize, truth: &[Rational]) -> u128 {
        let perms = falling(n as u128, n as u128);
        let grid = || falling(self.grid_for(truth).len() as u128, n as u128);
        match self.kind {
            FamilyKind::RowPermutations => perms,
            FamilyKind::ValueGrid => grid(),
            FamilyKind::Combined => perms.saturating_add(grid()),
        }
    }

    /// Every report in the family for an agent whose true sequence is
    /// `truth`; all are strict and nonnegative.
    pub fn candidates(&self, truth: &[Rational]) -> Result<Vec<Vec<Rational>>, AuditError> {
        let set = self.candidate_set(truth)?;
        Ok((0..set.len()).map(|i| set.report(i)).collect())
    }

    fn candidate_set(&self, truth: &[Rational]) -> Result<CandidateSet, AuditError> {
        let n = truth.len();
        let count = self.count(n, truth);
        if count > self.bound as u128 {
            return Err(AuditError::FamilyTooLarge { count, bound: self.bound });
        }
        let mut set = CandidateSet::default();
        if self.kind != FamilyKind::ValueGrid {
            set.add_pool(truth.to_vec(), n, |_| true);
        }
        if self.kind != FamilyKind::RowPermutations {
            // In `Combined`, reports using only true values were already
            // listed as permutations.
            let skip_truth = self.kind == FamilyKind::Combined;
            set.add_pool(self.grid_for(truth), n, |report| !(skip_truth && report.iter().all(|x| truth.contains(x))));
        }
        Ok(set)
    }
}

/// Reports as index tuples into value pools, in family order. Rankings are
/// read from the indices without building the rational vectors.
#[derive(Default)]
struct CandidateSet {
    pools: Vec<Vec<Rational>>,
    /// `ranks[p][i]` is the position of `pools[p][i]` in ascending order.
    ranks: Vec<Vec<usize>>,
    items: Vec<(usize, Vec<usize>)>,
}

impl CandidateSet {
    /// Adds every ordered choice of `n` distinct pool values that `keep`
    /// accepts.
    fn add_pool(&mut self, pool: Vec<Rational>, n: usize, keep: impl Fn(&[&Rational]) -> bool) {
        let p = self.pools.len();
        let mut ranks = vec![0; pool.len()];
        for (r, i) in (0..pool.len()).sorted_by(|&a, &b| pool[a].cmp(&pool[b])).enumerate() {
            ranks[i] = r;
        }
        for idx in (0..pool.len()).permutations(n) {
            let values: Vec<&Rational> = idx.iter().map(|&i| &pool[i]).collect();
            if keep(&values) {
                self.items.push((p, idx));
            }
        }
        self.pools.push(pool);
        self.ranks.push(ranks);
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn report(&self, i: usize) -> Vec<Rational> {
        let (p, idx) = &self.items[i];
        idx.iter().map(|&j| self.pools[*p][j].clone()).collect()
    }

    /// Partners from most to least valued under report `i`.
    fn ranking(&self, i: usize) -> Vec<usize> {
        let (p, idx) = &self.items[i];
        let ranks = &self.ranks[*p];
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&a, &b| ranks[idx[b]].cmp(&ranks[idx[a]]));
        order
    }
}

fn falling(from: u128, steps: u128) -> u128 {
    if steps > from {
        return 0;
    }
    (0..steps).fold(1u128, |acc, i| acc.saturating_mul(from - i))
}

/// `agent`'s utility under `mu`, measured with its true values from `instance`.
pub fn true_utility(instance: &MatchingInstance, mu: &FractionalMatching, agent: AgentId) -> Rational {
    let n = instance.n();
    let mut total = Rational::zero();
    for p in 0..n {
        let x = match agent.side {
            Side::Man => mu.weight(agent.index, p),
            Side::Woman => mu.weight(p, agent.index),
        };
        if !x.is_zero() {
            total += x * instance.value(agent, p);
        }
    }
    total
}

fn max_value(instance: &MatchingInstance, agent: AgentId) -> Rational {
    instance.valuations(agent).into_iter().max().expect("n >= 1")
}

/// Ranking induced by a report; ordinal mechanisms are memoized on it.
fn ranking(report: &[Rational]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..report.len()).collect();
    order.sort_by(|&a, &b| report[b].cmp(&report[a]));
    order
}

/// Whether the outcome on `reported` is fixed by the reported rankings. The
/// CMFP classification itself depends only on rankings.
fn ordinal_on(mechanism: &Mechanism, reported: &MatchingInstance) -> bool {
    mechanism.ordinal || (mechanism.forced_on_cmfp && classify(reported) == Classification::InCmfp)
}

/// Memo keyed by rankings. A `None` entry marks rankings whose outcome also
/// depends on the reported values.
type RankingMemo<K, V> = HashMap<K, Option<V>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deviation {
    pub agent: AgentId,
    /// Best report found (ties go to the first in family order).
    pub report: Vec<Rational>,
    pub truthful_utility: Rational,
    pub deviated_utility: Rational,
    /// `deviated_utility - truthful_utility`, both under true values.
    pub gain: Rational,
    pub candidates: usize,
    /// The truthful outcome already gives the agent its best value, so no
    /// report was tried.
    pub skipped_at_top: bool,
}

impl Deviation {
    pub fn is_profitable(&self) -> bool {
        self.gain.is_positive()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "agent": self.agent.to_string(),
            "report": self.report.iter().map(rational_to_json).collect::<Vec<_>>(),
            "truthful_utility": rational_to_string_json(&self.truthful_utility),
            "deviated_utility": rational_to_string_json(&self.deviated_utility),
            "gain": rational_to_string_json(&self.gain),
            "candidates": self.candidates,
            "skipped_at_top": self.skipped_at_top,
        })
    }
}

/// Search with a precomputed truthful outcome.
fn best_response_from(
    instance: &MatchingInstance,
    agent: AgentId,
    mechanism: &Mechanism,
    family: &MisreportFamily,
    truthful: &FractionalMatching,
) -> Result<Deviation, AuditError> {
    let truth = instance.valuations(agent);
    let truthful_utility = true_utility(instance, truthful, agent);
    let candidates = family.candidate_set(&truth)?;
    if truthful_utility >= max_value(instance, agent) {
        return Ok(Deviation {
            agent,
            report: truth,
            deviated_utility: truthful_utility.clone(),
            truthful_utility,
            gain: Rational::zero(),
            candidates: 0,
            skipped_at_top: true,
        });
    }
    let memoize = mechanism.ordinal || mechanism.forced_on_cmfp;
    let mut memo: RankingMemo<Vec<usize>, Rational> = HashMap::new();
    let mut best: Option<(usize, Rational)> = None;
    let mut evaluated = 0;
    for i in 0..candidates.len() {
        let key = memoize.then(|| candidates.ranking(i));
        let utility = match key.as_ref().and_then(|k| memo.get(k)) {
            Some(Some(u)) => {
                evaluated += 1;
                u.clone()
            }
            cached => {
                let Ok(reported) = instance.with_report(agent, &candidates.report(i)) else { continue };
                evaluated += 1;
                let u = true_utility(instance, &mechanism.run(&reported)?, agent);
                if let (Some(k), None) = (key, cached) {
                    memo.insert(k, ordinal_on(mechanism, &reported).then(|| u.clone()));
                }
                u
            }
        };
        if best.as_ref().is_none_or(|(_, b)| utility > *b) {
            best = Some((i, utility));
        }
    }
    let (report, deviated_utility) = match best {
        Some((i, u)) => (candidates.report(i), u),
        None => (truth, truthful_utility.clone()),
    };
    Ok(Deviation {
        agent,
        gain: &deviated_utility - &truthful_utility,
        report,
        truthful_utility,
        deviated_utility,
        candidates: evaluated,
        skipped_at_top: false,
    })
}

/// Best true-utility outcome for `agent` over every report in `family`,
/// everyone else truthful.
pub fn best_response(
    instance: &MatchingInstance,
    agent: AgentId,
    mechanism: &Mechanism,
    family: &MisreportFamily,
) -> Result<Deviation, AuditError> {
    let truthful = mechanism.run(instance)?;
    best_response_from(instance, agent, mechanism, family, &truthful)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    NoGainFound,
    ManipulationFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoalitionCriterion {
    /// Every member strictly gains.
    Strict,
    /// No member loses and someone strictly gains.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionRecord {
    pub coalition: Vec<AgentId>,
    pub criterion: CoalitionCriterion,
    /// Joint report of the best qualifying deviation, member by member.
    pub reports: Option<Vec<Vec<Rational>>>,
    pub truthful: Vec<Rational>,
    pub deviated: Vec<Rational>,
    pub joint_reports: usize,
    /// Set when some member already holds its top value, so the strict
    /// criterion cannot be met and the search was skipped.
    pub skipped_at_top: bool,
}

impl CoalitionRecord {
    pub fn verdict(&self) -> Verdict {
        if self.reports.is_some() {
            Verdict::ManipulationFound
        } else {
            Verdict::NoGainFound
        }
    }

    pub fn gains(&self) -> Vec<Rational> {
        self.deviated.iter().zip(&self.truthful).map(|(d, t)| d - t).collect()
    }

    pub fn to_json(&self) -> Value {
        let strs = |v: &[Rational]| v.iter().map(rational_to_string_json).collect::<Vec<_>>();
        json!({
            "coalition": self.coalition.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "criterion": match self.criterion { CoalitionCriterion::Strict => "strict", CoalitionCriterion::Weak => "weak" },
            "verdict": verdict_name(self.verdict()),
            "reports": self.reports.as_ref().map(|rs| rs.iter().map(|r| r.iter().map(rational_to_json).collect::<Vec<_>>()).collect::<Vec<_>>()),
            "truthful_utilities": strs(&self.truthful),
            "deviated_utilities": strs(&self.deviated),
            "gains": strs(&self.gains()),
            "joint_reports": self.joint_reports,
            "skipped_at_top": self.skipped_at_top,
        })
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::NoGainFound => "no-gain-found",
        Verdict::ManipulationFound => "manipulation-found",
    }
}

/// Joint misreports by `coalition`, everyone else truthful. The best
/// qualifying deviation maximizes the smallest member gain.
pub fn audit_coalition(
    instance: &MatchingInstance,
    coalition: &[AgentId],
    mechanism: &Mechanism,
    family: &MisreportFamily,
    criterion: CoalitionCriterion,
) -> Result<CoalitionRecord, AuditError> {
    audit_coalition_bounded(instance, coalition, mechanism, family, criterion, DEFAULT_COALITION_BOUND)
}

pub fn audit_coalition_bounded(
    instance: &MatchingInstance,
    coalition: &[AgentId],
    mechanism: &Mechanism,
    family: &MisreportFamily,
    criterion: CoalitionCriterion,
    max_size: usize,
) -> Result<CoalitionRecord, AuditError> {
    let n = instance.n();
    if coalition.is_empty() {
        return Err(AuditError::InvalidCoalition("coalition is empty".into()));
    }
    if coalition.len() > max_size {
        return Err(AuditError::CoalitionTooLarge { size: coalition.len(), bound: max_size });
    }
    for (i, a) in coalition.iter().enumerate() {
        if a.index >= n {
            return Err(AuditError::InvalidCoalition(format!("{a} is out of range for n = {n}")));
        }
        if coalition[..i].contains(a) {
            return Err(AuditError::InvalidCoalition(format!("{a} listed twice")));
        }
    }
    let truthful_outcome = mechanism.run(instance)?;
    let truthful: Vec<Rational> = coalition.iter().map(|&a| true_utility(instance, &truthful_outcome, a)).collect();
    let mut record = CoalitionRecord {
        coalition: coalition.to_vec(),
        criterion,
        reports: None,
        truthful: truthful.clone(),
        deviated: truthful.clone(),
        joint_reports: 0,
        skipped_at_top: false,
    };
    if criterion == CoalitionCriterion::Strict
        && coalition.iter().zip(&truthful).any(|(&a, u)| *u >= max_value(instance, a))
    {
        record.skipped_at_top = true;
        return Ok(record);
    }
    let families: Vec<Vec<Vec<Rational>>> =
        coalition.iter().map(|&a| family.candidates(&instance.valuations(a))).collect::<Result<_, _>>()?;
    let joint: u128 = families.iter().map(|f| f.len() as u128).product();
    if joint > family.bound as u128 {
        return Err(AuditError::FamilyTooLarge { count: joint, bound: family.bound });
    }

    let memoize = mechanism.ordinal || mechanism.forced_on_cmfp;
    let rankings: Vec<Vec<Vec<usize>>> = families.iter().map(|f| f.iter().map(|r| ranking(r)).collect()).collect();

    // Split on the first member's report so the product can run in parallel.
    let rest: Vec<usize> = families[1..].iter().map(Vec::len).collect();
    let partials: Vec<Option<(Vec<usize>, Vec<Rational>, Rational)>> = (0..families[0].len())
        .into_par_iter()
        .map(|first| -> Result<_, AuditError> {
            let mut best: Option<(Vec<usize>, Vec<Rational>, Rational)> = None;
            let mut memo: RankingMemo<Vec<&[usize]>, Vec<Rational>> = HashMap::new();
            for tail in index_tuples(&rest) {
                let choice: Vec<usize> = std::iter::once(first).chain(tail).collect();
                let key: Option<Vec<&[usize]>> =
                    memoize.then(|| rankings.iter().zip(&choice).map(|(r, &c)| r[c].as_slice()).collect());
                let cached = key.as_ref().and_then(|k| memo.get(k));
                let deviated = match cached {
                    Some(Some(d)) => d.clone(),
                    cached => {
                        let Some(reported) = joint_report(instance, coalition, &families, &choice) else { continue };
                        let outcome = mechanism.run(&reported)?;
                        let d: Vec<Rational> = coalition.iter().map(|&a| true_utility(instance, &outcome, a)).collect();
                        if let (Some(k), None) = (key, cached) {
                            memo.insert(k, ordinal_on(mechanism, &reported).then(|| d.clone()));
                        }
                        d
                    }
                };
                let gains: Vec<Rational> = deviated.iter().zip(&truthful).map(|(d, t)| d - t).collect();
                let qualifies = match criterion {
                    CoalitionCriterion::Strict => gains.iter().all(Signed::is_positive),
                    CoalitionCriterion::Weak => {
                        gains.iter().all(|g| !g.is_negative()) && gains.iter().any(Signed::is_positive)
                    }
                };
                if !qualifies {
                    continue;
                }
                let worst = gains.iter().min().cloned().expect("nonempty coalition");
                if best.as_ref().is_none_or(|(_, _, b)| worst > *b) {
                    best = Some((choice, deviated, worst));
                }
            }
            Ok(best)
        })
        .collect::<Result<_, _>>()?;
    record.joint_reports = joint as usize;
    let mut best: Option<(Vec<usize>, Vec<Rational>, Rational)> = None;
    for candidate in partials.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, _, b)| candidate.2 > *b) {
            best = Some(candidate);
        }
    }
    if let Some((choice, deviated, _)) = best {
        record.reports = Some(families.iter().zip(&choice).map(|(f, &c)| f[c].clone()).collect());
        record.deviated = deviated;
    }
    Ok(record)
}

/// The instance with every coalition member's chosen report, or `None` if
/// some report is invalid.
fn joint_report(
    instance: &MatchingInstance,
    coalition: &[AgentId],
    families: &[Vec<Vec<Rational>>],
    choice: &[usize],
) -> Option<MatchingInstance> {
    let mut reported = instance.clone();
    for ((&agent, f), &c) in coalition.iter().zip(families).zip(choice) {
        reported = reported.with_report(agent, &f[c]).ok()?;
    }
    Some(reported)
}

/// All index tuples `t` with `t[i] < sizes[i]`, last position fastest; a
/// single empty tuple when `sizes` is empty.
fn index_tuples(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let mut next = (!sizes.contains(&0)).then(|| vec![0; sizes.len()]);
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut bumped = current.clone();
        for i in (0..sizes.len()).rev() {
            bumped[i] += 1;
            if bumped[i] < sizes[i] {
                next = Some(bumped);
                break;
            }
            bumped[i] = 0;
        }
        Some(current)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub mechanism: String,
    pub family: String,
    pub deviations: Vec<Deviation>,
    pub coalitions: Vec<CoalitionRecord>,
}

impl AuditReport {
    pub fn verdict(&self) -> Verdict {
        if self.deviations.iter().any(Deviation::is_profitable)
            || self.coalitions.iter().any(|c| c.verdict() == Verdict::ManipulationFound)
        {
            Verdict::ManipulationFound
        } else {
            Verdict::NoGainFound
        }
    }

    /// Largest single-agent gain.
    pub fn best(&self) -> Option<&Deviation> {
        self.deviations.iter().max_by(|a, b| a.gain.cmp(&b.gain))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "mechanism": self.mechanism,
            "family": self.family,
            "verdict": verdict_name(self.verdict()),
            "deviations": self.deviations.iter().map(Deviation::to_json).collect::<Vec<_>>(),
            "coalitions": self.coalitions.iter().map(CoalitionRecord::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Best responses of every agent (men first), evaluated in parallel.
pub fn audit_ic(
    instance: &MatchingInstance,
    mechanism: &Mechanism,
    family: &MisreportFamily,
) -> Result<AuditReport, AuditError> {
    let n = instance.n();
    let truthful = mechanism.run(instance)?;
    let agents: Vec<AgentId> = (0..n).map(AgentId::man).chain((0..n).map(AgentId::woman)).collect();
    let deviations = agents
        .par_iter()
        .map(|&a| best_response_from(instance, a, mechanism, family, &truthful))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AuditReport {
        mechanism: mechanism.name.to_string(),
        family: family.description(),
        deviations,
        coalitions: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{mechanism, mechanisms};

    fn soul() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![2, 1], vec![1, 2]]).unwrap()
    }

    #[test]
    fn family_sizes() {
        let truth = vec![int(3), int(1), int(2)];
        assert_eq!(MisreportFamily::row_permutations().candidates(&truth).unwrap().len(), 6);
        let grid = MisreportFamily::value_grid(Some(MisreportFamily::integer_grid(3)));
        assert_eq!(grid.candidates(&truth).unwrap().len(), 6 * 5 * 4);
        // Default grid {1..6} plus own values {1,2,3} is still {1..6}.
        assert_eq!(MisreportFamily::combined(None).candidates(&truth).unwrap().len(), 120);
        let tiny = MisreportFamily::value_grid(None).with_bound(10);
        assert!(matches!(tiny.candidates(&truth), Err(AuditError::FamilyTooLarge { count: 120, bound: 10 })));
    }

    #[test]
    fn index_rankings_match_reports() {
        let truth = vec![int(7), int(1), int(4)];
        let family = MisreportFamily::combined(Some(vec![int(4), int(1), int(9), int(7)]));
        let set = family.candidate_set(&truth).unwrap();
        let reports = family.candidates(&truth).unwrap();
        // 6 permutations of the truth, then the 24 grid reports minus the
        // 6 that use only true values.
        assert_eq!(reports.len(), 6 + 24 - 6);
        assert_eq!(reports.iter().unique().count(), reports.len());
        for (i, report) in reports.iter().enumerate() {
            assert_eq!(set.ranking(i), ranking(report));
        }
    }

    #[test]
    fn grid_reports_are_strict() {
        let grid = MisreportFamily::value_grid(Some(vec![int(1), int(1), int(2)]));
        let reports = grid.candidates(&[int(5), int(4)]).unwrap();
        assert_eq!(reports, vec![vec![int(1), int(2)], vec![int(2), int(1)]]);
    }

    #[test]
    fn top_choices_cannot_gain() {
        for mech in mechanisms() {
            let report = audit_ic(&soul(), &mech, &MisreportFamily::row_permutations()).unwrap();
            assert_eq!(report.verdict(), Verdict::NoGainFound, "{}", mech.name);
            let coalition = [AgentId::man(0), AgentId::woman(1)];
            let rec = audit_coalition(
                &soul(),
                &coalition,
                &mech,
                &MisreportFamily::row_permutations(),
                CoalitionCriterion::Strict,
            )
            .unwrap();
            assert_eq!(rec.verdict(), Verdict::NoGainFound);
            assert!(rec.skipped_at_top);
        }
    }

    #[test]
    fn women_manipulate_men_proposing() {
        // Woman 1 swaps her two lower-ranked men and ends up with her top man.
        let inst = MatchingInstance::from_integers(
            &[vec![1, 3, 2], vec![1, 2, 3], vec![2, 3, 1]],
            &[vec![1, 2, 3], vec![2, 3, 2], vec![3, 1, 1]],
        )
        .unwrap();
        let report = audit_ic(&inst, &mechanism("gs-men").unwrap(), &MisreportFamily::row_permutations()).unwrap();
        assert_eq!(report.verdict(), Verdict::ManipulationFound);
        let best = report.best().unwrap();
        assert_eq!(best.agent, AgentId::woman(1));
        assert_eq!(best.report, vec![int(1), int(3), int(2)]);
        assert!(best.gain.is_positive());
    }

    #[test]
    fn deviations_are_measured_with_true_values() {
        let inst = MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![1, 2], vec![2, 1]]).unwrap();
        let mech = mechanism("gs-men").unwrap();
        let dev = best_response(&inst, AgentId::woman(0), &mech, &MisreportFamily::row_permutations()).unwrap();
        // The reported instance may differ; utilities come from `inst`.
        assert_eq!(dev.truthful_utility, int(1));
        assert!(dev.deviated_utility <= int(2));
        assert_eq!(dev.candidates, 2);
        assert!(!dev.skipped_at_top);
    }

    #[test]
    fn agents_at_their_top_are_skipped() {
        let dev = best_response(
            &soul(),
            AgentId::woman(0),
            &mechanism("gs-men").unwrap(),
            &MisreportFamily::row_permutations(),
        )
        .unwrap();
        assert!(dev.skipped_at_top);
        assert_eq!(dev.candidates, 0);
        assert_eq!(dev.gain, int(0));
    }

    #[test]
    fn index_tuples_cover_the_product() {
        assert_eq!(index_tuples(&[]).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(index_tuples(&[2, 0]).count(), 0);
        assert_eq!(index_tuples(&[2, 2]).collect::<Vec<_>>(), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn coalition_input_checks() {
        let mech = mechanism("gs-men").unwrap();
        let fam = MisreportFamily::row_permutations();
        let strict = CoalitionCriterion::Strict;
        assert!(matches!(audit_coalition(&soul(), &[], &mech, &fam, strict), Err(AuditError::InvalidCoalition(_))));
        let dup = [AgentId::man(0), AgentId::man(0)];
        assert!(matches!(audit_coalition(&soul(), &dup, &mech, &fam, strict), Err(AuditError::InvalidCoalition(_))));
        let big = [AgentId::man(0), AgentId::man(1), AgentId::woman(0), AgentId::woman(1)];
        assert!(matches!(
            audit_coalition(&soul(), &big, &mech, &fam, strict),
            Err(AuditError::CoalitionTooLarge { size: 4, bound: 3 })
        ));
    }
}
