//! Non-integral stable fractional matchings from envy-graph rotations.
//!
//! [`solve`] removes forced mutual-first pairs, runs men-proposing
//! Gale–Shapley on what is left, derives extra matchings by rotating along an
//! envy cycle or a chain of envy paths, and then looks for convex weights
//! that keep the combination stable. Weights are tried in stages:
//!
//! 1. [`WeightStage::AlphaLp`]: one constraint per agent, right-hand side
//!    `max_i alpha(agent, mu_i)`.
//! 2. [`WeightStage::PairwiseLp`]: one inequality per potentially blocking
//!    pair, keeping the side that is strictly satisfied at `mu_1`.
//! 3. [`WeightStage::WomenOptimalSupport`]: the same pairwise system on the
//!    support `{mu_1, women-proposing outcome}` when the two differ.
//! 4. [`WeightStage::LocalCone`]: a search for a doubly stochastic direction
//!    `D` along which `(1 - e) mu_1 + e D` stays stable, on residuals of at
//!    most [`LOCAL_CONE_MAX_N`] agents per side.
//!
//! Every candidate is re-verified with [`is_stable`]. The first stage is
//! often infeasible because its right-hand side counts pairs that cannot
//! block near `mu_1`; the later stages only add pair-by-pair reasoning on top
//! of the same rotations.

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cmfp::{cmfp_matching, CmfpResult};
use crate::envy::{build_integral, rotate, EnvyError, EnvyGraph, Rotation, RotationKind};
use crate::fractional::{bvn_decompose, is_stable, FractionalMatching};
use crate::instance::{AgentId, MatchingInstance, Side};
use crate::integral::{gale_shapley, man_utility, IntegralMatching, Proposers};
use crate::lp::{solve as solve_lp, solve_minmax_weight, LinearProgram, LpError, LpStatus, Relation, Sense};
use crate::rational::{rational_to_string_json, Rational};

/// Largest residual on which the local-cone stage runs.
pub const LOCAL_CONE_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Every agent was forced; no rotation was needed.
    Forced,
    Cycle,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightStage {
    AlphaLp,
    PairwiseLp,
    WomenOptimalSupport,
    LocalCone,
}

impl WeightStage {
    pub fn name(self) -> &'static str {
        match self {
            WeightStage::AlphaLp => "alpha-lp",
            WeightStage::PairwiseLp => "pairwise-lp",
            WeightStage::WomenOptimalSupport => "women-optimal-support",
            WeightStage::LocalCone => "local-cone",
        }
    }
}

/// Everything [`solve`] did. Indices in `base`, `rotations`, `improved` and
/// `support` are local to the residual; `residual_men[i]` and
/// `residual_women[j]` give the original indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveTrace {
    pub forced: IntegralMatching,
    pub residual_men: Vec<usize>,
    pub residual_women: Vec<usize>,
    pub branch: Branch,
    pub base: Option<IntegralMatching>,
    pub rotations: Vec<Rotation>,
    pub improved: Vec<AgentId>,
    /// The per-agent alpha system over `mu_1` and the rotations.
    pub alpha_lp: Option<LinearProgram>,
    pub alpha_lp_status: Option<LpStatus>,
    /// Stage that produced the weights; `None` when forced or on fallback.
    pub stage: Option<WeightStage>,
    /// System solved by that stage.
    pub lp: Option<LinearProgram>,
    pub support: Vec<IntegralMatching>,
    pub weights: Vec<Rational>,
    pub composed: FractionalMatching,
}

impl SolveTrace {
    pub fn to_json(&self) -> Value {
        let side = |s: Side| match s {
            Side::Man => "men",
            Side::Woman => "women",
        };
        json!({
            "branch": match self.branch { Branch::Forced => "forced", Branch::Cycle => "cycle", Branch::Path => "path" },
            "forced": self.forced.to_json(),
            "residual": { "men": self.residual_men, "women": self.residual_women },
            "base": self.base.as_ref().map(IntegralMatching::to_json),
            "rotations": self.rotations.iter().map(Rotation::to_json).collect::<Vec<_>>(),
            "improved": self.improved.iter().map(|a| json!({"side": side(a.side), "index": a.index})).collect::<Vec<_>>(),
            "alpha_lp": self.alpha_lp.as_ref().map(LinearProgram::to_json),
            "alpha_lp_status": self.alpha_lp_status.map(status_name),
            "stage": self.stage.map(WeightStage::name),
            "lp": self.lp.as_ref().map(LinearProgram::to_json),
            "support": self.support.iter().map(IntegralMatching::to_json).collect::<Vec<_>>(),
            "weights": self.weights.iter().map(rational_to_string_json).collect::<Vec<_>>(),
            "composed": self.composed.to_json(),
        })
    }
}

fn status_name(s: LpStatus) -> &'static str {
    match s {
        LpStatus::Optimal => "optimal",
        LpStatus::Infeasible => "infeasible",
        LpStatus::Unbounded => "unbounded",
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("internal instability bug: composed matching is blocked by {blocking:?}")]
    InternalInstabilityBug { blocking: Vec<(usize, usize)> },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Envy(#[from] EnvyError),
    /// No stage found non-integral weights. `fallback` carries the forced
    /// pairs plus `mu_1`, which is stable but integral.
    #[error("no non-integral stable weights found on a residual of {residual} agents per side")]
    NoNonIntegralWitness { residual: usize, fallback: Box<SolveTrace> },
}

/// Best value `agent` can get from a counterpart who strictly prefers the
/// agent to what `mu` gives them; 0 when no such counterpart exists.
pub fn alpha(instance: &MatchingInstance, agent: AgentId, mu: &IntegralMatching) -> Rational {
    let n = instance.n();
    let inv = mu.inverse();
    let zero = Rational::zero();
    let mut best = Rational::zero();
    for p in 0..n {
        let (counterpart_now, counterpart_for_agent) = match agent.side {
            Side::Man => (inv[p].map_or(&zero, |h| instance.woman_value(p, h)), instance.woman_value(p, agent.index)),
            Side::Woman => {
                (mu.partner_of_man(p).map_or(&zero, |h| instance.man_value(p, h)), instance.man_value(p, agent.index))
            }
        };
        if counterpart_for_agent > counterpart_now {
            let value = instance.value(agent, p);
            if *value > best {
                best = value.clone();
            }
        }
    }
    best
}

fn woman_utility(instance: &MatchingInstance, inv: &[Option<usize>], w: usize) -> Rational {
    inv[w].map_or_else(Rational::zero, |m| instance.woman_value(w, m).clone())
}

fn sum_row(k: usize) -> Vec<Rational> {
    vec![Rational::one(); k]
}

/// One `>=` row per agent with right-hand side `max_i alpha(agent, mu_i)`,
/// plus `sum x = 1`.
pub fn build_weight_lp(instance: &MatchingInstance, matchings: &[IntegralMatching]) -> LinearProgram {
    let n = instance.n();
    let k = matchings.len();
    let inverses: Vec<Vec<Option<usize>>> = matchings.iter().map(IntegralMatching::inverse).collect();
    let mut lp = LinearProgram::new(k);
    for m in 0..n {
        let coeffs = matchings.iter().map(|mu| man_utility(instance, mu, m)).collect();
        let rhs = matchings.iter().map(|mu| alpha(instance, AgentId::man(m), mu)).max().unwrap_or_default();
        lp.add(coeffs, Relation::Ge, rhs, format!("m{m}"));
    }
    for w in 0..n {
        let coeffs = inverses.iter().map(|inv| woman_utility(instance, inv, w)).collect();
        let rhs = matchings.iter().map(|mu| alpha(instance, AgentId::woman(w), mu)).max().unwrap_or_default();
        lp.add(coeffs, Relation::Ge, rhs, format!("w{w}"));
    }
    lp.add(sum_row(k), Relation::Eq, Rational::one(), "sum");
    lp
}

/// For every pair that could block some combination of `matchings`, require
/// one of its two agents to keep at least the pair's value. Unmatched pairs
/// at `matchings[0]` keep the side that is strict there; pairs matched at
/// `matchings[0]` keep the woman if she strictly gains somewhere, else the
/// man. Constraints are merged into one threshold per agent.
pub fn build_pairwise_lp(instance: &MatchingInstance, matchings: &[IntegralMatching]) -> LinearProgram {
    let n = instance.n();
    let k = matchings.len();
    let base = &matchings[0];
    let inverses: Vec<Vec<Option<usize>>> = matchings.iter().map(IntegralMatching::inverse).collect();
    let man_vals: Vec<Vec<Rational>> =
        (0..n).map(|m| matchings.iter().map(|mu| man_utility(instance, mu, m)).collect()).collect();
    let woman_vals: Vec<Vec<Rational>> =
        (0..n).map(|w| inverses.iter().map(|inv| woman_utility(instance, inv, w)).collect()).collect();
    let mut man_need: Vec<Option<Rational>> = vec![None; n];
    let mut woman_need: Vec<Option<Rational>> = vec![None; n];
    let raise = |slot: &mut Option<Rational>, value: &Rational| {
        if slot.as_ref().is_none_or(|cur| value > cur) {
            *slot = Some(value.clone());
        }
    };
    for m in 0..n {
        for w in 0..n {
            let um = instance.man_value(m, w);
            let vw = instance.woman_value(w, m);
            if man_vals[m].iter().all(|x| x >= um) || woman_vals[w].iter().all(|x| x >= vw) {
                continue;
            }
            let keep_man = if base.partner_of_man(m) == Some(w) {
                !woman_vals[w].iter().any(|x| x > vw)
            } else {
                man_vals[m][0] > *um
            };
            if keep_man {
                raise(&mut man_need[m], um);
            } else {
                raise(&mut woman_need[w], vw);
            }
        }
    }
    let mut lp = LinearProgram::new(k);
    for m in 0..n {
        if let Some(rhs) = man_need[m].take() {
            lp.add(man_vals[m].clone(), Relation::Ge, rhs, format!("m{m}"));
        }
    }
    for w in 0..n {
        if let Some(rhs) = woman_need[w].take() {
            lp.add(woman_vals[w].clone(), Relation::Ge, rhs, format!("w{w}"));
        }
    }
    lp.add(sum_row(k), Relation::Eq, Rational::one(), "sum");
    lp
}

struct Rotations {
    branch: Branch,
    rotations: Vec<Rotation>,
    improved: Vec<AgentId>,
}

fn build_rotations(instance: &MatchingInstance, base: &IntegralMatching) -> Result<Rotations, SolveError> {
    let women = build_integral(instance, base, Side::Woman)?;
    let men = build_integral(instance, base, Side::Man)?;
    for (graph, side) in [(&women, Side::Woman), (&men, Side::Man)] {
        if let Some(cycle) = graph.find_cycle() {
            let rotation = rotate(instance, base, side, &cycle, RotationKind::Cycle)?;
            let improved = cycle.iter().map(|&a| AgentId { side, index: a }).collect();
            return Ok(Rotations { branch: Branch::Cycle, rotations: vec![rotation], improved });
        }
    }
    path_chain(instance, base, &men, &women)
}

/// Alternating sink paths: start at the partner of the lowest-index women's
/// sink, and after each path continue from the partner of its sink on the
/// other side, until that agent has already been improved.
fn path_chain(
    instance: &MatchingInstance,
    base: &IntegralMatching,
    men: &EnvyGraph,
    women: &EnvyGraph,
) -> Result<Rotations, SolveError> {
    let n = instance.n();
    let inv = base.inverse();
    let mut improved: Vec<AgentId> = Vec::new();
    let mut rotations = Vec::new();
    let Some(&first_sink) = women.sinks().first() else {
        return Ok(Rotations { branch: Branch::Path, rotations, improved });
    };
    let mut start = AgentId::man(inv[first_sink].expect("perfect base"));
    // Each path adds its start to `improved`, so 2n iterations always suffice.
    for _ in 0..2 * n {
        if improved.contains(&start) {
            break;
        }
        let graph = match start.side {
            Side::Man => men,
            Side::Woman => women,
        };
        let path = graph.path_to_sink(start.index)?;
        let sink = *path.last().expect("paths are nonempty");
        rotations.push(rotate(instance, base, start.side, &path, RotationKind::Path)?);
        for &a in &path[..path.len() - 1] {
            let agent = AgentId { side: start.side, index: a };
            if !improved.contains(&agent) {
                improved.push(agent);
            }
        }
        start = match start.side {
            Side::Man => AgentId::woman(base.partner_of_man(sink).expect("perfect base")),
            Side::Woman => AgentId::man(inv[sink].expect("perfect base")),
        };
    }
    Ok(Rotations { branch: Branch::Path, rotations, improved })
}

fn combine(n: usize, support: &[IntegralMatching], weights: &[Rational]) -> FractionalMatching {
    let mut table = vec![vec![Rational::zero(); n]; n];
    for (mu, x) in support.iter().zip(weights) {
        for (m, w) in mu.pairs() {
            table[m][w] += x;
        }
    }
    FractionalMatching::new(table).expect("convex combination of perfect matchings")
}

/// Places forced pairs at weight 1 and the residual table at the residual's
/// original indices.
fn embed(n: usize, result: &CmfpResult, residual: &FractionalMatching) -> FractionalMatching {
    let mut table = vec![vec![Rational::zero(); n]; n];
    for (m, w) in result.forced.pairs() {
        table[m][w] = Rational::one();
    }
    for (i, &m) in result.residual.men.iter().enumerate() {
        for (j, &w) in result.residual.women.iter().enumerate() {
            table[m][w] = residual.weight(i, j).clone();
        }
    }
    FractionalMatching::new(table).expect("embedding preserves sums")
}

/// Min-max weights for `lp` over `support`; `Some` only when the result is
/// not integral.
fn weigh(
    support: &[IntegralMatching],
    lp: &LinearProgram,
) -> Result<(LpStatus, Option<(Vec<Rational>, FractionalMatching)>), SolveError> {
    let solution = solve_minmax_weight(lp)?;
    if solution.status != LpStatus::Optimal || solution.objective_value >= Rational::one() {
        return Ok((solution.status, None));
    }
    let n = support[0].n();
    let mixed = combine(n, support, &solution.values);
    if mixed.is_integral() {
        return Ok((solution.status, None));
    }
    Ok((solution.status, Some((solution.values, mixed))))
}

struct Found {
    stage: WeightStage,
    lp: LinearProgram,
    support: Vec<IntegralMatching>,
    weights: Vec<Rational>,
    residual: FractionalMatching,
}

fn find_weights(
    instance: &MatchingInstance,
    support: &[IntegralMatching],
    alpha_lp: &LinearProgram,
) -> Result<(LpStatus, Option<Found>), SolveError> {
    let (alpha_status, hit) = weigh(support, alpha_lp)?;
    if let Some((weights, residual)) = hit {
        let found =
            Found { stage: WeightStage::AlphaLp, lp: alpha_lp.clone(), support: support.to_vec(), weights, residual };
        return Ok((alpha_status, Some(found)));
    }
    let pairwise = build_pairwise_lp(instance, support);
    if let (_, Some((weights, residual))) = weigh(support, &pairwise)? {
        let found =
            Found { stage: WeightStage::PairwiseLp, lp: pairwise, support: support.to_vec(), weights, residual };
        return Ok((alpha_status, Some(found)));
    }
    let women_optimal = gale_shapley(instance, Proposers::Women);
    if women_optimal != support[0] {
        let pair = vec![support[0].clone(), women_optimal];
        let lp = build_pairwise_lp(instance, &pair);
        if let (_, Some((weights, residual))) = weigh(&pair, &lp)? {
            let found = Found { stage: WeightStage::WomenOptimalSupport, lp, support: pair, weights, residual };
            return Ok((alpha_status, Some(found)));
        }
    }
    if instance.n() <= LOCAL_CONE_MAX_N {
        if let Some((lp, residual)) = local_cone(instance, &support[0])? {
            let parts = bvn_decompose(&residual).expect("local cone output is doubly stochastic");
            let (weights, support) = parts.into_iter().unzip();
            let found = Found { stage: WeightStage::LocalCone, lp, support, weights, residual };
            return Ok((alpha_status, Some(found)));
        }
    }
    Ok((alpha_status, None))
}

pub fn solve(instance: &MatchingInstance) -> Result<SolveTrace, SolveError> {
    let n = instance.n();
    let result = cmfp_matching(instance);
    let mut trace = SolveTrace {
        forced: result.forced.clone(),
        residual_men: result.residual.men.clone(),
        residual_women: result.residual.women.clone(),
        branch: Branch::Forced,
        base: None,
        rotations: Vec::new(),
        improved: Vec::new(),
        alpha_lp: None,
        alpha_lp_status: None,
        stage: None,
        lp: None,
        support: Vec::new(),
        weights: Vec::new(),
        composed: FractionalMatching::from_integral(&result.forced),
    };
    if result.residual.is_empty() {
        return Ok(trace);
    }
    let residual = &result.residual.instance;
    let base = gale_shapley(residual, Proposers::Men);
    let rotations = build_rotations(residual, &base)?;
    let mut support = vec![base.clone()];
    for rotation in &rotations.rotations {
        if !support.contains(&rotation.produced) {
            support.push(rotation.produced.clone());
        }
    }
    let alpha_lp = build_weight_lp(residual, &support);
    let (alpha_status, found) = find_weights(residual, &support, &alpha_lp)?;
    trace.branch = rotations.branch;
    trace.base = Some(base.clone());
    trace.rotations = rotations.rotations;
    trace.improved = rotations.improved;
    trace.alpha_lp = Some(alpha_lp);
    trace.alpha_lp_status = Some(alpha_status);
    let Some(found) = found else {
        trace.support = vec![base.clone()];
        trace.weights = vec![Rational::one()];
        trace.composed = embed(n, &result, &FractionalMatching::from_integral(&base));
        verify(instance, &trace.composed)?;
        return Err(SolveError::NoNonIntegralWitness { residual: residual.n(), fallback: Box::new(trace) });
    };
    trace.stage = Some(found.stage);
    trace.lp = Some(found.lp);
    trace.support = found.support;
    trace.weights = found.weights;
    trace.composed = embed(n, &result, &found.residual);
    verify(instance, &trace.composed)?;
    Ok(trace)
}

fn verify(instance: &MatchingInstance, composed: &FractionalMatching) -> Result<(), SolveError> {
    let report = is_stable(instance, composed).expect("composed matching has the instance's size");
    if report.is_stable() {
        Ok(())
    } else {
        Err(SolveError::InternalInstabilityBug { blocking: report.blocking })
    }
}

/// Searches for a doubly stochastic `D != mu_1` such that every pair matched
/// at `mu_1` keeps one chosen side at its `mu_1` value under `D`; then every
/// other pair stays unblocked for a small enough step toward `D`, because its
/// strict side at `mu_1` only moves continuously.
///
/// Side choices are explored depth-first; a partial choice whose relaxation
/// already forces `D = mu_1` is pruned.
fn local_cone(
    instance: &MatchingInstance,
    base: &IntegralMatching,
) -> Result<Option<(LinearProgram, FractionalMatching)>, SolveError> {
    let n = instance.n();
    let perm = base.permutation().expect("perfect base");
    let var = |m: usize, w: usize| m * n + w;
    let mut root = LinearProgram::new(n * n);
    for m in 0..n {
        let mut row = vec![Rational::zero(); n * n];
        for w in 0..n {
            row[var(m, w)] = Rational::one();
        }
        root.add(row, Relation::Eq, Rational::one(), format!("row{m}"));
    }
    for w in 0..n {
        let mut col = vec![Rational::zero(); n * n];
        for m in 0..n {
            col[var(m, w)] = Rational::one();
        }
        root.add(col, Relation::Eq, Rational::one(), format!("col{w}"));
    }
    let mut objective = vec![Rational::one(); n * n];
    for (m, &w) in perm.iter().enumerate() {
        objective[var(m, w)] = Rational::zero();
    }
    root.set_objective(objective, Sense::Max);

    let side_row = |m: usize, keep_man: bool| -> (Vec<Rational>, Rational, String) {
        let w = perm[m];
        let mut row = vec![Rational::zero(); n * n];
        if keep_man {
            for x in 0..n {
                row[var(m, x)] = instance.man_value(m, x).clone();
            }
            (row, instance.man_value(m, w).clone(), format!("m{m}"))
        } else {
            for y in 0..n {
                row[var(y, w)] = instance.woman_value(w, y).clone();
            }
            (row, instance.woman_value(w, m).clone(), format!("w{w}"))
        }
    };

    // Branch and bound: a node whose optimum already meets one side of every
    // base pair is accepted without fixing the rest.
    let meets = |values: &[Rational], m: usize, keep_man: bool| -> bool {
        let (row, rhs, _) = side_row(m, keep_man);
        let total: Rational = row.iter().zip(values).map(|(a, x)| a * x).sum();
        total >= rhs
    };
    let mut stack: Vec<(LinearProgram, Vec<bool>)> = vec![(root, vec![false; n])];
    while let Some((lp, decided)) = stack.pop() {
        let solution = solve_lp(&lp)?;
        if solution.status != LpStatus::Optimal || !solution.objective_value.is_positive() {
            continue;
        }
        let violated =
            (0..n).find(|&m| !decided[m] && !meets(&solution.values, m, true) && !meets(&solution.values, m, false));
        if violated.is_none() {
            let direction =
                FractionalMatching::new((0..n).map(|m| solution.values[m * n..(m + 1) * n].to_vec()).collect())
                    .expect("doubly stochastic solution");
            if let Some(mixed) = step_toward(instance, base, &direction) {
                return Ok(Some((lp, mixed)));
            }
        }
        let Some(m) = violated.or_else(|| (0..n).find(|&m| !decided[m])) else { continue };
        // Push the woman side first so the man side is explored first.
        for keep_man in [false, true] {
            let (row, rhs, label) = side_row(m, keep_man);
            let mut child = lp.clone();
            child.add(row, Relation::Ge, rhs, label);
            let mut fixed = decided.clone();
            fixed[m] = true;
            stack.push((child, fixed));
        }
    }
    Ok(None)
}

/// `(1 - e) mu_1 + e D` with the largest `e <= 1/2` keeping every pair
/// unmatched at `mu_1` satisfied on one of its strict sides.
fn step_toward(
    instance: &MatchingInstance,
    base: &IntegralMatching,
    direction: &FractionalMatching,
) -> Option<FractionalMatching> {
    let n = instance.n();
    let perm = base.permutation()?;
    let inv = base.inverse();
    let profile = crate::fractional::utilities(instance, direction).ok()?;
    let mut eps = Rational::new(1.into(), 2.into());
    // Largest step keeping `now + e (target_util - now) >= need`.
    let bound = |now: &Rational, at_d: &Rational, need: &Rational| -> Option<Rational> {
        if now <= need {
            return None;
        }
        if at_d >= need {
            return Some(Rational::one());
        }
        Some((now - need) / (now - at_d))
    };
    for m in 0..n {
        for w in 0..n {
            if perm[m] == w {
                continue;
            }
            let man_now = instance.man_value(m, perm[m]);
            let woman_now = instance.woman_value(w, inv[w]?);
            let by_man = bound(man_now, &profile.men[m], instance.man_value(m, w));
            let by_woman = bound(woman_now, &profile.women[w], instance.woman_value(w, m));
            let best = match (by_man, by_woman) {
                (Some(a), Some(b)) => a.max(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => return None,
            };
            if best < eps {
                eps = best;
            }
        }
    }
    let keep = Rational::one() - &eps;
    let table = (0..n)
        .map(|m| {
            (0..n)
                .map(|w| {
                    let on_base = if perm[m] == w { keep.clone() } else { Rational::zero() };
                    on_base + &eps * direction.weight(m, w)
                })
                .collect()
        })
        .collect();
    FractionalMatching::new(table).ok()
}

pub type MechanismRule = fn(&MatchingInstance) -> Result<FractionalMatching, SolveError>;

/// A named stable-matching mechanism.
#[derive(Clone, Copy)]
pub struct Mechanism {
    pub name: &'static str,
    pub rule: MechanismRule,
    /// Output depends only on the preference orders, not on the values.
    pub ordinal: bool,
    /// Returns the forced matching on CMFP instances, so the output there is
    /// ordinal even when `ordinal` is false.
    pub forced_on_cmfp: bool,
}

impl std::fmt::Debug for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mechanism")
            .field("name", &self.name)
            .field("ordinal", &self.ordinal)
            .field("forced_on_cmfp", &self.forced_on_cmfp)
            .finish()
    }
}

impl Mechanism {
    pub fn run(&self, instance: &MatchingInstance) -> Result<FractionalMatching, SolveError> {
        (self.rule)(instance)
    }
}

fn gs_men(instance: &MatchingInstance) -> Result<FractionalMatching, SolveError> {
    Ok(FractionalMatching::from_integral(&gale_shapley(instance, Proposers::Men)))
}

fn gs_women(instance: &MatchingInstance) -> Result<FractionalMatching, SolveError> {
    Ok(FractionalMatching::from_integral(&gale_shapley(instance, Proposers::Women)))
}

/// [`solve`]'s composed matching, or its integral fallback.
fn envy_frac(instance: &MatchingInstance) -> Result<FractionalMatching, SolveError> {
    match solve(instance) {
        Ok(trace) => Ok(trace.composed),
        Err(SolveError::NoNonIntegralWitness { fallback, .. }) => Ok(fallback.composed),
        Err(e) => Err(e),
    }
}

pub fn mechanisms() -> Vec<Mechanism> {
    vec![
        Mechanism { name: "gs-men", rule: gs_men, ordinal: true, forced_on_cmfp: true },
        Mechanism { name: "gs-women", rule: gs_women, ordinal: true, forced_on_cmfp: true },
        Mechanism { name: "envy-frac", rule: envy_frac, ordinal: false, forced_on_cmfp: true },
    ]
}

pub fn mechanism(name: &str) -> Option<Mechanism> {
    mechanisms().into_iter().find(|m| m.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn conflict() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![1, 2], vec![2, 1]]).unwrap()
    }

    fn swap() -> IntegralMatching {
        IntegralMatching::perfect(vec![1, 0]).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let inst = conflict();
        assert_eq!(alpha(&inst, AgentId::man(0), &IntegralMatching::identity(2)), int(1));
        assert_eq!(alpha(&inst, AgentId::man(0), &swap()), int(0));
    }

    #[test]
    fn alpha_lp_on_conflict_covers_simplex() {
        let lp = build_weight_lp(&conflict(), &[IntegralMatching::identity(2), swap()]);
        assert_eq!(lp.constraints[0].coeffs, vec![int(2), int(1)]);
        assert_eq!(lp.constraints[0].rhs, int(1));
        for x in [int(0), ratio(1, 3), int(1)] {
            assert!(lp.is_satisfied_by(&[x.clone(), int(1) - x]));
        }
    }

    #[test]
    fn conflict_cycle_gives_half_half() {
        let trace = solve(&conflict()).unwrap();
        assert_eq!(trace.branch, Branch::Cycle);
        assert_eq!(trace.stage, Some(WeightStage::AlphaLp));
        assert_eq!(trace.weights, vec![ratio(1, 2), ratio(1, 2)]);
        let h = ratio(1, 2);
        assert_eq!(trace.composed.weights(), &[vec![h.clone(), h.clone()], vec![h.clone(), h]]);
    }

    #[test]
    fn forced_instances_short_circuit() {
        let soul = MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![2, 1], vec![1, 2]]).unwrap();
        let trace = solve(&soul).unwrap();
        assert_eq!(trace.branch, Branch::Forced);
        assert!(trace.support.is_empty());
        assert_eq!(trace.composed, FractionalMatching::from_integral(&IntegralMatching::identity(2)));
        for mech in mechanisms() {
            assert_eq!(mech.run(&soul).unwrap(), trace.composed, "{}", mech.name);
        }
    }

    #[test]
    fn mechanisms_on_conflict() {
        assert_eq!(
            mechanism("gs-men").unwrap().run(&conflict()).unwrap(),
            FractionalMatching::from_integral(&IntegralMatching::identity(2))
        );
        assert!(!mechanism("envy-frac").unwrap().run(&conflict()).unwrap().is_integral());
        assert!(mechanism("serial-dictator").is_none());
    }

    #[test]
    fn pairwise_system_is_sound_on_random_supports() {
        for seed in 0..40 {
            let inst = crate::instance::generate(4, seed, crate::instance::GenMode::NoMfp).unwrap();
            let base = gale_shapley(&inst, Proposers::Men);
            let other = gale_shapley(&inst, Proposers::Women);
            let support = vec![base, other];
            let lp = build_pairwise_lp(&inst, &support);
            let sol = solve_minmax_weight(&lp).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            let mixed = combine(4, &support, &sol.values);
            assert!(is_stable(&inst, &mixed).unwrap().is_stable());
        }
    }
}
