//! Envy graphs over one side of the market, cycle and sink-path search, and
//! the rotations that shift partners along them.

use std::fmt::Write as _;

use num_traits::Zero;
use serde_json::{json, Value};
use thiserror::Error;

use crate::fractional::{utilities, FractionalError, FractionalMatching};
use crate::instance::{AgentId, MatchingInstance, Side};
use crate::integral::IntegralMatching;
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvyError {
    #[error(transparent)]
    Matching(#[from] FractionalError),
    #[error("cycle encountered at {0} while following a sink path")]
    CycleEncountered(AgentId),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvyGraph {
    side: Side,
    /// Out-neighbours of each agent, most valued allocation first.
    adjacency: Vec<Vec<usize>>,
}

/// `agent`'s value for the allocation `mu` gives to `other` on the same side.
fn value_of_allocation(
    instance: &MatchingInstance,
    mu: &FractionalMatching,
    side: Side,
    agent: usize,
    other: usize,
) -> Rational {
    let n = instance.n();
    let mut total = Rational::zero();
    for p in 0..n {
        let (x, v) = match side {
            Side::Man => (mu.weight(other, p), instance.man_value(agent, p)),
            Side::Woman => (mu.weight(p, other), instance.woman_value(agent, p)),
        };
        if !x.is_zero() {
            total += x * v;
        }
    }
    total
}

pub fn build(instance: &MatchingInstance, mu: &FractionalMatching, side: Side) -> Result<EnvyGraph, EnvyError> {
    let profile = utilities(instance, mu)?;
    let n = instance.n();
    let own = match side {
        Side::Man => &profile.men,
        Side::Woman => &profile.women,
    };
    let adjacency = (0..n)
        .map(|a| {
            let mut targets: Vec<(Rational, usize)> = (0..n)
                .filter(|&b| b != a)
                .map(|b| (value_of_allocation(instance, mu, side, a, b), b))
                .filter(|(value, _)| *value > own[a])
                .collect();
            targets.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
            targets.into_iter().map(|(_, b)| b).collect()
        })
        .collect();
    Ok(EnvyGraph { side, adjacency })
}

/// Same graph as [`build`] on the 0/1 weights of `base`, in O(n²) comparisons.
pub fn build_integral(
    instance: &MatchingInstance,
    base: &IntegralMatching,
    side: Side,
) -> Result<EnvyGraph, EnvyError> {
    let n = instance.n();
    if base.n() != n {
        return Err(FractionalError::DimensionMismatch(format!("matching has {} men, instance {n}", base.n())).into());
    }
    // allocation[b] = the partner held by b, if any.
    let allocation: Vec<Option<usize>> = match side {
        Side::Man => base.pairing().to_vec(),
        Side::Woman => base.inverse(),
    };
    let zero = Rational::zero();
    let value = |a: usize, b: usize| -> &Rational {
        allocation[b].map_or(&zero, |p| instance.value(AgentId { side, index: a }, p))
    };
    let adjacency = (0..n)
        .map(|a| {
            let own = value(a, a);
            let mut targets: Vec<usize> = (0..n).filter(|&b| b != a && value(a, b) > own).collect();
            targets.sort_by(|&x, &y| value(a, y).cmp(value(a, x)).then(x.cmp(&y)));
            targets
        })
        .collect();
    Ok(EnvyGraph { side, adjacency })
}

impl EnvyGraph {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.iter().all(Vec::is_empty)
    }

    pub fn successors(&self, a: usize) -> &[usize] {
        &self.adjacency[a]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> =
            self.adjacency.iter().enumerate().flat_map(|(a, succ)| succ.iter().map(move |&b| (a, b))).collect();
        out.sort_unstable();
        out
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&a| self.adjacency[a].is_empty()).collect()
    }

    fn agent(&self, index: usize) -> AgentId {
        AgentId { side: self.side, index }
    }

    /// First cycle closed by a back edge in a depth-first search started from
    /// each node in index order.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let n = self.len();
        let mut mark = vec![Mark::New; n];
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // Stack of (node, next successor position); `path` mirrors it.
            let mut stack = vec![(root, 0usize)];
            let mut path = vec![root];
            mark[root] = Mark::Open;
            while let Some(&mut (a, ref mut pos)) = stack.last_mut() {
                if let Some(&b) = self.adjacency[a].get(*pos) {
                    *pos += 1;
                    match mark[b] {
                        Mark::Open => {
                            let start = path.iter().position(|&x| x == b).expect("open nodes lie on the path");
                            return Some(path[start..].to_vec());
                        }
                        Mark::New => {
                            mark[b] = Mark::Open;
                            stack.push((b, 0));
                            path.push(b);
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[a] = Mark::Done;
                    stack.pop();
                    path.pop();
                }
            }
        }
        None
    }

    /// Follows the most valued envy edge from `start` until a sink.
    pub fn path_to_sink(&self, start: usize) -> Result<Vec<usize>, EnvyError> {
        let mut path = vec![start];
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut a = start;
        while let Some(&b) = self.adjacency[a].first() {
            if std::mem::replace(&mut seen[b], true) {
                return Err(EnvyError::CycleEncountered(self.agent(b)));
            }
            path.push(b);
            a = b;
        }
        Ok(path)
    }

    pub fn to_json(&self) -> Value {
        let side = match self.side {
            Side::Man => "men",
            Side::Woman => "women",
        };
        json!({
            "side": side,
            "adjacency": self.adjacency,
            "edges": self.edges().into_iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
        })
    }

    /// Graphviz rendering; nodes are named `m0, m1, ...` or `w0, w1, ...`.
    pub fn to_dot(&self) -> String {
        let name = match self.side {
            Side::Man => "envy_men",
            Side::Woman => "envy_women",
        };
        let mut out = format!("digraph {name} {{\n");
        for a in 0..self.len() {
            let _ = writeln!(out, "  {};", self.agent(a));
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  {} -> {};", self.agent(a), self.agent(b));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RotationKind {
    Cycle,
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rotation {
    pub kind: RotationKind,
    pub side: Side,
    pub nodes: Vec<usize>,
    pub produced: IntegralMatching,
}

impl Rotation {
    pub fn to_json(&self) -> Value {
        json!({
            "kind": match self.kind { RotationKind::Cycle => "cycle", RotationKind::Path => "path" },
            "side": match self.side { Side::Man => "men", Side::Woman => "women" },
            "nodes": self.nodes,
            "produced": self.produced.to_json(),
        })
    }
}

/// Each node takes its successor's base partner; on a path the last node
/// (a sink) takes the first node's partner.
pub fn rotate(
    instance: &MatchingInstance,
    base: &IntegralMatching,
    side: Side,
    nodes: &[usize],
    kind: RotationKind,
) -> Result<Rotation, EnvyError> {
    let n = instance.n();
    let invalid = |msg: String| EnvyError::InvalidRotation(msg);
    let Some(perm) = base.permutation().filter(|p| p.len() == n) else {
        return Err(invalid("base matching must be perfect on the instance".into()));
    };
    let mut seen = vec![false; n];
    for &a in nodes {
        if a >= n || std::mem::replace(&mut seen[a], true) {
            return Err(invalid(format!("node {a} repeated or out of range")));
        }
    }
    if !nodes.is_empty() {
        let graph = build_integral(instance, base, side)?;
        let last = nodes.len() - 1;
        for (i, &a) in nodes.iter().enumerate().take(last) {
            if !graph.has_edge(a, nodes[i + 1]) {
                return Err(invalid(format!("{} does not envy {}", graph.agent(a), graph.agent(nodes[i + 1]))));
            }
        }
        match kind {
            RotationKind::Cycle if nodes.len() < 2 || !graph.has_edge(nodes[last], nodes[0]) => {
                return Err(invalid("cycle is not closed in the envy graph".into()));
            }
            RotationKind::Path if !graph.successors(nodes[last]).is_empty() => {
                return Err(invalid(format!("path ends at {}, which is not a sink", graph.agent(nodes[last]))));
            }
            _ => {}
        }
    }
    let produced = match side {
        Side::Man => {
            let mut next = perm.clone();
            for (i, &a) in nodes.iter().enumerate() {
                next[a] = perm[nodes[(i + 1) % nodes.len()]];
            }
            next
        }
        Side::Woman => {
            let mut inv = vec![0; n];
            for (m, &w) in perm.iter().enumerate() {
                inv[w] = m;
            }
            let mut next = perm.clone();
            for (i, &a) in nodes.iter().enumerate() {
                next[inv[nodes[(i + 1) % nodes.len()]]] = a;
            }
            next
        }
    };
    Ok(Rotation {
        kind,
        side,
        nodes: nodes.to_vec(),
        produced: IntegralMatching::perfect(produced).expect("rotation permutes partners"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conflict() -> MatchingInstance {
        MatchingInstance::from_integers(&[vec![2, 1], vec![1, 2]], &[vec![1, 2], vec![2, 1]]).unwrap()
    }

    fn graph(side: Side, adjacency: Vec<Vec<usize>>) -> EnvyGraph {
        EnvyGraph { side, adjacency }
    }

    #[test]
    fn conflict_graphs() {
        let base = IntegralMatching::identity(2);
        let women = build_integral(&conflict(), &base, Side::Woman).unwrap();
        assert_eq!(women.edges(), vec![(0, 1), (1, 0)]);
        assert_eq!(women.find_cycle(), Some(vec![0, 1]));
        let men = build_integral(&conflict(), &base, Side::Man).unwrap();
        assert!(men.is_empty());
        assert_eq!(men.find_cycle(), None);
    }

    #[test]
    fn conflict_cycle_rotation() {
        let base = IntegralMatching::identity(2);
        let rot = rotate(&conflict(), &base, Side::Woman, &[0, 1], RotationKind::Cycle).unwrap();
        assert_eq!(rot.produced, IntegralMatching::perfect(vec![1, 0]).unwrap());
        let same = rotate(&conflict(), &base, Side::Woman, &[], RotationKind::Cycle).unwrap();
        assert_eq!(same.produced, base);
    }

    #[test]
    fn rejects_non_edges() {
        let base = IntegralMatching::identity(2);
        assert!(rotate(&conflict(), &base, Side::Man, &[0, 1], RotationKind::Cycle).is_err());
        assert!(rotate(&conflict(), &base, Side::Woman, &[0, 0], RotationKind::Cycle).is_err());
    }

    #[test]
    fn path_graph_search() {
        let g = graph(Side::Man, vec![vec![1], vec![2], vec![]]);
        assert_eq!(g.find_cycle(), None);
        assert_eq!(g.path_to_sink(0).unwrap(), vec![0, 1, 2]);
        assert_eq!(g.path_to_sink(2).unwrap(), vec![2]);
        assert_eq!(g.sinks(), vec![2]);
    }

    #[test]
    fn cycle_reached_off_the_greedy_route() {
        // 0's preferred edge leads to a sink; the cycle 1 <-> 3 is found via
        // its second edge.
        let g = graph(Side::Woman, vec![vec![2, 1], vec![3], vec![], vec![1]]);
        assert_eq!(g.find_cycle(), Some(vec![1, 3]));
        let looped = graph(Side::Woman, vec![vec![1], vec![0]]);
        assert!(matches!(looped.path_to_sink(0), Err(EnvyError::CycleEncountered(_))));
    }

    #[test]
    fn path_rotation_shifts_partners() {
        // Men 0 -> 1 -> 2 with partners w0, w1, w2: 0 gets w1, 1 gets w2 and
        // the sink 2 gets w0.
        let inst = MatchingInstance::from_integers(
            &[vec![1, 2, 0], vec![0, 1, 2], vec![0, 1, 2]],
            &[vec![1, 1, 1], vec![2, 2, 2], vec![3, 3, 3]],
        )
        .unwrap();
        let base = IntegralMatching::identity(3);
        let g = build_integral(&inst, &base, Side::Man).unwrap();
        assert_eq!(g.path_to_sink(0).unwrap(), vec![0, 1, 2]);
        let rot = rotate(&inst, &base, Side::Man, &[0, 1, 2], RotationKind::Path).unwrap();
        assert_eq!(rot.produced, IntegralMatching::perfect(vec![1, 2, 0]).unwrap());
    }

    #[test]
    fn integral_builder_matches_general_builder() {
        for seed in 0..20 {
            let inst = crate::instance::generate(5, seed, crate::instance::GenMode::Uniform).unwrap();
            let base = crate::integral::gale_shapley(&inst, crate::integral::Proposers::Men);
            let weights = FractionalMatching::from_integral(&base);
            for side in [Side::Man, Side::Woman] {
                assert_eq!(build_integral(&inst, &base, side).unwrap(), build(&inst, &weights, side).unwrap());
            }
        }
    }

    #[test]
    fn dot_output() {
        let g = graph(Side::Woman, vec![vec![1], vec![]]);
        assert_eq!(g.to_dot(), "digraph envy_women {\n  w0;\n  w1;\n  w0 -> w1;\n}\n");
    }
}
