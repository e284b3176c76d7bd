//! Matching instances: `n` men, `n` women and two exact valuation tables.
//!
//! `u[i][j]` is man `i`'s value for woman `j`; `v[i][j]` is woman `j`'s value
//! for man `i`. Both tables are indexed `[man][woman]`.

use std::fmt;

use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cmfp::mfp_pairs;
use crate::rational::{int, rational_from_json, rational_to_json, Rational, RationalParseError};

/// Number of resampling attempts before `GenMode::NoMfp` gives up.
pub const NO_MFP_RETRY_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Man,
    Woman,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Man => Side::Woman,
            Side::Woman => Side::Man,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub fn man(index: usize) -> Self {
        AgentId { side: Side::Man, index }
    }

    pub fn woman(index: usize) -> Self {
        AgentId { side: Side::Woman, index }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Man => write!(f, "m{}", self.index),
            Side::Woman => write!(f, "w{}", self.index),
        }
    }
}

/// Parses `m3` or `w0`.
impl std::str::FromStr for AgentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected an agent like m0 or w1, got {s:?}");
        let (side, digits) = match s.split_at_checked(1) {
            Some(("m", rest)) => (Side::Man, rest),
            Some(("w", rest)) => (Side::Woman, rest),
            _ => return Err(bad()),
        };
        let index = digits.parse().map_err(|_| bad())?;
        Ok(AgentId { side, index })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Table {
    U,
    V,
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Table::U => "U",
            Table::V => "V",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NegativeEntry {
        table: Table,
        man: usize,
        woman: usize,
        value: Rational,
    },
    /// Man `man` gives the same value to two women (a row of `U`).
    DuplicateInRow {
        man: usize,
        value: Rational,
    },
    /// Woman `woman` gives the same value to two men (a column of `V`).
    DuplicateInColumn {
        woman: usize,
        value: Rational,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeEntry { table, man, woman, value } => {
                write!(f, "negative entry {table}[{man}][{woman}] = {value}")
            }
            Violation::DuplicateInRow { man, value } => {
                write!(f, "row {man} of U repeats value {value}")
            }
            Violation::DuplicateInColumn { woman, value } => {
                write!(f, "column {woman} of V repeats value {value}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid instance: {0}")]
    Validation(ValidationReport),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("no instance without mutual first preferences found after {attempts} attempts (n = {n})")]
    GenerationExhausted { n: usize, attempts: usize },
}

impl From<RationalParseError> for InstanceError {
    fn from(err: RationalParseError) -> Self {
        InstanceError::Parse(err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatchingInstance {
    n: usize,
    u: Vec<Vec<Rational>>,
    v: Vec<Vec<Rational>>,
}

/// Checks the strictness and nonnegativity invariants of a pair of tables.
pub fn validate(u: &[Vec<Rational>], v: &[Vec<Rational>]) -> Result<ValidationReport, InstanceError> {
    let n = u.len();
    if v.len() != n || u.iter().chain(v.iter()).any(|row| row.len() != n) {
        return Err(InstanceError::DimensionMismatch(format!(
            "U is {}x{:?}, V is {}x{:?}; both must be n x n",
            u.len(),
            u.iter().map(Vec::len).collect::<Vec<_>>(),
            v.len(),
            v.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let mut report = ValidationReport::default();
    for (table, matrix) in [(Table::U, u), (Table::V, v)] {
        for (i, row) in matrix.iter().enumerate() {
            for (j, value) in row.iter().enumerate() {
                if value.is_negative() {
                    report.violations.push(Violation::NegativeEntry { table, man: i, woman: j, value: value.clone() });
                }
            }
        }
    }
    for (man, row) in u.iter().enumerate() {
        if let Some(value) = first_duplicate(row.iter()) {
            report.violations.push(Violation::DuplicateInRow { man, value });
        }
    }
    for woman in 0..n {
        if let Some(value) = first_duplicate(v.iter().map(|row| &row[woman])) {
            report.violations.push(Violation::DuplicateInColumn { woman, value });
        }
    }
    Ok(report)
}

fn first_duplicate<'a>(values: impl Iterator<Item = &'a Rational>) -> Option<Rational> {
    let mut seen: Vec<&Rational> = values.collect();
    seen.sort();
    seen.windows(2).find(|w| w[0] == w[1]).map(|w| w[0].clone())
}

impl MatchingInstance {
    pub fn new(u: Vec<Vec<Rational>>, v: Vec<Vec<Rational>>) -> Result<Self, InstanceError> {
        if u.is_empty() {
            return Err(InstanceError::DimensionMismatch("n must be at least 1".into()));
        }
        let report = validate(&u, &v)?;
        if !report.is_ok() {
            return Err(InstanceError::Validation(report));
        }
        Ok(MatchingInstance { n: u.len(), u, v })
    }

    pub fn from_integers(u: &[Vec<i64>], v: &[Vec<i64>]) -> Result<Self, InstanceError> {
        let conv = |m: &[Vec<i64>]| m.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect();
        MatchingInstance::new(conv(u), conv(v))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> &[Vec<Rational>] {
        &self.u
    }

    pub fn v(&self) -> &[Vec<Rational>] {
        &self.v
    }

    /// Man `man`'s value for woman `woman`.
    pub fn man_value(&self, man: usize, woman: usize) -> &Rational {
        &self.u[man][woman]
    }

    /// Woman `woman`'s value for man `man`.
    pub fn woman_value(&self, woman: usize, man: usize) -> &Rational {
        &self.v[man][woman]
    }

    /// `agent`'s value for being matched with `partner` on the other side.
    pub fn value(&self, agent: AgentId, partner: usize) -> &Rational {
        match agent.side {
            Side::Man => self.man_value(agent.index, partner),
            Side::Woman => self.woman_value(agent.index, partner),
        }
    }

    /// The agent's valuation sequence over the other side, in index order.
    pub fn valuations(&self, agent: AgentId) -> Vec<Rational> {
        (0..self.n).map(|p| self.value(agent, p).clone()).collect()
    }

    /// A copy with `agent`'s valuations replaced by `report`.
    pub fn with_report(&self, agent: AgentId, report: &[Rational]) -> Result<Self, InstanceError> {
        if report.len() != self.n {
            return Err(InstanceError::DimensionMismatch(format!(
                "report has {} entries, expected {}",
                report.len(),
                self.n
            )));
        }
        // Only the replaced row or column can break the invariants.
        let mut report_check = ValidationReport::default();
        for (p, value) in report.iter().enumerate() {
            if value.is_negative() {
                let (man, woman) = match agent.side {
                    Side::Man => (agent.index, p),
                    Side::Woman => (p, agent.index),
                };
                let table = if agent.side == Side::Man { Table::U } else { Table::V };
                report_check.violations.push(Violation::NegativeEntry { table, man, woman, value: value.clone() });
            }
        }
        if let Some(value) = first_duplicate(report.iter()) {
            report_check.violations.push(match agent.side {
                Side::Man => Violation::DuplicateInRow { man: agent.index, value },
                Side::Woman => Violation::DuplicateInColumn { woman: agent.index, value },
            });
        }
        if !report_check.is_ok() {
            return Err(InstanceError::Validation(report_check));
        }
        let mut next = self.clone();
        match agent.side {
            Side::Man => next.u[agent.index] = report.to_vec(),
            Side::Woman => {
                for (m, value) in report.iter().enumerate() {
                    next.v[m][agent.index] = value.clone();
                }
            }
        }
        Ok(next)
    }

    /// Partners of `agent` ordered from most to least preferred.
    pub fn preference_order(&self, agent: AgentId) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.value(agent, b).cmp(self.value(agent, a)));
        order
    }

    /// `rank[p]` is the position of partner `p` in `agent`'s order (0 = top).
    pub fn rank_table(&self, agent: AgentId) -> Vec<usize> {
        let mut rank = vec![0; self.n];
        for (pos, p) in self.preference_order(agent).into_iter().enumerate() {
            rank[p] = pos;
        }
        rank
    }

    /// Restriction to the given men and women (same count), keeping the
    /// mapping back to this instance's indices.
    pub fn restrict(&self, men: &[usize], women: &[usize]) -> SubInstance {
        assert_eq!(men.len(), women.len(), "restriction must stay balanced");
        let pick = |m: &Vec<Vec<Rational>>| -> Vec<Vec<Rational>> {
            men.iter().map(|&i| women.iter().map(|&j| m[i][j].clone()).collect()).collect()
        };
        SubInstance {
            instance: MatchingInstance { n: men.len(), u: pick(&self.u), v: pick(&self.v) },
            men: men.to_vec(),
            women: women.to_vec(),
        }
    }

    pub fn to_json(&self) -> Value {
        let table = |m: &Vec<Vec<Rational>>| -> Value {
            Value::Array(m.iter().map(|row| Value::Array(row.iter().map(rational_to_json).collect())).collect())
        };
        json!({ "n": self.n, "U": table(&self.u), "V": table(&self.v) })
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }
}

/// A balanced sub-instance together with the original indices of its agents.
///
/// May be empty (`n = 0`) when every agent of the parent was removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubInstance {
    pub instance: MatchingInstance,
    pub men: Vec<usize>,
    pub women: Vec<usize>,
}

impl SubInstance {
    pub fn is_empty(&self) -> bool {
        self.men.is_empty()
    }

    pub fn n(&self) -> usize {
        self.men.len()
    }
}

pub fn parse_instance(text: &[u8]) -> Result<MatchingInstance, InstanceError> {
    let value: Value = serde_json::from_slice(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
    instance_from_json(&value)
}

pub fn instance_from_json(value: &Value) -> Result<MatchingInstance, InstanceError> {
    let obj: &Map<String, Value> =
        value.as_object().ok_or_else(|| InstanceError::Parse("instance must be a JSON object".into()))?;
    let n = obj
        .get("n")
        .and_then(Value::as_u64)
        .ok_or_else(|| InstanceError::Parse("field `n` must be a positive integer".into()))? as usize;
    if n == 0 {
        return Err(InstanceError::Parse("field `n` must be a positive integer".into()));
    }
    let read = |key: &str| -> Result<Vec<Vec<Rational>>, InstanceError> {
        let rows = obj
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| InstanceError::Parse(format!("field `{key}` must be an array")))?;
        rows.iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| InstanceError::Parse(format!("rows of `{key}` must be arrays")))?
                    .iter()
                    .map(|x| rational_from_json(x).map_err(InstanceError::from))
                    .collect()
            })
            .collect()
    };
    let u = read("U")?;
    let v = read("V")?;
    if u.len() != n || v.len() != n {
        return Err(InstanceError::DimensionMismatch(format!(
            "n = {n} but U has {} rows and V has {} rows",
            u.len(),
            v.len()
        )));
    }
    MatchingInstance::new(u, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenMode {
    Uniform,
    NoMfp,
    Cmfp,
}

/// Seeded instance generator. Valuations are distinct integers in `[1, 10n]`.
///
/// `Cmfp` draws a hidden pairing order and makes the `t`-th pair each other's
/// favourite among the agents of rounds `t..n`; values for partners of earlier
/// rounds are placed anywhere, mixing the soulmate and popularity patterns.
pub fn generate(n: usize, seed: u64, mode: GenMode) -> Result<MatchingInstance, InstanceError> {
    if n == 0 {
        return Err(InstanceError::DimensionMismatch("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        GenMode::Uniform => Ok(uniform(n, &mut rng)),
        GenMode::NoMfp => {
            if n == 1 {
                return Err(InstanceError::GenerationExhausted { n, attempts: 0 });
            }
            for _ in 0..NO_MFP_RETRY_LIMIT {
                let inst = uniform(n, &mut rng);
                if mfp_pairs(&inst).is_empty() {
                    return Ok(inst);
                }
            }
            Err(InstanceError::GenerationExhausted { n, attempts: NO_MFP_RETRY_LIMIT })
        }
        GenMode::Cmfp => Ok(cmfp_instance(n, &mut rng)),
    }
}

fn distinct_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<i64> {
    rand::seq::index::sample(rng, 10 * n, n).into_iter().map(|x| x as i64 + 1).collect()
}

fn uniform(n: usize, rng: &mut ChaCha8Rng) -> MatchingInstance {
    let u: Vec<Vec<i64>> = (0..n).map(|_| distinct_values(n, rng)).collect();
    let cols: Vec<Vec<i64>> = (0..n).map(|_| distinct_values(n, rng)).collect();
    let v: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
    MatchingInstance::from_integers(&u, &v).expect("generated tables are strict")
}

fn cmfp_instance(n: usize, rng: &mut ChaCha8Rng) -> MatchingInstance {
    let mut men: Vec<usize> = (0..n).collect();
    let mut women: Vec<usize> = (0..n).collect();
    men.shuffle(rng);
    women.shuffle(rng);
    // Round t pairs men[t] with women[t].
    let ranking = |t: usize, others: &[usize], rng: &mut ChaCha8Rng| -> Vec<usize> {
        // Best first: own round partner, later rounds shuffled, earlier rounds
        // inserted at random positions.
        let mut order = vec![others[t]];
        let mut later: Vec<usize> = others[t + 1..].to_vec();
        later.shuffle(rng);
        order.extend(later);
        for &p in &others[..t] {
            let pos = rng.gen_range(0..=order.len());
            order.insert(pos, p);
        }
        order
    };
    let mut u = vec![vec![0i64; n]; n];
    let mut v = vec![vec![0i64; n]; n];
    for t in 0..n {
        let mut values = distinct_values(n, rng);
        values.sort_unstable_by(|a, b| b.cmp(a));
        for (value, w) in values.into_iter().zip(ranking(t, &women, rng)) {
            u[men[t]][w] = value;
        }
        let mut values = distinct_values(n, rng);
        values.sort_unstable_by(|a, b| b.cmp(a));
        for (value, m) in values.into_iter().zip(ranking(t, &men, rng)) {
            v[m][women[t]] = value;
        }
    }
    MatchingInstance::from_integers(&u, &v).expect("generated tables are strict")
}
