//! Small exact linear programs over nonnegative variables.
//!
//! [`solve`] runs a dense two-phase tableau simplex with Bland's rule over
//! [`Rational`]. Phase one starts from slacks where it can and from one
//! artificial per `>=` or `=` row otherwise.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::rational::{bit_size, rational_to_string_json, Rational};

pub const DEFAULT_MAX_BITS: u64 = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
    /// Free-form tag shown in dumps (`"m3"`, `"sum"`, ...).
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<Rational>,
    pub sense: Sense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; empty unless `Optimal`.
    pub values: Vec<Rational>,
    pub objective_value: Rational,
    pub pivots: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("numeric blowup: tableau entry reached {bits} bits (limit {limit})")]
    NumericBlowup { bits: u64, limit: u64 },
}

impl LinearProgram {
    /// Feasibility problem (zero objective) in `num_vars` variables.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            constraints: Vec::new(),
            objective: vec![Rational::zero(); num_vars],
            sense: Sense::Max,
        }
    }

    pub fn add(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational, label: impl Into<String>) {
        self.constraints.push(Constraint { coeffs, relation, rhs, label: label.into() });
    }

    pub fn set_objective(&mut self, coeffs: Vec<Rational>, sense: Sense) {
        self.objective = coeffs;
        self.sense = sense;
    }

    fn check(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::Malformed(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.num_vars {
                return Err(LpError::Malformed(format!(
                    "constraint {i} has {} coefficients for {} variables",
                    c.coeffs.len(),
                    self.num_vars
                )));
            }
        }
        Ok(())
    }

    /// Exact check of every constraint and of nonnegativity.
    pub fn is_satisfied_by(&self, values: &[Rational]) -> bool {
        values.len() == self.num_vars
            && values.iter().all(|x| !x.is_negative())
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.coeffs.iter().zip(values).map(|(a, x)| a * x).sum();
                match c.relation {
                    Relation::Le => lhs <= c.rhs,
                    Relation::Ge => lhs >= c.rhs,
                    Relation::Eq => lhs == c.rhs,
                }
            })
    }

    pub fn objective_at(&self, values: &[Rational]) -> Rational {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    pub fn to_json(&self) -> Value {
        let row = |v: &[Rational]| v.iter().map(rational_to_string_json).collect::<Vec<_>>();
        json!({
            "num_vars": self.num_vars,
            "sense": match self.sense { Sense::Min => "min", Sense::Max => "max" },
            "objective": row(&self.objective),
            "constraints": self.constraints.iter().map(|c| json!({
                "label": c.label,
                "coeffs": row(&c.coeffs),
                "relation": relation_symbol(c.relation),
                "rhs": rational_to_string_json(&c.rhs),
            })).collect::<Vec<_>>(),
        })
    }
}

fn relation_symbol(r: Relation) -> &'static str {
    match r {
        Relation::Le => "<=",
        Relation::Ge => ">=",
        Relation::Eq => "=",
    }
}

fn linear_form(coeffs: &[Rational]) -> String {
    let terms: Vec<String> =
        coeffs.iter().enumerate().filter(|(_, a)| !a.is_zero()).map(|(j, a)| format!("{a} x{}", j + 1)).collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// One line per constraint, e.g. `m0: 2 x1 + 1 x2 >= 1`.
impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sense = match self.sense {
            Sense::Min => "min",
            Sense::Max => "max",
        };
        writeln!(f, "{sense}: {}", linear_form(&self.objective))?;
        for (i, c) in self.constraints.iter().enumerate() {
            let label = if c.label.is_empty() { format!("c{i}") } else { c.label.clone() };
            writeln!(f, "{label}: {} {} {}", linear_form(&c.coeffs), relation_symbol(c.relation), c.rhs)?;
        }
        Ok(())
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with_limit(lp, DEFAULT_MAX_BITS)
}

pub fn solve_with_limit(lp: &LinearProgram, max_bits: u64) -> Result<LpSolution, LpError> {
    lp.check()?;
    let objective: Vec<Rational> = match lp.sense {
        Sense::Max => lp.objective.clone(),
        Sense::Min => lp.objective.iter().map(|c| -c).collect(),
    };
    let mut tableau = Tableau::new(lp, max_bits);
    let status = tableau.run(&objective)?;
    let pivots = tableau.pivots;
    if status != LpStatus::Optimal {
        return Ok(LpSolution { status, values: Vec::new(), objective_value: Rational::zero(), pivots });
    }
    let values = tableau.primal(lp.num_vars);
    let objective_value = lp.objective_at(&values);
    Ok(LpSolution { status, values, objective_value, pivots })
}

/// `min t` subject to `x_i <= t` and the constraints of `lp`, which should
/// already contain `sum x = 1`. Returns the `x` part; the objective value is
/// the optimal `t`.
pub fn solve_minmax_weight(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    match minmax_on_segment(lp) {
        Some(sol) => Ok(sol),
        None => minmax_by_simplex(lp),
    }
}

fn minmax_by_simplex(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let k = lp.num_vars;
    let mut ext = LinearProgram::new(k + 1);
    for c in &lp.constraints {
        let mut coeffs = c.coeffs.clone();
        coeffs.push(Rational::zero());
        ext.add(coeffs, c.relation, c.rhs.clone(), c.label.clone());
    }
    for i in 0..k {
        let mut coeffs = vec![Rational::zero(); k + 1];
        coeffs[i] = Rational::one();
        coeffs[k] = -Rational::one();
        ext.add(coeffs, Relation::Le, Rational::zero(), format!("cap{}", i + 1));
    }
    let mut objective = vec![Rational::zero(); k + 1];
    objective[k] = Rational::one();
    ext.set_objective(objective, Sense::Min);
    let mut sol = solve(&ext)?;
    if sol.status == LpStatus::Optimal {
        sol.values.truncate(k);
    }
    Ok(sol)
}

/// Two weights summing to one leave a single parameter `s = x1`, and
/// `max(s, 1 - s)` has a unique minimizer on any interval, so the answer
/// equals the simplex optimum without pivoting.
fn minmax_on_segment(lp: &LinearProgram) -> Option<LpSolution> {
    let one = Rational::one();
    let has_sum = lp.constraints.iter().any(|c| {
        c.relation == Relation::Eq && c.rhs == one && c.coeffs.len() == 2 && c.coeffs.iter().all(|a| *a == one)
    });
    if lp.num_vars != 2 || !has_sum {
        return None;
    }
    let infeasible = || LpSolution {
        status: LpStatus::Infeasible,
        values: Vec::new(),
        objective_value: Rational::zero(),
        pivots: 0,
    };
    let (mut lo, mut hi) = (Rational::zero(), one.clone());
    for c in &lp.constraints {
        // a1 s + a2 (1 - s) ~ b, i.e. (a1 - a2) s ~ b - a2.
        let slope = &c.coeffs[0] - &c.coeffs[1];
        let rest = &c.rhs - &c.coeffs[1];
        if slope.is_zero() {
            let ok = match c.relation {
                Relation::Le => !rest.is_negative(),
                Relation::Ge => !rest.is_positive(),
                Relation::Eq => rest.is_zero(),
            };
            if !ok {
                return Some(infeasible());
            }
            continue;
        }
        let bound = rest / &slope;
        let upper = (c.relation == Relation::Le) == slope.is_positive();
        if c.relation == Relation::Eq || upper {
            hi = hi.min(bound.clone());
        }
        if c.relation == Relation::Eq || !upper {
            lo = lo.max(bound);
        }
    }
    if lo > hi {
        return Some(infeasible());
    }
    let half = Rational::new(1.into(), 2.into());
    let s = half.clamp(lo, hi);
    let t = s.clone().max(&one - &s);
    Some(LpSolution { status: LpStatus::Optimal, values: vec![s.clone(), &one - &s], objective_value: t, pivots: 0 })
}

struct Tableau {
    /// Row `i` reads `sum_j a[i][j] x_j = b[i]` with `x_{basis[i]}` basic.
    a: Vec<Vec<Rational>>,
    b: Vec<Rational>,
    basis: Vec<usize>,
    /// Reduced costs and current objective value.
    d: Vec<Rational>,
    z: Rational,
    /// Columns from here on are phase-one artificials.
    first_artificial: usize,
    max_bits: u64,
    pivots: usize,
}

impl Tableau {
    /// Columns: the variables, one slack or surplus per inequality, then one
    /// artificial per row that has no slack to start the basis with.
    fn new(lp: &LinearProgram, max_bits: u64) -> Self {
        let n = lp.num_vars;
        // Flip rows so every right-hand side is nonnegative.
        let rows: Vec<(Vec<Rational>, Relation, Rational)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs.is_negative() {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|a| -a).collect(), flipped, -&c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let artificials = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + slacks;
        let width = first_artificial + artificials;
        let (mut next_slack, mut next_art) = (n, first_artificial);
        let mut a = Vec::with_capacity(rows.len());
        let mut b = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        for (mut row, relation, rhs) in rows {
            row.resize(width, Rational::zero());
            match relation {
                Relation::Le => {
                    row[next_slack] = Rational::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -Rational::one();
                    next_slack += 1;
                }
                Relation::Eq => {}
            }
            if relation != Relation::Le {
                row[next_art] = Rational::one();
                basis.push(next_art);
                next_art += 1;
            }
            a.push(row);
            b.push(rhs);
        }
        Tableau {
            a,
            b,
            basis,
            d: vec![Rational::zero(); width],
            z: Rational::zero(),
            first_artificial,
            max_bits,
            pivots: 0,
        }
    }

    fn width(&self) -> usize {
        self.d.len()
    }

    fn run(&mut self, objective: &[Rational]) -> Result<LpStatus, LpError> {
        if self.width() > self.first_artificial {
            // Phase one: maximize minus the sum of the artificials.
            let mut c = vec![Rational::zero(); self.width()];
            for x in &mut c[self.first_artificial..] {
                *x = -Rational::one();
            }
            self.install_objective(&c);
            let status = self.optimize(self.width())?;
            debug_assert_eq!(status, LpStatus::Optimal);
            if self.z.is_negative() {
                return Ok(LpStatus::Infeasible);
            }
            self.drop_artificials()?;
        }
        let mut c = objective.to_vec();
        c.resize(self.width(), Rational::zero());
        self.install_objective(&c);
        self.optimize(self.width())
    }

    /// Pivots zero-level artificials out of the basis, deletes rows that turn
    /// out redundant, then removes the artificial columns.
    fn drop_artificials(&mut self) -> Result<(), LpError> {
        let mut r = 0;
        while r < self.a.len() {
            if self.basis[r] >= self.first_artificial {
                match (0..self.first_artificial).find(|&j| !self.a[r][j].is_zero()) {
                    Some(j) => self.pivot(r, j)?,
                    None => {
                        self.a.remove(r);
                        self.b.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for row in &mut self.a {
            row.truncate(self.first_artificial);
        }
        self.d.truncate(self.first_artificial);
        Ok(())
    }

    fn install_objective(&mut self, c: &[Rational]) {
        self.d = c.to_vec();
        self.z = Rational::zero();
        for (i, &v) in self.basis.iter().enumerate() {
            let cb = &c[v];
            if cb.is_zero() {
                continue;
            }
            for j in 0..self.d.len() {
                if !self.a[i][j].is_zero() {
                    let delta = cb * &self.a[i][j];
                    self.d[j] -= delta;
                }
            }
            self.z += cb * &self.b[i];
        }
    }

    /// Bland's rule over the first `limit` columns: lowest improving column,
    /// ties in the ratio test broken by lowest basic variable.
    fn optimize(&mut self, limit: usize) -> Result<LpStatus, LpError> {
        loop {
            let Some(e) = (0..limit).find(|&j| self.d[j].is_positive()) else {
                return Ok(LpStatus::Optimal);
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.a.len() {
                if !self.a[i][e].is_positive() {
                    continue;
                }
                let ratio = &self.b[i] / &self.a[i][e];
                let better = match &leave {
                    None => true,
                    Some((r, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            self.pivot(r, e)?;
        }
    }

    fn pivot(&mut self, r: usize, e: usize) -> Result<(), LpError> {
        self.pivots += 1;
        let inv = self.a[r][e].recip();
        for x in self.a[r].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        self.b[r] *= &inv;
        let pivot_row = self.a[r].clone();
        let pivot_rhs = self.b[r].clone();
        let nonzero: Vec<usize> = (0..pivot_row.len()).filter(|&j| !pivot_row[j].is_zero()).collect();
        for i in 0..self.a.len() {
            if i == r || self.a[i][e].is_zero() {
                continue;
            }
            let factor = self.a[i][e].clone();
            for &j in &nonzero {
                let delta = &factor * &pivot_row[j];
                self.a[i][j] -= delta;
            }
            self.b[i] -= &factor * &pivot_rhs;
        }
        if !self.d[e].is_zero() {
            let factor = self.d[e].clone();
            for &j in &nonzero {
                let delta = &factor * &pivot_row[j];
                self.d[j] -= delta;
            }
            self.z += &factor * &pivot_rhs;
        }
        self.basis[r] = e;
        self.guard()
    }

    fn guard(&self) -> Result<(), LpError> {
        let limit = self.max_bits;
        let bits = self.a.iter().flatten().chain(&self.b).chain(&self.d).map(bit_size).max().unwrap_or(0);
        if bits > limit {
            return Err(LpError::NumericBlowup { bits, limit });
        }
        Ok(())
    }

    fn primal(&self, num_vars: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); num_vars];
        for (i, &v) in self.basis.iter().enumerate() {
            if v < num_vars {
                x[v] = self.b[i].clone();
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn simplex_lp(k: usize) -> LinearProgram {
        let mut lp = LinearProgram::new(k);
        lp.add(vec![int(1); k], Relation::Eq, int(1), "sum");
        lp
    }

    #[test]
    fn maximizes_over_simplex() {
        let mut lp = simplex_lp(2);
        lp.set_objective(vec![int(1), int(0)], Sense::Max);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values, vec![int(1), int(0)]);
        assert_eq!(sol.objective_value, int(1));
    }

    #[test]
    fn minmax_with_binding_constraint() {
        let mut lp = simplex_lp(2);
        lp.add(vec![int(2), int(1)], Relation::Ge, ratio(19, 10), "m0");
        let sol = solve_minmax_weight(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values, vec![ratio(9, 10), ratio(1, 10)]);
        assert_eq!(sol.objective_value, ratio(9, 10));
        assert!(lp.is_satisfied_by(&sol.values));
    }

    proptest::proptest! {
        #[test]
        fn segment_shortcut_matches_simplex(
            rows in proptest::collection::vec((-6i64..7, -6i64..7, 0usize..3, -6i64..7, 1i64..4), 0..5)
        ) {
            let mut lp = simplex_lp(2);
            for (a, b, rel, num, den) in rows {
                let relation = [Relation::Le, Relation::Ge, Relation::Eq][rel];
                lp.add(vec![int(a), int(b)], relation, ratio(num, den), "");
            }
            let fast = minmax_on_segment(&lp).unwrap();
            let slow = minmax_by_simplex(&lp).unwrap();
            proptest::prop_assert_eq!(fast.status, slow.status);
            proptest::prop_assert_eq!(fast.values, slow.values);
            proptest::prop_assert_eq!(fast.objective_value, slow.objective_value);
        }
    }

    #[test]
    fn minmax_on_bare_simplex_is_uniform() {
        for k in [2, 4] {
            let sol = solve_minmax_weight(&simplex_lp(k)).unwrap();
            assert_eq!(sol.values, vec![ratio(1, k as i64); k]);
            assert_eq!(sol.objective_value, ratio(1, k as i64));
        }
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.add(vec![int(1)], Relation::Ge, int(2), "");
        lp.add(vec![int(1)], Relation::Le, int(1), "");
        lp.set_objective(vec![int(1)], Sense::Min);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(2);
        lp.add(vec![int(1), int(-1)], Relation::Le, int(1), "");
        lp.set_objective(vec![int(1), int(1)], Sense::Max);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn textbook_problem() {
        // max 5x + 4y + 3z, 2x+3y+z <= 5, 4x+y+2z <= 11, 3x+4y+2z <= 8.
        let mut lp = LinearProgram::new(3);
        lp.add(vec![int(2), int(3), int(1)], Relation::Le, int(5), "");
        lp.add(vec![int(4), int(1), int(2)], Relation::Le, int(11), "");
        lp.add(vec![int(3), int(4), int(2)], Relation::Le, int(8), "");
        lp.set_objective(vec![int(5), int(4), int(3)], Sense::Max);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.values, vec![int(2), int(0), int(1)]);
        assert_eq!(sol.objective_value, int(13));
    }

    #[test]
    fn phase_one_with_equalities_and_negative_rhs() {
        // min x1 + x2 with x1 - x2 = -1/3, x1 + 2 x2 >= 2.
        let mut lp = LinearProgram::new(2);
        lp.add(vec![int(1), int(-1)], Relation::Eq, ratio(-1, 3), "");
        lp.add(vec![int(1), int(2)], Relation::Ge, int(2), "");
        lp.set_objective(vec![int(1), int(1)], Sense::Min);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.values, vec![ratio(4, 9), ratio(7, 9)]);
        assert!(lp.is_satisfied_by(&sol.values));
    }

    #[test]
    fn bit_guard_trips() {
        let mut lp = LinearProgram::new(1);
        lp.add(vec![ratio(1, 3)], Relation::Le, ratio(1, 7), "");
        lp.set_objective(vec![int(1)], Sense::Max);
        assert!(matches!(solve_with_limit(&lp, 2), Err(LpError::NumericBlowup { .. })));
        assert_eq!(solve_with_limit(&lp, 64).unwrap().values, vec![ratio(3, 7)]);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let mut lp = LinearProgram::new(2);
        lp.add(vec![int(1)], Relation::Le, int(1), "");
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
    }

    #[test]
    fn dump_format() {
        let mut lp = simplex_lp(2);
        lp.add(vec![int(2), int(0)], Relation::Ge, ratio(1, 2), "m0");
        assert_eq!(lp.to_string(), "max: 0\nsum: 1 x1 + 1 x2 = 1\nm0: 2 x1 >= 1/2\n");
    }
}
