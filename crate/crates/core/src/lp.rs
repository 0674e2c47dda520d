//! Exact rational linear programming with certificates.
//!
//! [`solve`] runs a two-phase primal simplex over [`Rational`]s with Bland's
//! rule, so it terminates and is deterministic. Every outcome carries a
//! certificate that [`verify_certificate`] checks with exact arithmetic:
//!
//! * **Optimal**: a primal point and dual multipliers with equal objective
//!   values.
//! * **Unbounded**: a feasible point and an improving recession ray.
//! * **Infeasible**: Farkas multipliers combining the rows into `0 ≤ −1`.
//!
//! Dual and Farkas vectors are indexed by [`LinearProgram::rows`], the
//! ≤-normalized row system: every constraint (a `≥` row is negated), followed
//! by each variable's finite lower bound (`−xⱼ ≤ −l`) and upper bound
//! (`xⱼ ≤ u`). Multipliers are nonnegative on inequality rows and free on
//! equality rows. For a maximization, `Σ λᵣ âᵣ = c` and `Σ λᵣ b̂ᵣ` equals the
//! optimum; for a minimization both signs flip.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<Option<Rational>>,
    pub upper: Vec<Option<Rational>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    Constraint(usize),
    Lower(usize),
    Upper(usize),
}

/// One row of the ≤-normalized system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
    pub equality: bool,
    pub origin: RowOrigin,
}

impl Row {
    fn activity(&self, x: &[Rational]) -> Rational {
        rational::dot(&self.coeffs, x)
    }
}

impl LinearProgram {
    /// A program with `objective.len()` free variables and no constraints.
    pub fn new(sense: Sense, objective: Vec<Rational>) -> Self {
        let n = objective.len();
        Self { sense, objective, constraints: Vec::new(), lower: vec![None; n], upper: vec![None; n] }
    }

    pub fn maximize(objective: Vec<Rational>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<Rational>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn set_lower(&mut self, var: usize, bound: Rational) -> &mut Self {
        self.lower[var] = Some(bound);
        self
    }

    pub fn set_upper(&mut self, var: usize, bound: Rational) -> &mut Self {
        self.upper[var] = Some(bound);
        self
    }

    pub fn nonnegative(&mut self, var: usize) -> &mut Self {
        self.set_lower(var, Rational::zero())
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Input(format!(
                "bounds cover {}/{} variables, objective has {n}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Input(format!(
                    "constraint {i} has {} coefficients, objective has {n}",
                    c.coeffs.len()
                )));
            }
        }
        Ok(())
    }

    /// The ≤-normalized row system that dual and Farkas vectors refer to.
    pub fn rows(&self) -> Vec<Row> {
        let n = self.num_vars();
        let mut rows: Vec<Row> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (coeffs, rhs) = match c.relation {
                    Relation::Ge => (c.coeffs.iter().map(|a| -a).collect(), -&c.rhs),
                    _ => (c.coeffs.clone(), c.rhs.clone()),
                };
                Row { coeffs, rhs, equality: c.relation == Relation::Eq, origin: RowOrigin::Constraint(i) }
            })
            .collect();
        let unit = |j: usize, v: i64| {
            let mut e = vec![Rational::zero(); n];
            e[j] = rational::int(v);
            e
        };
        for j in 0..n {
            if let Some(l) = &self.lower[j] {
                rows.push(Row { coeffs: unit(j, -1), rhs: -l, equality: false, origin: RowOrigin::Lower(j) });
            }
            if let Some(u) = &self.upper[j] {
                rows.push(Row { coeffs: unit(j, 1), rhs: u.clone(), equality: false, origin: RowOrigin::Upper(j) });
            }
        }
        rows
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        rational::dot(&self.objective, x)
    }

    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && self.rows().iter().all(|r| {
                let a = r.activity(x);
                if r.equality {
                    a == r.rhs
                } else {
                    a <= r.rhs
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rational, primal: Vec<Rational>, dual: Vec<Rational> },
    Unbounded { ray: Vec<Rational>, point: Vec<Rational> },
    Infeasible { farkas: Vec<Rational> },
}

impl LpOutcome {
    pub fn value(&self) -> Option<&Rational> {
        match self {
            Self::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn primal(&self) -> Option<&[Rational]> {
        match self {
            Self::Optimal { primal, .. } => Some(primal),
            _ => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Self::Infeasible { .. })
    }
}

/// Column layout of the standard-form tableau.
struct Layout {
    /// Per original variable: (column of the shifted/positive part, optional
    /// negative-part column for free variables).
    var_cols: Vec<(usize, Option<usize>)>,
    /// Rows handed to the tableau: everything except lower-bound rows, which
    /// are absorbed by the substitution xⱼ = lⱼ + pⱼ.
    tableau_rows: Vec<usize>,
    slack_cols: Vec<Option<usize>>,
    width: usize,
}

struct Tableau {
    /// m rows × (width + 1); last entry is the right-hand side.
    cells: Vec<Vec<Rational>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self, k: usize) -> &Rational {
        self.cells[k].last().expect("tableau row has rhs")
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.cells[row][col].clone();
        for v in self.cells[row].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.cells[row].clone();
        for (k, r) in self.cells.iter_mut().enumerate() {
            if k == row || r[col].is_zero() {
                continue;
            }
            let factor = r[col].clone();
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &factor * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    fn reduced_cost(&self, costs: &[Rational], col: usize) -> Rational {
        let mut d = costs[col].clone();
        for (k, &b) in self.basis.iter().enumerate() {
            if !costs[b].is_zero() && !self.cells[k][col].is_zero() {
                d -= &costs[b] * &self.cells[k][col];
            }
        }
        d
    }

    /// Minimizes `costs · z` with Bland's rule over columns `< allowed`.
    /// Returns the entering column of an unbounded direction, if any.
    fn minimize(&mut self, costs: &[Rational], allowed: usize) -> Option<usize> {
        loop {
            let entering =
                (0..allowed).filter(|c| !self.basis.contains(c)).find(|&c| self.reduced_cost(costs, c).is_negative());
            let col = entering?;
            let mut best: Option<(usize, Rational)> = None;
            for k in 0..self.cells.len() {
                let a = &self.cells[k][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(k) / a;
                let better = match &best {
                    None => true,
                    Some((bk, br)) => ratio < *br || (ratio == *br && self.basis[k] < self.basis[*bk]),
                };
                if better {
                    best = Some((k, ratio));
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Some(col),
            }
        }
    }

    fn column_values(&self, width: usize) -> Vec<Rational> {
        let mut z = vec![Rational::zero(); width];
        for (k, &b) in self.basis.iter().enumerate() {
            z[b] = self.rhs(k).clone();
        }
        z
    }

    /// y = c_B B⁻¹, read from the artificial columns.
    fn simplex_multipliers(&self, costs: &[Rational], first_artificial: usize) -> Vec<Rational> {
        (0..self.cells.len())
            .map(|r| {
                self.basis
                    .iter()
                    .enumerate()
                    .fold(Rational::zero(), |acc, (k, &b)| acc + &costs[b] * &self.cells[k][first_artificial + r])
            })
            .collect()
    }
}

/// Solves `lp` exactly. The returned certificate has already been verified.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.check_shape()?;
    let outcome = solve_inner(lp);
    if !verify_certificate(lp, &outcome) {
        return Err(Error::EngineDefect(format!("LP certificate failed verification: {outcome:?}")));
    }
    Ok(outcome)
}

fn solve_inner(lp: &LinearProgram) -> LpOutcome {
    let n = lp.num_vars();
    let rows = lp.rows();

    let mut col = 0;
    let var_cols: Vec<(usize, Option<usize>)> = (0..n)
        .map(|j| {
            let pos = col;
            col += 1;
            if lp.lower[j].is_some() {
                (pos, None)
            } else {
                col += 1;
                (pos, Some(pos + 1))
            }
        })
        .collect();
    let tableau_rows: Vec<usize> =
        (0..rows.len()).filter(|&r| !matches!(rows[r].origin, RowOrigin::Lower(_))).collect();
    let slack_cols: Vec<Option<usize>> = tableau_rows
        .iter()
        .map(|&r| {
            (!rows[r].equality).then(|| {
                col += 1;
                col - 1
            })
        })
        .collect();
    let first_artificial = col;
    let m = tableau_rows.len();
    let layout = Layout { var_cols, tableau_rows, slack_cols, width: col + m };

    // Substitute xⱼ = lⱼ + pⱼ for lower-bounded variables.
    let shift: Vec<Rational> = lp.lower.iter().map(|l| l.clone().unwrap_or_else(Rational::zero)).collect();
    let mut signs = Vec::with_capacity(m);
    let mut cells = Vec::with_capacity(m);
    for (k, &r) in layout.tableau_rows.iter().enumerate() {
        let row = &rows[r];
        let mut cells_k = vec![Rational::zero(); layout.width + 1];
        for j in 0..n {
            let (p, neg) = layout.var_cols[j];
            cells_k[p] = row.coeffs[j].clone();
            if let Some(q) = neg {
                cells_k[q] = -&row.coeffs[j];
            }
        }
        if let Some(s) = layout.slack_cols[k] {
            cells_k[s] = Rational::one();
        }
        let mut rhs = &row.rhs - rational::dot(&row.coeffs, &shift);
        let sigma = if rhs.is_negative() { -1 } else { 1 };
        if sigma < 0 {
            for v in cells_k.iter_mut() {
                *v = -v.clone();
            }
            rhs = -rhs;
        }
        cells_k[first_artificial + k] = Rational::one();
        cells_k[layout.width] = rhs;
        signs.push(sigma);
        cells.push(cells_k);
    }
    let mut tab = Tableau { cells, basis: (first_artificial..first_artificial + m).collect() };

    // Phase one.
    let mut phase1 = vec![Rational::zero(); layout.width];
    for c in phase1.iter_mut().skip(first_artificial) {
        *c = Rational::one();
    }
    tab.minimize(&phase1, layout.width);
    let infeasibility: Rational =
        (0..m).filter(|&k| tab.basis[k] >= first_artificial).map(|k| tab.rhs(k).clone()).sum();
    if infeasibility.is_positive() {
        let y = tab.simplex_multipliers(&phase1, first_artificial);
        let lambda: Vec<Rational> = y.iter().zip(&signs).map(|(y, &s)| -y * rational::int(s)).collect();
        let farkas = expand_multipliers(lp, &rows, &layout, &lambda, &vec![Rational::zero(); n]);
        let total = rational::dot(&farkas, &rows.iter().map(|r| r.rhs.clone()).collect::<Vec<_>>());
        let scale = -total;
        let farkas = farkas.into_iter().map(|v| v / &scale).collect();
        return LpOutcome::Infeasible { farkas };
    }

    // Drive zero-level artificials out of the basis where possible.
    for k in 0..m {
        if tab.basis[k] < first_artificial {
            continue;
        }
        if let Some(c) = (0..first_artificial).find(|&c| !tab.cells[k][c].is_zero() && !tab.basis.contains(&c)) {
            tab.pivot(k, c);
        }
    }

    // Phase two, always as a minimization.
    let flip = match lp.sense {
        Sense::Maximize => -Rational::one(),
        Sense::Minimize => Rational::one(),
    };
    let mut costs = vec![Rational::zero(); layout.width];
    for j in 0..n {
        let (p, neg) = layout.var_cols[j];
        costs[p] = &flip * &lp.objective[j];
        if let Some(q) = neg {
            costs[q] = -&costs[p];
        }
    }
    let unbounded = tab.minimize(&costs, first_artificial);
    let z = tab.column_values(layout.width);
    let to_x = |z: &[Rational], with_shift: bool| -> Vec<Rational> {
        (0..n)
            .map(|j| {
                let (p, neg) = layout.var_cols[j];
                let mut v = z[p].clone();
                if let Some(q) = neg {
                    v -= &z[q];
                }
                if with_shift {
                    v += &shift[j];
                }
                v
            })
            .collect()
    };
    let point = to_x(&z, true);
    if let Some(entering) = unbounded {
        let mut dz = vec![Rational::zero(); layout.width];
        dz[entering] = Rational::one();
        for (k, &b) in tab.basis.iter().enumerate() {
            dz[b] = -&tab.cells[k][entering];
        }
        return LpOutcome::Unbounded { ray: to_x(&dz, false), point };
    }
    let y = tab.simplex_multipliers(&costs, first_artificial);
    let lambda: Vec<Rational> = y.iter().zip(&signs).map(|(y, &s)| -y * rational::int(s)).collect();
    let target: Vec<Rational> = lp.objective.iter().map(|c| -(&flip * c)).collect();
    let dual = expand_multipliers(lp, &rows, &layout, &lambda, &target);
    let value = lp.objective_value(&point);
    LpOutcome::Optimal { value, primal: point, dual }
}

/// Places tableau-row multipliers on the full row system and fills in the
/// lower-bound rows so that `Σ λᵣ âᵣ = target`.
fn expand_multipliers(
    lp: &LinearProgram,
    rows: &[Row],
    layout: &Layout,
    lambda: &[Rational],
    target: &[Rational],
) -> Vec<Rational> {
    let mut full = vec![Rational::zero(); rows.len()];
    for (k, &r) in layout.tableau_rows.iter().enumerate() {
        full[r] = lambda[k].clone();
    }
    for (r, row) in rows.iter().enumerate() {
        if let RowOrigin::Lower(j) = row.origin {
            debug_assert!(lp.lower[j].is_some());
            let mut acc = Rational::zero();
            for (k, &rr) in layout.tableau_rows.iter().enumerate() {
                acc += &lambda[k] * &rows[rr].coeffs[j];
            }
            // Lower-bound row has coefficient −1 on xⱼ.
            full[r] = acc - &target[j];
        }
    }
    full
}

/// Checks an outcome's certificate against `lp` with exact arithmetic.
pub fn verify_certificate(lp: &LinearProgram, outcome: &LpOutcome) -> bool {
    if lp.check_shape().is_err() {
        return false;
    }
    let n = lp.num_vars();
    let rows = lp.rows();
    let multipliers_ok =
        |m: &[Rational]| m.len() == rows.len() && rows.iter().zip(m).all(|(r, v)| r.equality || !v.is_negative());
    let combine = |m: &[Rational]| -> (Vec<Rational>, Rational) {
        let mut coeffs = vec![Rational::zero(); n];
        let mut rhs = Rational::zero();
        for (r, v) in rows.iter().zip(m) {
            if v.is_zero() {
                continue;
            }
            for (c, a) in coeffs.iter_mut().zip(&r.coeffs) {
                *c += v * a;
            }
            rhs += v * &r.rhs;
        }
        (coeffs, rhs)
    };
    match outcome {
        LpOutcome::Optimal { value, primal, dual } => {
            if !lp.is_feasible(primal) || lp.objective_value(primal) != *value || !multipliers_ok(dual) {
                return false;
            }
            let (coeffs, rhs) = combine(dual);
            let (target, dual_value): (Vec<Rational>, Rational) = match lp.sense {
                Sense::Maximize => (lp.objective.clone(), rhs),
                Sense::Minimize => (lp.objective.iter().map(|c| -c).collect(), -rhs),
            };
            let slack_ok = rows.iter().zip(dual).all(|(r, v)| v.is_zero() || r.activity(primal) == r.rhs);
            coeffs == target && dual_value == *value && slack_ok
        }
        LpOutcome::Unbounded { ray, point } => {
            if !lp.is_feasible(point) || ray.len() != n {
                return false;
            }
            let ray_ok = rows.iter().all(|r| {
                let a = r.activity(ray);
                if r.equality {
                    a.is_zero()
                } else {
                    !a.is_positive()
                }
            });
            let gain = lp.objective_value(ray);
            let improves = match lp.sense {
                Sense::Maximize => gain.is_positive(),
                Sense::Minimize => gain.is_negative(),
            };
            ray_ok && improves
        }
        LpOutcome::Infeasible { farkas } => {
            if !multipliers_ok(farkas) {
                return false;
            }
            let (coeffs, rhs) = combine(farkas);
            coeffs.iter().all(Zero::is_zero) && rhs.is_negative()
        }
    }
}
