//! Phase-I simplex on a dense dictionary.
//!
//! Variables are shifted to `y = x - lo >= 0`; upper bounds and every row are
//! rewritten as `a . y <= b`. Feasibility is decided by the auxiliary problem
//! `max -x0 s.t. a . y - x0 <= b`, solved with Bland's rule.

use super::{LinearSystem, Sense, SolverError};

const PIVOT_EPS: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Feasible(Vec<f64>),
    Infeasible,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Feasible(x) => Some(x),
            LpOutcome::Infeasible => None,
        }
    }
}

/// Find a point of `system`, or report that none exists.
pub fn lp_feasible(system: &LinearSystem) -> Result<LpOutcome, SolverError> {
    system.check_dims()?;
    let n = system.n;
    for j in 0..n {
        if !system.lo[j].is_finite() || !system.hi[j].is_finite() {
            return Err(SolverError::UnboundedVariable(j));
        }
        if system.lo[j] > system.hi[j] + FEAS_TOL {
            return Ok(LpOutcome::Infeasible);
        }
    }

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(system.rows.len() + n);
    for r in &system.rows {
        let shift: f64 = r.a.iter().zip(&system.lo).map(|(a, l)| a * l).sum();
        let b = r.b - shift;
        match r.sense {
            Sense::Le => rows.push((r.a.clone(), b)),
            Sense::Ge => rows.push((r.a.iter().map(|v| -v).collect(), -b)),
            Sense::Eq => {
                rows.push((r.a.clone(), b));
                rows.push((r.a.iter().map(|v| -v).collect(), -b));
            }
        }
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push((a, (system.hi[j] - system.lo[j]).max(0.0)));
    }

    let y = match Dictionary::new(&rows, n).solve()? {
        Some(y) => y,
        None => return Ok(LpOutcome::Infeasible),
    };
    let x: Vec<f64> = (0..n)
        .map(|j| (system.lo[j] + y[j]).clamp(system.lo[j], system.hi[j]))
        .collect();
    let viol = system.max_violation(&x);
    if viol > FEAS_TOL {
        return Err(SolverError::Numerical(format!(
            "simplex point violates the system by {viol:e}"
        )));
    }
    Ok(LpOutcome::Feasible(x))
}

/// `x_basis[r] = rhs[r] + sum_k coef[r][k] * x_nonbasic[k]`, objective `w = obj + sum_k cost[k] * x_nonbasic[k]`.
struct Dictionary {
    n: usize,
    coef: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    obj: f64,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
}

impl Dictionary {
    // Variable ids: 0..n are y, n is x0, n+1+r is the slack of row r.
    fn new(rows: &[(Vec<f64>, f64)], n: usize) -> Self {
        let coef = rows
            .iter()
            .map(|(a, _)| {
                let mut c: Vec<f64> = a.iter().map(|v| -v).collect();
                c.push(1.0);
                c
            })
            .collect();
        let mut cost = vec![0.0; n + 1];
        cost[n] = -1.0;
        Self {
            n,
            coef,
            rhs: rows.iter().map(|r| r.1).collect(),
            cost,
            obj: 0.0,
            basis: (0..rows.len()).map(|r| n + 1 + r).collect(),
            nonbasic: (0..=n).collect(),
        }
    }

    fn x0(&self) -> usize {
        self.n
    }

    fn solve(mut self) -> Result<Option<Vec<f64>>, SolverError> {
        let Some((r0, &b0)) = self
            .rhs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
        else {
            return Ok(Some(vec![0.0; self.n]));
        };
        if b0 < 0.0 {
            let k = self.nonbasic.iter().position(|&v| v == self.x0()).unwrap();
            self.pivot(r0, k);
        }

        let mut pivots = 0;
        loop {
            let entering = (0..self.nonbasic.len())
                .filter(|&k| self.cost[k] > PIVOT_EPS)
                .min_by_key(|&k| self.nonbasic[k]);
            let Some(k) = entering else { break };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rhs.len() {
                let c = self.coef[r][k];
                if c < -PIVOT_EPS {
                    let ratio = self.rhs[r].max(0.0) / -c;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((best, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.prefer(r, best)) {
                                Some((r, ratio))
                            } else {
                                Some((best, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(SolverError::Numerical("unbounded auxiliary problem".into()));
            };
            self.pivot(r, k);
            pivots += 1;
            if pivots > MAX_PIVOTS {
                return Err(SolverError::NoConvergence { iterations: pivots, best: Vec::new() });
            }
        }

        if -self.obj > FEAS_TOL {
            return Ok(None);
        }
        let mut y = vec![0.0; self.n];
        for (r, &v) in self.basis.iter().enumerate() {
            if v < self.n {
                y[v] = self.rhs[r].max(0.0);
            }
        }
        Ok(Some(y))
    }

    // Among tied leaving rows, x0 leaves first; otherwise the smallest variable id.
    fn prefer(&self, r: usize, than: usize) -> bool {
        let (a, b) = (self.basis[r], self.basis[than]);
        if a == self.x0() {
            return true;
        }
        if b == self.x0() {
            return false;
        }
        a < b
    }

    fn pivot(&mut self, r: usize, k: usize) {
        let p = self.coef[r][k];
        let width = self.nonbasic.len();
        // Solve row r for the entering variable.
        let mut row = std::mem::take(&mut self.coef[r]);
        let rhs = -self.rhs[r] / p;
        for (l, v) in row.iter_mut().enumerate() {
            *v = if l == k { 1.0 / p } else { -*v / p };
        }
        for s in 0..self.rhs.len() {
            if s == r {
                continue;
            }
            let f = self.coef[s][k];
            if f == 0.0 {
                continue;
            }
            let target = &mut self.coef[s];
            for l in 0..width {
                if l == k {
                    target[l] = f * row[l];
                } else {
                    target[l] += f * row[l];
                }
            }
            self.rhs[s] += f * rhs;
        }
        let f = self.cost[k];
        if f != 0.0 {
            for l in 0..width {
                if l == k {
                    self.cost[l] = f * row[l];
                } else {
                    self.cost[l] += f * row[l];
                }
            }
            self.obj += f * rhs;
        }
        self.coef[r] = row;
        self.rhs[r] = rhs;
        std::mem::swap(&mut self.basis[r], &mut self.nonbasic[k]);
    }
}
