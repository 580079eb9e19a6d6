//! Dense convex QP by the Goldfarb-Idnani dual active-set method.
//!
//! The factorization keeps `J = L^-T Q` and the upper-triangular `R` of the
//! active constraint normals, updated with Givens rotations on add and drop.
//! Positive semidefinite objectives go through a proximal-point outer loop,
//! each inner problem being strictly convex.

use super::{LinearSystem, Sense, SolverError};

const MAX_ITER: usize = 10_000;
const MAX_PROX: usize = 200;

/// `0.5 x'Gx + c'x` with `G` symmetric positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct QpObjective {
    pub g: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl QpObjective {
    pub fn diagonal(diag: &[f64], c: Vec<f64>) -> Self {
        let n = diag.len();
        let mut g = vec![vec![0.0; n]; n];
        for (j, &d) in diag.iter().enumerate() {
            g[j][j] = d;
        }
        Self { g, c }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let gx = matvec(&self.g, x);
        0.5 * dot(x, &gx) + dot(&self.c, x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        matvec(&self.g, x).iter().zip(&self.c).map(|(a, b)| a + b).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Signed multipliers with `Gx + c = sum_k row_multipliers[k] a_k + bound_multipliers`.
    pub row_multipliers: Vec<f64>,
    pub bound_multipliers: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy)]
enum Origin {
    Row(usize, f64),
    Bound(usize, f64),
}

struct Constraint {
    normal: Vec<f64>,
    rhs: f64,
    origin: Origin,
    equality: bool,
}

/// Minimize `q` over `system`. Infinite bounds are allowed.
pub fn solve_box_qp(q: &QpObjective, system: &LinearSystem) -> Result<QpSolution, SolverError> {
    system.check_dims()?;
    let n = system.n;
    if q.c.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, found: q.c.len() });
    }
    if let Some(row) = q.g.iter().find(|r| r.len() != n) {
        return Err(SolverError::DimensionMismatch { expected: n, found: row.len() });
    }
    if q.g.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, found: q.g.len() });
    }

    let mut cons = Vec::new();
    for (k, r) in system.rows.iter().enumerate() {
        match r.sense {
            Sense::Eq => cons.push(Constraint {
                normal: r.a.clone(),
                rhs: r.b,
                origin: Origin::Row(k, 1.0),
                equality: true,
            }),
            Sense::Ge => cons.push(Constraint {
                normal: r.a.clone(),
                rhs: r.b,
                origin: Origin::Row(k, 1.0),
                equality: false,
            }),
            Sense::Le => cons.push(Constraint {
                normal: r.a.iter().map(|v| -v).collect(),
                rhs: -r.b,
                origin: Origin::Row(k, -1.0),
                equality: false,
            }),
        }
    }
    for j in 0..n {
        let unit = |s: f64| {
            let mut e = vec![0.0; n];
            e[j] = s;
            e
        };
        if system.lo[j].is_finite() {
            cons.push(Constraint { normal: unit(1.0), rhs: system.lo[j], origin: Origin::Bound(j, 1.0), equality: false });
        }
        if system.hi[j].is_finite() {
            cons.push(Constraint { normal: unit(-1.0), rhs: -system.hi[j], origin: Origin::Bound(j, -1.0), equality: false });
        }
    }
    // Equalities are added first and never dropped.
    cons.sort_by_key(|c| !c.equality);

    let scale = q.g.iter().enumerate().map(|(j, r)| r[j].abs()).fold(1.0, f64::max);
    let (x, mult, iterations) = if let Some(l) = cholesky(&q.g, 1e-12 * scale) {
        let (x, m, it) = dual_active_set(&l, &q.c, &cons)?;
        (x, m, it)
    } else {
        let rho = 1e-6 * scale;
        let mut g = q.g.clone();
        for (j, row) in g.iter_mut().enumerate() {
            row[j] += rho;
        }
        let l = cholesky(&g, 0.0)
            .ok_or_else(|| SolverError::Numerical("objective is not positive semidefinite".into()))?;
        let mut center = vec![0.0; n];
        let mut total = 0;
        let mut last = None;
        for _ in 0..MAX_PROX {
            let c: Vec<f64> = q.c.iter().zip(&center).map(|(c, x)| c - rho * x).collect();
            let (x, m, it) = dual_active_set(&l, &c, &cons)?;
            total += it;
            let step = x.iter().zip(&center).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let size = x.iter().map(|v| v.abs()).fold(1.0, f64::max);
            center = x.clone();
            last = Some((x, m));
            if step <= 1e-12 * size {
                break;
            }
        }
        let (x, m) = last.expect("at least one proximal step");
        (x, m, total)
    };

    let mut row_multipliers = vec![0.0; system.rows.len()];
    let mut bound_multipliers = vec![0.0; n];
    for (c, &m) in cons.iter().zip(&mult) {
        match c.origin {
            Origin::Row(k, s) => row_multipliers[k] += s * m,
            Origin::Bound(j, s) => bound_multipliers[j] += s * m,
        }
    }
    Ok(QpSolution {
        objective: q.value(&x),
        x,
        row_multipliers,
        bound_multipliers,
        iterations,
    })
}

/// Returns the minimizer, one multiplier per constraint (zero when inactive) and the step count.
fn dual_active_set(
    l: &[Vec<f64>],
    c: &[f64],
    cons: &[Constraint],
) -> Result<(Vec<f64>, Vec<f64>, usize), SolverError> {
    let n = c.len();
    let mut j_mat = lower_inverse_transpose(l);
    let mut r_mat = vec![vec![0.0; n]; n];
    // Unconstrained minimizer -J J' c.
    let jtc = mat_t_vec(&j_mat, c);
    let mut x: Vec<f64> = (0..n).map(|i| -(0..n).map(|k| j_mat[i][k] * jtc[k]).sum::<f64>()).collect();

    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut added = vec![false; cons.len()];
    let eps = 1e-14;
    let mut iterations = 0;

    let mut flip = vec![1.0; cons.len()];
    loop {
        // Pick the next constraint: pending equalities first, then the most violated inequality.
        let mut pick: Option<(usize, f64)> = None;
        for (k, con) in cons.iter().enumerate() {
            if added[k] {
                continue;
            }
            let s = dot(&con.normal, &x) - con.rhs;
            if con.equality {
                flip[k] = if s > 0.0 { -1.0 } else { 1.0 };
                pick = Some((k, -s.abs()));
                break;
            }
            let tol = 1e-12 * (1.0 + con.rhs.abs() + norm_inf(&con.normal) * norm_inf(&x));
            if s < -tol && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((k, s));
            }
        }
        let Some((p, _)) = pick else { break };
        let np: Vec<f64> = cons[p].normal.iter().map(|v| v * flip[p]).collect();
        let dp = cons[p].rhs * flip[p];
        let mut u_plus = u.clone();
        u_plus.push(0.0);

        loop {
            iterations += 1;
            if iterations > MAX_ITER {
                return Err(SolverError::NoConvergence { iterations, best: x });
            }
            let q = active.len();
            let d = mat_t_vec(&j_mat, &np);
            let z: Vec<f64> = (0..n).map(|i| (q..n).map(|k| j_mat[i][k] * d[k]).sum()).collect();
            let r = back_substitute(&r_mat, &d[..q]);

            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (pos, &k) in active.iter().enumerate() {
                if !cons[k].equality && r[pos] > eps {
                    let ratio = u_plus[pos] / r[pos];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(pos);
                    }
                }
            }
            let zn = dot(&z, &np);
            let znorm = norm_inf(&z);
            let s = dot(&np, &x) - dp;
            let t2 = if znorm <= 1e-13 * (1.0 + norm_inf(&np)) || zn <= 0.0 {
                f64::INFINITY
            } else {
                -s / zn
            };
            let t = t1.min(t2);
            if t.is_infinite() {
                if cons[p].equality && s.abs() <= 1e-10 * (1.0 + dp.abs()) {
                    // Dependent equality already satisfied.
                    added[p] = true;
                    break;
                }
                return Err(SolverError::Infeasible);
            }
            for pos in 0..q {
                u_plus[pos] -= t * r[pos];
            }
            u_plus[q] += t;
            if t2.is_finite() {
                for i in 0..n {
                    x[i] += t * z[i];
                }
            }
            if t2 <= t1 {
                add_constraint(&mut j_mat, &mut r_mat, d, q);
                active.push(p);
                added[p] = true;
                u = u_plus;
                break;
            }
            let pos = drop_at.expect("finite partial step has a blocking constraint");
            let k = active.remove(pos);
            added[k] = false;
            u_plus.remove(pos);
            drop_constraint(&mut j_mat, &mut r_mat, pos, q);
        }
    }

    let mut mult = vec![0.0; cons.len()];
    for (pos, &k) in active.iter().enumerate() {
        mult[k] = u[pos] * flip[k];
    }
    Ok((x, mult, iterations))
}

fn add_constraint(j_mat: &mut [Vec<f64>], r_mat: &mut [Vec<f64>], mut d: Vec<f64>, q: usize) {
    let n = d.len();
    for k in (q + 1..n).rev() {
        let (a, b) = (d[k - 1], d[k]);
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        d[k - 1] = h;
        d[k] = 0.0;
        rotate_columns(j_mat, k - 1, c, s);
    }
    for i in 0..=q {
        r_mat[i][q] = d[i];
    }
}

fn drop_constraint(j_mat: &mut [Vec<f64>], r_mat: &mut [Vec<f64>], pos: usize, q: usize) {
    let n = r_mat.len();
    for col in pos..q - 1 {
        for row in r_mat.iter_mut() {
            row[col] = row[col + 1];
        }
    }
    for row in r_mat.iter_mut() {
        row[q - 1] = 0.0;
    }
    for k in pos..q - 1 {
        let (a, b) = (r_mat[k][k], r_mat[k + 1][k]);
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        for col in k..n {
            let (x, y) = (r_mat[k][col], r_mat[k + 1][col]);
            r_mat[k][col] = c * x + s * y;
            r_mat[k + 1][col] = -s * x + c * y;
        }
        r_mat[k + 1][k] = 0.0;
        rotate_columns(j_mat, k, c, s);
    }
}

// Columns k, k+1 of J become (c J_k + s J_k+1, -s J_k + c J_k+1).
fn rotate_columns(j_mat: &mut [Vec<f64>], k: usize, c: f64, s: f64) {
    for row in j_mat.iter_mut() {
        let (a, b) = (row[k], row[k + 1]);
        row[k] = c * a + s * b;
        row[k + 1] = -s * a + c * b;
    }
}

fn back_substitute(r_mat: &[Vec<f64>], d: &[f64]) -> Vec<f64> {
    let q = d.len();
    let mut r = vec![0.0; q];
    for i in (0..q).rev() {
        let mut acc = d[i];
        for k in i + 1..q {
            acc -= r_mat[i][k] * r[k];
        }
        r[i] = acc / r_mat[i][i];
    }
    r
}

/// Lower Cholesky factor, or `None` when a pivot falls at or below `floor`.
fn cholesky(g: &[Vec<f64>], floor: f64) -> Option<Vec<Vec<f64>>> {
    let n = g.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = g[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                if acc <= floor || acc <= 0.0 {
                    return None;
                }
                l[i][i] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    Some(l)
}

fn lower_inverse_transpose(l: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        for i in col..n {
            let mut acc = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                acc -= l[i][k] * inv[k][col];
            }
            inv[i][col] = acc / l[i][i];
        }
    }
    let mut t = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            t[i][j] = inv[j][i];
        }
    }
    t
}

fn mat_t_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; m.first().map_or(0, |r| r.len())];
    for i in 0..n {
        if v[i] == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(&m[i]) {
            *o += a * v[i];
        }
    }
    out
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| dot(r, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
