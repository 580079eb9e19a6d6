//! Frank-Wolfe for a separable quadratic over the convex hull of finitely
//! many points, with away-step and fully corrective variants.

use super::SolverError;

/// `phi(g) = 0.25 * sum_k scale[k] * g[k]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalPotential {
    pub scale: Vec<f64>,
}

impl DiagonalPotential {
    pub fn value(&self, g: &[f64]) -> f64 {
        0.25 * self.scale.iter().zip(g).map(|(s, x)| s * x * x).sum::<f64>()
    }

    pub fn gradient(&self, g: &[f64]) -> Vec<f64> {
        self.scale.iter().zip(g).map(|(s, x)| 0.5 * s * x).collect()
    }

    fn curvature(&self, d: &[f64]) -> f64 {
        0.5 * self.scale.iter().zip(d).map(|(s, x)| s * x * x).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwVariant {
    /// Line search toward the best vertex or away from the worst active one.
    AwayStep,
    /// Re-optimize over the affine hull of the active vertices after each
    /// added vertex (Wolfe's minimum-norm-point scheme). Exact up to rounding.
    FullyCorrective,
}

#[derive(Clone, Copy, Debug)]
pub struct FwOptions {
    pub max_iter: usize,
    /// Stop once the duality gap `grad . (x - v)` is below this for every vertex `v`.
    pub tol: f64,
    pub variant: FwVariant,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self { max_iter: 5000, tol: 1e-12, variant: FwVariant::FullyCorrective }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FwResult {
    pub coefficients: Vec<f64>,
    pub point: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Potential after every iteration, starting with the initial vertex.
    pub trace: Vec<f64>,
}

/// Minimize `phi` over `conv(points)`.
pub fn frank_wolfe(
    points: &[Vec<f64>],
    phi: &DiagonalPotential,
    opts: FwOptions,
) -> Result<FwResult, SolverError> {
    let Some(first) = points.first() else {
        return Err(SolverError::EmptyPointSet);
    };
    let dim = first.len();
    if phi.scale.len() != dim {
        return Err(SolverError::DimensionMismatch { expected: dim, found: phi.scale.len() });
    }
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(SolverError::DimensionMismatch { expected: dim, found: p.len() });
    }

    let start = (0..points.len())
        .min_by(|&a, &b| phi.value(&points[a]).total_cmp(&phi.value(&points[b])))
        .unwrap();
    if opts.variant == FwVariant::FullyCorrective {
        return Ok(fully_corrective(points, phi, opts, start));
    }
    let mut coef = vec![0.0; points.len()];
    coef[start] = 1.0;
    let mut x = points[start].clone();
    let mut trace = vec![phi.value(&x)];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let grad = phi.gradient(&x);
        let gx = dot(&grad, &x);
        let scores: Vec<f64> = points.iter().map(|p| dot(&grad, p)).collect();
        let toward = argmin(&scores);
        gap = gx - scores[toward];
        if gap <= opts.tol {
            break;
        }
        iterations += 1;

        let away = (0..points.len())
            .filter(|&k| coef[k] > 0.0)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
            .unwrap();
        let away_gap = scores[away] - gx;

        let (dir, max_step, is_away): (Vec<f64>, f64, bool) = if gap >= away_gap || coef[away] >= 1.0 {
            (points[toward].iter().zip(&x).map(|(p, x)| p - x).collect(), 1.0, false)
        } else {
            let a = coef[away];
            (x.iter().zip(&points[away]).map(|(x, p)| x - p).collect(), a / (1.0 - a), true)
        };
        let slope = dot(&grad, &dir);
        let curv = phi.curvature(&dir);
        let step = if curv > 0.0 { (-slope / curv).clamp(0.0, max_step) } else { max_step };
        if step <= 0.0 {
            break;
        }

        if is_away {
            for c in coef.iter_mut() {
                *c *= 1.0 + step;
            }
            coef[away] -= step;
            if step >= max_step {
                coef[away] = 0.0;
            }
        } else {
            for c in coef.iter_mut() {
                *c *= 1.0 - step;
            }
            coef[toward] += step;
        }
        for c in coef.iter_mut() {
            if *c < 1e-15 {
                *c = 0.0;
            }
        }
        let total: f64 = coef.iter().sum();
        for c in coef.iter_mut() {
            *c /= total;
        }
        x = combine(points, &coef, dim);
        trace.push(phi.value(&x));
    }

    Ok(FwResult {
        value: phi.value(&x),
        point: x,
        coefficients: coef,
        gap,
        iterations,
        trace,
    })
}

// In coordinates scaled by sqrt(scale / 4) the potential is the squared norm,
// so this is a minimum-norm-point search over the scaled vertices.
fn fully_corrective(points: &[Vec<f64>], phi: &DiagonalPotential, opts: FwOptions, start: usize) -> FwResult {
    let dim = points[0].len();
    let d: Vec<f64> = phi.scale.iter().map(|s| (0.25 * s).sqrt()).collect();
    let q: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(&d).map(|(a, b)| a * b).collect()).collect();
    let mut corral = vec![start];
    let mut lam = vec![1.0];
    let mut x = q[start].clone();
    let mut trace = vec![dot(&x, &x)];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let xx = dot(&x, &x);
        let scores: Vec<f64> = q.iter().map(|p| dot(p, &x)).collect();
        let j = argmin(&scores);
        gap = 2.0 * (xx - scores[j]);
        if gap <= opts.tol || corral.contains(&j) {
            break;
        }
        iterations += 1;
        corral.push(j);
        lam.push(0.0);
        loop {
            let Some(alpha) = affine_minimizer(&q, &corral) else {
                corral.pop();
                lam.pop();
                let total: f64 = lam.iter().sum();
                lam.iter_mut().for_each(|l| *l /= total);
                return finish(points, phi, corral, lam, gap, iterations, trace);
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                lam = alpha;
                break;
            }
            let mut theta = f64::INFINITY;
            let mut leave = 0;
            for (k, (&l, &a)) in lam.iter().zip(&alpha).enumerate() {
                if a <= 1e-14 {
                    let t = if l - a > 0.0 { l / (l - a) } else { 0.0 };
                    if t < theta {
                        theta = t;
                        leave = k;
                    }
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            lam[leave] = 0.0;
            let mut k = 0;
            while k < corral.len() {
                if lam[k] <= 1e-15 {
                    corral.remove(k);
                    lam.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= total);
        }
        x = combine_subset(&q, &corral, &lam, dim);
        trace.push(dot(&x, &x));
    }
    finish(points, phi, corral, lam, gap, iterations, trace)
}

fn finish(
    points: &[Vec<f64>],
    phi: &DiagonalPotential,
    corral: Vec<usize>,
    lam: Vec<f64>,
    gap: f64,
    iterations: usize,
    trace: Vec<f64>,
) -> FwResult {
    let mut coefficients = vec![0.0; points.len()];
    for (&k, &l) in corral.iter().zip(&lam) {
        coefficients[k] = l;
    }
    let point = combine(points, &coefficients, points[0].len());
    FwResult { value: phi.value(&point), point, coefficients, gap, iterations, trace }
}

fn combine_subset(q: &[Vec<f64>], corral: &[usize], lam: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (&k, &l) in corral.iter().zip(lam) {
        for (xi, qi) in x.iter_mut().zip(&q[k]) {
            *xi += l * qi;
        }
    }
    x
}

// Weights summing to one that minimize the norm over the affine hull of the
// corral: solves `[G 1; 1' 0] [a; mu] = [0; 1]` with `G` the Gram matrix.
fn affine_minimizer(q: &[Vec<f64>], corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let size = k + 1;
    let mut m = vec![vec![0.0; size + 1]; size];
    let mut scale: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            m[a][b] = dot(&q[corral[a]], &q[corral[b]]);
        }
        m[a][k] = 1.0;
        m[k][a] = 1.0;
        scale = scale.max(m[a][a]);
    }
    m[k][size] = 1.0;
    for col in 0..size {
        let piv = (col..size).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * scale.max(1.0) {
            return None;
        }
        m.swap(col, piv);
        for r in 0..size {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=size {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some((0..k).map(|a| m[a][size] / m[a][a]).collect())
}

fn combine(points: &[Vec<f64>], coef: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (p, &c) in points.iter().zip(coef) {
        if c != 0.0 {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi += c * pi;
            }
        }
    }
    x
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k] < v[best] {
            best = k;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
