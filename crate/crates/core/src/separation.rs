//! Linear separators producing surrogate weights from labeled sub-solutions.
//!
//! Both methods return a row `w` in the weight domain meant to satisfy
//! `w . s <= 1` on feasible and `w . s >= 1` on infeasible sub-solutions.

use log::debug;
use thiserror::Error;

use crate::model::{maximal_elements, minimal_elements, SubSolution, WeightDomain};
use crate::solvers::{
    frank_wolfe, solve_box_qp, DiagonalPotential, FwOptions, LinearSystem, QpObjective, Sense,
    SolverError,
};

/// Below this magnitude the last gradient coordinate is treated as zero.
pub const DEGENERATE_GRADIENT: f64 = 1e-10;

const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("labeled points are not separable by a nonnegative weight vector")]
    NotSeparable,

    #[error("sub-solution of length {found} for a domain of dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Svm,
    Sep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmOutput {
    pub w: Vec<f64>,
    pub omega: Vec<f64>,
    pub beta: f64,
    pub projected: bool,
}

/// Max-margin separator through the origin-anchored QP
/// `min |omega|^2` s.t. `beta - omega . p >= 1`, `omega . q - beta >= 1`,
/// `omega_j <= beta`, `omega >= 0`, returning `omega / beta`.
///
/// The zero vector is always treated as feasible. Only the maximal feasible and
/// minimal infeasible points are handed to the solver; the others cannot bind.
pub fn svm_separate(
    domain: &WeightDomain,
    n: usize,
    positives: &[SubSolution],
    negatives: &[SubSolution],
) -> Result<SvmOutput, SeparationError> {
    check_len(n, positives.iter().chain(negatives))?;
    let pos = maximal_elements(positives.iter().copied());
    let neg = minimal_elements(negatives.iter().copied());

    let mut lo = vec![0.0; n + 1];
    lo[n] = f64::NEG_INFINITY;
    let mut sys = LinearSystem::new(lo, vec![f64::INFINITY; n + 1]);
    let mut beta_only = vec![0.0; n + 1];
    beta_only[n] = 1.0;
    sys.push(beta_only, Sense::Ge, 1.0);
    for p in pos.iter().filter(|p| !p.is_zero()) {
        let mut a: Vec<f64> = p.to_f64().iter().map(|v| -v).collect();
        a.push(1.0);
        sys.push(a, Sense::Ge, 1.0);
    }
    for q in &neg {
        let mut a = q.to_f64();
        a.push(-1.0);
        sys.push(a, Sense::Ge, 1.0);
    }
    for j in 0..n {
        let mut a = vec![0.0; n + 1];
        a[j] = 1.0;
        a[n] = -1.0;
        sys.push(a, Sense::Le, 0.0);
    }
    let mut diag = vec![2.0; n + 1];
    diag[n] = 0.0;
    let sol = match solve_box_qp(&QpObjective::diagonal(&diag, vec![0.0; n + 1]), &sys) {
        Ok(sol) => sol,
        Err(SolverError::Infeasible) => return Err(SeparationError::NotSeparable),
        Err(e) => return Err(e.into()),
    };
    let beta = sol.x[n];
    let omega: Vec<f64> = sol.x[..n].iter().map(|v| v.max(0.0)).collect();
    let raw: Vec<f64> = omega.iter().map(|v| v / beta).collect();
    let (w, projected) = project_to_domain(domain, raw)?;
    Ok(SvmOutput { w, omega, beta, projected })
}

/// An inequality `a . w <= b` scaled to unit dual norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledInequality {
    pub a: Vec<f64>,
    pub b: f64,
}

impl ScaledInequality {
    /// Scale `(a, b)` by its dual norm; `None` for the zero pair.
    pub fn normalized(a: Vec<f64>, b: f64) -> Option<Self> {
        let radius = (a.len() as f64).sqrt();
        let norm = dual_norm(&a, b, radius);
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Self { a: a.iter().map(|v| v / norm).collect(), b: b / norm })
    }

    pub fn as_vector(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.push(self.b);
        v
    }
}

/// `|(a, b)|_* = |(R a, b)|_2 / sqrt(2)`.
pub fn dual_norm(a: &[f64], b: f64, radius: f64) -> f64 {
    let sq: f64 = a.iter().map(|v| (radius * v).powi(2)).sum::<f64>() + b * b;
    (sq / 2.0).sqrt()
}

/// Domain rows, then `(p, 1)` per feasible point, then `(-q, -1)` per infeasible point.
pub fn valid_inequalities(
    domain: &WeightDomain,
    positives: &[SubSolution],
    negatives: &[SubSolution],
) -> Vec<ScaledInequality> {
    let mut out: Vec<ScaledInequality> = domain
        .extra_rows
        .iter()
        .filter_map(|h| ScaledInequality::normalized(h.a.clone(), h.b))
        .collect();
    out.extend(positives.iter().filter_map(|p| ScaledInequality::normalized(p.to_f64(), 1.0)));
    out.extend(
        negatives
            .iter()
            .filter_map(|q| ScaledInequality::normalized(q.to_f64().iter().map(|v| -v).collect(), -1.0)),
    );
    out
}

/// `phi(a, b) = |(R a, b)|^2 / 4` with `R = sqrt(n)`.
pub fn potential(n: usize) -> DiagonalPotential {
    let mut scale = vec![n as f64; n + 1];
    scale[n] = 1.0;
    DiagonalPotential { scale }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SepOutput {
    pub w: Vec<f64>,
    pub gamma: Vec<f64>,
    pub gradient: Vec<f64>,
    /// Set when the gradient's last coordinate vanished and `previous` was returned.
    pub degenerate: bool,
    pub projected: bool,
    /// Labeled points on the wrong side of `w . x = 1`.
    pub misclassified: usize,
}

/// Surrogate weights read off the potential's gradient at its minimizer over
/// the hull of the scaled valid inequalities.
pub fn sep_separate(
    domain: &WeightDomain,
    n: usize,
    positives: &[SubSolution],
    negatives: &[SubSolution],
    previous: &[f64],
) -> Result<SepOutput, SeparationError> {
    check_len(n, positives.iter().chain(negatives))?;
    if previous.len() != n {
        return Err(SeparationError::DimensionMismatch { expected: n, found: previous.len() });
    }
    let lambda: Vec<Vec<f64>> = valid_inequalities(domain, positives, negatives)
        .iter()
        .map(ScaledInequality::as_vector)
        .collect();
    let phi = potential(n);
    let (gamma, gradient) = if lambda.is_empty() {
        (vec![0.0; n + 1], vec![0.0; n + 1])
    } else {
        let fw = frank_wolfe(&lambda, &phi, FwOptions::default())?;
        let g = phi.gradient(&fw.point);
        (fw.point, g)
    };

    let last = gradient[n];
    let (raw, degenerate) = if last.abs() < DEGENERATE_GRADIENT {
        debug!("separator gradient degenerate ({last:e}); keeping previous weights");
        (previous.to_vec(), true)
    } else {
        (gradient[..n].iter().map(|g| -g / last).collect(), false)
    };
    let clamped: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let (w, projected) = project_to_domain(domain, clamped)?;
    let misclassified = positives.iter().filter(|p| p.dot(&w) > 1.0 + 1e-9).count()
        + negatives.iter().filter(|q| q.dot(&w) < 1.0 - 1e-9).count();
    if misclassified > 0 {
        debug!("separator leaves {misclassified} labeled points misclassified");
    }
    Ok(SepOutput { w, gamma, gradient, degenerate, projected, misclassified })
}

/// Clamp into the unit box, then project onto the domain rows when violated.
pub fn project_to_domain(domain: &WeightDomain, w: Vec<f64>) -> Result<(Vec<f64>, bool), SeparationError> {
    let n = w.len();
    let w: Vec<f64> = w.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if domain.contains(&w, DOMAIN_TOL) {
        return Ok((w, false));
    }
    let sys = domain.to_system(n);
    let q = QpObjective::diagonal(&vec![2.0; n], w.iter().map(|v| -2.0 * v).collect());
    let sol = solve_box_qp(&q, &sys)?;
    debug!("surrogate weights projected onto the weight domain");
    Ok((sol.x.iter().map(|v| v.clamp(0.0, 1.0)).collect(), true))
}

fn check_len<'a>(n: usize, items: impl Iterator<Item = &'a SubSolution>) -> Result<(), SeparationError> {
    for s in items {
        if s.len() != n {
            return Err(SeparationError::DimensionMismatch { expected: n, found: s.len() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HalfSpace;

    fn s(bits: &[u8]) -> SubSolution {
        SubSolution::from_bits(bits).unwrap()
    }

    #[test]
    fn svm_two_items() {
        let out = svm_separate(&WeightDomain::unit_box(), 2, &[s(&[0, 0])], &[s(&[1, 1])]).unwrap();
        assert!((out.beta - 1.0).abs() < 1e-6);
        for v in out.omega.iter().chain(&out.w) {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn svm_without_negatives() {
        let out = svm_separate(&WeightDomain::unit_box(), 1, &[s(&[0])], &[]).unwrap();
        assert!(out.omega[0].abs() < 1e-9);
        assert!((out.beta - 1.0).abs() < 1e-6);
        assert!(out.w[0].abs() < 1e-9);
    }

    #[test]
    fn svm_separates_with_margin() {
        let out = svm_separate(&WeightDomain::unit_box(), 2, &[s(&[0, 0]), s(&[1, 0])], &[s(&[1, 1])]).unwrap();
        let margin = 1.0 / out.beta;
        assert!(s(&[1, 0]).dot(&out.w) <= 1.0 - margin + 1e-7);
        assert!(s(&[1, 1]).dot(&out.w) >= 1.0 + margin - 1e-7);
    }

    #[test]
    fn svm_rejects_inseparable() {
        let err = svm_separate(&WeightDomain::unit_box(), 1, &[s(&[1])], &[s(&[1])]);
        assert!(matches!(err, Err(SeparationError::NotSeparable)));
    }

    #[test]
    fn dual_norm_is_unit_after_scaling() {
        let si = ScaledInequality::normalized(vec![1.0, 0.0, 1.0], 1.0).unwrap();
        assert!((dual_norm(&si.a, si.b, 3f64.sqrt()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sep_only_origin() {
        let out = sep_separate(&WeightDomain::unit_box(), 3, &[s(&[0, 0, 0])], &[], &[0.5; 3]).unwrap();
        assert!(!out.degenerate);
        assert_eq!(out.w, vec![0.0; 3]);
        assert!(out.gradient[3] > 0.0);
    }

    #[test]
    fn sep_two_items_matches_segment_minimizer() {
        // Hull of two points: minimizer on the segment in closed form.
        let p = [0.0, 0.0, 2f64.sqrt()];
        let k = (2.5f64).sqrt();
        let q = [-1.0 / k, -1.0 / k, -1.0 / k];
        let scale = [2.0, 2.0, 1.0];
        let d: Vec<f64> = (0..3).map(|j| q[j] - p[j]).collect();
        let slope: f64 = (0..3).map(|j| 0.5 * scale[j] * p[j] * d[j]).sum();
        let curv: f64 = (0..3).map(|j| 0.5 * scale[j] * d[j] * d[j]).sum();
        let t = (-slope / curv).clamp(0.0, 1.0);
        let gamma: Vec<f64> = (0..3).map(|j| p[j] + t * d[j]).collect();
        let raw = -(scale[0] * gamma[0]) / (scale[2] * gamma[2]);

        let out = sep_separate(&WeightDomain::unit_box(), 2, &[s(&[0, 0])], &[s(&[1, 1])], &[0.0; 2]).unwrap();
        for j in 0..3 {
            assert!((out.gamma[j] - gamma[j]).abs() < 1e-6);
        }
        let want = raw.clamp(0.0, 1.0);
        assert!((out.w[0] - want).abs() < 1e-6 && (out.w[1] - want).abs() < 1e-6);
        assert!(out.w[0] + out.w[1] >= 1.0);
    }

    #[test]
    fn sep_projects_onto_domain_rows() {
        let domain = WeightDomain { extra_rows: vec![HalfSpace { a: vec![1.0, 1.0], b: 0.5 }] };
        let out = sep_separate(&domain, 2, &[s(&[0, 0])], &[s(&[1, 1])], &[0.0; 2]).unwrap();
        assert!(domain.contains(&out.w, 1e-7));
    }
}
