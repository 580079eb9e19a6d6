//! Sampling of never-labeled sub-solutions close to the current surrogate.
//!
//! A candidate `mu` is fresh when no feasible point dominates it and it
//! dominates no infeasible point. Among fresh candidates inside the block's
//! rows, `Sim` minimizes `|1 - w . mu|` and `Cut` minimizes the squared
//! distance from `w` to the hyperplane `{v : v . mu = 1}`, which is
//! `(w . mu - 1)^2 / |mu|^2`. Ties go to the lexicographically smallest bit string.

use serde::{Deserialize, Serialize};

use crate::model::{full_mask, CombinatorialSpace, SubSolution};
use crate::solvers::{LinearRow, Sense};

const ROW_TOL: f64 = 1e-9;
// Slack on bound pruning so rounding in partial sums never cuts an optimal leaf.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Sim,
    Cut,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchBackend {
    Enumerate,
    BranchAndBound { node_limit: Option<usize> },
}

/// One row of the combinatorial space that only involves the sampled block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRow {
    pub a: Vec<f64>,
    pub sense: Sense,
    pub b: f64,
}

impl BlockRow {
    fn activity(&self, mu: &SubSolution) -> f64 {
        mu.dot(&self.a)
    }
}

/// Rows of `space` whose support lies inside block `i`, restricted to that block.
pub fn block_rows(space: &CombinatorialSpace, n: usize, i: usize) -> Vec<BlockRow> {
    let range = i * n..(i + 1) * n;
    space
        .rows
        .iter()
        .filter(|r| r.coeffs.iter().enumerate().all(|(k, &c)| c == 0.0 || range.contains(&k)))
        .filter(|r| r.coeffs[range.clone()].iter().any(|&c| c != 0.0))
        .map(|r| BlockRow { a: r.coeffs[range.clone()].to_vec(), sense: r.sense, b: r.rhs })
        .collect()
}

impl From<&LinearRow> for BlockRow {
    fn from(r: &LinearRow) -> Self {
        Self { a: r.a.clone(), sense: r.sense, b: r.b }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SampleRequest<'a> {
    pub n: usize,
    pub rows: &'a [BlockRow],
    pub positives: &'a [SubSolution],
    pub negatives: &'a [SubSolution],
    pub w: &'a [f64],
}

impl SampleRequest<'_> {
    /// Whether `mu` is unlabeled and not implied by any labeled point.
    pub fn is_fresh(&self, mu: &SubSolution) -> bool {
        self.positives.iter().all(|p| !mu.le(p)) && self.negatives.iter().all(|q| !mu.ge(q))
    }

    pub fn in_block_space(&self, mu: &SubSolution) -> bool {
        self.rows.iter().all(|r| r.sense.holds(r.activity(mu), r.b, ROW_TOL))
    }

    pub fn admissible(&self, mu: &SubSolution) -> bool {
        self.is_fresh(mu) && self.in_block_space(mu)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub mu: SubSolution,
    pub objective: f64,
    /// Set when the node limit stopped the search before optimality was proven.
    pub suboptimal: bool,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SampleOutcome {
    Found(Sample),
    /// No admissible point remains.
    Exhausted,
    /// The node limit was hit before any admissible point was found.
    NodeLimit,
}

impl SampleOutcome {
    pub fn sample(&self) -> Option<&Sample> {
        match self {
            SampleOutcome::Found(s) => Some(s),
            _ => None,
        }
    }
}

/// Sampling objective of `mu`; `Cut` is infinite at the zero vector.
pub fn objective(strategy: Strategy, w: &[f64], mu: &SubSolution) -> f64 {
    let s = mu.dot(w);
    match strategy {
        Strategy::Sim => (1.0 - s).abs(),
        Strategy::Cut => {
            let k = mu.count_ones();
            if k == 0 {
                f64::INFINITY
            } else {
                (s - 1.0).powi(2) / k as f64
            }
        }
    }
}

pub fn sim_sample(req: &SampleRequest<'_>, backend: SearchBackend) -> SampleOutcome {
    sample(Strategy::Sim, req, backend)
}

pub fn cut_sample(req: &SampleRequest<'_>, backend: SearchBackend) -> SampleOutcome {
    sample(Strategy::Cut, req, backend)
}

pub fn sample(strategy: Strategy, req: &SampleRequest<'_>, backend: SearchBackend) -> SampleOutcome {
    assert_eq!(req.w.len(), req.n, "surrogate row length");
    let out = match backend {
        SearchBackend::Enumerate => enumerate(strategy, req),
        SearchBackend::BranchAndBound { node_limit } => Search::new(strategy, req, node_limit).run(),
    };
    if let SampleOutcome::Found(s) = &out {
        assert!(req.admissible(&s.mu), "sampled point {:?} is not fresh", s.mu);
    }
    out
}

fn better(obj: f64, mu: &SubSolution, best: &Option<(f64, SubSolution)>) -> bool {
    match best {
        None => true,
        Some((b, bmu)) => obj < *b || (obj == *b && mu < bmu),
    }
}

fn enumerate(strategy: Strategy, req: &SampleRequest<'_>) -> SampleOutcome {
    assert!(req.n <= 30, "enumeration over {} items", req.n);
    let mut best: Option<(f64, SubSolution)> = None;
    for mask in 0..(1u64 << req.n) {
        let mu = SubSolution::new(mask, req.n).expect("mask within block");
        let obj = objective(strategy, req.w, &mu);
        if !obj.is_finite() || !better(obj, &mu, &best) {
            continue;
        }
        if req.admissible(&mu) {
            best = Some((obj, mu));
        }
    }
    match best {
        Some((objective, mu)) => SampleOutcome::Found(Sample {
            mu,
            objective,
            suboptimal: false,
            nodes: 1usize << req.n,
        }),
        None => SampleOutcome::Exhausted,
    }
}

struct Search<'a> {
    strategy: Strategy,
    req: &'a SampleRequest<'a>,
    node_limit: Option<usize>,
    nodes: usize,
    limit_hit: bool,
    best: Option<(f64, SubSolution)>,
}

impl<'a> Search<'a> {
    fn new(strategy: Strategy, req: &'a SampleRequest<'a>, node_limit: Option<usize>) -> Self {
        Self { strategy, req, node_limit, nodes: 0, limit_hit: false, best: None }
    }

    fn run(mut self) -> SampleOutcome {
        self.visit(0, 0);
        match self.best {
            Some((objective, mu)) => SampleOutcome::Found(Sample {
                mu,
                objective,
                suboptimal: self.limit_hit,
                nodes: self.nodes,
            }),
            None if self.limit_hit => SampleOutcome::NodeLimit,
            None => SampleOutcome::Exhausted,
        }
    }

    // Items below `depth` are fixed: `ones` holds the ones among them.
    fn visit(&mut self, depth: usize, ones: u64) {
        if self.limit_hit {
            return;
        }
        self.nodes += 1;
        if self.node_limit.is_some_and(|l| self.nodes > l) {
            self.limit_hit = true;
            return;
        }
        let n = self.req.n;
        let free = full_mask(n) & !full_mask(depth);
        if self.req.positives.iter().any(|p| (ones | free) & !p.mask() == 0) {
            return;
        }
        if self.req.negatives.iter().any(|q| ones & q.mask() == q.mask()) {
            return;
        }
        if !self.rows_reachable(ones, free) {
            return;
        }
        if let Some((b, _)) = self.best {
            if self.bound(ones, free) > b + BOUND_SLACK {
                return;
            }
        }
        if depth == n {
            let mu = SubSolution::new(ones, n).expect("mask within block");
            let obj = objective(self.strategy, self.req.w, &mu);
            if obj.is_finite() && better(obj, &mu, &self.best) && self.req.admissible(&mu) {
                self.best = Some((obj, mu));
            }
            return;
        }
        self.visit(depth + 1, ones);
        self.visit(depth + 1, ones | 1 << depth);
    }

    fn rows_reachable(&self, ones: u64, free: u64) -> bool {
        self.req.rows.iter().all(|r| {
            let mut lo = 0.0;
            let mut hi = 0.0;
            for (j, &a) in r.a.iter().enumerate() {
                if ones >> j & 1 == 1 {
                    lo += a;
                    hi += a;
                } else if free >> j & 1 == 1 {
                    if a < 0.0 {
                        lo += a;
                    } else {
                        hi += a;
                    }
                }
            }
            match r.sense {
                Sense::Le => lo <= r.b + ROW_TOL,
                Sense::Ge => hi >= r.b - ROW_TOL,
                Sense::Eq => lo <= r.b + ROW_TOL && hi >= r.b - ROW_TOL,
            }
        })
    }

    fn bound(&self, ones: u64, free: u64) -> f64 {
        let w = self.req.w;
        let fixed = SubSolution::new(ones, self.req.n).expect("mask within block").dot(w);
        let mut free_w: Vec<f64> = (0..self.req.n).filter(|&j| free >> j & 1 == 1).map(|j| w[j]).collect();
        match self.strategy {
            Strategy::Sim => {
                let hi = fixed + free_w.iter().sum::<f64>();
                interval_distance(fixed, hi)
            }
            Strategy::Cut => {
                free_w.sort_by(f64::total_cmp);
                let k0 = ones.count_ones() as usize;
                let mut best = f64::INFINITY;
                let (mut small, mut large) = (0.0, 0.0);
                for extra in 0..=free_w.len() {
                    if extra > 0 {
                        small += free_w[extra - 1];
                        large += free_w[free_w.len() - extra];
                    }
                    let k = k0 + extra;
                    if k == 0 {
                        continue;
                    }
                    let d = interval_distance(fixed + small, fixed + large);
                    best = best.min(d * d / k as f64);
                }
                best
            }
        }
    }
}

// Distance from 1 to [lo, hi].
fn interval_distance(lo: f64, hi: f64) -> f64 {
    if 1.0 < lo {
        lo - 1.0
    } else if 1.0 > hi {
        1.0 - hi
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(bits: &[u8]) -> SubSolution {
        SubSolution::from_bits(bits).unwrap()
    }

    const W: [f64; 3] = [0.2, 0.3, 0.9];

    fn req<'a>(pos: &'a [SubSolution], neg: &'a [SubSolution], w: &'a [f64]) -> SampleRequest<'a> {
        SampleRequest { n: w.len(), rows: &[], positives: pos, negatives: neg, w }
    }

    #[test]
    fn sim_prefers_lexicographically_smaller_tie() {
        let pos = [s(&[0, 0, 0])];
        let neg = [s(&[1, 1, 1])];
        for backend in [SearchBackend::Enumerate, SearchBackend::BranchAndBound { node_limit: None }] {
            let out = sim_sample(&req(&pos, &neg, &W), backend);
            let got = out.sample().unwrap();
            assert_eq!(got.mu, s(&[0, 0, 1]));
            assert!((got.objective - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn cut_picks_two_items() {
        let pos = [s(&[0, 0, 0])];
        let neg = [s(&[1, 1, 1])];
        for backend in [SearchBackend::Enumerate, SearchBackend::BranchAndBound { node_limit: None }] {
            let got = cut_sample(&req(&pos, &neg, &W), backend).sample().unwrap().clone();
            assert_eq!(got.mu, s(&[1, 0, 1]));
            assert!((got.objective - 0.005).abs() < 1e-12);
        }
    }

    #[test]
    fn cut_on_hyperplane_is_zero() {
        let pos = [s(&[0, 0])];
        let got = cut_sample(&req(&pos, &[], &[0.5, 0.5]), SearchBackend::Enumerate);
        let got = got.sample().unwrap();
        assert_eq!(got.mu, s(&[1, 1]));
        assert_eq!(got.objective, 0.0);
    }

    #[test]
    fn cut_closed_form_matches_projection() {
        let mu = s(&[1, 0, 1]);
        let k = 2.0;
        let t = (mu.dot(&W) - 1.0) / k;
        let p: Vec<f64> = (0..3).map(|j| W[j] - t * mu.to_f64()[j]).collect();
        assert!((mu.dot(&p) - 1.0).abs() < 1e-12);
        let d2: f64 = (0..3).map(|j| (W[j] - p[j]).powi(2)).sum();
        assert!((d2 - objective(Strategy::Cut, &W, &mu)).abs() < 1e-12);
    }

    #[test]
    fn exhausted_when_everything_implied() {
        let pos = [s(&[1])];
        for backend in [SearchBackend::Enumerate, SearchBackend::BranchAndBound { node_limit: Some(10) }] {
            assert_eq!(sim_sample(&req(&pos, &[], &[0.5]), backend), SampleOutcome::Exhausted);
        }
    }

    #[test]
    fn block_rows_respected() {
        let pos = [s(&[0, 0, 0])];
        let rows = [BlockRow { a: vec![0.0, 1.0, 1.0], sense: Sense::Le, b: 1.0 }];
        let r = SampleRequest { n: 3, rows: &rows, positives: &pos, negatives: &[], w: &[0.1, 0.5, 0.5] };
        for backend in [SearchBackend::Enumerate, SearchBackend::BranchAndBound { node_limit: None }] {
            let got = sim_sample(&r, backend).sample().unwrap().clone();
            assert!(r.in_block_space(&got.mu));
            assert_eq!(got.mu, s(&[1, 0, 1]));
        }
    }
}
