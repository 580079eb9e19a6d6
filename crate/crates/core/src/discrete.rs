//! Exact and node-limited search over the combinatorial space.
//!
//! Two problems share one depth-first engine over the `m * n` variables in
//! block-major order:
//!
//! * the surrogate problem: maximize the objective with `w_i . x_i <= 1`
//!   per block, no-good cuts from labeled points, and the known rows;
//! * the upper bound: maximize the objective over every `x` in the space
//!   for which each block admits some weight vector consistent with all
//!   labels and with `w . x_i <= 1`.
//!
//! Both per-block conditions are closed under taking subsets, so they are
//! checked only when a variable is set to one.

use std::collections::HashMap;

use log::debug;

use crate::error::Result;
use crate::model::{full_mask, minimal_elements, maximal_elements, Instance, LabeledPools, Solution, SubSolution, SurrogateWeights};
use crate::oracle::BOUNDARY_TOL;
use crate::sampling::SearchBackend;
use crate::solvers::{lp_feasible, LinearSystem, LpOutcome, Sense};

const ROW_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-9;

/// Below this many variables the exact backend enumerates every vector.
pub const ENUMERATION_LIMIT: usize = 20;

/// No-good cuts for the surrogate problem.
#[derive(Clone, Debug, Default)]
pub struct NoGoodCutSet {
    /// `x` may not be dominated by any of these labeled-feasible solutions.
    pub positive: Vec<Solution>,
    /// Block `i` may not dominate any of `negative[i]`.
    pub negative: Vec<Vec<SubSolution>>,
}

impl NoGoodCutSet {
    pub fn none(m: usize) -> Self {
        Self { positive: Vec::new(), negative: vec![Vec::new(); m] }
    }

    pub fn from_pools(pools: &LabeledPools) -> Self {
        Self {
            positive: pools.global_positives().cloned().collect(),
            negative: (0..pools.m()).map(|i| pools.minimal_negatives(i)).collect(),
        }
    }

    pub fn admits(&self, x: &Solution) -> bool {
        self.positive.iter().all(|s| !x.le(s))
            && x.blocks().iter().zip(&self.negative).all(|(b, neg)| neg.iter().all(|q| !b.ge(q)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SurrogateOutcome {
    Optimal { x: Solution, value: f64, suboptimal: bool, nodes: usize },
    /// No admissible point; `proven` is false when the node limit stopped the search first.
    Infeasible { proven: bool },
}

impl SurrogateOutcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            SurrogateOutcome::Optimal { x, .. } => Some(x),
            SurrogateOutcome::Infeasible { .. } => None,
        }
    }
}

/// Maximize the objective under the surrogate rows, the cuts and the known space.
pub fn solve_surrogate(
    instance: &Instance,
    weights: &SurrogateWeights,
    cuts: &NoGoodCutSet,
    backend: SearchBackend,
) -> Result<SurrogateOutcome> {
    let mut check = SurrogateCheck { weights: &weights.rows, negative: &cuts.negative };
    let problem = Problem::new(instance, Some(&weights.rows), &cuts.positive);
    let out = problem.solve(&mut check, backend)?;
    Ok(match out.best {
        Some((value, x)) => SurrogateOutcome::Optimal { x, value, suboptimal: out.limit_hit, nodes: out.nodes },
        None => SurrogateOutcome::Infeasible { proven: !out.limit_hit },
    })
}

/// Maximize the objective with the given weights as known knapsack rows and no cuts.
pub fn solve_with_weights(
    instance: &Instance,
    weights: &[Vec<f64>],
    backend: SearchBackend,
) -> Result<Option<(Solution, f64)>> {
    let w = SurrogateWeights { rows: weights.to_vec() };
    let out = solve_surrogate(instance, &w, &NoGoodCutSet::none(instance.m), backend)?;
    Ok(match out {
        SurrogateOutcome::Optimal { x, value, .. } => Some((x, value)),
        SurrogateOutcome::Infeasible { .. } => None,
    })
}

struct SurrogateCheck<'a> {
    weights: &'a [Vec<f64>],
    negative: &'a [Vec<SubSolution>],
}

impl BlockCheck for SurrogateCheck<'_> {
    fn allows(&mut self, i: usize, ones: SubSolution) -> Result<bool> {
        Ok(ones.dot(&self.weights[i]) <= 1.0 + BOUNDARY_TOL
            && self.negative[i].iter().all(|q| !ones.ge(q)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpperBound {
    /// Negative infinity when no point qualifies.
    pub value: f64,
    /// False when the node limit was hit and open subtrees were folded into the bound.
    pub exact: bool,
    pub all_cut_off: bool,
    pub witness: Option<Solution>,
    pub nodes: usize,
    pub lp_calls: usize,
}

/// Sub-solutions known to admit no consistent weights. The version spaces only
/// shrink during a run, so entries stay valid as the pools grow.
#[derive(Clone, Debug, Default)]
pub struct BoundCache {
    infeasible: Vec<Vec<SubSolution>>,
}

impl BoundCache {
    pub fn new(m: usize) -> Self {
        Self { infeasible: vec![Vec::new(); m] }
    }

    fn rejects(&self, i: usize, ones: &SubSolution) -> bool {
        self.infeasible[i].iter().any(|q| ones.ge(q))
    }

    fn record(&mut self, i: usize, ones: SubSolution) {
        let list = &mut self.infeasible[i];
        list.retain(|q| !q.ge(&ones));
        list.push(ones);
    }
}

/// Certified upper bound on the hidden optimum from the labeled pools.
pub fn compute_upper_bound(
    instance: &Instance,
    pools: &LabeledPools,
    backend: SearchBackend,
    cache: Option<&mut BoundCache>,
) -> Result<UpperBound> {
    let mut local = BoundCache::new(instance.m);
    let cache = cache.unwrap_or(&mut local);
    let mut check = VersionSpaceCheck::new(instance, pools, cache);
    if let Some(i) = check.empty_block()? {
        debug!("version space of constraint {i} is empty");
        return Ok(UpperBound {
            value: f64::NEG_INFINITY,
            exact: true,
            all_cut_off: true,
            witness: None,
            nodes: 0,
            lp_calls: check.lp_calls,
        });
    }
    let problem = Problem::new(instance, None, &[]);
    let out = problem.solve(&mut check, backend)?;
    let best = out.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
    let value = if out.limit_hit { best.max(out.open_max) } else { best };
    if out.limit_hit {
        debug!("upper bound degraded by node limit: incumbent {best}, open {}", out.open_max);
    }
    Ok(UpperBound {
        value,
        exact: !out.limit_hit,
        all_cut_off: out.best.is_none() && !out.limit_hit,
        witness: out.best.map(|b| b.1),
        nodes: out.nodes,
        lp_calls: check.lp_calls,
    })
}

struct VersionSpaceCheck<'a> {
    systems: Vec<LinearSystem>,
    negative: Vec<Vec<SubSolution>>,
    positive: Vec<Vec<SubSolution>>,
    witnesses: Vec<Vec<Vec<f64>>>,
    memo: Vec<HashMap<SubSolution, bool>>,
    cache: &'a mut BoundCache,
    lp_calls: usize,
}

impl<'a> VersionSpaceCheck<'a> {
    fn new(instance: &Instance, pools: &LabeledPools, cache: &'a mut BoundCache) -> Self {
        let (m, n) = (instance.m, instance.n);
        let mut systems = Vec::with_capacity(m);
        let mut negative = Vec::with_capacity(m);
        let mut positive = Vec::with_capacity(m);
        for i in 0..m {
            let mut sys = instance.weight_domains[i].to_system(n);
            let pos = maximal_elements(pools.positives(i).copied());
            let neg = minimal_elements(pools.negatives(i).copied());
            for p in pos.iter().filter(|p| !p.is_zero()) {
                sys.push(p.to_f64(), Sense::Le, 1.0);
            }
            for q in &neg {
                sys.push(q.to_f64(), Sense::Ge, 1.0);
            }
            systems.push(sys);
            negative.push(neg);
            positive.push(pos);
        }
        Self {
            systems,
            negative,
            positive,
            witnesses: vec![Vec::new(); m],
            memo: vec![HashMap::new(); m],
            cache,
            lp_calls: 0,
        }
    }

    fn empty_block(&mut self) -> Result<Option<usize>> {
        for i in 0..self.systems.len() {
            self.lp_calls += 1;
            match lp_feasible(&self.systems[i])? {
                LpOutcome::Feasible(w) => self.witnesses[i].push(w),
                LpOutcome::Infeasible => return Ok(Some(i)),
            }
        }
        Ok(None)
    }
}

impl BlockCheck for VersionSpaceCheck<'_> {
    fn allows(&mut self, i: usize, ones: SubSolution) -> Result<bool> {
        if self.negative[i].iter().any(|q| ones.ge(q)) || self.cache.rejects(i, &ones) {
            return Ok(false);
        }
        if self.positive[i].iter().any(|p| ones.le(p)) {
            return Ok(true);
        }
        if let Some(&known) = self.memo[i].get(&ones) {
            return Ok(known);
        }
        if self.witnesses[i].iter().any(|w| ones.dot(w) <= 1.0 + WITNESS_TOL) {
            self.memo[i].insert(ones, true);
            return Ok(true);
        }
        let mut sys = self.systems[i].clone();
        sys.push(ones.to_f64(), Sense::Le, 1.0);
        self.lp_calls += 1;
        let ok = match lp_feasible(&sys)? {
            LpOutcome::Feasible(w) => {
                self.witnesses[i].push(w);
                true
            }
            LpOutcome::Infeasible => {
                self.cache.record(i, ones);
                false
            }
        };
        self.memo[i].insert(ones, ok);
        Ok(ok)
    }
}

/// Per-block condition closed under subsets.
trait BlockCheck {
    fn allows(&mut self, i: usize, ones: SubSolution) -> Result<bool>;
}

struct SparseRow {
    sense: Sense,
    rhs: f64,
}

struct Problem<'a> {
    m: usize,
    n: usize,
    values: Vec<f64>,
    rows: Vec<SparseRow>,
    row_coeffs: Vec<Vec<(usize, f64)>>,
    var_rows: Vec<Vec<(usize, f64)>>,
    groups: Vec<Vec<usize>>,
    ungrouped: Vec<usize>,
    knapsack: Option<&'a [Vec<f64>]>,
    ratio_order: Vec<Vec<usize>>,
    positive_cuts: Vec<Vec<u64>>,
}

struct SearchOutput {
    best: Option<(f64, Solution)>,
    nodes: usize,
    limit_hit: bool,
    open_max: f64,
}

impl<'a> Problem<'a> {
    fn new(instance: &Instance, knapsack: Option<&'a [Vec<f64>]>, positive: &[Solution]) -> Self {
        let (m, n) = (instance.m, instance.n);
        let total = m * n;
        let values: Vec<f64> = instance.values.iter().flatten().copied().collect();
        let mut rows = Vec::new();
        let mut row_coeffs = Vec::new();
        let mut var_rows = vec![Vec::new(); total];
        for r in &instance.space.rows {
            let coeffs: Vec<(usize, f64)> =
                r.coeffs.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(k, &c)| (k, c)).collect();
            let id = rows.len();
            for &(k, c) in &coeffs {
                var_rows[k].push((id, c));
            }
            rows.push(SparseRow { sense: r.sense, rhs: r.rhs });
            row_coeffs.push(coeffs);
        }

        // Disjoint at-most-one groups taken from set-packing rows.
        let mut in_group = vec![false; total];
        let mut groups = Vec::new();
        for (r, coeffs) in rows.iter().zip(&row_coeffs) {
            let packing = r.sense == Sense::Le
                && (r.rhs - 1.0).abs() < 1e-12
                && coeffs.len() > 1
                && coeffs.iter().all(|&(_, c)| c == 1.0);
            if !packing {
                continue;
            }
            let members: Vec<usize> = coeffs.iter().map(|&(k, _)| k).filter(|&k| !in_group[k]).collect();
            if members.len() > 1 {
                for &k in &members {
                    in_group[k] = true;
                }
                groups.push(members);
            }
        }
        let ungrouped = (0..total).filter(|&k| !in_group[k]).collect();

        let ratio_order = match knapsack {
            Some(w) => (0..m)
                .map(|i| {
                    let mut order: Vec<usize> = (0..n).collect();
                    let ratio = |j: usize| {
                        let v = values[i * n + j];
                        if w[i][j] <= 0.0 {
                            f64::INFINITY
                        } else {
                            v / w[i][j]
                        }
                    };
                    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));
                    order
                })
                .collect(),
            None => Vec::new(),
        };
        let positive_cuts = positive.iter().map(|s| s.blocks().iter().map(|b| b.mask()).collect()).collect();
        Self {
            m,
            n,
            values,
            rows,
            row_coeffs,
            var_rows,
            groups,
            ungrouped,
            knapsack,
            ratio_order,
            positive_cuts,
        }
    }

    fn solve<C: BlockCheck>(&self, check: &mut C, backend: SearchBackend) -> Result<SearchOutput> {
        let total = self.m * self.n;
        match backend {
            SearchBackend::Enumerate if total <= ENUMERATION_LIMIT => self.enumerate(check),
            SearchBackend::Enumerate => self.branch(check, None),
            SearchBackend::BranchAndBound { node_limit } => self.branch(check, node_limit),
        }
    }

    fn solution(&self, ones: &[u64]) -> Solution {
        Solution::from_blocks(ones.iter().map(|&mask| SubSolution::new(mask, self.n).expect("mask within block")).collect())
            .expect("uniform blocks")
    }

    fn enumerate<C: BlockCheck>(&self, check: &mut C) -> Result<SearchOutput> {
        let total = self.m * self.n;
        let mut best: Option<(f64, Solution)> = None;
        'outer: for flat in 0..(1u64 << total) {
            let ones: Vec<u64> = (0..self.m).map(|i| (flat >> (i * self.n)) & full_mask(self.n)).collect();
            for (r, coeffs) in self.rows.iter().zip(&self.row_coeffs) {
                let act: f64 = coeffs.iter().filter(|(k, _)| flat >> k & 1 == 1).map(|(_, c)| c).sum();
                if !r.sense.holds(act, r.rhs, ROW_TOL) {
                    continue 'outer;
                }
            }
            if self.positive_cuts.iter().any(|s| ones.iter().zip(s).all(|(o, s)| o & !s == 0)) {
                continue;
            }
            let x = self.solution(&ones);
            let z = value_flat(&x, &self.values, self.n);
            if best.as_ref().is_some_and(|(b, bx)| z < *b || (z == *b && x >= *bx)) {
                continue;
            }
            for i in 0..self.m {
                if ones[i] != 0 && !check.allows(i, *x.block(i))? {
                    continue 'outer;
                }
            }
            best = Some((z, x));
        }
        Ok(SearchOutput { best, nodes: 1usize << total, limit_hit: false, open_max: f64::NEG_INFINITY })
    }

    fn branch<C: BlockCheck>(&self, check: &mut C, node_limit: Option<usize>) -> Result<SearchOutput> {
        let total = self.m * self.n;
        let mut st = State {
            ones: vec![0; self.m],
            act: vec![0.0; self.rows.len()],
            pos_rem: self.row_coeffs.iter().map(|c| c.iter().map(|&(_, v)| v.max(0.0)).sum()).collect(),
            neg_rem: self.row_coeffs.iter().map(|c| c.iter().map(|&(_, v)| v.min(0.0)).sum()).collect(),
            fixed_value: 0.0,
            nodes: 0,
            node_limit,
            limit_hit: false,
            open_max: f64::NEG_INFINITY,
            best: None,
        };
        if self.rows_ok(&st, 0..self.rows.len()) {
            self.visit(0, total, &mut st, check)?;
        }
        let best = st.best.as_ref().map(|(z, ones)| (*z, self.solution(ones)));
        Ok(SearchOutput { best, nodes: st.nodes, limit_hit: st.limit_hit, open_max: st.open_max })
    }

    fn rows_ok(&self, st: &State, rows: impl IntoIterator<Item = usize>) -> bool {
        rows.into_iter().all(|r| {
            let row = &self.rows[r];
            let lo = st.act[r] + st.neg_rem[r];
            let hi = st.act[r] + st.pos_rem[r];
            match row.sense {
                Sense::Le => lo <= row.rhs + ROW_TOL,
                Sense::Ge => hi >= row.rhs - ROW_TOL,
                Sense::Eq => lo <= row.rhs + ROW_TOL && hi >= row.rhs - ROW_TOL,
            }
        })
    }

    fn fix(&self, st: &mut State, k: usize, one: bool, sign: f64) {
        for &(r, c) in &self.var_rows[k] {
            if c > 0.0 {
                st.pos_rem[r] -= sign * c;
            } else {
                st.neg_rem[r] -= sign * c;
            }
            if one {
                st.act[r] += sign * c;
            }
        }
    }

    fn visit<C: BlockCheck>(&self, k: usize, total: usize, st: &mut State, check: &mut C) -> Result<()> {
        st.nodes += 1;
        if st.limit_hit || st.node_limit.is_some_and(|l| st.nodes > l) {
            st.limit_hit = true;
            let b = self.bound(k, st);
            st.open_max = st.open_max.max(b);
            return Ok(());
        }
        if !self.positive_cuts.is_empty() {
            let (bi, bj) = (k / self.n, k % self.n);
            let free_of = |i: usize| {
                if i < bi {
                    0
                } else if i == bi {
                    full_mask(self.n) & !full_mask(bj)
                } else {
                    full_mask(self.n)
                }
            };
            let dominated = self
                .positive_cuts
                .iter()
                .any(|s| (0..self.m).all(|i| (st.ones[i] | free_of(i)) & !s[i] == 0));
            if dominated {
                return Ok(());
            }
        }
        if let Some((best_z, best_ones)) = &st.best {
            let b = self.bound(k, st);
            if b < best_z - BOUND_TOL {
                return Ok(());
            }
            if b <= best_z + BOUND_TOL && prefix_greater(&st.ones, best_ones, k, self.n) {
                return Ok(());
            }
        }
        if k == total {
            let z = self.value_of(&st.ones);
            let take = match &st.best {
                None => true,
                Some((b, bo)) => z > *b || (z == *b && lex_less(&st.ones, bo)),
            };
            if take {
                st.best = Some((z, st.ones.clone()));
            }
            return Ok(());
        }

        let (i, j) = (k / self.n, k % self.n);
        let with = SubSolution::new(st.ones[i] | 1 << j, self.n).expect("mask within block");
        if check.allows(i, with)? {
            self.fix(st, k, true, 1.0);
            st.ones[i] |= 1 << j;
            st.fixed_value += self.values[k];
            if self.rows_ok(st, self.var_rows[k].iter().map(|&(r, _)| r)) {
                self.visit(k + 1, total, st, check)?;
            }
            st.fixed_value -= self.values[k];
            st.ones[i] &= !(1 << j);
            self.fix(st, k, true, -1.0);
        }
        self.fix(st, k, false, 1.0);
        if self.rows_ok(st, self.var_rows[k].iter().map(|&(r, _)| r)) {
            self.visit(k + 1, total, st, check)?;
        }
        self.fix(st, k, false, -1.0);
        Ok(())
    }

    fn value_of(&self, ones: &[u64]) -> f64 {
        ones.iter()
            .enumerate()
            .map(|(i, &mask)| SubSolution::new(mask, self.n).expect("mask within block").dot(&self.values[i * self.n..(i + 1) * self.n]))
            .sum()
    }

    // Variables with flat index >= k are free.
    fn bound(&self, k: usize, st: &State) -> f64 {
        let is_one = |v: usize| v < k && st.ones[v / self.n] >> (v % self.n) & 1 == 1;
        let mut grouped = st.fixed_value;
        for g in &self.groups {
            if g.iter().any(|&v| is_one(v)) {
                continue;
            }
            grouped += g.iter().filter(|&&v| v >= k).map(|&v| self.values[v].max(0.0)).fold(0.0, f64::max);
        }
        grouped += self.ungrouped.iter().filter(|&&v| v >= k).map(|&v| self.values[v].max(0.0)).sum::<f64>();

        let Some(w) = self.knapsack else { return grouped };
        let mut packed = st.fixed_value;
        for i in 0..self.m {
            let ones = SubSolution::new(st.ones[i], self.n).expect("mask within block");
            let mut cap = 1.0 + BOUNDARY_TOL - ones.dot(&w[i]);
            for &j in &self.ratio_order[i] {
                let v = i * self.n + j;
                if v < k || self.values[v] <= 0.0 {
                    continue;
                }
                let wj = w[i][j];
                if wj <= cap {
                    packed += self.values[v];
                    cap -= wj;
                } else {
                    if cap > 0.0 {
                        packed += self.values[v] * cap / wj;
                    }
                    break;
                }
            }
        }
        grouped.min(packed)
    }
}

struct State {
    ones: Vec<u64>,
    act: Vec<f64>,
    pos_rem: Vec<f64>,
    neg_rem: Vec<f64>,
    fixed_value: f64,
    nodes: usize,
    node_limit: Option<usize>,
    limit_hit: bool,
    open_max: f64,
    best: Option<(f64, Vec<u64>)>,
}

fn lex_key(mask: u64) -> u64 {
    mask.reverse_bits()
}

fn lex_less(a: &[u64], b: &[u64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return lex_key(*x) < lex_key(*y);
        }
    }
    false
}

// Whether the first `k` variables of `a` form a lexicographically larger prefix than those of `b`.
fn prefix_greater(a: &[u64], b: &[u64], k: usize, n: usize) -> bool {
    let full = k / n;
    for i in 0..full.min(a.len()) {
        if a[i] != b[i] {
            return lex_key(a[i]) > lex_key(b[i]);
        }
    }
    if full < a.len() {
        let mask = full_mask(k % n);
        if k % n > 0 {
            return lex_key(a[full] & mask) > lex_key(b[full] & mask);
        }
    }
    false
}

fn value_flat(x: &Solution, values: &[f64], n: usize) -> f64 {
    x.blocks().iter().enumerate().map(|(i, b)| b.dot(&values[i * n..(i + 1) * n])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CombinatorialSpace, Label, ProblemKind, WeightDomain};

    fn s(bits: &[u8]) -> SubSolution {
        SubSolution::from_bits(bits).unwrap()
    }

    fn inst(values: Vec<Vec<f64>>) -> Instance {
        let (m, n) = (values.len(), values[0].len());
        Instance {
            name: String::new(),
            family: String::new(),
            kind: ProblemKind::Custom,
            m,
            n,
            values,
            hidden_weights: None,
            space: CombinatorialSpace::unconstrained(),
            weight_domains: vec![WeightDomain::unit_box(); m],
        }
    }

    const BACKENDS: [SearchBackend; 2] = [SearchBackend::Enumerate, SearchBackend::BranchAndBound { node_limit: None }];

    #[test]
    fn surrogate_with_initial_cuts() {
        let inst = inst(vec![vec![1.0, 2.0]]);
        let w = SurrogateWeights { rows: vec![vec![0.6, 0.6]] };
        let mut cuts = NoGoodCutSet {
            positive: vec![Solution::zeros(1, 2)],
            negative: vec![vec![s(&[1, 1])]],
        };
        for backend in BACKENDS {
            let out = solve_surrogate(&inst, &w, &cuts, backend).unwrap();
            assert_eq!(out.solution().unwrap().to_flat(), vec![0, 1]);
        }
        cuts.negative[0].push(s(&[0, 1]));
        for backend in BACKENDS {
            let out = solve_surrogate(&inst, &w, &cuts, backend).unwrap();
            assert_eq!(out.solution().unwrap().to_flat(), vec![1, 0]);
        }
    }

    #[test]
    fn surrogate_fully_cut_off() {
        let inst = inst(vec![vec![1.0]]);
        let w = SurrogateWeights { rows: vec![vec![0.5]] };
        let cuts = NoGoodCutSet { positive: vec![Solution::zeros(1, 1)], negative: vec![vec![s(&[1])]] };
        for backend in BACKENDS {
            assert_eq!(solve_surrogate(&inst, &w, &cuts, backend).unwrap(), SurrogateOutcome::Infeasible { proven: true });
        }
    }

    #[test]
    fn bound_single_item() {
        let inst = inst(vec![vec![1.0]]);
        let mut pools = LabeledPools::new(1, 1);
        pools.insert_sub(0, s(&[0]), Label::Feasible, 0).unwrap();
        pools.insert_sub(0, s(&[1]), Label::Infeasible, 0).unwrap();
        for backend in BACKENDS {
            let ub = compute_upper_bound(&inst, &pools, backend, None).unwrap();
            assert_eq!(ub.value, 0.0);
        }
    }

    #[test]
    fn bound_two_items() {
        let inst = inst(vec![vec![3.0, 2.0]]);
        let mut pools = LabeledPools::new(1, 2);
        pools.insert_sub(0, s(&[0, 0]), Label::Feasible, 0).unwrap();
        pools.insert_sub(0, s(&[1, 0]), Label::Feasible, 0).unwrap();
        pools.insert_sub(0, s(&[1, 1]), Label::Infeasible, 0).unwrap();
        for backend in BACKENDS {
            let ub = compute_upper_bound(&inst, &pools, backend, None).unwrap();
            assert_eq!(ub.value, 3.0);
            assert_eq!(ub.witness.unwrap().to_flat(), vec![1, 0]);
        }
    }

    #[test]
    fn node_limit_keeps_bound_valid() {
        let inst = inst(vec![vec![5.0, 4.0, 3.0, 2.0, 1.0, 6.0]]);
        let pools = {
            let mut p = LabeledPools::new(1, 6);
            p.insert_sub(0, SubSolution::zeros(6), Label::Feasible, 0).unwrap();
            p.insert_sub(0, s(&[1, 1, 0, 0, 0, 1]), Label::Infeasible, 0).unwrap();
            p
        };
        let exact = compute_upper_bound(&inst, &pools, SearchBackend::Enumerate, None).unwrap();
        let limited = compute_upper_bound(&inst, &pools, SearchBackend::BranchAndBound { node_limit: Some(3) }, None).unwrap();
        assert!(!limited.exact);
        assert!(limited.value >= exact.value);
    }
}
