//! The learn-sample-optimize-bound loop and its metrics.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::discrete::{compute_upper_bound, solve_surrogate, solve_with_weights, BoundCache, NoGoodCutSet, SurrogateOutcome};
use crate::error::{Error, Result};
use crate::model::{Instance, Label, LabeledPools, Solution, SubSolution, SurrogateWeights};
use crate::oracle::OracleSuite;
use crate::sampling::{self, block_rows, BlockRow, SampleOutcome, SampleRequest, SearchBackend};
use crate::separation::{sep_separate, svm_separate};

pub use crate::sampling::Strategy as Sampler;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Separator {
    Svm,
    Sep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Exact search: enumeration on small spaces, unlimited branch and bound otherwise.
    Enum,
    /// Branch and bound with a node limit.
    Bnb,
}

/// Sub-problems up to this size are enumerated by the exact backend.
pub const SAMPLE_ENUMERATION_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub separator: Separator,
    pub sampler: Sampler,
    /// Calls allowed per oracle; `None` means unlimited.
    pub budget: Option<usize>,
    pub threshold: f64,
    pub backend: Backend,
    pub node_limit: usize,
    /// Recorded with the run; the loop itself draws no random numbers.
    pub seed: u64,
    pub time_limit: Option<Duration>,
    /// Bound every this many iterations (always on the last one).
    pub bound_every: usize,
    pub max_iterations: Option<usize>,
    /// Compare against the true optimum when hidden weights are present.
    pub evaluate_error: bool,
    /// Run the final feasibility probe after the loop.
    pub probe: bool,
    /// Write wall-clock fields into summaries.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            separator: Separator::Sep,
            sampler: Sampler::Cut,
            budget: Some(2000),
            threshold: 0.01,
            backend: Backend::Enum,
            node_limit: 50_000,
            seed: 0,
            time_limit: Some(Duration::from_secs(600)),
            bound_every: 1,
            max_iterations: None,
            evaluate_error: true,
            probe: true,
            record_timing: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == Some(0) {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!("threshold {} must be nonnegative", self.threshold)));
        }
        if self.bound_every == 0 {
            return Err(Error::InvalidConfig("bounding cadence must be at least 1".into()));
        }
        if self.node_limit == 0 {
            return Err(Error::InvalidConfig("node limit must be at least 1".into()));
        }
        Ok(())
    }

    fn sample_backend(&self, n: usize) -> SearchBackend {
        match self.backend {
            Backend::Enum if n <= SAMPLE_ENUMERATION_LIMIT => SearchBackend::Enumerate,
            Backend::Enum => SearchBackend::BranchAndBound { node_limit: None },
            Backend::Bnb => SearchBackend::BranchAndBound { node_limit: Some(self.node_limit) },
        }
    }

    fn discrete_backend(&self) -> SearchBackend {
        match self.backend {
            Backend::Enum => SearchBackend::Enumerate,
            Backend::Bnb => SearchBackend::BranchAndBound { node_limit: Some(self.node_limit) },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Threshold,
    Budget,
    SearchExhausted,
    Stalled,
    Timeout,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Sampling,
    Optimization,
    Bounding,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Sampling => "sampling",
            Phase::Optimization => "optimization",
            Phase::Bounding => "bounding",
        }
    }
}

/// One line of the per-run trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub lb: f64,
    pub ub: f64,
    pub calls_total: usize,
    pub calls_max_oracle: usize,
    pub phase: Phase,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub lb: f64,
    pub ub: f64,
    pub calls: Vec<usize>,
    pub separation_ms: f64,
    pub sampling_ms: f64,
    pub optimization_ms: f64,
    pub bounding_ms: f64,
    /// Labeled points the separators leave on the wrong side.
    pub misclassified: usize,
}

/// Calls, iterations and seconds spent until some event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub calls: usize,
    pub iters: usize,
    pub time_s: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: RunConfig,
    pub iterations: Vec<IterationRecord>,
    pub trace: Vec<TraceRow>,
    pub x_hat: Solution,
    pub z_hat: f64,
    pub w_hat: SurrogateWeights,
    pub lb: f64,
    pub ub: f64,
    pub termination: Termination,
    pub calls_per_oracle: Vec<usize>,
    pub time_s: f64,
    pub cache_hits: usize,
    pub probe_calls: usize,
    pub suboptimal_samples: usize,
    pub degraded_bounds: usize,
    pub degenerate_separations: usize,
    pub z_star: Option<f64>,
    pub final_feasible: Option<bool>,
    pub pools: LabeledPools,
}

/// Relative gap with the conventions of the stopping rule: zero once the
/// bound meets the incumbent, infinite while the incumbent is not positive.
pub fn relative_gap(lb: f64, ub: f64) -> f64 {
    if ub <= lb + 1e-9 * lb.abs().max(1.0) {
        0.0
    } else if lb <= 0.0 {
        f64::INFINITY
    } else {
        (ub - lb) / lb
    }
}

fn reaches(value: f64, target: f64) -> bool {
    value >= target - 1e-9 * target.abs().max(1.0)
}

impl RunRecord {
    pub fn iters(&self) -> usize {
        self.iterations.len()
    }

    pub fn calls_total(&self) -> usize {
        self.calls_per_oracle.iter().sum()
    }

    pub fn calls_max_oracle(&self) -> usize {
        self.calls_per_oracle.iter().copied().max().unwrap_or(0)
    }

    pub fn gap(&self) -> f64 {
        relative_gap(self.lb, self.ub)
    }

    pub fn reached_threshold(&self) -> bool {
        self.gap() <= self.config.threshold
    }

    pub fn gap_zero(&self) -> bool {
        self.gap() == 0.0
    }

    /// Percentage below the true optimum, when it is known.
    pub fn error_pct(&self) -> Option<f64> {
        let z = self.z_star?;
        if reaches(self.z_hat, z) {
            return Some(0.0);
        }
        Some(if z > 0.0 { 100.0 * (z - self.z_hat) / z } else { f64::INFINITY })
    }

    pub fn error_zero(&self) -> Option<bool> {
        self.error_pct().map(|e| e == 0.0)
    }

    pub fn to_threshold(&self) -> Option<Milestone> {
        let row = self
            .trace
            .iter()
            .find(|r| r.phase == Phase::Bounding && relative_gap(r.lb, r.ub) <= self.config.threshold)?;
        Some(Milestone { calls: row.calls_total, iters: row.t, time_s: row.elapsed_ms / 1e3 })
    }

    pub fn to_optimum(&self) -> Option<Milestone> {
        let z = self.z_star?;
        let row = self.trace.iter().find(|r| reaches(r.lb, z))?;
        Some(Milestone { calls: row.calls_total, iters: row.t, time_s: row.elapsed_ms / 1e3 })
    }

    /// CSV with header `t,lb,ub,calls_total,calls_max_oracle,phase,elapsed_ms`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,lb,ub,calls_total,calls_max_oracle,phase,elapsed_ms\n");
        for r in &self.trace {
            let ub = if r.ub.is_infinite() { "inf".to_string() } else { r.ub.to_string() };
            let ms = if self.config.record_timing { format!("{:.3}", r.elapsed_ms) } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t,
                r.lb,
                ub,
                r.calls_total,
                r.calls_max_oracle,
                r.phase.as_str(),
                ms
            );
        }
        out
    }

    pub fn summary(&self, instance: &Instance) -> RunSummary {
        let timing = self.config.record_timing;
        let time = |v: f64| timing.then_some(v);
        let to_thres = self.to_threshold();
        let to_opt = self.to_optimum();
        let finite = |v: f64| v.is_finite().then_some(v);
        RunSummary {
            instance: instance.name.clone(),
            group: instance.group(),
            kind: instance.kind.to_string(),
            m: instance.m,
            n: instance.n,
            separator: self.config.separator,
            sampler: self.config.sampler,
            budget: self.config.budget,
            threshold: self.config.threshold,
            seed: self.config.seed,
            backend: self.config.backend,
            opt: self.error_zero(),
            gap_zero: self.gap_zero(),
            thres: self.reached_threshold(),
            feas: self.final_feasible,
            gap_pct: finite(100.0 * self.gap()),
            error_pct: self.error_pct().and_then(finite),
            calls: self.calls_total(),
            calls_max_oracle: self.calls_max_oracle(),
            calls_per_oracle: self.calls_per_oracle.clone(),
            iters: self.iters(),
            time_s: time(self.time_s),
            calls_to_thres: to_thres.map(|m| m.calls),
            iters_to_thres: to_thres.map(|m| m.iters),
            time_to_thres: to_thres.and_then(|m| time(m.time_s)),
            calls_to_opt: to_opt.map(|m| m.calls),
            iters_to_opt: to_opt.map(|m| m.iters),
            time_to_opt: to_opt.and_then(|m| time(m.time_s)),
            lb: self.lb,
            ub: finite(self.ub),
            z_hat: self.z_hat,
            z_star: self.z_star,
            termination: self.termination,
            cache_hits: self.cache_hits,
            probe_calls: self.probe_calls,
            suboptimal_samples: self.suboptimal_samples,
            degraded_bounds: self.degraded_bounds,
            degenerate_separations: self.degenerate_separations,
            x_hat: self.x_hat.clone(),
            w_hat: self.w_hat.clone(),
        }
    }
}

/// Per-run results in the layout used by reports. Missing or infinite values are `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub group: String,
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub separator: Separator,
    pub sampler: Sampler,
    pub budget: Option<usize>,
    pub threshold: f64,
    pub seed: u64,
    pub backend: Backend,
    pub opt: Option<bool>,
    pub gap_zero: bool,
    pub thres: bool,
    pub feas: Option<bool>,
    pub gap_pct: Option<f64>,
    pub error_pct: Option<f64>,
    pub calls: usize,
    pub calls_max_oracle: usize,
    pub calls_per_oracle: Vec<usize>,
    pub iters: usize,
    pub time_s: Option<f64>,
    pub calls_to_thres: Option<usize>,
    pub iters_to_thres: Option<usize>,
    pub time_to_thres: Option<f64>,
    pub calls_to_opt: Option<usize>,
    pub iters_to_opt: Option<usize>,
    pub time_to_opt: Option<f64>,
    pub lb: f64,
    pub ub: Option<f64>,
    pub z_hat: f64,
    pub z_star: Option<f64>,
    pub termination: Termination,
    pub cache_hits: usize,
    pub probe_calls: usize,
    pub suboptimal_samples: usize,
    pub degraded_bounds: usize,
    pub degenerate_separations: usize,
    pub x_hat: Solution,
    pub w_hat: SurrogateWeights,
}

struct Loop<'a> {
    instance: &'a Instance,
    config: &'a RunConfig,
    oracles: &'a mut OracleSuite,
    pools: LabeledPools,
    block_rows: Vec<Vec<BlockRow>>,
    w_hat: SurrogateWeights,
    lb: f64,
    ub: f64,
    t: usize,
    start: Instant,
    trace: Vec<TraceRow>,
    iterations: Vec<IterationRecord>,
    bound_cache: BoundCache,
    exhausted: Vec<bool>,
    suboptimal_samples: usize,
    degraded_bounds: usize,
    degenerate_separations: usize,
    last_witness: Option<Solution>,
}

impl Loop<'_> {
    fn elapsed_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    fn timed_out(&self) -> bool {
        self.config.time_limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    fn push_trace(&mut self, phase: Phase) {
        let row = TraceRow {
            t: self.t,
            lb: self.lb,
            ub: self.ub,
            calls_total: self.oracles.calls_total(),
            calls_max_oracle: self.oracles.calls_max(),
            phase,
            elapsed_ms: self.elapsed_ms(),
        };
        self.trace.push(row);
    }

    fn budget_reached(&self) -> bool {
        self.config.budget.is_some_and(|n| (0..self.instance.m).any(|i| self.oracles.calls(i) >= n))
    }

    fn initialize(&mut self) -> Result<()> {
        let (m, n) = (self.instance.m, self.instance.n);
        let zero = Solution::zeros(m, n);
        let one = Solution::ones(m, n);
        self.pools.insert_global(zero.clone(), Label::Feasible, 0)?;
        let mut all_feasible = true;
        for i in 0..m {
            self.pools.insert_sub(i, SubSolution::zeros(n), Label::Feasible, 0)?;
            let label = self.oracles.query(i, &SubSolution::ones(n))?;
            all_feasible &= label.is_feasible();
            self.pools.insert_sub(i, SubSolution::ones(n), label, 0)?;
        }
        self.lb = self.instance.objective(&zero);
        if all_feasible && self.instance.space.contains(&one) {
            info!("the all-ones solution is feasible");
            self.lb = self.lb.max(self.instance.objective(&one));
            self.pools.insert_global(one, Label::Feasible, 0)?;
        } else {
            self.pools.insert_global(one, Label::Infeasible, 0)?;
        }
        self.push_trace(Phase::Init);
        Ok(())
    }

    fn separate_all(&mut self, pools: &LabeledPools) -> Result<usize> {
        let n = self.instance.n;
        let mut misclassified = 0;
        for i in 0..self.instance.m {
            let pos: Vec<SubSolution> = pools.positives(i).copied().collect();
            let neg: Vec<SubSolution> = pools.negatives(i).copied().collect();
            let domain = &self.instance.weight_domains[i];
            self.w_hat.rows[i] = match self.config.separator {
                Separator::Svm => svm_separate(domain, n, &pos, &neg)?.w,
                Separator::Sep => {
                    let out = sep_separate(domain, n, &pos, &neg, &self.w_hat.rows[i])?;
                    if out.degenerate {
                        self.degenerate_separations += 1;
                    }
                    misclassified += out.misclassified;
                    out.w
                }
            };
        }
        Ok(misclassified)
    }

    // Labels `mu` for oracle `i` against the pools of the previous iteration.
    fn label(&mut self, i: usize, mu: &SubSolution, fresh: &mut [Vec<(SubSolution, Label)>]) -> Result<Label> {
        let (label, inferred) = self.oracles.infer_or_query(i, mu, &self.pools)?;
        if !inferred {
            fresh[i].push((*mu, label));
        }
        Ok(label)
    }

    fn sampling_phase(&mut self, fresh: &mut [Vec<(SubSolution, Label)>]) -> Result<()> {
        let n = self.instance.n;
        let backend = self.config.sample_backend(n);
        let mut samples = Vec::new();
        for i in 0..self.instance.m {
            if self.exhausted[i] {
                continue;
            }
            let pos = self.pools.maximal_positives(i);
            let neg = self.pools.minimal_negatives(i);
            let req = SampleRequest { n, rows: &self.block_rows[i], positives: &pos, negatives: &neg, w: &self.w_hat.rows[i] };
            match sampling::sample(self.config.sampler, &req, backend) {
                SampleOutcome::Found(s) => {
                    if s.suboptimal {
                        self.suboptimal_samples += 1;
                    }
                    samples.push((i, s.mu));
                }
                SampleOutcome::Exhausted => {
                    debug!("constraint {i}: every sub-solution labeled or implied");
                    self.exhausted[i] = true;
                }
                SampleOutcome::NodeLimit => {
                    self.suboptimal_samples += 1;
                    debug!("constraint {i}: sampling hit the node limit without a candidate");
                }
            }
        }
        for (i, mu) in samples {
            self.label(i, &mu, fresh)?;
        }
        Ok(())
    }

    /// Returns whether the surrogate problem had a solution.
    fn optimization_phase(&mut self, fresh: &mut [Vec<(SubSolution, Label)>]) -> Result<bool> {
        let cuts = NoGoodCutSet::from_pools(&self.pools);
        let out = solve_surrogate(self.instance, &self.w_hat, &cuts, self.config.discrete_backend())?;
        let x = match out {
            SurrogateOutcome::Optimal { x, suboptimal, .. } => {
                if suboptimal {
                    debug!("surrogate search stopped at the node limit");
                }
                x
            }
            SurrogateOutcome::Infeasible { .. } => {
                debug!("surrogate problem has no admissible point");
                return Ok(false);
            }
        };
        let mut all_feasible = true;
        for i in 0..self.instance.m {
            let label = self.label(i, x.block(i), fresh)?;
            all_feasible &= label.is_feasible();
        }
        if all_feasible {
            let z = self.instance.objective(&x);
            if z > self.lb {
                self.lb = z;
            }
            self.pools.insert_global(x, Label::Feasible, self.t)?;
        } else {
            self.pools.insert_global(x, Label::Infeasible, self.t)?;
        }
        Ok(true)
    }

    fn bound(&mut self) -> Result<()> {
        let ub = compute_upper_bound(self.instance, &self.pools, self.config.discrete_backend(), Some(&mut self.bound_cache))?;
        if !ub.exact {
            self.degraded_bounds += 1;
        }
        if ub.value < self.lb - 1e-9 * self.lb.abs().max(1.0) {
            warn!("upper bound {} fell below the incumbent {}", ub.value, self.lb);
        }
        self.ub = self.ub.min(ub.value.max(self.lb));
        self.last_witness = ub.witness;
        Ok(())
    }

    /// When every block is fully labeled the bound's witness is known feasible without asking.
    fn promote_witness(&mut self) -> Result<()> {
        let Some(x) = self.last_witness.clone() else { return Ok(()) };
        let implied = (0..self.instance.m).all(|i| crate::model::dominated_feasible(x.block(i), self.pools.positives(i)));
        if implied {
            let z = self.instance.objective(&x);
            if z > self.lb {
                info!("bound witness {x:?} is implied feasible; incumbent raised to {z}");
                self.lb = z;
                self.pools.insert_global(x, Label::Feasible, self.t)?;
            }
        }
        Ok(())
    }
}

/// Run the loop on `instance` with the given oracles.
pub fn run(instance: &Instance, oracles: &mut OracleSuite, config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    instance.validate()?;
    if oracles.m() != instance.m {
        return Err(Error::DimensionMismatch { expected: instance.m, found: oracles.m() });
    }
    let (m, n) = (instance.m, instance.n);
    if !instance.space.contains(&Solution::zeros(m, n)) {
        return Err(Error::InvalidInstance("the zero solution must belong to the space".into()));
    }

    let mut state = Loop {
        instance,
        config,
        oracles,
        pools: LabeledPools::new(m, n),
        block_rows: (0..m).map(|i| block_rows(&instance.space, n, i)).collect(),
        w_hat: SurrogateWeights::zeros(m, n),
        lb: 0.0,
        ub: f64::INFINITY,
        t: 0,
        start: Instant::now(),
        trace: Vec::new(),
        iterations: Vec::new(),
        bound_cache: BoundCache::new(m),
        exhausted: vec![false; m],
        suboptimal_samples: 0,
        degraded_bounds: 0,
        degenerate_separations: 0,
        last_witness: None,
    };
    state.initialize()?;

    let termination;
    loop {
        if relative_gap(state.lb, state.ub) <= config.threshold {
            termination = Termination::Threshold;
            break;
        }
        if state.timed_out() {
            termination = Termination::Timeout;
            break;
        }
        if config.max_iterations.is_some_and(|k| state.t >= k) {
            termination = Termination::IterationLimit;
            break;
        }
        state.t += 1;
        let t = state.t;
        let calls_before = state.oracles.calls_total();
        let globals_before = state.pools.global_positives().count() + state.pools.global_negatives().count();

        let clock = Instant::now();
        let snapshot = state.pools.clone();
        let misclassified = state.separate_all(&snapshot)?;
        let separation_ms = clock.elapsed().as_secs_f64() * 1e3;

        let mut fresh: Vec<Vec<(SubSolution, Label)>> = vec![Vec::new(); m];
        let mut stop: Option<Termination> = None;
        let mut sampling_ms = 0.0;
        let mut optimization_ms = 0.0;
        let mut surrogate_found = true;
        for phase in [Phase::Sampling, Phase::Optimization] {
            if state.budget_reached() {
                stop = Some(Termination::Budget);
                break;
            }
            if state.timed_out() {
                stop = Some(Termination::Timeout);
                break;
            }
            let clock = Instant::now();
            match phase {
                Phase::Sampling => {
                    state.sampling_phase(&mut fresh)?;
                    sampling_ms = clock.elapsed().as_secs_f64() * 1e3;
                }
                _ => {
                    surrogate_found = state.optimization_phase(&mut fresh)?;
                    optimization_ms = clock.elapsed().as_secs_f64() * 1e3;
                }
            }
            state.push_trace(phase);
        }

        for (i, labeled) in fresh.into_iter().enumerate() {
            for (mu, label) in labeled {
                state.pools.insert_sub(i, mu, label, t)?;
            }
        }
        debug_assert!(state.pools.check_invariants().is_ok());

        let progressed = state.oracles.calls_total() > calls_before
            || state.pools.global_positives().count() + state.pools.global_negatives().count() > globals_before;
        let search_exhausted = !surrogate_found && state.exhausted.iter().all(|&e| e);
        if stop.is_none() && !progressed {
            stop = Some(if search_exhausted { Termination::SearchExhausted } else { Termination::Stalled });
        }

        let clock = Instant::now();
        let last = stop.is_some() || config.max_iterations.is_some_and(|k| t >= k);
        if t % config.bound_every == 0 || last {
            state.bound()?;
            if search_exhausted {
                state.promote_witness()?;
            }
        }
        let bounding_ms = clock.elapsed().as_secs_f64() * 1e3;
        state.push_trace(Phase::Bounding);
        state.iterations.push(IterationRecord {
            t,
            lb: state.lb,
            ub: state.ub,
            calls: state.oracles.calls_per_oracle().to_vec(),
            separation_ms,
            sampling_ms,
            optimization_ms,
            bounding_ms,
            misclassified,
        });
        debug!("t={t} lb={} ub={} calls={}", state.lb, state.ub, state.oracles.calls_total());

        if let Some(reason) = stop {
            termination = if relative_gap(state.lb, state.ub) <= config.threshold { Termination::Threshold } else { reason };
            break;
        }
    }

    let (x_hat, z_hat) = {
        let mut best: Option<(&Solution, f64)> = None;
        for x in state.pools.global_positives() {
            let z = instance.objective(x);
            if best.is_none_or(|(_, b)| z > b) {
                best = Some((x, z));
            }
        }
        let (x, z) = best.expect("zero solution is always labeled feasible");
        (x.clone(), z)
    };
    let snapshot = state.pools.clone();
    state.separate_all(&snapshot)?;

    let z_star = match (&instance.hidden_weights, config.evaluate_error) {
        (Some(w), true) => solve_with_weights(instance, w, SearchBackend::Enumerate)?.map(|(_, z)| z),
        _ => None,
    };
    let final_feasible = if config.probe {
        Some(final_feasibility_probe(instance, &state.w_hat, state.oracles, config.discrete_backend())?)
    } else {
        None
    };
    let time_s = state.start.elapsed().as_secs_f64();
    info!(
        "finished after {} iterations: lb={} ub={} calls={} ({termination:?})",
        state.t,
        state.lb,
        state.ub,
        state.oracles.calls_total()
    );

    Ok(RunRecord {
        config: config.clone(),
        iterations: state.iterations,
        trace: state.trace,
        x_hat,
        z_hat,
        w_hat: state.w_hat,
        lb: state.lb,
        ub: state.ub,
        termination,
        calls_per_oracle: state.oracles.calls_per_oracle().to_vec(),
        time_s,
        cache_hits: state.oracles.cache_hits(),
        probe_calls: state.oracles.probe_calls(),
        suboptimal_samples: state.suboptimal_samples,
        degraded_bounds: state.degraded_bounds,
        degenerate_separations: state.degenerate_separations,
        z_star,
        final_feasible,
        pools: state.pools,
    })
}

/// Solve the problem with `w_final` standing in for the hidden rows and ask
/// each oracle about its block. Probe calls do not count against the budget.
pub fn final_feasibility_probe(
    instance: &Instance,
    w_final: &SurrogateWeights,
    oracles: &mut OracleSuite,
    backend: SearchBackend,
) -> Result<bool> {
    let Some((x, _)) = solve_with_weights(instance, &w_final.rows, backend)? else {
        return Ok(true);
    };
    let mut feasible = true;
    for i in 0..instance.m {
        feasible &= oracles.probe(i, x.block(i))?.is_feasible();
    }
    Ok(feasible)
}
