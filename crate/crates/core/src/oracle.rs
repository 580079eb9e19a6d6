//! Membership oracles and the per-run suite that counts their calls.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use log::{debug, info};
use thiserror::Error;

use crate::model::{dominated_feasible, Instance, Label, LabeledPools, SubSolution};

/// Slack allowed above 1 when a hidden weighted sum is compared to the capacity.
pub const BOUNDARY_TOL: f64 = 1e-12;

const MAX_INVALID_ANSWERS: usize = 3;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle {oracle} exhausted its budget of {budget} calls")]
    BudgetExhausted { oracle: usize, budget: usize },

    #[error("oracle {oracle} aborted after {attempts} invalid answers")]
    Aborted { oracle: usize, attempts: usize },

    #[error("oracle {oracle} input closed")]
    InputClosed { oracle: usize },

    #[error("oracle {oracle}: sub-solution has {found} entries, expected {expected}")]
    DimensionMismatch { oracle: usize, expected: usize, found: usize },

    #[error("oracle index {index} out of range (have {count})")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("instance has no hidden weights to simulate oracles from")]
    NoHiddenWeights,

    #[error("oracle io: {0}")]
    Io(#[from] io::Error),
}

/// Answers whether a sub-solution satisfies one hidden constraint.
pub trait MembershipOracle {
    fn label(&mut self, mu: &SubSolution) -> Result<Label, OracleError>;
}

/// Oracle backed by known weights: feasible iff `w . mu <= 1`.
#[derive(Clone, Debug)]
pub struct SimulatedOracle {
    index: usize,
    weights: Vec<f64>,
}

impl SimulatedOracle {
    pub fn new(index: usize, weights: Vec<f64>) -> Self {
        Self { index, weights }
    }

    pub fn evaluate(weights: &[f64], mu: &SubSolution) -> Label {
        if mu.dot(weights) <= 1.0 + BOUNDARY_TOL {
            Label::Feasible
        } else {
            Label::Infeasible
        }
    }
}

impl MembershipOracle for SimulatedOracle {
    fn label(&mut self, mu: &SubSolution) -> Result<Label, OracleError> {
        if mu.len() != self.weights.len() {
            return Err(OracleError::DimensionMismatch {
                oracle: self.index,
                expected: self.weights.len(),
                found: mu.len(),
            });
        }
        Ok(Self::evaluate(&self.weights, mu))
    }
}

/// Source of answer lines for an interactive oracle.
pub trait LineSource {
    /// Next line without its terminator, or `None` at end of input.
    fn next_line(&mut self) -> io::Result<Option<String>>;
}

/// Reads answers from the process standard input.
pub struct StdinSource;

impl LineSource for StdinSource {
    fn next_line(&mut self) -> io::Result<Option<String>> {
        let mut line = String::new();
        if io::stdin().read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\r', '\n']).to_string()))
    }
}

/// Adapts any buffered reader.
pub struct ReaderSource<R>(pub R);

impl<R: BufRead> LineSource for ReaderSource<R> {
    fn next_line(&mut self) -> io::Result<Option<String>> {
        let mut line = String::new();
        if self.0.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\r', '\n']).to_string()))
    }
}

/// Asks a person. Items are printed with 0-based indices.
pub struct InteractiveOracle {
    index: usize,
    n: usize,
    input: Box<dyn LineSource>,
    output: Box<dyn Write>,
}

impl InteractiveOracle {
    pub fn new(index: usize, n: usize, input: Box<dyn LineSource>, output: Box<dyn Write>) -> Self {
        Self { index, n, input, output }
    }

    pub fn stdio(index: usize, n: usize) -> Self {
        Self::new(index, n, Box::new(StdinSource), Box::new(io::stderr()))
    }

    pub fn prompt_line(index: usize, mu: &SubSolution) -> String {
        let items: Vec<String> = mu.items().map(|j| j.to_string()).collect();
        format!("oracle {index} | items {{{}}} | feasible? [y/n]", items.join(","))
    }
}

impl MembershipOracle for InteractiveOracle {
    fn label(&mut self, mu: &SubSolution) -> Result<Label, OracleError> {
        if mu.len() != self.n {
            return Err(OracleError::DimensionMismatch { oracle: self.index, expected: self.n, found: mu.len() });
        }
        for _ in 0..MAX_INVALID_ANSWERS {
            writeln!(self.output, "{}", Self::prompt_line(self.index, mu))?;
            self.output.flush()?;
            let Some(line) = self.input.next_line()? else {
                return Err(OracleError::InputClosed { oracle: self.index });
            };
            match line.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => return Ok(Label::Feasible),
                "n" | "no" => return Ok(Label::Infeasible),
                other => {
                    writeln!(self.output, "please answer y or n (got {other:?})")?;
                }
            }
        }
        Err(OracleError::Aborted { oracle: self.index, attempts: MAX_INVALID_ANSWERS })
    }
}

/// The `m` oracles of a run with their call counters.
///
/// Repeated queries are answered from a cache and do not count. Probe
/// queries are tallied separately and never count against the budget.
pub struct OracleSuite {
    backends: Vec<Box<dyn MembershipOracle>>,
    calls: Vec<usize>,
    budget: Option<usize>,
    cache: Vec<HashMap<SubSolution, Label>>,
    cache_hits: usize,
    probe_calls: Vec<usize>,
}

impl OracleSuite {
    pub fn new(backends: Vec<Box<dyn MembershipOracle>>, budget: Option<usize>) -> Self {
        let m = backends.len();
        Self {
            backends,
            calls: vec![0; m],
            budget,
            cache: vec![HashMap::new(); m],
            cache_hits: 0,
            probe_calls: vec![0; m],
        }
    }

    pub fn simulated(weights: &[Vec<f64>], budget: Option<usize>) -> Self {
        let backends = weights
            .iter()
            .enumerate()
            .map(|(i, w)| Box::new(SimulatedOracle::new(i, w.clone())) as Box<dyn MembershipOracle>)
            .collect();
        Self::new(backends, budget)
    }

    pub fn from_instance(instance: &Instance, budget: Option<usize>) -> Result<Self, OracleError> {
        let w = instance.hidden_weights.as_ref().ok_or(OracleError::NoHiddenWeights)?;
        Ok(Self::simulated(w, budget))
    }

    pub fn interactive(m: usize, n: usize, budget: Option<usize>) -> Self {
        let backends = (0..m)
            .map(|i| Box::new(InteractiveOracle::stdio(i, n)) as Box<dyn MembershipOracle>)
            .collect();
        Self::new(backends, budget)
    }

    pub fn m(&self) -> usize {
        self.backends.len()
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn calls(&self, i: usize) -> usize {
        self.calls[i]
    }

    pub fn calls_per_oracle(&self) -> &[usize] {
        &self.calls
    }

    pub fn calls_total(&self) -> usize {
        self.calls.iter().sum()
    }

    pub fn calls_max(&self) -> usize {
        self.calls.iter().copied().max().unwrap_or(0)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits
    }

    pub fn probe_calls(&self) -> usize {
        self.probe_calls.iter().sum()
    }

    fn check_index(&self, i: usize) -> Result<(), OracleError> {
        if i >= self.backends.len() {
            return Err(OracleError::IndexOutOfRange { index: i, count: self.backends.len() });
        }
        Ok(())
    }

    /// Counted query of oracle `i`.
    pub fn query(&mut self, i: usize, mu: &SubSolution) -> Result<Label, OracleError> {
        self.check_index(i)?;
        if let Some(&label) = self.cache[i].get(mu) {
            self.cache_hits += 1;
            debug!("oracle {i}: repeated query {mu:?} answered from cache");
            return Ok(label);
        }
        if let Some(budget) = self.budget {
            if self.calls[i] >= budget {
                return Err(OracleError::BudgetExhausted { oracle: i, budget });
            }
        }
        let label = self.backends[i].label(mu)?;
        self.calls[i] += 1;
        self.cache[i].insert(*mu, label);
        Ok(label)
    }

    /// Label implied by a dominating feasible point, else a counted query.
    /// The flag reports whether the label was inferred.
    pub fn infer_or_query(
        &mut self,
        i: usize,
        mu: &SubSolution,
        pools: &LabeledPools,
    ) -> Result<(Label, bool), OracleError> {
        self.check_index(i)?;
        if dominated_feasible(mu, pools.positives(i)) {
            return Ok((Label::Feasible, true));
        }
        Ok((self.query(i, mu)?, false))
    }

    /// Uncounted query used after a run has finished.
    pub fn probe(&mut self, i: usize, mu: &SubSolution) -> Result<Label, OracleError> {
        self.check_index(i)?;
        if let Some(&label) = self.cache[i].get(mu) {
            return Ok(label);
        }
        let label = self.backends[i].label(mu)?;
        self.probe_calls[i] += 1;
        info!("oracle {i}: probe query {mu:?} -> {label:?} (not counted)");
        self.cache[i].insert(*mu, label);
        Ok(label)
    }
}
