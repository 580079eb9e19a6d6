//! Problem data and the labeled state carried through a run.
//!
//! Binary vectors are stored as bit masks, one `u64` per unknown constraint
//! block, so a block holds at most [`MAX_BLOCK_LEN`] variables. All sets are
//! ordered lexicographically on the bit string `(x_0, x_1, ...)`, which fixes
//! iteration order and tie-breaking everywhere downstream.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::solvers::{lp_feasible, LinearSystem, LpOutcome, Sense};

/// Largest number of variables per unknown constraint.
pub const MAX_BLOCK_LEN: usize = 64;

/// Tolerance used when checking known rows of the combinatorial space.
pub const SPACE_TOL: f64 = 1e-9;

/// A 0-1 vector over the variables of one unknown constraint.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubSolution {
    mask: u64,
    len: u8,
}

impl SubSolution {
    pub fn new(mask: u64, len: usize) -> Result<Self> {
        if len == 0 || len > MAX_BLOCK_LEN {
            return Err(Error::InvalidInstance(format!(
                "block length {len} outside 1..={MAX_BLOCK_LEN}"
            )));
        }
        if len < 64 && mask >> len != 0 {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: 64 - mask.leading_zeros() as usize,
            });
        }
        Ok(Self { mask, len: len as u8 })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0 && len <= MAX_BLOCK_LEN);
        Self { mask: 0, len: len as u8 }
    }

    pub fn ones(len: usize) -> Self {
        assert!(len > 0 && len <= MAX_BLOCK_LEN);
        Self { mask: full_mask(len), len: len as u8 }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() || bits.len() > MAX_BLOCK_LEN {
            return Err(Error::InvalidInstance(format!(
                "block length {} outside 1..={MAX_BLOCK_LEN}",
                bits.len()
            )));
        }
        let mut mask = 0u64;
        for (j, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => mask |= 1 << j,
                value => return Err(Error::NotBinary { position: j, value }),
            }
        }
        Ok(Self { mask, len: bits.len() as u8 })
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        self.mask
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.mask == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        self.mask >> j & 1 == 1
    }

    #[inline]
    pub fn count_ones(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Same vector with item `j` switched on.
    #[inline]
    pub fn with(&self, j: usize) -> Self {
        debug_assert!(j < self.len());
        Self { mask: self.mask | 1 << j, len: self.len }
    }

    /// Componentwise `self <= other`.
    #[inline]
    pub fn le(&self, other: &SubSolution) -> bool {
        self.mask & !other.mask == 0
    }

    /// Componentwise `self >= other`.
    #[inline]
    pub fn ge(&self, other: &SubSolution) -> bool {
        other.le(self)
    }

    /// Inner product with a weight row, summed in increasing item order.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut rest = self.mask;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            acc += weights[j];
            rest &= rest - 1;
        }
        acc
    }

    /// Indices of the selected items in increasing order.
    pub fn items(&self) -> impl Iterator<Item = usize> {
        let mut rest = self.mask;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(j)
            }
        })
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len()).map(|j| self.get(j) as u8).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|j| if self.get(j) { 1.0 } else { 0.0 }).collect()
    }

    fn lex_key(&self) -> u64 {
        self.mask.reverse_bits()
    }
}

#[inline]
pub(crate) fn full_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl Ord for SubSolution {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| self.lex_key().cmp(&other.lex_key()))
    }
}

impl PartialOrd for SubSolution {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SubSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for j in 0..self.len() {
            write!(f, "{}", self.get(j) as u8)?;
        }
        write!(f, ")")
    }
}

impl Serialize for SubSolution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_bits().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubSolution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<u8>::deserialize(deserializer)?;
        SubSolution::from_bits(&bits).map_err(serde::de::Error::custom)
    }
}

/// A full 0-1 solution: one block per unknown constraint.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Solution {
    blocks: Vec<SubSolution>,
}

impl Solution {
    pub fn from_blocks(blocks: Vec<SubSolution>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            if let Some(bad) = blocks.iter().find(|b| b.len() != first.len()) {
                return Err(Error::DimensionMismatch { expected: first.len(), found: bad.len() });
            }
        } else {
            return Err(Error::InvalidInstance("solution without blocks".into()));
        }
        Ok(Self { blocks })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self { blocks: vec![SubSolution::zeros(n); m] }
    }

    pub fn ones(m: usize, n: usize) -> Self {
        Self { blocks: vec![SubSolution::ones(n); m] }
    }

    pub fn from_flat(bits: &[u8], m: usize, n: usize) -> Result<Self> {
        if bits.len() != m * n {
            return Err(Error::DimensionMismatch { expected: m * n, found: bits.len() });
        }
        let blocks = bits
            .chunks(n)
            .map(SubSolution::from_bits)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn to_flat(&self) -> Vec<u8> {
        self.blocks.iter().flat_map(|b| b.to_bits()).collect()
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn n(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn blocks(&self) -> &[SubSolution] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &SubSolution {
        &self.blocks[i]
    }

    pub fn restrict(&self, i: usize) -> Result<SubSolution> {
        self.blocks
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i, limit: self.blocks.len() })
    }

    /// Objective value, summed block by block in increasing item order.
    pub fn value(&self, values: &[Vec<f64>]) -> f64 {
        self.blocks.iter().zip(values).map(|(b, v)| b.dot(v)).sum()
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Solution) -> bool {
        self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.le(b))
    }

    /// Value of flat variable `i * n + j`.
    pub fn get_flat(&self, k: usize) -> bool {
        let n = self.n();
        self.blocks[k / n].get(k % n)
    }
}

impl fmt::Debug for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.blocks).finish()
    }
}

/// Slice the block of constraint `i` out of a flat `m * n` binary vector.
pub fn restrict(solution: &[u8], m: usize, n: usize, i: usize) -> Result<SubSolution> {
    if solution.len() != m * n {
        return Err(Error::DimensionMismatch { expected: m * n, found: solution.len() });
    }
    if i >= m {
        return Err(Error::IndexOutOfRange { index: i, limit: m });
    }
    SubSolution::from_bits(&solution[i * n..(i + 1) * n])
}

/// True iff some labeled-feasible point dominates `mu` componentwise.
pub fn dominated_feasible<'a, I>(mu: &SubSolution, pool: I) -> bool
where
    I: IntoIterator<Item = &'a SubSolution>,
{
    pool.into_iter().any(|sigma| mu.le(sigma))
}

/// Outcome of a membership query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Feasible,
    Infeasible,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Feasible => 1,
            Label::Infeasible => -1,
        }
    }

    pub fn is_feasible(self) -> bool {
        self == Label::Feasible
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Knapsack,
    Cspp,
    Gap,
    Adversarial,
    Custom,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProblemKind::Knapsack => "knapsack",
            ProblemKind::Cspp => "cspp",
            ProblemKind::Gap => "gap",
            ProblemKind::Adversarial => "adversarial",
            ProblemKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// One known linear row over all `m * n` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl SpaceRow {
    pub fn activity(&self, x: &Solution) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|&(k, _)| x.get_flat(k))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn is_satisfied(&self, x: &Solution) -> bool {
        self.sense.holds(self.activity(x), self.rhs, SPACE_TOL)
    }

    pub fn holds_at_zero(&self) -> bool {
        self.sense.holds(0.0, self.rhs, SPACE_TOL)
    }
}

/// Labels for rows with a known combinatorial meaning.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceTags {
    /// Every job is assigned to at most one block (GAP columns).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub assignment_columns: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prerequisite_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corequisite_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternative_rows: Vec<usize>,
}

/// The known part `X` of the feasible region.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CombinatorialSpace {
    #[serde(default)]
    pub rows: Vec<SpaceRow>,
    #[serde(default)]
    pub tags: SpaceTags,
    /// Set when the all-zeros vector is allowed to violate a row.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub possibly_empty: bool,
}

impl CombinatorialSpace {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn contains(&self, x: &Solution) -> bool {
        self.rows.iter().all(|r| r.is_satisfied(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Prior knowledge on the weights of one constraint: the unit box cut by
/// `a . w <= b` for every extra row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightDomain {
    pub extra_rows: Vec<HalfSpace>,
}

impl WeightDomain {
    pub fn unit_box() -> Self {
        Self::default()
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.iter().all(|&x| (-tol..=1.0 + tol).contains(&x))
            && self.extra_rows.iter().all(|h| dot(&h.a, w) <= h.b + tol)
    }

    /// The domain as a linear system over `[0, 1]^n`.
    pub fn to_system(&self, n: usize) -> LinearSystem {
        let mut sys = LinearSystem::unit_box(n);
        for h in &self.extra_rows {
            sys.push(h.a.clone(), Sense::Le, h.b);
        }
        sys
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A problem with `m` unknown knapsack constraints over blocks of `n` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    /// Finer family label used to group reports, e.g. `knap-u`.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub family: String,
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub space: CombinatorialSpace,
    pub weight_domains: Vec<WeightDomain>,
}

impl Instance {
    /// Parse and validate an instance document.
    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn vars(&self) -> usize {
        self.m * self.n
    }

    pub fn objective(&self, x: &Solution) -> f64 {
        x.value(&self.values)
    }

    /// Label group used by reports.
    pub fn group(&self) -> String {
        match self.kind {
            ProblemKind::Gap => format!("m={},n={}", self.m, self.n),
            _ if !self.family.is_empty() => self.family.clone(),
            kind => kind.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.m == 0 || self.n == 0 {
            return bad(format!("m={} n={} must both be positive", self.m, self.n));
        }
        if self.n > MAX_BLOCK_LEN {
            return bad(format!("n={} exceeds block limit {MAX_BLOCK_LEN}", self.n));
        }
        check_matrix("values", &self.values, self.m, self.n)?;
        if self.values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("values must be finite and nonnegative".into());
        }
        if let Some(w) = &self.hidden_weights {
            check_matrix("hidden_weights", w, self.m, self.n)?;
            if w.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("hidden weights must lie in [0, 1]".into());
            }
        }
        for (r, row) in self.space.rows.iter().enumerate() {
            if row.coeffs.len() != self.vars() {
                return bad(format!(
                    "space row {r} has {} coefficients, expected {}",
                    row.coeffs.len(),
                    self.vars()
                ));
            }
            if row.coeffs.iter().any(|c| !c.is_finite()) || !row.rhs.is_finite() {
                return bad(format!("space row {r} is not finite"));
            }
            if !self.space.possibly_empty && !row.holds_at_zero() {
                return bad(format!(
                    "space row {r} excludes the zero vector and the space is not flagged possibly_empty"
                ));
            }
        }
        if self.weight_domains.len() != self.m {
            return bad(format!(
                "{} weight domains for m={}",
                self.weight_domains.len(),
                self.m
            ));
        }
        for (i, dom) in self.weight_domains.iter().enumerate() {
            if let Some(h) = dom.extra_rows.iter().find(|h| h.a.len() != self.n) {
                return bad(format!(
                    "weight domain {i} row has {} coefficients, expected {}",
                    h.a.len(),
                    self.n
                ));
            }
            if let LpOutcome::Infeasible = lp_feasible(&dom.to_system(self.n))? {
                return bad(format!("weight domain {i} is empty"));
            }
        }
        Ok(())
    }

    /// Whether `x` meets every hidden constraint (simulated instances only).
    pub fn truly_feasible(&self, x: &Solution) -> Option<bool> {
        let w = self.hidden_weights.as_ref()?;
        Some(
            x.blocks()
                .iter()
                .zip(w)
                .all(|(b, wi)| b.dot(wi) <= 1.0 + crate::oracle::BOUNDARY_TOL),
        )
    }
}

fn check_matrix(name: &str, mat: &[Vec<f64>], m: usize, n: usize) -> Result<()> {
    if mat.len() != m || mat.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInstance(format!("{name} must be an {m}x{n} matrix")));
    }
    Ok(())
}

/// Labeled solutions and sub-solutions, each tagged with the iteration that added it.
#[derive(Clone, Debug)]
pub struct LabeledPools {
    m: usize,
    n: usize,
    global_pos: BTreeMap<Solution, usize>,
    global_neg: BTreeMap<Solution, usize>,
    pos: Vec<BTreeMap<SubSolution, usize>>,
    neg: Vec<BTreeMap<SubSolution, usize>>,
}

impl LabeledPools {
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            global_pos: BTreeMap::new(),
            global_neg: BTreeMap::new(),
            pos: vec![BTreeMap::new(); m],
            neg: vec![BTreeMap::new(); m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Record a labeled full solution. Re-inserting with the same label keeps the first time stamp.
    pub fn insert_global(&mut self, x: Solution, label: Label, t: usize) -> Result<()> {
        let (into, other) = match label {
            Label::Feasible => (&mut self.global_pos, &self.global_neg),
            Label::Infeasible => (&mut self.global_neg, &self.global_pos),
        };
        if other.contains_key(&x) {
            return Err(Error::ConflictingLabel(format!("solution {x:?}")));
        }
        into.entry(x).or_insert(t);
        Ok(())
    }

    /// Record a labeled sub-solution for constraint `i`.
    pub fn insert_sub(&mut self, i: usize, mu: SubSolution, label: Label, t: usize) -> Result<()> {
        if i >= self.m {
            return Err(Error::IndexOutOfRange { index: i, limit: self.m });
        }
        let (into, other) = match label {
            Label::Feasible => (&mut self.pos[i], &self.neg[i]),
            Label::Infeasible => (&mut self.neg[i], &self.pos[i]),
        };
        if other.contains_key(&mu) {
            return Err(Error::ConflictingLabel(format!("constraint {i} sub-solution {mu:?}")));
        }
        into.entry(mu).or_insert(t);
        Ok(())
    }

    pub fn positives(&self, i: usize) -> impl Iterator<Item = &SubSolution> {
        self.pos[i].keys()
    }

    pub fn negatives(&self, i: usize) -> impl Iterator<Item = &SubSolution> {
        self.neg[i].keys()
    }

    pub fn positives_with_time(&self, i: usize) -> &BTreeMap<SubSolution, usize> {
        &self.pos[i]
    }

    pub fn negatives_with_time(&self, i: usize) -> &BTreeMap<SubSolution, usize> {
        &self.neg[i]
    }

    pub fn global_positives(&self) -> impl Iterator<Item = &Solution> {
        self.global_pos.keys()
    }

    pub fn global_negatives(&self) -> impl Iterator<Item = &Solution> {
        self.global_neg.keys()
    }

    pub fn num_positives(&self, i: usize) -> usize {
        self.pos[i].len()
    }

    pub fn num_negatives(&self, i: usize) -> usize {
        self.neg[i].len()
    }

    pub fn label_of(&self, i: usize, mu: &SubSolution) -> Option<Label> {
        if self.pos[i].contains_key(mu) {
            Some(Label::Feasible)
        } else if self.neg[i].contains_key(mu) {
            Some(Label::Infeasible)
        } else {
            None
        }
    }

    /// Feasible sub-solutions of constraint `i` not dominated by another one.
    pub fn maximal_positives(&self, i: usize) -> Vec<SubSolution> {
        maximal_elements(self.pos[i].keys().copied())
    }

    /// Infeasible sub-solutions of constraint `i` not dominating another one.
    pub fn minimal_negatives(&self, i: usize) -> Vec<SubSolution> {
        minimal_elements(self.neg[i].keys().copied())
    }

    /// Disjointness of every positive/negative pair, and coverage of each
    /// global positive by the per-constraint positive pools.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(x) = self.global_pos.keys().find(|x| self.global_neg.contains_key(*x)) {
            return Err(Error::ConflictingLabel(format!("solution {x:?}")));
        }
        for i in 0..self.m {
            if let Some(mu) = self.pos[i].keys().find(|mu| self.neg[i].contains_key(*mu)) {
                return Err(Error::ConflictingLabel(format!("constraint {i} sub-solution {mu:?}")));
            }
            for x in self.global_pos.keys() {
                if !dominated_feasible(x.block(i), self.pos[i].keys()) {
                    return Err(Error::ConflictingLabel(format!(
                        "feasible solution {x:?} not covered by constraint {i} pool"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Elements of `items` with no strict superset in `items`.
pub fn maximal_elements<I: IntoIterator<Item = SubSolution>>(items: I) -> Vec<SubSolution> {
    let mut sorted: Vec<SubSolution> = items.into_iter().collect();
    sorted.sort_by(|a, b| b.count_ones().cmp(&a.count_ones()).then_with(|| a.cmp(b)));
    let mut kept: Vec<SubSolution> = Vec::new();
    for s in sorted {
        if !kept.iter().any(|k| s.le(k)) {
            kept.push(s);
        }
    }
    kept.sort();
    kept
}

/// Elements of `items` with no strict subset in `items`.
pub fn minimal_elements<I: IntoIterator<Item = SubSolution>>(items: I) -> Vec<SubSolution> {
    let mut sorted: Vec<SubSolution> = items.into_iter().collect();
    sorted.sort_by(|a, b| a.count_ones().cmp(&b.count_ones()).then_with(|| a.cmp(b)));
    let mut kept: Vec<SubSolution> = Vec::new();
    for s in sorted {
        if !kept.iter().any(|k| s.ge(k)) {
            kept.push(s);
        }
    }
    kept.sort();
    kept
}

/// Current surrogate weights, one row per unknown constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SurrogateWeights {
    pub rows: Vec<Vec<f64>>,
}

impl SurrogateWeights {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self { rows: vec![vec![0.0; n]; m] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}
