//! Instance generators and parsers: random knapsacks, course selection with
//! prerequisites, generalized assignment files, and the hard family for
//! lower-bound experiments.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::model::{CombinatorialSpace, Instance, ProblemKind, SpaceRow, SpaceTags, WeightDomain};
use crate::solvers::Sense;

/// Largest raw weight drawn by the knapsack generator.
pub const KNAPSACK_RANGE: u32 = 10_000;
const CORRELATION_WINDOW: i64 = KNAPSACK_RANGE as i64 / 10;
/// Capacities are `h` thirty-firsts of the total weight.
pub const CAPACITY_DIVISOR: f64 = 31.0;
/// Hours available for the whole study plan.
pub const HOURS_BUDGET: f64 = 1700.0;
/// Hours per credit unit.
pub const HOURS_PER_CREDIT: f64 = 14.0;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("expected {expected} tokens, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("token {token:?} at offset {offset} is not an integer")]
    InvalidToken { offset: usize, token: String },
    #[error("{found} unused tokens after offset {offset}")]
    TrailingTokens { offset: usize, found: usize },
    #[error("problem {problem}: agent {agent} has nonpositive capacity {capacity}")]
    NonPositiveCapacity { problem: usize, agent: usize, capacity: i64 },
    #[error("problem {problem}: {what} must be positive")]
    BadHeader { problem: usize, what: &'static str },
}

/// Random source for one named stream of a seed. Separate consumers get
/// separate streams, so adding draws to one never shifts another.
pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    // FNV-1a keeps stream ids stable across platforms and releases.
    let id = stream.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnapsackKind {
    /// Values independent of weights.
    U,
    /// Values within a window around the weight.
    W,
    /// Values equal to the weight plus a constant.
    S,
}

impl KnapsackKind {
    pub fn family(self) -> &'static str {
        match self {
            KnapsackKind::U => "knap-u",
            KnapsackKind::W => "knap-w",
            KnapsackKind::S => "knap-s",
        }
    }

    fn value(self, weight: u32, rng: &mut impl Rng) -> f64 {
        match self {
            KnapsackKind::U => rng.random_range(1..=KNAPSACK_RANGE) as f64,
            KnapsackKind::W => {
                let w = weight as i64;
                rng.random_range(w - CORRELATION_WINDOW..=w + CORRELATION_WINDOW).max(1) as f64
            }
            KnapsackKind::S => (weight as i64 + CORRELATION_WINDOW) as f64,
        }
    }
}

impl std::str::FromStr for KnapsackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u" | "knap-u" => Ok(KnapsackKind::U),
            "w" | "knap-w" => Ok(KnapsackKind::W),
            "s" | "knap-s" => Ok(KnapsackKind::S),
            _ => Err(Error::InvalidConfig(format!("unknown knapsack kind {s:?}"))),
        }
    }
}

/// Single-constraint knapsack with raw weights in `1..=10000` and capacity `h * sum / 31`.
pub fn gen_knapsack(kind: KnapsackKind, n: usize, h: u32, seed: u64) -> Result<Instance> {
    let mut rng = stream_rng(seed, "knapsack");
    let weights: Vec<u32> = (0..n).map(|_| rng.random_range(1..=KNAPSACK_RANGE)).collect();
    let values: Vec<f64> = weights.iter().map(|&w| kind.value(w, &mut rng)).collect();
    let mut inst = knapsack_from_raw(&weights, values, h)?;
    inst.family = kind.family().into();
    inst.name = format!("{}-n{n}-h{h}-s{seed}", kind.family());
    Ok(inst)
}

/// Knapsack from explicit raw weights and values.
pub fn knapsack_from_raw(weights: &[u32], values: Vec<f64>, h: u32) -> Result<Instance> {
    if !(1..=30).contains(&h) {
        return Err(Error::InvalidConfig(format!("capacity factor h={h} must lie in 1..=30")));
    }
    if weights.is_empty() || weights.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: weights.len().max(1), found: values.len() });
    }
    let total: f64 = weights.iter().map(|&w| w as f64).sum();
    let capacity = h as f64 * total / CAPACITY_DIVISOR;
    let clamped = weights.iter().filter(|&&w| w as f64 > capacity).count();
    if clamped > 0 {
        log::info!("{clamped} items heavier than the capacity {capacity} get weight 1");
    }
    let hidden: Vec<f64> = weights.iter().map(|&w| (w as f64 / capacity).min(1.0)).collect();
    let n = weights.len();
    let inst = Instance {
        name: String::new(),
        family: String::new(),
        kind: ProblemKind::Knapsack,
        m: 1,
        n,
        values: vec![values],
        hidden_weights: Some(vec![hidden]),
        space: CombinatorialSpace::unconstrained(),
        weight_domains: vec![WeightDomain::unit_box()],
    };
    inst.validate()?;
    Ok(inst)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Course {
    /// Lecture, lab and preparation credits.
    pub credits: [u32; 3],
    /// Each set must contain at least one taken course.
    #[serde(default)]
    pub prerequisites: Vec<Vec<usize>>,
    #[serde(default)]
    pub corequisites: Vec<usize>,
    #[serde(default)]
    pub alternatives: Vec<usize>,
}

impl Course {
    pub fn value(&self) -> f64 {
        self.credits.iter().sum::<u32>() as f64
    }

    /// Fixed workload share from lecture and lab credits.
    pub fn fixed_load(&self) -> f64 {
        HOURS_PER_CREDIT * (self.credits[0] + self.credits[1]) as f64 / HOURS_BUDGET
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseCatalog {
    pub courses: Vec<Course>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalogDensity {
    /// Chance that a course gets any prerequisite sets.
    pub prerequisite: f64,
    pub max_prerequisite_sets: usize,
    pub max_set_size: usize,
    /// Chance per unordered pair of a corequisite link.
    pub corequisite: f64,
    /// Chance per unordered pair of an alternative link.
    pub alternative: f64,
}

impl Default for CatalogDensity {
    fn default() -> Self {
        Self { prerequisite: 0.3, max_prerequisite_sets: 2, max_set_size: 3, corequisite: 0.02, alternative: 0.03 }
    }
}

impl CatalogDensity {
    pub fn none() -> Self {
        Self { prerequisite: 0.0, corequisite: 0.0, alternative: 0.0, ..Self::default() }
    }
}

impl CourseCatalog {
    pub fn len(&self) -> usize {
        self.courses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.courses.is_empty()
    }

    fn related(&self, i: usize, j: usize) -> bool {
        let c = &self.courses[i];
        c.prerequisites.iter().flatten().any(|&k| k == j) || c.corequisites.contains(&j) || c.alternatives.contains(&j)
    }

    /// Check the consistency rules: disjoint relation sets, no mutual
    /// prerequisites, symmetric corequisites and symmetric alternatives.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        let n = self.courses.len();
        for (i, c) in self.courses.iter().enumerate() {
            let all = c.prerequisites.iter().flatten().chain(&c.corequisites).chain(&c.alternatives);
            for &j in all {
                if j >= n {
                    return Err(Error::IndexOutOfRange { index: j, limit: n });
                }
                if j == i {
                    return bad(format!("course {i} refers to itself"));
                }
            }
            if c.prerequisites.iter().any(Vec::is_empty) {
                return bad(format!("course {i} has an empty prerequisite set"));
            }
            let pre: BTreeSet<usize> = c.prerequisites.iter().flatten().copied().collect();
            let co: BTreeSet<usize> = c.corequisites.iter().copied().collect();
            let alt: BTreeSet<usize> = c.alternatives.iter().copied().collect();
            if let Some(j) = pre.intersection(&co).chain(pre.intersection(&alt)).chain(co.intersection(&alt)).next() {
                return bad(format!("rule (a): course {j} appears in two relation sets of course {i}"));
            }
            for &j in &pre {
                if self.courses[j].prerequisites.iter().flatten().any(|&k| k == i) {
                    return bad(format!("rule (b): courses {i} and {j} are prerequisites of each other"));
                }
            }
            for &j in &co {
                if !self.courses[j].corequisites.contains(&i) {
                    return bad(format!("rule (c): corequisite {i} -> {j} is not symmetric"));
                }
            }
            for &j in &alt {
                if !self.courses[j].alternatives.contains(&i) {
                    return bad(format!("rule (d): alternative {i} -> {j} is not symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Random catalog. Prerequisites only point to lower-indexed courses.
pub fn gen_catalog(n_courses: usize, seed: u64, density: CatalogDensity) -> Result<CourseCatalog> {
    if n_courses == 0 {
        return Err(Error::InvalidConfig("catalog needs at least one course".into()));
    }
    let mut rng = stream_rng(seed, "catalog");
    let mut catalog = CourseCatalog {
        courses: (0..n_courses)
            .map(|_| Course {
                credits: [rng.random_range(2..=5), rng.random_range(0..=2), rng.random_range(4..=10)],
                ..Course::default()
            })
            .collect(),
    };
    for i in 1..n_courses {
        if !rng.random_bool(density.prerequisite) {
            continue;
        }
        let sets = rng.random_range(1..=density.max_prerequisite_sets.max(1));
        for _ in 0..sets {
            let size = rng.random_range(1..=density.max_set_size.max(1).min(i));
            let mut set: Vec<usize> = rand::seq::index::sample(&mut rng, i, size).into_iter().collect();
            set.sort_unstable();
            if !catalog.courses[i].prerequisites.contains(&set) {
                catalog.courses[i].prerequisites.push(set);
            }
        }
    }
    for i in 0..n_courses {
        for j in i + 1..n_courses {
            let co = rng.random_bool(density.corequisite);
            let alt = rng.random_bool(density.alternative);
            if !(co || alt) || catalog.related(i, j) || catalog.related(j, i) {
                continue;
            }
            let (a, b) = (&mut catalog.courses[i], j);
            if co {
                a.corequisites.push(b);
                catalog.courses[j].corequisites.push(i);
            } else {
                a.alternatives.push(b);
                catalog.courses[j].alternatives.push(i);
            }
        }
    }
    catalog.validate()?;
    Ok(catalog)
}

/// Rejection sample of a normal restricted to `[lo, hi]`.
fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    let normal = Normal::new(mean, sd).expect("positive standard deviation");
    for _ in 0..10_000 {
        let v = normal.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

/// Course selection instance with random preparation hours.
pub fn gen_cspp(catalog: &CourseCatalog, seed: u64) -> Result<Instance> {
    catalog.validate()?;
    let mut rng = stream_rng(seed, "cspp");
    let prep: Vec<f64> = catalog
        .courses
        .iter()
        .map(|c| {
            let sd = rng.random_range(1.0..=28.0);
            truncated_normal(HOURS_PER_CREDIT * c.credits[2] as f64, sd, 0.0, HOURS_BUDGET, &mut rng) / HOURS_BUDGET
        })
        .collect();
    let mut inst = cspp_from_draws(catalog, &prep)?;
    inst.name = format!("cspp-n{}-s{seed}", catalog.len());
    Ok(inst)
}

/// Course selection instance for given preparation shares (hours over the budget).
pub fn cspp_from_draws(catalog: &CourseCatalog, prep: &[f64]) -> Result<Instance> {
    catalog.validate()?;
    let n = catalog.len();
    if prep.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: prep.len() });
    }
    let hidden: Vec<f64> = catalog.courses.iter().zip(prep).map(|(c, &xi)| (c.fixed_load() + xi).min(1.0)).collect();
    let values: Vec<f64> = catalog.courses.iter().map(Course::value).collect();

    let mut rows = Vec::new();
    let mut tags = SpaceTags::default();
    let unit = |entries: &[(usize, f64)]| {
        let mut coeffs = vec![0.0; n];
        for &(k, c) in entries {
            coeffs[k] += c;
        }
        coeffs
    };
    for (i, c) in catalog.courses.iter().enumerate() {
        for set in &c.prerequisites {
            let mut entries = vec![(i, 1.0)];
            entries.extend(set.iter().map(|&j| (j, -1.0)));
            tags.prerequisite_rows.push(rows.len());
            rows.push(SpaceRow { coeffs: unit(&entries), sense: Sense::Le, rhs: 0.0 });
        }
    }
    for (i, c) in catalog.courses.iter().enumerate() {
        for &j in c.corequisites.iter().filter(|&&j| j > i) {
            tags.corequisite_rows.push(rows.len());
            rows.push(SpaceRow { coeffs: unit(&[(i, 1.0), (j, -1.0)]), sense: Sense::Eq, rhs: 0.0 });
        }
    }
    for (i, c) in catalog.courses.iter().enumerate() {
        for &j in c.alternatives.iter().filter(|&&j| j > i) {
            tags.alternative_rows.push(rows.len());
            rows.push(SpaceRow { coeffs: unit(&[(i, 1.0), (j, 1.0)]), sense: Sense::Le, rhs: 1.0 });
        }
    }
    let inst = Instance {
        name: String::new(),
        family: "cspp".into(),
        kind: ProblemKind::Cspp,
        m: 1,
        n,
        values: vec![values],
        hidden_weights: Some(vec![hidden]),
        space: CombinatorialSpace { rows, tags, possibly_empty: false },
        weight_domains: vec![WeightDomain::unit_box()],
    };
    inst.validate()?;
    Ok(inst)
}

/// Raw data of one assignment problem: `values[i][j]` and `weights[i][j]`
/// for agent `i` and job `j`, and one capacity per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct GapData {
    pub values: Vec<Vec<i64>>,
    pub weights: Vec<Vec<i64>>,
    pub capacities: Vec<i64>,
}

impl GapData {
    pub fn to_instance(&self, name: String) -> Result<Instance> {
        let m = self.capacities.len();
        let n = self.values.first().map_or(0, Vec::len);
        let hidden = self
            .weights
            .iter()
            .zip(&self.capacities)
            .map(|(row, &cap)| row.iter().map(|&w| (w as f64 / cap as f64).clamp(0.0, 1.0)).collect())
            .collect();
        let rows = (0..n)
            .map(|j| {
                let mut coeffs = vec![0.0; m * n];
                for i in 0..m {
                    coeffs[i * n + j] = 1.0;
                }
                SpaceRow { coeffs, sense: Sense::Le, rhs: 1.0 }
            })
            .collect();
        let inst = Instance {
            name,
            family: String::new(),
            kind: ProblemKind::Gap,
            m,
            n,
            values: self.values.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect(),
            hidden_weights: Some(hidden),
            space: CombinatorialSpace {
                rows,
                tags: SpaceTags { assignment_columns: true, ..SpaceTags::default() },
                possibly_empty: false,
            },
            weight_domains: vec![WeightDomain::unit_box(); m],
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Text in the OR-Library layout for a list of problems.
    pub fn write_file(problems: &[GapData]) -> String {
        let mut out = format!("{}\n", problems.len());
        for p in problems {
            let m = p.capacities.len();
            let n = p.values.first().map_or(0, Vec::len);
            out += &format!("{m} {n}\n");
            for block in [&p.values, &p.weights] {
                for row in block {
                    out += &row.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
                    out.push('\n');
                }
            }
            out += &p.capacities.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
            out.push('\n');
        }
        out
    }
}

struct Tokens<'a> {
    items: Vec<&'a str>,
    pos: usize,
}

impl Tokens<'_> {
    fn need(&self, count: usize) -> Result<(), ParseError> {
        if self.pos + count > self.items.len() {
            return Err(ParseError::Truncated { expected: self.pos + count, found: self.items.len() });
        }
        Ok(())
    }

    fn next(&mut self) -> Result<i64, ParseError> {
        self.need(1)?;
        let token = self.items[self.pos];
        let v = token.parse().map_err(|_| ParseError::InvalidToken { offset: self.pos, token: token.to_string() })?;
        self.pos += 1;
        Ok(v)
    }

    fn matrix(&mut self, m: usize, n: usize) -> Result<Vec<Vec<i64>>, ParseError> {
        self.need(m * n)?;
        (0..m).map(|_| (0..n).map(|_| self.next()).collect()).collect()
    }
}

/// Raw problems from an OR-Library assignment file: a problem count, then per
/// problem `m n`, `m x n` values, `m x n` weights and `m` capacities.
pub fn parse_gap_data(text: &str) -> Result<Vec<GapData>, ParseError> {
    let mut tok = Tokens { items: text.split_whitespace().collect(), pos: 0 };
    let count = tok.next()?;
    if count <= 0 {
        return Err(ParseError::BadHeader { problem: 0, what: "problem count" });
    }
    let mut out = Vec::new();
    for p in 0..count as usize {
        let m = tok.next()?;
        let n = tok.next()?;
        if m <= 0 {
            return Err(ParseError::BadHeader { problem: p, what: "agent count" });
        }
        if n <= 0 {
            return Err(ParseError::BadHeader { problem: p, what: "job count" });
        }
        let (m, n) = (m as usize, n as usize);
        tok.need(2 * m * n + m)?;
        let values = tok.matrix(m, n)?;
        let weights = tok.matrix(m, n)?;
        let capacities: Vec<i64> = (0..m).map(|_| tok.next()).collect::<Result<_, _>>()?;
        if let Some((agent, &capacity)) = capacities.iter().enumerate().find(|(_, &c)| c <= 0) {
            return Err(ParseError::NonPositiveCapacity { problem: p, agent, capacity });
        }
        out.push(GapData { values, weights, capacities });
    }
    if tok.pos != tok.items.len() {
        return Err(ParseError::TrailingTokens { offset: tok.pos, found: tok.items.len() - tok.pos });
    }
    Ok(out)
}

/// Parse an assignment file into instances named `<stem>-<k>` (1-based).
pub fn parse_gap_named(text: &str, stem: &str) -> Result<Vec<Instance>> {
    parse_gap_data(text)?
        .iter()
        .enumerate()
        .map(|(k, d)| d.to_instance(format!("{stem}-{}", k + 1)))
        .collect()
}

pub fn parse_gap(text: &str) -> Result<Vec<Instance>> {
    parse_gap_named(text, "gap")
}

/// Random assignment data in the OR-Library value and weight ranges. These are
/// synthetic stand-ins, not the published benchmark files.
pub fn gen_gap_synthetic(m: usize, n: usize, seed: u64) -> Result<GapData> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidConfig("assignment problems need agents and jobs".into()));
    }
    let mut rng = stream_rng(seed, "gap");
    let values = (0..m).map(|_| (0..n).map(|_| rng.random_range(15..=50)).collect()).collect();
    let weights: Vec<Vec<i64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(5..=25)).collect()).collect();
    let capacities = weights.iter().map(|row| (0.8 * row.iter().sum::<i64>() as f64 / m as f64) as i64).map(|c| c.max(1)).collect();
    Ok(GapData { values, weights, capacities })
}

/// Hard family for learning hidden knapsacks with membership queries.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialFamily {
    /// Items that fit with the uniform weight.
    pub capacity_items: usize,
    pub base: Instance,
}

/// Base instance with unit values and weight `1/C` where `C = ceil(1/eps) - 1`.
pub fn gen_adversarial(n: usize, eps: f64) -> Result<AdversarialFamily> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidConfig(format!("eps={eps} must lie strictly between 0 and 1")));
    }
    let c = (1.0 / eps).ceil() as usize - 1;
    if c == 0 || n <= c + 1 {
        return Err(Error::InvalidConfig(format!("need n > C + 1 with C = {c}, got n = {n}")));
    }
    let base = Instance {
        name: format!("adversarial-n{n}-c{c}"),
        family: "adversarial".into(),
        kind: ProblemKind::Adversarial,
        m: 1,
        n,
        values: vec![vec![1.0; n]],
        hidden_weights: Some(vec![vec![1.0 / c as f64; n]]),
        space: CombinatorialSpace::unconstrained(),
        weight_domains: vec![WeightDomain::unit_box()],
    };
    Ok(AdversarialFamily { capacity_items: c, base })
}

impl AdversarialFamily {
    /// Member where the items in `subset` are slightly lighter, so that
    /// exactly that subset of `C + 1` items fits.
    pub fn member(&self, subset: &[usize]) -> Result<Instance> {
        let c = self.capacity_items;
        let set: BTreeSet<usize> = subset.iter().copied().collect();
        if set.len() != c + 1 || subset.len() != c + 1 {
            return Err(Error::InvalidConfig(format!("subset must have {} distinct items", c + 1)));
        }
        if let Some(&j) = set.iter().find(|&&j| j >= self.base.n) {
            return Err(Error::IndexOutOfRange { index: j, limit: self.base.n });
        }
        let mut inst = self.base.clone();
        let w: Vec<f64> = (0..inst.n).map(|j| if set.contains(&j) { 1.0 / (c + 1) as f64 } else { 1.0 / c as f64 }).collect();
        inst.hidden_weights = Some(vec![w]);
        inst.name = format!("{}-{}", self.base.name, set.iter().map(usize::to_string).collect::<Vec<_>>().join("_"));
        Ok(inst)
    }
}
