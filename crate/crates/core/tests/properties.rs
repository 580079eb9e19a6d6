use iseo::discrete::{compute_upper_bound, solve_with_weights};
use iseo::problems::{gen_adversarial, gen_catalog, gen_cspp, gen_gap_synthetic, gen_knapsack, parse_gap_data, CatalogDensity, GapData, KnapsackKind};
use iseo::sampling::{self, SampleOutcome, SampleRequest, SearchBackend};
use iseo::separation::{dual_norm, potential, valid_inequalities, ScaledInequality};
use iseo::solvers::{frank_wolfe, DiagonalPotential, FwOptions, FwVariant};
use iseo::{run, Instance, Label, LabeledPools, OracleSuite, RunConfig, Sampler, Separator, Solution, SubSolution, WeightDomain};
use proptest::prelude::*;

fn sub(mask: u64, n: usize) -> SubSolution {
    SubSolution::new(mask & ((1u64 << n) - 1), n).unwrap()
}

fn kind() -> impl Strategy<Value = KnapsackKind> {
    prop_oneof![Just(KnapsackKind::U), Just(KnapsackKind::W), Just(KnapsackKind::S)]
}

fn label(w: &[f64], mu: &SubSolution) -> Label {
    if mu.dot(w) <= 1.0 + 1e-12 {
        Label::Feasible
    } else {
        Label::Infeasible
    }
}

/// Single-block pools labeled by the hidden weights from a random mask list.
fn labeled_pools(inst: &Instance, masks: &[u64]) -> LabeledPools {
    let n = inst.n;
    let w = &inst.hidden_weights.as_ref().unwrap()[0];
    let mut pools = LabeledPools::new(1, n);
    pools.insert_sub(0, SubSolution::zeros(n), Label::Feasible, 0).unwrap();
    for (t, &mask) in masks.iter().enumerate() {
        let mu = sub(mask, n);
        if pools.label_of(0, &mu).is_none() {
            pools.insert_sub(0, mu, label(w, &mu), t + 1).unwrap();
        }
    }
    pools
}

fn brute_optimum(inst: &Instance) -> f64 {
    let n = inst.n;
    let w = &inst.hidden_weights.as_ref().unwrap()[0];
    (0..1u64 << n)
        .map(|mask| sub(mask, n))
        .filter(|mu| label(w, mu) == Label::Feasible)
        .map(|mu| mu.dot(&inst.values[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generated_weights_lie_in_unit_interval(k in kind(), n in 1usize..40, h in 1u32..=30, seed in any::<u64>()) {
        let inst = gen_knapsack(k, n, h, seed).unwrap();
        let w = &inst.hidden_weights.as_ref().unwrap()[0];
        prop_assert_eq!(w.len(), n);
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(inst.values[0].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn course_instances_are_valid(courses in 4usize..30, seed in any::<u64>()) {
        let catalog = gen_catalog(courses, seed, CatalogDensity::default()).unwrap();
        prop_assert!(catalog.validate().is_ok());
        let inst = gen_cspp(&catalog, seed).unwrap();
        prop_assert!(inst.validate().is_ok());
        let w = inst.hidden_weights.as_ref().unwrap();
        prop_assert!(w.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(inst.space.contains(&Solution::zeros(inst.m, inst.n)));
    }

    #[test]
    fn oracle_is_pure_and_repeats_are_free(
        w in prop::collection::vec(0.0f64..1.0, 6),
        masks in prop::collection::vec(0u64..64, 1..30),
    ) {
        let mut suite = OracleSuite::simulated(&[w.clone()], None);
        let mut distinct = std::collections::HashSet::new();
        for &mask in &masks {
            let mu = sub(mask, 6);
            let first = suite.query(0, &mu).unwrap();
            prop_assert_eq!(first, label(&w, &mu));
            prop_assert_eq!(suite.query(0, &mu).unwrap(), first);
            distinct.insert(mask);
        }
        prop_assert_eq!(suite.calls(0), distinct.len());
    }

    #[test]
    fn dominated_points_are_inferred_without_calls(
        w in prop::collection::vec(0.0f64..0.2, 6),
        big in 0u64..64,
        small in 0u64..64,
    ) {
        let (big, small) = (sub(big, 6), sub(small & big, 6));
        let mut pools = LabeledPools::new(1, 6);
        pools.insert_sub(0, big, label(&w, &big), 0).unwrap();
        let mut suite = OracleSuite::simulated(&[w.clone()], Some(1));
        let (l, inferred) = suite.infer_or_query(0, &small, &pools).unwrap();
        prop_assert!(inferred);
        prop_assert_eq!(l, Label::Feasible);
        prop_assert_eq!(suite.calls(0), 0);
    }

    #[test]
    fn upper_bound_never_undercuts_the_optimum(
        k in kind(),
        n in 2usize..=9,
        h in 1u32..=30,
        seed in 0u64..10_000,
        masks in prop::collection::vec(any::<u64>(), 0..25),
    ) {
        let inst = gen_knapsack(k, n, h, seed).unwrap();
        let pools = labeled_pools(&inst, &masks);
        let z = brute_optimum(&inst);
        for backend in [SearchBackend::Enumerate, SearchBackend::BranchAndBound { node_limit: None }] {
            let ub = compute_upper_bound(&inst, &pools, backend, None).unwrap();
            prop_assert!(ub.value >= z - 1e-6, "ub {} below optimum {}", ub.value, z);
        }
    }

    #[test]
    fn samples_are_fresh_and_optimal(
        n in 2usize..=9,
        seed in 0u64..10_000,
        masks in prop::collection::vec(any::<u64>(), 0..25),
        w in prop::collection::vec(0.0f64..1.0, 9),
        cut in any::<bool>(),
    ) {
        let inst = gen_knapsack(KnapsackKind::U, n, 10, seed).unwrap();
        let pools = labeled_pools(&inst, &masks);
        let pos: Vec<SubSolution> = pools.positives(0).copied().collect();
        let neg: Vec<SubSolution> = pools.negatives(0).copied().collect();
        let strategy = if cut { Sampler::Cut } else { Sampler::Sim };
        let req = SampleRequest { n, rows: &[], positives: &pos, negatives: &neg, w: &w[..n] };
        let best = (0..1u64 << n)
            .map(|mask| sub(mask, n))
            .filter(|mu| req.admissible(mu))
            .map(|mu| sampling::objective(strategy, &w[..n], &mu))
            .fold(f64::INFINITY, f64::min);
        match sampling::sample(strategy, &req, SearchBackend::Enumerate) {
            SampleOutcome::Found(s) => {
                prop_assert!(req.is_fresh(&s.mu));
                prop_assert!((s.objective - best).abs() <= 1e-9);
            }
            SampleOutcome::Exhausted => prop_assert!(best.is_infinite()),
            SampleOutcome::NodeLimit => prop_assert!(false, "no node limit was set"),
        }
    }

    #[test]
    fn scaled_inequalities_have_unit_dual_norm(
        a in prop::collection::vec(-3.0f64..3.0, 1..12),
        b in -3.0f64..3.0,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-6) || b.abs() > 1e-6);
        let s = ScaledInequality::normalized(a.clone(), b).unwrap();
        let radius = (a.len() as f64).sqrt();
        prop_assert!((dual_norm(&s.a, s.b, radius) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn label_rows_are_normalized(n in 1usize..10, masks in prop::collection::vec(any::<u64>(), 1..20)) {
        let pts: Vec<SubSolution> = masks.iter().map(|&m| sub(m, n)).collect();
        let (pos, neg) = pts.split_at(pts.len() / 2);
        let rows = valid_inequalities(&WeightDomain::unit_box(), pos, neg);
        let radius = (n as f64).sqrt();
        for r in &rows {
            prop_assert!((dual_norm(&r.a, r.b, radius) - 1.0).abs() < 1e-12);
        }
        // The zero point contributes (0, 1) scaled to b = sqrt(2).
        if pos.iter().any(|p| p.is_zero()) {
            prop_assert!(rows.iter().any(|r| r.a.iter().all(|&v| v == 0.0) && (r.b - 2f64.sqrt()).abs() < 1e-12));
        }
    }

    #[test]
    fn frank_wolfe_is_below_every_vertex(
        pts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 1..15),
        scale in prop::collection::vec(0.1f64..5.0, 4),
        away in any::<bool>(),
    ) {
        let phi = DiagonalPotential { scale };
        let variant = if away { FwVariant::AwayStep } else { FwVariant::FullyCorrective };
        let out = frank_wolfe(&pts, &phi, FwOptions { variant, ..FwOptions::default() }).unwrap();
        for p in &pts {
            prop_assert!(out.value <= phi.value(p) + 1e-12);
        }
        let sum: f64 = out.coefficients.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(out.coefficients.iter().all(|&c| c >= -1e-12));
        for d in 0..4 {
            let combo: f64 = out.coefficients.iter().zip(&pts).map(|(c, p)| c * p[d]).sum();
            prop_assert!((combo - out.point[d]).abs() < 1e-9);
        }
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn potential_scales_weights_only(n in 1usize..20) {
        let phi = potential(n);
        prop_assert_eq!(phi.scale.len(), n + 1);
        prop_assert!(phi.scale[..n].iter().all(|&s| s == n as f64));
        prop_assert_eq!(phi.scale[n], 1.0);
    }

    #[test]
    fn assignment_files_round_trip(
        shapes in prop::collection::vec((1usize..6, 1usize..12, any::<u64>()), 1..5),
    ) {
        let data: Vec<GapData> = shapes.iter().map(|&(m, n, s)| gen_gap_synthetic(m, n, s).unwrap()).collect();
        let back = parse_gap_data(&GapData::write_file(&data)).unwrap();
        prop_assert_eq!(back, data);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn adversarial_members_differ_only_in_one_subset(
        n in 3usize..=10,
        eps in prop_oneof![Just(0.5f64), Just(0.34), Just(0.25)],
        pick in any::<u64>(),
    ) {
        let c = ((1.0 / eps).ceil() - 1.0) as usize;
        prop_assume!(n > c + 1);
        let family = gen_adversarial(n, eps).unwrap();
        prop_assert_eq!(family.capacity_items, c);
        let mut subset: Vec<usize> = (0..n).collect();
        let offset = (pick % n as u64) as usize;
        subset.rotate_left(offset);
        subset.truncate(c + 1);
        subset.sort_unstable();
        let member = family.member(&subset).unwrap();
        let chosen = subset.iter().fold(0u64, |acc, &j| acc | 1 << j);
        for mask in 0..1u64 << n {
            let x = Solution::from_blocks(vec![sub(mask, n)]).unwrap();
            let size = mask.count_ones() as usize;
            prop_assert_eq!(family.base.truly_feasible(&x), Some(size <= c));
            prop_assert_eq!(member.truly_feasible(&x), Some(size <= c || mask == chosen));
        }
    }

    #[test]
    fn runs_keep_their_invariants(
        k in kind(),
        n in 3usize..=9,
        seed in 0u64..10_000,
        budget in 4usize..40,
        pair in 0usize..4,
    ) {
        let inst = gen_knapsack(k, n, 10, seed).unwrap();
        let (separator, sampler) = [
            (Separator::Svm, Sampler::Sim),
            (Separator::Svm, Sampler::Cut),
            (Separator::Sep, Sampler::Sim),
            (Separator::Sep, Sampler::Cut),
        ][pair];
        let cfg = RunConfig { separator, sampler, budget: Some(budget), threshold: 0.0, record_timing: false, ..RunConfig::default() };
        let mut oracles = OracleSuite::from_instance(&inst, Some(budget)).unwrap();
        let rec = run(&inst, &mut oracles, &cfg).unwrap();
        prop_assert!(rec.calls_max_oracle() <= budget);
        for w in rec.trace.windows(2) {
            prop_assert!(w[1].lb >= w[0].lb && w[1].ub <= w[0].ub);
            prop_assert!(w[1].calls_total >= w[0].calls_total);
        }
        let z = solve_with_weights(&inst, inst.hidden_weights.as_ref().unwrap(), SearchBackend::Enumerate).unwrap().unwrap().1;
        prop_assert!(rec.lb <= z + 1e-9 && rec.ub >= z - 1e-6);
        prop_assert_eq!(inst.truly_feasible(&rec.x_hat), Some(true));
        let w = &inst.hidden_weights.as_ref().unwrap()[0];
        prop_assert!(rec.pools.positives(0).all(|p| label(w, p) == Label::Feasible));
        prop_assert!(rec.pools.negatives(0).all(|q| label(w, q) == Label::Infeasible));
        for p in rec.pools.positives(0) {
            prop_assert!(rec.pools.negatives(0).all(|q| !p.ge(q)));
        }
    }
}
