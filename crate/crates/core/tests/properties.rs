use proptest::prelude::*;

use robust_recourse::data::{encode_scale, kfold_split, FeasibilitySpec, RawValue};
use robust_recourse::eval::{
    apply_feasibility_postprocess, certify, pareto_front, validity, FrontierPoint, SolverSettings, ValidityKind,
    ValidityOptions,
};
use robust_recourse::synthetic::{generate, SyntheticConfig};
use robust_recourse::{Algorithm, FeatureVector, LinearModel, Neighborhood, NormOrder, RecourseProblem};

fn problem_strategy() -> impl Strategy<Value = RecourseProblem> {
    (1usize..=4)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(-2.0f64..2.0, d),
                -2.0f64..2.0,
                prop::collection::vec(-2.0f64..2.0, d),
                0.0f64..1.0,
                0.005f64..0.5,
                any::<bool>(),
            )
        })
        .prop_map(|(w, b, x0, alpha, lambda, intercept)| {
            RecourseProblem::new(
                FeatureVector::new(x0).unwrap(),
                LinearModel::new(w, b).unwrap(),
                Neighborhood::new(NormOrder::L1, alpha)
                    .unwrap()
                    .with_intercept_perturbation(intercept),
                lambda,
            )
            .unwrap()
        })
}

fn under(problem: &RecourseProblem, p: NormOrder) -> RecourseProblem {
    let mut nb = problem.neighborhood;
    nb.p = p;
    problem.clone().with_neighborhood(nb)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn reported_price_is_certified(problem in problem_strategy()) {
        for alg in Algorithm::ALL {
            let sol = alg.solve(&problem, &SolverSettings::default()).unwrap();
            let again = certify(&under(&problem, alg.norm()), &sol.recourse).unwrap();
            prop_assert!((sol.price - again).abs() <= 1e-9, "{alg}: {} vs {again}", sol.price);
        }
    }

    #[test]
    fn exact_solvers_never_lose_to_origin_or_roar(problem in problem_strategy()) {
        let settings = SolverSettings::default();
        for (exact, roar) in [(Algorithm::Alg1, Algorithm::RoarL1), (Algorithm::Alg2, Algorithm::RoarLinf)] {
            let a = exact.solve(&problem, &settings).unwrap().price;
            let b = roar.solve(&problem, &settings).unwrap().price;
            let at_origin = certify(&under(&problem, exact.norm()), &problem.origin).unwrap();
            prop_assert!(a <= at_origin + 1e-9);
            prop_assert!(a <= b + 1e-6, "{exact} {a} vs {roar} {b}");
        }
    }

    #[test]
    fn instance_validity_below_current(
        base in problem_strategy(),
        noise in prop::collection::vec(-3.0f64..3.0, 1..40),
    ) {
        // the population shares one model, neighborhood, and lambda
        let d = base.dim();
        let n = noise.len().div_ceil(d).max(1);
        let at = |k: usize| noise[k % noise.len()];
        let problems: Vec<RecourseProblem> = (0..n)
            .map(|i| {
                let origin = FeatureVector::new((0..d).map(|j| at(i * d + j)).collect()).unwrap();
                RecourseProblem::new(origin, base.model.clone(), base.neighborhood, base.lambda).unwrap()
            })
            .collect();
        let recourses: Vec<FeatureVector> = problems
            .iter()
            .enumerate()
            .map(|(i, p)| FeatureVector::new(p.origin.features().iter().map(|v| v + at(i + 7)).collect()).unwrap())
            .collect();
        let opts = ValidityOptions::default();
        let inst = validity(ValidityKind::InstanceWise, &problems, &recourses, &opts).unwrap();
        let pop = validity(ValidityKind::PopulationWise, &problems, &recourses, &opts).unwrap();
        let cur = validity(ValidityKind::Current, &problems, &recourses, &opts).unwrap();
        for v in [inst, pop, cur] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(inst <= cur);
        prop_assert!(inst <= pop);
    }

    #[test]
    fn pareto_front_is_dominance_free(
        raw in prop::collection::vec((0u8..4, 0.0f64..5.0, 0u8..=10), 1..30),
    ) {
        let points: Vec<FrontierPoint> = raw
            .iter()
            .enumerate()
            .map(|(i, &(a, cost, v))| FrontierPoint {
                algorithm: format!("a{a}"),
                lambda: i as f64,
                mean_cost: (cost * 4.0).round() / 4.0,
                validity: f64::from(v) / 10.0,
            })
            .collect();
        let front = pareto_front(&points);
        prop_assert!(!front.is_empty());
        prop_assert_eq!(&front, &pareto_front(&points));
        for a in &front {
            for b in &front {
                let dominated = b.mean_cost <= a.mean_cost
                    && b.validity >= a.validity
                    && (b.mean_cost < a.mean_cost || b.validity > a.validity);
                prop_assert!(!dominated);
            }
        }
        prop_assert!(front.windows(2).all(|w| w[0].mean_cost <= w[1].mean_cost));
        for p in &points {
            prop_assert!(front.iter().any(|f| f.mean_cost <= p.mean_cost && f.validity >= p.validity));
        }
    }

    #[test]
    fn feasibility_is_idempotent(
        x in prop::collection::vec(-2.0f64..2.0, 7),
        origin in prop::collection::vec(0.0f64..1.0, 7),
        bound in 0.0f64..0.5,
    ) {
        let spec = FeasibilitySpec {
            groups: vec![2..5, 5..7],
            immutable: vec![0],
            max_increase: vec![(1, bound)],
        };
        let x = FeatureVector::new(x).unwrap();
        let origin = FeatureVector::new(origin).unwrap();
        let once = apply_feasibility_postprocess(&x, &origin, &spec).unwrap();
        let twice = apply_feasibility_postprocess(&once, &origin, &spec).unwrap();
        prop_assert_eq!(&once, &twice);
        let f = once.features();
        prop_assert_eq!(f[0], origin.features()[0]);
        prop_assert!(f[1] <= origin.features()[1] + bound);
        for g in &spec.groups {
            prop_assert_eq!(f[g.clone()].iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn folds_partition_rows(n in 1usize..200, k in 1usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(folds, kfold_split(n, k, seed).unwrap());
    }
}

#[test]
fn encoding_round_trips_categories() {
    let data = generate(&SyntheticConfig {
        rows: 120,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let rows: Vec<usize> = (0..data.table.len()).collect();
    let enc = encode_scale(&data.table, &data.schema, &rows).unwrap();
    for (raw, x) in data.table.rows.iter().zip(&enc.x) {
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = enc.encoder.decode_row(x).unwrap();
        for (a, b) in raw.iter().zip(&back) {
            match (a, b) {
                (RawValue::Category(i), RawValue::Category(j)) => assert_eq!(i, j),
                (RawValue::Numeric(u), RawValue::Numeric(v)) => assert!((u - v).abs() < 1e-9),
                _ => panic!("kind changed"),
            }
        }
    }
}
