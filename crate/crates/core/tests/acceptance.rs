//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one `PASS`/`FAIL` line with the measured quantity; the
//! process exits non-zero if any criterion fails.

use std::panic::catch_unwind;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_recourse::adversary::{worst_case_glm, worst_case_nn_pga, AscentConfig, DifferentiableScore};
use robust_recourse::data::{encode_scale, FeasibilitySpec};
use robust_recourse::eval::{
    apply_feasibility_postprocess, percent_increase, sparsity_report, validity, SolverSettings, SparsityMode,
    ValidityKind, ValidityOptions,
};
use robust_recourse::experiment::{run_synthetic_experiment, ExperimentConfig};
use robust_recourse::geometry::{
    project_dominance_cone, project_dominance_cone_exact, project_l1_ball, project_lp_ball, DominanceCone,
    DEFAULT_CONE_MAX_ITER, DEFAULT_CONE_TOL,
};
use robust_recourse::model::{sigmoid, LossKind};
use robust_recourse::oracle::{grid_minmax_oracle, nonconvexity_demo, projection_oracle_activeset, GridSpec};
use robust_recourse::surrogate::{fit_local_linear, SurrogateConfig, SurrogateTarget};
use robust_recourse::synthetic::{generate, linear_benchmark, BenchmarkConfig, SyntheticConfig};
use robust_recourse::train::{mlp_param_gradient, MlpModel};
use robust_recourse::{
    Algorithm, FeatureVector, LinearModel, Neighborhood, NormOrder, RecourseProblem, RecourseSolution,
};

static FAILURES: AtomicUsize = AtomicUsize::new(0);

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    println!(
        "criterion {id:>2} {title}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    if !pass {
        FAILURES.fetch_add(1, Ordering::SeqCst);
    }
}

fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + stream)
}

fn solve_all(alg: Algorithm, problems: &[RecourseProblem]) -> Vec<RecourseSolution> {
    let settings = SolverSettings::default();
    problems.iter().map(|p| alg.solve(p, &settings).unwrap()).collect()
}

fn benchmark(p: NormOrder, alpha: f64, lambda: f64) -> Vec<RecourseProblem> {
    linear_benchmark(&BenchmarkConfig {
        instances: 200,
        dim: 10,
        p,
        alpha,
        lambda,
        seed: 0,
    })
    .unwrap()
}

/// Two-feature problems with weights and intercept in `[−2, 2]` and a
/// negatively scored origin in `[−2, 2]²`, cycling through the `α`/`λ` grid.
fn oracle_problem(r: &mut ChaCha8Rng, index: usize, p: NormOrder) -> RecourseProblem {
    let alpha = [0.1, 0.5][index % 2];
    let lambda = [0.01, 0.1][(index / 2) % 2];
    loop {
        let model = LinearModel::new(
            vec![r.random_range(-2.0..=2.0), r.random_range(-2.0..=2.0)],
            r.random_range(-2.0..=2.0),
        )
        .unwrap();
        let origin = FeatureVector::new(vec![r.random_range(-2.0..=2.0), r.random_range(-2.0..=2.0)]).unwrap();
        if model.score(&origin) < 0.0 {
            return RecourseProblem::new(origin, model, Neighborhood::new(p, alpha).unwrap(), lambda).unwrap();
        }
    }
}

fn oracle_equivalence(id: u32, alg: Algorithm) {
    const CASES: usize = 50;
    const TOL: f64 = 5e-3;
    let grid = GridSpec::new(-6.0, 6.0, 1e-3).unwrap();
    let mut r = rng(u64::from(id));
    let start = Instant::now();
    let (mut within, mut drawn, mut worst) = (0, 0, 0.0f64);
    let mut used = 0;
    // a grid minimizer on the box boundary means the box cuts off the true
    // optimum, so the comparison says nothing; such draws are replaced
    while used < CASES {
        let problem = oracle_problem(&mut r, used, alg.norm());
        drawn += 1;
        let oracle = grid_minmax_oracle(&problem, grid).unwrap();
        if oracle.recourse.features().iter().any(|v| v.abs() >= 6.0 - 1e-9) {
            continue;
        }
        let sol = alg.solve(&problem, &SolverSettings::default()).unwrap();
        let gap = (sol.price - oracle.price).abs();
        worst = worst.max(gap);
        if gap <= TOL {
            within += 1;
        }
        used += 1;
    }
    let elapsed = start.elapsed();
    let share = within as f64 / CASES as f64;
    verdict(
        id,
        &format!("{alg} matches grid oracle"),
        share >= 0.95 && elapsed <= Duration::from_secs(300),
        format!(
            "{within}/{CASES} within {TOL}, max gap {worst:.2e}, {} draws, {:.1}s",
            drawn,
            elapsed.as_secs_f64()
        ),
    );
}

fn c01_algorithm1_matches_grid_oracle() {
    oracle_equivalence(1, Algorithm::Alg1);
}

fn c02_algorithm2_matches_grid_oracle() {
    oracle_equivalence(2, Algorithm::Alg2);
}

fn c03_exact_solvers_beat_roar() {
    let mut details = Vec::new();
    let mut pass = true;
    for (exact, roar, p) in [
        (Algorithm::Alg1, Algorithm::RoarL1, NormOrder::L1),
        (Algorithm::Alg2, Algorithm::RoarLinf, NormOrder::Infinity),
    ] {
        let problems = benchmark(p, 0.5, 0.1);
        let a = solve_all(exact, &problems);
        let b = solve_all(roar, &problems);
        let bad = a.iter().zip(&b).filter(|(a, b)| a.price > b.price + 1e-3).count();
        let slack = a
            .iter()
            .zip(&b)
            .map(|(a, b)| b.price - a.price)
            .fold(f64::INFINITY, f64::min);
        details.push(format!("{exact} vs {roar}: {bad} violations, min margin {slack:.2e}"));
        pass &= bad == 0;
    }
    verdict(3, "optimality against ROAR", pass, details.join("; "));
}

fn c04_l1_price_below_linf_price() {
    let problems = benchmark(NormOrder::L1, 0.5, 0.1);
    let a = solve_all(Algorithm::Alg1, &problems);
    let b = solve_all(Algorithm::Alg2, &problems);
    let bad = a.iter().zip(&b).filter(|(a, b)| a.price > b.price + 1e-3).count();
    let strict = a.iter().zip(&b).filter(|(a, b)| a.price < b.price).count();
    verdict(
        4,
        "norm dominance",
        bad == 0,
        format!(
            "{bad} violations over {} instances, {strict} strictly lower",
            problems.len()
        ),
    );
}

fn c05_price_monotone_in_alpha_and_lambda() {
    let mut bad = 0;
    let mut checked = 0;
    for alg in [Algorithm::Alg1, Algorithm::Alg2] {
        let p = alg.norm();
        for (lo, hi) in [
            (benchmark(p, 0.1, 0.1), benchmark(p, 0.5, 0.1)),
            (benchmark(p, 0.5, 0.01), benchmark(p, 0.5, 0.1)),
        ] {
            let a = solve_all(alg, &lo);
            let b = solve_all(alg, &hi);
            bad += a.iter().zip(&b).filter(|(a, b)| a.price > b.price + 1e-3).count();
            checked += a.len();
        }
    }
    verdict(
        5,
        "monotone price",
        bad == 0,
        format!("{bad} violations over {checked} pairs"),
    );
}

fn dual_norm(x: &[f64], p: NormOrder) -> f64 {
    match p {
        NormOrder::Infinity => x.iter().map(|v| v.abs()).sum(),
        NormOrder::Finite(1.0) => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormOrder::Finite(p) => {
            let q = p / (p - 1.0);
            x.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }
}

fn norm(x: &[f64], p: NormOrder) -> f64 {
    match p {
        NormOrder::Infinity => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormOrder::Finite(p) => x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

fn c06_adversary_closed_form() {
    let orders = [
        NormOrder::L1,
        NormOrder::Finite(1.5),
        NormOrder::L2,
        NormOrder::Finite(3.0),
        NormOrder::Infinity,
    ];
    let mut r = rng(6);
    let mut score_err = 0.0f64;
    let mut outside = 0;
    for case in 0..1000 {
        let p = orders[case % orders.len()];
        let d = r.random_range(1..=6);
        let w: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..=3.0)).collect();
        let model = LinearModel::new(w, r.random_range(-3.0..=3.0)).unwrap();
        let x = FeatureVector::new((0..d).map(|_| r.random_range(-3.0..=3.0)).collect()).unwrap();
        let alpha = r.random_range(0.0..=1.0);
        let problem =
            RecourseProblem::new(x.clone(), model.clone(), Neighborhood::new(p, alpha).unwrap(), 0.1).unwrap();
        let worst = worst_case_glm(&problem, &x).unwrap();
        let expected = model.score(&x) - alpha * dual_norm(x.augmented(), p);
        score_err = score_err.max((worst.model.score(&x) - expected).abs());
        let shift: Vec<f64> = worst
            .model
            .augmented()
            .iter()
            .zip(model.augmented())
            .map(|(a, b)| a - b)
            .collect();
        if norm(&shift, p) > alpha * (1.0 + 1e-12) + 1e-15 {
            outside += 1;
        }
    }

    let mut pga_err = 0.0f64;
    let cfg = AscentConfig::default();
    for case in 0..200 {
        let p = orders[case % orders.len()];
        let d = r.random_range(1..=5);
        let model = LinearModel::new(
            (0..d).map(|_| r.random_range(-2.0..=2.0)).collect(),
            r.random_range(-2.0..=2.0),
        )
        .unwrap();
        let x = FeatureVector::new((0..d).map(|_| r.random_range(-2.0..=2.0)).collect()).unwrap();
        let problem = RecourseProblem::new(
            x.clone(),
            model.clone(),
            Neighborhood::new(p, r.random_range(0.05..=1.0)).unwrap(),
            0.1,
        )
        .unwrap();
        let closed = worst_case_glm(&problem, &x).unwrap().objective;
        let ascent = worst_case_nn_pga(&model, &x, &problem, &cfg).unwrap().objective;
        pga_err = pga_err.max((closed - ascent).abs());
    }
    verdict(
        6,
        "adversary closed form",
        score_err <= 1e-12 && outside == 0 && pga_err <= 1e-4,
        format!("max score error {score_err:.1e}, {outside} outside the ball, max PGA price gap {pga_err:.1e}"),
    );
}

fn c07_cone_projection_matches_active_set() {
    let mut r = rng(7);
    let (mut dykstra_err, mut exact_err, mut idem) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let dim = r.random_range(2..=6);
        let pivot = r.random_range(0..dim);
        let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let cone = DominanceCone::new(dim, pivot, sign).unwrap();
        let v: Vec<f64> = (0..dim).map(|_| r.random_range(-3.0..=3.0)).collect();
        let oracle = projection_oracle_activeset(&v, &cone).unwrap();
        let dyk = project_dominance_cone(&v, &cone, DEFAULT_CONE_TOL, DEFAULT_CONE_MAX_ITER).unwrap();
        let exact = project_dominance_cone_exact(&v, &cone).unwrap();
        let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        dykstra_err = dykstra_err.max(gap(&dyk, &oracle));
        exact_err = exact_err.max(gap(&exact, &oracle));

        let twice = project_dominance_cone(&dyk, &cone, DEFAULT_CONE_TOL, DEFAULT_CONE_MAX_ITER).unwrap();
        idem = idem.max(gap(&twice, &dyk));
        idem = idem.max(gap(&project_dominance_cone_exact(&exact, &cone).unwrap(), &exact));
        let radius = r.random_range(0.1..=2.0);
        let l1 = project_l1_ball(&v, radius);
        idem = idem.max(gap(&project_l1_ball(&l1, radius), &l1));
        for p in [NormOrder::L2, NormOrder::Infinity, NormOrder::Finite(3.0)] {
            let b = project_lp_ball(&v, p, radius).unwrap();
            idem = idem.max(gap(&project_lp_ball(&b, p, radius).unwrap(), &b));
        }
    }
    verdict(
        7,
        "projections",
        dykstra_err <= 1e-6 && exact_err <= 1e-6 && idem <= 1e-10,
        format!("Dykstra gap {dykstra_err:.1e}, exact gap {exact_err:.1e}, idempotence gap {idem:.1e}"),
    );
}

fn c08_percent_increase_golden() {
    let cases = [
        (0.68, 0.83, 22.1),
        (0.14, 0.28, 100.0),
        (0.03, 0.26, 766.7),
        (0.04, 1.04, 2500.0),
    ];
    let mut worst = 0.0f64;
    let mut got = Vec::new();
    for (best, mean, expected) in cases {
        let v = percent_increase(mean, best);
        worst = worst.max((v - expected).abs());
        got.push(format!("{v}"));
    }
    verdict(
        8,
        "percent increase",
        worst <= 0.1,
        format!("got [{}], max deviation {worst:.2}", got.join(", ")),
    );
}

fn c09_nonconvexity_certificate() {
    let c = nonconvexity_demo().unwrap();
    let branch = |x: f64| sigmoid(0.5 * x.abs()).powi(2) + (x - 1.0).abs();
    let closed = [branch(2.0), branch(4.0), branch(6.0)];
    let err = c
        .values
        .iter()
        .zip(&closed)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let margin = c.values[1] - c.midpoint_average;
    verdict(
        9,
        "non-convexity certificate",
        c.points == [2.0, 4.0, 6.0] && margin >= 1e-3 && err <= 1e-3,
        format!(
            "J(4) = {:.4}, midpoint average {:.4}, margin {margin:.4}, branch error {err:.1e}",
            c.values[1], c.midpoint_average
        ),
    );
}

fn c10_surrogate_recovers_glm() {
    let mut r = rng(10);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let d = r.random_range(1..=8);
        let model = LinearModel::new(
            (0..d).map(|_| r.random_range(-1.0..=1.0)).collect(),
            r.random_range(-1.0..=1.0),
        )
        .unwrap();
        let x0 = FeatureVector::new((0..d).map(|_| r.random_range(-1.0..=1.0)).collect()).unwrap();
        let cfg = SurrogateConfig {
            ridge_penalty: 0.0,
            target: SurrogateTarget::Logit,
            seed: k,
            ..Default::default()
        };
        let fit = fit_local_linear(&model, &x0, &cfg).unwrap();
        for (a, b) in fit.augmented().iter().zip(model.augmented()) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        10,
        "surrogate exactness",
        worst <= 1e-6,
        format!("max coefficient error {worst:.1e}"),
    );
}

fn gradient_error(model: &MlpModel, x: &FeatureVector) -> f64 {
    let loss = LossKind::BinaryCrossEntropy;
    let analytic = mlp_param_gradient(model, x, loss).unwrap().into_values();
    let mut params = model.params().to_vec();
    let h = 1e-6;
    let mut numeric = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let keep = params[i];
        params[i] = keep + h;
        let up = loss.value(model.score_with(&params, x.features()));
        params[i] = keep - h;
        let down = loss.value(model.score_with(&params, x.features()));
        params[i] = keep;
        numeric.push((up - down) / (2.0 * h));
    }
    let diff = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = norm(&analytic, NormOrder::L2)
        .max(norm(&numeric, NormOrder::L2))
        .max(1e-12);
    diff / scale
}

fn c11_gradients_match_finite_differences() {
    let mut r = rng(11);
    let (mut lr, mut mlp) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let d = r.random_range(1..=6);
        let x = FeatureVector::new((0..d).map(|_| r.random_range(-2.0..=2.0)).collect()).unwrap();
        let linear = MlpModel::from_parts(vec![d, 1], (0..=d).map(|_| r.random_range(-1.0..=1.0)).collect()).unwrap();
        lr = lr.max(gradient_error(&linear, &x));
        let net = MlpModel::new(vec![d, 8, 5, 1], k).unwrap();
        mlp = mlp.max(gradient_error(&net, &x));
    }
    verdict(
        11,
        "gradient checks",
        lr <= 1e-4 && mlp <= 1e-4,
        format!("max relative error LR {lr:.1e}, MLP {mlp:.1e}"),
    );
}

fn c12_perfect_instance_validity() {
    let problems = benchmark(NormOrder::L1, 0.5, 0.001);
    let sols = solve_all(Algorithm::Alg1, &problems);
    let recourses: Vec<FeatureVector> = sols.into_iter().map(|s| s.recourse).collect();
    let v = validity(
        ValidityKind::InstanceWise,
        &problems,
        &recourses,
        &ValidityOptions::default(),
    )
    .unwrap();
    verdict(12, "perfect validity", v == 1.0, format!("instance-wise validity {v}"));
}

fn c13_sparser_than_roar() {
    let problems = benchmark(NormOrder::L1, 0.5, 0.1);
    let origins: Vec<FeatureVector> = problems.iter().map(|p| p.origin.clone()).collect();
    let counts: Vec<(Algorithm, f64)> = Algorithm::ALL
        .iter()
        .map(|&alg| {
            let x: Vec<FeatureVector> = solve_all(alg, &problems).into_iter().map(|s| s.recourse).collect();
            (
                alg,
                sparsity_report(&x, &origins, 0.01, SparsityMode::Additive).unwrap(),
            )
        })
        .collect();
    let of = |a: Algorithm| counts.iter().find(|(b, _)| *b == a).unwrap().1;
    let roar = of(Algorithm::RoarL1).min(of(Algorithm::RoarLinf));
    let pass = of(Algorithm::Alg1) <= roar && of(Algorithm::Alg2) <= roar;
    let detail = counts
        .iter()
        .map(|(a, c)| format!("{a} {c:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(13, "sparsity", pass, detail);
}

fn c14_feasibility_idempotent() {
    let data = generate(&SyntheticConfig {
        rows: 200,
        ..Default::default()
    })
    .unwrap();
    let rows: Vec<usize> = (0..data.table.len()).collect();
    let encoded = encode_scale(&data.table, &data.schema, &rows).unwrap();
    let spec: FeasibilitySpec = encoded.encoder.feasibility_spec();
    let d = encoded.encoder.dim();
    let mut r = rng(14);
    let (mut not_idempotent, mut not_one_hot) = (0, 0);
    for k in 0..1000 {
        let origin = FeatureVector::new(encoded.x[k % encoded.x.len()].clone()).unwrap();
        let x = FeatureVector::new((0..d).map(|_| r.random_range(-0.5..=1.5)).collect()).unwrap();
        let once = apply_feasibility_postprocess(&x, &origin, &spec).unwrap();
        let twice = apply_feasibility_postprocess(&once, &origin, &spec).unwrap();
        if once != twice {
            not_idempotent += 1;
        }
        for g in &spec.groups {
            let part = &once.features()[g.clone()];
            let ones = part.iter().filter(|&&v| v == 1.0).count();
            let zeros = part.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != part.len() {
                not_one_hot += 1;
            }
        }
    }
    verdict(
        14,
        "feasibility idempotence",
        not_idempotent == 0 && not_one_hot == 0 && !spec.groups.is_empty(),
        format!(
            "{not_idempotent} not idempotent, {not_one_hot} groups not one-hot, {} groups",
            spec.groups.len()
        ),
    );
}

fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c15_end_to_end_reproducible() {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        run_synthetic_experiment(&cfg).unwrap().write(dir.path(), &cfg).unwrap();
    }
    let elapsed = start.elapsed() / 2;
    let a = snapshot(dirs[0].path());
    let b = snapshot(dirs[1].path());
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let dim = cfg.synthetic.numeric + cfg.synthetic.categories;
    let shape_ok = cfg.train.folds == 5
        && cfg.algorithms.len() == 4
        && cfg.alphas.len() == 2
        && cfg.lambdas.len() == 2
        && cfg.instances == 200
        && dim == 10;
    verdict(
        15,
        "end-to-end pipeline",
        a == b && shape_ok && elapsed <= Duration::from_secs(600) && names.contains(&"report.csv"),
        format!(
            "{:.1}s per run, files [{}], identical {}",
            elapsed.as_secs_f64(),
            names.join(", "),
            a == b
        ),
    );
}

fn main() {
    let criteria: [(u32, fn()); 15] = [
        (1, c01_algorithm1_matches_grid_oracle),
        (2, c02_algorithm2_matches_grid_oracle),
        (3, c03_exact_solvers_beat_roar),
        (4, c04_l1_price_below_linf_price),
        (5, c05_price_monotone_in_alpha_and_lambda),
        (6, c06_adversary_closed_form),
        (7, c07_cone_projection_matches_active_set),
        (8, c08_percent_increase_golden),
        (9, c09_nonconvexity_certificate),
        (10, c10_surrogate_recovers_glm),
        (11, c11_gradients_match_finite_differences),
        (12, c12_perfect_instance_validity),
        (13, c13_sparser_than_roar),
        (14, c14_feasibility_idempotent),
        (15, c15_end_to_end_reproducible),
    ];
    for (id, run) in criteria {
        if catch_unwind(run).is_err() {
            println!("criterion {id:>2}: FAIL (panicked)");
            FAILURES.fetch_add(1, Ordering::SeqCst);
        }
    }
    let failed = FAILURES.load(Ordering::SeqCst);
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
