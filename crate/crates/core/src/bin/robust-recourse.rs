//! Command-line front end: train model bundles, compute recourse, and emit
//! evaluation reports.
//!
//! Every command reads its flags from the command line and then from the
//! `[<command>]` table of the optional `--config` TOML file, whose values win.
//! Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use robust_recourse::data::{load_csv_with_schema, write_csv_with_schema, DatasetSchema, RawTable};
use robust_recourse::eval::{
    apply_feasibility_postprocess, certify, sparsity_report, write_frontier_csv, Algorithm, EvaluationReport,
    SolverSettings, SparsityMode, ValidityKind, SPARSITY_EPSILON,
};
use robust_recourse::experiment::{
    evaluate_cell, frontier, linearize_all, read_recourse_csv, run_experiment, run_synthetic_experiment,
    select_instances, solve_cell, write_recourse_csv, ExperimentConfig, RecourseRecord,
};
use robust_recourse::oracle::{nonconvexity_curve, nonconvexity_demo};
use robust_recourse::pipeline::{train_bundle, Bundle, ModelKind, RecourseInstance, TrainSettings};
use robust_recourse::surrogate::SurrogateConfig;
use robust_recourse::synthetic::{generate, SyntheticConfig};
use robust_recourse::{
    solve_algorithm1, FeatureVector, Neighborhood, NormOrder, RecourseError, RecourseProblem, SubgradientConfig,
};

#[derive(Parser)]
#[command(
    name = "robust-recourse",
    version,
    about = "Robust algorithmic recourse for generalized linear models"
)]
struct Cli {
    /// TOML file whose `[<command>]` table overrides the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per cross-validation fold and save the bundle.
    Train(TrainArgs),
    /// Solve recourse for every held-out negative instance of a bundle.
    Recourse(RecourseArgs),
    /// Price, validity, sparsity, and feasibility report from recourse CSVs.
    Evaluate(EvaluateArgs),
    /// Cost and validity over a grid of lambda values.
    Frontier(FrontierArgs),
    /// Mean number of changed features per recourse file.
    Sparsity(SparsityArgs),
    /// Snap recourses to actionable values and re-price them.
    Feasibility(FeasibilityArgs),
    /// Evaluate the robust price of the one-feature squared-loss example.
    DemoNonconvex(DemoArgs),
    /// Write a seeded synthetic dataset, its shifted twin, and a schema.
    Synth(SynthArgs),
    /// Train, solve, and evaluate every configured cell end to end.
    Experiment(ExperimentArgs),
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Shifted dataset for future validity; defaults to the schema's.
    #[arg(long)]
    shifted: Option<PathBuf>,
    /// `lr` or `nn`.
    #[arg(long, default_value = "lr")]
    model: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecourseArgs {
    /// Bundle directory written by `train`.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Data file; defaults to the one the bundle was trained on.
    #[arg(long)]
    data: Option<PathBuf>,
    /// `alg1`, `alg2`, `roar-l1`, or `roar-linf`.
    #[arg(long)]
    algorithm: Option<String>,
    /// Norm of the neighborhood; only `alg1` accepts a value other than its
    /// default.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Cap on the number of instances.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateArgs {
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Recourse CSVs written by `recourse` (repeatable).
    #[arg(long = "recourses")]
    #[serde(default)]
    recourses: Vec<PathBuf>,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = SPARSITY_EPSILON)]
    epsilon: f64,
    /// Seed used when the recourses were computed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `report.csv` and `summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrontierArgs {
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma separated algorithms.
    #[arg(long, default_value = "alg1,alg2,roar-l1,roar-linf")]
    algorithms: String,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma separated lambda grid.
    #[arg(long, default_value = "0.001,0.01,0.1")]
    lambdas: String,
    /// `instance_wise`, `population_wise`, `current`, or `future`.
    #[arg(long, default_value = "instance_wise")]
    kind: String,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SparsityArgs {
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long = "recourses")]
    #[serde(default)]
    recourses: Vec<PathBuf>,
    #[arg(long, default_value_t = SPARSITY_EPSILON)]
    epsilon: f64,
    /// `additive` or `multiplicative`.
    #[arg(long, default_value = "additive")]
    mode: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeasibilityArgs {
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    recourses: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoArgs {
    /// Intervals of the curve over [-8, 8].
    #[arg(long, default_value_t = 160)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, default_value_t = 7)]
    numeric: usize,
    #[arg(long, default_value_t = 3)]
    categories: usize,
    #[arg(long, default_value_t = 0.5)]
    shift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Real data instead of the synthetic generator (needs `--schema`).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Command failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<RecourseError> for Failure {
    fn from(e: RecourseError) -> Self {
        Failure {
            code: if e.is_numeric() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        RecourseError::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = std::result::Result<(), Failure>;
/// Records of one `(alpha, lambda)` cell, grouped by algorithm.
type Cell = ((f64, f64), Vec<(Algorithm, Vec<RecourseRecord>)>);
type SparsityKey = (Algorithm, f64, f64);

fn need<T>(value: Option<T>, flag: &str) -> std::result::Result<T, Failure> {
    value.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn read_config(path: Option<&Path>) -> std::result::Result<toml::Table, Failure> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| usage(format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn merge(base: &mut toml::Table, overlay: &toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Re-reads `value` with the `[section]` table of the config laid over it.
fn overlay<T: Serialize + DeserializeOwned>(
    value: T,
    config: &toml::Table,
    section: &str,
) -> std::result::Result<T, Failure> {
    let Some(over) = config.get(section) else {
        return Ok(value);
    };
    let over = over
        .as_table()
        .ok_or_else(|| usage(format!("config entry `{section}` must be a table")))?;
    let mut base = toml::Table::try_from(&value).map_err(|e| usage(e.to_string()))?;
    merge(&mut base, over);
    toml::Value::Table(base)
        .try_into()
        .map_err(|e| usage(format!("config [{section}]: {e}")))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> std::result::Result<Vec<T>, Failure> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| usage(format!("invalid {what} `{s}`"))))
        .collect()
}

fn create(path: &Path) -> std::result::Result<File, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

fn load_bundle(dir: &Path, data: Option<&Path>) -> std::result::Result<(Bundle, RawTable), Failure> {
    let bundle = Bundle::load(dir)?;
    let path = data
        .map(Path::to_path_buf)
        .or_else(|| bundle.data_path.clone())
        .ok_or_else(|| usage("the bundle records no data file; pass --data"))?;
    let table = load_csv_with_schema(&path, &bundle.schema)?;
    Ok((bundle, table))
}

/// Instances for the ids in `records`, in first-seen order.
fn instances_for(
    bundle: &Bundle,
    table: &RawTable,
    records: &[RecourseRecord],
) -> std::result::Result<Vec<RecourseInstance>, Failure> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for r in records {
        if seen.contains_key(&r.id) {
            continue;
        }
        let fold = bundle
            .folds
            .get(r.fold)
            .ok_or_else(|| usage(format!("record {} names fold {} the bundle lacks", r.id, r.fold)))?;
        let raw = table
            .rows
            .get(r.id)
            .ok_or_else(|| usage(format!("record {} is not a row of the data", r.id)))?;
        seen.insert(r.id, out.len());
        out.push(RecourseInstance {
            id: r.id,
            fold: r.fold,
            origin: FeatureVector::new(fold.encoder.encode_row(raw)?)?,
        });
    }
    Ok(out)
}

fn read_records(paths: &[PathBuf]) -> std::result::Result<Vec<RecourseRecord>, Failure> {
    if paths.is_empty() {
        return Err(usage("missing required --recourses"));
    }
    let mut all = Vec::new();
    for p in paths {
        let file = File::open(p).map_err(|e| usage(format!("cannot open {}: {e}", p.display())))?;
        all.extend(read_recourse_csv(file)?);
    }
    Ok(all)
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let data = need(args.data, "data")?;
    let schema_path = need(args.schema, "schema")?;
    let out = need(args.out, "out")?;
    let schema = DatasetSchema::from_file(&schema_path)?;
    let table = load_csv_with_schema(&data, &schema)?;
    let shifted_path = args.shifted.or_else(|| schema.shifted_path.clone());
    let shifted = shifted_path.map(|p| load_csv_with_schema(&p, &schema)).transpose()?;

    let mut settings = TrainSettings {
        model: args.model.parse::<ModelKind>()?,
        folds: args.folds,
        seed: args.seed,
        ..Default::default()
    };
    if let Some(e) = args.epochs {
        settings.train.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        settings.train.learning_rate = lr;
    }
    if let Some(h) = args.hidden {
        settings.hidden = parse_list(&h, "hidden width")?;
    }
    let mut bundle = train_bundle(&schema, &table, shifted.as_ref(), &settings)?;
    bundle.data_path = Some(data);
    bundle.save(&out)?;
    for (k, f) in bundle.folds.iter().enumerate() {
        println!("fold {k}: accuracy {:.4}", f.test_accuracy);
    }
    Ok(())
}

fn cmd_recourse(args: RecourseArgs) -> CmdResult {
    let algorithm: Algorithm = need(args.algorithm, "algorithm")?.parse()?;
    let alpha = need(args.alpha, "alpha")?;
    let lambda = need(args.lambda, "lambda")?;
    let out = need(args.out, "out")?;
    let p: Option<NormOrder> = args.p.as_deref().map(str::parse).transpose()?;
    match (algorithm, p) {
        (Algorithm::Alg1, Some(NormOrder::Infinity)) => {
            return Err(usage("alg1 does not handle p = inf; use --algorithm alg2"));
        }
        (Algorithm::Alg1, _) | (_, None) => {}
        (alg, Some(p)) if p != alg.norm() => {
            return Err(usage(format!("{alg} always uses p = {}", alg.norm())));
        }
        _ => {}
    }
    let (bundle, table) = load_bundle(&need(args.models, "models")?, args.data.as_deref())?;
    let instances = select_instances(&bundle, &table, args.instances.unwrap_or(usize::MAX))?;
    let linear = linearize_all(&bundle, &instances, &SurrogateConfig::default(), args.seed)?;

    let mut records = match p {
        Some(p) if algorithm == Algorithm::Alg1 && p != NormOrder::L1 => {
            let nb = Neighborhood::new(p, alpha)?;
            let cfg = SubgradientConfig::default();
            let mut recs = Vec::with_capacity(instances.len());
            for (inst, m) in instances.iter().zip(&linear) {
                let problem = RecourseProblem::new(inst.origin.clone(), m.clone(), nb, lambda)?;
                let sol = solve_algorithm1(&problem, &cfg)?;
                recs.push(RecourseRecord {
                    id: inst.id,
                    fold: inst.fold,
                    algorithm,
                    alpha,
                    lambda,
                    price: sol.price,
                    cost: problem.cost(&sol.recourse),
                    converged: sol.converged,
                    recourse: sol.recourse.into_features(),
                });
            }
            recs
        }
        _ => solve_cell(
            &instances,
            &linear,
            algorithm,
            alpha,
            lambda,
            &SolverSettings::default(),
        )?,
    };
    records.sort_by_key(|r| r.id);
    write_recourse_csv(&records, create(&out)?)?;
    println!("{} recourses written to {}", records.len(), out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CmdResult {
    let out = need(args.out, "out")?;
    let (bundle, table) = load_bundle(&need(args.models, "models")?, args.data.as_deref())?;
    let records = read_records(&args.recourses)?;
    let cfg = ExperimentConfig {
        population_restarts: args.restarts,
        sparsity_epsilon: args.epsilon,
        seed: args.seed,
        ..Default::default()
    };

    // cells and algorithms in first-seen order
    let mut cells: Vec<Cell> = Vec::new();
    for r in &records {
        let key = (r.alpha, r.lambda);
        let pos = match cells.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                cells.push((key, Vec::new()));
                cells.len() - 1
            }
        };
        let algs = &mut cells[pos].1;
        match algs.iter_mut().find(|(a, _)| *a == r.algorithm) {
            Some((_, v)) => v.push(r.clone()),
            None => algs.push((r.algorithm, vec![r.clone()])),
        }
    }

    let mut report = EvaluationReport {
        dataset: args.dataset,
        model: bundle.settings.model.name().into(),
        cells: Vec::new(),
    };
    for ((alpha, lambda), mut per_alg) in cells {
        let instances = instances_for(&bundle, &table, &per_alg[0].1)?;
        let order: HashMap<usize, usize> = instances.iter().enumerate().map(|(i, inst)| (inst.id, i)).collect();
        for (alg, recs) in &mut per_alg {
            if recs.len() != instances.len() || recs.iter().any(|r| !order.contains_key(&r.id)) {
                return Err(usage(format!(
                    "{alg} at alpha {alpha}, lambda {lambda} covers different instances"
                )));
            }
            recs.sort_by_key(|r| order[&r.id]);
        }
        let linear = linearize_all(&bundle, &instances, &SurrogateConfig::default(), args.seed)?;
        report.cells.push(evaluate_cell(
            &bundle, &instances, &linear, alpha, lambda, &per_alg, &cfg,
        )?);
    }
    std::fs::create_dir_all(&out)?;
    report.write_csv(create(&out.join("report.csv"))?)?;
    std::fs::write(out.join("summary.json"), report.to_json()? + "\n")?;
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_frontier(args: FrontierArgs) -> CmdResult {
    let out = need(args.out, "out")?;
    let alpha = need(args.alpha, "alpha")?;
    let algorithms: Vec<Algorithm> = parse_list(&args.algorithms, "algorithm")?;
    let lambdas: Vec<f64> = parse_list(&args.lambdas, "lambda")?;
    let kind: ValidityKind = args.kind.parse()?;
    let (bundle, table) = load_bundle(&need(args.models, "models")?, args.data.as_deref())?;
    let instances = select_instances(&bundle, &table, args.instances)?;
    let linear = linearize_all(&bundle, &instances, &SurrogateConfig::default(), args.seed)?;
    let cfg = ExperimentConfig {
        algorithms,
        seed: args.seed,
        ..Default::default()
    };
    let sweep = frontier(&bundle, &instances, &linear, alpha, &lambdas, kind, &cfg)?;
    write_frontier_csv(&sweep, create(&out)?)?;
    println!("{} frontier points written to {}", sweep.points.len(), out.display());
    Ok(())
}

fn cmd_sparsity(args: SparsityArgs) -> CmdResult {
    let out = need(args.out, "out")?;
    let mode: SparsityMode = args.mode.parse()?;
    let (bundle, table) = load_bundle(&need(args.models, "models")?, args.data.as_deref())?;
    let records = read_records(&args.recourses)?;
    let instances = instances_for(&bundle, &table, &records)?;
    let origin: HashMap<usize, &FeatureVector> = instances.iter().map(|i| (i.id, &i.origin)).collect();

    let mut groups: Vec<(SparsityKey, Vec<&RecourseRecord>)> = Vec::new();
    for r in &records {
        let key = (r.algorithm, r.alpha, r.lambda);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut w = csv::Writer::from_writer(create(&out)?);
    w.write_record(["algorithm", "alpha", "lambda", "mode", "epsilon", "mean_changed"])
        .map_err(RecourseError::from)?;
    for ((alg, alpha, lambda), recs) in groups {
        let xs = recs
            .iter()
            .map(|r| FeatureVector::new(r.recourse.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let x0: Vec<FeatureVector> = recs.iter().map(|r| origin[&r.id].clone()).collect();
        let mean = sparsity_report(&xs, &x0, args.epsilon, mode)?;
        w.write_record([
            alg.name().to_string(),
            alpha.to_string(),
            lambda.to_string(),
            args.mode.clone(),
            args.epsilon.to_string(),
            mean.to_string(),
        ])
        .map_err(RecourseError::from)?;
    }
    w.flush()?;
    println!("sparsity written to {}", out.display());
    Ok(())
}

fn cmd_feasibility(args: FeasibilityArgs) -> CmdResult {
    let out = need(args.out, "out")?;
    let (bundle, table) = load_bundle(&need(args.models, "models")?, args.data.as_deref())?;
    let records = read_records(&[need(args.recourses, "recourses")?])?;
    let instances = instances_for(&bundle, &table, &records)?;
    let linear = linearize_all(&bundle, &instances, &SurrogateConfig::default(), args.seed)?;
    let index: HashMap<usize, usize> = instances.iter().enumerate().map(|(i, inst)| (inst.id, i)).collect();

    let mut fixed = Vec::with_capacity(records.len());
    for r in records {
        let i = index[&r.id];
        let inst = &instances[i];
        let spec = bundle.folds[inst.fold].feasibility_spec();
        let x = apply_feasibility_postprocess(&FeatureVector::new(r.recourse.clone())?, &inst.origin, &spec)?;
        let problem = RecourseProblem::new(
            inst.origin.clone(),
            linear[i].clone(),
            Neighborhood::new(r.algorithm.norm(), r.alpha)?,
            r.lambda,
        )?;
        let unchanged = x.features() == r.recourse.as_slice();
        fixed.push(RecourseRecord {
            price: if unchanged { r.price } else { certify(&problem, &x)? },
            cost: if unchanged { r.cost } else { problem.cost(&x) },
            recourse: x.into_features(),
            ..r
        });
    }
    write_recourse_csv(&fixed, create(&out)?)?;
    println!("{} post-processed recourses written to {}", fixed.len(), out.display());
    Ok(())
}

fn cmd_demo(args: DemoArgs) -> CmdResult {
    let out = need(args.out, "out")?;
    std::fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_writer(create(&out.join("curve.csv"))?);
    w.write_record(["x", "J"]).map_err(RecourseError::from)?;
    for (x, j) in nonconvexity_curve(args.points)? {
        w.write_record([x.to_string(), j.to_string()])
            .map_err(RecourseError::from)?;
    }
    w.flush()?;
    let c = nonconvexity_demo()?;
    let mut f = create(&out.join("certificate.txt"))?;
    writeln!(f, "a = {}, m = {}, b = {}", c.points[0], c.points[1], c.points[2])?;
    writeln!(f, "J(a) = {:.6}", c.values[0])?;
    writeln!(f, "J(m) = {:.6}", c.values[1])?;
    writeln!(f, "J(b) = {:.6}", c.values[2])?;
    writeln!(f, "(J(a) + J(b)) / 2 = {:.6}", c.midpoint_average)?;
    writeln!(f, "margin = {:.6}", c.values[1] - c.midpoint_average)?;
    writeln!(f, "non-convex: {}", c.violates_convexity())?;
    println!(
        "J(4) = {:.4} > {:.4} = (J(2) + J(6)) / 2; files in {}",
        c.values[1],
        c.midpoint_average,
        out.display()
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let out = need(args.out, "out")?;
    let data = generate(&SyntheticConfig {
        rows: args.rows,
        numeric: args.numeric,
        categories: args.categories,
        shift: args.shift,
        seed: args.seed,
    })?;
    std::fs::create_dir_all(&out)?;
    write_csv_with_schema(create(&out.join("data.csv"))?, &data.schema, &data.table)?;
    write_csv_with_schema(create(&out.join("shifted.csv"))?, &data.schema, &data.shifted)?;
    let schema = DatasetSchema {
        shifted_path: Some("shifted.csv".into()),
        ..data.schema
    };
    std::fs::write(out.join("schema.toml"), schema.to_toml_string()?)?;
    println!("synthetic data written to {}", out.display());
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs, config: &toml::Table) -> CmdResult {
    let mut cfg = ExperimentConfig::default();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.instances {
        cfg.instances = n;
    }
    if let Some(m) = &args.model {
        cfg.train.model = m.parse()?;
    }
    let cfg = overlay(cfg, config, "experiment")?;
    let out = need(args.out, "out")?;
    let output = match (&args.data, &args.schema) {
        (Some(data), Some(schema_path)) => {
            let schema = DatasetSchema::from_file(schema_path)?;
            let table = load_csv_with_schema(data, &schema)?;
            let shifted = schema
                .shifted_path
                .as_ref()
                .map(|p| load_csv_with_schema(p, &schema))
                .transpose()?;
            run_experiment(&cfg, &schema, &table, shifted.as_ref())?
        }
        (None, None) => run_synthetic_experiment(&cfg)?,
        _ => return Err(usage("--data and --schema go together")),
    };
    output.write(&out, &cfg)?;
    println!(
        "{} recourses over {} cells written to {}",
        output.records.len(),
        output.report.cells.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let config = read_config(cli.config.as_deref())?;
    match cli.command {
        Command::Train(a) => cmd_train(overlay(a, &config, "train")?),
        Command::Recourse(a) => cmd_recourse(overlay(a, &config, "recourse")?),
        Command::Evaluate(a) => cmd_evaluate(overlay(a, &config, "evaluate")?),
        Command::Frontier(a) => cmd_frontier(overlay(a, &config, "frontier")?),
        Command::Sparsity(a) => cmd_sparsity(overlay(a, &config, "sparsity")?),
        Command::Feasibility(a) => cmd_feasibility(overlay(a, &config, "feasibility")?),
        Command::DemoNonconvex(a) => cmd_demo(overlay(a, &config, "demo-nonconvex")?),
        Command::Synth(a) => cmd_synth(overlay(a, &config, "synth")?),
        Command::Experiment(a) => cmd_experiment(a, &config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
