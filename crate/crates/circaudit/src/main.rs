//! circaudit: generate synthetic rule datasets, audit tabular data for
//! circular features, and distill black-box model predictions into a student
//! GAM audit. Outcomes are encoded in the exit code (0 = not-circular,
//! 10 = circular, 11 = partially-circular, 1 = failure/inconclusive).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use circaudit::circularity::{run_audit, AuditConfig, AuditResult};
use circaudit::data::{read_csv, Dataset};
use circaudit::gam::{Family, Smoothing};
use circaudit::mlp::{
    accuracy, distill_audit, f1, threshold, train, Activation, Loss, NetSpec, TrainConfig,
};
use circaudit::report::{correlation_csv, fit_panels, render_ranking_csv, render_svg, ShapePanel};
use circaudit::synth::{gen_icu, gen_patent, kidney_table, liver_table, GenConfig};

#[derive(Parser)]
#[command(name = "circaudit", version, about = "Circular-feature auditing for tabular data and model predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic rule dataset (CSV + GenConfig sidecar).
    Generate(GenerateArgs),
    /// Run the circularity test on a CSV dataset.
    Audit(AuditArgs),
    /// Train (or load predictions of) a teacher model and audit a student GAM
    /// fitted on its predictions.
    Distill(DistillArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleId {
    /// Patent prior-art relevance from citation indicators.
    Patent,
    /// Liver SOFA from bilirubin, with correlated lab surrogates.
    Liver,
    /// Kidney SOFA from creatinine + 24h urine output.
    Kidney,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    rule: RuleId,
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Extra independent noise columns.
    #[arg(long, default_value_t = 0)]
    noise_features: usize,
    /// Noise multiplier for the patent surrogate scores.
    #[arg(long, default_value_t = 1.0)]
    score_noise: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Clone)]
struct AuditFlags {
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// "gcv" or "fixed:<value>".
    #[arg(long, default_value = "gcv")]
    lambda: String,
    #[arg(long, default_value_t = 30)]
    knots: usize,
    /// Keep only the top-m features by |Pearson r| before the subset search.
    #[arg(long)]
    preselect: Option<usize>,
    /// Restrict candidate subsets to these features (comma-separated); the
    /// full model and nullification still use every feature.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.99)]
    delta_close: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_null: f64,
}

impl AuditFlags {
    fn to_config(&self, seed: u64) -> anyhow::Result<AuditConfig> {
        let family = match self.family.as_str() {
            "gaussian" => Family::Gaussian,
            "binomial" => Family::Binomial,
            other => bail!("unknown family '{other}' (expected gaussian|binomial)"),
        };
        let smoothing = parse_lambda(&self.lambda)?;
        Ok(AuditConfig {
            family,
            smoothing,
            knots: self.knots,
            delta_close: self.delta_close,
            eps_null: self.eps_null,
            preselect: self.preselect,
            candidate_features: self.candidates.clone(),
            seed,
            ..AuditConfig::default()
        })
    }
}

#[derive(Args)]
struct AuditArgs {
    /// Input dataset CSV (header row, numeric cells).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    audit: AuditFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DistillArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// External predictions CSV ("row,score") over all data rows; skips
    /// training and audits the scores directly.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Columns the teacher may use (comma-separated; default: all features).
    #[arg(long, value_delimiter = ',')]
    teacher_features: Option<Vec<String>>,
    /// Columns exposed to the student GAM (default: all features).
    #[arg(long, value_delimiter = ',')]
    student_features: Option<Vec<String>>,
    /// Columns zeroed on the test set for an extra teacher evaluation.
    #[arg(long, value_delimiter = ',')]
    ablate: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    #[arg(long, default_value = "tanh")]
    activation: String,
    #[arg(long, default_value = "logistic")]
    loss: String,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// Score cut points for discretizing teacher output (default "0.5" for
    /// logistic loss, none for squared).
    #[arg(long, value_delimiter = ',')]
    cuts: Option<Vec<f64>>,
    #[command(flatten)]
    audit: AuditFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_lambda(text: &str) -> anyhow::Result<Smoothing> {
    if text == "gcv" {
        return Ok(Smoothing::Gcv);
    }
    if let Some(v) = text.strip_prefix("fixed:") {
        let v: f64 = v.parse().with_context(|| format!("bad lambda value '{v}'"))?;
        if !(v >= 0.0) {
            bail!("lambda must be >= 0");
        }
        return Ok(Smoothing::Fixed(v));
    }
    bail!("unknown lambda policy '{text}' (expected gcv | fixed:<value>)")
}

fn main() {
    if let Ok(threads) = std::env::var("CIRCAUDIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Distill(args) => cmd_distill(args),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

/// Reproducibility manifest: command, config echo, and input hashes.
fn write_manifest(
    dir: &Path,
    command: &str,
    config: serde_json::Value,
    inputs: &[(&str, String)],
) -> anyhow::Result<()> {
    let inputs: BTreeMap<&str, &str> = inputs.iter().map(|(k, v)| (*k, v.as_str())).collect();
    let manifest = serde_json::json!({
        "command": command,
        "config": config,
        "versions": {
            "circaudit": env!("CARGO_PKG_VERSION"),
            "report_schema": circaudit::circularity::REPORT_VERSION,
        },
        "inputs": inputs,
    });
    write_file(dir, "manifest.json", &format!("{:#}\n", manifest))
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<i32> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let cfg = GenConfig {
        n_rows: args.n,
        seed: args.seed,
        noise_features: args.noise_features,
        score_noise: args.score_noise,
    };
    let data = match args.rule {
        RuleId::Patent => gen_patent(&cfg)?,
        RuleId::Liver => liver_table(&gen_icu(&cfg)?)?,
        RuleId::Kidney => kidney_table(&gen_icu(&cfg)?)?,
    };
    data.write_csv(&args.out_dir.join("data.csv"))?;
    let sidecar = serde_json::json!({
        "rule": format!("{:?}", args.rule).to_lowercase(),
        "gen_config": cfg,
    });
    write_file(&args.out_dir, "genconfig.json", &format!("{:#}\n", sidecar))?;
    write_manifest(
        &args.out_dir,
        "generate",
        serde_json::json!({
            "rule": format!("{:?}", args.rule).to_lowercase(),
            "n": args.n,
            "seed": args.seed,
            "noise_features": args.noise_features,
            "score_noise": args.score_noise,
        }),
        &[("data.csv", data.fingerprint())],
    )?;
    Ok(0)
}

/// Empty-complement placeholder so the artifact set is always complete.
const NO_COMPLEMENT_SVG: &str = "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
width=\"320\" height=\"60\" viewBox=\"0 0 320 60\">\n<text x=\"160\" y=\"34\" \
text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">no features outside \
the selected set</text>\n</svg>\n";

fn write_audit_artifacts(dir: &Path, result: &AuditResult) -> anyhow::Result<()> {
    let report_json = serde_json::to_string_pretty(&result.report)?;
    write_file(dir, "report.json", &format!("{report_json}\n"))?;
    write_file(dir, "ranking.csv", &render_ranking_csv(&result.report)?)?;

    let selected = result.report.selected.features.join(" + ");
    let mut with_panels: Vec<ShapePanel> = fit_panels(&result.full_fit)?;
    for p in &mut with_panels {
        if result.report.selected.features.contains(&p.title) {
            p.annotation = Some("in c*".to_string());
        }
    }
    let with_title = format!(
        "all features (D^2 = {:.4}); c* = {{{selected}}}",
        result.full_fit.d_squared
    );
    write_file(dir, "shapes_with.svg", &render_svg(&with_panels, 3, &with_title)?)?;

    let without = match &result.complement_fit {
        None => NO_COMPLEMENT_SVG.to_string(),
        Some(fit) => {
            let panels = fit_panels(fit)?;
            let title = format!("without {{{selected}}} (D^2 = {:.4})", fit.d_squared);
            render_svg(&panels, 3, &title)?
        }
    };
    write_file(dir, "shapes_without.svg", &without)?;
    Ok(())
}

fn cmd_audit(args: AuditArgs) -> anyhow::Result<i32> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let data = read_csv(&args.data, &args.target)?;
    let config = args.audit.to_config(args.seed)?;
    let result = run_audit(&data, &args.target, &config)?;
    write_audit_artifacts(&args.out_dir, &result)?;
    write_file(&args.out_dir, "correlations.csv", &correlation_csv(&data, &args.target)?)?;
    write_manifest(
        &args.out_dir,
        "audit",
        serde_json::json!({
            "data": args.data.display().to_string(),
            "target": args.target,
            "seed": args.seed,
            "family": args.audit.family,
            "lambda": args.audit.lambda,
            "knots": args.audit.knots,
            "preselect": args.audit.preselect,
            "candidates": args.audit.candidates,
            "delta_close": args.audit.delta_close,
            "eps_null": args.audit.eps_null,
        }),
        &[("data", sha256_file(&args.data)?)],
    )?;
    println!(
        "outcome: {} (c* = {{{}}}, D^2 = {:.6})",
        result.report.outcome,
        result.report.selected.features.join(", "),
        result.report.selected.d_squared
    );
    Ok(result.report.outcome.exit_code())
}

fn read_predictions(path: &Path, n_rows: usize) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut scores = vec![f64::NAN; n_rows];
    let mut seen = 0usize;
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 && line.to_lowercase().starts_with("row") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (row, score) = (cells.next(), cells.next());
        let (row, score) = match (row, score) {
            (Some(r), Some(s)) => (r, s),
            _ => bail!("predictions line {} is not 'row,score'", ln + 1),
        };
        let row: usize = row
            .trim()
            .parse()
            .with_context(|| format!("bad row id on line {}", ln + 1))?;
        if row >= n_rows {
            bail!("prediction row {row} out of range for {n_rows} data rows");
        }
        if !scores[row].is_nan() {
            bail!("duplicate prediction for row {row}");
        }
        scores[row] = score
            .trim()
            .parse()
            .with_context(|| format!("bad score on line {}", ln + 1))?;
        seen += 1;
    }
    if seen != n_rows {
        bail!("predictions cover {seen} of {n_rows} data rows");
    }
    Ok(scores)
}

fn cmd_distill(args: DistillArgs) -> anyhow::Result<i32> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let data = read_csv(&args.data, &args.target)?;
    let all_features = data.feature_names(&args.target);
    let student_features = args.student_features.clone().unwrap_or_else(|| all_features.clone());
    for f in &student_features {
        if !data.has_column(f) {
            bail!("student feature '{f}' not in dataset");
        }
    }
    let loss = match args.loss.as_str() {
        "logistic" => Loss::Logistic,
        "squared" => Loss::Squared,
        other => bail!("unknown loss '{other}' (expected logistic|squared)"),
    };
    let cuts: Vec<f64> = match &args.cuts {
        Some(c) => c.clone(),
        None => match loss {
            Loss::Logistic => vec![0.5],
            Loss::Squared => vec![],
        },
    };
    let audit_config = args.audit.to_config(args.seed)?;

    let mut metrics = serde_json::Map::new();
    let result = if let Some(pred_path) = &args.predictions {
        // external black-box: all rows are test rows
        let scores = read_predictions(pred_path, data.n_rows())?;
        let target: Vec<f64> = if cuts.is_empty() {
            scores
        } else {
            threshold(&scores, &cuts).into_iter().map(f64::from).collect()
        };
        let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
        for name in &student_features {
            cols.push((name.clone(), data.column(name)?.values.clone()));
        }
        cols.push(("teacher_label".to_string(), target));
        let student_data = Dataset::from_columns(cols)?;
        run_audit(&student_data, "teacher_label", &audit_config)?
    } else {
        let teacher_features = args.teacher_features.clone().unwrap_or_else(|| all_features.clone());
        let (train_set, test_set) = data.split(args.train_fraction, args.seed)?;
        let spec = NetSpec {
            hidden: NetSpec::default_ramp(Activation::Tanh).hidden,
            activation: match args.activation.as_str() {
                "tanh" => Activation::Tanh,
                "relu" => Activation::Relu,
                other => bail!("unknown activation '{other}' (expected tanh|relu)"),
            },
        };
        let train_cfg = TrainConfig {
            batch_size: args.batch_size,
            learning_rate: args.learning_rate,
            epochs: args.epochs,
            dropout: args.dropout,
            loss,
            seed: args.seed,
        };
        let teacher = train(&spec, &train_set, &args.target, &teacher_features, &train_cfg)?;
        write_file(&args.out_dir, "teacher.json", &format!("{}\n", teacher.to_json()))?;

        // teacher quality on held-out data
        let truth: Vec<u32> = test_set
            .column(&args.target)?
            .values
            .iter()
            .map(|&v| v as u32)
            .collect();
        let pred = threshold(&teacher.predict(&test_set)?, &cuts);
        metrics.insert("test_accuracy".into(), accuracy(&pred, &truth)?.into());
        if truth.iter().all(|&t| t <= 1) {
            metrics.insert("test_f1".into(), f1(&pred, &truth)?.into());
        }
        if let Some(ablate_cols) = &args.ablate {
            let refs: Vec<&str> = ablate_cols.iter().map(String::as_str).collect();
            let ablated = circaudit::synth::ablate(&test_set, &refs)?;
            let pred_a = threshold(&teacher.predict(&ablated)?, &cuts);
            metrics.insert("ablated_accuracy".into(), accuracy(&pred_a, &truth)?.into());
            if truth.iter().all(|&t| t <= 1) {
                metrics.insert("ablated_f1".into(), f1(&pred_a, &truth)?.into());
            }
        }
        distill_audit(&teacher, &test_set, &student_features, &cuts, &audit_config)?
    };

    write_audit_artifacts(&args.out_dir, &result)?;
    if !metrics.is_empty() {
        let doc = serde_json::Value::Object(metrics);
        write_file(&args.out_dir, "metrics.json", &format!("{:#}\n", doc))?;
    }
    write_manifest(
        &args.out_dir,
        "distill",
        serde_json::json!({
            "data": args.data.display().to_string(),
            "target": args.target,
            "seed": args.seed,
            "predictions": args.predictions.as_ref().map(|p| p.display().to_string()),
            "teacher_features": args.teacher_features,
            "student_features": student_features,
            "ablate": args.ablate,
            "train_fraction": args.train_fraction,
            "activation": args.activation,
            "loss": args.loss,
            "dropout": args.dropout,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "learning_rate": args.learning_rate,
            "cuts": cuts,
            "family": args.audit.family,
            "lambda": args.audit.lambda,
            "knots": args.audit.knots,
            "preselect": args.audit.preselect,
            "candidates": args.audit.candidates,
            "delta_close": args.audit.delta_close,
            "eps_null": args.audit.eps_null,
        }),
        &[("data", sha256_file(&args.data)?)],
    )?;
    println!(
        "outcome: {} (c* = {{{}}}, D^2 = {:.6})",
        result.report.outcome,
        result.report.selected.features.join(", "),
        result.report.selected.d_squared
    );
    Ok(result.report.outcome.exit_code())
}
