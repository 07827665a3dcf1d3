mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use issc_core::dataset::{self, CsvFormat, LabeledDataset, SplitSpec};
use issc_core::metrics;
use issc_core::model_io;
use issc_core::pipeline::{self, FitArtifacts, PipelineConfig};

use report::{
    BenchReport, BenchRow, CountsSection, ExtendReport, FitReport, MetricsSection, ParamsSection,
    SolverSection, TimingsSection, SCHEMA_VERSION,
};

/// Inductive sparse subspace clustering: fit an l1-graph spectral model on
/// in-sample data, then label out-of-sample data in linear time.
#[derive(Parser)]
#[command(name = "issc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model: sparse codes, spectral clustering, linear embedding.
    Fit(FitArgs),
    /// Label new data with a fitted model.
    Extend(ExtendArgs),
    /// Sweep the (lambda, delta) grid and compare against plain k-means.
    Bench(BenchArgs),
    /// Generate a synthetic benchmark dataset as labeled CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV, one point per row.
    #[arg(long)]
    data: PathBuf,
    /// Treat the last CSV column as an integer class label.
    #[arg(long)]
    labeled: bool,
    /// Separate labels file, one integer per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct ModelParams {
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Sparsity parameter of the l1 solver.
    #[arg(long, default_value_t = 1e-6)]
    lambda: f64,
    /// Error tolerance of the l1 solver.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// PCA energy fraction in (0, 1].
    #[arg(long, default_value_t = 0.98)]
    pca_energy: f64,
    /// Skip PCA entirely.
    #[arg(long)]
    no_pca: bool,
    /// Energy fraction for the embedding dimension.
    #[arg(long, default_value_t = 0.98)]
    embed_energy: f64,
    /// Skip unit-normalization of columns.
    #[arg(long)]
    no_normalize: bool,
    /// Cap on homotopy iterations per point (default: 4x dictionary size).
    #[arg(long)]
    max_iters: Option<usize>,
    /// k-means restarts.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// k-means iteration cap.
    #[arg(long, default_value_t = 100)]
    kmeans_iters: usize,
    /// Seed for splits and k-means.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelParams {
    fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            lambda: self.lambda,
            delta: self.delta,
            max_iters: self.max_iters,
            pca_energy: (!self.no_pca).then_some(self.pca_energy),
            embed_energy: self.embed_energy,
            normalize: !self.no_normalize,
            seed: self.seed,
            kmeans_restarts: self.restarts,
            kmeans_max_iters: self.kmeans_iters,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ModelParams,
    /// Fit on a random subset of this many points.
    #[arg(long)]
    in_sample: Option<usize>,
    /// Where to write the fitted model (sidecar goes to MODEL.json).
    #[arg(long)]
    model: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for debug CSV dumps of the code and affinity matrices.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendArgs {
    /// Fitted model file from `fit`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Output labels file, one integer per line.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ModelParams,
    /// In-sample size of the benchmark split (default: half).
    #[arg(long)]
    in_sample: Option<usize>,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-7, 1e-6, 1e-5])]
    lambdas: Vec<f64>,
    /// Comma-separated delta grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-3, 1e-2, 1e-1])]
    deltas: Vec<f64>,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    kind: SynthKind,
}

#[derive(Subcommand)]
enum SynthKind {
    /// Points on a union of random linear subspaces, unit-normalized.
    Subspaces {
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 30)]
        ambient_dim: usize,
        #[arg(long, default_value_t = 4)]
        subspace_dim: usize,
        #[arg(long, default_value_t = 50)]
        per_cluster: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two trefoil-knot curves in R^3.
    Trefoil {
        #[arg(long, default_value_t = 200)]
        per_knot: usize,
        /// Center-to-center offset; defaults to 3x the knot radius.
        #[arg(long, default_value_t = 3.0 * dataset::TREFOIL_RADIUS)]
        separation: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Extend(args) => cmd_extend(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Loads the dataset plus a flag saying whether real labels are available.
fn load_dataset(args: &DataArgs) -> Result<(LabeledDataset, bool)> {
    if args.labeled && args.labels.is_some() {
        bail!("--labeled and --labels are mutually exclusive");
    }
    let format = if args.labeled {
        CsvFormat::Labeled
    } else {
        CsvFormat::Plain
    };
    let mut ds = dataset::load_matrix(&args.data, format)
        .with_context(|| format!("cannot load {}", args.data.display()))?;

    let mut has_labels = args.labeled;
    if let Some(labels_path) = &args.labels {
        let labels = read_labels_file(labels_path)?;
        if labels.len() != ds.count() {
            bail!(
                "{} labels in {} for {} points",
                labels.len(),
                labels_path.display(),
                ds.count()
            );
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        ds = LabeledDataset {
            points: ds.points,
            labels,
            k,
        };
        has_labels = true;
    }
    Ok((ds, has_labels))
}

fn read_labels_file(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .with_context(|| format!("bad label '{l}' in {}", path.display()))
        })
        .collect()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn metric_pair(pred: &[usize], truth: &[usize]) -> Result<MetricsSection> {
    Ok(MetricsSection {
        accuracy: Some(metrics::accuracy(pred, truth)?),
        nmi: Some(metrics::nmi(pred, truth)?),
    })
}

fn empty_metrics() -> MetricsSection {
    MetricsSection {
        accuracy: None,
        nmi: None,
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let (full, has_labels) = load_dataset(&args.data)?;

    let train = match args.in_sample {
        Some(count) => {
            let spec = SplitSpec {
                in_sample_count: count,
                seed: args.params.seed,
            };
            dataset::split(&full, &spec)?.0
        }
        None => full,
    };

    let config = args.params.pipeline_config();
    let (model, artifacts) = pipeline::fit(&train.points, &config)?;

    if let Some(dir) = &args.dump_graph {
        dump_graph(dir, &artifacts)?;
    }

    model_io::write_model(&args.model, &model)?;

    let in_metrics = if has_labels {
        metric_pair(&artifacts.assignment.labels, &train.labels)?
    } else {
        empty_metrics()
    };

    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit".into(),
        params: ParamsSection {
            k: config.k,
            lambda: config.lambda,
            delta: config.delta,
            pca_energy: config.pca_energy,
            embed_energy: config.embed_energy,
            normalize: config.normalize,
            in_sample: args.in_sample,
            seed: config.seed,
        },
        counts: CountsSection {
            in_sample: train.count(),
            out_sample: None,
            feature_dim: train.points.feature_dim(),
            reduced_dim: model.projection.feature_dim(),
            embed_dim: model.projection.embed_dim(),
        },
        in_sample: in_metrics,
        timings: TimingsSection {
            sparse_coding_s: artifacts.timings.sparse_coding,
            eigendecomposition_s: artifacts.timings.eigendecomposition,
            kmeans_s: artifacts.timings.kmeans,
            projection_s: artifacts.timings.projection,
            extension_s: None,
        },
        solver: SolverSection {
            converged_columns: artifacts
                .codes
                .convergence_flags()
                .iter()
                .filter(|&&c| c)
                .count(),
            total_columns: artifacts.codes.point_count(),
        },
    };

    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }

    println!(
        "fit: {} points, embed dim {}, model written to {}",
        report.counts.in_sample,
        report.counts.embed_dim,
        args.model.display()
    );
    if let Some(acc) = report.in_sample.accuracy {
        println!(
            "in-sample accuracy {:.4}, nmi {:.4}",
            acc,
            report.in_sample.nmi.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn dump_graph(dir: &Path, artifacts: &FitArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("codes.csv"), artifacts.codes.coefficients())?;
    write_matrix_csv(&dir.join("affinity.csv"), artifacts.graph.affinity())?;
    Ok(())
}

fn write_matrix_csv(path: &Path, m: &issc_core::nalgebra::DMatrix<f64>) -> Result<()> {
    let mut text = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&format!("{}", m[(i, j)]));
        }
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn cmd_extend(args: ExtendArgs) -> Result<()> {
    // an empty data file vacuously yields an empty labels file
    let raw = std::fs::read_to_string(&args.data.data)
        .with_context(|| format!("cannot read {}", args.data.data.display()))?;
    if raw.trim().is_empty() {
        std::fs::write(&args.out, "")
            .with_context(|| format!("cannot write {}", args.out.display()))?;
        if let Some(report_path) = &args.report {
            let report = ExtendReport {
                schema_version: SCHEMA_VERSION,
                command: "extend".into(),
                points: 0,
                extension_s: 0.0,
                points_per_second: None,
                out_sample: empty_metrics(),
            };
            write_json(report_path, &report)?;
        }
        println!("extend: 0 points");
        return Ok(());
    }

    let model = model_io::read_model(&args.model)?;
    let (ds, has_labels) = load_dataset(&args.data)?;

    let (result, seconds) = pipeline::extend_fitted(&model, &ds.points)?;

    let mut text = String::with_capacity(result.labels.len() * 2);
    for label in &result.labels {
        text.push_str(&label.to_string());
        text.push('\n');
    }
    std::fs::write(&args.out, text)
        .with_context(|| format!("cannot write {}", args.out.display()))?;

    let out_metrics = if has_labels {
        metric_pair(&result.labels, &ds.labels)?
    } else {
        empty_metrics()
    };

    let report = ExtendReport {
        schema_version: SCHEMA_VERSION,
        command: "extend".into(),
        points: ds.count(),
        extension_s: seconds,
        points_per_second: (seconds > 0.0).then(|| ds.count() as f64 / seconds),
        out_sample: out_metrics,
    };
    if let Some(report_path) = &args.report {
        write_json(report_path, &report)?;
    }

    println!(
        "extend: {} points in {:.4}s ({})",
        ds.count(),
        seconds,
        report
            .points_per_second
            .map_or("n/a".to_string(), |r| format!("{r:.0} points/s"))
    );
    if let Some(acc) = report.out_sample.accuracy {
        println!(
            "out-of-sample accuracy {:.4}, nmi {:.4}",
            acc,
            report.out_sample.nmi.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let (full, has_labels) = load_dataset(&args.data)?;
    if !has_labels {
        bail!("bench needs ground-truth labels (--labeled or --labels)");
    }

    let in_count = args.in_sample.unwrap_or(full.count() / 2);
    let spec = SplitSpec {
        in_sample_count: in_count,
        seed: args.params.seed,
    };
    let (train, test) = dataset::split(&full, &spec)?;

    let mut rows: Vec<BenchRow> = Vec::new();
    for &lambda in &args.lambdas {
        for &delta in &args.deltas {
            let mut config = args.params.pipeline_config();
            config.lambda = lambda;
            config.delta = delta;
            rows.push(run_issc_cell(&config, &train, &test, lambda, delta));
        }
    }

    // best issc row by out-of-sample accuracy, matching the model-selection
    // rule of tuning for best accuracy
    let best_idx = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.out_accuracy.map(|a| (i, a)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| i);
    if let Some(i) = best_idx {
        rows[i].best = true;
    }

    rows.push(run_baseline_cell(&args.params.pipeline_config(), &train, &test));

    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        command: "bench".into(),
        k: args.params.k,
        lambdas: args.lambdas.clone(),
        deltas: args.deltas.clone(),
        in_sample: train.count(),
        out_sample: test.count(),
        seed: args.params.seed,
        rows,
    };

    print_bench_table(&report);
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn run_issc_cell(
    config: &PipelineConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    lambda: f64,
    delta: f64,
) -> BenchRow {
    let mut row = BenchRow {
        method: "issc".into(),
        lambda: Some(lambda),
        delta: Some(delta),
        in_accuracy: None,
        in_nmi: None,
        out_accuracy: None,
        out_nmi: None,
        seconds: None,
        best: false,
        error: None,
    };

    let outcome = (|| -> issc_core::Result<(f64, f64, f64, f64, f64)> {
        let (model, artifacts) = pipeline::fit(&train.points, config)?;
        let (result, ext_s) = pipeline::extend_fitted(&model, &test.points)?;
        let t = &artifacts.timings;
        let total = t.sparse_coding + t.eigendecomposition + t.kmeans + t.projection + ext_s;
        Ok((
            metrics::accuracy(&artifacts.assignment.labels, &train.labels)?,
            metrics::nmi(&artifacts.assignment.labels, &train.labels)?,
            metrics::accuracy(&result.labels, &test.labels)?,
            metrics::nmi(&result.labels, &test.labels)?,
            total,
        ))
    })();

    match outcome {
        Ok((in_acc, in_nmi, out_acc, out_nmi, seconds)) => {
            row.in_accuracy = Some(in_acc);
            row.in_nmi = Some(in_nmi);
            row.out_accuracy = Some(out_acc);
            row.out_nmi = Some(out_nmi);
            row.seconds = Some(seconds);
        }
        Err(err) => row.error = Some(err.to_string()),
    }
    row
}

fn run_baseline_cell(
    config: &PipelineConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> BenchRow {
    let mut row = BenchRow {
        method: "kmeans".into(),
        lambda: None,
        delta: None,
        in_accuracy: None,
        in_nmi: None,
        out_accuracy: None,
        out_nmi: None,
        seconds: None,
        best: false,
        error: None,
    };

    match pipeline::kmeans_baseline(&train.points, Some(&test.points), config) {
        Ok(baseline) => {
            row.in_accuracy = metrics::accuracy(&baseline.in_labels, &train.labels).ok();
            row.in_nmi = metrics::nmi(&baseline.in_labels, &train.labels).ok();
            if let Some(out_labels) = &baseline.out_labels {
                row.out_accuracy = metrics::accuracy(out_labels, &test.labels).ok();
                row.out_nmi = metrics::nmi(out_labels, &test.labels).ok();
            }
            row.seconds = Some(baseline.seconds);
        }
        Err(err) => row.error = Some(err.to_string()),
    }
    row
}

fn print_bench_table(report: &BenchReport) {
    println!(
        "bench: k={}, {} in-sample / {} out-of-sample, seed {}",
        report.k, report.in_sample, report.out_sample, report.seed
    );
    println!(
        "{:<8} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>9}  note",
        "method", "lambda", "delta", "in-acc", "in-nmi", "out-acc", "out-nmi", "time(s)"
    );
    let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let fmt_param = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.0e}"));
    for row in &report.rows {
        let note = match (&row.error, row.best) {
            (Some(err), _) => format!("failed: {err}"),
            (None, true) => "best".to_string(),
            (None, false) => String::new(),
        };
        println!(
            "{:<8} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>9}  {}",
            row.method,
            fmt_param(row.lambda),
            fmt_param(row.delta),
            fmt_opt(row.in_accuracy),
            fmt_opt(row.in_nmi),
            fmt_opt(row.out_accuracy),
            fmt_opt(row.out_nmi),
            row.seconds.map_or("-".to_string(), |s| format!("{s:.3}")),
            note
        );
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let (ds, out) = match args.kind {
        SynthKind::Subspaces {
            clusters,
            ambient_dim,
            subspace_dim,
            per_cluster,
            noise,
            seed,
            out,
        } => (
            dataset::gen_union_of_subspaces(
                clusters,
                ambient_dim,
                subspace_dim,
                per_cluster,
                noise,
                seed,
            )?,
            out,
        ),
        SynthKind::Trefoil {
            per_knot,
            separation,
            noise,
            seed,
            out,
        } => (
            dataset::gen_trefoil_knots(per_knot, separation, noise, seed)?,
            out,
        ),
    };

    write_labeled_csv(&out, &ds)?;
    println!(
        "synth: {} points, {} features, {} classes -> {}",
        ds.count(),
        ds.points.feature_dim(),
        ds.k,
        out.display()
    );
    Ok(())
}

fn write_labeled_csv(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let m = ds.points.matrix();
    let mut text = String::new();
    for j in 0..ds.count() {
        for i in 0..m.nrows() {
            text.push_str(&format!("{},", m[(i, j)]));
        }
        text.push_str(&ds.labels[j].to_string());
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
