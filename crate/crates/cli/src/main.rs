use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hmog::pipeline::{
    cross_validate, data::numbered, default_synthetic_spec, fit, gen_synthetic, load_csv, parse_grid, read_model_json,
    write_json, write_matrix_csv, write_model_json, write_trajectory_csv, Dataset, FitConfig, FittedModel,
    Method, ModelFile,
};
use hmog::AdamConfig;

#[derive(Parser)]
#[command(name = "hmog", version, about = "Hierarchical mixtures of Gaussians: training and inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it as JSON
    Fit(FitArgs),
    /// Cross-validate held-out log-likelihood over a grid of (m, k)
    Cv(CvArgs),
    /// Sample a synthetic dataset from a ground-truth model
    Synth(SynthArgs),
    /// Write latent projections of each row
    Project(InferArgs),
    /// Write cluster probabilities and hard assignments of each row
    Classify(InferArgs),
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: hmog::Error| e.to_string())
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Iterations of each two-stage EM stage
    #[arg(long, default_value_t = 100)]
    stage_iters: usize,
    /// Iterations of unified EM (hmog methods only)
    #[arg(long, default_value_t = 800)]
    hmog_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    adam_lr: f64,
    #[arg(long, default_value_t = 2000)]
    adam_steps: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self, latent_dim: usize, clusters: usize) -> FitConfig {
        FitConfig {
            stage1_iters: self.stage_iters,
            stage2_iters: self.stage_iters,
            hmog_iters: self.hmog_iters,
            adam: AdamConfig {
                learning_rate: self.adam_lr,
                steps: self.adam_steps,
                ..AdamConfig::default()
            },
            restarts: self.restarts,
            ..FitConfig::new(self.method, latent_dim, clusters, self.seed)
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column holding ground-truth labels; excluded from the features
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long)]
    latent_dim: usize,
    #[arg(long)]
    clusters: usize,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write the train log-likelihood after every iteration as CSV
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Also write the full training report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    label_col: Option<String>,
    /// Comma-separated m:k pairs, e.g. "2:2,3:3"
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    train: TrainArgs,
    /// Table of mean held-out log-likelihood, one row per m and one column per k
    #[arg(long)]
    out: PathBuf,
    /// Also write per-cell mean, standard deviation and fold scores
    #[arg(long)]
    detail: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    latent_dim: usize,
    #[arg(long)]
    obs_dim: usize,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    /// Ground-truth model JSON; the built-in default is used otherwise
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Column to drop from the input before inference
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn load(path: &Path, label_col: Option<&str>) -> Result<Dataset> {
    load_csv(path, label_col).with_context(|| format!("reading {}", path.display()))
}

fn run_fit(args: FitArgs) -> Result<()> {
    let data = load(&args.input, args.label_col.as_deref())?;
    let cfg = args.train.config(args.latent_dim, args.clusters);
    let (model, report) = fit(&data.points, &cfg)?;
    let file = ModelFile::from_hmog(cfg.method, &model.to_hmog()?, cfg.seed);
    write_model_json(&file, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.trajectory {
        write_trajectory_csv(&report.trajectory, path)?;
    }
    if let Some(path) = &args.report {
        write_json(&report, path)?;
    }
    eprintln!(
        "{}: restart {} of {} selected, train log-likelihood {:.6} ({:.2?})",
        cfg.method,
        report.selected_restart + 1,
        cfg.restarts,
        report.final_log_likelihood,
        report.wall_time
    );
    Ok(())
}

fn run_cv(args: CvArgs) -> Result<()> {
    let data = load(&args.input, args.label_col.as_deref())?;
    let grid = parse_grid(&args.grid)?;
    let cfg = args.train.config(grid[0].0, grid[0].1);
    let report = cross_validate(&data, &cfg, args.folds, &grid)?;
    report.write_grid_csv(&args.out)?;
    if let Some(path) = &args.detail {
        report.write_detail_csv(path)?;
    }
    for c in &report.cells {
        eprintln!("m={} k={}: {:.4} ± {:.4}", c.latent_dim, c.clusters, c.mean, c.sd);
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => {
            let file = read_model_json(path).with_context(|| format!("reading {}", path.display()))?;
            let d = file.dims;
            if (d.n, d.m, d.k) != (args.obs_dim, args.latent_dim, args.clusters) {
                bail!(
                    "spec has dimensions n={}, m={}, k={} but n={}, m={}, k={} were requested",
                    d.n,
                    d.m,
                    d.k,
                    args.obs_dim,
                    args.latent_dim,
                    args.clusters
                );
            }
            file.to_hmog()?
        }
        None => default_synthetic_spec(args.obs_dim, args.latent_dim, args.clusters)?,
    };
    let data = gen_synthetic(&spec, args.count, args.seed)?;
    let labels = data.labels.as_deref().unwrap_or_default();
    write_matrix_csv(&args.out, &numbered("x", args.obs_dim), &data.points, Some(("label", labels)))?;
    Ok(())
}

fn load_model(args: &InferArgs) -> Result<(FittedModel, Dataset)> {
    let file = read_model_json(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let model = FittedModel::from_hmog(file.method, file.to_hmog()?)?;
    let data = load(&args.input, args.label_col.as_deref())?;
    if data.dim() != file.dims.n {
        bail!("input has {} columns but the model expects {}", data.dim(), file.dims.n);
    }
    Ok((model, data))
}

fn run_project(args: InferArgs) -> Result<()> {
    let (model, data) = load_model(&args)?;
    let rows = data.points.iter().map(|x| model.project(x)).collect::<hmog::Result<Vec<_>>>()?;
    let m = rows.first().map_or(0, |r| r.len());
    write_matrix_csv(&args.out, &numbered("y", m), &rows, None)?;
    Ok(())
}

fn run_classify(args: InferArgs) -> Result<()> {
    let (model, data) = load_model(&args)?;
    let rows = data.points.iter().map(|x| model.classify(x)).collect::<hmog::Result<Vec<_>>>()?;
    let clusters: Vec<usize> = rows.iter().map(|p| p.imax() + 1).collect();
    write_matrix_csv(&args.out, &numbered("p", model.num_components()), &rows, Some(("cluster", &clusters)))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(a) => run_fit(a),
        Command::Cv(a) => run_cv(a),
        Command::Synth(a) => run_synth(a),
        Command::Project(a) => run_project(a),
        Command::Classify(a) => run_classify(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn methods_accept_hyphenated_names() {
        assert_eq!(parse_method("two-stage-pca").unwrap(), Method::TwoStagePca);
        assert_eq!(parse_method("hmog-fa").unwrap(), Method::HmogFa);
        assert!(parse_method("kmeans").is_err());
    }
}
