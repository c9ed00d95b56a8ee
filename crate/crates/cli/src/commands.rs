use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hetspec::augment::{self, AugmentError, AugmentationScheme};
use hetspec::encoder::{self, EncoderError};
use hetspec::evalsuite::{self, EvalError};
use hetspec::hetgraph::{self, GraphError, HeteroGraph, MetaPathView};
use hetspec::spectral::{self, SpectralError};
use hetspec::synthgen::{self, SynthError};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing input {}; run `{command}` first", path.display())]
    MissingInput { path: PathBuf, command: &'static str },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const LOSS_FILE: &str = "loss.tsv";
pub const PARAMS_FILE: &str = "params.bin";
pub const REPORT_FILE: &str = "report.tsv";
pub const ABLATION_FILE: &str = "ablation.tsv";
pub const ABLATION_LOSS_FILE: &str = "ablation_losses.tsv";

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).map_err(|source| CliError::Io {
        path: cfg.out.clone(),
        source,
    })?;
    Ok(&cfg.out)
}

fn load_graph(cfg: &RunConfig) -> Result<HeteroGraph> {
    Ok(match &cfg.graph {
        Some(dir) => hetgraph::load_heterograph(dir)?,
        None => synthgen::generate(&cfg.synth)?,
    })
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let g = synthgen::generate(&cfg.synth)?;
    hetgraph::save_heterograph(&g, out_dir(cfg)?, Some(&cfg.header()))?;
    log::info!("wrote synthetic graph to {}", cfg.out.display());
    Ok(())
}

fn trace_file_name(metapath: &str) -> String {
    format!("trace_{metapath}.tsv")
}

/// Loads both checkpoints of `view` when they carry this config's header.
fn reusable(dir: &Path, view: &MetaPathView, cfg: &RunConfig) -> Option<(AugmentationScheme, AugmentationScheme)> {
    let header = format!("# {}", cfg.header());
    for which in [1, 2] {
        let text = fs::read_to_string(dir.join(augment::checkpoint_file_name(&view.metapath.name, which))).ok()?;
        if text.lines().next() != Some(header.as_str()) {
            return None;
        }
    }
    let literal = cfg.eval.train.aug.literal_eq7;
    let s1 = augment::load_checkpoint(dir, view, 1, literal).ok()?;
    let s2 = augment::load_checkpoint(dir, view, 2, literal).ok()?;
    Some((s1, s2))
}

/// Checkpointed schemes for every view, learning only the missing ones.
fn schemes(cfg: &RunConfig, views: &[MetaPathView]) -> Result<Vec<(AugmentationScheme, AugmentationScheme)>> {
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    let mut out = Vec::with_capacity(views.len());
    for view in views {
        let name = &view.metapath.name;
        if let Some(pair) = reusable(dir, view, cfg) {
            log::info!("{name}: reusing checkpointed schemes");
            out.push(pair);
            continue;
        }
        let (s1, s2) = augment::learn_schemes(view, &cfg.eval.train.aug)?;
        for (which, s) in [(1, &s1), (2, &s2)] {
            augment::save_checkpoint(s, dir, which, Some(&header)).map_err(|source| CliError::Io {
                path: dir.join(augment::checkpoint_file_name(name, which)),
                source,
            })?;
        }
        let mut trace = format!("# {header}\nscheme\titeration\tobjective\n");
        for (which, s) in [(1, &s1), (2, &s2)] {
            for (k, v) in s.trace.iter().enumerate() {
                writeln!(trace, "{which}\t{k}\t{v:.12}").unwrap();
            }
        }
        write(&dir.join(trace_file_name(name)), &trace)?;
        log::info!(
            "{name}: objective {:.6} -> {:.6}",
            s1.trace.first().copied().unwrap_or(0.0),
            s1.trace.last().copied().unwrap_or(0.0)
        );
        out.push((s1, s2));
    }
    Ok(out)
}

pub fn augment(cfg: &RunConfig) -> Result<()> {
    let g = load_graph(cfg)?;
    let views = hetgraph::build_all_views(&g)?;
    schemes(cfg, &views)?;
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let g = load_graph(cfg)?;
    let views = hetgraph::build_all_views(&g)?;
    let learned = schemes(cfg, &views)?;
    let tc = &cfg.eval.train;
    let (g1, g2) = evalsuite::arm_views(evalsuite::Arm::Shcl, &views, &learned, tc)?;
    let result = encoder::train(&g, &views, &g1, &g2, tc)?;
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    encoder::save_embeddings(&result.embeddings, &dir.join(EMBEDDINGS_FILE), Some(&header))?;
    encoder::save_params(&result.params, &dir.join(PARAMS_FILE), Some(&header))?;
    let mut curve = format!("# {header}\nepoch\tloss\n");
    for (e, l) in result.losses.iter().enumerate() {
        writeln!(curve, "{}\t{l:.9}", e + 1).unwrap();
    }
    write(&dir.join(LOSS_FILE), &curve)?;
    log::info!(
        "trained {} epochs, kept epoch {:?}",
        result.losses.len(),
        result.best_epoch.map(|e| e + 1)
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let path = cfg.out.join(EMBEDDINGS_FILE);
    if !path.is_file() {
        return Err(CliError::MissingInput { path, command: "train" });
    }
    let z = encoder::load_embeddings(&path)?;
    let g = load_graph(cfg)?;
    let labels = g.labels.as_deref().ok_or(EvalError::NoLabels)?;
    let reports = evalsuite::evaluate_embeddings("shcl", &z, labels, &cfg.eval)?;
    write(
        &out_dir(cfg)?.join(REPORT_FILE),
        &evalsuite::format_report(&reports, Some(&cfg.header())),
    )
}

pub fn ablate(cfg: &RunConfig) -> Result<()> {
    let g = load_graph(cfg)?;
    let outcome = evalsuite::run_ablation(&g, &cfg.eval)?;
    let mut reports = outcome.reports;
    reports.extend(evalsuite::raw_feature_baseline(&g, &cfg.eval)?);
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    write(&dir.join(ABLATION_FILE), &evalsuite::format_report(&reports, Some(&header)))?;
    write(
        &dir.join(ABLATION_LOSS_FILE),
        &evalsuite::format_loss_traces(&outcome.traces, Some(&header)),
    )
}

fn format_eigenvalue(v: f64) -> String {
    let s = format!("{v:.12}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

pub fn spectrum(cfg: &RunConfig) -> Result<()> {
    let g = load_graph(cfg)?;
    let dir = out_dir(cfg)?;
    for view in hetgraph::build_all_views(&g)? {
        let l = spectral::normalized_laplacian(&view.adjacency)?;
        let s = spectral::graph_spectrum(&l)?;
        let mut text = format!("# {}\nindex\teigenvalue\n", cfg.header());
        for (k, v) in s.eigenvalues.iter().enumerate() {
            writeln!(text, "{k}\t{}", format_eigenvalue(*v)).unwrap();
        }
        write(&dir.join(format!("spectrum_{}.tsv", view.metapath.name)), &text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_zero_eigenvalues_print_as_zero() {
        assert_eq!(format_eigenvalue(-1e-17), "0.000000000000");
        assert_eq!(format_eigenvalue(2.0000000000000004), "2.000000000000");
        assert_eq!(format_eigenvalue(-0.5), "-0.500000000000");
    }

    #[test]
    fn config_errors_exit_with_two() {
        let e: CliError = ConfigError::Invalid("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = EvalError::NoLabels.into();
        assert_eq!(e.exit_code(), 1);
    }
}
