//! Frozen-embedding evaluation: seeded label splits, a multinomial logistic
//! probe, classification metrics, and the three-arm augmentation ablation.

use std::fmt;
use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::augment::{self, AugmentError, MaterializeMode};
use crate::encoder::{self, EncoderError, TrainConfig};
use crate::hetgraph::{self, GraphError, HeteroGraph, MetaPathView};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("graph has no labels")]
    NoLabels,
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("class {class} has {available} labeled nodes, need more than {needed}")]
    ClassTooSmall {
        class: usize,
        available: usize,
        needed: usize,
    },
    #[error("class {0} absent from the training split")]
    ClassAbsentFromTrain(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub labels_per_class: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(labels_per_class: usize, seed: u64) -> Self {
        SplitSpec {
            labels_per_class,
            n_val: 1000,
            n_test: 1000,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// set when val/test were shrunk to fit a small graph
    pub scaled: bool,
}

impl Split {
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

/// `labels_per_class` training nodes per class, then disjoint val/test sets of
/// the requested sizes. When the labeled nodes left after training cannot
/// cover both, val and test each get `floor(0.2 * labeled)` nodes (capped at
/// half of what is left).
pub fn make_split(labels: &[Option<usize>], spec: &SplitSpec) -> Result<Split> {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(EvalError::TooFewClasses(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for c in 0..k {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Some(c)).collect();
        if members.len() <= spec.labels_per_class {
            return Err(EvalError::ClassTooSmall {
                class: c,
                available: members.len(),
                needed: spec.labels_per_class,
            });
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..spec.labels_per_class]);
        rest.extend_from_slice(&members[spec.labels_per_class..]);
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let labeled = labels.iter().flatten().count();
    let (n_val, n_test, scaled) = if rest.len() >= spec.n_val + spec.n_test {
        (spec.n_val, spec.n_test, false)
    } else {
        let m = (labeled / 5).min(rest.len() / 2);
        (m, m, true)
    };
    train.sort_unstable();
    let mut val = rest[..n_val].to_vec();
    let mut test = rest[n_val..n_val + n_test].to_vec();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        val,
        test,
        scaled,
    })
}

pub const PROBE_L2: f64 = 1e-4;
pub const PROBE_TOL: f64 = 1e-6;
pub const PROBE_MAX_ITERS: usize = 2000;

/// Multinomial logistic regression with an intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    /// `(d + 1) x k`, last row is the intercept
    pub weights: Array2<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn with_intercept(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::ones((n, d + 1));
    out.slice_mut(ndarray::s![.., ..d]).assign(x);
    out
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Largest eigenvalue of the PSD matrix `m` by power iteration.
fn top_eigenvalue(m: &Array2<f64>) -> f64 {
    let d = m.nrows();
    let mut v = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = m.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w.dot(&v);
        v = w / norm;
        if (next - lambda).abs() <= 1e-10 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // a small margin covers power-iteration underestimates
    lambda * 1.01
}

impl LinearProbe {
    /// Full-batch gradient descent on mean cross-entropy plus
    /// `PROBE_L2 / 2 * ||W||²`, step `1/L` with `L` bounding the Hessian.
    pub fn fit(x: &Array2<f64>, y: &[usize], k: usize) -> Result<Self> {
        if x.nrows() != y.len() || x.nrows() == 0 {
            return Err(EvalError::Shape(format!("{} rows, {} labels", x.nrows(), y.len())));
        }
        for c in 0..k {
            if !y.contains(&c) {
                return Err(EvalError::ClassAbsentFromTrain(c));
            }
        }
        let xb = with_intercept(x);
        let n = xb.nrows() as f64;
        let gram = xb.t().dot(&xb) / n;
        let step = 1.0 / (0.5 * top_eigenvalue(&gram) + PROBE_L2);
        let mut onehot = Array2::zeros((xb.nrows(), k));
        for (i, &c) in y.iter().enumerate() {
            onehot[[i, c]] = 1.0;
        }
        let mut w = Array2::zeros((xb.ncols(), k));
        let mut grad_norm = f64::INFINITY;
        let mut iterations = 0;
        while iterations < PROBE_MAX_ITERS {
            let mut p = xb.dot(&w);
            softmax_rows(&mut p);
            let g = xb.t().dot(&(p - &onehot)) / n + &w * PROBE_L2;
            grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if grad_norm <= PROBE_TOL {
                break;
            }
            w = w - g * step;
            iterations += 1;
        }
        Ok(LinearProbe {
            weights: w,
            iterations,
            grad_norm,
        })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut p = with_intercept(x).dot(&self.weights);
        softmax_rows(&mut p);
        p
    }
}

pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect()
}

/// Scores of one probe run on the test nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub auc: f64,
    /// classes without test nodes, left out of the macro averages
    pub absent_classes: Vec<usize>,
}

/// ROC-AUC of `scores` for binary `positive` labels; tied scores share
/// their average rank.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    let rank_sum: f64 = (0..scores.len()).filter(|&i| positive[i]).map(|i| ranks[i]).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Macro-F1 and one-vs-rest macro AUC over classes present in `truth`;
/// micro-F1 equals accuracy.
pub fn compute_metrics(probs: &Array2<f64>, predictions: &[usize], truth: &[usize]) -> Result<Metrics> {
    let n = truth.len();
    if predictions.len() != n || probs.nrows() != n {
        return Err(EvalError::Shape(format!(
            "{} probability rows, {} predictions, {} labels",
            probs.nrows(),
            predictions.len(),
            n
        )));
    }
    let k = probs.ncols();
    let mut f1s = Vec::new();
    let mut aucs = Vec::new();
    let mut absent = Vec::new();
    for c in 0..k {
        let support = truth.iter().filter(|&&t| t == c).count();
        if support == 0 {
            absent.push(c);
            continue;
        }
        let tp = (0..n).filter(|&i| truth[i] == c && predictions[i] == c).count() as f64;
        let fp = (0..n).filter(|&i| truth[i] != c && predictions[i] == c).count() as f64;
        let fn_ = support as f64 - tp;
        f1s.push(if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) });
        let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        if let Some(a) = binary_auc(&probs.column(c).to_vec(), &pos) {
            aucs.push(a);
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let correct = (0..n).filter(|&i| predictions[i] == truth[i]).count();
    Ok(Metrics {
        macro_f1: mean(&f1s),
        micro_f1: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        auc: mean(&aucs),
        absent_classes: absent,
    })
}

fn rows_of(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// Fits the probe on the training nodes of `split` and scores its test nodes.
pub fn evaluate_split(embeddings: &Array2<f64>, labels: &[Option<usize>], split: &Split) -> Result<Metrics> {
    if embeddings.nrows() != labels.len() {
        return Err(EvalError::Shape(format!("{} embeddings, {} labels", embeddings.nrows(), labels.len())));
    }
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let y = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&i| labels[i].expect("split nodes are labeled")).collect() };
    let probe = LinearProbe::fit(&rows_of(embeddings, &split.train), &y(&split.train), k)?;
    let probs = probe.predict_proba(&rows_of(embeddings, &split.test));
    compute_metrics(&probs, &argmax_rows(&probs), &y(&split.test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<f64>,
}

impl Summary {
    /// Mean and population standard deviation.
    pub fn of(runs: Vec<f64>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = runs.iter().sum::<f64>() / n;
        let var = runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Summary {
            mean,
            std: var.sqrt(),
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub arm: String,
    pub split_size: usize,
    pub macro_f1: Summary,
    pub micro_f1: Summary,
    pub auc: Summary,
    /// split fingerprints per run
    pub split_hashes: Vec<u64>,
    pub scaled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// learned schemes
    Shcl,
    /// original views on both sides
    ShclS,
    /// unoptimized uniform random schemes
    ShclL,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Shcl, Arm::ShclS, Arm::ShclL];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Shcl => "shcl",
            Arm::ShclS => "shcl-s",
            Arm::ShclL => "shcl-l",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub train: TrainConfig,
    pub runs: usize,
    pub split_sizes: Vec<usize>,
    pub n_val: usize,
    pub n_test: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train: TrainConfig::default(),
            runs: 10,
            split_sizes: vec![20, 40, 60],
            n_val: 1000,
            n_test: 1000,
        }
    }
}

impl EvalConfig {
    fn split_spec(&self, size: usize, run: usize) -> SplitSpec {
        SplitSpec {
            labels_per_class: size,
            n_val: self.n_val,
            n_test: self.n_test,
            seed: self.train.seed.wrapping_add(run as u64),
        }
    }
}

/// Scores fixed embeddings over every split size and run.
pub fn evaluate_embeddings(arm: &str, embeddings: &Array2<f64>, labels: &[Option<usize>], cfg: &EvalConfig) -> Result<Vec<MetricsReport>> {
    cfg.split_sizes
        .iter()
        .map(|&size| {
            let mut rows = Vec::with_capacity(cfg.runs);
            let mut hashes = Vec::with_capacity(cfg.runs);
            let mut scaled = false;
            for r in 0..cfg.runs {
                let split = make_split(labels, &cfg.split_spec(size, r))?;
                scaled |= split.scaled;
                hashes.push(split.fingerprint());
                rows.push(evaluate_split(embeddings, labels, &split)?);
            }
            Ok(report_from(arm, size, &rows, hashes, scaled))
        })
        .collect()
}

fn report_from(arm: &str, size: usize, rows: &[Metrics], split_hashes: Vec<u64>, scaled: bool) -> MetricsReport {
    MetricsReport {
        arm: arm.to_string(),
        split_size: size,
        macro_f1: Summary::of(rows.iter().map(|m| m.macro_f1).collect()),
        micro_f1: Summary::of(rows.iter().map(|m| m.micro_f1).collect()),
        auc: Summary::of(rows.iter().map(|m| m.auc).collect()),
        split_hashes,
        scaled,
    }
}

fn labels_of(g: &HeteroGraph) -> Result<&[Option<usize>]> {
    g.labels.as_deref().ok_or(EvalError::NoLabels)
}

/// The two augmented view sets of one arm.
pub fn arm_views(
    arm: Arm,
    views: &[MetaPathView],
    learned: &[(augment::AugmentationScheme, augment::AugmentationScheme)],
    cfg: &TrainConfig,
) -> Result<(Vec<MetaPathView>, Vec<MetaPathView>)> {
    let mut g1 = Vec::with_capacity(views.len());
    let mut g2 = Vec::with_capacity(views.len());
    for (k, v) in views.iter().enumerate() {
        let (a, b) = match arm {
            Arm::ShclS => (v.clone(), v.clone()),
            Arm::Shcl => {
                let (s1, s2) = &learned[k];
                augment::materialize_views(v, s1, s2, cfg.aug.mode, cfg.seed)?
            }
            Arm::ShclL => {
                let (s1, s2) = augment::random_schemes(v, cfg.seed.wrapping_add(k as u64), cfg.aug.literal_eq7)?;
                augment::materialize_views(v, &s1, &s2, MaterializeMode::Deterministic, cfg.seed)?
            }
        };
        g1.push(a);
        g2.push(b);
    }
    Ok((g1, g2))
}

/// Per-epoch training losses of one (arm, run) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTrace {
    pub arm: Arm,
    pub run: usize,
    pub losses: Vec<f64>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    pub reports: Vec<MetricsReport>,
    pub traces: Vec<LossTrace>,
}

/// Trains and scores the three arms. Run `r` uses encoder seed and split seed
/// `cfg.train.seed + r` in every arm, so the arms differ only in their views.
pub fn run_ablation(g: &HeteroGraph, cfg: &EvalConfig) -> Result<AblationOutcome> {
    let labels = labels_of(g)?;
    let views = hetgraph::build_all_views(g)?;
    let learned = augment::learn_all(&views, &cfg.train.aug)?;

    let jobs: Vec<(Arm, usize)> = Arm::ALL.iter().flat_map(|&a| (0..cfg.runs).map(move |r| (a, r))).collect();
    let trained: Vec<(Array2<f64>, LossTrace)> = jobs
        .par_iter()
        .map(|&(arm, r)| -> Result<(Array2<f64>, LossTrace)> {
            let tc = TrainConfig {
                seed: cfg.train.seed.wrapping_add(r as u64),
                ..cfg.train.clone()
            };
            let (g1, g2) = arm_views(arm, &views, &learned, &tc)?;
            let out = encoder::train(g, &views, &g1, &g2, &tc)?;
            log::info!("{arm} run {r}: {} epochs, final loss {:?}", out.losses.len(), out.losses.last());
            let trace = LossTrace {
                arm,
                run: r,
                losses: out.losses,
                best_epoch: out.best_epoch,
            };
            Ok((out.embeddings, trace))
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for arm in Arm::ALL {
        for &size in &cfg.split_sizes {
            let mut rows = Vec::with_capacity(cfg.runs);
            let mut hashes = Vec::with_capacity(cfg.runs);
            let mut scaled = false;
            for r in 0..cfg.runs {
                let split = make_split(labels, &cfg.split_spec(size, r))?;
                scaled |= split.scaled;
                hashes.push(split.fingerprint());
                let idx = jobs.iter().position(|&j| j == (arm, r)).expect("job exists");
                rows.push(evaluate_split(&trained[idx].0, labels, &split)?);
            }
            log::info!("{arm} split {size}: split hashes {hashes:x?}");
            reports.push(report_from(arm.name(), size, &rows, hashes, scaled));
        }
    }
    Ok(AblationOutcome {
        reports,
        traces: trained.into_iter().map(|(_, t)| t).collect(),
    })
}

/// TSV of loss traces: `arm`, `run`, `epoch` (1-based), `loss`.
pub fn format_loss_traces(traces: &[LossTrace], header: Option<&str>) -> String {
    let mut out = header.map(|h| format!("# {h}\n")).unwrap_or_default();
    out.push_str("arm\trun\tepoch\tloss\n");
    for t in traces {
        for (e, l) in t.losses.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{l:.9}", t.arm, t.run, e + 1).unwrap();
        }
    }
    out
}

/// Probe on the raw (or identity) target features.
pub fn raw_feature_baseline(g: &HeteroGraph, cfg: &EvalConfig) -> Result<Vec<MetricsReport>> {
    evaluate_embeddings("raw", &g.target_features(), labels_of(g)?, cfg)
}

pub const REPORT_COLUMNS: &str = "arm\tsplit_size\tmetric\tmean\tstd";

/// TSV with one summary row per (arm, split, metric) followed by one row per
/// run, whose metric column reads `name[run=r]` and whose std column is 0.
pub fn format_report(reports: &[MetricsReport], header: Option<&str>) -> String {
    let mut out = header.map(|h| format!("# {h}\n")).unwrap_or_default();
    for r in reports.iter().filter(|r| r.scaled) {
        writeln!(out, "# {} split {}: val/test scaled to the graph size", r.arm, r.split_size).unwrap();
    }
    writeln!(out, "{REPORT_COLUMNS}").unwrap();
    let metrics = |r: &MetricsReport| [("macro_f1", r.macro_f1.clone()), ("micro_f1", r.micro_f1.clone()), ("auc", r.auc.clone())];
    for r in reports {
        for (name, s) in metrics(r) {
            writeln!(out, "{}\t{}\t{name}\t{:.6}\t{:.6}", r.arm, r.split_size, s.mean, s.std).unwrap();
        }
    }
    for r in reports {
        for (name, s) in metrics(r) {
            for (k, v) in s.runs.iter().enumerate() {
                writeln!(out, "{}\t{}\t{name}[run={k}]\t{v:.6}\t0.000000", r.arm, r.split_size).unwrap();
            }
        }
    }
    out
}
