//! Parameterized topology augmentation `t(A) = A + C∘B` and the projected
//! gradient optimizer that learns a spectrum-raising scheme `B1` and a
//! spectrum-lowering scheme `B2` for each meta-path view.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::hetgraph::{self, MetaPathView};
use crate::spectral::{self, SpectralError, SpectrumNorm, SpectrumResult};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("adjacency entry ({i},{j}) = {value} outside [0,1]")]
    OutOfRange { i: usize, j: usize, value: f64 },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error("scheme matrix invalid: {0}")]
    InvalidScheme(String),
    #[error("objective {0} needs a second scheme")]
    MissingSecondScheme(ObjectiveKind),
    #[error("view {0} has no edges")]
    EmptyView(String),
    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),
    #[error("scheme learned on {scheme} (n={scheme_n}) applied to view {view} (n={view_n})")]
    Mismatch {
        scheme: String,
        scheme_n: usize,
        view: String,
        view_n: usize,
    },
    #[error("checkpoint {file}: {msg}")]
    Checkpoint { file: String, msg: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Graph(#[from] hetgraph::GraphError),
}

pub type Result<T> = std::result::Result<T, AugmentError>;

/// Which quantity a scheme was optimized for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// spectral distance to the original view
    Single,
    /// spectrum-norm ratio augmented / original (maximized)
    SingleMax,
    /// spectrum-norm ratio augmented / original (minimized)
    SingleMin,
    /// spectral distance between the two augmentations
    Double,
    /// spectrum-norm ratio between the two augmentations
    DoubleMax,
    /// product of the decomposed up/down ratios
    JPair,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Single => "single",
            ObjectiveKind::SingleMax => "single_max",
            ObjectiveKind::SingleMin => "single_min",
            ObjectiveKind::Double => "double",
            ObjectiveKind::DoubleMax => "double_max",
            ObjectiveKind::JPair => "j_pair",
        }
    }

    fn needs_pair(self) -> bool {
        matches!(
            self,
            ObjectiveKind::Double | ObjectiveKind::DoubleMax | ObjectiveKind::JPair
        )
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "single" => ObjectiveKind::Single,
            "single_max" => ObjectiveKind::SingleMax,
            "single_min" => ObjectiveKind::SingleMin,
            "double" => ObjectiveKind::Double,
            "double_max" => ObjectiveKind::DoubleMax,
            "j_pair" => ObjectiveKind::JPair,
            other => return Err(format!("unknown objective {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaterializeMode {
    #[default]
    Deterministic,
    Bernoulli,
}

impl FromStr for MaterializeMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "deterministic" => Ok(MaterializeMode::Deterministic),
            "bernoulli" => Ok(MaterializeMode::Bernoulli),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Settings of the scheme optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub lr: f64,
    pub iterations: usize,
    /// `JPair`, `Single`, `Double` or `DoubleMax`.
    pub objective: ObjectiveKind,
    pub norm: SpectrumNorm,
    /// Caps `sum |B_ij|` at this fraction of the number of positive entries of `A`.
    pub budget_fraction: Option<f64>,
    pub mode: MaterializeMode,
    /// Use `C_ij = A_ij` on existing edges instead of the deleting `-A_ij`.
    pub literal_eq7: bool,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            lr: 0.1,
            iterations: 50,
            objective: ObjectiveKind::JPair,
            norm: SpectrumNorm::L2,
            budget_fraction: None,
            mode: MaterializeMode::Deterministic,
            literal_eq7: false,
            seed: 0,
        }
    }
}

/// A learned (or fixed) perturbation matrix for one meta-path view.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationScheme {
    pub metapath: String,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
    pub objective_kind: ObjectiveKind,
    /// Objective value before the first step and after every iteration.
    pub trace: Vec<f64>,
    pub literal_eq7: bool,
}

impl AugmentationScheme {
    /// A scheme with `B = 0` (the identity augmentation).
    pub fn zero(view: &MetaPathView, kind: ObjectiveKind, literal_eq7: bool) -> Result<Self> {
        let n = view.n();
        Ok(AugmentationScheme {
            metapath: view.metapath.name.clone(),
            b: Array2::zeros((n, n)),
            c: complement_matrix_with(&view.adjacency, literal_eq7)?,
            objective_kind: kind,
            trace: Vec::new(),
            literal_eq7,
        })
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn final_value(&self) -> f64 {
        self.trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn l1_mass(&self) -> f64 {
        self.b.iter().map(|v| v.abs()).sum()
    }
}

fn check_range(a: &Array2<f64>) -> Result<()> {
    for ((i, j), &v) in a.indexed_iter() {
        if !(0.0..=1.0).contains(&v) {
            return Err(AugmentError::OutOfRange { i, j, value: v });
        }
    }
    Ok(())
}

/// Flip directions: `+1` where an edge is absent, `-A_ij` where present
/// (a full flip deletes it), zero diagonal.
pub fn complement_matrix(a: &Array2<f64>) -> Result<Array2<f64>> {
    complement_matrix_with(a, false)
}

pub fn complement_matrix_with(a: &Array2<f64>, literal_eq7: bool) -> Result<Array2<f64>> {
    check_range(a)?;
    let n = a.nrows();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        let v = a[[i, j]];
        if i == j {
            0.0
        } else if v == 0.0 {
            1.0
        } else if literal_eq7 {
            v
        } else {
            -v
        }
    }))
}

fn check_scheme_matrix(b: &Array2<f64>) -> Result<()> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(AugmentError::InvalidScheme(format!("{}x{}", n, b.ncols())));
    }
    for i in 0..n {
        if b[[i, i]] != 0.0 {
            return Err(AugmentError::InvalidScheme(format!("nonzero diagonal at {i}")));
        }
        for j in 0..i {
            let v = b[[i, j]];
            if !(0.0..=1.0).contains(&v) {
                return Err(AugmentError::InvalidScheme(format!(
                    "entry ({i},{j}) = {v} outside [0,1]"
                )));
            }
            if v != b[[j, i]] {
                return Err(AugmentError::InvalidScheme(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// `A + C∘B`. Under the literal complement, entries may exceed 1 and the
/// result is max-normalized back into `[0,1]`.
pub fn apply_with_complement(a: &Array2<f64>, c: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let t = a + &(c * b);
    if t.iter().any(|&v| v > 1.0) {
        hetgraph::normalize_view_weights(&t)
    } else {
        t
    }
}

/// `t(A) = A + C∘B` with `C = complement_matrix(A)`.
pub fn apply_scheme(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.dim() != b.dim() {
        return Err(AugmentError::Shape(a.dim(), b.dim()));
    }
    check_scheme_matrix(b)?;
    let c = complement_matrix(a)?;
    Ok(apply_with_complement(a, &c, b))
}

/// Evaluates one of the spectral augmentation objectives.
///
/// `Double` and `DoubleMax` compare the two augmentations; `JPair` is the
/// product of the up-ratio of `b1` and the down-ratio of `b2`.
pub fn objective_value(
    a: &Array2<f64>,
    b1: &Array2<f64>,
    b2: Option<&Array2<f64>>,
    kind: ObjectiveKind,
) -> Result<f64> {
    objective_value_with(a, b1, b2, kind, SpectrumNorm::L2)
}

pub fn objective_value_with(
    a: &Array2<f64>,
    b1: &Array2<f64>,
    b2: Option<&Array2<f64>>,
    kind: ObjectiveKind,
    norm: SpectrumNorm,
) -> Result<f64> {
    let t1 = apply_scheme(a, b1)?;
    let t2 = match (b2, kind.needs_pair()) {
        (Some(b2), true) => Some(apply_scheme(a, b2)?),
        (None, true) => return Err(AugmentError::MissingSecondScheme(kind)),
        _ => None,
    };
    let spec = |m: &Array2<f64>| spectral::adjacency_spectrum(m);
    let nrm = |m: &Array2<f64>| -> Result<f64> {
        Ok(spectral::spectrum_norm_with(&spec(m)?, norm))
    };
    Ok(match kind {
        ObjectiveKind::Single => {
            spectral::spectral_distance_with(&spec(&t1)?, &spec(a)?, norm)?
        }
        ObjectiveKind::SingleMax | ObjectiveKind::SingleMin => nrm(&t1)? / nrm(a)?,
        ObjectiveKind::Double => {
            let t2 = t2.expect("checked above");
            spectral::spectral_distance_with(&spec(&t1)?, &spec(&t2)?, norm)?
        }
        ObjectiveKind::DoubleMax => nrm(&t1)? / nrm(t2.as_ref().unwrap())?,
        ObjectiveKind::JPair => {
            let base = nrm(a)?;
            (nrm(&t1)? / base) * (base / nrm(t2.as_ref().unwrap())?)
        }
    })
}

// ---------------------------------------------------------------------------
// optimizer

/// Objective for one scheme while the other (if any) is held fixed.
#[derive(Debug, Clone, Copy)]
enum Target<'a> {
    /// maximize ||eig t|| / ||eig A||
    Up,
    /// maximize ||eig A|| / ||eig t||
    Down,
    /// maximize distance of eig t to a reference spectrum; the fallback
    /// direction is used where the distance gradient is undefined or zero
    Distance {
        reference: &'a SpectrumResult,
        fallback_up: bool,
    },
    /// maximize ||eig t|| / ||eig other|| (`up`) or ||eig other|| / ||eig t||
    Ratio { other_norm: f64, up: bool },
}

struct Problem<'a> {
    a: &'a Array2<f64>,
    c: &'a Array2<f64>,
    base_norm: f64,
    norm: SpectrumNorm,
    budget: Option<f64>,
}

impl Problem<'_> {
    fn augmented(&self, b: &Array2<f64>) -> Array2<f64> {
        apply_with_complement(self.a, self.c, b)
    }

    fn norm_of(&self, t: &Array2<f64>) -> f64 {
        spectral::laplacian_spectrum_norm(t, self.norm)
    }

    fn value(&self, b: &Array2<f64>, target: Target<'_>) -> Result<f64> {
        let t = self.augmented(b);
        Ok(match target {
            Target::Up => self.norm_of(&t) / self.base_norm,
            Target::Down => self.base_norm / self.norm_of(&t),
            Target::Distance { reference, .. } => spectral::spectral_distance_with(
                &spectral::adjacency_spectrum(&t)?,
                reference,
                self.norm,
            )?,
            Target::Ratio { other_norm, up } => {
                if up {
                    self.norm_of(&t) / other_norm
                } else {
                    other_norm / self.norm_of(&t)
                }
            }
        })
    }

    /// Gradient with respect to the symmetric entries of `t`.
    fn grad_t(&self, t: &Array2<f64>, target: Target<'_>) -> Result<Array2<f64>> {
        let ng = || spectral::spectrum_norm_grad_with(t, self.norm);
        Ok(match target {
            Target::Up => ng()? / self.base_norm,
            Target::Down => {
                let nt = self.norm_of(t);
                ng()? * (-self.base_norm / (nt * nt))
            }
            Target::Distance {
                reference,
                fallback_up,
            } => match spectral::spectral_distance_grad_with(t, reference, self.norm) {
                Ok(g) if g.iter().any(|&v| v != 0.0) => g,
                Ok(_) | Err(SpectralError::DegenerateSpectrum) => {
                    let fallback = if fallback_up { Target::Up } else { Target::Down };
                    self.grad_t(t, fallback)?
                }
                Err(e) => return Err(e.into()),
            },
            Target::Ratio { other_norm, up } => {
                let nt = self.norm_of(t);
                if up {
                    ng()? / other_norm
                } else {
                    ng()? * (-other_norm / (nt * nt))
                }
            }
        })
    }

    /// Symmetrize, zero the diagonal, clamp to the box, apply the L1 budget.
    fn project(&self, b: &mut Array2<f64>) {
        let n = b.nrows();
        for i in 0..n {
            b[[i, i]] = 0.0;
            for j in 0..i {
                let v = (0.5 * (b[[i, j]] + b[[j, i]])).clamp(0.0, 1.0);
                b[[i, j]] = v;
                b[[j, i]] = v;
            }
        }
        if let Some(budget) = self.budget {
            let mass: f64 = b.iter().map(|v| v.abs()).sum();
            if mass > budget && mass > 0.0 {
                b.mapv_inplace(|v| v * budget / mass);
            }
        }
    }

    /// One projected ascent step along the Adam direction, halving the step
    /// until the objective does not decrease; returns the new value.
    fn step(
        &self,
        b: &mut Array2<f64>,
        moments: &mut Moments,
        current: f64,
        target: Target<'_>,
        lr: f64,
        iteration: usize,
    ) -> Result<f64> {
        let t = self.augmented(b);
        let g_t = self.grad_t(&t, target)?;
        let mut g = g_t * self.c;
        // projection of the gradient onto symmetric matrices
        let gt = g.t().to_owned();
        g = (g + gt) * 0.5;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(AugmentError::NonFiniteGradient(iteration));
        }
        let direction = moments.direction(&g);

        let mut step = lr;
        for _ in 0..=MAX_HALVINGS {
            let mut candidate = &*b + &(&direction * step);
            self.project(&mut candidate);
            let value = self.value(&candidate, target)?;
            if !value.is_finite() {
                return Err(AugmentError::NonFiniteGradient(iteration));
            }
            if value >= current {
                *b = candidate;
                return Ok(value);
            }
            step *= 0.5;
        }
        log::debug!("iteration {iteration}: no ascent after {MAX_HALVINGS} halvings");
        Ok(current)
    }
}

/// Bias-corrected first/second moments of the ascent gradient.
struct Moments {
    m: Array2<f64>,
    v: Array2<f64>,
    t: i32,
}

impl Moments {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Moments {
            m: Array2::zeros((n, n)),
            v: Array2::zeros((n, n)),
            t: 0,
        }
    }

    fn direction(&mut self, g: &Array2<f64>) -> Array2<f64> {
        self.t += 1;
        self.m.zip_mut_with(g, |m, &g| *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g);
        self.v
            .zip_mut_with(g, |v, &g| *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g);
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let mut d = self.m.clone();
        d.zip_mut_with(&self.v, |m, &v| *m = (*m / c1) / ((v / c2).sqrt() + Self::EPS));
        d
    }
}

const MAX_HALVINGS: usize = 30;

/// Learns the two augmentation schemes of one view.
///
/// With the default `JPair` objective, `B1` ascends `J_up = ||eig t(A,B1)|| /
/// ||eig A||` and `B2` ascends `J_down = ||eig A|| / ||eig t(A,B2)||`, both
/// from `B = 0`.
pub fn learn_schemes(
    view: &MetaPathView,
    cfg: &AugmentConfig,
) -> Result<(AugmentationScheme, AugmentationScheme)> {
    let a = &view.adjacency;
    if !a.iter().any(|&v| v > 0.0) {
        return Err(AugmentError::EmptyView(view.metapath.name.clone()));
    }
    let c = complement_matrix_with(a, cfg.literal_eq7)?;
    let positives = a.iter().filter(|&&v| v > 0.0).count();
    let problem = Problem {
        a,
        c: &c,
        base_norm: spectral::laplacian_spectrum_norm(a, cfg.norm),
        norm: cfg.norm,
        budget: cfg.budget_fraction.map(|f| f * positives as f64),
    };
    let (kind1, kind2) = match cfg.objective {
        ObjectiveKind::JPair | ObjectiveKind::SingleMax | ObjectiveKind::SingleMin => {
            (ObjectiveKind::SingleMax, ObjectiveKind::SingleMin)
        }
        k => (k, k),
    };
    let mut s1 = AugmentationScheme::zero(view, kind1, cfg.literal_eq7)?;
    let mut s2 = AugmentationScheme::zero(view, kind2, cfg.literal_eq7)?;

    match cfg.objective {
        ObjectiveKind::JPair | ObjectiveKind::SingleMax | ObjectiveKind::SingleMin => {
            optimize_alone(&problem, &mut s1, Target::Up, cfg)?;
            optimize_alone(&problem, &mut s2, Target::Down, cfg)?;
        }
        ObjectiveKind::Single => {
            let reference = spectral::adjacency_spectrum(a)?;
            optimize_alone(
                &problem,
                &mut s1,
                Target::Distance {
                    reference: &reference,
                    fallback_up: true,
                },
                cfg,
            )?;
            optimize_alone(
                &problem,
                &mut s2,
                Target::Distance {
                    reference: &reference,
                    fallback_up: false,
                },
                cfg,
            )?;
        }
        ObjectiveKind::Double | ObjectiveKind::DoubleMax => {
            optimize_jointly(&problem, &mut s1, &mut s2, cfg)?;
        }
    }
    Ok((s1, s2))
}

fn optimize_alone(
    problem: &Problem<'_>,
    scheme: &mut AugmentationScheme,
    target: Target<'_>,
    cfg: &AugmentConfig,
) -> Result<()> {
    let mut value = problem.value(&scheme.b, target)?;
    let mut moments = Moments::new(scheme.n());
    scheme.trace.push(value);
    for it in 0..cfg.iterations {
        value = problem.step(&mut scheme.b, &mut moments, value, target, cfg.lr, it)?;
        scheme.trace.push(value);
    }
    Ok(())
}

/// Alternating ascent on a two-scheme objective; both traces record the
/// joint value.
fn optimize_jointly(
    problem: &Problem<'_>,
    s1: &mut AugmentationScheme,
    s2: &mut AugmentationScheme,
    cfg: &AugmentConfig,
) -> Result<()> {
    let distance = cfg.objective == ObjectiveKind::Double;
    let joint = |b1: &Array2<f64>, b2: &Array2<f64>| -> Result<f64> {
        let (t1, t2) = (problem.augmented(b1), problem.augmented(b2));
        if distance {
            Ok(spectral::spectral_distance_with(
                &spectral::adjacency_spectrum(&t1)?,
                &spectral::adjacency_spectrum(&t2)?,
                problem.norm,
            )?)
        } else {
            Ok(problem.norm_of(&t1) / problem.norm_of(&t2))
        }
    };

    let mut value = joint(&s1.b, &s2.b)?;
    let mut moments = [Moments::new(s1.n()), Moments::new(s2.n())];
    s1.trace.push(value);
    s2.trace.push(value);
    for it in 0..cfg.iterations {
        for first in [true, false] {
            let other = if first { &s2.b } else { &s1.b };
            let t_other = problem.augmented(other);
            let reference;
            let target = if distance {
                reference = spectral::adjacency_spectrum(&t_other)?;
                Target::Distance {
                    reference: &reference,
                    fallback_up: first,
                }
            } else {
                Target::Ratio {
                    other_norm: problem.norm_of(&t_other),
                    up: first,
                }
            };
            let (b, mom) = if first {
                (&mut s1.b, &mut moments[0])
            } else {
                (&mut s2.b, &mut moments[1])
            };
            value = problem.step(b, mom, value, target, cfg.lr, it)?;
        }
        s1.trace.push(value);
        s2.trace.push(value);
    }
    Ok(())
}

/// Learns one scheme pair per view; views are independent and run in parallel.
pub fn learn_all(
    views: &[MetaPathView],
    cfg: &AugmentConfig,
) -> Result<Vec<(AugmentationScheme, AugmentationScheme)>> {
    views.par_iter().map(|v| learn_schemes(v, cfg)).collect()
}

/// Unoptimized schemes with `B_ij ~ U[0,1]` (symmetric, zero diagonal).
pub fn random_schemes(
    view: &MetaPathView,
    seed: u64,
    literal_eq7: bool,
) -> Result<(AugmentationScheme, AugmentationScheme)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = || -> Result<AugmentationScheme> {
        let mut s = AugmentationScheme::zero(view, ObjectiveKind::JPair, literal_eq7)?;
        let n = s.n();
        for i in 0..n {
            for j in 0..i {
                let v: f64 = rng.random();
                s.b[[i, j]] = v;
                s.b[[j, i]] = v;
            }
        }
        Ok(s)
    };
    let s1 = make()?;
    let s2 = make()?;
    Ok((s1, s2))
}

/// Produces the two augmented views from learned schemes.
pub fn materialize_views(
    view: &MetaPathView,
    s1: &AugmentationScheme,
    s2: &AugmentationScheme,
    mode: MaterializeMode,
    seed: u64,
) -> Result<(MetaPathView, MetaPathView)> {
    for s in [s1, s2] {
        if s.metapath != view.metapath.name || s.n() != view.n() {
            return Err(AugmentError::Mismatch {
                scheme: s.metapath.clone(),
                scheme_n: s.n(),
                view: view.metapath.name.clone(),
                view_n: view.n(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut realize = |s: &AugmentationScheme| -> Result<MetaPathView> {
        let b = match mode {
            MaterializeMode::Deterministic => s.b.clone(),
            MaterializeMode::Bernoulli => {
                let n = s.n();
                let mut flips = Array2::zeros((n, n));
                for i in 0..n {
                    for j in i + 1..n {
                        let u: f64 = rng.random();
                        if u < s.b[[i, j]] {
                            flips[[i, j]] = 1.0;
                            flips[[j, i]] = 1.0;
                        }
                    }
                }
                flips
            }
        };
        let t = apply_with_complement(&view.adjacency, &s.c, &b);
        Ok(MetaPathView::new(view.metapath.clone(), t)?)
    };
    let v1 = realize(s1)?;
    let v2 = realize(s2)?;
    Ok((v1, v2))
}

// ---------------------------------------------------------------------------
// checkpoints

pub fn checkpoint_file_name(metapath: &str, which: u8) -> String {
    format!("scheme_{metapath}_{which}.tsv")
}

/// Header `n iterations objective final_value`, then `B` row-major.
pub fn format_checkpoint(s: &AugmentationScheme, header: Option<&str>) -> String {
    let mut out = header.map(|h| format!("# {h}\n")).unwrap_or_default();
    writeln!(
        out,
        "{}\t{}\t{}\t{}",
        s.n(),
        s.trace.len().saturating_sub(1),
        s.objective_kind,
        s.final_value()
    )
    .unwrap();
    for row in s.b.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join("\t"));
        out.push('\n');
    }
    out
}

pub fn save_checkpoint(
    s: &AugmentationScheme,
    dir: &Path,
    which: u8,
    header: Option<&str>,
) -> std::io::Result<()> {
    std::fs::write(
        dir.join(checkpoint_file_name(&s.metapath, which)),
        format_checkpoint(s, header),
    )
}

/// Parses a checkpoint and rebinds it to `view`.
pub fn parse_checkpoint(
    file: &str,
    text: &str,
    view: &MetaPathView,
    literal_eq7: bool,
) -> Result<AugmentationScheme> {
    let err = |msg: String| AugmentError::Checkpoint {
        file: file.to_string(),
        msg,
    };
    let mut lines = hetgraph::data_lines(text);
    let (_, header) = lines.next().ok_or_else(|| err("empty file".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 {
        return Err(err(format!("bad header {header:?}")));
    }
    let n: usize = toks[0].parse().map_err(|_| err("bad n".into()))?;
    let _iterations: usize = toks[1].parse().map_err(|_| err("bad iterations".into()))?;
    let kind: ObjectiveKind = toks[2].parse().map_err(err)?;
    let final_value: f64 = toks[3].parse().map_err(|_| err("bad final value".into()))?;
    let mut values = Vec::with_capacity(n * n);
    for (ln, line) in lines {
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| err(format!("line {ln}: bad number {tok:?}")))?,
            );
        }
    }
    let b = Array2::from_shape_vec((n, n), values).map_err(|e| err(e.to_string()))?;
    check_scheme_matrix(&b)?;
    if n != view.n() {
        return Err(AugmentError::Mismatch {
            scheme: view.metapath.name.clone(),
            scheme_n: n,
            view: view.metapath.name.clone(),
            view_n: view.n(),
        });
    }
    Ok(AugmentationScheme {
        metapath: view.metapath.name.clone(),
        b,
        c: complement_matrix_with(&view.adjacency, literal_eq7)?,
        objective_kind: kind,
        trace: vec![final_value],
        literal_eq7,
    })
}

pub fn load_checkpoint(
    dir: &Path,
    view: &MetaPathView,
    which: u8,
    literal_eq7: bool,
) -> Result<AugmentationScheme> {
    let name = checkpoint_file_name(&view.metapath.name, which);
    let text = std::fs::read_to_string(dir.join(&name)).map_err(|e| AugmentError::Checkpoint {
        file: name.clone(),
        msg: e.to_string(),
    })?;
    parse_checkpoint(&name, &text, view, literal_eq7)
}
