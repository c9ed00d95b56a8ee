//! Normalized Laplacians, their spectra, and gradients of spectral quantities
//! with respect to symmetric adjacency entries.
//!
//! All gradients here are taken with respect to a *symmetric* edge weight:
//! perturbing entry `(i, j)` moves `A_ij` and `A_ji` together, so both
//! `D_ii` and `D_jj` change.
//!
//! Writing `s_a = D_aa^{-1/2}` (zero for isolated nodes) and `N = S A S`, the
//! normalized Laplacian is `L = I - N`. For any symmetric `M`,
//!
//! ```text
//! <M, dL/dA_ij> = s_i^2 r_i + s_j^2 r_j - 2 M_ij s_i s_j,   r_a = sum_b M_ab N_ab
//! ```
//!
//! which turns every gradient below into an O(n^2) contraction.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),
    #[error("negative adjacency entry {value} at ({i},{j})")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal entry {value} at {i}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("matrix is not symmetric: |a_ij - a_ji| = {0}")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("diagonal entry ({0},{0}) has no edge gradient")]
    DiagonalEntry(usize),
    #[error("endpoint {0} has zero degree; dL/dA is unbounded there")]
    ZeroDegreeEndpoint(usize),
    #[error("repeated eigenvalues; spectral-distance gradient undefined")]
    DegenerateSpectrum,
    #[error("laplacian has zero Frobenius norm")]
    ZeroNorm,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Norm applied to eigenvalue vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumNorm {
    #[default]
    L2,
    L1,
}

/// Ascending eigenvalues and orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
    pub source_n: usize,
}

const SYMMETRY_TOL: f64 = 1e-8;

fn ensure_square(a: &Array2<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(SpectralError::NotSquare(a.nrows(), a.ncols()));
    }
    Ok(a.nrows())
}

/// Checks the adjacency preconditions: square, nonnegative, zero diagonal, symmetric.
pub fn check_adjacency(a: &Array2<f64>) -> Result<usize> {
    let n = ensure_square(a)?;
    for i in 0..n {
        if a[[i, i]] != 0.0 {
            return Err(SpectralError::NonzeroDiagonal {
                i,
                value: a[[i, i]],
            });
        }
        for j in 0..n {
            let v = a[[i, j]];
            if !v.is_finite() {
                return Err(SpectralError::NonFinite("adjacency"));
            }
            if v < 0.0 {
                return Err(SpectralError::NegativeEntry { i, j, value: v });
            }
            let d = (v - a[[j, i]]).abs();
            if d > SYMMETRY_TOL {
                return Err(SpectralError::NotSymmetric(d));
            }
        }
    }
    Ok(n)
}

/// `D^{-1/2}` diagonal, with 0 for isolated nodes.
pub fn inv_sqrt_degrees(a: &Array2<f64>) -> Array1<f64> {
    a.rows()
        .into_iter()
        .map(|row| {
            let d: f64 = row.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// `N = D^{-1/2} A D^{-1/2}`.
fn normalized_adjacency(a: &Array2<f64>, s: &Array1<f64>) -> Array2<f64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| s[i] * a[[i, j]] * s[j])
}

/// `L = I - D^{-1/2} A D^{-1/2}`; isolated nodes keep `L_ii = 1`.
pub fn normalized_laplacian(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = check_adjacency(a)?;
    let s = inv_sqrt_degrees(a);
    let mut l = normalized_adjacency(a, &s).mapv(|v| -v);
    for i in 0..n {
        l[[i, i]] += 1.0;
        for j in 0..i {
            // exact symmetry regardless of rounding in the products
            let v = 0.5 * (l[[i, j]] + l[[j, i]]);
            l[[i, j]] = v;
            l[[j, i]] = v;
        }
    }
    Ok(l)
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn graph_spectrum(l: &Array2<f64>) -> Result<SpectrumResult> {
    let n = ensure_square(l)?;
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((l[[i, j]] - l[[j, i]]).abs());
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(SpectralError::NotSymmetric(asym));
    }
    if l.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite("graph_spectrum input"));
    }

    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (l[[i, j]] + l[[j, i]]));
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));

    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(i, c)| eig.eigenvectors[(i, order[c])]);
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors,
        source_n: n,
    })
}

/// Spectrum of the normalized Laplacian of an adjacency.
pub fn adjacency_spectrum(a: &Array2<f64>) -> Result<SpectrumResult> {
    graph_spectrum(&normalized_laplacian(a)?)
}

pub fn vector_norm(v: &Array1<f64>, norm: SpectrumNorm) -> f64 {
    match norm {
        SpectrumNorm::L2 => v.dot(v).sqrt(),
        SpectrumNorm::L1 => v.iter().map(|x| x.abs()).sum(),
    }
}

pub fn spectrum_norm(s: &SpectrumResult) -> f64 {
    spectrum_norm_with(s, SpectrumNorm::L2)
}

pub fn spectrum_norm_with(s: &SpectrumResult, norm: SpectrumNorm) -> f64 {
    vector_norm(&s.eigenvalues, norm)
}

pub fn spectral_distance(s1: &SpectrumResult, s2: &SpectrumResult) -> Result<f64> {
    spectral_distance_with(s1, s2, SpectrumNorm::L2)
}

pub fn spectral_distance_with(
    s1: &SpectrumResult,
    s2: &SpectrumResult,
    norm: SpectrumNorm,
) -> Result<f64> {
    if s1.source_n != s2.source_n {
        return Err(SpectralError::DimensionMismatch(s1.source_n, s2.source_n));
    }
    Ok(vector_norm(&(&s1.eigenvalues - &s2.eigenvalues), norm))
}

/// `||L(A)||_F^2 = n + sum_{a != b} A_ab^2 / (d_a d_b)`, evaluated without
/// building `L`.
pub fn laplacian_frobenius_sq(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let s = inv_sqrt_degrees(a);
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = s[i] * a[[i, j]] * s[j];
            acc += v * v;
        }
    }
    n as f64 + acc
}

/// Norm of the spectrum of `L(A)`, computed without an eigendecomposition
/// (L2: Frobenius norm of L; L1: trace of L since L is PSD).
pub fn laplacian_spectrum_norm(a: &Array2<f64>, norm: SpectrumNorm) -> f64 {
    match norm {
        SpectrumNorm::L2 => laplacian_frobenius_sq(a).sqrt(),
        SpectrumNorm::L1 => a.nrows() as f64,
    }
}

/// Dense `dL/dA_ij` by the product rule.
pub fn laplacian_grad_wrt_entry(a: &Array2<f64>, i: usize, j: usize) -> Result<Array2<f64>> {
    let n = check_adjacency(a)?;
    if i == j {
        return Err(SpectralError::DiagonalEntry(i));
    }
    if i >= n || j >= n {
        return Err(SpectralError::DimensionMismatch(i.max(j), n));
    }
    let s = inv_sqrt_degrees(a);
    for k in [i, j] {
        if s[k] == 0.0 {
            return Err(SpectralError::ZeroDegreeEndpoint(k));
        }
    }
    // ds_k/dw = -s_k^3 / 2 for k in {i, j}
    let mut ds = Array1::<f64>::zeros(n);
    ds[i] = -0.5 * s[i].powi(3);
    ds[j] = -0.5 * s[j].powi(3);
    let mut g = Array2::<f64>::zeros((n, n));
    for a_ in 0..n {
        for b in 0..n {
            let mut dn = ds[a_] * a[[a_, b]] * s[b] + s[a_] * a[[a_, b]] * ds[b];
            if (a_ == i && b == j) || (a_ == j && b == i) {
                dn += s[a_] * s[b];
            }
            g[[a_, b]] = -dn;
        }
    }
    Ok(g)
}

/// `G_ij = <M, dL/dA_ij>` for every off-diagonal pair. `M` must be symmetric.
/// Endpoints with zero degree use `s = 0`.
pub fn laplacian_vjp(a: &Array2<f64>, m: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let s = inv_sqrt_degrees(a);
    let r: Array1<f64> = (0..n)
        .map(|p| (0..n).map(|q| m[[p, q]] * s[p] * a[[p, q]] * s[q]).sum())
        .collect();
    let t: Array1<f64> = (0..n).map(|p| s[p] * s[p] * r[p]).collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            t[i] + t[j] - 2.0 * m[[i.min(j), i.max(j)]] * (s[i] * s[j])
        }
    })
}

/// Gradient of the spectrum norm of `L(A)` with respect to symmetric entries.
///
/// For L2 this is `<L/||L||_F, dL/dA_ij>` (valid at repeated eigenvalues since
/// `||λ||_2 = ||L||_F`). Endpoints of zero degree follow the `D^{-1/2} = 0`
/// convention. For L1 the norm equals `trace(L) = n` and the gradient vanishes.
pub fn spectrum_norm_grad(a: &Array2<f64>) -> Result<Array2<f64>> {
    spectrum_norm_grad_with(a, SpectrumNorm::L2)
}

pub fn spectrum_norm_grad_with(a: &Array2<f64>, norm: SpectrumNorm) -> Result<Array2<f64>> {
    let n = check_adjacency(a)?;
    if norm == SpectrumNorm::L1 {
        return Ok(Array2::zeros((n, n)));
    }
    let fro = laplacian_frobenius_sq(a).sqrt();
    if fro == 0.0 {
        return Err(SpectralError::ZeroNorm);
    }
    let s = inv_sqrt_degrees(a);
    let mut m = normalized_adjacency(a, &s).mapv(|v| -v / fro);
    for i in 0..n {
        m[[i, i]] += 1.0 / fro;
    }
    let g = laplacian_vjp(a, &m);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite("spectrum_norm_grad"));
    }
    Ok(g)
}

/// Minimum gap between consecutive eigenvalues for a simple spectrum.
pub const SIMPLE_GAP: f64 = 1e-6;

pub fn is_simple(s: &SpectrumResult) -> bool {
    s.eigenvalues
        .windows(2)
        .into_iter()
        .all(|w| w[1] - w[0] > SIMPLE_GAP)
}

/// Gradient of the spectral distance between `L(A_aug)` and a reference
/// spectrum, through first-order eigenvalue perturbation `dλ_k = u_kᵀ dL u_k`.
pub fn spectral_distance_grad(a_aug: &Array2<f64>, s_ref: &SpectrumResult) -> Result<Array2<f64>> {
    spectral_distance_grad_with(a_aug, s_ref, SpectrumNorm::L2)
}

pub fn spectral_distance_grad_with(
    a_aug: &Array2<f64>,
    s_ref: &SpectrumResult,
    norm: SpectrumNorm,
) -> Result<Array2<f64>> {
    let n = check_adjacency(a_aug)?;
    if s_ref.source_n != n {
        return Err(SpectralError::DimensionMismatch(n, s_ref.source_n));
    }
    let spec = adjacency_spectrum(a_aug)?;
    if !is_simple(&spec) {
        return Err(SpectralError::DegenerateSpectrum);
    }
    let diff = &spec.eigenvalues - &s_ref.eigenvalues;
    let dist = vector_norm(&diff, norm);
    if dist == 0.0 {
        return Ok(Array2::zeros((n, n)));
    }
    // dΔ/dλ_k
    let coef: Array1<f64> = match norm {
        SpectrumNorm::L2 => diff.mapv(|d| d / dist),
        SpectrumNorm::L1 => diff.mapv(f64::signum),
    };
    // M = U diag(coef) Uᵀ
    let u = &spec.eigenvectors;
    let scaled = u * &coef.view().insert_axis(ndarray::Axis(0));
    let m = scaled.dot(&u.t());
    let g = laplacian_vjp(a_aug, &m);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite("spectral_distance_grad"));
    }
    Ok(g)
}
