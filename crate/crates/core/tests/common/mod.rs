//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of eigenvalues of symmetric `m` strictly below `x`, from the signs of
/// the ratios of consecutive leading principal minors of `m - xI`
/// (Sylvester's law of inertia applied to the LDLᵀ pivots).
pub fn count_below(m: &Array2<f64>, x: f64) -> usize {
    let n = m.nrows();
    let mut w = m.clone();
    for i in 0..n {
        w[[i, i]] -= x;
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut pivot = w[[k, k]];
        if pivot == 0.0 {
            pivot = -f64::EPSILON * (1.0 + x.abs());
            w[[k, k]] = pivot;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = w[[i, k]] / pivot;
            if f != 0.0 {
                for j in k + 1..n {
                    w[[i, j]] -= f * w[[k, j]];
                }
            }
        }
    }
    negatives
}

/// Ascending eigenvalues of symmetric `m` by bisection on inertia counts.
pub fn eigenvalues_by_bisection(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r: f64 = (0..n).filter(|&j| j != i).map(|j| m[[i, j]].abs()).sum();
        lo = lo.min(m[[i, i]] - r);
        hi = hi.max(m[[i, i]] + r);
    }
    // irregular margins keep bisection midpoints off exact values such as 1.0
    lo -= 0.318_309_886;
    hi += 0.577_215_664;
    (0..n)
        .map(|k| {
            // smallest x with count_below(x) > k
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                if count_below(m, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// `I - D^{-1/2} A D^{-1/2}` written out entrywise, zero degree mapping to 0.
pub fn laplacian_oracle(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let off = if d[i] > 0.0 && d[j] > 0.0 {
            a[[i, j]] / (d[i] * d[j]).sqrt()
        } else {
            0.0
        };
        if i == j {
            1.0 - off
        } else {
            -off
        }
    })
}

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Central difference of `f` along the symmetric pair `(i,j),(j,i)`.
pub fn fd_sym<F: Fn(&Array2<f64>) -> f64>(f: F, a: &Array2<f64>, i: usize, j: usize, h: f64) -> f64 {
    let mut p = a.clone();
    let mut m = a.clone();
    p[[i, j]] += h;
    p[[j, i]] += h;
    m[[i, j]] -= h;
    m[[j, i]] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

/// Central-difference gradient over all off-diagonal symmetric pairs.
pub fn fd_sym_grad<F: Fn(&Array2<f64>) -> f64>(f: F, a: &Array2<f64>, h: f64) -> Array2<f64> {
    let n = a.nrows();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            let v = fd_sym(&f, a, i, j, h);
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    g
}

/// `max |a - b| / max(max |b|, floor)`.
pub fn rel_err(a: &Array2<f64>, b: &Array2<f64>, floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(floor, f64::max);
    diff / scale
}

/// Symmetric zero-diagonal matrix with entries in `(0,1]` at rate `density`.
pub fn random_view(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            if rng.random::<f64>() < density {
                let w = 1.0 - rng.random::<f64>();
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    a
}

/// Like [`random_view`] but every node lies on a weighted ring, so all
/// degrees are positive.
pub fn random_connected_view(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Array2<f64> {
    let mut a = random_view(rng, n, density);
    for i in 0..n {
        let j = (i + 1) % n;
        if i != j && a[[i, j]] == 0.0 {
            let w = 0.2 + 0.8 * rng.random::<f64>();
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
    }
    a
}

/// Random symmetric zero-diagonal matrix with entries in `[0,1]`.
pub fn random_scheme(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            let v: f64 = rng.random();
            b[[i, j]] = v;
            b[[j, i]] = v;
        }
    }
    b
}

pub fn connected_components(a: &Array2<f64>) -> usize {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for i in 0..n {
        for j in 0..i {
            if a[[i, j]] > 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// `d||L||_F / dw_ij` from the expansion
/// `||L||_F^2 = n + sum_{a != b} A_ab^2 / (d_a d_b)` (all degrees positive).
pub fn frobenius_grad_closed_form(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let q: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|b| a[[i, b]] * a[[i, b]] / d[b]).sum())
        .collect();
    let sq: f64 = n as f64
        + (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[[i, j]] * a[[i, j]] / (d[i] * d[j]))
            .sum::<f64>();
    let fro = sq.sqrt();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            let dsq = 4.0 * a[[i, j]] / (d[i] * d[j]) - 2.0 * q[i] / (d[i] * d[i]) - 2.0 * q[j] / (d[j] * d[j]);
            dsq / (2.0 * fro)
        }
    })
}
