mod common;

use common::rng;
use hetspec::tensor::*;
use ndarray::Array2;
use rand::Rng;

type Build = dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

fn random(r: &mut rand_chacha::ChaCha8Rng, shape: (usize, usize), lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || r.random_range(lo..hi))
}

/// Scalarizes `build` as `sum(out ∘ W)` with a fixed random `W`.
fn loss_of(inputs: &[Array2<f64>], build: &Build, weight_seed: u64) -> (f64, Vec<Array2<f64>>) {
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| t.param(x.clone()).unwrap()).collect();
    let out = build(&mut t, &vars).unwrap();
    let mut r = rng(weight_seed);
    let w = random(&mut r, t.shape(out), -1.0, 1.0);
    let wv = t.constant(w).unwrap();
    let prod = t.hadamard(out, wv).unwrap();
    let loss = t.sum(prod).unwrap();
    let value = t.scalar(loss);
    t.backward(loss).unwrap();
    (value, vars.iter().map(|v| t.grad(*v)).collect())
}

fn check_fd(name: &str, inputs: Vec<Array2<f64>>, build: &Build, tol: f64) {
    let (_, grads) = loss_of(&inputs, build, 99);
    let h = 1e-5;
    for (k, x) in inputs.iter().enumerate() {
        let mut fd = Array2::zeros(x.dim());
        for idx in ndarray::indices(x.dim()) {
            let mut p = inputs.clone();
            let mut m = inputs.clone();
            p[k][idx] += h;
            m[k][idx] -= h;
            fd[idx] = (loss_of(&p, build, 99).0 - loss_of(&m, build, 99).0) / (2.0 * h);
        }
        let diff = grads[k].iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = fd.iter().map(|v| v.abs()).fold(1e-6, f64::max);
        assert!(diff / scale <= tol, "{name}: input {k} relative error {}", diff / scale);
    }
}

#[test]
fn primitive_gradients_match_finite_differences() {
    let mut r = rng(1);
    let a = random(&mut r, (4, 3), -1.0, 1.0);
    let b = random(&mut r, (3, 5), -1.0, 1.0);
    let c = random(&mut r, (4, 3), -1.0, 1.0);
    let row = random(&mut r, (1, 3), -1.0, 1.0);
    let col = random(&mut r, (4, 1), -1.0, 1.0);
    let pos = random(&mut r, (4, 3), 0.5, 2.0);
    // keep away from the kinks of elu / leaky_relu
    let away = a.mapv(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let tol = 1e-5;

    check_fd("matmul", vec![a.clone(), b.clone()], &|t, v| t.matmul(v[0], v[1]), tol);
    check_fd("matmul_t", vec![a.clone(), c.clone()], &|t, v| t.matmul_t(v[0], v[1]), tol);
    check_fd("add", vec![a.clone(), c.clone()], &|t, v| t.add(v[0], v[1]), tol);
    check_fd("sub", vec![a.clone(), c.clone()], &|t, v| t.sub(v[0], v[1]), tol);
    check_fd("hadamard", vec![a.clone(), c.clone()], &|t, v| t.hadamard(v[0], v[1]), tol);
    check_fd("add_row", vec![a.clone(), row.clone()], &|t, v| t.add_row(v[0], v[1]), tol);
    check_fd("scale_by_entry", vec![a.clone(), row.clone()], &|t, v| t.scale_by_entry(v[0], v[1], (0, 2)), tol);
    check_fd("scale", vec![a.clone()], &|t, v| t.scale(v[0], -2.5), tol);
    check_fd("add_scalar", vec![a.clone()], &|t, v| t.add_scalar(v[0], 0.7), tol);
    check_fd("row_normalize_l2", vec![a.clone()], &|t, v| t.row_normalize_l2(v[0]), tol);
    check_fd("concat_rows", vec![a.clone(), c.clone()], &|t, v| t.concat_rows(&[v[0], v[1]]), tol);
    check_fd("concat_cols", vec![a.clone(), col.clone()], &|t, v| t.concat_cols(&[v[0], v[1]]), tol);
    check_fd("elu", vec![away.clone()], &|t, v| t.elu(v[0]), tol);
    check_fd("tanh", vec![a.clone()], &|t, v| t.tanh(v[0]), tol);
    check_fd("leaky_relu", vec![away.clone()], &|t, v| t.leaky_relu(v[0], 0.2), tol);
    check_fd("exp", vec![a.clone()], &|t, v| t.exp(v[0]), tol);
    check_fd("log", vec![pos.clone()], &|t, v| t.log(v[0]), tol);
    check_fd("softmax_rows", vec![a.clone()], &|t, v| t.softmax_rows(v[0]), tol);
    let mask = Array2::from_shape_fn((4, 3), |(i, j)| (i + j) % 3 != 0 || i == 3);
    let m2 = mask.clone();
    check_fd("masked_softmax_rows", vec![a.clone()], &move |t, v| t.masked_softmax_rows(v[0], m2.clone()), tol);
    check_fd("log_sum_exp_rows", vec![a.clone()], &|t, v| t.log_sum_exp_rows(v[0], None), tol);
    let m3 = mask.clone();
    check_fd("masked_log_sum_exp_rows", vec![a.clone()], &move |t, v| t.log_sum_exp_rows(v[0], Some(m3.clone())), tol);
    check_fd("sum", vec![a.clone()], &|t, v| t.sum(v[0]), tol);
    check_fd("mean", vec![a.clone()], &|t, v| t.mean(v[0]), tol);
    check_fd("mean_rows", vec![a.clone()], &|t, v| t.mean_rows(v[0]), tol);
    check_fd("transpose", vec![a.clone()], &|t, v| t.transpose(v[0]), tol);
    check_fd("outer_sum", vec![col.clone(), row.clone()], &|t, v| t.outer_sum(v[0], v[1]), tol);
}

#[test]
fn two_layer_composition_matches_finite_differences() {
    let mut r = rng(2);
    for _ in 0..5 {
        let x = random(&mut r, (6, 4), -1.0, 1.0);
        let w1 = random(&mut r, (4, 5), -1.0, 1.0);
        let b1 = random(&mut r, (1, 5), -0.5, 0.5);
        let w2 = random(&mut r, (5, 3), -1.0, 1.0);
        let build = move |t: &mut Tape, v: &[Var]| {
            let xc = t.constant(x.clone())?;
            let h = t.matmul(xc, v[0])?;
            let h = t.add_row(h, v[1])?;
            let h = t.tanh(h)?;
            let o = t.matmul(h, v[2])?;
            let o = t.softmax_rows(o)?;
            let l = t.add_scalar(o, 1.0)?;
            t.log(l)
        };
        check_fd("two_layer", vec![w1, b1, w2], &build, 1e-5);
    }
}

#[test]
fn xavier_sample_mean_is_centered() {
    let m = xavier_init(1000, 1000, 3);
    let mean = m.sum() / m.len() as f64;
    assert!(mean.abs() < 1e-3, "mean {mean}");
    let bound = (6.0f64 / 2000.0).sqrt();
    assert!(m.iter().all(|v| v.abs() <= bound));
}

#[test]
fn gradient_accumulates_over_reuse() {
    let mut t = Tape::new();
    let x = t.param(Array2::from_elem((1, 1), 3.0)).unwrap();
    let y = t.hadamard(x, x).unwrap();
    let z = t.add(y, x).unwrap();
    let l = t.sum(z).unwrap();
    t.backward(l).unwrap();
    assert_eq!(t.grad(x)[[0, 0]], 7.0);
}
