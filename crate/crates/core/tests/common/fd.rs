//! Central finite differences against the hand-written backward passes.

use rand::Rng;
use twentyq_core::ka::GmfModel;
use twentyq_core::nn::{Activation, DenseLayer, EmbeddingTable, LstmCell, Parameters};
use twentyq_core::rng::{seeded, SimRng};

pub const STEP: f64 = 1e-5;
/// Denominator floor so gradients that are zero on both sides compare
/// absolutely instead of dividing noise by noise.
pub const FLOOR: f64 = 1e-6;

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

fn worst(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}

fn random_vec(rng: &mut SimRng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every parameter of `model`.
fn param_diff<P: Parameters + Clone>(model: &P, f: impl Fn(&P) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    for t in 0..model.tensors().len() {
        for i in 0..model.tensors()[t].len() {
            let mut plus = model.clone();
            plus.tensors_mut()[t].data_mut()[i] += STEP;
            let mut minus = model.clone();
            minus.tensors_mut()[t].data_mut()[i] -= STEP;
            out.push((f(&plus) - f(&minus)) / (2.0 * STEP));
        }
    }
    out
}

fn input_diff(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] += STEP;
            let mut m = x.to_vec();
            m[i] -= STEP;
            (f(&p) - f(&m)) / (2.0 * STEP)
        })
        .collect()
}

fn flat<P: Parameters>(p: &P) -> Vec<f64> {
    p.tensors().iter().flat_map(|t| t.data().to_vec()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense layer with every activation; loss `c . y`. Inputs whose
/// pre-activation sits on the relu kink are redrawn.
pub fn dense(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (i, o) = (rng.gen_range(1..7), rng.gen_range(1..7));
    let mut err: f64 = 0.0;
    for act in [Activation::Linear, Activation::Tanh, Activation::Sigmoid, Activation::Relu] {
        let layer = DenseLayer::new(i, o, act, &mut rng);
        let c = random_vec(&mut rng, o, 1.0);
        let x = loop {
            let x = random_vec(&mut rng, i, 2.0);
            let pre = DenseLayer {
                activation: Activation::Linear,
                ..layer.clone()
            }
            .forward(&x)
            .unwrap();
            if pre.iter().all(|z| z.abs() > 1e-3) {
                break x;
            }
        };
        let y = layer.forward(&x).unwrap();
        let mut grad = DenseLayer::zeros(i, o, act);
        let dx = layer.backward(&x, &y, &c, &mut grad).unwrap();
        let num = param_diff(&layer, |l| dot(&c, &l.forward(&x).unwrap()));
        err = err.max(worst(&flat(&grad), &num));
        let num_x = input_diff(&x, |x| dot(&c, &layer.forward(x).unwrap()));
        err = err.max(worst(&dx, &num_x));
    }
    err
}

fn lstm_loss(cell: &LstmCell, xs: &[Vec<f64>], cs: &[Vec<f64>]) -> f64 {
    cell.unroll(xs)
        .unwrap()
        .iter()
        .zip(cs)
        .map(|(s, c)| dot(&s.h, c))
        .sum()
}

/// Three-step unroll from the zero state; loss `sum_t c_t . h_t`.
pub fn lstm(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (i, h) = (rng.gen_range(1..5), rng.gen_range(1..5));
    let mut cell = LstmCell::new(i, h, &mut rng);
    // Wider weights than the default init so the gates leave their linear range.
    for v in cell.weight.data_mut() {
        *v *= 3.0;
    }
    let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, i, 1.5)).collect();
    let cs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, h, 1.0)).collect();
    let steps = cell.unroll(&xs).unwrap();
    let mut grad = LstmCell::zeros(i, h);
    let dxs = cell.backward_through_time(&steps, &cs, &mut grad).unwrap();
    let mut err = worst(&flat(&grad), &param_diff(&cell, |c| lstm_loss(c, &xs, &cs)));
    for t in 0..3 {
        let num = input_diff(&xs[t], |x| {
            let mut v = xs.clone();
            v[t] = x.to_vec();
            lstm_loss(&cell, &v, &cs)
        });
        err = err.max(worst(&dxs[t], &num));
    }
    err
}

/// Lookups with repeated rows feeding a tanh layer; loss `c . y`.
pub fn embedding(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (rows, dim, o) = (rng.gen_range(2..6), rng.gen_range(1..5), rng.gen_range(1..4));
    let table = EmbeddingTable::new(rows, dim, &mut rng);
    let layer = DenseLayer::new(dim, o, Activation::Tanh, &mut rng);
    let idx: Vec<usize> = (0..4).map(|_| rng.gen_range(0..rows)).collect();
    let c = random_vec(&mut rng, o, 1.0);
    let sum_rows = |t: &EmbeddingTable| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for &r in &idx {
            for (a, b) in x.iter_mut().zip(t.lookup(r).unwrap()) {
                *a += b;
            }
        }
        x
    };
    let x = sum_rows(&table);
    let y = layer.forward(&x).unwrap();
    let mut dense_grad = DenseLayer::zeros(dim, o, Activation::Tanh);
    let dx = layer.backward(&x, &y, &c, &mut dense_grad).unwrap();
    let mut grad = EmbeddingTable::zeros(rows, dim);
    for &r in &idx {
        EmbeddingTable::accumulate(&mut grad, r, &dx);
    }
    let num = param_diff(&table, |t| dot(&c, &layer.forward(&sum_rows(t)).unwrap()));
    worst(&flat(&grad), &num)
}

/// Weighted sum of GMF scores over a few cells, some repeated.
pub fn gmf(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, n, k) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..6));
    let model = GmfModel::new(m, n, k, &mut rng);
    let cells: Vec<(usize, usize, f64)> = (0..5)
        .map(|_| (rng.gen_range(0..m), rng.gen_range(0..n), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut grad = GmfModel::zeros(m, n, k);
    for &(a, b, d) in &cells {
        model.score_backward(a, b, d, &mut grad);
    }
    let num = param_diff(&model, |g| cells.iter().map(|&(a, b, d)| d * g.score(a, b)).sum());
    worst(&flat(&grad), &num)
}

