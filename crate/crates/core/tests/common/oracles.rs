//! Independent reference implementations used to check the library: central
//! finite differences, a dense HP solver, and brute-force beat matching.

#![allow(dead_code)]

use dance_core::model::{SequenceInput, Tsmt};
use dance_core::numerics::{Array, Graph, Var};
use dance_core::{Result, SeededRng};

/// `|a - n| / max(|a|, |n|, 1e-3)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

type Build = fn(&mut Graph<f64>, &[Var]) -> Result<Var>;

/// A differentiable graph operation with fixed input shapes.
pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub build: Build,
    /// Keep inputs away from zero (for kinks such as ReLU).
    pub avoid_zero: bool,
}

fn case(name: &'static str, shapes: &[&[usize]], build: Build) -> OpCase {
    OpCase {
        name,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        build,
        avoid_zero: false,
    }
}

/// Every differentiable operation of the graph.
pub fn op_cases() -> Vec<OpCase> {
    let mut relu = case("relu", &[&[3, 4]], |g, v| Ok(g.relu(v[0])));
    relu.avoid_zero = true;
    vec![
        case("matmul", &[&[3, 4], &[4, 2]], |g, v| g.matmul(v[0], v[1])),
        case("add", &[&[3, 4], &[3, 4]], |g, v| g.add(v[0], v[1])),
        case("add_row", &[&[3, 4], &[4]], |g, v| g.add_row(v[0], v[1])),
        case("mul", &[&[3, 4], &[3, 4]], |g, v| g.mul(v[0], v[1])),
        case("scale", &[&[3, 4]], |g, v| Ok(g.scale(v[0], -1.7))),
        relu,
        case("softmax", &[&[3, 5]], |g, v| Ok(g.softmax(v[0]))),
        case("causal_softmax", &[&[4, 4]], |g, v| g.causal_softmax(v[0])),
        case("log_softmax", &[&[3, 5]], |g, v| Ok(g.log_softmax(v[0]))),
        case("layer_norm", &[&[3, 6], &[6], &[6]], |g, v| {
            g.layer_norm(v[0], v[1], v[2], 1e-5)
        }),
        case("conv1d_causal", &[&[5, 3], &[9, 2], &[2]], |g, v| {
            g.conv1d_causal(v[0], v[1], v[2], 3)
        }),
        case("embedding", &[&[6, 3]], |g, v| {
            g.embedding(v[0], &[0, 2, 5, 2, 1, 1], 3)
        }),
        case("concat_cols", &[&[3, 2], &[3, 4]], |g, v| {
            g.concat_cols(&[v[0], v[1]])
        }),
        case("concat_rows", &[&[2, 3], &[4, 3]], |g, v| {
            g.concat_rows(&[v[0], v[1]])
        }),
        case("slice_cols", &[&[3, 5]], |g, v| g.slice_cols(v[0], 1, 4)),
        case("slice_rows", &[&[5, 3]], |g, v| g.slice_rows(v[0], 2, 5)),
        case("transpose", &[&[3, 5]], |g, v| g.transpose(v[0])),
        case("reshape", &[&[3, 4]], |g, v| g.reshape(v[0], &[2, 6])),
        case("nll", &[&[4, 5]], |g, v| g.nll(v[0], &[0, 4, 2, 2])),
        case("cross_entropy", &[&[4, 5]], |g, v| {
            g.cross_entropy(v[0], &[1, 3, 0, 4])
        }),
        case("sum", &[&[3, 4]], |g, v| Ok(g.sum(v[0]))),
        case("mean", &[&[3, 4]], |g, v| Ok(g.mean(v[0]))),
        case("mean_rows", &[&[3, 4]], |g, v| g.mean_rows(v[0])),
    ]
}

fn random_array(shape: &[usize], rng: &mut SeededRng, avoid_zero: bool) -> Array<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v = rng.normal();
            if avoid_zero && v.abs() < 0.05 {
                v.signum() * 0.05 + v
            } else {
                v
            }
        })
        .collect();
    Array::new(shape, data).unwrap()
}

/// Scalar loss `sum(op(inputs) * weights)`.
fn scalar_loss(g: &mut Graph<f64>, case: &OpCase, vars: &[Var], weights: &Array<f64>) -> Var {
    let out = (case.build)(g, vars).unwrap();
    if g.value(out).len() == 1 && g.value(out).ndim() == 0 {
        return g.scale(out, weights.data()[0]);
    }
    let w = g.constant(weights.reshape(g.value(out).shape()).unwrap());
    let p = g.mul(out, w).unwrap();
    g.sum(p)
}

fn eval(case: &OpCase, inputs: &[Array<f64>], weights: &Array<f64>) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|a| g.constant(a.clone())).collect();
    let l = scalar_loss(&mut g, case, &vars, weights);
    g.value(l).item()
}

/// Largest relative error between analytic and central-difference
/// gradients of `case` over `trials` random inputs.
pub fn check_op(case: &OpCase, trials: usize, seed: u64) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let base = SeededRng::new(seed);
    for trial in 0..trials {
        let mut rng = base.split(trial as u64);
        let mut inputs: Vec<Array<f64>> = case
            .shapes
            .iter()
            .map(|s| random_array(s, &mut rng, case.avoid_zero))
            .collect();
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|a| g.input(a.clone())).collect();
        let probe = {
            let mut pg = Graph::new();
            let pv: Vec<Var> = inputs.iter().map(|a| pg.constant(a.clone())).collect();
            let o = (case.build)(&mut pg, &pv).unwrap();
            pg.value(o).len()
        };
        let weights = random_array(&[probe], &mut rng, false);
        let loss = scalar_loss(&mut g, case, &vars, &weights);
        let grads = g.backward(loss).unwrap();
        for k in 0..inputs.len() {
            let analytic = grads
                .get(vars[k])
                .map(|a| a.data().to_vec())
                .unwrap_or_else(|| vec![0.0; inputs[k].len()]);
            for i in 0..inputs[k].len() {
                let orig = inputs[k].data()[i];
                inputs[k].data_mut()[i] = orig + h;
                let lp = eval(case, &inputs, &weights);
                inputs[k].data_mut()[i] = orig - h;
                let lm = eval(case, &inputs, &weights);
                inputs[k].data_mut()[i] = orig;
                worst = worst.max(rel_err(analytic[i], (lp - lm) / (2.0 * h)));
            }
        }
    }
    worst
}

/// Largest relative error between the model's parameter gradients and
/// central differences of its teacher-forced loss on `input`.
pub fn model_gradient_error(
    model: &mut Tsmt<f64>,
    input: &SequenceInput<'_>,
    h: f64,
) -> (f64, usize) {
    let (_, grads) = model.loss_and_grads(&[*input], None).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for id in 0..model.params().len() {
        for i in 0..model.params().get(id).len() {
            let orig = model.params().get(id).data()[i];
            model.params_mut().get_mut(id).data_mut()[i] = orig + h;
            let lp = model.batch_loss(&[*input]).unwrap();
            model.params_mut().get_mut(id).data_mut()[i] = orig - h;
            let lm = model.batch_loss(&[*input]).unwrap();
            model.params_mut().get_mut(id).data_mut()[i] = orig;
            worst = worst.max(rel_err(grads[id].data()[i], (lp - lm) / (2.0 * h)));
            checked += 1;
        }
    }
    (worst, checked)
}

/// `(I + λ DᵀD) τ` with `D` the second-difference operator.
pub fn hp_apply(lambda: f64, tau: &[f64]) -> Vec<f64> {
    let n = tau.len();
    let mut out = tau.to_vec();
    if n < 3 {
        return out;
    }
    let d: Vec<f64> = (0..n - 2)
        .map(|i| tau[i] - 2.0 * tau[i + 1] + tau[i + 2])
        .collect();
    for (i, di) in d.iter().enumerate() {
        out[i] += lambda * di;
        out[i + 1] -= 2.0 * lambda * di;
        out[i + 2] += lambda * di;
    }
    out
}

/// Max-norm residual of the HP normal equations.
pub fn hp_residual(lambda: f64, y: &[f64], tau: &[f64]) -> f64 {
    hp_apply(lambda, tau)
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Solves the dense system `a x = b` by Gaussian elimination with partial
/// pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    for (row, &v) in a.iter_mut().zip(b) {
        row.push(v);
    }
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    x
}

/// HP trend from the dense normal equations.
pub fn hp_dense(lambda: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut a = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for (i, v) in hp_apply(lambda, &e).into_iter().enumerate() {
            a[i][j] = v;
        }
    }
    dense_solve(a, y)
}

/// Natural cubic spline through `(i, y[i])` evaluated at `x`, built from the
/// full dense system for the second derivatives.
pub fn spline_dense(y: &[f64], x: f64) -> f64 {
    let n = y.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    a[0][0] = 1.0;
    a[n - 1][n - 1] = 1.0;
    for i in 1..n - 1 {
        a[i][i - 1] = 1.0 / 6.0;
        a[i][i] = 2.0 / 3.0;
        a[i][i + 1] = 1.0 / 6.0;
        rhs[i] = y[i + 1] - 2.0 * y[i] + y[i - 1];
    }
    let m = dense_solve(a, &rhs);
    let i = (x.floor() as usize).min(n - 2);
    let (t0, t1) = (i as f64, i as f64 + 1.0);
    let (a0, b0) = (t1 - x, x - t0);
    m[i] * a0.powi(3) / 6.0
        + m[i + 1] * b0.powi(3) / 6.0
        + (y[i] - m[i] / 6.0) * a0
        + (y[i + 1] - m[i + 1] / 6.0) * b0
}

/// Maximum one-to-one matching between beats within `tol` frames, by
/// augmenting paths (Kuhn's algorithm).
pub fn max_matching(reference: &[usize], candidate: &[usize], tol: usize) -> usize {
    fn augment(
        r: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[r] {
            if !seen[c] {
                seen[c] = true;
                if owner[c].is_none_or(|o| augment(o, adj, seen, owner)) {
                    owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = reference
        .iter()
        .map(|&r| {
            (0..candidate.len())
                .filter(|&j| candidate[j].abs_diff(r) <= tol)
                .collect()
        })
        .collect();
    let mut owner = vec![None; candidate.len()];
    (0..reference.len())
        .filter(|&r| augment(r, &adj, &mut vec![false; candidate.len()], &mut owner))
        .count()
}

/// True when no two reference beats have overlapping `±tol` windows.
pub fn windows_disjoint(reference: &[usize], tol: usize) -> bool {
    reference.windows(2).all(|w| w[1] - w[0] > 2 * tol)
}
