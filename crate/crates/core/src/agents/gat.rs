//! Single-iteration graph attention over the UAV and its devices.
//!
//! Node 0 is the UAV; nodes 1.. are the active devices in slot order. The
//! pairwise scorer is a two-layer net on the concatenation `[e_j; e_k]`. Its
//! first layer splits into `W_l·e_j + W_r·e_k`, so each projection is formed
//! once per node rather than once per pair.

use crate::error::{contract, Result};
use crate::numkit::{dot, Activation, DenseNet, ParamSet, Rng, Tensor2};

/// Builds the scorer `[e_j; e_k] → leaky-relu(hidden) → scalar`.
pub fn new_scorer(feature_len: usize, hidden: usize, rng: &mut Rng) -> Result<DenseNet> {
    DenseNet::new(
        2 * feature_len,
        &[(hidden, Activation::LeakyRelu), (1, Activation::Identity)],
        rng,
    )
}

fn check(scorer: &DenseNet, features: &[Vec<f64>]) -> Result<usize> {
    let l = scorer.layers();
    contract!(
        l.len() == 2
            && l[0].activation == Activation::LeakyRelu
            && l[1].outputs == 1
            && l[1].activation == Activation::Identity,
        "attention scorer must be [2E → leaky-relu → 1]"
    );
    contract!(!features.is_empty(), "attention needs at least one node");
    let e = l[0].inputs / 2;
    contract!(
        l[0].inputs == 2 * e && features.iter().all(|f| f.len() == e),
        "feature length does not match scorer input {}",
        l[0].inputs
    );
    Ok(e)
}

/// Recorded pre-activations (`n·n·H`, pair-major) and scores.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    nodes: usize,
    hidden: usize,
    pre: Vec<f64>,
}

fn forward(scorer: &DenseNet, features: &[Vec<f64>]) -> Result<(Tensor2, AttentionTrace)> {
    let e = check(scorer, features)?;
    let n = features.len();
    let p = scorer.params();
    let (w0, b0, w1, b1) = (p.tensor(0), p.tensor(1).as_slice(), p.tensor(2).as_slice(), p.tensor(3).as_slice()[0]);
    let h = w0.rows();
    let left: Vec<Vec<f64>> = features
        .iter()
        .map(|f| (0..h).map(|r| dot(&w0.row(r)[..e], f)).collect())
        .collect();
    let right: Vec<Vec<f64>> = features
        .iter()
        .map(|f| (0..h).map(|r| dot(&w0.row(r)[e..], f)).collect())
        .collect();
    let mut pre = vec![0.0; n * n * h];
    let mut z = Tensor2::zeros(n, n);
    let mut row = vec![0.0; n];
    for j in 0..n {
        for k in 0..n {
            let cell = &mut pre[(j * n + k) * h..(j * n + k + 1) * h];
            let mut s = b1;
            for r in 0..h {
                cell[r] = left[j][r] + right[k][r] + b0[r];
                s += w1[r] * Activation::LeakyRelu.apply(cell[r]);
            }
            row[k] = s;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for (k, x) in row.iter().enumerate() {
            z.set(j, k, x / total);
        }
    }
    Ok((z, AttentionTrace { nodes: n, hidden: h, pre }))
}

/// Row-stochastic attention matrix `z_{jk} = softmax_k ε_A(e_j, e_k)`.
pub fn attention_scores(scorer: &DenseNet, features: &[Vec<f64>]) -> Result<Tensor2> {
    forward(scorer, features).map(|(z, _)| z)
}

/// [`attention_scores`] plus the trace for [`attention_backward`].
pub fn attention_traced(scorer: &DenseNet, features: &[Vec<f64>]) -> Result<(Tensor2, AttentionTrace)> {
    forward(scorer, features)
}

/// `w_j = Σ_k z_{jk} e_k`.
pub fn gat_aggregate(features: &[Vec<f64>], z: &Tensor2) -> Result<Vec<Vec<f64>>> {
    let n = features.len();
    contract!(z.shape() == (n, n), "score matrix is {:?}, expected {n}x{n}", z.shape());
    let e = features.first().map_or(0, Vec::len);
    Ok((0..n)
        .map(|j| {
            let mut w = vec![0.0; e];
            for (k, f) in features.iter().enumerate() {
                let zk = z.get(j, k);
                for (wi, fi) in w.iter_mut().zip(f) {
                    *wi += zk * fi;
                }
            }
            w
        })
        .collect())
}

/// Backward of [`gat_aggregate`]: accumulates into `d_features` and returns
/// the gradient with respect to the scores.
pub fn aggregate_backward(
    features: &[Vec<f64>],
    z: &Tensor2,
    d_w: &[Vec<f64>],
    d_features: &mut [Vec<f64>],
) -> Tensor2 {
    let n = features.len();
    let mut d_z = Tensor2::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            d_z.set(j, k, dot(&d_w[j], &features[k]));
            let zjk = z.get(j, k);
            for (d, g) in d_features[k].iter_mut().zip(&d_w[j]) {
                *d += zjk * g;
            }
        }
    }
    d_z
}

/// Backward of [`attention_traced`] through the softmax and the scorer.
/// Scorer gradients go into `grads`, feature gradients into `d_features`.
pub fn attention_backward(
    scorer: &DenseNet,
    features: &[Vec<f64>],
    z: &Tensor2,
    trace: &AttentionTrace,
    d_z: &Tensor2,
    grads: &mut ParamSet,
    d_features: &mut [Vec<f64>],
) -> Result<()> {
    let e = check(scorer, features)?;
    let (n, h) = (trace.nodes, trace.hidden);
    contract!(n == features.len() && d_z.shape() == (n, n), "attention trace does not match inputs");
    let p = scorer.params();
    let w0 = p.tensor(0);
    let w1 = p.tensor(2).as_slice().to_vec();
    let mut d_left = vec![vec![0.0; h]; n];
    let mut d_right = vec![vec![0.0; h]; n];
    let mut d_w1 = vec![0.0; h];
    let mut d_b0 = vec![0.0; h];
    let mut d_b1 = 0.0;
    for j in 0..n {
        let mean: f64 = (0..n).map(|k| z.get(j, k) * d_z.get(j, k)).sum();
        for k in 0..n {
            let ds = z.get(j, k) * (d_z.get(j, k) - mean);
            if ds == 0.0 {
                continue;
            }
            d_b1 += ds;
            let cell = &trace.pre[(j * n + k) * h..(j * n + k + 1) * h];
            for r in 0..h {
                let a = Activation::LeakyRelu.apply(cell[r]);
                d_w1[r] += ds * a;
                let g = ds * w1[r] * Activation::LeakyRelu.derivative(cell[r], a);
                d_b0[r] += g;
                d_left[j][r] += g;
                d_right[k][r] += g;
            }
        }
    }
    {
        let gw0 = grads.tensor_mut(0);
        for (i, f) in features.iter().enumerate() {
            for r in 0..h {
                let row = &mut gw0.as_mut_slice()[r * 2 * e..(r + 1) * 2 * e];
                let (gl, gr) = (d_left[i][r], d_right[i][r]);
                for c in 0..e {
                    row[c] += gl * f[c];
                    row[e + c] += gr * f[c];
                }
            }
        }
    }
    for (x, g) in grads.tensor_mut(1).as_mut_slice().iter_mut().zip(&d_b0) {
        *x += g;
    }
    for (x, g) in grads.tensor_mut(2).as_mut_slice().iter_mut().zip(&d_w1) {
        *x += g;
    }
    grads.tensor_mut(3).as_mut_slice()[0] += d_b1;
    for i in 0..n {
        for r in 0..h {
            let wr = w0.row(r);
            let (gl, gr) = (d_left[i][r], d_right[i][r]);
            for c in 0..e {
                d_features[i][c] += wr[c] * gl + wr[e + c] * gr;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_features(n: usize, e: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..e).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect()
    }

    #[test]
    fn uniform_scores_for_identical_features() {
        let mut rng = Rng::new(1);
        let s = new_scorer(4, 4, &mut rng).unwrap();
        let f = vec![vec![0.3, -0.2, 0.1, 0.9]; 5];
        let z = attention_scores(&s, &f).unwrap();
        for x in z.as_slice() {
            assert!((x - 0.2).abs() < 1e-15);
        }
        let w = gat_aggregate(&f, &z).unwrap();
        for wj in &w {
            for (a, b) in wj.iter().zip(&f[0]) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_node_scores_match_concatenated_scorer() {
        let mut rng = Rng::new(2);
        let s = new_scorer(3, 5, &mut rng).unwrap();
        let f = random_features(2, 3, &mut rng);
        let z = attention_scores(&s, &f).unwrap();
        for j in 0..2 {
            let raw: Vec<f64> = (0..2)
                .map(|k| s.infer(&[f[j].clone(), f[k].clone()].concat()).unwrap()[0])
                .collect();
            let t: f64 = raw.iter().map(|x| x.exp()).sum();
            for k in 0..2 {
                assert!((z.get(j, k) - raw[k].exp() / t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_node_returns_own_feature() {
        let mut rng = Rng::new(3);
        let s = new_scorer(3, 3, &mut rng).unwrap();
        let f = random_features(1, 3, &mut rng);
        let z = attention_scores(&s, &f).unwrap();
        assert_eq!(z.as_slice(), &[1.0]);
        assert_eq!(gat_aggregate(&f, &z).unwrap()[0], f[0]);
    }

    #[test]
    fn rejects_bad_widths() {
        let mut rng = Rng::new(3);
        let s = new_scorer(3, 3, &mut rng).unwrap();
        assert!(attention_scores(&s, &[vec![0.0; 4]]).is_err());
        assert!(attention_scores(&s, &[]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(4);
        let scorer = new_scorer(3, 4, &mut rng).unwrap();
        let f = random_features(4, 3, &mut rng);
        let up = random_features(4, 3, &mut rng);
        let objective = |s: &DenseNet, f: &[Vec<f64>]| {
            let z = attention_scores(s, f).unwrap();
            let w = gat_aggregate(f, &z).unwrap();
            w.iter().zip(&up).map(|(a, b)| dot(a, b)).sum::<f64>()
        };
        let (z, trace) = attention_traced(&scorer, &f).unwrap();
        let mut d_f = vec![vec![0.0; 3]; 4];
        let d_z = aggregate_backward(&f, &z, &up, &mut d_f);
        let mut grads = scorer.zero_grads();
        attention_backward(&scorer, &f, &z, &trace, &d_z, &mut grads, &mut d_f).unwrap();

        let h = 1e-6;
        for i in 0..4 {
            for c in 0..3 {
                let mut p = f.clone();
                p[i][c] += h;
                let mut m = f.clone();
                m[i][c] -= h;
                let fd = (objective(&scorer, &p) - objective(&scorer, &m)) / (2.0 * h);
                assert!((fd - d_f[i][c]).abs() < 1e-7, "feature {i},{c}: {fd} vs {}", d_f[i][c]);
            }
        }
        let flat = scorer.params().flatten();
        let g = grads.flatten();
        for idx in 0..flat.len() {
            let mut sp = scorer.clone();
            let mut v = flat.clone();
            v[idx] += h;
            sp.params_mut().assign_flat(&v).unwrap();
            let mut sm = scorer.clone();
            v[idx] -= 2.0 * h;
            sm.params_mut().assign_flat(&v).unwrap();
            let fd = (objective(&sp, &f) - objective(&sm, &f)) / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-7, "param {idx}: {fd} vs {}", g[idx]);
        }
    }
}
