//! GraphSage-style aggregation: each node keeps its own feature and appends
//! the sum of everyone else's.

use crate::error::{contract, Result};

/// `w_j = [e_j; Σ_{k≠j} e_k]`, of twice the feature length.
pub fn gs_aggregate(features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    contract!(!features.is_empty(), "aggregation needs at least one node");
    let half = features[0].len();
    contract!(
        features.iter().all(|f| f.len() == half),
        "features have unequal lengths"
    );
    Ok((0..features.len())
        .map(|j| {
            let mut w = features[j].clone();
            w.resize(2 * half, 0.0);
            for (k, f) in features.iter().enumerate() {
                if k != j {
                    for (wi, fi) in w[half..].iter_mut().zip(f) {
                        *wi += fi;
                    }
                }
            }
            w
        })
        .collect())
}

/// Backward of [`gs_aggregate`], accumulated into `d_features`.
pub fn gs_aggregate_backward(d_w: &[Vec<f64>], d_features: &mut [Vec<f64>]) {
    let n = d_features.len();
    let half = d_features.first().map_or(0, Vec::len);
    for j in 0..n {
        for c in 0..half {
            d_features[j][c] += d_w[j][c];
        }
        for k in (0..n).filter(|&k| k != j) {
            for c in 0..half {
                d_features[k][c] += d_w[j][half + c];
            }
        }
    }
}
