//! Ranking of residual correlation pockets.

use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPocket {
    /// 0-based item indices, `first < second`.
    pub first: usize,
    pub second: usize,
    pub residual: f64,
}

/// Top-`top` item pairs by |r_res|, descending; ties keep item-order (lexicographic) order.
pub fn residual_pockets(residual_cor: &DMatrix<f64>, top: usize) -> Vec<ResidualPocket> {
    let k = residual_cor.nrows();
    let mut pairs: Vec<ResidualPocket> = (0..k)
        .flat_map(|i| {
            ((i + 1)..k).map(move |j| ResidualPocket {
                first: i,
                second: j,
                residual: residual_cor[(i, j)],
            })
        })
        .collect();
    // Stable sort keeps lexicographic order among equal magnitudes.
    pairs.sort_by(|a, b| b.residual.abs().total_cmp(&a.residual.abs()));
    pairs.truncate(top.max(1));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_come_out_lexicographic() {
        let p = residual_pockets(&DMatrix::zeros(3, 3), 3);
        let idx: Vec<(usize, usize)> = p.iter().map(|x| (x.first, x.second)).collect();
        assert_eq!(idx, [(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn dominant_pair_first_and_ties() {
        let mut r = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                0.0
            } else {
                0.01 * ((i + j) % 3) as f64
            }
        });
        r[(1, 2)] = -0.30;
        r[(2, 1)] = -0.30;
        let p = residual_pockets(&r, 2);
        assert_eq!((p[0].first, p[0].second), (1, 2));

        let mut t = DMatrix::zeros(4, 4);
        t[(0, 2)] = 0.2;
        t[(2, 0)] = 0.2;
        t[(1, 3)] = -0.2;
        t[(3, 1)] = -0.2;
        let p = residual_pockets(&t, 2);
        assert_eq!((p[0].first, p[0].second), (0, 2));
        assert_eq!((p[1].first, p[1].second), (1, 3));
    }
}
