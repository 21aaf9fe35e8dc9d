//! Principal component analysis in 64-bit precision.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

/// Mean and top-k principal directions of a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` unit rows of length `d`, by decreasing variance. The entry of
    /// largest magnitude in each row is positive.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component (divisor `n − 1`).
    pub variances: Vec<f64>,
    /// Share of the total variance captured by each component.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// One flattened row per sample of an `[n, c, h, w]` tensor.
pub fn flatten_samples<T: Float>(x: &Tensor<T>) -> Vec<Vec<f64>> {
    let per = x.shape().c() * x.shape().h() * x.shape().w();
    x.data().chunks(per.max(1)).map(|r| r.iter().map(|v| v.f64()).collect()).collect()
}

fn check_rows(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<()> {
    match rows.iter().position(|r| r.len() != dim) {
        Some(i) => Err(Error::InvalidArgument(format!("{what}: sample {i} has {} values, expected {dim}", rows[i].len()))),
        None => Ok(()),
    }
}

/// Fits `k` components via the singular value decomposition of the
/// mean-centered data matrix.
pub fn pca_fit(samples: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = samples.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("pca: k = {k} needs 1 ≤ k ≤ sample count {n}")));
    }
    let d = samples[0].len();
    check_rows(samples, d, "pca_fit")?;
    if k > d {
        return Err(Error::InvalidArgument(format!("pca: k = {k} exceeds dimension {d}")));
    }
    let mut mean = vec![0.0; d];
    for r in samples {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| samples[i][j] - mean[j]);
    let denom = (n.max(2) - 1) as f64;
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / denom;

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut components = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut row: Vec<f64> = v_t.row(i).iter().copied().collect();
        let lead = row.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if lead < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(row);
        variances.push(svd.singular_values[i].powi(2) / denom);
    }
    let explained_variance = variances
        .iter()
        .map(|v| if total_variance > 0.0 { v / total_variance } else { 0.0 })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        variances,
        explained_variance,
        total_variance,
    })
}

/// `(x − mean) · componentsᵀ` for every sample.
pub fn pca_project(model: &PcaModel, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_rows(samples, model.dim(), "pca_project")?;
    Ok(samples
        .iter()
        .map(|x| {
            model
                .components
                .iter()
                .map(|c| c.iter().zip(x).zip(&model.mean).map(|((c, x), m)| c * (x - m)).sum())
                .collect()
        })
        .collect())
}

/// Mean point of a coordinate set.
pub fn centroid(coords: &[Vec<f64>]) -> Vec<f64> {
    let k = coords.first().map_or(0, Vec::len);
    let mut c = vec![0.0; k];
    for p in coords {
        c.iter_mut().zip(p).for_each(|(a, v)| *a += v);
    }
    c.iter_mut().for_each(|a| *a /= coords.len().max(1) as f64);
    c
}

/// Per-coordinate standard deviation (divisor `n`).
pub fn spread(coords: &[Vec<f64>]) -> Vec<f64> {
    let c = centroid(coords);
    let mut s = vec![0.0; c.len()];
    for p in coords {
        s.iter_mut().zip(p.iter().zip(&c)).for_each(|(a, (v, m))| *a += (v - m).powi(2));
    }
    s.iter().map(|v| (v / coords.len().max(1) as f64).sqrt()).collect()
}

/// Euclidean distance between the centroids of two coordinate sets.
pub fn domain_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    centroid(a).iter().zip(centroid(b)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_data_is_one_component() {
        let dir = [1.0, -2.0, 0.5];
        let rows: Vec<Vec<f64>> = (0..20).map(|i| dir.iter().map(|d| d * (i as f64 - 7.3)).collect()).collect();
        let m = pca_fit(&rows, 2).unwrap();
        assert!(m.explained_variance[0] >= 0.999);
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        // sign convention: largest entry (-2) is flipped positive
        for (c, d) in m.components[0].iter().zip(dir) {
            assert!((c + d / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn k_beyond_sample_count_is_an_error() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(pca_fit(&rows, 3).is_err());
        assert!(pca_fit(&rows, 0).is_err());
        assert!(pca_fit(&[vec![0.0, 1.0], vec![1.0]], 1).is_err());
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![2.0, 0.0, 1.0], vec![0.0, 5.0, 1.0], vec![4.0, 4.0, 4.0]];
        let m = pca_fit(&rows, 3).unwrap();
        let p = pca_project(&m, std::slice::from_ref(&m.mean)).unwrap();
        assert!(p[0].iter().all(|v| v.abs() < 1e-12));
        assert!(pca_project(&m, &[vec![1.0]]).is_err());
    }

    #[test]
    fn distance_of_shifted_sets() {
        let a = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        let b: Vec<Vec<f64>> = a.iter().map(|p| vec![p[0] + 3.0, p[1] - 4.0]).collect();
        assert_eq!(domain_distance(&a, &a), 0.0);
        assert!((domain_distance(&a, &b) - 5.0).abs() < 1e-12);
        assert_eq!(spread(&a), vec![1.0, 1.0]);
    }
}
