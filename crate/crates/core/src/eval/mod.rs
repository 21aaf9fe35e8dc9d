//! Evaluation: PCA domain comparison, histograms, point clouds.

mod export;
mod pca;

use crate::error::Result;
use crate::tensor::Tensor;

pub use export::{channel_histogram, layout_maps, pointcloud_export, write_scatter_csv, ScatterRow};
pub use pca::{centroid, domain_distance, flatten_samples, pca_fit, pca_project, spread, PcaModel};

/// Which samples the PCA basis is fitted on.
pub const PCA_FIT: &str = "union";

/// Real and generated samples projected on one PCA basis fitted to their
/// union.
#[derive(Clone, Debug)]
pub struct DomainComparison {
    pub model: PcaModel,
    pub real: Vec<Vec<f64>>,
    pub generated: Vec<Vec<f64>>,
    /// Centroid distance between the two sets.
    pub distance: f64,
    pub real_spread: Vec<f64>,
    pub generated_spread: Vec<f64>,
}

impl DomainComparison {
    /// Scatter rows, real samples first, labelled `real` and `generated`.
    pub fn scatter_rows(&self) -> Vec<ScatterRow> {
        let label = |set: &[Vec<f64>], domain: &str| {
            set.iter()
                .enumerate()
                .map(|(i, c)| ScatterRow {
                    sample_id: i,
                    domain: domain.to_string(),
                    coords: c.clone(),
                })
                .collect::<Vec<_>>()
        };
        let mut rows = label(&self.real, "real");
        rows.extend(label(&self.generated, "generated"));
        rows
    }
}

/// Fits `k` components on the union of both batches and measures the
/// centroid distance between them.
pub fn compare_domains(real: &Tensor<f32>, generated: &Tensor<f32>, k: usize) -> Result<DomainComparison> {
    let (r, g) = (flatten_samples(real), flatten_samples(generated));
    let union: Vec<Vec<f64>> = r.iter().chain(&g).cloned().collect();
    let model = pca_fit(&union, k)?;
    let real = pca_project(&model, &r)?;
    let generated = pca_project(&model, &g)?;
    Ok(DomainComparison {
        distance: domain_distance(&real, &generated),
        real_spread: spread(&real),
        generated_spread: spread(&generated),
        model,
        real,
        generated,
    })
}
