//! Histograms, point clouds, scatter tables and discriminator maps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::data::{unscale_depth, unscale_rgb};
use crate::error::{Error, Result};
use crate::models::{Discriminator, Mode};
use crate::tensor::Tensor;

fn single(sample: &Tensor<f32>, op: &'static str) -> Result<()> {
    let s = sample.shape();
    if s.n() == 1 && s.c() == 4 {
        Ok(())
    } else {
        Err(Error::InvalidShape {
            op,
            detail: format!("expected one 4-channel sample, got {s}"),
        })
    }
}

/// Per-channel counts of a scaled `[1, 4, h, w]` sample over `bins` equal
/// bins of `[0, 1]`; values outside the range land in the end bins.
pub fn channel_histogram(sample: &Tensor<f32>, bins: usize) -> Result<Vec<Vec<u64>>> {
    single(sample, "channel_histogram")?;
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("histogram needs at least 2 bins, got {bins}")));
    }
    let plane = sample.shape().h() * sample.shape().w();
    Ok(sample
        .data()
        .chunks(plane)
        .map(|ch| {
            let mut counts = vec![0u64; bins];
            for &v in ch {
                let b = ((v.clamp(0.0, 1.0) as f64) * bins as f64) as usize;
                counts[b.min(bins - 1)] += 1;
            }
            counts
        })
        .collect())
}

/// Writes foreground pixels on a `stride` grid as an ASCII PLY with
/// `x = column`, `y = row`, `z = unscaled depth`. Returns the vertex count.
pub fn pointcloud_export(sample: &Tensor<f32>, path: &Path, stride: usize) -> Result<usize> {
    single(sample, "pointcloud_export")?;
    let stride = stride.max(1);
    let (h, w) = (sample.shape().h(), sample.shape().w());
    let mut vertices = Vec::new();
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            let px: [f32; 4] = std::array::from_fn(|c| sample.at(0, c, y, x));
            if px.iter().all(|&v| v == 0.0) {
                continue;
            }
            vertices.push(format!(
                "{x} {y} {} {} {} {}",
                unscale_depth(px[3]),
                unscale_rgb(px[0]),
                unscale_rgb(px[1]),
                unscale_rgb(px[2])
            ));
        }
    }
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        vertices.len()
    )
    .map_err(io)?;
    for v in &vertices {
        writeln!(out, "{v}").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(vertices.len())
}

/// One row of a PCA scatter table.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterRow {
    pub sample_id: usize,
    pub domain: String,
    pub coords: Vec<f64>,
}

/// CSV with columns `sample_id, domain, c1..ck`.
pub fn write_scatter_csv(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.coords.len());
    let io = |e: csv::Error| Error::io(format!("writing {}", path.display()), e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["sample_id".to_string(), "domain".to_string()];
    header.extend((1..=k).map(|i| format!("c{i}")));
    w.write_record(&header).map_err(io)?;
    for r in rows {
        if r.coords.len() != k {
            return Err(Error::InvalidArgument(format!("scatter row {} has {} coordinates, expected {k}", r.sample_id, r.coords.len())));
        }
        let mut rec = vec![r.sample_id.to_string(), r.domain.clone()];
        rec.extend(r.coords.iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Eval-mode layout-branch maps `[n, 1, h', w']` of a discriminator.
pub fn layout_maps(disc: &Discriminator, samples: &Tensor<f32>) -> Result<Tensor<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let [_, layout, _] = disc.forward(samples, Mode::Eval, &mut rng)?;
    Ok(layout)
}
