//! Procedural stand-in for the two RGB-D domains: a clean rendered figure
//! and the same figure family with sensor-like artifacts.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{save_sample, DatasetManifest, Domain, RawSample};
use crate::error::{Error, Result};

/// Strength of the target-domain artifacts.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    /// Depth noise std at the closest and farthest depth.
    pub noise_near: f32,
    pub noise_far: f32,
    /// Probability that a background pixel next to the silhouette becomes
    /// a scattered tail point (halved for the second ring).
    pub tail_prob: f64,
    /// Largest depth-plane slope across the image.
    pub max_tilt: f32,
    /// Probability that a limb loses part of its far end.
    pub erosion_prob: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            noise_near: 0.01,
            noise_far: 0.05,
            tail_prob: 0.35,
            max_tilt: 0.25,
            erosion_prob: 0.5,
        }
    }
}

/// Ellipse or capsule with a depth offset and a colour.
struct Part {
    shape: Shape,
    depth: f32,
    rgb: [f32; 3],
}

enum Shape {
    Ellipse { c: [f32; 2], r: [f32; 2] },
    Capsule { a: [f32; 2], b: [f32; 2], r: f32 },
}

impl Shape {
    /// Surface height in `(0, 1]` inside the part, `None` outside.
    fn bulge(&self, p: [f32; 2]) -> Option<f32> {
        let q = match *self {
            Shape::Ellipse { c, r } => ((p[0] - c[0]) / r[0]).powi(2) + ((p[1] - c[1]) / r[1]).powi(2),
            Shape::Capsule { a, b, r } => {
                let ab = [b[0] - a[0], b[1] - a[1]];
                let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
                let d = [p[0] - a[0] - t * ab[0], p[1] - a[1] - t * ab[1]];
                (d[0] * d[0] + d[1] * d[1]) / (r * r)
            }
        };
        (q < 1.0).then(|| (1.0 - q).sqrt().max(1e-3))
    }
}

fn colour(rng: &mut impl Rng, lo: f32, hi: f32) -> [f32; 3] {
    [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)]
}

/// Figure parts in normalized `[x, y]` image coordinates.
fn figure(rng: &mut impl Rng, domain: Domain, params: &SynthParams) -> Vec<Part> {
    let cx = 0.5 + rng.gen_range(-0.04..0.04);
    let s = rng.gen_range(0.85..1.0);
    let at = |x: f32, y: f32| [cx + s * x, 0.5 + s * (y - 0.5)];
    let skin = {
        let t = rng.gen_range(0.35..0.95);
        [t, t * 0.8, t * 0.65]
    };
    let shirt = colour(rng, 0.1, 0.9);
    let trousers = colour(rng, 0.05, 0.6);
    let mut parts = vec![
        Part {
            shape: Shape::Ellipse { c: at(0.0, 0.18), r: [0.07 * s, 0.08 * s] },
            depth: -0.05,
            rgb: skin,
        },
        Part {
            shape: Shape::Ellipse { c: at(0.0, 0.42), r: [0.13 * s, 0.19 * s] },
            depth: 0.0,
            rgb: shirt,
        },
    ];
    let arms = [-1.0f32, 1.0].map(|side| (side, rng.gen_range(0.15f32..0.7)));
    let legs = [-1.0f32, 1.0].map(|side| (side, rng.gen_range(0.0f32..0.2)));
    let limbs = arms
        .map(|(side, a)| (at(side * 0.12, 0.27), [side * a.sin(), a.cos()], 0.3, 0.035, 0.12, skin))
        .into_iter()
        .chain(legs.map(|(side, a)| (at(side * 0.06, 0.58), [side * a.sin(), a.cos()], 0.34, 0.045, -0.03, trousers)));
    for (start, dir, len, r, depth, rgb) in limbs {
        let keep = if domain == Domain::Target && rng.gen_bool(params.erosion_prob) {
            1.0 - rng.gen_range(0.15..0.4)
        } else {
            1.0
        };
        let end = [start[0] + dir[0] * len * keep * s, start[1] + dir[1] * len * keep * s];
        parts.push(Part {
            shape: Shape::Capsule { a: start, b: end, r: r * s },
            depth,
            rgb,
        });
    }
    parts
}

/// One sample of `domain`.
pub fn synth_sample(height: usize, width: usize, domain: Domain, params: &SynthParams, rng: &mut impl Rng) -> RawSample {
    let parts = figure(rng, domain, params);
    let n = height * width;
    let mut depth = vec![f32::NAN; n];
    let mut rgb = vec![[0f32; 3]; n];
    for i in 0..height {
        for j in 0..width {
            let p = [(j as f32 + 0.5) / width as f32, (i as f32 + 0.5) / height as f32];
            for part in &parts {
                if let Some(b) = part.shape.bulge(p) {
                    // larger centered depth is closer to the sensor
                    let d = part.depth + 0.3 * b;
                    let k = i * width + j;
                    if depth[k].is_nan() || d > depth[k] {
                        depth[k] = d;
                        let shade = 0.6 + 0.4 * b;
                        rgb[k] = part.rgb.map(|c| c * shade);
                    }
                }
            }
        }
    }
    let inside: Vec<usize> = (0..n).filter(|&k| !depth[k].is_nan()).collect();
    // reference distance is the figure's centroid depth
    let centroid = inside.iter().map(|&k| depth[k]).sum::<f32>() / inside.len().max(1) as f32;
    for &k in &inside {
        depth[k] -= centroid;
    }

    if domain == Domain::Target {
        let tilt = [rng.gen_range(-params.max_tilt..=params.max_tilt), rng.gen_range(-params.max_tilt..=params.max_tilt)];
        for &k in &inside {
            let (i, j) = (k / width, k % width);
            let (x, y) = (j as f32 / width as f32 - 0.5, i as f32 / height as f32 - 0.5);
            depth[k] += tilt[0] * x + tilt[1] * y;
        }
        add_tail(&mut depth, &mut rgb, height, width, params.tail_prob, rng);
        let unit = Normal::new(0.0f32, 1.0).expect("unit normal");
        for k in 0..n {
            if !depth[k].is_nan() {
                let far = ((1.0 - depth[k]) / 2.0).clamp(0.0, 1.0);
                let sigma = params.noise_near + (params.noise_far - params.noise_near) * far;
                depth[k] += sigma * unit.sample(rng);
            }
        }
    }

    let mut out = RawSample::background(height, width);
    for k in 0..n {
        if !depth[k].is_nan() {
            out.depth[k] = depth[k].clamp(-0.95, 1.0);
            for c in 0..3 {
                out.rgb[3 * k + c] = ((rgb[k][c] * 255.0).round() as u8).max(1);
            }
        }
    }
    out
}

/// Scatters points behind the silhouette in a two-pixel ring around it.
fn add_tail(depth: &mut [f32], rgb: &mut [[f32; 3]], h: usize, w: usize, prob: f64, rng: &mut impl Rng) {
    for (ring, p) in [(1, prob), (2, prob / 2.0)] {
        let snapshot = depth.to_vec();
        for i in 0..h {
            for j in 0..w {
                let k = i * w + j;
                if !snapshot[k].is_nan() {
                    continue;
                }
                let neighbour = [(0isize, 1isize), (0, -1), (1, 0), (-1, 0)].into_iter().find_map(|(di, dj)| {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    ((0..h as isize).contains(&ni) && (0..w as isize).contains(&nj))
                        .then(|| ni as usize * w + nj as usize)
                        .filter(|&nk| !snapshot[nk].is_nan())
                });
                if let Some(nk) = neighbour {
                    if rng.gen_bool(p) {
                        depth[k] = snapshot[nk] - rng.gen_range(0.15..0.6) * ring as f32;
                        rgb[k] = rgb[nk].map(|c| c * 0.5);
                    }
                }
            }
        }
    }
}

fn domain_rng(seed: u64, domain: Domain, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((domain as u64) << 32) | index as u64);
    r
}

/// Writes `n_per_domain` samples per domain to `out_dir/<domain>/NNNNN.vrgd`
/// plus `out_dir/synthetic.txt` and `out_dir/target.txt`. Every sample has
/// its own RNG stream derived from `seed`.
pub fn synth_toy_dataset(
    out_dir: &Path,
    n_per_domain: usize,
    size: [usize; 2],
    seed: u64,
    params: &SynthParams,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if size[0] < 8 || size[1] < 8 {
        return Err(Error::InvalidArgument(format!("image size {size:?} too small (minimum 8x8)")));
    }
    let mut manifests = Vec::with_capacity(2);
    for domain in [Domain::Synthetic, Domain::Target] {
        let dir = out_dir.join(domain.as_str());
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let mut paths = Vec::with_capacity(n_per_domain);
        for i in 0..n_per_domain {
            let sample = synth_sample(size[0], size[1], domain, params, &mut domain_rng(seed, domain, i));
            let rel = Path::new(domain.as_str()).join(format!("{i:05}.vrgd"));
            save_sample(&out_dir.join(&rel), &sample)?;
            paths.push(rel);
        }
        let m = DatasetManifest {
            domain,
            size,
            paths,
            root: out_dir.to_path_buf(),
        };
        m.save(&out_dir.join(format!("{domain}.txt")))?;
        manifests.push(m);
    }
    let target = manifests.pop().expect("two domains");
    Ok((manifests.pop().expect("two domains"), target))
}
