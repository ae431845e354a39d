//! k-means codebook training and nearest-centroid assignment turning frame
//! features into content tokens.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureMatrix, TokenSequence};
use crate::error::{Error, Result};

/// Options for [`kmeans_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    /// Maximum number of Lloyd update steps.
    pub max_iters: usize,
    /// Stop once the relative inertia decrease falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Fit on at most this many frames, sampled with `seed`.
    pub max_frames: Option<usize>,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters: 100,
            tol: 1e-6,
            seed,
            max_frames: None,
        }
    }
}

/// A trained k-means codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: FeatureMatrix,
    /// Sum of squared distances of the training frames to their nearest
    /// stored centroid.
    pub inertia: f64,
    pub seed: u64,
}

impl Codebook {
    pub fn new(centroids: FeatureMatrix, inertia: f64, seed: u64) -> Result<Self> {
        if !(inertia.is_finite() && inertia >= 0.0) {
            return Err(Error::validation(format!("invalid inertia {inertia}")));
        }
        Ok(Self {
            centroids,
            inertia,
            seed,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.frames()
    }

    pub fn dims(&self) -> usize {
        self.centroids.dims()
    }

    pub fn centroids(&self) -> &FeatureMatrix {
        &self.centroids
    }

    pub fn centroid(&self, i: usize) -> &[f32] {
        self.centroids.row(i)
    }

    /// Index and squared distance of the nearest centroid; ties go to the
    /// lowest index.
    pub fn nearest(&self, row: &[f32]) -> (usize, f64) {
        nearest_f32(row, self.centroids.values(), self.dims())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_codebook_files(
            path,
            &CodebookHeader::single(self, &centroid_file_name(path)),
            &self.centroids,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, centroids) = read_codebook_files(path)?;
        if header.stages != 1 {
            return Err(Error::format(
                path,
                format!("expected a 1-stage codebook, found {} stages", header.stages),
            ));
        }
        Codebook::new(centroids, header.inertia.first().copied().unwrap_or(0.0), header.seed)
            .map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Result of a fit including the per-iteration inertia trace.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Inertia after initialization and after each Lloyd step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Fits a codebook with k-means++ initialization followed by Lloyd
/// iterations.
pub fn kmeans_fit(features: &[FeatureMatrix], params: &KMeansParams) -> Result<Codebook> {
    kmeans_fit_traced(features, params).map(|f| f.codebook)
}

pub fn kmeans_fit_traced(features: &[FeatureMatrix], params: &KMeansParams) -> Result<KMeansFit> {
    let dims = features
        .first()
        .ok_or_else(|| Error::validation("k-means needs at least one feature matrix"))?
        .dims();
    if let Some(m) = features.iter().find(|m| m.dims() != dims) {
        return Err(Error::validation(format!("dims mismatch: {} vs {dims}", m.dims())));
    }
    let k = params.k;
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let total: usize = features.iter().map(|m| m.frames()).sum();
    if total < k {
        return Err(Error::validation(format!("{total} frames are fewer than k={k}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut data: Vec<f64> = Vec::with_capacity(total * dims);
    for m in features {
        data.extend(m.values().iter().map(|&v| v as f64));
    }
    if let Some(budget) = params.max_frames.filter(|&b| b < total) {
        if budget < k {
            return Err(Error::Config(format!("frame budget {budget} is below k={k}")));
        }
        let mut picked = index::sample(&mut rng, total, budget).into_vec();
        picked.sort_unstable();
        data = picked
            .iter()
            .flat_map(|&i| data[i * dims..(i + 1) * dims].to_vec())
            .collect();
    }

    let distinct: HashSet<Vec<u64>> = data
        .chunks_exact(dims)
        .map(|r| r.iter().map(|v| v.to_bits()).collect())
        .collect();
    if distinct.len() < k {
        return Err(Error::validation(format!(
            "only {} distinct points for k={k}",
            distinct.len()
        )));
    }

    let mut centroids = kmeans_plus_plus(&data, dims, k, &mut rng);
    let (mut labels, mut dists) = assign_all(&data, &centroids, dims);
    let mut inertia: f64 = dists.iter().sum();
    let mut trace = vec![inertia];
    let mut converged = inertia == 0.0;

    for _ in 0..params.max_iters {
        if converged {
            break;
        }
        repair_empty(&data, dims, k, &mut centroids, &mut labels, &mut dists);
        centroids = cluster_means(&data, dims, k, &labels);
        let (new_labels, new_dists) = assign_all(&data, &centroids, dims);
        let new_inertia: f64 = new_dists.iter().sum();
        trace.push(new_inertia);
        let unchanged = new_labels == labels;
        let rel = if inertia > 0.0 {
            (inertia - new_inertia) / inertia
        } else {
            0.0
        };
        labels = new_labels;
        dists = new_dists;
        inertia = new_inertia;
        if unchanged || inertia == 0.0 || rel < params.tol {
            converged = true;
        }
    }

    let stored: Vec<f32> = centroids.iter().map(|&v| v as f32).collect();
    let rounded: Vec<f64> = stored.iter().map(|&v| v as f64).collect();
    let final_inertia: f64 = assign_all(&data, &rounded, dims).1.iter().sum();
    let codebook = Codebook::new(FeatureMatrix::new(k, dims, stored)?, final_inertia, params.seed)?;
    Ok(KMeansFit {
        codebook,
        trace,
        converged,
    })
}

/// Maps each frame to its nearest centroid.
pub fn kmeans_assign(features: &FeatureMatrix, codebook: &Codebook) -> Result<TokenSequence> {
    if features.dims() != codebook.dims() {
        return Err(Error::validation(format!(
            "dims mismatch: features {} vs codebook {}",
            features.dims(),
            codebook.dims()
        )));
    }
    let ids = features.rows().map(|r| codebook.nearest(r).0 as u32).collect();
    TokenSequence::new(ids, codebook.k() as u32)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn nearest_f32(row: &[f32], centroids: &[f32], dims: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.chunks_exact(dims).enumerate() {
        let d: f64 = row
            .iter()
            .zip(c)
            .map(|(&x, &y)| {
                let t = x as f64 - y as f64;
                t * t
            })
            .sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn nearest_f64(row: &[f64], centroids: &[f64], dims: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.chunks_exact(dims).enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign_all(data: &[f64], centroids: &[f64], dims: usize) -> (Vec<usize>, Vec<f64>) {
    data.par_chunks_exact(dims)
        .map(|row| nearest_f64(row, centroids, dims))
        .unzip()
}

fn kmeans_plus_plus(data: &[f64], dims: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = data.len() / dims;
    let mut centroids = Vec::with_capacity(k * dims);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&data[first * dims..(first + 1) * dims]);
    let mut d2: Vec<f64> = data
        .chunks_exact(dims)
        .map(|r| sq_dist(r, &centroids[..dims]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        // distinct-point check guarantees some positive distance remains
        let pick = pick.expect("a point not yet chosen as centroid");
        let c = data[pick * dims..(pick + 1) * dims].to_vec();
        for (i, row) in data.chunks_exact(dims).enumerate() {
            d2[i] = d2[i].min(sq_dist(row, &c));
        }
        centroids.extend(c);
    }
    centroids
}

/// Moves each empty centroid onto the point farthest from its current
/// centroid, taken from a cluster that keeps at least one other member.
fn repair_empty(data: &[f64], dims: usize, k: usize, centroids: &mut [f64], labels: &mut [usize], dists: &mut [f64]) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let far =
            (0..labels.len())
                .filter(|&i| counts[labels[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
        let Some(i) = far else { break };
        counts[labels[i]] -= 1;
        counts[j] = 1;
        labels[i] = j;
        dists[i] = 0.0;
        centroids[j * dims..(j + 1) * dims].copy_from_slice(&data[i * dims..(i + 1) * dims]);
    }
}

fn cluster_means(data: &[f64], dims: usize, k: usize, labels: &[usize]) -> Vec<f64> {
    let mut sums = vec![0.0; k * dims];
    let mut counts = vec![0usize; k];
    for (row, &l) in data.chunks_exact(dims).zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l * dims..(l + 1) * dims].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        for s in &mut sums[j * dims..(j + 1) * dims] {
            *s /= c as f64;
        }
    }
    sums
}

// ---- persistence -------------------------------------------------------

pub(crate) const CODEBOOK_FORMAT: &str = "ttscore-codebook";
const CODEBOOK_VERSION: u32 = 1;

/// JSON header stored next to the `.ttsf` centroid matrix. Multi-stage
/// (RVQ) codebooks stack their stages row-wise in the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CodebookHeader {
    pub format: String,
    pub version: u32,
    pub stages: usize,
    pub k: usize,
    pub dims: usize,
    pub seed: u64,
    /// Final inertia per stage.
    pub inertia: Vec<f64>,
    pub centroids: String,
}

impl CodebookHeader {
    fn single(cb: &Codebook, file: &str) -> Self {
        Self {
            format: CODEBOOK_FORMAT.into(),
            version: CODEBOOK_VERSION,
            stages: 1,
            k: cb.k(),
            dims: cb.dims(),
            seed: cb.seed,
            inertia: vec![cb.inertia],
            centroids: file.into(),
        }
    }

    pub fn multi(stages: usize, k: usize, dims: usize, seed: u64, inertia: Vec<f64>, file: &str) -> Self {
        Self {
            format: CODEBOOK_FORMAT.into(),
            version: CODEBOOK_VERSION,
            stages,
            k,
            dims,
            seed,
            inertia,
            centroids: file.into(),
        }
    }
}

pub(crate) fn centroid_file_name(header_path: &Path) -> String {
    let stem = header_path.file_stem().and_then(|s| s.to_str()).unwrap_or("codebook");
    format!("{stem}.ttsf")
}

pub(crate) fn write_codebook_files(path: &Path, header: &CodebookHeader, centroids: &FeatureMatrix) -> Result<()> {
    let json = serde_json::to_string_pretty(header).expect("serializable header");
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
    centroids.write(&sibling(path, &header.centroids))
}

pub(crate) fn read_codebook_files(path: &Path) -> Result<(CodebookHeader, FeatureMatrix)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: CodebookHeader = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if header.format != CODEBOOK_FORMAT || header.version != CODEBOOK_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported codebook {} v{}", header.format, header.version),
        ));
    }
    if header.stages == 0 || header.k == 0 || header.inertia.len() != header.stages {
        return Err(Error::format(path, "inconsistent codebook header"));
    }
    let centroids = FeatureMatrix::read(&sibling(path, &header.centroids))?;
    if centroids.frames() != header.stages * header.k || centroids.dims() != header.dims {
        return Err(Error::format(
            path,
            format!(
                "centroid matrix is {}x{}, header declares {}x{}",
                centroids.frames(),
                centroids.dims(),
                header.stages * header.k,
                header.dims
            ),
        ));
    }
    Ok((header, centroids))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent()
        .map(|p| p.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

/// Reads only the vocabulary size (`k`) from a codebook header.
pub fn codebook_vocab(path: &Path) -> Result<usize> {
    Ok(read_codebook_files(path)?.0.k)
}
