//! Phoneme-level pooling of frame features and residual vector quantization
//! producing prosody tokens.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{read_tokens_for, validate_segments, write_tokens, AlignmentSegment, FeatureMatrix, TokenSequence};
use crate::error::{Error, Result};
use crate::quantizer::{
    centroid_file_name, kmeans_fit, nearest_f32, read_codebook_files, write_codebook_files, Codebook, CodebookHeader,
    KMeansParams,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    #[default]
    Mean,
    Max,
}

impl std::str::FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolMode::Mean),
            "max" => Ok(PoolMode::Max),
            other => Err(Error::Config(format!("unknown pooling mode {other:?} (mean|max)"))),
        }
    }
}

/// Pools the frames of each aligned phoneme into one row. Row `i` of the
/// output summarizes frames `[start_i, end_i)` of segment `i`.
pub fn pool_phoneme(features: &FeatureMatrix, segments: &[AlignmentSegment], mode: PoolMode) -> Result<FeatureMatrix> {
    let segments = validate_segments(segments.to_vec(), segments.len(), features.frames())?;
    let dims = features.dims();
    let mut out = Vec::with_capacity(segments.len() * dims);
    for seg in &segments {
        let frames = seg.start_frame..seg.end_frame;
        match mode {
            PoolMode::Mean => {
                let mut acc = vec![0.0f64; dims];
                for f in frames {
                    for (a, &v) in acc.iter_mut().zip(features.row(f)) {
                        *a += v as f64;
                    }
                }
                let n = seg.len() as f64;
                out.extend(acc.iter().map(|a| (a / n) as f32));
            }
            PoolMode::Max => {
                let mut acc = vec![f32::NEG_INFINITY; dims];
                for f in frames {
                    for (a, &v) in acc.iter_mut().zip(features.row(f)) {
                        *a = a.max(v);
                    }
                }
                out.extend(acc);
            }
        }
    }
    FeatureMatrix::new(segments.len(), dims, out)
}

/// Stage-wise codebooks; stage `s` quantizes the residual left by stages
/// `0..s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RvqCodebook {
    stages: Vec<Codebook>,
    pub seed: u64,
}

impl RvqCodebook {
    pub fn new(stages: Vec<Codebook>, seed: u64) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::validation("RVQ needs at least one stage"))?;
        let (k, dims) = (first.k(), first.dims());
        if stages.iter().any(|s| s.k() != k || s.dims() != dims) {
            return Err(Error::validation("RVQ stages must share k and dims"));
        }
        Ok(Self { stages, seed })
    }

    pub fn stages(&self) -> usize {
        self.stages.len()
    }

    pub fn k_per_stage(&self) -> usize {
        self.stages[0].k()
    }

    pub fn dims(&self) -> usize {
        self.stages[0].dims()
    }

    pub fn stage(&self, s: usize) -> &Codebook {
        &self.stages[s]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = CodebookHeader::multi(
            self.stages(),
            self.k_per_stage(),
            self.dims(),
            self.seed,
            self.stages.iter().map(|s| s.inertia).collect(),
            &centroid_file_name(path),
        );
        let values = self
            .stages
            .iter()
            .flat_map(|s| s.centroids().values().to_vec())
            .collect();
        let stacked = FeatureMatrix::new(self.stages() * self.k_per_stage(), self.dims(), values)?;
        write_codebook_files(path, &header, &stacked)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, stacked) = read_codebook_files(path)?;
        let per_stage = header.k * header.dims;
        let stages = stacked
            .values()
            .chunks_exact(per_stage)
            .zip(&header.inertia)
            .enumerate()
            .map(|(s, (chunk, &inertia))| {
                let centroids = FeatureMatrix::new(header.k, header.dims, chunk.to_vec())?;
                Codebook::new(centroids, inertia, header.seed.wrapping_add(s as u64))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::format(path, e.to_string()))?;
        Self::new(stages, header.seed)
    }
}

/// Per-stage token sequences of equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackedTokens {
    stages: Vec<TokenSequence>,
}

impl StackedTokens {
    pub fn new(stages: Vec<TokenSequence>) -> Result<Self> {
        let len = stages
            .first()
            .ok_or_else(|| Error::validation("no token stages"))?
            .len();
        if stages.iter().any(|s| s.len() != len) {
            return Err(Error::validation("token stages differ in length"));
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[TokenSequence] {
        &self.stages
    }

    /// The sequence scored for prosody.
    pub fn stage0(&self) -> &TokenSequence {
        &self.stages[0]
    }

    pub fn len(&self) -> usize {
        self.stages[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Fits one k-means codebook per stage on the residuals of the previous
/// stages. Stage `s` is seeded with `seed + s`, so a single-stage fit is
/// identical to a plain k-means fit with the same seed.
pub fn rvq_fit(pooled: &[FeatureMatrix], stages: usize, k_per_stage: usize, seed: u64) -> Result<RvqCodebook> {
    rvq_fit_with(pooled, stages, &KMeansParams::new(k_per_stage, seed))
}

/// As [`rvq_fit`], taking iteration limits and frame budget from `base`.
pub fn rvq_fit_with(pooled: &[FeatureMatrix], stages: usize, base: &KMeansParams) -> Result<RvqCodebook> {
    if stages == 0 {
        return Err(Error::Config("RVQ needs at least one stage".into()));
    }
    let mut residuals = pooled.to_vec();
    let mut books = Vec::with_capacity(stages);
    for s in 0..stages {
        let params = KMeansParams {
            seed: base.seed.wrapping_add(s as u64),
            ..base.clone()
        };
        let cb = kmeans_fit(&residuals, &params).map_err(|e| Error::validation(format!("RVQ stage {s}: {e}")))?;
        if s + 1 < stages {
            residuals = residuals
                .iter()
                .map(|m| subtract_nearest(m, &cb))
                .collect::<Result<Vec<_>>>()?;
        }
        books.push(cb);
    }
    RvqCodebook::new(books, base.seed)
}

fn subtract_nearest(m: &FeatureMatrix, cb: &Codebook) -> Result<FeatureMatrix> {
    let mut out = m.values().to_vec();
    for row in out.chunks_exact_mut(m.dims()) {
        let (j, _) = cb.nearest(row);
        for (r, c) in row.iter_mut().zip(cb.centroid(j)) {
            *r -= c;
        }
    }
    FeatureMatrix::new(m.frames(), m.dims(), out)
}

/// Greedy stage-wise nearest-centroid encoding of the residuals.
pub fn rvq_encode(pooled: &FeatureMatrix, codebook: &RvqCodebook) -> Result<StackedTokens> {
    if pooled.dims() != codebook.dims() {
        return Err(Error::validation(format!(
            "dims mismatch: features {} vs codebook {}",
            pooled.dims(),
            codebook.dims()
        )));
    }
    let mut ids = vec![Vec::with_capacity(pooled.frames()); codebook.stages()];
    let mut residual = vec![0.0f32; pooled.dims()];
    for row in pooled.rows() {
        residual.copy_from_slice(row);
        for (s, stage) in codebook.stages.iter().enumerate() {
            let (j, _) = nearest_f32(&residual, stage.centroids().values(), stage.dims());
            ids[s].push(j as u32);
            for (r, c) in residual.iter_mut().zip(stage.centroid(j)) {
                *r -= c;
            }
        }
    }
    let k = codebook.k_per_stage() as u32;
    StackedTokens::new(
        ids.into_iter()
            .map(|v| TokenSequence::new(v, k))
            .collect::<Result<_>>()?,
    )
}

/// Sums the selected centroid of every stage.
pub fn rvq_decode(tokens: &StackedTokens, codebook: &RvqCodebook) -> Result<FeatureMatrix> {
    if tokens.stages.len() != codebook.stages() {
        return Err(Error::validation(format!(
            "{} token stages for a {}-stage codebook",
            tokens.stages.len(),
            codebook.stages()
        )));
    }
    let dims = codebook.dims();
    let k = codebook.k_per_stage() as u32;
    let mut out = vec![0.0f32; tokens.len() * dims];
    for (seq, stage) in tokens.stages.iter().zip(&codebook.stages) {
        for (row, &id) in out.chunks_exact_mut(dims).zip(seq.ids()) {
            if id >= k {
                return Err(Error::validation(format!("token id {id} outside stage vocabulary {k}")));
            }
            for (o, c) in row.iter_mut().zip(stage.centroid(id as usize)) {
                *o += c;
            }
        }
    }
    FeatureMatrix::new(tokens.len(), dims, out)
}

/// `<base>.s<stage>.tok`
pub fn stage_token_path(base: &Path, stage: usize) -> PathBuf {
    let mut name = base.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".s{stage}.tok"));
    base.with_file_name(name)
}

/// Writes one `.tok` file per stage holding every utterance, and returns
/// their paths.
pub fn write_stacked(base: &Path, entries: &[(String, StackedTokens)]) -> Result<Vec<PathBuf>> {
    let stages = match entries.first() {
        Some((_, t)) => t.stages.len(),
        None => return Ok(Vec::new()),
    };
    if let Some((utt, _)) = entries.iter().find(|(_, t)| t.stages.len() != stages) {
        return Err(Error::validation(format!(
            "utterance `{utt}` has a different number of stages"
        )));
    }
    (0..stages)
        .map(|s| {
            let path = stage_token_path(base, s);
            let table: Vec<(String, TokenSequence)> =
                entries.iter().map(|(u, t)| (u.clone(), t.stages[s].clone())).collect();
            write_tokens(&path, &table)?;
            Ok(path)
        })
        .collect()
}

pub fn read_stacked(base: &Path, utt_id: &str, codebook: &RvqCodebook) -> Result<StackedTokens> {
    let k = codebook.k_per_stage() as u32;
    StackedTokens::new(
        (0..codebook.stages())
            .map(|s| read_tokens_for(&stage_token_path(base, s), utt_id, k))
            .collect::<Result<_>>()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::kmeans_assign;

    fn seg(i: usize, s: usize, e: usize) -> AlignmentSegment {
        AlignmentSegment::new(i, s, e)
    }

    #[test]
    fn single_phoneme_is_global_mean() {
        let m = FeatureMatrix::from_rows(&[[1.0f32, 4.0], [2.0, 5.0], [6.0, 0.0]]).unwrap();
        let p = pool_phoneme(&m, &[seg(0, 0, 3)], PoolMode::Mean).unwrap();
        assert_eq!(p.values(), &[3.0, 3.0]);
    }

    #[test]
    fn hand_mean_two_segments() {
        let m = FeatureMatrix::from_rows(&[[1.0f32, 1.0], [3.0, 3.0], [5.0, 5.0]]).unwrap();
        let p = pool_phoneme(&m, &[seg(0, 0, 2), seg(1, 2, 3)], PoolMode::Mean).unwrap();
        assert_eq!(p.values(), &[2.0, 2.0, 5.0, 5.0]);
        let p = pool_phoneme(&m, &[seg(0, 0, 2), seg(1, 2, 3)], PoolMode::Max).unwrap();
        assert_eq!(p.values(), &[3.0, 3.0, 5.0, 5.0]);
    }

    #[test]
    fn invalid_segments_rejected() {
        let m = FeatureMatrix::from_rows(&[[1.0f32], [2.0]]).unwrap();
        assert!(pool_phoneme(&m, &[seg(0, 0, 2), seg(1, 1, 2)], PoolMode::Mean).is_err());
        assert!(pool_phoneme(&m, &[seg(0, 0, 3)], PoolMode::Mean).is_err());
    }

    #[test]
    fn single_stage_matches_kmeans() {
        let rows: Vec<[f32; 2]> = (0..40).map(|i| [(i % 7) as f32, (i % 5) as f32 * 0.5]).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let rvq = rvq_fit(std::slice::from_ref(&m), 1, 4, 21).unwrap();
        let km = kmeans_fit(std::slice::from_ref(&m), &KMeansParams::new(4, 21)).unwrap();
        assert_eq!(rvq.stage(0), &km);
        let enc = rvq_encode(&m, &rvq).unwrap();
        assert_eq!(enc.stage0(), &kmeans_assign(&m, &km).unwrap());
    }

    #[test]
    fn encode_exact_centroid_has_zero_residual() {
        let cb = Codebook::new(FeatureMatrix::from_rows(&[[0.0f32, 0.0], [3.0, 4.0]]).unwrap(), 0.0, 0).unwrap();
        let rvq = RvqCodebook::new(vec![cb], 0).unwrap();
        let row = FeatureMatrix::from_rows(&[[3.0f32, 4.0]]).unwrap();
        let tokens = rvq_encode(&row, &rvq).unwrap();
        assert_eq!(tokens.stage0().ids(), &[1]);
        assert_eq!(rvq_decode(&tokens, &rvq).unwrap(), row);
    }

    #[test]
    fn zero_centroids_decode_to_zero() {
        let zero = |seed| Codebook::new(FeatureMatrix::new(3, 2, vec![0.0; 6]).unwrap(), 0.0, seed).unwrap();
        let rvq = RvqCodebook::new(vec![zero(0), zero(1)], 0).unwrap();
        let tokens = StackedTokens::new(vec![
            TokenSequence::new(vec![0, 2, 1], 3).unwrap(),
            TokenSequence::new(vec![1, 1, 0], 3).unwrap(),
        ])
        .unwrap();
        assert_eq!(rvq_decode(&tokens, &rvq).unwrap().values(), &[0.0; 6]);
    }

    #[test]
    fn decode_rejects_out_of_range() {
        let cb = Codebook::new(FeatureMatrix::new(2, 1, vec![0.0, 1.0]).unwrap(), 0.0, 0).unwrap();
        let rvq = RvqCodebook::new(vec![cb], 0).unwrap();
        let tokens = StackedTokens::new(vec![TokenSequence::new(vec![2], 3).unwrap()]).unwrap();
        assert!(rvq_decode(&tokens, &rvq).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<[f32; 3]> = (0..30).map(|i| [i as f32, (i * i % 11) as f32, 0.5]).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let rvq = rvq_fit(std::slice::from_ref(&m), 2, 3, 4).unwrap();
        let path = dir.path().join("rvq.json");
        rvq.write(&path).unwrap();
        assert_eq!(RvqCodebook::read(&path).unwrap(), rvq);
        assert!(Codebook::read(&path).is_err());

        let tokens = rvq_encode(&m, &rvq).unwrap();
        let base = dir.path().join("u1.prosody");
        let files = write_stacked(&base, &[("u1".to_string(), tokens.clone())]).unwrap();
        assert_eq!(files[1], dir.path().join("u1.prosody.s1.tok"));
        assert_eq!(read_stacked(&base, "u1", &rvq).unwrap(), tokens);
    }
}
