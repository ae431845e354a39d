//! Seeded desk-scale corpora standing in for real speech assets.
//!
//! A [`SyntheticLanguage`] fixes, per phoneme, a content-token pattern, a
//! frame-feature mean, a typical duration and an F0 template (level and
//! slope in semitones). Utterances are sampled from a small lexicon, and
//! "systems" of varying quality are simulated by mispronouncing phonemes
//! (content features drawn from the wrong phoneme) and scrambling F0
//! templates. Every utterance uses its own RNG stream so corpora are stable
//! under changes of size.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    jsonl, write_alignment, write_manifest, AlignmentSegment, EvalRecord, F0Contour, FeatureMatrix, PhonemeInventory,
    PhonemeSequence, TokenSequence,
};
use crate::error::{Error, Result};
use crate::evalbench::{perturb_flip, perturb_inverse};

const PHONEMES: [(&str, bool); 39] = [
    ("AA", true),
    ("AE", true),
    ("AH", true),
    ("AO", true),
    ("AW", true),
    ("AY", true),
    ("B", true),
    ("CH", false),
    ("D", true),
    ("DH", true),
    ("EH", true),
    ("ER", true),
    ("EY", true),
    ("F", false),
    ("G", true),
    ("HH", false),
    ("IH", true),
    ("IY", true),
    ("JH", true),
    ("K", false),
    ("L", true),
    ("M", true),
    ("N", true),
    ("NG", true),
    ("OW", true),
    ("OY", true),
    ("P", false),
    ("R", true),
    ("S", false),
    ("SH", false),
    ("T", false),
    ("TH", false),
    ("UH", true),
    ("UW", true),
    ("V", true),
    ("W", true),
    ("Y", true),
    ("Z", true),
    ("ZH", true),
];

const LEXICON_SIZE: usize = 80;
const FEATURE_NOISE: f64 = 0.3;
const F0_JITTER_SEMITONES: f64 = 0.25;
const DECLINATION_SEMITONES: f64 = 2.0;
/// Noise added by the simulated prosody feature extractor.
pub const PROSODY_FEATURE_NOISE: f64 = 0.03;

#[derive(Debug, Clone)]
struct PhonemeTraits {
    voiced: bool,
    token_pattern: Vec<u32>,
    mean: Vec<f64>,
    duration: usize,
    f0_offset: f64,
    f0_slope: f64,
}

/// One sampled sentence.
#[derive(Debug, Clone)]
pub struct Sentence {
    pub text: String,
    /// Lexicon index of every word.
    pub words: Vec<usize>,
    /// Phoneme index (into the inventory) of every phoneme.
    pub phoneme_ids: Vec<usize>,
    /// Word index each phoneme belongs to.
    pub word_of: Vec<usize>,
    pub phonemes: PhonemeSequence,
}

/// Rendering of one sentence by one simulated system.
#[derive(Debug, Clone)]
pub struct Rendition {
    pub durations: Vec<usize>,
    pub content: FeatureMatrix,
    pub f0: F0Contour,
    pub mispronounced: Vec<bool>,
    pub scrambled: Vec<bool>,
}

/// Quality knobs of a simulated synthesis system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemQuality {
    /// Probability that a phoneme's content frames come from another phoneme.
    pub mispronounce: f64,
    /// Probability that a voiced phoneme's F0 template is replaced at random.
    pub prosody_scramble: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticLanguage {
    seed: u64,
    inventory: PhonemeInventory,
    traits: Vec<PhonemeTraits>,
    lexicon: Vec<Vec<usize>>,
    words: Vec<String>,
    content_vocab: usize,
}

impl SyntheticLanguage {
    pub fn new(seed: u64, content_vocab: usize, feature_dims: usize) -> Result<Self> {
        if content_vocab == 0 || feature_dims == 0 {
            return Err(Error::Config(
                "content vocabulary and feature dims must be positive".into(),
            ));
        }
        let mut rng = stream(seed, 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let traits = PHONEMES
            .iter()
            .map(|&(_, voiced)| {
                let pattern_len = rng.random_range(1..=2);
                PhonemeTraits {
                    voiced,
                    token_pattern: (0..pattern_len)
                        .map(|_| rng.random_range(0..content_vocab as u32))
                        .collect(),
                    mean: (0..feature_dims).map(|_| normal.sample(&mut rng)).collect(),
                    duration: rng.random_range(2..=4),
                    f0_offset: rng.random_range(-4.0..4.0),
                    f0_slope: rng.random_range(-3.0..3.0),
                }
            })
            .collect();
        let lexicon: Vec<Vec<usize>> = (0..LEXICON_SIZE)
            .map(|_| {
                let len = rng.random_range(2..=5);
                (0..len).map(|_| rng.random_range(0..PHONEMES.len())).collect()
            })
            .collect();
        let words = lexicon
            .iter()
            .map(|w| w.iter().map(|&p| PHONEMES[p].0.to_lowercase()).collect::<String>())
            .collect();
        let inventory = PhonemeInventory::new(PHONEMES.iter().map(|(s, _)| s.to_string()).collect())?;
        Ok(Self {
            seed,
            inventory,
            traits,
            lexicon,
            words,
            content_vocab,
        })
    }

    pub fn inventory(&self) -> &PhonemeInventory {
        &self.inventory
    }

    pub fn content_vocab(&self) -> usize {
        self.content_vocab
    }

    /// RNG for item `index` of a named sub-corpus.
    pub fn rng(&self, corpus: u64, index: u64) -> ChaCha8Rng {
        stream(self.seed, (corpus << 32) | (index + 1))
    }

    pub fn sentence(&self, rng: &mut impl Rng, min_words: usize, max_words: usize) -> Sentence {
        let n = rng.random_range(min_words..=max_words);
        let words: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.lexicon.len())).collect();
        let mut phoneme_ids = Vec::new();
        let mut word_of = Vec::new();
        for (wi, &w) in words.iter().enumerate() {
            phoneme_ids.extend(&self.lexicon[w]);
            word_of.extend(std::iter::repeat(wi).take(self.lexicon[w].len()));
        }
        let text = words
            .iter()
            .map(|&w| self.words[w].as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let phonemes = PhonemeSequence::new(phoneme_ids.iter().map(|&p: &usize| PHONEMES[p].0.to_string()).collect())
            .expect("non-empty");
        Sentence {
            text,
            words,
            phoneme_ids,
            word_of,
            phonemes,
        }
    }

    /// Deterministic phoneme-to-token map; each token is replaced by a
    /// uniformly random one with probability `noise`.
    pub fn content_tokens(&self, phoneme_ids: &[usize], noise: f64, rng: &mut impl Rng) -> TokenSequence {
        let mut ids = Vec::new();
        for &p in phoneme_ids {
            for &t in &self.traits[p].token_pattern {
                ids.push(if rng.random::<f64>() < noise {
                    rng.random_range(0..self.content_vocab as u32)
                } else {
                    t
                });
            }
        }
        TokenSequence::new(ids, self.content_vocab as u32).expect("ids within vocabulary")
    }

    pub fn durations(&self, phoneme_ids: &[usize], rng: &mut impl Rng) -> Vec<usize> {
        phoneme_ids
            .iter()
            .map(|&p| (self.traits[p].duration as i64 + rng.random_range(-1..=1)).max(2) as usize)
            .collect()
    }

    /// Renders frame features and F0 for a sentence with fixed durations.
    pub fn render(
        &self,
        sentence: &Sentence,
        durations: &[usize],
        quality: SystemQuality,
        rng: &mut impl Rng,
    ) -> Rendition {
        let base_f0: f64 = rng.random_range(90.0..220.0);
        let dims = self.traits[0].mean.len();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let frames: usize = durations.iter().sum();
        let mut content = Vec::with_capacity(frames * dims);
        let mut f0 = Vec::with_capacity(frames);
        let mut mispronounced = Vec::with_capacity(durations.len());
        let mut scrambled = Vec::with_capacity(durations.len());
        let mut frame = 0usize;
        for (&p, &dur) in sentence.phoneme_ids.iter().zip(durations) {
            let bad = rng.random::<f64>() < quality.mispronounce;
            let source = if bad {
                let other = rng.random_range(0..PHONEMES.len() - 1);
                if other >= p {
                    other + 1
                } else {
                    other
                }
            } else {
                p
            };
            mispronounced.push(bad);
            let t = &self.traits[p];
            let scramble = t.voiced && rng.random::<f64>() < quality.prosody_scramble;
            scrambled.push(scramble);
            let (offset, slope) = if scramble {
                (rng.random_range(-4.0..4.0), rng.random_range(-3.0..3.0))
            } else {
                (t.f0_offset, t.f0_slope)
            };
            for i in 0..dur {
                for &m in &self.traits[source].mean {
                    content.push((m + FEATURE_NOISE * normal.sample(rng)) as f32);
                }
                if t.voiced {
                    let within = (i as f64 + 0.5) / dur as f64 - 0.5;
                    let global = frame as f64 / frames as f64;
                    let semitones = offset + slope * within - DECLINATION_SEMITONES * global
                        + F0_JITTER_SEMITONES * normal.sample(rng);
                    f0.push(base_f0 * 2f64.powf(semitones / 12.0));
                } else {
                    f0.push(0.0);
                }
                frame += 1;
            }
        }
        Rendition {
            durations: durations.to_vec(),
            content: FeatureMatrix::new(frames, dims, content).expect("finite features"),
            f0: F0Contour::new(f0).expect("positive F0"),
            mispronounced,
            scrambled,
        }
    }

    /// Simulated ASR transcript: words containing a mispronounced phoneme are
    /// usually misrecognized; clean words occasionally are.
    pub fn asr_hypothesis(&self, sentence: &Sentence, mispronounced: &[bool], rng: &mut impl Rng) -> String {
        let mut out = Vec::new();
        for (wi, &w) in sentence.words.iter().enumerate() {
            let bad = sentence.word_of.iter().zip(mispronounced).any(|(&o, &m)| o == wi && m);
            let r: f64 = rng.random();
            if bad && r < 0.1 {
                continue;
            }
            if (bad && r < 0.85) || (!bad && r < 0.02) {
                let mut other = rng.random_range(0..self.words.len());
                if other == w {
                    other = (other + 1) % self.words.len();
                }
                out.push(self.words[other].as_str());
            } else {
                out.push(self.words[w].as_str());
            }
        }
        out.join(" ")
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Contiguous alignment segments for per-phoneme frame counts.
pub fn alignment_from_durations(durations: &[usize]) -> Vec<AlignmentSegment> {
    let mut start = 0;
    durations
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let seg = AlignmentSegment::new(i, start, start + d);
            start += d;
            seg
        })
        .collect()
}

/// Stand-in for an external prosody encoder: per frame, the F0 in
/// semitones relative to the utterance's voiced mean (scaled by 1/4), its
/// frame-to-frame change, and a voicing flag, plus small extractor noise.
/// Unvoiced frames carry zeros.
pub fn prosody_features(f0: &F0Contour, rng: &mut impl Rng) -> Result<FeatureMatrix> {
    let normal = Normal::new(0.0, PROSODY_FEATURE_NOISE).unwrap();
    let mean_log = {
        let voiced: Vec<f64> = f0.values().iter().filter(|v| **v > 0.0).map(|v| v.ln()).collect();
        if voiced.is_empty() {
            0.0
        } else {
            voiced.iter().sum::<f64>() / voiced.len() as f64
        }
    };
    let semis = |v: f64| 12.0 / std::f64::consts::LN_2 * (v.ln() - mean_log) / 4.0;
    let mut out = Vec::with_capacity(f0.len() * 3);
    let mut prev: Option<f64> = None;
    for &v in f0.values() {
        if v > 0.0 {
            let z = semis(v);
            let dz = prev.map_or(0.0, |p| z - p);
            prev = Some(z);
            out.extend([z + normal.sample(rng), dz + normal.sample(rng), 1.0]);
        } else {
            prev = None;
            out.extend([0.0, 0.0, 0.0]);
        }
    }
    FeatureMatrix::new(f0.len(), 3, out.into_iter().map(|v| v as f32).collect())
}

/// `n` (phonemes, content tokens) pairs from the deterministic
/// phoneme-to-token map with substitution noise.
pub fn content_pairs(
    lang: &SyntheticLanguage,
    corpus: u64,
    n: usize,
    noise: f64,
) -> Vec<(PhonemeSequence, TokenSequence)> {
    (0..n)
        .map(|i| {
            let mut rng = lang.rng(corpus, i as u64);
            let s = lang.sentence(&mut rng, 2, 4);
            let tokens = lang.content_tokens(&s.phoneme_ids, noise, &mut rng);
            (s.phonemes, tokens)
        })
        .collect()
}

/// `n` copy-task pairs over `vocab` symbols named `t0..`: the target
/// tokens equal the source ids.
pub fn copy_pairs(
    n: usize,
    vocab: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> (PhonemeInventory, Vec<(PhonemeSequence, TokenSequence)>) {
    let inventory = PhonemeInventory::new((0..vocab).map(|i| format!("t{i}")).collect()).expect("valid inventory");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            let ids: Vec<u32> = (0..len).map(|_| rng.random_range(0..vocab as u32)).collect();
            let ph = PhonemeSequence::new(ids.iter().map(|i| format!("t{i}")).collect()).expect("non-empty");
            (
                ph,
                TokenSequence::new(ids, vocab as u32).expect("ids within vocabulary"),
            )
        })
        .collect();
    (inventory, pairs)
}

/// Sizes and knobs for [`write_corpus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub train_utts: usize,
    pub eval_texts: usize,
    pub systems: usize,
    pub perturb_utts: usize,
    pub feature_dims: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            train_utts: 300,
            eval_texts: 20,
            systems: 5,
            perturb_utts: 30,
            feature_dims: 16,
        }
    }
}

/// Files produced by [`write_corpus`].
#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub inventory: PathBuf,
    pub train_manifest: PathBuf,
    pub eval_manifest: PathBuf,
    pub hypotheses: PathBuf,
    pub perturb_manifest: PathBuf,
    pub train_utts: usize,
    pub eval_utts: usize,
    pub perturb_utts: usize,
}

#[derive(Serialize, Deserialize)]
pub struct Hypothesis {
    pub utt_id: String,
    pub text: String,
}

/// Quality of system `s` out of `n`: system 0 is clean, later systems
/// mispronounce and scramble progressively more.
pub fn system_quality(s: usize, n: usize) -> SystemQuality {
    let frac = if n > 1 { s as f64 / (n - 1) as f64 } else { 0.0 };
    SystemQuality {
        mispronounce: 0.3 * frac,
        prosody_scramble: 0.6 * frac,
    }
}

const TRAIN: u64 = 1;
const EVAL: u64 = 2;
const PERTURB: u64 = 3;

/// Writes a complete desk-scale corpus: training utterances from the
/// natural system, an evaluation set rendered by several systems with MOS
/// and ASR hypotheses, and an original/inverse/flipped F0 perturbation set.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<CorpusSummary> {
    let lang = SyntheticLanguage::new(spec.seed, 50, spec.feature_dims)?;
    for sub in ["feats", "prosody", "f0", "align"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let inventory = dir.join("inventory.txt");
    lang.inventory().write(&inventory)?;
    let natural = SystemQuality {
        mispronounce: 0.0,
        prosody_scramble: 0.0,
    };

    let mut train = Vec::with_capacity(spec.train_utts);
    for i in 0..spec.train_utts {
        let mut rng = lang.rng(TRAIN, i as u64);
        let s = lang.sentence(&mut rng, 3, 5);
        let durations = lang.durations(&s.phoneme_ids, &mut rng);
        let r = lang.render(&s, &durations, natural, &mut rng);
        let utt = format!("tr{i:04}");
        let mut rec = write_rendition(dir, &utt, "natural", &s, &r, &mut rng)?;
        rec.text = s.text.clone();
        train.push(rec);
    }

    let mut eval = Vec::new();
    let mut hyps = Vec::new();
    let mos_noise = Normal::new(0.0, 0.25).unwrap();
    for t in 0..spec.eval_texts {
        let mut rng = lang.rng(EVAL, (t * 1000) as u64);
        let s = lang.sentence(&mut rng, 3, 5);
        let durations = lang.durations(&s.phoneme_ids, &mut rng);
        let reference_f0 = format!("f0/ev{t:03}-natural.ttsf");
        let systems: Vec<(String, SystemQuality)> = std::iter::once(("natural".to_string(), natural))
            .chain((0..spec.systems).map(|k| (format!("sys{k}"), system_quality(k, spec.systems))))
            .collect();
        for (k, (system, quality)) in systems.iter().enumerate() {
            let mut rng = lang.rng(EVAL, (t * 1000 + k + 1) as u64);
            let r = lang.render(&s, &durations, *quality, &mut rng);
            let utt = format!("ev{t:03}-{system}");
            let mut rec = write_rendition(dir, &utt, system, &s, &r, &mut rng)?;
            rec.text = s.text.clone();
            rec.ref_f0_path = Some(reference_f0.clone());
            let bad = frac(&r.mispronounced);
            let scrambled = frac(&r.scrambled);
            let mos = 4.5 - 4.0 * bad - 2.0 * scrambled + mos_noise.sample(&mut rng);
            rec.mos = Some(round3(mos.clamp(1.0, 5.0)));
            hyps.push(Hypothesis {
                utt_id: utt,
                text: lang.asr_hypothesis(&s, &r.mispronounced, &mut rng),
            });
            eval.push(rec);
        }
    }

    let mut perturb = Vec::new();
    for i in 0..spec.perturb_utts {
        let mut rng = lang.rng(PERTURB, i as u64);
        let s = lang.sentence(&mut rng, 3, 5);
        let durations = lang.durations(&s.phoneme_ids, &mut rng);
        let r = lang.render(&s, &durations, natural, &mut rng);
        let original_f0 = format!("f0/pt{i:03}-orig.ttsf");
        for variant in ["orig", "inverse", "flip"] {
            let f0 = match variant {
                "orig" => r.f0.clone(),
                "inverse" => perturb_inverse(&r.f0)?,
                _ => perturb_flip(&r.f0),
            };
            let rendition = Rendition { f0, ..r.clone() };
            let utt = format!("pt{i:03}-{variant}");
            let mut rec = write_rendition(dir, &utt, variant, &s, &rendition, &mut rng)?;
            rec.text = s.text.clone();
            rec.ref_f0_path = Some(original_f0.clone());
            perturb.push(rec);
        }
    }

    let summary = CorpusSummary {
        inventory,
        train_manifest: dir.join("train.jsonl"),
        eval_manifest: dir.join("eval.jsonl"),
        hypotheses: dir.join("eval_hyp.jsonl"),
        perturb_manifest: dir.join("perturb.jsonl"),
        train_utts: train.len(),
        eval_utts: eval.len(),
        perturb_utts: perturb.len(),
    };
    write_manifest(&summary.train_manifest, &train)?;
    write_manifest(&summary.eval_manifest, &eval)?;
    write_manifest(&summary.perturb_manifest, &perturb)?;
    jsonl::write(&summary.hypotheses, &hyps)?;
    Ok(summary)
}

fn write_rendition(
    dir: &Path,
    utt: &str,
    system: &str,
    s: &Sentence,
    r: &Rendition,
    rng: &mut impl Rng,
) -> Result<EvalRecord> {
    let feature = format!("feats/{utt}.ttsf");
    let prosody = format!("prosody/{utt}.ttsf");
    let f0 = format!("f0/{utt}.ttsf");
    let align = format!("align/{utt}.jsonl");
    r.content.write(&dir.join(&feature))?;
    prosody_features(&r.f0, rng)?.write(&dir.join(&prosody))?;
    r.f0.write(&dir.join(&f0))?;
    write_alignment(&dir.join(&align), utt, &alignment_from_durations(&r.durations))?;
    let mut rec = EvalRecord::new(utt, system);
    rec.phonemes = Some(s.phonemes.symbols().to_vec());
    rec.feature_path = Some(feature);
    rec.prosody_path = Some(prosody);
    rec.f0_path = Some(f0);
    rec.alignment_path = Some(align);
    Ok(rec)
}

fn frac(flags: &[bool]) -> f64 {
    flags.iter().filter(|b| **b).count() as f64 / flags.len().max(1) as f64
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Random permutation of `0..n` without fixed points (for `n >= 2`).
pub fn derangement(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if n < 2 {
        return idx;
    }
    loop {
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
        if idx.iter().enumerate().all(|(i, &j)| i != j) {
            return idx;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_alignment, Manifest};

    #[test]
    fn language_is_deterministic() {
        let a = SyntheticLanguage::new(3, 50, 8).unwrap();
        let b = SyntheticLanguage::new(3, 50, 8).unwrap();
        let pa = content_pairs(&a, 1, 5, 0.1);
        let pb = content_pairs(&b, 1, 5, 0.1);
        assert_eq!(pa, pb);
    }

    #[test]
    fn noiseless_tokens_follow_the_map() {
        let lang = SyntheticLanguage::new(1, 50, 4).unwrap();
        let mut rng = lang.rng(9, 0);
        let s = lang.sentence(&mut rng, 2, 2);
        let a = lang.content_tokens(&s.phoneme_ids, 0.0, &mut rng);
        let b = lang.content_tokens(&s.phoneme_ids, 0.0, &mut rng);
        assert_eq!(a, b);
    }

    #[test]
    fn prosody_features_zero_when_unvoiced() {
        let f0 = F0Contour::new(vec![0.0, 100.0, 200.0, 0.0]).unwrap();
        let m = prosody_features(&f0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(m.row(3), &[0.0, 0.0, 0.0]);
        assert_eq!(m.row(1)[2], 1.0);
        // 200 Hz is 12 semitones above 100 Hz; relative to the 6-semitone mean, scaled by 1/4
        assert!((m.row(2)[0] - 1.5).abs() < 0.2);
    }

    #[test]
    fn written_corpus_validates() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            train_utts: 4,
            eval_texts: 2,
            systems: 2,
            perturb_utts: 2,
            ..Default::default()
        };
        let summary = write_corpus(dir.path(), &spec).unwrap();
        assert_eq!(summary.eval_utts, 6);
        assert_eq!(summary.perturb_utts, 6);
        for path in [
            &summary.train_manifest,
            &summary.eval_manifest,
            &summary.perturb_manifest,
        ] {
            let m = Manifest::load(path).unwrap();
            for rec in &m.records {
                let ph = m.phonemes(rec).unwrap();
                let feats = FeatureMatrix::read(&m.require(rec, "feature_path", &rec.feature_path).unwrap()).unwrap();
                let f0 = F0Contour::read(&m.require(rec, "f0_path", &rec.f0_path).unwrap()).unwrap();
                assert_eq!(feats.frames(), f0.len());
                let align = m.require(rec, "alignment_path", &rec.alignment_path).unwrap();
                read_alignment(&align, &rec.utt_id, ph.len(), feats.frames()).unwrap();
            }
        }
    }
}
