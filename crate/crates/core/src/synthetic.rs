//! Seeded generators for small corpora with controlled label noise.
//!
//! Every corpus comes with its own vocabulary and random word vectors.
//! Sentences are filler words with a mention inserted somewhere and a few
//! cue words placed in the context: root-level cues say which top-level
//! type applies, child cues say which subtype applies. Mention words are
//! drawn from a pool per top-level type.
//!
//! Three corpora are provided:
//!
//! * [`overfit`]: clean single-path labels for a sanity run;
//! * [`overly_specific`]: most mentions only support a top-level type, and
//!   a share of the training labels are pushed down to its subtype;
//! * [`out_of_context`]: a share of the training mentions carry an extra
//!   candidate type-path that the context does not support.
//!
//! Generation is deterministic in the seed; the copies bundled under
//! `data/synthetic/` are produced by [`bundled`].

use std::path::Path;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Corpus, Labels, Mention, Provenance};
use crate::embedding::WordEmbeddings;
use crate::error::{read_to_string, Error, Result};
use crate::hierarchy::{TypeForest, TypeId};
use crate::optim::{seeded_stream, SeededRng};
use crate::training::HyperParams;

/// Seed of the bundled corpora.
pub const BUNDLED_SEED: u64 = 20_180_601;
/// Share of noisy training mentions in the bundled noise corpora.
pub const BUNDLED_NOISE: f64 = 0.4;
/// Word-vector size of the synthetic vocabularies.
pub const WORD_DIM: usize = 16;

const FILLERS: usize = 60;
const CUES_PER_TYPE: usize = 3;
const ENTITIES_PER_ROOT: usize = 8;
/// Offset scale of a word relative to its group centre.
const GROUP_SPREAD: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub name: String,
    pub forest: TypeForest,
    pub embeddings: WordEmbeddings,
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

impl SyntheticCorpus {
    /// File name and contents for every artefact. Dev and test files are
    /// omitted when they are the training set itself.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("types.txt", types_text(&self.forest)),
            ("embeddings.txt", self.embeddings.to_text()),
            ("train.txt", self.train.to_text(&self.forest)),
        ];
        if self.dev.mentions != self.train.mentions {
            out.push(("dev.txt", self.dev.to_text(&self.forest)));
        }
        if self.test.mentions != self.train.mentions {
            out.push(("test.txt", self.test.to_text(&self.forest)));
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in self.files() {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Reads a directory written by [`SyntheticCorpus::write_to`].
    pub fn load(dir: &Path) -> Result<Self> {
        let forest = TypeForest::from_file(&dir.join("types.txt"))?;
        let embeddings = WordEmbeddings::from_file(&dir.join("embeddings.txt"))?;
        let read = |name: &str, provenance| -> Result<Option<Corpus>> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(None);
            }
            let mut c = Corpus::from_file_with(&path, &forest, Labels::Required)?;
            c.provenance = provenance;
            Ok(Some(c))
        };
        let train = read("train.txt", Provenance::Train)?
            .ok_or_else(|| Error::Config(format!("{}: no train.txt", dir.display())))?;
        let dev = read("dev.txt", Provenance::Dev)?.unwrap_or_else(|| train.clone());
        let test = read("test.txt", Provenance::Test)?.unwrap_or_else(|| train.clone());
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(SyntheticCorpus {
            name,
            forest,
            embeddings,
            train,
            dev,
            test,
        })
    }
}

fn types_text(forest: &TypeForest) -> String {
    let mut s = String::new();
    for n in forest.names() {
        s.push_str(n);
        s.push('\n');
    }
    s
}

/// Readable token for a type: `/person/athlete` → `person.athlete`.
fn slug(type_name: &str) -> String {
    type_name.trim_start_matches('/').replace('/', ".")
}

struct Lexicon {
    fillers: Vec<String>,
    /// Cue words per type index.
    cues: Vec<Vec<String>>,
    /// Mention words per type index; only top-level types get a pool.
    entities: Vec<Vec<String>>,
}

impl Lexicon {
    fn new(forest: &TypeForest) -> Self {
        let fillers = (0..FILLERS).map(|i| format!("w{i}")).collect();
        let cues = forest
            .names()
            .iter()
            .map(|n| (0..CUES_PER_TYPE).map(|i| format!("cue.{}.{i}", slug(n))).collect())
            .collect();
        let entities = forest
            .ids()
            .map(|t| {
                if forest.parent(t).is_none() {
                    let n = slug(forest.name(t));
                    (0..ENTITIES_PER_ROOT).map(|i| format!("ent.{n}.{i}")).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        Lexicon {
            fillers,
            cues,
            entities,
        }
    }

    /// Word groups: fillers one by one, then each type's cue words, then
    /// each top-level type's mention words.
    fn groups(&self) -> Vec<&[String]> {
        let mut g: Vec<&[String]> = self.fillers.chunks(1).collect();
        g.extend(self.cues.iter().map(Vec::as_slice));
        g.extend(self.entities.iter().filter(|e| !e.is_empty()).map(Vec::as_slice));
        g
    }

    /// Words of one group share a random centre and differ by a smaller
    /// random offset, so related words sit close together. Components are
    /// rounded to 4 decimals so the text form is short and exact.
    fn embeddings(&self, rng: &mut SeededRng) -> Result<WordEmbeddings> {
        let scale = 1.0 / (WORD_DIM as f64).sqrt();
        let mut gauss = |s: f64| -> Vec<f64> {
            (0..WORD_DIM)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * s)
                .collect()
        };
        let mut entries = Vec::new();
        for group in self.groups() {
            let centre = gauss(scale);
            for w in group {
                let offset = gauss(GROUP_SPREAD * scale);
                let v = centre
                    .iter()
                    .zip(&offset)
                    .map(|(c, o)| ((c + o) * 1e4).round() / 1e4)
                    .collect();
                entries.push((w.clone(), v));
            }
        }
        WordEmbeddings::from_vectors(entries)
    }

    fn root_of(forest: &TypeForest, t: TypeId) -> TypeId {
        forest.expand_to_path(t)[0]
    }

    /// A sentence for a mention whose context supports exactly `evidence`:
    /// one cue for every type on its path.
    fn sentence(&self, forest: &TypeForest, evidence: TypeId, rng: &mut SeededRng) -> (Vec<String>, usize, usize) {
        let context_len = rng.random_range(3..=9);
        let mention_len = rng.random_range(1..=2);
        let root = Self::root_of(forest, evidence);
        let mention: Vec<String> = (0..mention_len)
            .map(|_| self.entities[root.0].choose(rng).expect("pool").clone())
            .collect();
        let mut context: Vec<String> = (0..context_len)
            .map(|_| self.fillers.choose(rng).expect("fillers").clone())
            .collect();
        let path = forest.expand_to_path(evidence);
        let slots = index::sample(rng, context_len, path.len().min(context_len));
        for (slot, t) in slots.into_iter().zip(&path) {
            context[slot] = self.cues[t.0].choose(rng).expect("cues").clone();
        }
        let start = rng.random_range(0..=context_len);
        let mut tokens = context[..start].to_vec();
        tokens.extend(mention);
        tokens.extend_from_slice(&context[start..]);
        (tokens, start, start + mention_len)
    }

    fn mention(
        &self,
        forest: &TypeForest,
        evidence: TypeId,
        labels: Vec<TypeId>,
        rng: &mut SeededRng,
    ) -> Result<Mention> {
        let (tokens, start, end) = self.sentence(forest, evidence, rng);
        Mention::new(tokens, start, end, labels, forest)
    }
}

fn corpus(mentions: Vec<Mention>, provenance: Provenance) -> Corpus {
    Corpus::new(mentions, provenance)
}

/// 200 clean single-path mentions over an 8-type forest of depth 3; dev and
/// test are the training set.
pub fn overfit(seed: u64) -> Result<SyntheticCorpus> {
    let forest = TypeForest::parse([
        "/person",
        "/person/artist",
        "/person/artist/actor",
        "/person/athlete",
        "/organization",
        "/organization/company",
        "/location",
        "/location/city",
    ])?;
    let lex = Lexicon::new(&forest);
    let embeddings = lex.embeddings(&mut seeded_stream(seed, 0))?;
    let mut rng = seeded_stream(seed, 1);
    let types: Vec<TypeId> = forest.ids().collect();
    let mentions = (0..200)
        .map(|i| {
            // Every type appears; the rest is uniform.
            let t = if i < types.len() { types[i] } else { *types.choose(&mut rng).expect("types") };
            lex.mention(&forest, t, forest.expand_to_path(t), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let train = corpus(mentions, Provenance::Train);
    Ok(SyntheticCorpus {
        name: "overfit".into(),
        forest,
        embeddings,
        dev: train.clone(),
        test: train.clone(),
        train,
    })
}

const GENERIC_SHARE: f64 = 0.7;
const NOISE_TRAIN: usize = 800;
const NOISE_TEST: usize = 500;
const NOISE_DEV_FRACTION: f64 = 0.2;

fn check_noise(noise: f64) -> Result<()> {
    if (0.0..1.0).contains(&noise) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise share must be in [0, 1), got {noise}")))
    }
}

/// Four top-level types with one subtype each. 70% of mentions only have
/// top-level evidence. In training, `noise · N` of those generic mentions
/// (spread evenly over the top-level types) are labelled with the subtype
/// path instead. Dev and test are clean; dev is sampled from the test set.
pub fn overly_specific(seed: u64, noise: f64) -> Result<SyntheticCorpus> {
    check_noise(noise)?;
    let forest = TypeForest::parse([
        "/person",
        "/person/athlete",
        "/organization",
        "/organization/company",
        "/location",
        "/location/city",
        "/product",
        "/product/software",
    ])?;
    let lex = Lexicon::new(&forest);
    let embeddings = lex.embeddings(&mut seeded_stream(seed, 0))?;
    let roots: Vec<TypeId> = forest.roots().collect();
    let child = |r: TypeId| forest.children(r).next().expect("one subtype per root");

    // Evidence per mention, cycling through roots so every root has the same count.
    let evidence = |n: usize, rng: &mut SeededRng| -> Vec<(TypeId, bool)> {
        let generic = (GENERIC_SHARE * n as f64).round() as usize;
        let mut out: Vec<(TypeId, bool)> = (0..n)
            .map(|i| {
                let r = roots[i % roots.len()];
                if i < generic {
                    (r, true)
                } else {
                    (child(r), false)
                }
            })
            .collect();
        // Shuffle once so sentence draws are interleaved.
        use rand::seq::SliceRandom;
        out.shuffle(rng);
        out
    };

    let mut rng = seeded_stream(seed, 1);
    let train_ev = evidence(NOISE_TRAIN, &mut rng);
    let noisy_total = (noise * NOISE_TRAIN as f64).round() as usize;
    let generic_idx: Vec<Vec<usize>> = roots
        .iter()
        .map(|&r| {
            train_ev
                .iter()
                .enumerate()
                .filter(|(_, (t, g))| *g && *t == r)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let available: usize = generic_idx.iter().map(Vec::len).sum();
    if noisy_total > available {
        return Err(Error::InvalidArgument(format!(
            "noise share {noise} exceeds the share of generic mentions"
        )));
    }
    let mut noisy = vec![false; NOISE_TRAIN];
    for (k, idx) in generic_idx.iter().enumerate() {
        let quota = noisy_total / roots.len() + usize::from(k < noisy_total % roots.len());
        for j in index::sample(&mut rng, idx.len(), quota) {
            noisy[idx[j]] = true;
        }
    }
    let train = train_ev
        .iter()
        .zip(&noisy)
        .map(|(&(t, _), &is_noisy)| {
            let label = if is_noisy { child(t) } else { t };
            lex.mention(&forest, t, forest.expand_to_path(label), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let test_ev = evidence(NOISE_TEST, &mut rng);
    let test = test_ev
        .iter()
        .map(|&(t, _)| lex.mention(&forest, t, forest.expand_to_path(t), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let (dev, test) = corpus(test, Provenance::Test).split_dev(NOISE_DEV_FRACTION, seed)?;
    Ok(SyntheticCorpus {
        name: "overly_specific".into(),
        forest,
        embeddings,
        train: corpus(train, Provenance::Raw),
        dev,
        test,
    })
}

const OOC_TRAIN: usize = 400;

/// Four top-level types with two subtypes each; evidence is uniform over
/// all twelve types. In training, `noise · N` mentions also list a second
/// type-path that the sentence says nothing about, so their label set is
/// not a single path. Dev and test are clean.
pub fn out_of_context(seed: u64, noise: f64) -> Result<SyntheticCorpus> {
    check_noise(noise)?;
    let forest = TypeForest::parse([
        "/person",
        "/person/athlete",
        "/person/coach",
        "/organization",
        "/organization/company",
        "/organization/team",
        "/location",
        "/location/city",
        "/location/country",
        "/product",
        "/product/software",
        "/product/car",
    ])?;
    let lex = Lexicon::new(&forest);
    let embeddings = lex.embeddings(&mut seeded_stream(seed, 0))?;
    let types: Vec<TypeId> = forest.ids().collect();
    let mut rng = seeded_stream(seed, 1);

    let noisy_total = (noise * OOC_TRAIN as f64).round() as usize;
    let mut noisy = vec![false; OOC_TRAIN];
    for i in index::sample(&mut rng, OOC_TRAIN, noisy_total) {
        noisy[i] = true;
    }
    let mut train = Vec::with_capacity(OOC_TRAIN);
    for (i, &is_noisy) in noisy.iter().enumerate() {
        let t = types[i % types.len()];
        let mut labels = forest.expand_to_path(t);
        if is_noisy {
            // Anything off the gold path that is not below its terminal.
            let off: Vec<TypeId> = types
                .iter()
                .copied()
                .filter(|&u| !labels.contains(&u) && !forest.is_ancestor(t, u))
                .collect();
            let extra = *off.choose(&mut rng).expect("off-path types exist");
            for u in forest.expand_to_path(extra) {
                if !labels.contains(&u) {
                    labels.push(u);
                }
            }
        }
        train.push(lex.mention(&forest, t, labels, &mut rng)?);
    }
    let test = (0..NOISE_TEST)
        .map(|i| {
            let t = types[i % types.len()];
            lex.mention(&forest, t, forest.expand_to_path(t), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let (dev, test) = corpus(test, Provenance::Test).split_dev(NOISE_DEV_FRACTION, seed)?;
    Ok(SyntheticCorpus {
        name: "out_of_context".into(),
        forest,
        embeddings,
        train: corpus(train, Provenance::Raw),
        dev,
        test,
    })
}

/// Small-model settings that train on these corpora in seconds.
pub fn hyperparams(seed: u64) -> HyperParams {
    HyperParams {
        lr: 0.01,
        position_dim: 5,
        hidden: 16,
        input_keep: 0.9,
        output_keep: 0.9,
        l2: 0.0,
        beta: 1.0,
        window: 10,
        batch: 20,
        epochs: 200,
        patience: 10,
        seed,
        mention_dropout: true,
        mention_positions: false,
    }
}

/// The corpora shipped under `data/synthetic/`.
pub fn bundled() -> Result<Vec<SyntheticCorpus>> {
    Ok(vec![
        overfit(BUNDLED_SEED)?,
        overly_specific(BUNDLED_SEED, BUNDLED_NOISE)?,
        out_of_context(BUNDLED_SEED, BUNDLED_NOISE)?,
    ])
}

/// Directory of the bundled data inside this crate.
pub fn data_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Loads a bundled synthetic corpus by name.
pub fn load_bundled(name: &str) -> Result<SyntheticCorpus> {
    SyntheticCorpus::load(&data_dir().join("synthetic").join(name))
}

/// Compares the bundled files with a fresh generation; returns the names
/// of files that differ.
pub fn stale_bundled_files() -> Result<Vec<String>> {
    let mut stale = Vec::new();
    for c in bundled()? {
        let dir = data_dir().join("synthetic").join(&c.name);
        for (name, text) in c.files() {
            let path = dir.join(name);
            let on_disk = read_to_string(&path).unwrap_or_default();
            if on_disk != text {
                stale.push(path.display().to_string());
            }
        }
    }
    Ok(stale)
}
