//! Run configuration: a flat `key = value` file on top of a dataset profile.
//!
//! ```text
//! # figer.cfg
//! profile = figer
//! variant = NFETC-hier(r)
//! types = figer/types.txt
//! train = figer/train.txt
//! test = figer/test.txt
//! embeddings = glove.840B.300d.txt
//! ```
//!
//! `profile` is applied first wherever it appears; later keys override it.
//! Relative paths resolve against `$NFETC_DATA_ROOT` when set, otherwise
//! against the directory of the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::corpus::{Corpus, Labels, Provenance};
use crate::embedding::WordEmbeddings;
use crate::error::{read_to_string, Error, Result};
use crate::hierarchy::{RefinementMap, TypeForest};
use crate::training::{select_variant, HyperParams, Variant};

/// Environment variable naming the directory relative data paths start from.
pub const DATA_ROOT_ENV: &str = "NFETC_DATA_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Figer,
    Ontonotes,
}

impl Profile {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "figer" => Ok(Profile::Figer),
            "ontonotes" => Ok(Profile::Ontonotes),
            other => Err(Error::Config(format!(
                "unknown profile `{other}`; expected figer or ontonotes"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Figer => "figer",
            Profile::Ontonotes => "ontonotes",
        }
    }

    pub fn hyperparams(self) -> HyperParams {
        match self {
            Profile::Figer => HyperParams::figer(),
            Profile::Ontonotes => HyperParams::ontonotes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub profile: Profile,
    pub hp: HyperParams,
    pub variant: Variant,
    /// One run per seed; empty means the single seed in `hp`.
    pub seeds: Vec<u64>,
    /// Share of the test set held out as dev when no dev file is given.
    pub dev_fraction: f64,
    pub hier_at_inference: bool,
    pub select_on_adjusted: bool,
    pub types: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub refinement: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

/// Every key with a one-line description, in help order.
pub const KEYS: &[(&str, &str)] = &[
    ("profile", "dataset profile supplying the defaults (figer | ontonotes)"),
    ("variant", "NFETC(f) | NFETC-hier(f) | NFETC(r) | NFETC-hier(r)"),
    ("lr", "Adam learning rate"),
    ("dp", "position embedding size"),
    ("ds", "LSTM hidden size"),
    ("pi", "input keep probability"),
    ("po", "output keep probability"),
    ("lambda", "L2 weight"),
    ("beta", "hierarchical penalty weight"),
    ("window", "context tokens kept on each side of the mention"),
    ("batch", "mentions per mini-batch"),
    ("epochs", "maximum epochs"),
    ("patience", "epochs without dev improvement before stopping"),
    ("seed", "run seed"),
    ("seeds", "comma-separated seeds for repeated runs"),
    ("dev_fraction", "share of the test set used as dev when `dev` is unset"),
    ("mention_dropout", "apply dropout to the mention LSTM"),
    ("mention_positions", "feed position vectors to the mention LSTM"),
    ("hier_at_inference", "predict from the hierarchy-adjusted distribution"),
    ("select_on_adjusted", "candidate selection uses the adjusted distribution"),
    ("types", "type forest file"),
    ("train", "training corpus"),
    ("dev", "dev corpus (optional)"),
    ("test", "test corpus"),
    ("embeddings", "word vector file"),
    ("refinement", "type refinement map (optional)"),
    ("out_dir", "output directory"),
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for `{key}`"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl Config {
    pub fn for_profile(profile: Profile) -> Self {
        Config {
            profile,
            hp: profile.hyperparams(),
            variant: Variant::RawHier,
            seeds: Vec::new(),
            dev_fraction: 0.1,
            hier_at_inference: false,
            select_on_adjusted: true,
            types: None,
            train: None,
            dev: None,
            test: None,
            embeddings: None,
            refinement: None,
            out_dir: PathBuf::from("out"),
            base_dir: PathBuf::from("."),
        }
    }

    /// Switches profile, resetting every hyperparameter to its defaults.
    pub fn apply_profile(&mut self, profile: Profile) {
        let seed = self.hp.seed;
        self.profile = profile;
        self.hp = HyperParams {
            seed,
            ..profile.hyperparams()
        };
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let hp = &mut self.hp;
        match key.trim() {
            "profile" => self.apply_profile(Profile::parse(value)?),
            "variant" => self.variant = select_variant(value)?,
            "lr" => hp.lr = parse_value(key, value)?,
            "dp" => hp.position_dim = parse_value(key, value)?,
            "ds" => hp.hidden = parse_value(key, value)?,
            "pi" => hp.input_keep = parse_value(key, value)?,
            "po" => hp.output_keep = parse_value(key, value)?,
            "lambda" => hp.l2 = parse_value(key, value)?,
            "beta" => hp.beta = parse_value(key, value)?,
            "window" => hp.window = parse_value(key, value)?,
            "batch" => hp.batch = parse_value(key, value)?,
            "epochs" => hp.epochs = parse_value(key, value)?,
            "patience" => hp.patience = parse_value(key, value)?,
            "seed" => hp.seed = parse_value(key, value)?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?
            }
            "dev_fraction" => self.dev_fraction = parse_value(key, value)?,
            "mention_dropout" => hp.mention_dropout = parse_bool(key, value)?,
            "mention_positions" => hp.mention_positions = parse_bool(key, value)?,
            "hier_at_inference" => self.hier_at_inference = parse_bool(key, value)?,
            "select_on_adjusted" => self.select_on_adjusted = parse_bool(key, value)?,
            "types" => self.types = opt_path(value),
            "train" => self.train = opt_path(value),
            "dev" => self.dev = opt_path(value),
            "test" => self.test = opt_path(value),
            "embeddings" => self.embeddings = opt_path(value),
            "refinement" => self.refinement = opt_path(value),
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            other => {
                let known: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
                return Err(Error::Config(format!(
                    "unknown key `{other}`; known keys: {}",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k, v)
    }

    /// Parses config text. `source_name` appears in error messages.
    pub fn parse_text(text: &str, source_name: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, n + 1, "expected `key = value`"))?;
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let mut config = Config::for_profile(Profile::Figer);
        if let Some((_, _, v)) = pairs.iter().find(|(_, k, _)| k == "profile") {
            config.apply_profile(Profile::parse(v)?);
        }
        for (n, k, v) in pairs.iter().filter(|(_, k, _)| k != "profile") {
            config
                .set(k, v)
                .map_err(|e| Error::parse(source_name, *n, e.to_string()))?;
        }
        Ok(config)
    }

    /// Loads a config file and applies `overrides` (`key=value`) on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut config = Self::parse_text(&read_to_string(path)?, &path.display().to_string())?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for o in overrides {
            config.set_pair(o)?;
        }
        Ok(config)
    }

    /// Serialises every key, so `parse_text(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let hp = &self.hp;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "profile = {}", self.profile.name());
        let _ = writeln!(s, "variant = {}", self.variant);
        let _ = writeln!(s, "lr = {}", hp.lr);
        let _ = writeln!(s, "dp = {}", hp.position_dim);
        let _ = writeln!(s, "ds = {}", hp.hidden);
        let _ = writeln!(s, "pi = {}", hp.input_keep);
        let _ = writeln!(s, "po = {}", hp.output_keep);
        let _ = writeln!(s, "lambda = {}", hp.l2);
        let _ = writeln!(s, "beta = {}", hp.beta);
        let _ = writeln!(s, "window = {}", hp.window);
        let _ = writeln!(s, "batch = {}", hp.batch);
        let _ = writeln!(s, "epochs = {}", hp.epochs);
        let _ = writeln!(s, "patience = {}", hp.patience);
        let _ = writeln!(s, "seed = {}", hp.seed);
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        let _ = writeln!(s, "dev_fraction = {}", self.dev_fraction);
        let _ = writeln!(s, "mention_dropout = {}", hp.mention_dropout);
        let _ = writeln!(s, "mention_positions = {}", hp.mention_positions);
        let _ = writeln!(s, "hier_at_inference = {}", self.hier_at_inference);
        let _ = writeln!(s, "select_on_adjusted = {}", self.select_on_adjusted);
        let _ = writeln!(s, "types = {}", path(&self.types));
        let _ = writeln!(s, "train = {}", path(&self.train));
        let _ = writeln!(s, "dev = {}", path(&self.dev));
        let _ = writeln!(s, "test = {}", path(&self.test));
        let _ = writeln!(s, "embeddings = {}", path(&self.embeddings));
        let _ = writeln!(s, "refinement = {}", path(&self.refinement));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        s
    }

    /// Seeds to run, never empty.
    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.hp.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn loss_config(&self) -> crate::loss::LossConfig {
        let mut l = self.variant.loss_config(&self.hp);
        l.hier_at_inference = self.hier_at_inference;
        l.select_on_adjusted = self.select_on_adjusted;
        l
    }

    /// Absolute or data-root-relative form of `path`.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            return path.to_path_buf();
        }
        match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
            _ => self.base_dir.join(path),
        }
    }

    fn require(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf> {
        let p = value
            .as_ref()
            .ok_or_else(|| Error::Config(format!("`{key}` is not set")))?;
        Ok(self.resolve(p))
    }

    pub fn out_path(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    /// The configured forest with the refinement applied, if any.
    pub fn load_forest(&self) -> Result<(TypeForest, TypeForest)> {
        let original = TypeForest::from_file(&self.require("types", &self.types)?)?;
        let refined = match &self.refinement {
            Some(p) => original.apply_refinement(&RefinementMap::from_file(&self.resolve(p))?)?,
            None => original.clone(),
        };
        Ok((original, refined))
    }

    /// Everything a training or evaluation run reads.
    pub fn load_data(&self) -> Result<Data> {
        let (original, forest) = self.load_forest()?;
        let corpus = |key: &str, p: &Option<PathBuf>, provenance| -> Result<Corpus> {
            let path = self.require(key, p)?;
            let mut c = Corpus::from_file_with(&path, &original, Labels::Required)?.with_forest(&forest)?;
            c.provenance = provenance;
            Ok(c)
        };
        let embeddings = WordEmbeddings::from_file(&self.require("embeddings", &self.embeddings)?)?;
        let train = corpus("train", &self.train, Provenance::Raw)?;
        let test = corpus("test", &self.test, Provenance::Test)?;
        let (dev, test) = match &self.dev {
            Some(_) => (corpus("dev", &self.dev, Provenance::Dev)?, test),
            None => test.split_dev(self.dev_fraction, self.hp.seed)?,
        };
        Ok(Data {
            original_forest: original,
            forest,
            embeddings,
            train,
            dev,
            test,
        })
    }
}

/// Loaded corpora, embeddings and forest for one configuration.
#[derive(Clone, Debug)]
pub struct Data {
    /// The forest as read from disk, used to parse label names.
    pub original_forest: TypeForest,
    /// The forest after refinement; same type indices.
    pub forest: TypeForest,
    pub embeddings: WordEmbeddings,
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

impl Data {
    pub fn experiment(&self) -> crate::training::Experiment<'_> {
        crate::training::Experiment {
            forest: &self.forest,
            embeddings: &self.embeddings,
            train: &self.train,
            dev: &self.dev,
            test: &self.test,
        }
    }
}

/// Table of every key with its default under each profile.
pub fn help_table() -> String {
    let figer = Config::for_profile(Profile::Figer).to_text();
    let onto = Config::for_profile(Profile::Ontonotes).to_text();
    let value = |text: &str, key: &str| -> String {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .map(|v| if v.is_empty() { "-".to_string() } else { v.to_string() })
            .unwrap_or_else(|| "-".into())
    };
    let mut s = String::from("Config keys (defaults for profile figer / ontonotes):\n");
    for (key, desc) in KEYS {
        let _ = writeln!(
            s,
            "  {key:<19} {:>14} {:>14}  {desc}",
            value(&figer, key),
            value(&onto, key)
        );
    }
    let _ = writeln!(s, "\nRelative paths resolve against ${DATA_ROOT_ENV} if set, else the config file's directory.");
    s
}
