//! Labelled mention corpora.
//!
//! File format, one mention per line:
//!
//! ```text
//! <start> <end>\t<space-separated tokens>\t<space-separated type paths>
//! ```
//!
//! `start` is inclusive, `end` exclusive, both 0-based token indices. The
//! label column may be omitted for prediction input.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use serde::Serialize;

use crate::error::{read_to_string, Error, Result};
use crate::hierarchy::{TypeForest, TypeId};
use crate::optim::seeded_rng;

/// A mention with its context and candidate types.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mention {
    /// Context tokens, including the mention itself.
    pub tokens: Vec<String>,
    /// First mention token (inclusive).
    pub start: usize,
    /// One past the last mention token.
    pub end: usize,
    /// Candidate types in file order.
    pub labels: Vec<TypeId>,
    /// Terminal types of `labels`; empty when unlabelled.
    pub terminals: Vec<TypeId>,
}

impl Mention {
    pub fn new(
        tokens: Vec<String>,
        start: usize,
        end: usize,
        labels: Vec<TypeId>,
        forest: &TypeForest,
    ) -> Result<Self> {
        if start >= end || end > tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "span [{start}, {end}) outside {} tokens",
                tokens.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|t| t.0 >= forest.len()) {
            return Err(Error::UnknownType(format!("#{}", bad.0)));
        }
        let terminals = if labels.is_empty() {
            Vec::new()
        } else {
            forest.terminal_set(&labels)?
        };
        Ok(Mention {
            tokens,
            start,
            end,
            labels,
            terminals,
        })
    }

    pub fn mention_tokens(&self) -> &[String] {
        &self.tokens[self.start..self.end]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_single_path(&self, forest: &TypeForest) -> bool {
        forest.is_single_path(&self.labels)
    }

    /// Keeps at most `window` tokens on each side of the mention. The
    /// mention itself is never truncated and nothing is padded.
    pub fn window(&self, window: usize) -> Mention {
        let lo = self.start.saturating_sub(window);
        let hi = (self.end + window).min(self.tokens.len());
        Mention {
            tokens: self.tokens[lo..hi].to_vec(),
            start: self.start - lo,
            end: self.end - lo,
            labels: self.labels.clone(),
            terminals: self.terminals.clone(),
        }
    }

    fn write_line(&self, forest: &TypeForest, out: &mut String) {
        let _ = write!(out, "{} {}\t{}", self.start, self.end, self.tokens.join(" "));
        if !self.labels.is_empty() {
            out.push('\t');
            let names: Vec<&str> = self.labels.iter().map(|&t| forest.name(t)).collect();
            out.push_str(&names.join(" "));
        }
        out.push('\n');
    }
}

/// Where a corpus came from in the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Raw,
    Filtered,
    Train,
    Dev,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub mentions: Vec<Mention>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Labels {
    Required,
    Optional,
}

impl Corpus {
    pub fn new(mentions: Vec<Mention>, provenance: Provenance) -> Self {
        Corpus {
            mentions,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Mention> {
        self.mentions.iter()
    }

    /// Parses labelled corpus text; every line must carry labels.
    pub fn parse(text: &str, forest: &TypeForest, source_name: &str) -> Result<Self> {
        Self::parse_with(text, forest, source_name, Labels::Required)
    }

    pub fn parse_with(
        text: &str,
        forest: &TypeForest,
        source_name: &str,
        labels: Labels,
    ) -> Result<Self> {
        let mut mentions = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            mentions.push(parse_line(line, forest, source_name, n + 1, labels)?);
        }
        Ok(Corpus::new(mentions, Provenance::Raw))
    }

    pub fn from_file(path: &Path, forest: &TypeForest) -> Result<Self> {
        Self::parse(&read_to_string(path)?, forest, &path.display().to_string())
    }

    pub fn from_file_with(path: &Path, forest: &TypeForest, labels: Labels) -> Result<Self> {
        Self::parse_with(&read_to_string(path)?, forest, &path.display().to_string(), labels)
    }

    /// Serialises back to the line format.
    pub fn to_text(&self, forest: &TypeForest) -> String {
        let mut out = String::new();
        for m in &self.mentions {
            m.write_line(forest, &mut out);
        }
        out
    }

    /// Recomputes terminal sets against `forest`, which must index the same
    /// types (for instance a refined copy of the forest used for parsing).
    pub fn with_forest(&self, forest: &TypeForest) -> Result<Corpus> {
        let mentions = self
            .mentions
            .iter()
            .map(|m| Mention::new(m.tokens.clone(), m.start, m.end, m.labels.clone(), forest))
            .collect::<Result<_>>()?;
        Ok(Corpus::new(mentions, self.provenance))
    }

    pub fn window(&self, window: usize) -> Corpus {
        Corpus::new(
            self.mentions.iter().map(|m| m.window(window)).collect(),
            self.provenance,
        )
    }

    /// The single-path subset, order preserved.
    pub fn build_filtered(&self, forest: &TypeForest) -> Result<Corpus> {
        let kept: Vec<Mention> = self
            .mentions
            .iter()
            .filter(|m| m.is_single_path(forest))
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(Error::Empty("filtered corpus"));
        }
        Ok(Corpus::new(kept, Provenance::Filtered))
    }

    pub fn stats(&self, forest: &TypeForest) -> Result<CorpusStats> {
        if self.mentions.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let filtered = self.mentions.iter().filter(|m| m.is_single_path(forest)).count();
        let max_label_depth = self
            .mentions
            .iter()
            .flat_map(|m| m.labels.iter())
            .map(|&t| forest.depth(t))
            .max()
            .unwrap_or(0);
        Ok(CorpusStats {
            types: forest.len(),
            mentions: self.mentions.len(),
            filtered,
            filtered_pct: 100.0 * filtered as f64 / self.mentions.len() as f64,
            max_depth: forest.max_depth(),
            max_label_depth,
        })
    }

    /// Uniform sample without replacement of `round_half_up(fraction·N)`
    /// mentions as a dev set; the rest is the evaluation set. Both keep
    /// the original order.
    pub fn split_dev(&self, fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dev fraction must be in (0, 1), got {fraction}"
            )));
        }
        let n = self.mentions.len();
        let dev_size = (fraction * n as f64 + 0.5).floor() as usize;
        if dev_size == 0 || dev_size >= n {
            return Err(Error::InvalidArgument(format!(
                "corpus of {n} mentions is too small for a dev fraction of {fraction}"
            )));
        }
        let mut rng = seeded_rng(seed);
        let mut in_dev = vec![false; n];
        for i in index::sample(&mut rng, n, dev_size) {
            in_dev[i] = true;
        }
        let (mut dev, mut eval) = (Vec::with_capacity(dev_size), Vec::with_capacity(n - dev_size));
        for (m, d) in self.mentions.iter().zip(in_dev) {
            if d {
                dev.push(m.clone());
            } else {
                eval.push(m.clone());
            }
        }
        Ok((Corpus::new(dev, Provenance::Dev), Corpus::new(eval, Provenance::Test)))
    }
}

fn parse_line(
    line: &str,
    forest: &TypeForest,
    source: &str,
    n: usize,
    labels: Labels,
) -> Result<Mention> {
    let cols: Vec<&str> = line.trim_end().split('\t').collect();
    let (span, tokens, label_col) = match (cols.as_slice(), labels) {
        ([span, tokens, label_col], _) => (*span, *tokens, Some(*label_col)),
        ([span, tokens], Labels::Optional) => (*span, *tokens, None),
        _ => {
            return Err(Error::parse(
                source,
                n,
                "expected `<start> <end>\\t<tokens>\\t<labels>`",
            ))
        }
    };
    let bounds: Vec<usize> = span
        .split(' ')
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(source, n, format!("bad span `{span}`")))?;
    let [start, end] = bounds[..] else {
        return Err(Error::parse(source, n, format!("bad span `{span}`")));
    };
    let tokens: Vec<String> = tokens.split(' ').filter(|t| !t.is_empty()).map(String::from).collect();
    if start >= end || end > tokens.len() {
        return Err(Error::parse(
            source,
            n,
            format!("span [{start}, {end}) out of bounds for {} tokens", tokens.len()),
        ));
    }
    let mut ids = Vec::new();
    if let Some(col) = label_col {
        for name in col.split(' ').filter(|t| !t.is_empty()) {
            let id = forest
                .id(name)
                .map_err(|_| Error::parse(source, n, format!("unknown type `{name}`")))?;
            ids.push(id);
        }
        if ids.is_empty() && labels == Labels::Required {
            return Err(Error::parse(source, n, "no labels"));
        }
    }
    Mention::new(tokens, start, end, ids, forest).map_err(|e| Error::parse(source, n, e.to_string()))
}

/// Dataset statistics in the shape of a benchmark summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub types: usize,
    pub mentions: usize,
    pub filtered: usize,
    pub filtered_pct: f64,
    pub max_depth: usize,
    pub max_label_depth: usize,
}

impl CorpusStats {
    /// Flat `key=value` block, one pair per line.
    pub fn to_kv(&self) -> String {
        format!(
            "types={}\nmentions={}\nfiltered={}\nfiltered_pct={:.2}\nmax_depth={}\nmax_label_depth={}\n",
            self.types,
            self.mentions,
            self.filtered,
            self.filtered_pct,
            self.max_depth,
            self.max_label_depth
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forest() -> TypeForest {
        TypeForest::parse(["/person", "/person/coach", "/person/athlete", "/organization"]).unwrap()
    }

    fn mention(n_tokens: usize, start: usize, end: usize) -> Mention {
        let f = forest();
        let tokens = (0..n_tokens).map(|i| format!("t{i}")).collect();
        Mention::new(tokens, start, end, vec![f.id("/person").unwrap()], &f).unwrap()
    }

    #[test]
    fn parses_steve_kerr() {
        let f = forest();
        let c = Corpus::parse("0 2\tSteve Kerr is coaching tonight\t/person /person/coach\n", &f, "x").unwrap();
        let m = &c.mentions[0];
        assert_eq!(m.mention_tokens(), &["Steve", "Kerr"]);
        assert_eq!(m.terminals, vec![f.id("/person/coach").unwrap()]);
    }

    #[test]
    fn unknown_label_names_line() {
        let f = forest();
        let text = "0 1\ta b\t/person\n0 1\ta b\t/persn\n";
        let err = Corpus::parse(text, &f, "corpus.txt").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("corpus.txt:2") && msg.contains("/persn"), "{msg}");
    }

    #[test]
    fn span_errors() {
        let f = forest();
        assert!(Corpus::parse("0 3\ta b\t/person\n", &f, "x").is_err());
        assert!(Corpus::parse("1 1\ta b\t/person\n", &f, "x").is_err());
        assert!(Corpus::parse("1\ta b\t/person\n", &f, "x").is_err());
        assert!(Corpus::parse("0 1\ta b\n", &f, "x").is_err());
        let c = Corpus::parse_with("0 1\ta b\n", &f, "x", Labels::Optional).unwrap();
        assert!(c.mentions[0].labels.is_empty());
    }

    #[test]
    fn window_cases() {
        let short = mention(3, 1, 2);
        assert_eq!(short.window(10), short);
        let w = mention(50, 25, 26).window(10);
        assert_eq!((w.len(), w.start, w.end), (21, 10, 11));
        assert_eq!(w.tokens[10], "t25");
        let w = mention(40, 0, 1).window(10);
        assert_eq!((w.len(), w.start, w.end), (11, 0, 1));
        let long = mention(40, 5, 30).window(2);
        assert_eq!((long.len(), long.start, long.end), (29, 2, 27));
    }

    #[test]
    fn split_dev_sizes() {
        let mentions: Vec<Mention> = (0..563).map(|_| mention(3, 0, 1)).collect();
        let c = Corpus::new(mentions, Provenance::Test);
        let (dev, eval) = c.split_dev(0.1, 5).unwrap();
        assert_eq!((dev.len(), eval.len()), (56, 507));
        let small = Corpus::new(c.mentions[..10].to_vec(), Provenance::Test);
        let (dev, eval) = small.split_dev(0.1, 5).unwrap();
        assert_eq!((dev.len(), eval.len()), (1, 9));
        let tiny = Corpus::new(c.mentions[..2].to_vec(), Provenance::Test);
        assert!(tiny.split_dev(0.1, 5).is_err());
        assert!(c.split_dev(0.0, 5).is_err());
        assert!(c.split_dev(1.0, 5).is_err());
    }

    #[test]
    fn split_dev_is_deterministic_partition() {
        let f = forest();
        let mentions: Vec<Mention> = (0..40)
            .map(|i| {
                Mention::new(vec![format!("w{i}")], 0, 1, vec![f.id("/person").unwrap()], &f).unwrap()
            })
            .collect();
        let c = Corpus::new(mentions, Provenance::Test);
        let a = c.split_dev(0.25, 11).unwrap();
        let b = c.split_dev(0.25, 11).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<&str> = a.0.iter().chain(a.1.iter()).map(|m| m.tokens[0].as_str()).collect();
        all.sort();
        let mut orig: Vec<&str> = c.iter().map(|m| m.tokens[0].as_str()).collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn stats_on_empty_corpus_is_error() {
        let c = Corpus::new(vec![], Provenance::Raw);
        assert!(c.stats(&forest()).is_err());
    }
}
