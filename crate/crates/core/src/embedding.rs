//! Frozen word vectors and the relative-position table layout.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::optim::SeededRng;
use crate::tensor::Tensor;

/// Pre-trained word vectors, case-sensitive, read-only after loading.
///
/// Out-of-vocabulary words (and the mention-boundary pad) resolve to the
/// zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddings {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    zero: Vec<f64>,
}

impl WordEmbeddings {
    /// Reads `word v1 ... vd` lines. The first line fixes `d`.
    pub fn from_reader(reader: impl BufRead, source_name: &str) -> Result<Self> {
        let mut dim = None;
        let mut words = Vec::new();
        let mut index = HashMap::new();
        let mut data = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source_name, e))?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let start = data.len();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(source_name, n + 1, format!("bad value `{f}`")))?;
                data.push(v);
            }
            let got = data.len() - start;
            let d = *dim.get_or_insert(got);
            if got != d || d == 0 {
                return Err(Error::parse(
                    source_name,
                    n + 1,
                    format!("expected {d} values for `{word}`, found {got}"),
                ));
            }
            if index.insert(word.to_string(), words.len()).is_some() {
                return Err(Error::parse(source_name, n + 1, format!("duplicate word `{word}`")));
            }
            words.push(word.to_string());
        }
        let dim = dim.ok_or(Error::Empty("embedding file"))?;
        Ok(WordEmbeddings {
            dim,
            words,
            index,
            data,
            zero: vec![0.0; dim],
        })
    }

    pub fn parse_text(text: &str, source_name: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes(), source_name)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), &path.display().to_string())
    }

    /// Builds a store from in-memory vectors (used by the synthetic corpora).
    pub fn from_vectors(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut text = String::new();
        for (w, v) in &entries {
            text.push_str(w);
            for x in v {
                text.push(' ');
                text.push_str(&x.to_string());
            }
            text.push('\n');
        }
        Self::parse_text(&text, "<memory>")
    }

    /// Serialises in the loader's format with round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for x in self.row(i) {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// The stored vector, or zeros for unknown words.
    pub fn lookup(&self, word: &str) -> &[f64] {
        match self.index.get(word) {
            Some(&i) => self.row(i),
            None => &self.zero,
        }
    }

    pub fn zero_vector(&self) -> &[f64] {
        &self.zero
    }
}

/// Signed distance from token `i` to the mention span `[start, end)`:
/// 0 inside, negative before, positive after (to the nearest boundary).
pub fn relative_distance(i: usize, start: usize, end: usize) -> isize {
    if i < start {
        i as isize - start as isize
    } else if i >= end {
        i as isize - (end as isize - 1)
    } else {
        0
    }
}

/// Layout of the trainable position table: rows `0..=2C` hold distances
/// `-C..=C`, row `2C+1` is the bucket for anything farther away.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PositionTable {
    pub window: usize,
    pub dim: usize,
}

impl PositionTable {
    pub fn new(window: usize, dim: usize) -> Self {
        PositionTable { window, dim }
    }

    pub fn rows(&self) -> usize {
        2 * self.window + 2
    }

    /// Table row for token `i` of a context whose mention is `[start, end)`.
    pub fn bucket(&self, i: usize, start: usize, end: usize) -> Result<usize> {
        if start >= end {
            return Err(Error::InvalidArgument(format!("invalid span [{start}, {end})")));
        }
        let d = relative_distance(i, start, end);
        let c = self.window as isize;
        Ok(if d.abs() <= c {
            (d + c) as usize
        } else {
            self.rows() - 1
        })
    }

    /// Uniform initialisation in `[-0.25, 0.25]`.
    pub fn init(&self, rng: &mut SeededRng) -> Tensor {
        let data = (0..self.rows() * self.dim)
            .map(|_| rng.random_range(-0.25..=0.25))
            .collect();
        Tensor::matrix(self.rows(), self.dim, data).expect("positive dims")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::seeded_rng;

    const FIXTURE: &str = "Kerr 0.1 0.2 0.3 0.4\nkerr 1 2 3 4\ncoach -1 -2 -3 -4\n";

    #[test]
    fn loads_fixture() {
        let e = WordEmbeddings::parse_text(FIXTURE, "emb").unwrap();
        assert_eq!((e.vocab_size(), e.dim()), (3, 4));
        assert_eq!(e.lookup("coach"), &[-1.0, -2.0, -3.0, -4.0]);
    }

    #[test]
    fn cased_lookup_and_oov() {
        let e = WordEmbeddings::parse_text(FIXTURE, "emb").unwrap();
        assert_eq!(e.lookup("Kerr"), &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(e.lookup("kerr"), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.lookup("KERR"), &[0.0; 4]);
    }

    #[test]
    fn ragged_line_reports_line_number() {
        let text = format!(
            "a {}\nb {}\n",
            vec!["0.5"; 300].join(" "),
            vec!["0.5"; 299].join(" ")
        );
        let err = WordEmbeddings::parse_text(&text, "glove.txt").unwrap_err();
        assert!(err.to_string().starts_with("glove.txt:2:"), "{err}");
    }

    #[test]
    fn duplicate_word_rejected() {
        assert!(WordEmbeddings::parse_text("a 1\na 2\n", "x").is_err());
    }

    #[test]
    fn text_round_trip() {
        let e = WordEmbeddings::from_vectors(vec![
            ("x".into(), vec![0.1 + 0.2, -1e-17]),
            ("y".into(), vec![std::f64::consts::PI, 2.0]),
        ])
        .unwrap();
        assert_eq!(WordEmbeddings::parse_text(&e.to_text(), "x").unwrap(), e);
    }

    #[test]
    fn distances() {
        assert_eq!(relative_distance(3, 2, 5), 0);
        assert_eq!(relative_distance(7, 2, 5), 3);
        assert_eq!(relative_distance(0, 2, 5), -2);
        let t = PositionTable::new(10, 4);
        assert_eq!(t.rows(), 22);
        assert_eq!(t.bucket(3, 2, 5).unwrap(), 10);
        assert_eq!(t.bucket(7, 2, 5).unwrap(), 13);
        assert_eq!(t.bucket(30, 2, 3).unwrap(), 21);
        assert!(t.bucket(0, 3, 3).is_err());
    }

    #[test]
    fn position_init_is_seeded_and_bounded() {
        let t = PositionTable::new(3, 5);
        let a = t.init(&mut seeded_rng(1));
        assert_eq!(a, t.init(&mut seeded_rng(1)));
        assert!(a.data().iter().all(|v| v.abs() <= 0.25));
    }
}
