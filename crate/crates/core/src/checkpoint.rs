//! Plain-text model checkpoints.
//!
//! ```text
//! nfetc-checkpoint 1
//! config word_dim=300 position_dim=85 hidden=180 window=10 num_types=113 input_keep=0.7 output_keep=0.9 mention_dropout=true mention_positions=false
//! types 113
//! /art
//! ...
//! param position.table 22 85
//! <values, space separated>
//! ...
//! end
//! ```
//!
//! Values are written in shortest round-trip exponent form, so loading a
//! saved checkpoint reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::embedding::WordEmbeddings;
use crate::error::{read_to_string, Error, Result};
use crate::hierarchy::TypeForest;
use crate::model::{ModelConfig, Nfetc};
use crate::params::ParamSet;
use crate::tensor::Tensor;

const MAGIC: &str = "nfetc-checkpoint 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Nfetc,
    /// Type names in index order.
    pub types: Vec<String>,
}

impl Checkpoint {
    pub fn new(model: Nfetc, forest: &TypeForest) -> Result<Self> {
        if model.config().num_types != forest.len() {
            return Err(Error::Checkpoint(format!(
                "model has {} types, forest has {}",
                model.config().num_types,
                forest.len()
            )));
        }
        Ok(Checkpoint {
            model,
            types: forest.names().to_vec(),
        })
    }

    pub fn to_text(&self) -> String {
        let c = self.model.config();
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        let _ = writeln!(
            out,
            "config word_dim={} position_dim={} hidden={} window={} num_types={} input_keep={:e} output_keep={:e} mention_dropout={} mention_positions={}",
            c.word_dim,
            c.position_dim,
            c.hidden,
            c.window,
            c.num_types,
            c.input_keep,
            c.output_keep,
            c.mention_dropout,
            c.mention_positions
        );
        let _ = writeln!(out, "types {}", self.types.len());
        for t in &self.types {
            out.push_str(t);
            out.push('\n');
        }
        for (_, p) in self.model.params().iter() {
            let dims: Vec<String> = p.value.shape().iter().map(usize::to_string).collect();
            let _ = writeln!(out, "param {} {}", p.name, dims.join(" "));
            let values: Vec<String> = p.value.data().iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&values.join(" "));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(n, l)| (n + 1, l))
                .ok_or_else(|| Error::Checkpoint(format!("truncated before {what}")))
        };
        let (_, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!("not a checkpoint (header `{magic}`)")));
        }
        let (n, config_line) = next("config")?;
        let config = parse_config(config_line)
            .map_err(|m| Error::Checkpoint(format!("line {n}: {m}")))?;
        let (n, types_line) = next("types")?;
        let count: usize = types_line
            .strip_prefix("types ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Checkpoint(format!("line {n}: expected `types <count>`")))?;
        let mut types = Vec::with_capacity(count);
        for _ in 0..count {
            types.push(next("type list end")?.1.to_string());
        }
        let mut params = ParamSet::new();
        loop {
            let (n, header) = next("`end`")?;
            if header == "end" {
                break;
            }
            let mut fields = header.split_whitespace();
            if fields.next() != Some("param") {
                return Err(Error::Checkpoint(format!("line {n}: expected `param` or `end`")));
            }
            let name = fields
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("line {n}: missing parameter name")))?;
            let shape = fields
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Checkpoint(format!("line {n}: bad shape")))?;
            let (n, body) = next("parameter values")?;
            let data = body
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Checkpoint(format!("line {n}: bad value")))?;
            let tensor = Tensor::new(shape, data)
                .map_err(|e| Error::Checkpoint(format!("line {n}: {e}")))?;
            params.add(name, tensor, true)?;
        }
        let model = Nfetc::from_params(config, params)?;
        if model.config().num_types != types.len() {
            return Err(Error::Checkpoint(format!(
                "config says {} types, list has {}",
                model.config().num_types,
                types.len()
            )));
        }
        Ok(Checkpoint { model, types })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&read_to_string(path)?)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// The checkpoint must have been trained against exactly this type list.
    pub fn check_forest(&self, forest: &TypeForest) -> Result<()> {
        if self.types != forest.names() {
            return Err(Error::Checkpoint(
                "type list differs from the configured type forest".into(),
            ));
        }
        Ok(())
    }

    pub fn check_embeddings(&self, embeddings: &WordEmbeddings) -> Result<()> {
        let want = self.model.config().word_dim;
        if embeddings.dim() != want {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects d_w = {want}, embeddings have {}",
                embeddings.dim()
            )));
        }
        Ok(())
    }

    /// Rebuilds the type forest stored in the checkpoint.
    pub fn forest(&self) -> Result<TypeForest> {
        TypeForest::parse(self.types.iter().map(String::as_str))
    }
}

fn parse_config(line: &str) -> std::result::Result<ModelConfig, String> {
    let rest = line.strip_prefix("config ").ok_or("expected `config ...`")?;
    let mut kv = std::collections::HashMap::new();
    for field in rest.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or(format!("bad field `{field}`"))?;
        kv.insert(k, v);
    }
    fn get<T: std::str::FromStr>(
        kv: &std::collections::HashMap<&str, &str>,
        key: &str,
    ) -> std::result::Result<T, String> {
        kv.get(key)
            .ok_or(format!("missing `{key}`"))?
            .parse()
            .map_err(|_| format!("bad value for `{key}`"))
    }
    Ok(ModelConfig {
        word_dim: get(&kv, "word_dim")?,
        position_dim: get(&kv, "position_dim")?,
        hidden: get(&kv, "hidden")?,
        window: get(&kv, "window")?,
        num_types: get(&kv, "num_types")?,
        input_keep: get(&kv, "input_keep")?,
        output_keep: get(&kv, "output_keep")?,
        mention_dropout: get(&kv, "mention_dropout")?,
        mention_positions: get(&kv, "mention_positions")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::seeded_rng;

    fn sample() -> (Checkpoint, TypeForest) {
        let forest = TypeForest::parse(["/a", "/a/b", "/c"]).unwrap();
        let cfg = ModelConfig {
            word_dim: 3,
            position_dim: 2,
            hidden: 4,
            window: 2,
            num_types: 3,
            input_keep: 0.7,
            output_keep: 0.9,
            mention_dropout: true,
            mention_positions: false,
        };
        let model = Nfetc::new(cfg, &mut seeded_rng(11)).unwrap();
        (Checkpoint::new(model, &forest).unwrap(), forest)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (ck, forest) = sample();
        let back = Checkpoint::parse_text(&ck.to_text()).unwrap();
        assert_eq!(back, ck);
        for ((_, a), (_, b)) in ck.model.params().iter().zip(back.model.params().iter()) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        back.check_forest(&forest).unwrap();
        assert_eq!(back.forest().unwrap(), forest);
    }

    #[test]
    fn mismatches_reported() {
        let (ck, _) = sample();
        let other = TypeForest::parse(["/a", "/c", "/a/b"]).unwrap();
        assert!(ck.check_forest(&other).is_err());
        let emb = WordEmbeddings::parse_text("x 1 2\n", "e").unwrap();
        assert!(ck.check_embeddings(&emb).is_err());
    }

    #[test]
    fn corrupt_input_rejected() {
        let (ck, _) = sample();
        let text = ck.to_text();
        assert!(Checkpoint::parse_text("hello\n").is_err());
        assert!(Checkpoint::parse_text(&text.replace("hidden=4", "hidden=5")).is_err());
        let truncated: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(Checkpoint::parse_text(&truncated).is_err());
    }
}
