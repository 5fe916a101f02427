//! Command-line front end: `train`, `eval`, `predict`, `stats` and
//! `export-types`.
//!
//! Exit status is 0 on success, 2 when an input file cannot be read and 1
//! for any other error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::{help_table, Config, Data, Profile};
use crate::corpus::{Corpus, Labels, Mention};
use crate::embedding::WordEmbeddings;
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::hierarchy::{RefinementMap, TypeForest};
use crate::model::TYPE_EMBEDDINGS;
use crate::training::{run_multi, Aggregate, ExperimentRun, HyperParams};

#[derive(Parser, Debug)]
#[command(name = "nfetc", version, about = "Fine-grained entity typing", after_help = help_table())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set variant=NFETC-hier(r)`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        match &self.config {
            Some(p) => Config::load(p, &self.overrides),
            None => {
                let mut c = Config::for_profile(Profile::Figer);
                for o in &self.overrides {
                    c.set_pair(o)?;
                }
                Ok(c)
            }
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a variant; with `seeds` set, train once per seed and aggregate.
    #[command(after_help = help_table())]
    Train(ConfigArgs),
    /// Score a checkpoint on the configured test (or dev) set.
    #[command(after_help = help_table())]
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate on the dev split instead of test.
        #[arg(long)]
        dev: bool,
        #[arg(long)]
        json: bool,
    },
    /// Predict types for mentions in corpus format (labels optional).
    Predict {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Word vectors; defaults to the config's `embeddings`.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Dataset statistics for a corpus under a type forest.
    Stats {
        #[arg(long)]
        types: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        refinement: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Write the classifier weight rows as CSV, one row per type.
    ExportTypes {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 2,
        _ => 1,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(output: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(p) => write_file(p, text),
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Resolves a path given on the command line against the data root.
fn resolve(path: &Path) -> PathBuf {
    Config::for_profile(Profile::Figer).resolve(path)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(args) => cmd_train(&args.load()?, out),
        Command::Eval {
            config,
            checkpoint,
            dev,
            json,
        } => cmd_eval(&config.load()?, &resolve(&checkpoint), dev, json, out),
        Command::Predict {
            config,
            checkpoint,
            embeddings,
            input,
            output,
        } => {
            let cfg = config.load()?;
            let emb_path = match embeddings {
                Some(p) => resolve(&p),
                None => cfg.resolve(
                    cfg.embeddings
                        .as_ref()
                        .ok_or_else(|| Error::Config("`embeddings` is not set".into()))?,
                ),
            };
            let ck = Checkpoint::load(&resolve(&checkpoint))?;
            let emb = WordEmbeddings::from_file(&emb_path)?;
            let text = crate::error::read_to_string(&resolve(&input))?;
            let lines = cmd_predict(&ck, &emb, &text, &input.display().to_string())?;
            emit(output.as_deref(), &lines, out)
        }
        Command::Stats {
            types,
            corpus,
            refinement,
            json,
        } => {
            let text = cmd_stats(&resolve(&types), &resolve(&corpus), refinement.map(|r| resolve(&r)).as_deref(), json)?;
            emit(None, &text, out)
        }
        Command::ExportTypes { checkpoint, output } => {
            let ck = Checkpoint::load(&resolve(&checkpoint))?;
            emit(output.as_deref(), &export_types(&ck)?, out)
        }
    }
}

fn train_one(cfg: &Config, data: &Data, hp: &HyperParams, dir: &Path) -> Result<ExperimentRun> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let run = data.experiment().run_with_loss(cfg.variant, hp, &cfg.loss_config())?;
    Checkpoint::new(run.result.model.clone(), &data.forest)?.save(&dir.join("checkpoint.txt"))?;
    write_file(&dir.join("train.log"), &run.result.log_text())?;
    write_file(&dir.join("metrics.txt"), &run.test.to_report())?;
    write_file(&dir.join("metrics.json"), &format!("{}\n", run.test.to_json()?))?;
    Ok(run)
}

/// Trains the configured variant and writes `checkpoint.txt`, `train.log`,
/// `metrics.txt` and `metrics.json` to `out_dir`. Several seeds get one
/// `seed-<n>/` directory each plus `aggregate.txt` and `aggregate.json`.
pub fn cmd_train(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    cfg.hp.validate()?;
    let data = cfg.load_data()?;
    let out_dir = cfg.out_path();
    let say = |out: &mut dyn Write, s: String| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e))
    };
    if cfg.seeds.is_empty() {
        let run = train_one(cfg, &data, &cfg.hp, &out_dir)?;
        say(out, format!("variant={} seed={} best_epoch={}\n", cfg.variant, cfg.hp.seed, run.result.best_epoch))?;
        return say(out, run.test.to_report());
    }
    let agg: Aggregate = run_multi(&cfg.seeds, |seed| {
        let hp = HyperParams { seed, ..cfg.hp.clone() };
        let run = train_one(cfg, &data, &hp, &out_dir.join(format!("seed-{seed}")))?;
        say(out, format!("variant={} seed={seed} {}", cfg.variant, run.test.to_report()))?;
        Ok(run.test)
    })?;
    write_file(&out_dir.join("aggregate.txt"), &agg.to_report())?;
    write_file(&out_dir.join("aggregate.json"), &format!("{}\n", serde_json::to_string(&agg)?))?;
    say(out, agg.to_report())
}

pub fn cmd_eval(cfg: &Config, checkpoint: &Path, dev: bool, json: bool, out: &mut dyn Write) -> Result<()> {
    let data = cfg.load_data()?;
    let ck = Checkpoint::load(checkpoint)?;
    ck.check_forest(&data.forest)?;
    ck.check_embeddings(&data.embeddings)?;
    let corpus = if dev { &data.dev } else { &data.test };
    let ancestors = data.forest.ancestor_lists();
    let loss = cfg.loss_config();
    let metrics = evaluate(
        &ck.model,
        &corpus.window(ck.model.config().window),
        &data.embeddings,
        &data.forest,
        loss.inference_adjustment(&ancestors),
    )?;
    let text = if json {
        format!("{}\n", metrics.to_json()?)
    } else {
        metrics.to_report()
    };
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

/// How many types `predict` lists with their probabilities.
pub const TOP_K: usize = 5;

/// One tab-separated line per mention: predicted terminal, its type-path
/// joined by spaces, then the top types as `type:prob`.
pub fn cmd_predict(ck: &Checkpoint, emb: &WordEmbeddings, input: &str, source_name: &str) -> Result<String> {
    ck.check_embeddings(emb)?;
    let forest = ck.forest()?;
    let corpus = Corpus::parse_with(input, &forest, source_name, Labels::Optional)?;
    let window = ck.model.config().window;
    let mut out = String::new();
    for m in corpus.iter() {
        out.push_str(&predict_line(ck, &forest, &m.window(window), emb)?);
        out.push('\n');
    }
    Ok(out)
}

fn predict_line(ck: &Checkpoint, forest: &TypeForest, m: &Mention, emb: &WordEmbeddings) -> Result<String> {
    let probs = ck.model.probabilities(m, emb)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    // Stable sort keeps ties in index order, matching argmax.
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let best = crate::hierarchy::TypeId(order[0]);
    let path: Vec<&str> = forest.expand_to_path(best).into_iter().map(|t| forest.name(t)).collect();
    let top: Vec<String> = order
        .iter()
        .take(TOP_K)
        .map(|&i| format!("{}:{:.6}", forest.names()[i], probs[i]))
        .collect();
    Ok(format!("{}\t{}\t{}", forest.name(best), path.join(" "), top.join(" ")))
}

pub fn cmd_stats(types: &Path, corpus: &Path, refinement: Option<&Path>, json: bool) -> Result<String> {
    let original = TypeForest::from_file(types)?;
    let c = Corpus::from_file(corpus, &original)?;
    let (forest, c) = match refinement {
        Some(r) => {
            let refined = original.apply_refinement(&RefinementMap::from_file(r)?)?;
            let c = c.with_forest(&refined)?;
            (refined, c)
        }
        None => (original, c),
    };
    let stats = c.stats(&forest)?;
    Ok(if json {
        format!("{}\n", stats.to_json()?)
    } else {
        stats.to_kv()
    })
}

/// CSV with header `type_id,v1..vN`; `type_id` is the type name and each
/// row is that type's classifier weight vector in round-trip precision.
pub fn export_types(ck: &Checkpoint) -> Result<String> {
    let w = ck
        .model
        .params()
        .by_name(TYPE_EMBEDDINGS)
        .ok_or_else(|| Error::Checkpoint(format!("missing `{TYPE_EMBEDDINGS}`")))?
        .value
        .clone();
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["type_id".to_string()];
    header.extend((1..=cols).map(|i| format!("v{i}")));
    writer.write_record(&header)?;
    for r in 0..rows {
        let mut record = vec![ck.types[r].clone()];
        record.extend(w.data()[r * cols..(r + 1) * cols].iter().map(|v| format!("{v:e}")));
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Reads a CSV written by [`export_types`] back into names and rows.
pub fn parse_type_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let (mut names, mut rows) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record?;
        let mut fields = record.iter();
        names.push(fields.next().unwrap_or_default().to_string());
        rows.push(
            fields
                .map(|v| v.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad value `{v}`"))))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((names, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, Nfetc};
    use crate::optim::seeded_rng;

    fn checkpoint() -> (Checkpoint, WordEmbeddings) {
        let forest = TypeForest::parse(["/a", "/a/b", "/c"]).unwrap();
        let cfg = ModelConfig {
            word_dim: 3,
            position_dim: 2,
            hidden: 4,
            window: 2,
            num_types: 3,
            input_keep: 1.0,
            output_keep: 1.0,
            mention_dropout: false,
            mention_positions: false,
        };
        let model = Nfetc::new(cfg, &mut seeded_rng(5)).unwrap();
        let emb = WordEmbeddings::parse_text("x 1 0 0\ny 0 1 0\nz 0 0 1\n", "e").unwrap();
        (Checkpoint::new(model, &forest).unwrap(), emb)
    }

    #[test]
    fn export_round_trips_w() {
        let (ck, _) = checkpoint();
        let csv = export_types(&ck).unwrap();
        assert!(csv.starts_with("type_id,v1,v2,"));
        let (names, rows) = parse_type_csv(&csv).unwrap();
        assert_eq!(names, ck.types);
        let w = &ck.model.params().by_name(TYPE_EMBEDDINGS).unwrap().value;
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].len(), 2 * 4 + 3);
        let flat: Vec<u64> = rows.concat().iter().map(|v| v.to_bits()).collect();
        let want: Vec<u64> = w.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(flat, want);
    }

    #[test]
    fn predict_lines() {
        let (ck, emb) = checkpoint();
        assert_eq!(cmd_predict(&ck, &emb, "", "in").unwrap(), "");
        let out = cmd_predict(&ck, &emb, "1 2\tx y z\n0 1\tz x\t/c\n", "in").unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        for line in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            assert_eq!(cols.len(), 3);
            assert!(cols[1].ends_with(cols[0]));
            let probs: Vec<f64> = cols[2]
                .split(' ')
                .map(|kv| kv.rsplit_once(':').unwrap().1.parse().unwrap())
                .collect();
            assert_eq!(probs.len(), 3);
            assert!(probs.windows(2).all(|w| w[0] >= w[1]));
            assert!(probs.iter().sum::<f64>() <= 1.0 + 1e-5);
        }
    }

    #[test]
    fn io_errors_exit_two() {
        let e = Error::io("missing.txt", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert_eq!(exit_code(&e), 2);
        assert!(e.to_string().contains("missing.txt"));
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
    }
}
