//! Run configuration: `key<TAB>value` lines, repeated keys for lists.
//!
//! ```text
//! language    en  data/en.tsv
//! language    fr  data/fr.tsv
//! alignment   en  fr  data/align.tsv
//! ills        en  fr  data/ills.en-fr.tsv
//! variant     var4
//! k           75
//! epochs      100
//! seed        7
//! output_dir  runs/a
//! ```
//!
//! Relative paths resolve against the config file's directory. Blank lines
//! and lines starting with `#` are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mtranse_core::kg::{self, MultilingualKb};
use mtranse_core::{LanguageId, TrainConfig};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub languages: Vec<(LanguageId, PathBuf)>,
    pub alignments: Vec<(LanguageId, LanguageId, PathBuf)>,
    pub ills: Vec<(LanguageId, LanguageId, PathBuf)>,
    pub train: TrainConfig,
    /// Fraction of every alignment set held out of training as TWA positives.
    pub holdout_fraction: f64,
    pub output_dir: PathBuf,
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| anyhow::anyhow!("{key}: cannot parse {v:?}: {e}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig {
            languages: Vec::new(),
            alignments: Vec::new(),
            ills: Vec::new(),
            train: TrainConfig::default(),
            holdout_fraction: 0.0,
            output_dir: PathBuf::new(),
        };
        let mut output_dir = None;
        let resolve = |p: &str| base.join(p);
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let key = fields[0];
            let args = &fields[1..];
            let want = |n: usize| -> Result<()> {
                if args.len() != n {
                    bail!("line {lineno}: {key} takes {n} value(s), found {}", args.len());
                }
                Ok(())
            };
            let t = &mut cfg.train;
            match key {
                "language" => {
                    want(2)?;
                    cfg.languages.push((LanguageId::new(args[0])?, resolve(args[1])));
                }
                "alignment" | "ills" => {
                    want(3)?;
                    let entry = (LanguageId::new(args[0])?, LanguageId::new(args[1])?, resolve(args[2]));
                    if key == "alignment" {
                        cfg.alignments.push(entry);
                    } else {
                        cfg.ills.push(entry);
                    }
                }
                "output_dir" => {
                    want(1)?;
                    output_dir = Some(resolve(args[0]));
                }
                _ => {
                    want(1)?;
                    let v = args[0];
                    match key {
                        "variant" => t.variant = parse_value(key, v)?,
                        "k" => t.k = parse_value(key, v)?,
                        "lambda" => t.lambda = parse_value(key, v)?,
                        "alpha" => t.alpha = parse_value(key, v)?,
                        "norm" => t.norm = parse_value(key, v)?,
                        "epochs" => t.epochs = parse_value(key, v)?,
                        "seed" => t.seed = parse_value(key, v)?,
                        "shuffle" => t.shuffle = parse_value(key, v)?,
                        "knowledge_passes" => t.knowledge_passes = parse_value(key, v)?,
                        "alignment_passes" => t.alignment_passes = parse_value(key, v)?,
                        "holdout_fraction" => cfg.holdout_fraction = parse_value(key, v)?,
                        _ => bail!("line {lineno}: unknown key {key:?}"),
                    }
                }
            }
        }
        cfg.output_dir = output_dir.context("output_dir is required")?;
        if cfg.languages.is_empty() {
            bail!("at least one language is required");
        }
        if !(0.0..1.0).contains(&cfg.holdout_fraction) {
            bail!("holdout_fraction must lie in [0, 1)");
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Fails naming the first referenced input file that does not exist.
    pub fn check_inputs(&self) -> Result<()> {
        let paths = self
            .languages
            .iter()
            .map(|(_, p)| p)
            .chain(self.alignments.iter().map(|(_, _, p)| p))
            .chain(self.ills.iter().map(|(_, _, p)| p));
        for p in paths {
            if !p.is_file() {
                bail!("input file not found: {}", p.display());
            }
        }
        Ok(())
    }

    /// Loads graphs, alignments and links into one knowledge base.
    pub fn load_kb(&self) -> Result<MultilingualKb> {
        self.check_inputs()?;
        let mut kb = MultilingualKb::new();
        for (lang, path) in &self.languages {
            let (g, report) = kg::load_graph(path, lang.clone())?;
            if report.duplicates > 0 {
                log::info!("{}: {} duplicate triples dropped", path.display(), report.duplicates);
            }
            kb.add_graph(g)?;
        }
        for (from, to, path) in &self.alignments {
            kb.add_alignment(kg::load_alignment(path, from, to, &kb)?)?;
        }
        for (source, target, path) in &self.ills {
            let set = kg::load_ills(path, source, target, &kb)?;
            kb.add_ills(set)?;
        }
        Ok(kb)
    }

    pub fn model_dir(&self) -> PathBuf {
        self.output_dir.join("model")
    }

    pub fn epochs_path(&self) -> PathBuf {
        self.output_dir.join("epochs.tsv")
    }

    pub fn heldout_path(&self, first: &LanguageId, second: &LanguageId) -> PathBuf {
        self.output_dir.join(format!("heldout.{first}.{second}.tsv"))
    }
}
