mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mtranse_core::eval::{self, PartialTriple, Slot};
use mtranse_core::ndarray::Axis;
use mtranse_core::kg::{self, MultilingualKb};
use mtranse_core::{load_model, save_model, seed, twa, AlignmentSet, IllSet, LanguageId, LanguagePair, Model, Triple};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "mtranse", version, about = "Multilingual knowledge-graph embeddings")]
struct Cli {
    /// Worker threads; 1 is the determinism reference.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it under the config's output_dir.
    Train { config: PathBuf },
    /// Evaluate a trained model.
    Eval {
        #[command(subcommand)]
        task: EvalTask,
    },
    /// Print vocabulary, triple and alignment counts.
    Stats { config: PathBuf },
}

#[derive(Args)]
struct Common {
    /// Run configuration describing the knowledge base.
    #[arg(long)]
    config: PathBuf,
    /// Model directory; defaults to <output_dir>/model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalTask {
    /// Cross-lingual entity matching.
    Match {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        /// Link file; defaults to the config's ills entry for this direction.
        #[arg(long)]
        ills: Option<PathBuf>,
    },
    /// Precision/recall of thresholded top-1 matching.
    Pr {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        ills: Option<PathBuf>,
        /// Ascending comma-separated distance thresholds.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Triple-wise alignment verification with cross-validated thresholds.
    Twa {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 2, value_names = ["FIRST", "SECOND"])]
        pair: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Positive alignment pairs; defaults to the pairs held out at training.
        #[arg(long)]
        positives: Option<PathBuf>,
    },
    /// Monolingual tail prediction.
    Tail {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        language: String,
        /// Test triples; defaults to the language's full triple file.
        #[arg(long)]
        triples: Option<PathBuf>,
    },
    /// Monolingual relation prediction.
    Rel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        language: String,
        #[arg(long)]
        triples: Option<PathBuf>,
    },
    /// Cross-lingual completion of a triple with one unknown element.
    Complete {
        #[command(flatten)]
        common: Common,
        /// Language of the known elements
        #[arg(long)]
        from: String,
        /// Language the missing element is predicted in
        #[arg(long)]
        to: String,
        /// Head entity label
        #[arg(long)]
        h: Option<String>,
        /// Relation label
        #[arg(long)]
        r: Option<String>,
        /// Tail entity label
        #[arg(long)]
        t: Option<String>,
        /// Number of candidates to print
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Two-dimensional PCA of entity vectors.
    Pca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        language: String,
        /// Comma-separated entity labels; defaults to every entity.
        #[arg(long, value_delimiter = ',')]
        entities: Option<Vec<String>>,
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Train { config } => cmd_train(&config),
        Command::Stats { config } => {
            let kb = RunConfig::load(&config)?.load_kb()?;
            print!("{}", kg::graph_stats(&kb));
            Ok(())
        }
        Command::Eval { task } => cmd_eval(task),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_alignment_pairs(kb: &MultilingualKb, pair: &LanguagePair, pairs: &[(Triple, Triple)]) -> Result<String> {
    let (g1, g2) = (kb.graph(pair.first())?, kb.graph(pair.second())?);
    let mut out = String::new();
    for &(a, b) in pairs {
        let (h, r, t) = g1.triple_labels(a);
        let (h2, r2, t2) = g2.triple_labels(b);
        out.push_str(&format!("{h}\t{r}\t{t}\t{h2}\t{r2}\t{t2}\n"));
    }
    Ok(out)
}

fn cmd_train(path: &Path) -> Result<()> {
    let cfg = RunConfig::load(path)?;
    let mut kb = cfg.load_kb()?;
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;
    if cfg.holdout_fraction > 0.0 {
        let sets: Vec<AlignmentSet> = kb.alignments().values().cloned().collect();
        for (i, set) in sets.iter().enumerate() {
            let split_seed = seed::derive(cfg.train.seed, seed::Stream::Split, i as u64);
            let (train, held) = twa::hold_out_positives(set, cfg.holdout_fraction, split_seed)?;
            let pair = set.pair().clone();
            let text = write_alignment_pairs(&kb, &pair, &held)?;
            write_file(&cfg.heldout_path(pair.first(), pair.second()), &text)?;
            log::info!("{pair}: {} aligned pairs held out of training", held.len());
            kb.replace_alignment(train)?;
        }
    }
    let mut epochs = String::from("epoch\tS_K\tS_A\twall_ms\n");
    let (model, _) = mtranse_core::trainer::train_with(&kb, &cfg.train, |r| {
        eprintln!("{r}");
        epochs.push_str(&format!("{r}\n"));
    })?;
    save_model(&model, cfg.model_dir())?;
    write_file(&cfg.epochs_path(), &epochs)
}

fn lang(code: &str) -> Result<LanguageId> {
    Ok(LanguageId::new(code)?)
}

struct Loaded {
    cfg: RunConfig,
    kb: MultilingualKb,
    model: Model,
}

impl Common {
    fn load(&self) -> Result<Loaded> {
        let cfg = RunConfig::load(&self.config)?;
        let kb = cfg.load_kb()?;
        let dir = self.model.clone().unwrap_or_else(|| cfg.model_dir());
        let model = load_model(&dir).with_context(|| format!("cannot load model {}", dir.display()))?;
        Ok(Loaded { cfg, kb, model })
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}

fn ill_set(l: &Loaded, source: &str, target: &str, file: Option<&Path>) -> Result<IllSet> {
    let (s, t) = (lang(source)?, lang(target)?);
    if let Some(p) = file {
        return Ok(kg::load_ills(p, &s, &t, &l.kb)?);
    }
    l.kb.ills()
        .iter()
        .find(|i| i.source() == &s && i.target() == &t)
        .cloned()
        .with_context(|| format!("no ills {s} {t} in the config and no --ills given"))
}

fn test_triples(l: &Loaded, language: &LanguageId, file: Option<&Path>) -> Result<Vec<Triple>> {
    let g = l.kb.graph(language)?;
    let Some(p) = file else {
        return Ok(g.triples().to_vec());
    };
    let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            bail!("{}:{}: expected 3 tab-separated fields", p.display(), i + 1);
        }
        let t = g
            .resolve(f[0], f[1], f[2])
            .map_err(|(kind, s)| anyhow::anyhow!("{}:{}: unknown {kind} {s:?}", p.display(), i + 1))?;
        out.push(t);
    }
    Ok(out)
}

fn default_thresholds() -> Vec<f64> {
    (1..=40).map(|i| i as f64 * 0.05).collect()
}

fn cmd_eval(task: EvalTask) -> Result<()> {
    match task {
        EvalTask::Match { common, source, target, ills } => {
            let l = common.load()?;
            let set = ill_set(&l, &source, &target, ills.as_deref())?;
            let report = eval::entity_matching(&l.model, &set, l.cfg.train.norm)?;
            let (gs, gt) = (l.kb.graph(set.source())?, l.kb.graph(set.target())?);
            let labels: Vec<(String, String)> = set
                .links()
                .iter()
                .map(|&(s, t)| (gs.entities().symbol(s).to_owned(), gt.entities().symbol(t).to_owned()))
                .collect();
            common.emit(&report.to_tsv(&labels))
        }
        EvalTask::Pr { common, source, target, ills, thresholds } => {
            let l = common.load()?;
            let set = ill_set(&l, &source, &target, ills.as_deref())?;
            let thresholds = thresholds.unwrap_or_else(default_thresholds);
            let points = eval::pr_curve(&l.model, &set, l.cfg.train.norm, &thresholds)?;
            common.emit(&eval::pr_to_tsv(&points))
        }
        EvalTask::Twa { common, pair, seed, folds, positives } => {
            let l = common.load()?;
            let (p, _) = LanguagePair::canonical(lang(&pair[0])?, lang(&pair[1])?)?;
            let file = positives.unwrap_or_else(|| l.cfg.heldout_path(p.first(), p.second()));
            if !file.is_file() {
                bail!(
                    "positive pairs file not found: {} (train with holdout_fraction or pass --positives)",
                    file.display()
                );
            }
            let set = kg::load_alignment(&file, p.first(), p.second(), &l.kb)?;
            let cases = twa::generate_negatives(set.pairs(), &l.kb, p.first(), p.second(), seed)?;
            let report = twa::cross_validate(&cases, &l.model, p.first(), p.second(), folds, seed)?;
            common.emit(&report.to_tsv())
        }
        EvalTask::Tail { common, language, triples } => monolingual(common, &language, triples, false),
        EvalTask::Rel { common, language, triples } => monolingual(common, &language, triples, true),
        EvalTask::Complete { common, from, to, h, r, t, top } => {
            let l = common.load()?;
            let (from, to) = (lang(&from)?, lang(&to)?);
            let src = l.kb.graph(&from)?;
            let tgt = l.kb.graph(&to)?;
            let entity = |s: &Option<String>| -> Result<Option<usize>> {
                s.as_deref()
                    .map(|x| src.entities().get(x).with_context(|| format!("unknown {from} entity {x:?}")))
                    .transpose()
            };
            let query = PartialTriple {
                head: entity(&h)?,
                relation: r
                    .as_deref()
                    .map(|x| src.relations().get(x).with_context(|| format!("unknown {from} relation {x:?}")))
                    .transpose()?,
                tail: entity(&t)?,
            };
            let (slot, ranked) = eval::complete_triple(&l.model, query, &from, &to, l.cfg.train.norm, top)?;
            let mut out = String::new();
            for (i, d) in ranked {
                let label = match slot {
                    Slot::Relation => tgt.relations().symbol(i),
                    Slot::Head | Slot::Tail => tgt.entities().symbol(i),
                };
                out.push_str(&format!("{label}\t{d:.6}\n"));
            }
            common.emit(&out)
        }
        EvalTask::Pca { common, language, entities, dims } => {
            let l = common.load()?;
            let language = lang(&language)?;
            let g = l.kb.graph(&language)?;
            let space = l.model.space(&language)?;
            let labels: Vec<String> = match entities {
                Some(v) => v,
                None => g.entities().symbols().to_vec(),
            };
            let rows = labels
                .iter()
                .map(|x| g.entities().get(x).with_context(|| format!("unknown {language} entity {x:?}")))
                .collect::<Result<Vec<usize>>>()?;
            let picked = space.entities().select(Axis(0), &rows);
            let coords = eval::pca_project(picked.view(), dims)?;
            common.emit(&eval::pca_to_tsv(&labels, coords.view()))
        }
    }
}

fn monolingual(common: Common, language: &str, triples: Option<PathBuf>, relations: bool) -> Result<()> {
    let l = common.load()?;
    let language = lang(language)?;
    let test = test_triples(&l, &language, triples.as_deref())?;
    let norm = l.cfg.train.norm;
    let report = if relations {
        eval::relation_prediction(&l.model, &test, &language, norm)?
    } else {
        eval::tail_prediction(&l.model, &test, &language, norm)?
    };
    let g = l.kb.graph(&language)?;
    let labels: Vec<(String, String)> = test
        .iter()
        .map(|&t| {
            let (h, r, tail) = g.triple_labels(t);
            if relations {
                (format!("{h} -> {tail}"), r.to_owned())
            } else {
                (format!("{h} {r}"), tail.to_owned())
            }
        })
        .collect();
    common.emit(&report.to_tsv(&labels))
}
