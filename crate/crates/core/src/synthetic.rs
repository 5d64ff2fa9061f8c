//! Synthetic bilingual fixtures: two isomorphic random graphs with a partial
//! triple alignment and held-out entity links.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{AlignmentSet, IllSet, KnowledgeGraph, LanguageId, LanguagePair, MultilingualKb, Triple};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    /// Fraction of all triples aligned for training.
    pub aligned_fraction: f64,
    /// Entities kept out of every aligned triple.
    pub held_out_entities: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            entities: 50,
            relations: 5,
            triples: 200,
            aligned_fraction: 0.6,
            held_out_entities: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    /// Both graphs plus the training alignment set.
    pub kb: MultilingualKb,
    pub source: LanguageId,
    pub target: LanguageId,
    /// Identity links, source to target, of entities absent from every
    /// aligned triple.
    pub held_out: IllSet,
    /// Identity links of entities covered by the alignment.
    pub covered: IllSet,
    /// Every true triple pair, aligned or not, in canonical order.
    pub all_pairs: Vec<(Triple, Triple)>,
}

/// Paths written by [`Fixture::write_files`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub source_triples: PathBuf,
    pub target_triples: PathBuf,
    pub alignment: PathBuf,
    pub held_out_ills: PathBuf,
}

impl Fixture {
    /// Writes both graphs, the training alignment and the held-out links as
    /// TSV files into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<FixtureFiles> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = FixtureFiles {
            source_triples: dir.join(format!("{}.tsv", self.source)),
            target_triples: dir.join(format!("{}.tsv", self.target)),
            alignment: dir.join("alignment.tsv"),
            held_out_ills: dir.join("ills.tsv"),
        };
        let src = self.kb.graph(&self.source)?;
        let tgt = self.kb.graph(&self.target)?;
        let save = |path: &Path, text: String| fs::write(path, text).map_err(|e| Error::io(path, e));
        let mut buf = Vec::new();
        src.write_tsv(&mut buf).map_err(|e| Error::io(&files.source_triples, e))?;
        save(&files.source_triples, String::from_utf8(buf).expect("utf-8 labels"))?;
        let mut buf = Vec::new();
        tgt.write_tsv(&mut buf).map_err(|e| Error::io(&files.target_triples, e))?;
        save(&files.target_triples, String::from_utf8(buf).expect("utf-8 labels"))?;
        let mut text = String::new();
        for set in self.kb.alignments().values() {
            for &(a, b) in set.pairs() {
                let (h, r, t) = src.triple_labels(a);
                let (h2, r2, t2) = tgt.triple_labels(b);
                text.push_str(&format!("{h}\t{r}\t{t}\t{h2}\t{r2}\t{t2}\n"));
            }
        }
        save(&files.alignment, text)?;
        let text: String = self
            .held_out
            .links()
            .iter()
            .map(|&(s, t)| format!("{}\t{}\n", src.entities().symbol(s), tgt.entities().symbol(t)))
            .collect();
        save(&files.held_out_ills, text)?;
        Ok(files)
    }
}

fn random_triples(rng: &mut ChaCha8Rng, spec: &FixtureSpec) -> Result<Vec<(usize, usize, usize)>> {
    let possible = spec.entities * (spec.entities - 1) * spec.relations;
    if spec.triples > possible / 2 {
        return Err(Error::Config("fixture too dense for its vocabulary".into()));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(spec.triples);
    let push = |out: &mut Vec<_>, seen: &mut HashSet<_>, t: (usize, usize, usize)| {
        if t.0 != t.2 && seen.insert(t) {
            out.push(t);
        }
    };
    // every entity and relation appears at least once
    for e in 0..spec.entities {
        while out.len() <= e {
            let r = if e < spec.relations { e } else { rng.random_range(0..spec.relations) };
            let t = rng.random_range(0..spec.entities);
            push(&mut out, &mut seen, (e, r, t));
        }
    }
    while out.len() < spec.triples {
        let t = (
            rng.random_range(0..spec.entities),
            rng.random_range(0..spec.relations),
            rng.random_range(0..spec.entities),
        );
        push(&mut out, &mut seen, t);
    }
    out.truncate(spec.triples);
    out.shuffle(rng);
    Ok(out)
}

/// Builds the fixture. Source labels are `e<i>`/`r<j>`, target labels
/// `f<i>`/`s<j>`; the target graph lists its triples in a different order so
/// the two vocabularies are indexed differently.
pub fn bilingual_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    if spec.entities < 2 || spec.relations < 1 || spec.triples < spec.entities {
        return Err(Error::Config("fixture needs at least 2 entities and one triple per entity".into()));
    }
    if spec.held_out_entities >= spec.entities {
        return Err(Error::Config("cannot hold out every entity".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw = random_triples(&mut rng, spec)?;

    let source = LanguageId::new("en")?;
    let target = LanguageId::new("fr")?;
    let en_labels: Vec<(String, String, String)> = raw
        .iter()
        .map(|&(h, r, t)| (format!("e{h}"), format!("r{r}"), format!("e{t}")))
        .collect();
    let mut fr_order: Vec<usize> = (0..raw.len()).collect();
    fr_order.shuffle(&mut rng);
    let fr_labels: Vec<(String, String, String)> = fr_order
        .iter()
        .map(|&i| {
            let (h, r, t) = raw[i];
            (format!("f{h}"), format!("s{r}"), format!("f{t}"))
        })
        .collect();
    let (en, _) = KnowledgeGraph::from_triples(
        source.clone(),
        en_labels.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
    );
    let (fr, _) = KnowledgeGraph::from_triples(
        target.clone(),
        fr_labels.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
    );

    let entity_ids: Vec<usize> = (0..spec.entities).collect();
    let held: HashSet<usize> = entity_ids
        .choose_multiple(&mut rng, spec.held_out_entities)
        .copied()
        .collect();
    let n_aligned = (spec.aligned_fraction * spec.triples as f64).round() as usize;
    let eligible: Vec<usize> = (0..raw.len())
        .filter(|&i| !held.contains(&raw[i].0) && !held.contains(&raw[i].2))
        .collect();
    if eligible.len() < n_aligned {
        return Err(Error::Config(format!(
            "only {} triples avoid the held-out entities, {n_aligned} requested",
            eligible.len()
        )));
    }
    let mut aligned_idx: Vec<usize> = eligible.choose_multiple(&mut rng, n_aligned).copied().collect();
    aligned_idx.sort_unstable();

    let resolve_pair = |i: usize| {
        let (h, r, t) = &en_labels[i];
        let (raw_h, raw_r, raw_t) = raw[i];
        let a = en.resolve(h, r, t).expect("source label");
        let b = fr
            .resolve(&format!("f{raw_h}"), &format!("s{raw_r}"), &format!("f{raw_t}"))
            .expect("target label");
        (a, b)
    };
    let (pair, swapped) = LanguagePair::canonical(source.clone(), target.clone())?;
    debug_assert!(!swapped);
    let alignment = AlignmentSet::from_pairs(pair, aligned_idx.iter().map(|&i| resolve_pair(i)));
    let all_pairs = (0..raw.len()).map(resolve_pair).collect();

    let mut covered_entities = HashSet::new();
    for &i in &aligned_idx {
        covered_entities.insert(raw[i].0);
        covered_entities.insert(raw[i].2);
    }
    let link = |e: usize| {
        (
            en.entities().get(&format!("e{e}")).expect("source entity"),
            fr.entities().get(&format!("f{e}")).expect("target entity"),
        )
    };
    let held_out = IllSet::new(
        source.clone(),
        target.clone(),
        (0..spec.entities).filter(|e| !covered_entities.contains(e)).map(link),
    );
    let covered = IllSet::new(
        source.clone(),
        target.clone(),
        (0..spec.entities).filter(|e| covered_entities.contains(e)).map(link),
    );

    let mut kb = MultilingualKb::new();
    kb.add_graph(en)?;
    kb.add_graph(fr)?;
    kb.add_alignment(alignment)?;
    kb.add_ills(held_out.clone())?;
    Ok(Fixture {
        kb,
        source,
        target,
        held_out,
        covered,
        all_pairs,
    })
}
