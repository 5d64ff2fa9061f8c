//! Multilingual knowledge graphs: per-language triple sets, cross-lingual
//! triple alignments and inter-lingual entity links, loaded from
//! tab-separated text.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(code: impl Into<String>) -> Result<Self> {
        let code = code.into();
        if code.is_empty() {
            return Err(Error::InvalidKb("empty language code".into()));
        }
        if code.contains(char::is_whitespace) {
            return Err(Error::InvalidKb(format!(
                "language code {code:?} contains whitespace"
            )));
        }
        // codes name files inside a model directory
        if code.contains(['/', '\\']) {
            return Err(Error::InvalidKb(format!("language code {code:?} contains a path separator")));
        }
        Ok(LanguageId(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Unordered language pair, stored with the lexicographically smaller code
/// first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguagePair {
    first: LanguageId,
    second: LanguageId,
}

impl LanguagePair {
    /// Builds the canonical pair. The returned flag is true when `a` and `b`
    /// had to be swapped.
    pub fn canonical(a: LanguageId, b: LanguageId) -> Result<(Self, bool)> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok((LanguagePair { first: a, second: b }, false)),
            std::cmp::Ordering::Greater => Ok((LanguagePair { first: b, second: a }, true)),
            std::cmp::Ordering::Equal => Err(Error::InvalidKb(format!(
                "language pair must name two distinct languages, got {a} twice"
            ))),
        }
    }

    pub fn first(&self) -> &LanguageId {
        &self.first
    }

    pub fn second(&self) -> &LanguageId {
        &self.second
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.second)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// String interner with first-appearance ordering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn intern(&mut self, symbol: &str) -> usize {
        if let Some(&i) = self.index.get(symbol) {
            return i;
        }
        let i = self.symbols.len();
        self.symbols.push(symbol.to_owned());
        self.index.insert(symbol.to_owned(), i);
        i
    }

    pub fn get(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

impl<S: AsRef<str>> FromIterator<S> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut v = Vocabulary::default();
        for s in iter {
            v.intern(s.as_ref());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    language: LanguageId,
    entities: Vocabulary,
    relations: Vocabulary,
    triples: Vec<Triple>,
}

/// Side statistics of a graph load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub lines: usize,
    pub duplicates: usize,
}

impl KnowledgeGraph {
    /// Builds a graph from surface-form triples. Duplicates are dropped.
    pub fn from_triples<'a, I>(language: LanguageId, triples: I) -> (Self, LoadReport)
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut g = KnowledgeGraph {
            language,
            entities: Vocabulary::default(),
            relations: Vocabulary::default(),
            triples: Vec::new(),
        };
        let mut seen = HashSet::new();
        let mut report = LoadReport::default();
        for (h, r, t) in triples {
            report.lines += 1;
            let triple = Triple::new(
                g.entities.intern(h),
                g.relations.intern(r),
                g.entities.intern(t),
            );
            if seen.insert(triple) {
                g.triples.push(triple);
            } else {
                report.duplicates += 1;
            }
        }
        (g, report)
    }

    pub fn parse(text: &str, language: LanguageId, origin: &Path) -> Result<(Self, LoadReport)> {
        let mut rows = Vec::new();
        for (lineno, line) in lines(text) {
            let fields = split_fields(line, 3, origin, lineno)?;
            rows.push((fields[0], fields[1], fields[2]));
        }
        if rows.is_empty() {
            return Err(Error::EmptyGraph(origin.to_path_buf()));
        }
        Ok(Self::from_triples(language, rows))
    }

    pub fn language(&self) -> &LanguageId {
        &self.language
    }

    pub fn entities(&self) -> &Vocabulary {
        &self.entities
    }

    pub fn relations(&self) -> &Vocabulary {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Resolves a surface-form triple against this graph's vocabularies.
    pub fn resolve(&self, h: &str, r: &str, t: &str) -> std::result::Result<Triple, (&'static str, String)> {
        let head = self.entities.get(h).ok_or(("entity", h.to_owned()))?;
        let relation = self.relations.get(r).ok_or(("relation", r.to_owned()))?;
        let tail = self.entities.get(t).ok_or(("entity", t.to_owned()))?;
        Ok(Triple::new(head, relation, tail))
    }

    pub fn triple_labels(&self, t: Triple) -> (&str, &str, &str) {
        (
            self.entities.symbol(t.head),
            self.relations.symbol(t.relation),
            self.entities.symbol(t.tail),
        )
    }

    /// Writes the graph in the triple file format.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for &t in &self.triples {
            let (h, r, tl) = self.triple_labels(t);
            writeln!(w, "{h}\t{r}\t{tl}")?;
        }
        Ok(())
    }
}

pub fn load_graph(path: impl AsRef<Path>, language: LanguageId) -> Result<(KnowledgeGraph, LoadReport)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (g, report) = KnowledgeGraph::parse(&text, language, path)?;
    if report.duplicates > 0 {
        log::info!(
            "{}: dropped {} duplicate triples",
            path.display(),
            report.duplicates
        );
    }
    Ok((g, report))
}

/// Aligned triple pairs between two languages. The first triple of every
/// pair belongs to `pair.first()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentSet {
    pair: LanguagePair,
    pairs: Vec<(Triple, Triple)>,
}

impl AlignmentSet {
    pub fn new(pair: LanguagePair) -> Self {
        AlignmentSet {
            pair,
            pairs: Vec::new(),
        }
    }

    /// Builds a set from canonical-order pairs, dropping duplicates.
    pub fn from_pairs(pair: LanguagePair, pairs: impl IntoIterator<Item = (Triple, Triple)>) -> Self {
        let mut set = AlignmentSet::new(pair);
        let mut seen = HashSet::new();
        for p in pairs {
            if seen.insert(p) {
                set.pairs.push(p);
            }
        }
        set
    }

    pub fn pair(&self) -> &LanguagePair {
        &self.pair
    }

    pub fn pairs(&self) -> &[(Triple, Triple)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Loads an alignment file whose lines list a triple of `from` followed by
/// its counterpart in `to`.
pub fn load_alignment(
    path: impl AsRef<Path>,
    from: &LanguageId,
    to: &LanguageId,
    kb: &MultilingualKb,
) -> Result<AlignmentSet> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_alignment(&text, from, to, kb, path)
}

pub fn parse_alignment(
    text: &str,
    from: &LanguageId,
    to: &LanguageId,
    kb: &MultilingualKb,
    origin: &Path,
) -> Result<AlignmentSet> {
    let (pair, swapped) = LanguagePair::canonical(from.clone(), to.clone())?;
    let src = kb.graph(from)?;
    let tgt = kb.graph(to)?;
    let mut pairs = Vec::new();
    for (lineno, line) in lines(text) {
        let f = split_fields(line, 6, origin, lineno)?;
        let resolve = |g: &KnowledgeGraph, h, r, t| {
            g.resolve(h, r, t).map_err(|(kind, symbol)| Error::UnknownSymbol {
                path: origin.to_path_buf(),
                line: lineno,
                kind,
                symbol,
                language: g.language().to_string(),
            })
        };
        let a = resolve(src, f[0], f[1], f[2])?;
        let b = resolve(tgt, f[3], f[4], f[5])?;
        pairs.push(if swapped { (b, a) } else { (a, b) });
    }
    Ok(AlignmentSet::from_pairs(pair, pairs))
}

/// Directed inter-lingual entity links used as evaluation ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IllSet {
    source: LanguageId,
    target: LanguageId,
    links: Vec<(usize, usize)>,
    skipped: usize,
}

impl IllSet {
    /// Builds a set, keeping the first link of any repeated source entity.
    pub fn new(source: LanguageId, target: LanguageId, links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut set = IllSet {
            source,
            target,
            links: Vec::new(),
            skipped: 0,
        };
        let mut seen = HashSet::new();
        for (s, t) in links {
            if seen.insert(s) {
                set.links.push((s, t));
            } else {
                set.skipped += 1;
            }
        }
        set
    }

    pub fn source(&self) -> &LanguageId {
        &self.source
    }

    pub fn target(&self) -> &LanguageId {
        &self.target
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// Lines dropped while loading: unresolvable labels or repeated sources.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

pub fn load_ills(
    path: impl AsRef<Path>,
    source: &LanguageId,
    target: &LanguageId,
    kb: &MultilingualKb,
) -> Result<IllSet> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_ills(&text, source, target, kb, path)
}

pub fn parse_ills(
    text: &str,
    source: &LanguageId,
    target: &LanguageId,
    kb: &MultilingualKb,
    origin: &Path,
) -> Result<IllSet> {
    let src = kb.graph(source)?;
    let tgt = kb.graph(target)?;
    let mut links = Vec::new();
    let mut unresolved = 0;
    for (lineno, line) in lines(text) {
        let f = split_fields(line, 2, origin, lineno)?;
        match (src.entities().get(f[0]), tgt.entities().get(f[1])) {
            (Some(a), Some(b)) => links.push((a, b)),
            _ => unresolved += 1,
        }
    }
    let mut set = IllSet::new(source.clone(), target.clone(), links);
    set.skipped += unresolved;
    if set.skipped > 0 {
        log::info!(
            "{}: skipped {} inter-lingual links",
            origin.display(),
            set.skipped
        );
    }
    Ok(set)
}

#[derive(Debug, Clone, Default)]
pub struct MultilingualKb {
    graphs: BTreeMap<LanguageId, KnowledgeGraph>,
    alignments: BTreeMap<LanguagePair, AlignmentSet>,
    ills: Vec<IllSet>,
}

impl MultilingualKb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_graph(&mut self, graph: KnowledgeGraph) -> Result<()> {
        if self.graphs.contains_key(graph.language()) {
            return Err(Error::InvalidKb(format!(
                "language {} loaded twice",
                graph.language()
            )));
        }
        self.graphs.insert(graph.language().clone(), graph);
        Ok(())
    }

    /// Adds an alignment set, merging with any set already present for the
    /// same pair.
    pub fn add_alignment(&mut self, set: AlignmentSet) -> Result<()> {
        let (a, b) = (set.pair.first(), set.pair.second());
        let (ga, gb) = (self.graph(a)?, self.graph(b)?);
        for (x, y) in &set.pairs {
            if !triple_in_bounds(ga, *x) || !triple_in_bounds(gb, *y) {
                return Err(Error::InvalidKb(format!(
                    "alignment {} references indices outside the vocabularies",
                    set.pair
                )));
            }
        }
        match self.alignments.remove(&set.pair) {
            Some(existing) => {
                let merged = AlignmentSet::from_pairs(
                    set.pair.clone(),
                    existing.pairs.into_iter().chain(set.pairs),
                );
                self.alignments.insert(merged.pair.clone(), merged);
            }
            None => {
                self.alignments.insert(set.pair.clone(), set);
            }
        }
        Ok(())
    }

    pub fn add_ills(&mut self, ills: IllSet) -> Result<()> {
        let (gs, gt) = (self.graph(&ills.source)?, self.graph(&ills.target)?);
        if ills
            .links
            .iter()
            .any(|&(s, t)| s >= gs.num_entities() || t >= gt.num_entities())
        {
            return Err(Error::InvalidKb(format!(
                "links {}->{} reference indices outside the vocabularies",
                ills.source, ills.target
            )));
        }
        self.ills.push(ills);
        Ok(())
    }

    pub fn graph(&self, lang: &LanguageId) -> Result<&KnowledgeGraph> {
        self.graphs
            .get(lang)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    pub fn graphs(&self) -> &BTreeMap<LanguageId, KnowledgeGraph> {
        &self.graphs
    }

    pub fn alignments(&self) -> &BTreeMap<LanguagePair, AlignmentSet> {
        &self.alignments
    }

    pub fn alignment(&self, pair: &LanguagePair) -> Option<&AlignmentSet> {
        self.alignments.get(pair)
    }

    pub fn ills(&self) -> &[IllSet] {
        &self.ills
    }

    /// Replaces the alignment set of a pair, e.g. after holding out a split.
    pub fn replace_alignment(&mut self, set: AlignmentSet) -> Result<Option<AlignmentSet>> {
        let old = self.alignments.remove(&set.pair);
        if let Err(e) = self.add_alignment(set) {
            if let Some(old) = old {
                self.alignments.insert(old.pair.clone(), old);
            }
            return Err(e);
        }
        Ok(old)
    }
}

fn triple_in_bounds(g: &KnowledgeGraph, t: Triple) -> bool {
    t.head < g.num_entities() && t.tail < g.num_entities() && t.relation < g.num_relations()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphCounts {
    pub language: LanguageId,
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub graphs: Vec<GraphCounts>,
    pub alignments: Vec<(LanguagePair, usize)>,
    pub ills: Vec<(LanguageId, LanguageId, usize)>,
}

impl Stats {
    pub fn total_entities(&self) -> usize {
        self.graphs.iter().map(|g| g.entities).sum()
    }

    pub fn total_relations(&self) -> usize {
        self.graphs.iter().map(|g| g.relations).sum()
    }

    pub fn total_triples(&self) -> usize {
        self.graphs.iter().map(|g| g.triples).sum()
    }

    pub fn total_alignments(&self) -> usize {
        self.alignments.iter().map(|(_, n)| n).sum()
    }
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.graphs {
            writeln!(
                f,
                "graph\t{}\t{}\t{}\t{}",
                g.language, g.entities, g.relations, g.triples
            )?;
        }
        for (pair, n) in &self.alignments {
            writeln!(f, "alignment\t{}\t{}\t{}", pair.first(), pair.second(), n)?;
        }
        for (s, t, n) in &self.ills {
            writeln!(f, "ills\t{s}\t{t}\t{n}")?;
        }
        Ok(())
    }
}

pub fn graph_stats(kb: &MultilingualKb) -> Stats {
    Stats {
        graphs: kb
            .graphs
            .values()
            .map(|g| GraphCounts {
                language: g.language.clone(),
                entities: g.num_entities(),
                relations: g.num_relations(),
                triples: g.triples.len(),
            })
            .collect(),
        alignments: kb
            .alignments
            .values()
            .map(|a| (a.pair.clone(), a.len()))
            .collect(),
        ills: kb
            .ills
            .iter()
            .map(|i| (i.source.clone(), i.target.clone(), i.len()))
            .collect(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("not valid UTF-8: {e}"),
    })
}

/// Non-empty lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i + 1, l))
}

fn split_fields<'a>(line: &'a str, arity: usize, origin: &Path, lineno: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != arity {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            message: format!("expected {arity} tab-separated fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}
