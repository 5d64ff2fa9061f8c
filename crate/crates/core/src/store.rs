//! On-disk model format.
//!
//! A model directory holds `manifest.tsv`, a line-oriented `key<TAB>value`
//! file, and one binary file per tensor. Tensors are row-major little-endian
//! `f32`; parameters are promoted back to `f64` on load.
//!
//! ```text
//! format_version  1
//! variant         var4
//! k               75
//! language        en
//! entities.en     15170
//! relations.en    2228
//! pair            en fr
//! tensor          space.en.entities.f32
//! ...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::embedding::{EmbeddingSpace, Model, TransitionParams, Variant};
use crate::error::{Error, Result};
use crate::kg::{LanguageId, LanguagePair};

pub const MANIFEST: &str = "manifest.tsv";
pub const FORMAT_VERSION: u32 = 1;

fn space_file(lang: &LanguageId, what: &str) -> String {
    format!("space.{lang}.{what}.f32")
}

fn transition_file(pair: &LanguagePair, what: &str) -> String {
    format!("transition.{}.{}.{what}.f32", pair.first(), pair.second())
}

fn write_tensor(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(|x| (x as f32).to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_tensor(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = rows * cols * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: expected {expected} bytes for a {rows}x{cols} tensor, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

/// Writes `model` into `dir`, creating the directory if needed.
pub fn save_model(model: &Model, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    let mut line = |k: &str, v: &str| {
        manifest.push_str(k);
        manifest.push('\t');
        manifest.push_str(v);
        manifest.push('\n');
    };
    line("format_version", &FORMAT_VERSION.to_string());
    line("variant", &model.variant().to_string());
    line("k", &model.dim().to_string());
    let mut tensors = Vec::new();
    for (lang, space) in model.spaces() {
        line("language", lang.as_str());
        line(&format!("entities.{lang}"), &space.num_entities().to_string());
        line(&format!("relations.{lang}"), &space.num_relations().to_string());
        for (what, m) in [("entities", space.entities()), ("relations", space.relations())] {
            let name = space_file(lang, what);
            write_tensor(&dir.join(&name), m.iter().copied())?;
            tensors.push(name);
        }
    }
    for (pair, t) in model.transitions() {
        line("pair", &format!("{} {}", pair.first(), pair.second()));
        let vectors = [("v_e", t.v_e()), ("v_r", t.v_r())];
        for (what, v) in vectors {
            if let Some(v) = v {
                let name = transition_file(pair, what);
                write_tensor(&dir.join(&name), v.iter().copied())?;
                tensors.push(name);
            }
        }
        let matrices = [("m_e", t.m_e()), ("m_r", t.m_r())];
        for (what, m) in matrices {
            if let Some(m) = m {
                let name = transition_file(pair, what);
                write_tensor(&dir.join(&name), m.iter().copied())?;
                tensors.push(name);
            }
        }
    }
    for name in &tensors {
        line("tensor", name);
    }
    let path = dir.join(MANIFEST);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.as_bytes()).map_err(|e| Error::io(&path, e))
}

struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("manifest line {}: missing tab", i + 1)))?;
            entries.push((k.to_owned(), v.to_owned()));
        }
        Ok(Manifest { entries })
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn one<'a>(&'a self, key: &'a str) -> Result<&'a str> {
        let mut it = self.all(key);
        match (it.next(), it.next()) {
            (Some(v), None) => Ok(v),
            (None, _) => Err(Error::Format(format!("manifest lacks {key}"))),
            (Some(_), Some(_)) => Err(Error::Format(format!("manifest repeats {key}"))),
        }
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.one(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("manifest {key}: not a count: {v:?}")))
    }
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<Model> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::Format(format!("{}: missing manifest", dir.display())))
        }
        Err(e) => return Err(Error::io(&path, e)),
    };
    let manifest = Manifest::parse(&text)?;
    let version = manifest.count("format_version")?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let variant: Variant = manifest.one("variant")?.parse()?;
    let k = manifest.count("k")?;
    if k == 0 {
        return Err(Error::Format("k must be at least 1".into()));
    }
    let listed: Vec<&str> = manifest.all("tensor").collect();
    let tensor = |name: String, rows: usize| -> Result<Array2<f64>> {
        if !listed.contains(&name.as_str()) {
            return Err(Error::Format(format!("manifest does not list tensor {name}")));
        }
        read_tensor(&dir.join(&name), rows, k)
    };

    let mut spaces = BTreeMap::new();
    for code in manifest.all("language") {
        let lang = LanguageId::new(code)?;
        let n_e = manifest.count(&format!("entities.{lang}"))?;
        let n_r = manifest.count(&format!("relations.{lang}"))?;
        let entities = tensor(space_file(&lang, "entities"), n_e)?;
        let relations = tensor(space_file(&lang, "relations"), n_r)?;
        let space = EmbeddingSpace::new(lang.clone(), entities, relations)?;
        if spaces.insert(lang.clone(), space).is_some() {
            return Err(Error::Format(format!("language {lang} listed twice")));
        }
    }
    let mut transitions = BTreeMap::new();
    for value in manifest.all("pair") {
        let (a, b) = value
            .split_once(' ')
            .ok_or_else(|| Error::Format(format!("malformed pair {value:?}")))?;
        let (pair, swapped) = LanguagePair::canonical(LanguageId::new(a)?, LanguageId::new(b)?)?;
        if swapped {
            return Err(Error::Format(format!("pair {value:?} is not in canonical order")));
        }
        let vector = |what: &str| -> Result<Vec<f64>> {
            Ok(tensor(transition_file(&pair, what), 1)?.into_raw_vec_and_offset().0)
        };
        let matrix = |what: &str| tensor(transition_file(&pair, what), k);
        let (v_e, v_r) = if variant.has_translation_vectors() {
            (Some(vector("v_e")?), Some(vector("v_r")?))
        } else {
            (None, None)
        };
        let m_e = variant.has_entity_matrix().then(|| matrix("m_e")).transpose()?;
        let m_r = variant.has_relation_matrix().then(|| matrix("m_r")).transpose()?;
        let t = TransitionParams::new(pair.clone(), variant, k, v_e, v_r, m_e, m_r)?;
        transitions.insert(pair, t);
    }
    Model::new(variant, k, spaces, transitions)
}
