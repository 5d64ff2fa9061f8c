use std::path::Path;

use crate::kg::{parse_alignment, KnowledgeGraph, LanguageId, MultilingualKb};

pub fn lang(code: &str) -> LanguageId {
    LanguageId::new(code).unwrap()
}

/// en/fr graphs of six triples each, five of them aligned.
pub fn two_language_kb() -> MultilingualKb {
    let en = "Paris\tcapital of\tFrance\nRome\tcapital of\tItaly\nFrance\tborders\tItaly\n\
              Italy\tborders\tFrance\nParis\tlocated in\tEurope\nRome\tlocated in\tEurope\n";
    let fr = "Paris\tcapitale de\tFrance\nRome\tcapitale de\tItalie\nFrance\tvoisin de\tItalie\n\
              Italie\tvoisin de\tFrance\nParis\tsitué en\tEurope\nRome\tsitué en\tEurope\n";
    let mut kb = MultilingualKb::new();
    kb.add_graph(KnowledgeGraph::parse(en, lang("en"), Path::new("en")).unwrap().0)
        .unwrap();
    kb.add_graph(KnowledgeGraph::parse(fr, lang("fr"), Path::new("fr")).unwrap().0)
        .unwrap();
    let align = "Paris\tcapital of\tFrance\tParis\tcapitale de\tFrance\n\
                 Rome\tcapital of\tItaly\tRome\tcapitale de\tItalie\n\
                 France\tborders\tItaly\tFrance\tvoisin de\tItalie\n\
                 Italy\tborders\tFrance\tItalie\tvoisin de\tFrance\n\
                 Paris\tlocated in\tEurope\tParis\tsitué en\tEurope\n";
    let set = parse_alignment(align, &lang("en"), &lang("fr"), &kb, Path::new("align")).unwrap();
    kb.add_alignment(set).unwrap();
    kb
}

pub fn single_triple_kb() -> MultilingualKb {
    let mut kb = MultilingualKb::new();
    let (g, _) = KnowledgeGraph::from_triples(lang("en"), [("A", "r", "B")]);
    kb.add_graph(g).unwrap();
    kb
}
