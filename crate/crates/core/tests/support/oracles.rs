//! Independent oracles shared by the integration and acceptance tests.

use mtranse_core::eval::PartialTriple;
use mtranse_core::knowledge::transe_score;
use mtranse_core::{transit_entity, transit_relation, KnowledgeGraph, LanguageId, Model, MultilingualKb, NormOrder};

fn lang(code: &str) -> LanguageId {
    LanguageId::new(code).unwrap()
}

/// en/fr graphs over four entities and three relations.
pub fn four_entity_kb() -> MultilingualKb {
    let en = [("a", "p", "b"), ("b", "q", "c"), ("c", "s", "d"), ("d", "p", "a")];
    let fr = [("w", "x", "y"), ("y", "z", "w"), ("x2", "x", "y")];
    let mut kb = MultilingualKb::new();
    kb.add_graph(KnowledgeGraph::from_triples(lang("en"), en).0).unwrap();
    kb.add_graph(KnowledgeGraph::from_triples(lang("fr"), fr).0).unwrap();
    let set = mtranse_core::kg::parse_alignment("a\tp\tb\tw\tx\ty\n", &lang("en"), &lang("fr"), &kb, "inline".as_ref())
        .unwrap();
    kb.add_alignment(set).unwrap();
    kb
}

/// Ranks every candidate of the missing slot by building the full target
/// triple and ranking by score, ties by index.
pub fn exhaustive_completion(
    model: &Model,
    q: PartialTriple,
    from: &LanguageId,
    to: &LanguageId,
    top: usize,
) -> Vec<(usize, f64)> {
    let src = model.space(from).unwrap();
    let tgt = model.space(to).unwrap();
    let same = from == to;
    let ent = |i: usize| {
        if same {
            src.entity(i).to_vec()
        } else {
            transit_entity(model, from, to, src.entity(i)).unwrap()
        }
    };
    let rel = |i: usize| {
        if same {
            src.relation(i).to_vec()
        } else {
            transit_relation(model, from, to, src.relation(i)).unwrap()
        }
    };
    let mut scored: Vec<(usize, f64)> = match (q.head, q.relation, q.tail) {
        (Some(h), Some(r), None) => (0..tgt.num_entities())
            .map(|c| (c, transe_score(&ent(h), &rel(r), tgt.entity(c), NormOrder::L2)))
            .collect(),
        (None, Some(r), Some(t)) => (0..tgt.num_entities())
            .map(|c| (c, transe_score(tgt.entity(c), &rel(r), &ent(t), NormOrder::L2)))
            .collect(),
        (Some(h), None, Some(t)) => (0..tgt.num_relations())
            .map(|c| (c, transe_score(&ent(h), tgt.relation(c), &ent(t), NormOrder::L2)))
            .collect(),
        _ => unreachable!(),
    };
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(top);
    scored
}

pub fn brute_force_rank(query: &[f64], rows: &[Vec<f64>], target: usize, norm: NormOrder) -> usize {
    let mut order: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d: Vec<f64> = query.iter().zip(r).map(|(a, b)| a - b).collect();
            (norm.norm(&d), i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    1 + order.iter().position(|&(_, i)| i == target).unwrap()
}

pub fn exhaustive_threshold(scores: &[f64], labels: &[bool]) -> (f64, f64) {
    let mut distinct = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut cands = vec![distinct[0] - 1.0];
    for w in distinct.windows(2) {
        cands.push(w[0] + (w[1] - w[0]) / 2.0);
    }
    cands.push(distinct[distinct.len() - 1] + 1.0);
    let acc = |s: f64| {
        scores.iter().zip(labels).filter(|(&x, &l)| (x < s) == l).count() as f64 / scores.len() as f64
    };
    let mut best = (cands[0], acc(cands[0]));
    for &c in &cands[1..] {
        let a = acc(c);
        if a > best.1 {
            best = (c, a);
        }
    }
    best
}
