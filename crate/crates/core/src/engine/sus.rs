//! Subsumption between decomposed systems: `S1 Is-A S2` when every part
//! of `S1` is-a some part of `S2`.

use std::collections::BTreeMap;

use super::{FactId, Justification, Round, WorkingMemory};
use crate::term::{BinOp, Binding, Term};

pub const SUS_RULE: &str = "builtin.sus";

/// `S Is-A T`, the conclusion the subsumption justifications replay against.
pub(crate) fn pseudo_conclusion() -> Term {
    Term::bin(BinOp::IsA, Term::atom("S"), Term::atom("T"))
}

struct Whole {
    term: Term,
    /// (part, id of the `part Is-Part-Of whole` fact), canonical order.
    parts: Vec<(Term, FactId)>,
}

pub(super) fn sus_subsume(wm: &WorkingMemory, round: &mut Round) {
    let mut by_name: BTreeMap<String, Whole> = BTreeMap::new();
    for f in wm.facts() {
        if let Term::Bin(BinOp::IsPartOf, part, whole) = &f.term {
            by_name
                .entry(whole.render())
                .or_insert_with(|| Whole { term: whole.as_ref().clone(), parts: Vec::new() })
                .parts
                .push((part.as_ref().clone(), f.id));
        }
    }
    let wholes: Vec<&Whole> = by_name.values().collect();
    for (i, s1) in wholes.iter().enumerate() {
        for (k, s2) in wholes.iter().enumerate() {
            if i == k || round.exhausted {
                continue;
            }
            let Some(ids) = witness(wm, s1, s2) else { continue };
            let binding: Binding = [('S', s1.term.clone()), ('T', s2.term.clone())].into_iter().collect();
            let j = Justification {
                rule_id: SUS_RULE.to_string(),
                binding,
                premise_terms: Vec::new(),
                rewrite_position: None,
                round: round.no,
                premise_ids: ids,
            };
            round.emit(wm, Term::bin(BinOp::IsA, s1.term.clone(), s2.term.clone()), j);
        }
    }
}

/// Premise facts showing every part of `s1` is-a some part of `s2`: the
/// part facts of `s1`, then the chosen part facts of `s2`, then the
/// `Is-A` chains linking them.
fn witness(wm: &WorkingMemory, s1: &Whole, s2: &Whole) -> Option<Vec<FactId>> {
    let isa = wm.isa();
    let mut targets = Vec::new();
    let mut chains = Vec::new();
    for (p, _) in &s1.parts {
        let (q, qid) = s2.parts.iter().find(|(q, _)| isa.is_a(p, q))?;
        targets.push(*qid);
        for link in isa.path(p, q)? {
            chains.push(wm.get(&link)?.id);
        }
    }
    let mut ids: Vec<FactId> = Vec::new();
    for id in s1.parts.iter().map(|(_, id)| *id).chain(targets).chain(chains) {
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    Some(ids)
}
