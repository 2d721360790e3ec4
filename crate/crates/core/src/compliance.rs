//! Verdicts over the reserved `Failure`, `Warning` and `Resolved` heads.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::digest::sha256_hex;
use crate::engine::{SaturationResult, WorkingMemory};
use crate::lattice::{proof_edges, DerivationLattice, Edge};
use crate::parse::{render, Program};
use crate::term::Term;

/// Declared from most to least severe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VerdictKind {
    Failure,
    Warning,
    Resolved,
    Clean,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// `t` for `Failure(t)` and `Warning(t)`; `Warning(t)` for a resolution.
    #[serde(serialize_with = "term_text")]
    pub subject: Option<Term>,
    /// The fact carrying the verdict.
    #[serde(skip)]
    pub fact: Option<Term>,
    /// Earliest-justification proof of the verdict fact, premises first.
    pub evidence: Vec<Edge>,
}

fn term_text<S: Serializer>(t: &Option<Term>, s: S) -> Result<S::Ok, S::Error> {
    match t {
        Some(t) => s.serialize_str(&t.render()),
        None => s.serialize_none(),
    }
}

fn unary<'a>(t: &'a Term, head: &str) -> Option<&'a Term> {
    match t {
        Term::App(h, args) if args.len() == 1 && h.as_atom() == Some(head) => Some(&args[0]),
        _ => None,
    }
}

pub fn extract_verdicts(wm: &WorkingMemory) -> Vec<Verdict> {
    let mut out = Vec::new();
    let mut push = |kind, subject: &Term, fact: &Term| {
        out.push(Verdict {
            kind,
            subject: Some(subject.clone()),
            fact: Some(fact.clone()),
            evidence: proof_edges(wm, fact),
        });
    };
    for f in wm.facts() {
        if let Some(s) = unary(&f.term, "Failure") {
            push(VerdictKind::Failure, s, &f.term);
        }
    }
    for f in wm.facts() {
        if let Some(s) = unary(&f.term, "Warning") {
            let resolved = Term::call("Resolved", vec![f.term.clone()]);
            if !wm.contains(&resolved) {
                push(VerdictKind::Warning, s, &f.term);
            }
        }
    }
    for f in wm.facts() {
        if let Some(w) = unary(&f.term, "Resolved") {
            if unary(w, "Warning").is_some() && wm.contains(w) {
                push(VerdictKind::Resolved, w, &f.term);
            }
        }
    }
    if out.is_empty() {
        out.push(Verdict { kind: VerdictKind::Clean, subject: None, fact: None, evidence: Vec::new() });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub rounds: usize,
    pub facts: usize,
    pub edges: usize,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Digests {
    pub program: String,
    pub facts: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplianceReport {
    pub overall: VerdictKind,
    pub verdicts: Vec<Verdict>,
    pub stats: Stats,
    pub digests: Digests,
}

impl ComplianceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn overall(verdicts: &[Verdict]) -> VerdictKind {
    verdicts.iter().map(|v| v.kind).min().unwrap_or(VerdictKind::Clean)
}

pub fn compliance_report(
    verdicts: Vec<Verdict>,
    l: &DerivationLattice,
    r: &SaturationResult,
    p: &Program,
) -> ComplianceReport {
    ComplianceReport {
        overall: overall(&verdicts),
        verdicts,
        stats: Stats {
            rounds: r.rounds_used,
            facts: r.memory.len(),
            edges: l.edges.len(),
            status: r.status.to_string(),
        },
        digests: Digests { program: sha256_hex(render(p).as_bytes()), facts: sha256_hex(r.dump().as_bytes()) },
    }
}
