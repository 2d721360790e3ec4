//! The derivation lattice: facts as nodes, one edge per premise of every
//! justification.

use std::collections::HashMap;
use std::fmt::Write;

use serde::Serialize;

use crate::digest::node_id;
use crate::engine::{SaturationResult, WorkingMemory};
use crate::term::Term;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Node {
    pub id: String,
    #[serde(rename = "term")]
    pub text: String,
    pub round: usize,
    pub initial: bool,
}

/// `from` is a premise of justification number `ord` of `to`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub rule: String,
    pub ord: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DerivationLattice {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(skip)]
    pub roots: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

pub fn build_lattice(r: &SaturationResult) -> DerivationLattice {
    let wm = &r.memory;
    let mut nodes = Vec::with_capacity(wm.len());
    let mut edges = Vec::new();
    for f in wm.facts() {
        let id = node_id(f.text());
        nodes.push(Node { id: id.clone(), text: f.text().to_string(), round: f.first_round, initial: f.initial });
        for (ord, j) in f.justifications.iter().enumerate() {
            let mut seen = Vec::new();
            for &p in j.premise_ids() {
                if seen.contains(&p) {
                    continue;
                }
                seen.push(p);
                edges.push(Edge { from: node_id(wm.fact(p).text()), to: id.clone(), rule: j.rule_id.clone(), ord });
            }
        }
    }
    let roots = nodes.iter().filter(|n| n.initial).map(|n| n.id.clone()).collect();
    let index = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
    DerivationLattice { nodes, edges, roots, index }
}

impl DerivationLattice {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_for(&self, t: &Term) -> Option<&Node> {
        self.node(&node_id(&t.render()))
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.edges.contains(e)
    }

    /// Edges from each fact's earliest justification.
    pub fn earliest_edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(|e| e.ord == 0)
    }

    /// Whether `to` can be reached from `from` along edges.
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.edges {
            succ.entry(e.from.as_str()).or_default().push(e.to.as_str());
        }
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                return true;
            }
            if seen.insert(x) {
                stack.extend(succ.get(x).into_iter().flatten());
            }
        }
        false
    }

    /// True when the earliest-justification edges form a DAG.
    pub fn earliest_is_acyclic(&self) -> bool {
        self.earliest_edges().all(|e| match (self.node(&e.from), self.node(&e.to)) {
            (Some(a), Some(b)) => a.round < b.round,
            _ => false,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lattice serializes")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lattice {\n  rankdir=BT;\n  node [shape=box];\n");
        for n in &self.nodes {
            let extra = if n.initial { ", peripheries=2" } else { "" };
            let _ = writeln!(out, "  \"{}\" [label=\"{}\"{}];", n.id, escape(&n.text), extra);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\", comment=\"{}\"];",
                e.from,
                e.to,
                escape(&e.rule),
                e.ord
            );
        }
        out.push_str("}\n");
        out
    }
}

pub fn export_dot(l: &DerivationLattice) -> String {
    l.to_dot()
}

pub fn export_json(l: &DerivationLattice) -> String {
    l.to_json()
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Earliest-justification proof of `t`, as edges in topological order.
pub fn proof_edges(wm: &WorkingMemory, t: &Term) -> Vec<Edge> {
    let Some(root) = wm.get(t) else { return Vec::new() };
    let mut visited = std::collections::HashSet::new();
    let mut stack = vec![root.id];
    let mut found: Vec<(usize, String, usize, Edge)> = Vec::new();
    while let Some(x) = stack.pop() {
        if !visited.insert(x) {
            continue;
        }
        let f = wm.fact(x);
        let Some(j) = f.earliest() else { continue };
        let to = node_id(f.text());
        let mut seen = Vec::new();
        for (k, &p) in j.premise_ids().iter().enumerate() {
            if seen.contains(&p) {
                continue;
            }
            seen.push(p);
            let e = Edge { from: node_id(wm.fact(p).text()), to: to.clone(), rule: j.rule_id.clone(), ord: 0 };
            found.push((f.first_round, f.text().to_string(), k, e));
            stack.push(p);
        }
    }
    found.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));
    found.into_iter().map(|(_, _, _, e)| e).collect()
}
