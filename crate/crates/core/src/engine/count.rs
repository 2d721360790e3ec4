//! Multiplicity as the number of derivation trees.
//!
//! A tree for fact `x` is either the bare assertion (when `x` is initial)
//! or a justification of `x` with one tree for each premise, where no fact
//! repeats along a root-to-leaf path. Justifications made by this built-in
//! count as exactly one tree, so `(m)A` never feeds back into `m`.

use super::{DiagnosticKind, FactId, Justification, Round, WorkingMemory};
use crate::term::{Binding, Number, Term};

pub const COUNT_RULE: &str = "builtin.count";

/// Work allowed for path enumeration inside one strongly connected
/// component before its counts saturate.
const SCC_STEP_BUDGET: u64 = 200_000;

/// `(N)A`, the conclusion the counting justifications replay against.
pub(crate) fn pseudo_conclusion() -> Term {
    Term::ann(Term::atom("N"), Term::atom("A"))
}

pub(super) fn count_aggregate(wm: &WorkingMemory, round: &mut Round) {
    let cap = round.limits.max_multiplicity;
    let (counts, overflowed) = tree_counts(wm, u128::from(cap) + 1);
    for f in wm.facts() {
        if round.exhausted {
            return;
        }
        if f.term.is_numeric_annotation() {
            continue;
        }
        let mut m = counts[f.id];
        if m > u128::from(cap) || overflowed[f.id] {
            round.diag(COUNT_RULE, DiagnosticKind::MultiplicityCap, format!("{} capped at {cap}", f.text()));
            m = u128::from(cap);
        }
        let n = Term::Num(Number::from_i64(m as i64));
        let binding: Binding = [('N', n.clone()), ('A', f.term.clone())].into_iter().collect();
        let j = Justification {
            rule_id: COUNT_RULE.to_string(),
            binding,
            premise_terms: Vec::new(),
            rewrite_position: None,
            round: round.no,
            premise_ids: vec![f.id],
        };
        round.emit(wm, Term::ann(n, f.term.clone()), j);
    }
}

/// Derivation-tree count of every fact, saturating at `cap`, indexed by
/// fact id. The second vector flags facts whose search ran out of budget.
pub fn tree_counts(wm: &WorkingMemory, cap: u128) -> (Vec<u128>, Vec<bool>) {
    let n = wm.len();
    let edges: Vec<Vec<FactId>> = (0..n)
        .map(|id| {
            let mut e: Vec<FactId> = wm
                .fact(id)
                .justifications
                .iter()
                .filter(|j| j.rule_id != COUNT_RULE)
                .flat_map(|j| j.premise_ids.iter().copied())
                .collect();
            e.sort_unstable();
            e.dedup();
            e
        })
        .collect();
    let (comp, sccs) = tarjan(&edges);
    let mut value = vec![0u128; n];
    let mut overflow = vec![false; n];
    for scc in &sccs {
        let cyclic = scc.len() > 1 || edges[scc[0]].contains(&scc[0]);
        if !cyclic {
            let x = scc[0];
            let mut unlimited = u64::MAX;
            value[x] = local(wm, x, cap, &comp, &value, &mut Vec::new(), &mut unlimited);
            continue;
        }
        let mut budget = SCC_STEP_BUDGET;
        let mut fresh = Vec::with_capacity(scc.len());
        for &x in scc {
            let mut path = Vec::new();
            fresh.push(local(wm, x, cap, &comp, &value, &mut path, &mut budget));
        }
        for (&x, v) in scc.iter().zip(fresh) {
            if budget == 0 {
                value[x] = cap;
                overflow[x] = true;
            } else {
                value[x] = v;
            }
        }
    }
    (value, overflow)
}

/// Trees of `x` given the facts of its component already on the path.
fn local(
    wm: &WorkingMemory,
    x: FactId,
    cap: u128,
    comp: &[usize],
    done: &[u128],
    path: &mut Vec<FactId>,
    budget: &mut u64,
) -> u128 {
    if *budget == 0 {
        return cap;
    }
    *budget -= 1;
    let f = wm.fact(x);
    let mut total: u128 = u128::from(f.initial);
    path.push(x);
    for j in &f.justifications {
        if total >= cap {
            break;
        }
        if j.rule_id == COUNT_RULE {
            total += 1;
            continue;
        }
        let mut prod: u128 = 1;
        for &p in &j.premise_ids {
            let v = if comp[p] != comp[x] {
                done[p]
            } else if path.contains(&p) {
                0
            } else {
                local(wm, p, cap, comp, done, path, budget)
            };
            prod = prod.saturating_mul(v).min(cap);
            if prod == 0 {
                break;
            }
        }
        total = total.saturating_add(prod).min(cap);
    }
    path.pop();
    total.min(cap)
}

/// Iterative Tarjan. Components come out in reverse topological order:
/// every component reachable from one is emitted before it.
fn tarjan(edges: &[Vec<usize>]) -> (Vec<usize>, Vec<Vec<usize>>) {
    const UNSEEN: usize = usize::MAX;
    let n = edges.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut sccs = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(top) = work.last_mut() {
            let v = top.0;
            if top.1 < edges[v].len() {
                let w = edges[v][top.1];
                top.1 += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut scc = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack holds the component");
                    on_stack[w] = false;
                    comp[w] = sccs.len();
                    scc.push(w);
                    if w == v {
                        break;
                    }
                }
                scc.sort_unstable();
                sccs.push(scc);
            }
        }
    }
    (comp, sccs)
}
