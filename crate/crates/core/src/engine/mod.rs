//! Bounded forward-chaining saturation.
//!
//! Each round runs the standard rules, the rewrite rules, multiplicity
//! counting and part-based subsumption against the facts committed so
//! far, then commits everything it produced at once.

mod count;
mod matching;
mod replay;
mod sus;

use std::collections::{BTreeSet, HashSet};
use std::hash::{Hash, Hasher};

use hashbrown::HashTable;
use rustc_hash::{FxHashMap, FxHashSet, FxHasher};
use std::fmt;

use serde::Serialize;

pub use count::COUNT_RULE;
pub use matching::{match_into, match_pattern, IsaIndex};
pub use replay::{replay, ReplayError};
pub use sus::SUS_RULE;

use crate::parse::{Program, Rule, RuleKind};
use crate::term::{chain_operands, keeps_canonical, ArithError, BinOp, Binding, Term};
use matching::{Premise, ShapeKey};

pub type FactId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub max_rounds: usize,
    pub max_facts: usize,
    pub max_term_depth: usize,
    pub max_multiplicity: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_rounds: 100, max_facts: 10_000, max_term_depth: 12, max_multiplicity: 64 }
    }
}

impl Limits {
    /// Sets one limit from a `key=value` style pair. Keys may omit the
    /// `max_` prefix.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let n: u64 =
            value.trim().parse().map_err(|_| format!("limit `{key}` needs a positive integer, got `{value}`"))?;
        if n == 0 {
            return Err(format!("limit `{key}` must be positive"));
        }
        let key = key.trim();
        match key.strip_prefix("max_").unwrap_or(key) {
            "rounds" => self.max_rounds = n as usize,
            "facts" => self.max_facts = n as usize,
            "term_depth" | "depth" => self.max_term_depth = n as usize,
            "multiplicity" => self.max_multiplicity = n,
            _ => return Err(format!("unknown limit `{key}`")),
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Rounds,
    Facts,
    Depth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Fixpoint,
    BoundHit(Bound),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Fixpoint => f.write_str("Fixpoint"),
            Status::BoundHit(Bound::Rounds) => f.write_str("BoundHit(rounds)"),
            Status::BoundHit(Bound::Facts) => f.write_str("BoundHit(facts)"),
            Status::BoundHit(Bound::Depth) => f.write_str("BoundHit(depth)"),
        }
    }
}

/// One way a fact was derived.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Justification {
    pub rule_id: String,
    pub binding: Binding,
    pub premise_terms: Vec<Term>,
    /// Where a rewrite rule's conclusion was spliced into its host.
    pub rewrite_position: Option<Vec<usize>>,
    /// The round that produced it; every premise is older.
    pub round: usize,
    pub(crate) premise_ids: Vec<FactId>,
}

impl Justification {
    pub fn premise_ids(&self) -> &[FactId] {
        &self.premise_ids
    }

    // The binding is left out of the hash; it is a function of the
    // premises in all but associative matches.
    fn key_hash(&self) -> u64 {
        let mut h = FxHasher::default();
        self.rule_id.hash(&mut h);
        self.premise_ids.hash(&mut h);
        self.rewrite_position.hash(&mut h);
        h.finish()
    }

    /// Two firings are the same derivation.
    fn same_firing(&self, other: &Justification) -> bool {
        self.rule_id == other.rule_id
            && self.premise_ids == other.premise_ids
            && self.rewrite_position == other.rewrite_position
            && self.binding == other.binding
    }
}

/// Where an emitted conclusion lands: an existing fact or the n-th new term
/// of the round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Target {
    Known(FactId),
    Fresh(usize),
}

#[derive(Clone, Debug)]
pub struct Fact {
    pub id: FactId,
    pub term: Term,
    /// In discovery order; the first is the earliest.
    pub justifications: Vec<Justification>,
    pub first_round: usize,
    pub initial: bool,
    text: String,
    /// Indices into `justifications`, hashed by `key_hash`.
    keys: HashTable<usize>,
}

impl Fact {
    fn has(&self, j: &Justification, hash: u64) -> bool {
        self.keys.find(hash, |&i| self.justifications[i].same_firing(j)).is_some()
    }

    fn add(&mut self, j: Justification) {
        let justs = &self.justifications;
        self.keys.insert_unique(j.key_hash(), justs.len(), |&i| justs[i].key_hash());
        self.justifications.push(j);
    }

    /// Canonical rendering of the term.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn earliest(&self) -> Option<&Justification> {
        self.justifications.first()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticKind {
    SkippedGuard,
    DivisionByZero,
    NonNumericConclusion,
    DepthLimit,
    MultiplicityCap,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticKind::SkippedGuard => "skipped-guard",
            DiagnosticKind::DivisionByZero => "division-by-zero",
            DiagnosticKind::NonNumericConclusion => "non-numeric-conclusion",
            DiagnosticKind::DepthLimit => "depth-limit",
            DiagnosticKind::MultiplicityCap => "multiplicity-cap",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub round: usize,
    pub rule_id: String,
    pub kind: DiagnosticKind,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ROUND {} RULE {} EVENT {} DETAIL {}", self.round, self.rule_id, self.kind, self.detail)
    }
}

/// Monotone fact store. Facts are never removed.
#[derive(Clone, Debug, Default)]
pub struct WorkingMemory {
    facts: Vec<Fact>,
    /// Fact ids hashed by `term_hash` of their terms.
    by_term: HashTable<FactId>,
    by_shape: FxHashMap<ShapeKey, Vec<FactId>>,
    order: Vec<FactId>,
    isa: IsaIndex,
    round: usize,
}

impl WorkingMemory {
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Last committed round.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn isa(&self) -> &IsaIndex {
        &self.isa
    }

    /// Facts in canonical term order.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.order.iter().map(|&id| &self.facts[id])
    }

    pub fn terms(&self) -> Vec<Term> {
        self.facts().map(|f| f.term.clone()).collect()
    }

    pub fn get(&self, t: &Term) -> Option<&Fact> {
        self.find(t, term_hash(t)).map(|id| &self.facts[id])
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.get(t).is_some()
    }

    fn find(&self, t: &Term, hash: u64) -> Option<FactId> {
        self.by_term.find(hash, |&id| self.facts[id].term == *t).copied()
    }

    pub fn fact(&self, id: FactId) -> &Fact {
        &self.facts[id]
    }

    /// Justifications across all facts.
    pub fn justification_count(&self) -> usize {
        self.facts.iter().map(|f| f.justifications.len()).sum()
    }

    fn insert(&mut self, term: Term, text: String, round: usize, initial: bool) -> FactId {
        let id = self.facts.len();
        let facts = &self.facts;
        self.by_term.insert_unique(term_hash(&term), id, |&i| term_hash(&facts[i].term));
        self.by_shape.entry(ShapeKey::of(&term)).or_default().push(id);
        self.facts.push(Fact {
            id,
            term,
            justifications: Vec::new(),
            first_round: round,
            initial,
            text,
            keys: HashTable::new(),
        });
        id
    }

    fn reorder(&mut self) {
        let facts = &self.facts;
        self.order = (0..facts.len()).collect();
        self.order.sort_by(|&a, &b| facts[a].text.cmp(&facts[b].text));
    }

    fn rebuild_isa(&mut self) {
        self.isa = IsaIndex::from_facts(self.facts.iter().map(|f| &f.term));
    }

    fn in_window(&self, id: FactId, w: Window) -> bool {
        let r = self.facts[id].first_round;
        w.lo <= r && r <= w.hi
    }

    fn all_in(&self, w: Window) -> Vec<FactId> {
        (0..self.facts.len()).filter(|&id| self.in_window(id, w)).collect()
    }

    fn candidates(&self, pattern: &Term, w: Window) -> Vec<FactId> {
        let mut ids: Vec<FactId> = match ShapeKey::for_pattern(pattern, &self.isa) {
            None => (0..self.facts.len()).collect(),
            Some(keys) => {
                let mut ids: Vec<FactId> =
                    keys.iter().filter_map(|k| self.by_shape.get(k)).flatten().copied().collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            }
        };
        ids.retain(|&id| self.in_window(id, w));
        ids
    }
}

#[derive(Clone, Debug)]
pub struct SaturationResult {
    pub memory: WorkingMemory,
    pub status: Status,
    pub rounds_used: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl SaturationResult {
    pub fn facts(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.memory.facts()
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.memory.contains(t)
    }

    /// One canonical fact per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for f in self.facts() {
            out.push_str(f.text());
            out.push('\n');
        }
        out
    }
}

/// Inclusive range of `first_round` values a premise may draw from.
#[derive(Clone, Copy, Debug)]
struct Window {
    lo: usize,
    hi: usize,
}

impl Window {
    const ALL: Window = Window { lo: 0, hi: usize::MAX };

    fn is_empty(self) -> bool {
        self.lo > self.hi
    }
}

/// Exact evaluation of a comparison guard under `b`.
pub fn eval_guard(guard: &Term, b: &Binding) -> Result<bool, ArithError> {
    let Term::Bin(op, l, r) = guard else {
        return Err(ArithError::NotNumeric(guard.substitute(b)));
    };
    if !op.is_comparison() {
        return Err(ArithError::NotNumeric(guard.substitute(b)));
    }
    let x = crate::term::eval_numeric(&l.substitute(b))?;
    let y = crate::term::eval_numeric(&r.substitute(b))?;
    Ok(match op {
        BinOp::Eq => x == y,
        BinOp::Lt => x < y,
        BinOp::Gt => x > y,
        BinOp::Le => x <= y,
        BinOp::Ge => x >= y,
        _ => unreachable!(),
    })
}

struct CompiledRule<'p> {
    rule: &'p Rule,
    premises: Vec<Premise>,
    /// Assoc premises pair two facts, so delta restriction does not apply.
    always_full: bool,
    lifting: Lifting,
}

/// How a rule's matches depend on the is-a closure.
enum Lifting {
    /// Patterns have no constants and no shared variables.
    Never,
    /// Only through these constant atoms.
    Through(FxHashSet<Term>),
    /// A variable shared between premises is matched as a ground pattern.
    Always,
}

impl Lifting {
    fn of(premises: &[Term]) -> Lifting {
        let mut seen = BTreeSet::new();
        for p in premises {
            let vars = p.vars();
            if vars.iter().any(|v| seen.contains(v)) {
                return Lifting::Always;
            }
            seen.extend(vars);
        }
        let atoms: FxHashSet<Term> =
            premises.iter().flat_map(Term::subterms).filter(|t| matches!(t, Term::Atom(_)) && !t.is_var()).collect();
        if atoms.is_empty() {
            Lifting::Never
        } else {
            Lifting::Through(atoms)
        }
    }

    /// Whether growth of the closure below `grown` can add matches.
    fn affected(&self, grown: &FxHashSet<Term>) -> bool {
        match self {
            _ if grown.is_empty() => false,
            Lifting::Never => false,
            Lifting::Through(atoms) => atoms.iter().any(|a| grown.contains(a)),
            Lifting::Always => true,
        }
    }
}

/// Numerals count toward term size: wider ones are cut like deep terms.
const MAX_NUMERAL_BITS: u64 = 256;

/// Per-round output buffer.
struct Round<'a> {
    no: usize,
    limits: &'a Limits,
    emitted: Vec<(Term, Justification)>,
    /// Parallel to `emitted`.
    targets: Vec<Target>,
    /// Index into `emitted` of the first firing for each fresh term.
    fresh: Vec<usize>,
    /// Positions in `fresh`, hashed by `term_hash`.
    fresh_index: HashTable<usize>,
    /// Indices into `emitted`, hashed by `slot_hash`.
    new_keys: HashTable<usize>,
    budget: usize,
    /// Justifications that may still be recorded before the run stops.
    just_budget: usize,
    exhausted: bool,
    depth_hit: bool,
    /// (rule, kind) pairs already reported this round.
    noted: Vec<(String, DiagnosticKind)>,
    diagnostics: Vec<Diagnostic>,
}

impl Round<'_> {
    fn diag(&mut self, rule_id: &str, kind: DiagnosticKind, detail: String) {
        self.diagnostics.push(Diagnostic { round: self.no, rule_id: rule_id.to_string(), kind, detail });
    }

    /// Per-firing events: only the first per rule, kind and round is kept.
    fn note(&mut self, rule_id: &str, kind: DiagnosticKind, detail: impl FnOnce() -> String) {
        if !self.noted.iter().any(|(r, k)| r == rule_id && *k == kind) {
            self.noted.push((rule_id.to_string(), kind.clone()));
            self.diag(rule_id, kind, detail());
        }
    }

    fn oversize(&mut self, rule_id: &str, detail: impl FnOnce() -> String) {
        self.depth_hit = true;
        self.note(rule_id, DiagnosticKind::DepthLimit, detail);
    }

    /// Records a firing unless it repeats one; fills in the premise terms.
    fn emit(&mut self, wm: &WorkingMemory, term: Term, j: Justification) {
        if self.exhausted {
            return;
        }
        let (depth, bits) = term.depth_and_numeral_bits();
        let max = self.limits.max_term_depth;
        if depth > max {
            self.oversize(&j.rule_id, || format!("depth {depth} exceeds {max}: {term}"));
            return;
        }
        if bits > MAX_NUMERAL_BITS {
            self.oversize(&j.rule_id, || format!("numeral of {bits} bits exceeds {MAX_NUMERAL_BITS}"));
            return;
        }
        let key = j.key_hash();
        let th = term_hash(&term);
        let target = match wm.find(&term, th) {
            Some(id) if wm.facts[id].has(&j, key) => return,
            Some(id) => Target::Known(id),
            None => {
                let (emitted, fresh) = (&self.emitted, &self.fresh);
                match self.fresh_index.find(th, |&n| emitted[fresh[n]].0 == term) {
                    Some(&n) => Target::Fresh(n),
                    None => Target::Fresh(fresh.len()),
                }
            }
        };
        let slot = slot_hash(target, key);
        let (emitted, targets) = (&self.emitted, &self.targets);
        if self.new_keys.find(slot, |&i| targets[i] == target && emitted[i].1.same_firing(&j)).is_some() {
            return;
        }
        if self.just_budget == 0 {
            self.exhausted = true;
            return;
        }
        if target == Target::Fresh(self.fresh.len()) {
            if self.fresh.len() >= self.budget {
                self.exhausted = true;
                return;
            }
            let (emitted, fresh) = (&self.emitted, &self.fresh);
            self.fresh_index.insert_unique(th, fresh.len(), |&n| term_hash(&emitted[fresh[n]].0));
            self.fresh.push(self.emitted.len());
        }
        self.just_budget -= 1;
        let (emitted, targets) = (&self.emitted, &self.targets);
        self.new_keys.insert_unique(slot, emitted.len(), |&i| slot_hash(targets[i], emitted[i].1.key_hash()));
        let mut j = j;
        j.premise_terms = j.premise_ids.iter().map(|&id| wm.facts[id].term.clone()).collect();
        self.emitted.push((term, j));
        self.targets.push(target);
    }
}

fn term_hash(t: &Term) -> u64 {
    let mut h = FxHasher::default();
    t.hash(&mut h);
    h.finish()
}

fn slot_hash(target: Target, key: u64) -> u64 {
    let mut h = FxHasher::default();
    target.hash(&mut h);
    key.hash(&mut h);
    h.finish()
}

/// Runs `p` over its initial facts plus `extra` until nothing changes or a
/// limit trips.
pub fn saturate(p: &Program, extra: &[Term], lim: &Limits) -> SaturationResult {
    let counting = p.counting_enabled();
    let mut standard = Vec::new();
    let mut rewrite = Vec::new();
    for rule in &p.rules {
        match rule.kind {
            RuleKind::Rewrite => rewrite.push((rule, Lifting::of(&rule.premises))),
            RuleKind::Standard if counting && rule.is_counting_law() => {}
            RuleKind::Standard => {
                let premises: Vec<Premise> = rule.premises.iter().map(Premise::classify).collect();
                let always_full = premises.iter().any(|p| matches!(p, Premise::Assoc { .. }));
                standard.push(CompiledRule { rule, premises, always_full, lifting: Lifting::of(&rule.premises) });
            }
        }
    }

    let mut wm = WorkingMemory::default();
    for t in round_zero(p, extra) {
        if !wm.contains(&t) {
            let text = t.render();
            wm.insert(t, text, 0, true);
        }
    }
    wm.reorder();
    wm.rebuild_isa();

    let mut diagnostics = Vec::new();
    let mut seen_diags: HashSet<(String, DiagnosticKind, String)> = HashSet::new();
    let mut depth_hit = false;
    let mut grown = FxHashSet::default();
    let mut status = Status::BoundHit(Bound::Rounds);
    let mut rounds_used = lim.max_rounds;

    for r in 1..=lim.max_rounds {
        let mut round = Round {
            no: r,
            limits: lim,
            emitted: Vec::new(),
            targets: Vec::new(),
            fresh: Vec::new(),
            fresh_index: HashTable::new(),
            new_keys: HashTable::new(),
            budget: lim.max_facts.saturating_sub(wm.len()),
            just_budget: justification_budget(lim).saturating_sub(wm.justification_count()),
            exhausted: false,
            depth_hit: false,
            noted: Vec::new(),
            diagnostics: Vec::new(),
        };
        for cr in &standard {
            fire(cr, &wm, r == 1 || cr.always_full || cr.lifting.affected(&grown), &mut round);
        }
        for (rule, lifting) in &rewrite {
            rewrite_rule(rule, &wm, r == 1 || lifting.affected(&grown), &mut round);
        }
        if counting {
            count::count_aggregate(&wm, &mut round);
        }
        sus::sus_subsume(&wm, &mut round);

        depth_hit |= round.depth_hit;
        for d in round.diagnostics.drain(..) {
            if seen_diags.insert((d.rule_id.clone(), d.kind.clone(), d.detail.clone())) {
                diagnostics.push(d);
            }
        }
        let exhausted = round.exhausted;
        let changed;
        (changed, grown) = commit(&mut wm, r, round);
        if exhausted {
            status = Status::BoundHit(Bound::Facts);
            rounds_used = r;
            break;
        }
        if !changed {
            status = Status::Fixpoint;
            rounds_used = r;
            break;
        }
    }
    if status == Status::Fixpoint && depth_hit {
        status = Status::BoundHit(Bound::Depth);
    }
    SaturationResult { memory: wm, status, rounds_used, diagnostics }
}

/// Bound on recorded justifications: enough for every fact to reach the
/// multiplicity cap through distinct derivations.
fn justification_budget(lim: &Limits) -> usize {
    lim.max_facts.saturating_mul(usize::try_from(lim.max_multiplicity).unwrap_or(usize::MAX))
}

/// Initial facts, `>>` chain expansion and ground rules read as
/// implication facts.
fn round_zero(p: &Program, extra: &[Term]) -> Vec<Term> {
    let mut out = Vec::new();
    for t in p.initial_facts.iter().cloned().chain(extra.iter().map(Term::canonicalize)) {
        let seq = matches!(t, Term::Bin(BinOp::Seq, ..));
        out.push(t.clone());
        if seq {
            let ops: Vec<Term> = chain_operands(BinOp::Seq, &t).into_iter().cloned().collect();
            out.extend(ops.iter().cloned());
            for w in ops.windows(2) {
                out.push(Term::call("Precedes", vec![w[0].clone(), w[1].clone()]));
            }
        }
    }
    out.extend(p.rules.iter().filter_map(Rule::as_implication));
    out
}

/// Applies a round's conclusions. Also returns the terms whose set of is-a
/// descendants grew.
fn commit(wm: &mut WorkingMemory, r: usize, round: Round) -> (bool, FxHashSet<Term>) {
    // emit already dropped repeated keys within the round
    let changed = !round.emitted.is_empty();
    let mut fresh: Vec<(String, Term, Vec<Justification>)> = Vec::with_capacity(round.fresh.len());
    for ((term, j), target) in round.emitted.into_iter().zip(round.targets) {
        match target {
            Target::Known(id) => wm.facts[id].add(j),
            Target::Fresh(n) if n == fresh.len() => fresh.push((term.render(), term, vec![j])),
            Target::Fresh(n) => fresh[n].2.push(j),
        }
    }
    fresh.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut isa_changed = false;
    for (text, term, justs) in fresh {
        isa_changed |= matches!(&term, Term::Bin(BinOp::IsA, sub, sup) if !wm.isa.is_a(sub, sup));
        let id = wm.insert(term, text, r, false);
        for j in justs {
            wm.facts[id].add(j);
        }
    }
    wm.round = r;
    wm.reorder();
    let mut grown = FxHashSet::default();
    if isa_changed {
        let old = std::mem::take(&mut wm.isa);
        wm.rebuild_isa();
        grown = wm.isa.grown_since(&old);
    }
    (changed, grown)
}

/// Matches of one premise under `b`: extended bindings with the facts used.
fn premise_matches(p: &Premise, wm: &WorkingMemory, w: Window, b: &Binding) -> Vec<(Binding, Vec<FactId>)> {
    let mut out = Vec::new();
    match p {
        Premise::Whole(pat) => {
            let pat = pat.substitute(b);
            for id in wm.candidates(&pat, w) {
                let mut nb = b.clone();
                if match_into(&pat, &wm.facts[id].term, &wm.isa, &mut nb) {
                    out.push((nb, vec![id]));
                }
            }
        }
        Premise::Subterm(pat) => {
            let pat = pat.substitute(b);
            let mut seen = HashSet::new();
            for id in wm.all_in(w) {
                for (_, sub) in wm.facts[id].term.positions() {
                    let mut nb = b.clone();
                    if match_into(&pat, sub, &wm.isa, &mut nb) && seen.insert((nb.clone(), id)) {
                        out.push((nb, vec![id]));
                    }
                }
            }
        }
        Premise::Assoc { whole, app, link } => {
            let mut seen = HashSet::new();
            let whole = whole.substitute(b);
            for id in wm.candidates(&whole, w) {
                let mut nb = b.clone();
                if match_into(&whole, &wm.facts[id].term, &wm.isa, &mut nb) && seen.insert((nb.clone(), vec![id])) {
                    out.push((nb, vec![id]));
                }
            }
            let app = app.substitute(b);
            for id in wm.all_in(w) {
                for (_, sub) in wm.facts[id].term.positions() {
                    let mut nb = b.clone();
                    if !match_into(&app, sub, &wm.isa, &mut nb) {
                        continue;
                    }
                    let l = link.substitute(&nb);
                    let Term::Bin(op, x, y) = &l else { continue };
                    let flipped = Term::bin(*op, y.as_ref().clone(), x.as_ref().clone());
                    let partner = wm.get(&l).or_else(|| wm.get(&flipped)).map(|f| &f.id);
                    if let Some(&lid) = partner {
                        if seen.insert((nb.clone(), vec![id, lid])) {
                            out.push((nb, vec![id, lid]));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Feeds every consistent combination to `visit` until it returns false.
fn join(
    premises: &[Premise],
    windows: &[Window],
    wm: &WorkingMemory,
    b: Binding,
    ids: &mut Vec<FactId>,
    visit: &mut dyn FnMut(Binding, &[FactId]) -> bool,
) -> bool {
    let Some(first) = premises.first() else {
        return visit(b, ids);
    };
    for (nb, used) in premise_matches(first, wm, windows[0], &b) {
        let mark = ids.len();
        ids.extend(used);
        let go_on = join(&premises[1..], &windows[1..], wm, nb, ids, visit);
        ids.truncate(mark);
        if !go_on {
            return false;
        }
    }
    true
}

fn fire(cr: &CompiledRule, wm: &WorkingMemory, full: bool, round: &mut Round) {
    let n = cr.premises.len();
    let prev = round.no - 1;
    let mut visit = |b: Binding, ids: &[FactId]| {
        apply(cr.rule, wm, b, ids, round);
        !round.exhausted
    };
    if full {
        join(&cr.premises, &vec![Window::ALL; n], wm, Binding::new(), &mut Vec::new(), &mut visit);
    } else {
        // Semi-naive: premise d draws from the previous round's facts,
        // earlier premises from older facts, later premises from anything.
        let old = Window { lo: 0, hi: prev - 1 };
        let delta = Window { lo: prev, hi: prev };
        for d in 0..n {
            let windows: Vec<Window> = (0..n)
                .map(|i| match i.cmp(&d) {
                    std::cmp::Ordering::Less => old,
                    std::cmp::Ordering::Equal => delta,
                    std::cmp::Ordering::Greater => Window::ALL,
                })
                .collect();
            if windows.iter().any(|w| w.is_empty()) {
                continue;
            }
            if !join(&cr.premises, &windows, wm, Binding::new(), &mut Vec::new(), &mut visit) {
                return;
            }
        }
    }
}

/// Checks guards, instantiates the conclusion and emits one firing.
fn apply(rule: &Rule, wm: &WorkingMemory, b: Binding, ids: &[FactId], round: &mut Round) {
    for g in &rule.guards {
        match eval_guard(g, &b) {
            Ok(true) => {}
            Ok(false) => return,
            Err(ArithError::NotNumeric(t)) => {
                round.note(&rule.id, DiagnosticKind::SkippedGuard, || format!("{t} not numeric"));
                return;
            }
            Err(ArithError::DivisionByZero(t)) => {
                round.note(&rule.id, DiagnosticKind::DivisionByZero, || t.render());
                return;
            }
        }
    }
    let term = match rule.conclusion.instantiate(&b) {
        Ok(t) if keeps_canonical(&rule.conclusion) => t,
        Ok(t) => t.canonicalize(),
        Err(e) => {
            let kind = match e {
                ArithError::DivisionByZero(_) => DiagnosticKind::DivisionByZero,
                ArithError::NotNumeric(_) => DiagnosticKind::NonNumericConclusion,
            };
            round.note(&rule.id, kind, || e.to_string());
            return;
        }
    };
    let j = Justification {
        rule_id: rule.id.clone(),
        binding: b,
        premise_terms: Vec::new(),
        rewrite_position: None,
        round: round.no,
        premise_ids: ids.to_vec(),
    };
    round.emit(wm, term, j);
}

fn rewrite_rule(rule: &Rule, wm: &WorkingMemory, full: bool, round: &mut Round) {
    let window = if full { Window::ALL } else { Window { lo: round.no - 1, hi: round.no - 1 } };
    let pattern = &rule.premises[0];
    for &id in &wm.order {
        if round.exhausted {
            return;
        }
        if !wm.in_window(id, window) {
            continue;
        }
        let host = &wm.facts[id].term;
        for (path, sub) in host.positions() {
            let mut b = Binding::new();
            if !match_into(pattern, sub, &wm.isa, &mut b) {
                continue;
            }
            let replacement = match rule.conclusion.instantiate(&b) {
                Ok(t) => t,
                Err(e) => {
                    round.note(&rule.id, DiagnosticKind::NonNumericConclusion, || e.to_string());
                    continue;
                }
            };
            let Some(term) = host.replace_at(&path, replacement) else { continue };
            let term = term.canonicalize();
            if &term == host {
                continue;
            }
            let j = Justification {
                rule_id: rule.id.clone(),
                binding: b,
                premise_terms: Vec::new(),
                rewrite_position: Some(path),
                round: round.no,
                premise_ids: vec![id],
            };
            round.emit(wm, term, j);
        }
    }
}
