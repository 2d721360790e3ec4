use std::collections::VecDeque;

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};

use crate::term::{BinOp, Binding, Symbol, Term};

/// Reflexive-transitive closure over `x Is-A y` facts.
#[derive(Clone, Debug, Default)]
pub struct IsaIndex {
    /// Direct edges in fact insertion order.
    edges: HashMap<Term, Vec<Term>>,
    up: HashMap<Term, HashSet<Term>>,
    down: HashMap<Term, Vec<Term>>,
}

impl IsaIndex {
    pub fn from_facts<'a>(facts: impl IntoIterator<Item = &'a Term>) -> Self {
        let mut idx = IsaIndex::default();
        let mut nodes: Vec<Term> = Vec::new();
        for f in facts {
            if let Term::Bin(BinOp::IsA, sub, sup) = f {
                let succ = idx.edges.entry(sub.as_ref().clone()).or_default();
                if !succ.contains(sup) {
                    succ.push(sup.as_ref().clone());
                }
                nodes.push(sub.as_ref().clone());
            }
        }
        for n in nodes {
            if idx.up.contains_key(&n) {
                continue;
            }
            let reach = idx.reachable(&n);
            for s in &reach {
                idx.down.entry(s.clone()).or_default().push(n.clone());
            }
            idx.up.insert(n, reach);
        }
        idx
    }

    fn reachable(&self, from: &Term) -> HashSet<Term> {
        let mut seen = HashSet::default();
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            for y in self.edges.get(x).into_iter().flatten() {
                if seen.insert(y.clone()) {
                    stack.push(y);
                }
            }
        }
        seen.remove(from);
        seen
    }

    pub fn is_a(&self, sub: &Term, sup: &Term) -> bool {
        sub == sup || self.up.get(sub).is_some_and(|s| s.contains(sup))
    }

    /// Terms strictly below `sup`, in a deterministic order.
    pub fn subs(&self, sup: &Term) -> &[Term] {
        self.down.get(sup).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Terms with more descendants here than in `old`, an earlier closure
    /// over a subset of the facts.
    pub fn grown_since(&self, old: &IsaIndex) -> HashSet<Term> {
        self.down.iter().filter(|(sup, subs)| old.subs(sup).len() < subs.len()).map(|(sup, _)| sup.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The `Is-A` facts along a shortest chain from `sub` to `sup`.
    pub fn path(&self, sub: &Term, sup: &Term) -> Option<Vec<Term>> {
        if sub == sup {
            return Some(Vec::new());
        }
        let mut prev: HashMap<&Term, &Term> = HashMap::default();
        let mut queue = VecDeque::from([sub]);
        while let Some(x) = queue.pop_front() {
            for y in self.edges.get(x).into_iter().flatten() {
                if y == sub || prev.contains_key(y) {
                    continue;
                }
                prev.insert(y, x);
                if y == sup {
                    let mut chain = Vec::new();
                    let mut cur = y;
                    while cur != sub {
                        let p = prev[cur];
                        chain.push(Term::bin(BinOp::IsA, p.clone(), cur.clone()));
                        cur = p;
                    }
                    chain.reverse();
                    return Some(chain);
                }
                queue.push_back(y);
            }
        }
        None
    }
}

/// Extends `b` so that `pattern` matches the ground term `fact`. Constant
/// atoms also match anything below them in the is-a closure. On failure
/// `b` may be partially extended; callers match on a copy.
pub fn match_into(pattern: &Term, fact: &Term, isa: &IsaIndex, b: &mut Binding) -> bool {
    match pattern {
        Term::Atom(_) => match pattern.as_var() {
            Some(v) => b.bind(v, fact.clone()),
            None => isa.is_a(fact, pattern),
        },
        Term::Num(_) => pattern == fact,
        Term::App(h, args) => match fact {
            Term::App(fh, fargs) if fargs.len() == args.len() => {
                match_into(h, fh, isa, b) && args.iter().zip(fargs.iter()).all(|(p, f)| match_into(p, f, isa, b))
            }
            _ => false,
        },
        Term::Ann(a, x) => match fact {
            Term::Ann(fa, fx) => match_into(a, fa, isa, b) && match_into(x, fx, isa, b),
            _ => false,
        },
        Term::Bin(op, l, r) => match fact {
            Term::Bin(fop, fl, fr) if fop == op => match_into(l, fl, isa, b) && match_into(r, fr, isa, b),
            _ => false,
        },
    }
}

/// All bindings under which `pattern` matches `fact`; at most one.
pub fn match_pattern(pattern: &Term, fact: &Term, isa: &IsaIndex) -> Vec<Binding> {
    let mut b = Binding::new();
    if match_into(pattern, fact, isa, &mut b) {
        vec![b]
    } else {
        Vec::new()
    }
}

/// How a premise finds its facts.
#[derive(Clone, Debug)]
pub(crate) enum Premise {
    /// Matches a whole fact.
    Whole(Term),
    /// `A ( B )` with a variable head: matches a subterm of any fact.
    Subterm(Term),
    /// `A ( B ) <> B`: `A ( B )` occurs inside some fact and `A <> B`
    /// (either way round) is itself a fact.
    Assoc { whole: Term, app: Term, link: Term },
}

impl Premise {
    pub(crate) fn classify(t: &Term) -> Premise {
        if let Term::Bin(BinOp::Assoc, l, r) = t {
            if let Term::App(h, args) = l.as_ref() {
                if args.len() == 1 && args[0] == **r {
                    let link = Term::bin(BinOp::Assoc, h.as_ref().clone(), r.as_ref().clone());
                    return Premise::Assoc { whole: t.clone(), app: l.as_ref().clone(), link };
                }
            }
        }
        match t {
            Term::App(h, _) if h.is_var() => Premise::Subterm(t.clone()),
            _ => Premise::Whole(t.clone()),
        }
    }
}

/// Coarse top-level shape of a term, for candidate lookup.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum ShapeKey {
    Atom(Symbol),
    Num,
    App(Option<Symbol>, usize),
    Ann,
    Bin(BinOp),
}

impl ShapeKey {
    pub(crate) fn of(t: &Term) -> ShapeKey {
        match t {
            Term::Atom(s) => ShapeKey::Atom(s.clone()),
            Term::Num(_) => ShapeKey::Num,
            Term::App(h, args) => match h.as_ref() {
                Term::Atom(s) => ShapeKey::App(Some(s.clone()), args.len()),
                _ => ShapeKey::App(None, args.len()),
            },
            Term::Ann(..) => ShapeKey::Ann,
            Term::Bin(op, ..) => ShapeKey::Bin(*op),
        }
    }

    /// Keys a fact matching `pattern` can have, or `None` when any fact can.
    pub(crate) fn for_pattern(pattern: &Term, isa: &IsaIndex) -> Option<Vec<ShapeKey>> {
        match pattern {
            Term::Atom(_) if pattern.is_var() => None,
            Term::Atom(_) => {
                let mut keys = vec![ShapeKey::of(pattern)];
                keys.extend(isa.subs(pattern).iter().map(ShapeKey::of));
                Some(keys)
            }
            Term::App(h, args) => {
                let n = args.len();
                match h.as_ref() {
                    Term::Atom(_) if h.is_var() => None,
                    Term::Atom(s) => {
                        let mut keys = vec![ShapeKey::App(Some(s.clone()), n)];
                        for sub in isa.subs(h) {
                            keys.push(match sub {
                                Term::Atom(a) => ShapeKey::App(Some(a.clone()), n),
                                _ => ShapeKey::App(None, n),
                            });
                        }
                        Some(keys)
                    }
                    _ => Some(vec![ShapeKey::App(None, n)]),
                }
            }
            _ => Some(vec![ShapeKey::of(pattern)]),
        }
    }
}
