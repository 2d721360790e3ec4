#![allow(dead_code)]

use std::path::PathBuf;

use sarv_core::{parse_facts, parse_sources, Program, Term};

pub fn corpus_dir() -> PathBuf {
    // resolves from either crate
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/examples")
}

pub fn read(rel: &str) -> String {
    let path = corpus_dir().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn program(files: &[&str]) -> Program {
    let sources: Vec<(String, String)> = files.iter().map(|f| (f.to_string(), read(f))).collect();
    parse_sources(&sources).unwrap_or_else(|e| panic!("{e}"))
}

pub fn facts(files: &[&str]) -> Vec<Term> {
    files.iter().flat_map(|f| parse_facts(f, &read(f)).unwrap_or_else(|e| panic!("{e}"))).collect()
}

pub const RESCUE: [&str; 5] = [
    "rescue/protocol.sarv",
    "rescue/compliance.sarv",
    "rescue/obligation.sarv",
    "rescue/counting.sarv",
    "rescue/deontic.sarv",
];

pub fn rescue() -> Program {
    program(&RESCUE)
}

/// (round, rule id, fact text) lines of a trace file.
pub fn trace(rel: &str) -> Vec<(usize, String, String)> {
    read(rel)
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.splitn(3, '\t');
            let round = parts.next().unwrap().parse().unwrap();
            (round, parts.next().unwrap().to_string(), parts.next().unwrap().to_string())
        })
        .collect()
}

pub mod gen {
    //! Seeded generators for random terms and programs.

    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sarv_core::{BinOp, Term};

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    const ATOMS: [&str; 8] = ["Alpha", "Beta", "Gamma", "Delta", "Foo", "Xa", "O", "P"];
    const HEADS: [&str; 5] = ["Fn", "Gx", "Has", "O", "P"];

    /// Operators allowed inside generated terms.
    pub const STRUCTURAL: [BinOp; 9] = [
        BinOp::Seq,
        BinOp::Assoc,
        BinOp::IsA,
        BinOp::IsIn,
        BinOp::IsInstanceOf,
        BinOp::Add,
        BinOp::Mul,
        BinOp::Sub,
        BinOp::Div,
    ];

    pub struct TermGen<'a> {
        pub vars: &'a [char],
        pub ops: &'a [BinOp],
        pub max_depth: usize,
    }

    impl TermGen<'_> {
        pub fn term(&self, rng: &mut impl Rng) -> Term {
            self.at(rng, self.max_depth)
        }

        fn leaf(&self, rng: &mut impl Rng) -> Term {
            match rng.random_range(0..10) {
                0..=2 if !self.vars.is_empty() => Term::atom(&self.vars.choose(rng).unwrap().to_string()),
                3 => Term::int(rng.random_range(-3..10)),
                _ => Term::atom(ATOMS.choose(rng).unwrap()),
            }
        }

        fn at(&self, rng: &mut impl Rng, depth: usize) -> Term {
            if depth <= 1 || rng.random_bool(0.35) {
                return self.leaf(rng);
            }
            match rng.random_range(0..3) {
                0 => {
                    let n = rng.random_range(1..=2);
                    Term::call(HEADS.choose(rng).unwrap(), (0..n).map(|_| self.at(rng, depth - 1)).collect())
                }
                1 => {
                    let ann = if rng.random_bool(0.5) { Term::int(rng.random_range(1..5)) } else { self.leaf(rng) };
                    Term::ann(ann, self.at(rng, depth - 1))
                }
                _ if !self.ops.is_empty() => {
                    let op = *self.ops.choose(rng).unwrap();
                    Term::bin(op, self.at(rng, depth - 1), self.at(rng, depth - 1))
                }
                _ => self.leaf(rng),
            }
        }
    }

    pub struct GenRule {
        pub group: &'static str,
        pub id: Option<String>,
        pub premises: Vec<Term>,
        pub guards: Vec<Term>,
        pub conclusion: Term,
    }

    pub struct GenProgram {
        pub facts: Vec<Term>,
        pub rules: Vec<GenRule>,
    }

    impl GenProgram {
        /// Source text: facts first, then rules under group headers.
        pub fn text(&self) -> String {
            let mut out = String::new();
            for f in &self.facts {
                out += &format!("{}\n", f.render_in_context(2));
            }
            for r in &self.rules {
                out += &format!("[{}]\n", r.group);
                if let Some(id) = &r.id {
                    out += &format!("@{id} ");
                }
                let lhs: Vec<String> = r.premises.iter().chain(&r.guards).map(|t| t.render_in_context(4)).collect();
                out += &format!("{} => {}\n", lhs.join(" AND "), r.conclusion.render());
            }
            out
        }
    }

    pub struct ProgramShape {
        pub max_rules: usize,
        pub max_facts: usize,
        pub ops: &'static [BinOp],
        pub max_depth: usize,
    }

    fn ground(rng: &mut impl Rng, shape: &ProgramShape) -> Term {
        loop {
            let t = TermGen { vars: &[], ops: shape.ops, max_depth: shape.max_depth }.term(rng);
            if !matches!(t, Term::Bin(op, ..) if op.is_comparison()) {
                return t;
            }
        }
    }

    /// `f` with one subterm replaced by a variable, so the pattern matches it.
    fn generalize(rng: &mut impl Rng, f: &Term) -> Term {
        let positions = f.positions();
        let (path, _) = positions.choose(rng).unwrap();
        let var = Term::atom(&['A', 'B', 'X'].choose(rng).unwrap().to_string());
        f.replace_at(path, var).unwrap()
    }

    pub fn program(rng: &mut impl Rng, shape: &ProgramShape) -> GenProgram {
        let facts: Vec<Term> = (0..rng.random_range(1..=shape.max_facts)).map(|_| ground(rng, shape)).collect();
        let mut rules = Vec::new();
        for i in 0..rng.random_range(1..=shape.max_rules) {
            let vars: Vec<char> = ['A', 'B', 'X'][..rng.random_range(0..=3)].to_vec();
            let tg = TermGen { vars: &vars, ops: shape.ops, max_depth: shape.max_depth };
            let premises: Vec<Term> = (0..rng.random_range(1..=2))
                .map(|_| match facts.choose(rng) {
                    Some(f) if rng.random_bool(0.6) => generalize(rng, f),
                    _ => tg.term(rng),
                })
                .collect();
            let bound: Vec<char> = premises.iter().flat_map(|p| p.vars()).collect();
            let mut guards = Vec::new();
            if let Some(&v) = bound.first() {
                if rng.random_bool(0.2) {
                    guards.push(Term::bin(BinOp::Gt, Term::atom(&v.to_string()), Term::int(rng.random_range(0..4))));
                }
            }
            let conclusion = TermGen { vars: &bound, ops: shape.ops, max_depth: shape.max_depth }.term(rng);
            let group = ["main", "alpha", "beta"][rng.random_range(0..3)];
            let id = rng.random_bool(0.2).then(|| format!("r{i}"));
            rules.push(GenRule { group, id, premises, guards, conclusion });
        }
        GenProgram { facts, rules }
    }

    const PROPS: [&str; 5] = ["Qa", "Qb", "Qc", "Qd", "Qe"];

    /// Propositional program with counting switched on.
    pub fn propositional(rng: &mut impl Rng, max_rules: usize, max_facts: usize) -> String {
        let mut out = String::new();
        for _ in 0..rng.random_range(1..=max_facts) {
            out += PROPS.choose(rng).unwrap();
            out.push('\n');
        }
        out += "[main]\n";
        for _ in 0..rng.random_range(1..=max_rules) {
            let lhs: Vec<&str> = (0..rng.random_range(1..=2)).map(|_| *PROPS.choose(rng).unwrap()).collect();
            out += &format!("{} => {}\n", lhs.join(" AND "), PROPS.choose(rng).unwrap());
        }
        out += "[counting]\n";
        out
    }
}

pub mod oracle {
    //! Brute-force derivation-tree counting over propositional programs.

    use sarv_core::{Program, Term};

    /// Trees of `x` in which no fact repeats along a root-to-leaf path,
    /// saturating at `cap`.
    pub fn trees(p: &Program, x: &Term, path: &mut Vec<Term>, cap: u128) -> u128 {
        if path.contains(x) {
            return 0;
        }
        path.push(x.clone());
        let mut total = u128::from(p.initial_facts.contains(x));
        for r in p.rules.iter().filter(|r| &r.conclusion == x) {
            let mut prod = 1u128;
            for q in &r.premises {
                prod = (prod * trees(p, q, path, cap)).min(cap);
                if prod == 0 {
                    break;
                }
            }
            total = (total + prod).min(cap);
        }
        path.pop();
        total
    }
}
