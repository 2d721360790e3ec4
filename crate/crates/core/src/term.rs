//! Symbolic terms.
//!
//! A [`Term`] is both the syntax and the value of the rule language: facts,
//! rule patterns, verdicts and counting annotations are all terms. Terms are
//! immutable; every constructor used by the parser and the engine returns
//! canonical terms, and two canonical terms are equal exactly when their
//! canonical renderings are byte-identical.
//!
//! Rendering follows the spaced listing style: `Head ( Arg , Arg )` for
//! applications, `( Ann ) Body` for annotations and infix binary operators
//! surrounded by single spaces.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Interned-by-sharing atom name.
pub type Symbol = Arc<str>;

/// Exact rational number.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Number(BigRational);

// Always in lowest terms, so the parts identify the value.
impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.numer().hash(state);
        self.0.denom().hash(state);
    }
}

impl Number {
    pub fn from_i64(v: i64) -> Self {
        Number(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Option<Self> {
        if denom == 0 {
            return None;
        }
        Some(Number(BigRational::new(BigInt::from(numer), BigInt::from(denom))))
    }

    /// Parses `-12`, `2.50` or `5/2`. Surrounding whitespace is not accepted.
    pub fn parse(text: &str) -> Option<Self> {
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        if body.is_empty() {
            return None;
        }
        let value = if let Some((n, d)) = body.split_once('/') {
            if !is_digits(n) || !is_digits(d) {
                return None;
            }
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                return None;
            }
            BigRational::new(n.parse().ok()?, d)
        } else if let Some((int, frac)) = body.split_once('.') {
            if !is_digits(int) || !is_digits(frac) {
                return None;
            }
            let scale = BigInt::from(10u8).pow(frac.len() as u32);
            let numer: BigInt = format!("{int}{frac}").parse().ok()?;
            BigRational::new(numer, scale)
        } else {
            if !is_digits(body) {
                return None;
            }
            BigRational::from_integer(body.parse().ok()?)
        };
        Some(Number(if neg { -value } else { value }))
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }

    /// Width of the wider of numerator and denominator.
    pub fn bits(&self) -> u64 {
        self.0.numer().bits().max(self.0.denom().bits())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn checked_div(&self, rhs: &Number) -> Option<Number> {
        if rhs.0.is_zero() {
            None
        } else {
            Some(Number(&self.0 / &rhs.0))
        }
    }
}

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Add for &Number {
    type Output = Number;
    fn add(self, rhs: &Number) -> Number {
        Number(&self.0 + &rhs.0)
    }
}

impl Sub for &Number {
    type Output = Number;
    fn sub(self, rhs: &Number) -> Number {
        Number(&self.0 - &rhs.0)
    }
}

impl Mul for &Number {
    type Output = Number;
    fn mul(self, rhs: &Number) -> Number {
        Number(&self.0 * &rhs.0)
    }
}

impl Div for &Number {
    type Output = Option<Number>;
    fn div(self, rhs: &Number) -> Option<Number> {
        self.checked_div(rhs)
    }
}

/// Binary operators of the term language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    And,
    Or,
    Implies,
    Seq,
    Assoc,
    IsA,
    IsIn,
    IsPartOf,
    IsInstanceOf,
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub const ALL: [BinOp; 18] = [
        BinOp::And,
        BinOp::Or,
        BinOp::Implies,
        BinOp::Seq,
        BinOp::Assoc,
        BinOp::IsA,
        BinOp::IsIn,
        BinOp::IsPartOf,
        BinOp::IsInstanceOf,
        BinOp::Eq,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Le,
        BinOp::Ge,
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
    ];

    /// Canonical surface spelling.
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::And => "AND",
            BinOp::Or => "OR",
            BinOp::Implies => "=>",
            BinOp::Seq => ">>",
            BinOp::Assoc => "<>",
            BinOp::IsA => "Is-A",
            BinOp::IsIn => "Is-In",
            BinOp::IsPartOf => "Is-Part-Of",
            BinOp::IsInstanceOf => "Is-Instance-Of",
            BinOp::Eq => "=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Seq => 4,
            BinOp::Assoc
            | BinOp::IsA
            | BinOp::IsIn
            | BinOp::IsPartOf
            | BinOp::IsInstanceOf
            | BinOp::Eq
            | BinOp::Lt
            | BinOp::Gt
            | BinOp::Le
            | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div => 7,
        }
    }

    pub fn is_right_assoc(self) -> bool {
        self == BinOp::Implies
    }

    /// Relations do not chain without parentheses.
    pub fn is_relation(self) -> bool {
        self.precedence() == 5
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }
}

/// A symbolic value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(Symbol),
    Num(Number),
    App(Arc<Term>, Arc<[Term]>),
    Ann(Arc<Term>, Arc<Term>),
    Bin(BinOp, Arc<Term>, Arc<Term>),
}

/// Variables are one uppercase ASCII letter. `O` and `P` are the
/// obligation and permission heads and never act as variables.
pub fn is_var_name(name: &str) -> bool {
    let b = name.as_bytes();
    b.len() == 1 && b[0].is_ascii_uppercase() && b[0] != b'O' && b[0] != b'P'
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(Arc::from(name))
    }

    pub fn int(v: i64) -> Term {
        Term::Num(Number::from_i64(v))
    }

    pub fn app(head: Term, args: Vec<Term>) -> Term {
        debug_assert!(!args.is_empty(), "application without arguments");
        Term::App(Arc::new(head), args.into())
    }

    /// Shorthand for an application with an atom head.
    pub fn call(head: &str, args: Vec<Term>) -> Term {
        Term::app(Term::atom(head), args)
    }

    pub fn ann(annotation: Term, body: Term) -> Term {
        Term::Ann(Arc::new(annotation), Arc::new(body))
    }

    pub fn bin(op: BinOp, left: Term, right: Term) -> Term {
        Term::Bin(op, Arc::new(left), Arc::new(right))
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<&Number> {
        match self {
            Term::Num(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<char> {
        match self {
            Term::Atom(s) if is_var_name(s) => s.chars().next(),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        self.as_var().is_some()
    }

    /// Direct children in position order.
    pub fn children(&self) -> Vec<&Term> {
        self.child_iter().collect()
    }

    fn child_iter(&self) -> impl Iterator<Item = &Term> + '_ {
        let (first, second, rest): (Option<&Term>, Option<&Term>, &[Term]) = match self {
            Term::Atom(_) | Term::Num(_) => (None, None, &[]),
            Term::App(h, args) => (Some(h), None, args),
            Term::Ann(a, b) | Term::Bin(_, a, b) => (Some(a), Some(b), &[]),
        };
        first.into_iter().chain(second).chain(rest)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Atom(_) => !self.is_var(),
            Term::Num(_) => true,
            _ => self.child_iter().all(Term::is_ground),
        }
    }

    pub fn vars(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<char>) {
        if let Some(v) = self.as_var() {
            out.insert(v);
        }
        for c in self.child_iter() {
            c.collect_vars(out);
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.child_iter().map(Term::depth).max().unwrap_or(0)
    }

    /// Widest numeral anywhere in the term, in bits.
    pub fn numeral_bits(&self) -> u64 {
        match self {
            Term::Num(n) => n.bits(),
            _ => self.child_iter().map(Term::numeral_bits).max().unwrap_or(0),
        }
    }

    /// `(depth, numeral_bits)` in one pass.
    pub fn depth_and_numeral_bits(&self) -> (usize, u64) {
        match self {
            Term::Num(n) => (1, n.bits()),
            _ => self.child_iter().fold((1, 0), |(d, b), c| {
                let (cd, cb) = c.depth_and_numeral_bits();
                (d.max(cd + 1), b.max(cb))
            }),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.child_iter().map(Term::node_count).sum::<usize>()
    }

    /// True for `(n)X` counting annotations.
    pub fn is_numeric_annotation(&self) -> bool {
        matches!(self, Term::Ann(a, _) if matches!(a.as_ref(), Term::Num(_)))
    }

    /// Numeric annotations, arithmetic and comparisons over numbers and variables.
    pub fn is_arithmetic_expr(&self) -> bool {
        match self {
            Term::Num(_) => true,
            Term::Atom(_) => self.is_var(),
            Term::Bin(op, l, r) => op.is_arithmetic() && l.is_arithmetic_expr() && r.is_arithmetic_expr(),
            _ => false,
        }
    }

    pub fn canonicalize(&self) -> Term {
        canonicalize(self)
    }

    pub fn substitute(&self, b: &Binding) -> Term {
        substitute(self, b)
    }

    /// Substitutes `b` and evaluates every arithmetic subexpression that
    /// mentions a variable, so `(I+1)A` under `{I ↦ 2}` becomes `(3)A`.
    /// Arithmetic written without variables stays symbolic.
    pub fn instantiate(&self, b: &Binding) -> Result<Term, ArithError> {
        match self {
            Term::Atom(_) | Term::Num(_) => Ok(substitute(self, b)),
            Term::Bin(op, _, _) if op.is_arithmetic() && !self.vars().is_empty() => {
                Ok(Term::Num(eval_numeric(&substitute(self, b))?))
            }
            Term::App(h, args) => Ok(Term::App(
                Arc::new(h.instantiate(b)?),
                args.iter().map(|a| a.instantiate(b)).collect::<Result<_, _>>()?,
            )),
            Term::Ann(a, body) => Ok(Term::ann(a.instantiate(b)?, body.instantiate(b)?)),
            Term::Bin(op, l, r) => Ok(Term::bin(*op, l.instantiate(b)?, r.instantiate(b)?)),
        }
    }

    /// Every (path, subterm) pair in preorder. Paths index children as in
    /// [`Term::children`]: for applications 0 is the head and `i` the i-th
    /// argument.
    pub fn positions(&self) -> Vec<(Vec<usize>, &Term)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.walk_positions(&mut path, &mut out);
        out
    }

    fn walk_positions<'a>(&'a self, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a Term)>) {
        out.push((path.clone(), self));
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i);
            c.walk_positions(path, out);
            path.pop();
        }
    }

    pub fn at_path(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i)?.at_path(rest),
        }
    }

    /// Returns a copy with the subterm at `path` replaced.
    pub fn replace_at(&self, path: &[usize], replacement: Term) -> Option<Term> {
        let Some((&i, rest)) = path.split_first() else {
            return Some(replacement);
        };
        let mut out = self.clone();
        let slot: &mut Term = match &mut out {
            Term::Atom(_) | Term::Num(_) => return None,
            Term::App(h, args) => {
                if i == 0 {
                    Arc::make_mut(h)
                } else {
                    Arc::make_mut(args).get_mut(i - 1)?
                }
            }
            Term::Ann(a, b) | Term::Bin(_, a, b) => match i {
                0 => Arc::make_mut(a),
                1 => Arc::make_mut(b),
                _ => return None,
            },
        };
        *slot = slot.replace_at(rest, replacement)?;
        Some(out)
    }

    pub fn subterms(&self) -> Vec<Term> {
        subterms(self)
    }

    /// Canonical text rendering.
    pub fn render(&self) -> String {
        let mut s = String::new();
        write_term(self, &mut s);
        s
    }

    /// Renders with parentheses when the top operator binds looser than `min_prec`.
    pub fn render_in_context(&self, min_prec: u8) -> String {
        match self {
            Term::Bin(op, _, _) if op.precedence() < min_prec => format!("( {} )", self.render()),
            _ => self.render(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered by canonical rendering.
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        compare(self, other)
    }
}

fn write_term(t: &Term, out: &mut String) {
    match t {
        Term::Atom(s) => out.push_str(s),
        Term::Num(n) => {
            let _ = write!(out, "{n}");
        }
        Term::App(h, args) => {
            if let Term::Atom(s) = h.as_ref() {
                out.push_str(s);
            } else {
                out.push_str("{ ");
                write_term(h, out);
                out.push_str(" }");
            }
            out.push_str(" ( ");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(" , ");
                }
                write_term(a, out);
            }
            out.push_str(" )");
        }
        Term::Ann(a, body) => {
            out.push_str("( ");
            write_term(a, out);
            out.push_str(" ) ");
            let wrap =
                matches!(body.as_ref(), Term::Bin(..)) || matches!(body.as_ref(), Term::Num(n) if n.is_negative());
            write_wrapped(body, wrap, out);
        }
        Term::Bin(op, l, r) => {
            let p = op.precedence();
            let left_wrap = match l.as_ref() {
                Term::Bin(lop, _, _) => {
                    let lp = lop.precedence();
                    lp < p || (lp == p && (op.is_right_assoc() || op.is_relation()))
                }
                _ => false,
            };
            let right_wrap = match r.as_ref() {
                Term::Bin(rop, _, _) => {
                    let rp = rop.precedence();
                    rp < p || (rp == p && !op.is_right_assoc())
                }
                _ => false,
            };
            write_wrapped(l, left_wrap, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_wrapped(r, right_wrap, out);
        }
    }
}

fn write_wrapped(t: &Term, wrap: bool, out: &mut String) {
    if wrap {
        out.push_str("( ");
        write_term(t, out);
        out.push_str(" )");
    } else {
        write_term(t, out);
    }
}

/// Substitution of single-letter variables by ground terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Binding(BTreeMap<char, Term>);

impl Binding {
    pub fn new() -> Self {
        Binding(BTreeMap::new())
    }

    pub fn get(&self, var: char) -> Option<&Term> {
        self.0.get(&var)
    }

    /// Binds `var`; returns false when it is already bound to something else.
    pub fn bind(&mut self, var: char, value: Term) -> bool {
        match self.0.get(&var) {
            Some(existing) => *existing == value,
            None => {
                self.0.insert(var, value);
                true
            }
        }
    }

    pub fn insert(&mut self, var: char, value: Term) {
        self.0.insert(var, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, &Term)> {
        self.0.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every variable of `t` is bound.
    pub fn covers(&self, t: &Term) -> bool {
        t.vars().iter().all(|v| self.0.contains_key(v))
    }
}

impl FromIterator<(char, Term)> for Binding {
    fn from_iter<I: IntoIterator<Item = (char, Term)>>(iter: I) -> Self {
        Binding(iter.into_iter().collect())
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} = {v}")?;
        }
        f.write_str("}")
    }
}

/// Flattens `And`/`Or` chains into left-associated form. Numbers are
/// always kept in lowest terms by construction.
pub fn canonicalize(t: &Term) -> Term {
    if is_canonical(t) {
        return t.clone();
    }
    match t {
        Term::Atom(_) | Term::Num(_) => t.clone(),
        Term::App(h, args) => Term::App(Arc::new(canonicalize(h)), args.iter().map(canonicalize).collect()),
        Term::Ann(a, b) => Term::ann(canonicalize(a), canonicalize(b)),
        Term::Bin(op @ (BinOp::And | BinOp::Or), _, _) => {
            let mut operands = Vec::new();
            flatten(*op, t, &mut operands);
            let mut it = operands.into_iter().map(canonicalize);
            let first = it.next().expect("binary node has operands");
            it.fold(first, |acc, x| Term::bin(*op, acc, x))
        }
        Term::Bin(op, l, r) => Term::bin(*op, canonicalize(l), canonicalize(r)),
    }
}

/// Substituting canonical terms into `t` yields a canonical term.
pub fn keeps_canonical(t: &Term) -> bool {
    match t {
        Term::Bin(op @ (BinOp::And | BinOp::Or), l, r) => {
            !r.is_var()
                && !matches!(r.as_ref(), Term::Bin(o, ..) if o == op)
                && keeps_canonical(l)
                && keeps_canonical(r)
        }
        _ => t.child_iter().all(keeps_canonical),
    }
}

/// No `And`/`Or` node has a right operand with the same operator.
fn is_canonical(t: &Term) -> bool {
    match t {
        Term::Bin(op @ (BinOp::And | BinOp::Or), l, r) => {
            !matches!(r.as_ref(), Term::Bin(o, ..) if o == op) && is_canonical(l) && is_canonical(r)
        }
        _ => t.child_iter().all(is_canonical),
    }
}

fn flatten<'a>(op: BinOp, t: &'a Term, out: &mut Vec<&'a Term>) {
    match t {
        Term::Bin(o, l, r) if *o == op => {
            flatten(op, l, out);
            flatten(op, r, out);
        }
        _ => out.push(t),
    }
}

/// Operands of a chain of `op`, in order.
pub fn chain_operands(op: BinOp, t: &Term) -> Vec<&Term> {
    let mut out = Vec::new();
    flatten(op, t, &mut out);
    out
}

/// Replaces bound variables; unbound variables are left in place.
pub fn substitute(t: &Term, b: &Binding) -> Term {
    match t {
        Term::Atom(_) => match t.as_var().and_then(|v| b.get(v)) {
            Some(value) => value.clone(),
            None => t.clone(),
        },
        Term::Num(_) => t.clone(),
        Term::App(h, args) => Term::App(Arc::new(substitute(h, b)), args.iter().map(|a| substitute(a, b)).collect()),
        Term::Ann(a, body) => Term::ann(substitute(a, b), substitute(body, b)),
        Term::Bin(op, l, r) => Term::bin(*op, substitute(l, b), substitute(r, b)),
    }
}

/// Like [`substitute`], but also reports whether the result is ground.
pub fn substitute_flagged(t: &Term, b: &Binding) -> (Term, bool) {
    let out = substitute(t, b);
    let complete = out.is_ground();
    (out, complete)
}

/// `t` and all its proper subterms, deduplicated, in canonical order.
pub fn subterms(t: &Term) -> Vec<Term> {
    let mut seen: BTreeMap<String, Term> = BTreeMap::new();
    let mut stack = vec![t];
    while let Some(x) = stack.pop() {
        seen.entry(x.render()).or_insert_with(|| x.clone());
        stack.extend(x.children());
    }
    seen.into_values().collect()
}

/// Total order consistent with byte order of canonical renderings.
pub fn compare(a: &Term, b: &Term) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    a.render().cmp(&b.render())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("not numeric: {0}")]
    NotNumeric(Term),
    #[error("division by zero in {0}")]
    DivisionByZero(Term),
}

/// Evaluates a ground arithmetic expression exactly.
pub fn eval_numeric(t: &Term) -> Result<Number, ArithError> {
    match t {
        Term::Num(n) => Ok(n.clone()),
        Term::Bin(op, l, r) if op.is_arithmetic() => {
            let (a, b) = (eval_numeric(l)?, eval_numeric(r)?);
            match op {
                BinOp::Add => Ok(&a + &b),
                BinOp::Sub => Ok(&a - &b),
                BinOp::Mul => Ok(&a * &b),
                BinOp::Div => (&a / &b).ok_or_else(|| ArithError::DivisionByZero(t.clone())),
                _ => unreachable!(),
            }
        }
        _ => Err(ArithError::NotNumeric(t.clone())),
    }
}
