//! Independent re-derivation of every justification.

use std::fmt;

use super::{count, eval_guard, sus, SaturationResult, COUNT_RULE, SUS_RULE};
use crate::parse::Program;
use crate::term::Term;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayError {
    pub fact: String,
    pub rule_id: String,
    pub reason: String,
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} via {}: {}", self.fact, self.rule_id, self.reason)
    }
}

/// Checks that each justification's binding, substituted into its rule's
/// conclusion (and spliced into the host for rewrites), reproduces the
/// fact exactly, that its premises are strictly older facts and that its
/// guards hold. Returns the number of justifications checked.
pub fn replay(p: &Program, r: &SaturationResult) -> Result<usize, Vec<ReplayError>> {
    let wm = &r.memory;
    let mut errors = Vec::new();
    let mut checked = 0;
    for fact in wm.facts() {
        for j in &fact.justifications {
            checked += 1;
            let fail =
                |reason: String| ReplayError { fact: fact.text().to_string(), rule_id: j.rule_id.clone(), reason };
            let (conclusion, guards) = match j.rule_id.as_str() {
                COUNT_RULE => (count::pseudo_conclusion(), Vec::new()),
                SUS_RULE => (sus::pseudo_conclusion(), Vec::new()),
                id => match p.rule(id) {
                    Some(rule) => (rule.conclusion.clone(), rule.guards.clone()),
                    None => {
                        errors.push(fail("no such rule".into()));
                        continue;
                    }
                },
            };
            let produced = match conclusion.instantiate(&j.binding) {
                Ok(t) => t,
                Err(e) => {
                    errors.push(fail(format!("conclusion does not instantiate: {e}")));
                    continue;
                }
            };
            let produced = match &j.rewrite_position {
                None => Some(produced),
                Some(path) => j.premise_terms.first().and_then(|host| host.replace_at(path, produced)),
            };
            match produced.map(|t| t.canonicalize()) {
                Some(t) if t.render() == fact.text() => {}
                Some(t) => errors.push(fail(format!("replays to {}", t.render()))),
                None => errors.push(fail("rewrite position missing from host".into())),
            }
            for premise in &j.premise_terms {
                match wm.get(premise) {
                    Some(pf) if pf.first_round < j.round => {}
                    Some(_) => errors.push(fail(format!("premise {} is not older", premise.render()))),
                    None => errors.push(fail(format!("premise {} is not a fact", premise.render()))),
                }
            }
            for g in &guards {
                if !matches!(eval_guard(g, &j.binding), Ok(true)) {
                    errors.push(fail(format!("guard {} does not hold", Term::render(g))));
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(checked)
    } else {
        Err(errors)
    }
}
