use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{encode_record, KarbError, Record};
use crate::digest::sha256_hex;
use crate::engine::{saturate, Limits, Status};
use crate::parse::{render, Program};

/// Rules in this group are the scoring signals.
pub const SIGNAL_GROUP: &str = "signal";

/// Which gold labels count as the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binarization {
    Equals(i64),
    AtLeast(i64),
}

impl Binarization {
    pub fn positive(&self, label: i64) -> bool {
        match *self {
            Binarization::Equals(k) => label == k,
            Binarization::AtLeast(k) => label >= k,
        }
    }
}

impl fmt::Display for Binarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binarization::Equals(k) => write!(f, "label = {k}"),
            Binarization::AtLeast(k) => write!(f, "label >= {k}"),
        }
    }
}

/// Accepts `label = 5`, `label >= 4`, or the same without `label`.
impl FromStr for Binarization {
    type Err = KarbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || KarbError::BadBinarization(s.to_string());
        let rest = s.trim().strip_prefix("label").unwrap_or(s.trim()).trim_start();
        let (ctor, num): (fn(i64) -> Binarization, &str) = if let Some(n) = rest.strip_prefix(">=") {
            (Binarization::AtLeast, n)
        } else if let Some(n) = rest.strip_prefix("==").or_else(|| rest.strip_prefix('=')) {
            (Binarization::Equals, n)
        } else {
            return Err(bad());
        };
        num.trim().parse().map(ctor).map_err(|_| bad())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Qualifier {
    pub rules: Program,
    /// Keyed by signal rule id.
    pub weights: BTreeMap<String, f64>,
    pub threshold: f64,
    pub binarization: Binarization,
}

#[derive(Serialize, Deserialize)]
struct QualifierDoc {
    rules_digest: String,
    weights: BTreeMap<String, f64>,
    threshold: f64,
    binarization: String,
}

pub(crate) fn rules_digest(p: &Program) -> String {
    sha256_hex(render(p).as_bytes())
}

impl Qualifier {
    /// A qualifier with every signal weight and the threshold at zero.
    pub fn new(rules: Program, binarization: Binarization) -> Result<Self, KarbError> {
        let weights: BTreeMap<String, f64> = rules.rules_in_group(SIGNAL_GROUP).map(|r| (r.id.clone(), 0.0)).collect();
        if weights.is_empty() {
            return Err(KarbError::NoSignalRules);
        }
        Ok(Qualifier { rules, weights, threshold: 0.0, binarization })
    }

    /// Signal rule ids in program order.
    pub fn signal_ids(&self) -> Vec<String> {
        self.rules.rules_in_group(SIGNAL_GROUP).map(|r| r.id.clone()).collect()
    }

    /// Per signal rule (program order), how many facts have it as their
    /// earliest justification. The flag reports a saturation bound hit.
    pub fn signal_counts(&self, r: &Record) -> Result<(Vec<u32>, bool), KarbError> {
        signal_counts(&self.rules, &self.signal_ids(), r)
    }

    pub fn score_counts(&self, counts: &[u32]) -> f64 {
        self.signal_ids()
            .iter()
            .zip(counts)
            .map(|(id, &c)| self.weights.get(id).copied().unwrap_or(0.0) * f64::from(c))
            .sum()
    }

    pub fn score(&self, r: &Record) -> Result<f64, KarbError> {
        Ok(self.score_counts(&self.signal_counts(r)?.0))
    }

    pub fn predict(&self, r: &Record) -> Result<bool, KarbError> {
        Ok(self.score(r)? >= self.threshold)
    }

    pub fn to_json(&self) -> String {
        let doc = QualifierDoc {
            rules_digest: rules_digest(&self.rules),
            weights: self.weights.clone(),
            threshold: self.threshold,
            binarization: self.binarization.to_string(),
        };
        serde_json::to_string_pretty(&doc).expect("qualifier serializes")
    }

    /// Loads weights saved by [`Qualifier::to_json`] for the same rules.
    pub fn from_json(text: &str, rules: Program) -> Result<Self, KarbError> {
        let doc: QualifierDoc = serde_json::from_str(text).map_err(|e| KarbError::Json(e.to_string()))?;
        let actual = rules_digest(&rules);
        if doc.rules_digest != actual {
            return Err(KarbError::DigestMismatch { expected: doc.rules_digest, actual });
        }
        let mut q = Qualifier::new(rules, doc.binarization.parse()?)?;
        for (id, w) in doc.weights {
            match q.weights.get_mut(&id) {
                Some(slot) => *slot = w,
                None => return Err(KarbError::UnknownRule(id)),
            }
        }
        if !doc.threshold.is_finite() {
            return Err(KarbError::Json("threshold is not finite".into()));
        }
        q.threshold = doc.threshold;
        Ok(q)
    }
}

pub(crate) fn signal_counts(rules: &Program, ids: &[String], r: &Record) -> Result<(Vec<u32>, bool), KarbError> {
    let facts = encode_record(r)?;
    let result = saturate(rules, &facts, &Limits::default());
    let mut counts = vec![0u32; ids.len()];
    for f in result.facts() {
        if let Some(j) = f.earliest() {
            if let Some(k) = ids.iter().position(|id| *id == j.rule_id) {
                counts[k] += 1;
            }
        }
    }
    Ok((counts, result.status != Status::Fixpoint))
}
