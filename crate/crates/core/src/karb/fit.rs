use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::qualifier::signal_counts;
use super::{Binarization, KarbError, Qualifier, Record};
use crate::parse::Program;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    ErrorRate,
    Mse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub seed: u64,
    pub iterations: usize,
    pub restarts: usize,
    pub initial_step: f64,
    /// Step multiplier applied after every iteration.
    pub decay: f64,
    pub objective: Objective,
    pub binarization: Binarization,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            seed: 0,
            iterations: 500,
            restarts: 2,
            initial_step: 0.5,
            decay: 0.995,
            objective: Objective::ErrorRate,
            binarization: Binarization::Equals(5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RestartReport {
    pub initial_fitness: f64,
    pub final_fitness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub qualifier: Qualifier,
    pub fitness: f64,
    pub restarts: Vec<RestartReport>,
    /// Records whose saturation stopped at a bound.
    pub bound_hits: usize,
}

/// Signal firing counts and binarized labels, computed once per dataset.
struct Cached {
    counts: Vec<Vec<u32>>,
    positive: Vec<bool>,
    bound_hits: usize,
}

fn cache(rules: &Program, ids: &[String], data: &[Record], bin: Binarization) -> Result<Cached, KarbError> {
    if data.is_empty() {
        return Err(KarbError::EmptyDataset);
    }
    let positive = data
        .iter()
        .map(|r| r.label.map(|l| bin.positive(l)).ok_or_else(|| KarbError::Unlabeled(r.id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<(Vec<u32>, bool)> =
        data.par_iter().map(|r| signal_counts(rules, ids, r)).collect::<Result<_, _>>()?;
    let bound_hits = rows.iter().filter(|(_, hit)| *hit).count();
    Ok(Cached { counts: rows.into_iter().map(|(c, _)| c).collect(), positive, bound_hits })
}

fn score(weights: &[f64], counts: &[u32]) -> f64 {
    weights.iter().zip(counts).map(|(w, &c)| w * f64::from(c)).sum()
}

/// `params` holds the weights followed by the threshold.
fn cached_fitness(params: &[f64], data: &Cached, objective: Objective) -> f64 {
    let (weights, threshold) = params.split_at(params.len() - 1);
    let n = data.counts.len() as f64;
    let total: f64 = data
        .counts
        .iter()
        .zip(&data.positive)
        .map(|(c, &pos)| {
            let s = score(weights, c);
            match objective {
                Objective::ErrorRate => f64::from(u8::from((s >= threshold[0]) != pos)),
                Objective::Mse => (s - f64::from(u8::from(pos))).powi(2),
            }
        })
        .sum();
    total / n
}

fn params_of(q: &Qualifier, ids: &[String]) -> Vec<f64> {
    let mut p: Vec<f64> = ids.iter().map(|id| q.weights.get(id).copied().unwrap_or(0.0)).collect();
    p.push(q.threshold);
    p
}

pub fn fitness(q: &Qualifier, data: &[Record], objective: Objective) -> Result<f64, KarbError> {
    let ids = q.signal_ids();
    let c = cache(&q.rules, &ids, data, q.binarization)?;
    Ok(cached_fitness(&params_of(q, &ids), &c, objective))
}

/// Random-restart hill climbing over the signal weights and threshold.
pub fn fit(rules: &Program, data: &[Record], cfg: &FitConfig) -> Result<FitReport, KarbError> {
    if cfg.iterations == 0 || cfg.restarts == 0 {
        return Err(KarbError::Config("iterations and restarts must be at least 1".into()));
    }
    if !(cfg.initial_step.is_finite() && cfg.initial_step > 0.0 && cfg.decay.is_finite() && cfg.decay > 0.0) {
        return Err(KarbError::Config("step and decay must be positive".into()));
    }
    let mut template = Qualifier::new(rules.clone(), cfg.binarization)?;
    let ids = template.signal_ids();
    let data = cache(rules, &ids, data, cfg.binarization)?;
    let dims = ids.len() + 1;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut reports = Vec::with_capacity(cfg.restarts);
    for _ in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let mut cur: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut cur_fit = cached_fitness(&cur, &data, cfg.objective);
        let initial_fitness = cur_fit;
        let mut step = cfg.initial_step;
        for _ in 0..cfg.iterations {
            let k = rng.random_range(0..dims);
            let delta = if rng.random_bool(0.5) { step } else { -step };
            let mut cand = cur.clone();
            cand[k] += delta;
            let f = cached_fitness(&cand, &data, cfg.objective);
            if f <= cur_fit {
                cur = cand;
                cur_fit = f;
            }
            step *= cfg.decay;
        }
        reports.push(RestartReport { initial_fitness, final_fitness: cur_fit });
        if best.as_ref().is_none_or(|(bf, _)| cur_fit < *bf) {
            best = Some((cur_fit, cur));
        }
    }
    let (fitness, params) = best.expect("at least one restart");
    for (id, w) in ids.iter().zip(&params) {
        template.weights.insert(id.clone(), *w);
    }
    template.threshold = params[dims - 1];
    Ok(FitReport { qualifier: template, fitness, restarts: reports, bound_hits: data.bound_hits })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub n: usize,
    pub positives: usize,
    pub predicted_positives: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Accuracy of always answering the majority class of this data.
    pub baseline_accuracy: f64,
    pub bound_hits: usize,
}

/// Binary classification metrics; undefined ratios are reported as 0.
pub fn evaluate(q: &Qualifier, data: &[Record]) -> Result<Metrics, KarbError> {
    let ids = q.signal_ids();
    let c = cache(&q.rules, &ids, data, q.binarization)?;
    let params = params_of(q, &ids);
    let (weights, threshold) = params.split_at(ids.len());
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (counts, &pos) in c.counts.iter().zip(&c.positive) {
        match (score(weights, counts) >= threshold[0], pos) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = data.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    let positives = tp + fn_;
    Ok(Metrics {
        n,
        positives,
        predicted_positives: tp + fp,
        accuracy: ratio(tp + tn, n),
        precision,
        recall,
        f1,
        baseline_accuracy: ratio(positives.max(n - positives), n),
        bound_hits: c.bound_hits,
    })
}
