use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Binarization, KarbError, Qualifier, Record, Value};
use crate::term::Number;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Inclusive integer range.
    IntRange(i64, i64),
    Choice(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub features: Vec<(String, Domain)>,
    /// Probability that a record's class is flipped.
    pub noise: f64,
    /// Labels are drawn from `1..=likert_max`.
    pub likert_max: i64,
}

impl SyntheticConfig {
    /// The software-quality feature space used by the shipped examples.
    pub fn quality() -> Self {
        let choice = |xs: &[&str]| Domain::Choice(xs.iter().map(|s| s.to_string()).collect());
        SyntheticConfig {
            features: vec![
                ("speed".into(), Domain::IntRange(1, 5)),
                ("stability".into(), Domain::IntRange(1, 5)),
                ("ui".into(), choice(&["good", "fair", "poor"])),
                ("ads".into(), choice(&["none", "few", "many"])),
                ("theme".into(), choice(&["light", "dark"])),
            ],
            noise: 0.05,
            likert_max: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    /// Records carrying the noisy labels.
    pub records: Vec<Record>,
    /// Labels before noise.
    pub clean_labels: Vec<i64>,
    pub flipped: Vec<bool>,
}

impl SyntheticData {
    /// CSV with an `id` column, the features in configuration order and
    /// the noisy `label`.
    pub fn to_csv(&self, cfg: &SyntheticConfig) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend(cfg.features.iter().map(|(n, _)| n.clone()));
        header.push("label".into());
        w.write_record(&header).expect("in-memory write");
        for r in &self.records {
            let mut row = vec![r.id.clone()];
            row.extend(cfg.features.iter().map(|(n, _)| r.features[n].to_string()));
            row.push(r.label.map(|l| l.to_string()).unwrap_or_default());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn labels_for(bin: Binarization, max: i64, positive: bool) -> Vec<i64> {
    (1..=max).filter(|&l| bin.positive(l) == positive).collect()
}

/// Records whose labels are `planted`'s own predictions, mapped onto the
/// Likert scale, with a seeded fraction of classes flipped.
pub fn generate_synthetic(
    seed: u64,
    n: usize,
    planted: &Qualifier,
    cfg: &SyntheticConfig,
) -> Result<SyntheticData, KarbError> {
    let pos_labels = labels_for(planted.binarization, cfg.likert_max, true);
    let neg_labels = labels_for(planted.binarization, cfg.likert_max, false);
    if pos_labels.is_empty() || neg_labels.is_empty() {
        return Err(KarbError::Config(format!(
            "`{}` leaves a class empty on 1..={}",
            planted.binarization, cfg.likert_max
        )));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(KarbError::Config("noise must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records: Vec<Record> = (0..n)
        .map(|i| {
            let features: BTreeMap<String, Value> = cfg
                .features
                .iter()
                .map(|(name, dom)| {
                    let v = match dom {
                        Domain::IntRange(lo, hi) => Value::Num(Number::from_i64(rng.random_range(*lo..=*hi))),
                        Domain::Choice(xs) => Value::Text(xs[rng.random_range(0..xs.len())].clone()),
                    };
                    (name.clone(), v)
                })
                .collect();
            Record { id: format!("s{seed}-{}", i + 1), features, label: None }
        })
        .collect();
    let predictions: Vec<bool> = records.par_iter().map(|r| planted.predict(r)).collect::<Result<_, _>>()?;
    let pick = |rng: &mut ChaCha8Rng, xs: &[i64]| xs[rng.random_range(0..xs.len())];
    let mut clean_labels = Vec::with_capacity(n);
    let mut flipped = Vec::with_capacity(n);
    for (r, &pos) in records.iter_mut().zip(&predictions) {
        let clean = pick(&mut rng, if pos { &pos_labels } else { &neg_labels });
        let flip = rng.random_bool(cfg.noise);
        let label = if flip { pick(&mut rng, if pos { &neg_labels } else { &pos_labels }) } else { clean };
        clean_labels.push(clean);
        flipped.push(flip);
        r.label = Some(label);
    }
    Ok(SyntheticData { records, clean_labels, flipped })
}
