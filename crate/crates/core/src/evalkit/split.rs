use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Train fractions inside this band follow the usual 70-80% holdout convention.
pub const CONFORMANT_TRAIN_FRACTION: (f64, f64) = (0.7, 0.8);

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            seed,
            stratified: false,
        }
    }

    pub fn stratified(mut self, stratified: bool) -> Self {
        self.stratified = stratified;
        self
    }

    pub fn is_conformant(&self) -> bool {
        let (lo, hi) = CONFORMANT_TRAIN_FRACTION;
        self.train_fraction >= lo - 1e-12 && self.train_fraction <= hi + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Holdout {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Shuffled groups of record indices, keyed by label in sorted order.
fn shuffled_groups<'a>(labels: &'a [String], rng: &mut ChaCha8Rng) -> BTreeMap<&'a str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        groups.entry(label.as_str()).or_default().push(i);
    }
    for members in groups.values_mut() {
        members.shuffle(rng);
    }
    groups
}

fn check_labels(n: usize, labels: Option<&[String]>, stratified: bool) -> Result<Option<&[String]>, EvalError> {
    match labels {
        Some(l) if l.len() != n => Err(EvalError::LabelCountMismatch {
            labels: l.len(),
            records: n,
        }),
        None if stratified => Err(EvalError::MissingLabels),
        other => Ok(other),
    }
}

/// Single train/test partition with `round(train_fraction * n)` training
/// records. In stratified mode each class contributes the floor or ceiling
/// of its proportional share; singleton classes go to training.
pub fn holdout_split(n: usize, spec: &SplitSpec, labels: Option<&[String]>) -> Result<Holdout, EvalError> {
    if n < 2 {
        return Err(EvalError::TooFewRecords(n));
    }
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(EvalError::InvalidFraction(f));
    }
    let labels = check_labels(n, labels, spec.stratified)?;
    let mut warnings = Vec::new();
    if !spec.is_conformant() {
        warnings.push(format!(
            "train fraction {f} is outside the conventional {}-{} holdout band",
            CONFORMANT_TRAIN_FRACTION.0, CONFORMANT_TRAIN_FRACTION.1
        ));
    }
    let target = (f * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let (mut train, mut test) = match labels.filter(|_| spec.stratified) {
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let test = order.split_off(target);
            (order, test)
        }
        Some(labels) => {
            let groups = shuffled_groups(labels, &mut rng);
            let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
            let take = stratified_quotas(&sizes, f, target);
            for (label, members) in &groups {
                if members.len() == 1 {
                    warnings.push(format!("class `{label}` has a single record; it goes to training"));
                }
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (members, t) in groups.values().zip(take) {
                train.extend_from_slice(&members[..t]);
                test.extend_from_slice(&members[t..]);
            }
            (train, test)
        }
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok(Holdout { train, test, warnings })
}

/// Largest-remainder allocation of `target` training slots across classes.
fn stratified_quotas(sizes: &[usize], fraction: f64, target: usize) -> Vec<usize> {
    let quota: Vec<f64> = sizes.iter().map(|&s| fraction * s as f64).collect();
    let mut take: Vec<usize> = sizes
        .iter()
        .zip(&quota)
        .map(|(&s, &q)| if s == 1 { 1 } else { (q.floor() as usize).min(s) })
        .collect();
    let frac = |i: usize| quota[i] - quota[i].floor();
    let mut order: Vec<usize> = (0..sizes.len()).filter(|&i| sizes[i] > 1).collect();
    let assigned: usize = take.iter().sum();

    if assigned < target {
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        let mut need = target - assigned;
        while need > 0 {
            let mut progressed = false;
            for &i in &order {
                if need > 0 && take[i] < sizes[i] {
                    take[i] += 1;
                    need -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
    } else if assigned > target {
        order.sort_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(a.cmp(&b)));
        let mut excess = assigned - target;
        while excess > 0 {
            let mut progressed = false;
            for &i in &order {
                if excess > 0 && take[i] > 0 {
                    take[i] -= 1;
                    excess -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
    }
    take
}

/// Assignment of every record to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Deals shuffled records round-robin into `k` folds. Stratified plans
/// shuffle within each class and deal the classes one after another, so
/// both overall and per-class fold sizes differ by at most one.
pub fn kfold_plan(
    n: usize,
    k: usize,
    seed: u64,
    stratified: bool,
    labels: Option<&[String]>,
) -> Result<FoldPlan, EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::InvalidFolds { k, n });
    }
    let labels = check_labels(n, labels, stratified)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = match labels.filter(|_| stratified) {
        Some(labels) => shuffled_groups(labels, &mut rng).into_values().flatten().collect(),
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        }
    };
    let mut assignments = vec![0; n];
    for (position, &record) in order.iter().enumerate() {
        assignments[record] = position % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
        stratified,
    })
}
