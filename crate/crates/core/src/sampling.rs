//! Presentation orders with controlled temporal smoothness.
//!
//! A session fixes a category order and, per category, the order in which
//! exemplars are drawn. Every smoothness condition built from the same
//! session therefore sees each category's exemplars in the same sequence;
//! only the interleaving between categories changes.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{seeded_permutation, Rng};

/// Smoothness presets used by the experiment presets.
pub const K_PRESETS: [usize; 6] = [1, 3, 5, 10, 16, 24];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `k` consecutive exemplars per category visit.
    KRepetition(usize),
    /// Uniform permutation of all samples.
    Random,
    /// Dataset order as stored (continuous streams).
    Sequential,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::KRepetition(k) => write!(f, "k{k}"),
            Condition::Random => f.write_str("random"),
            Condition::Sequential => f.write_str("sequential"),
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Condition::Random),
            "sequential" => Ok(Condition::Sequential),
            _ => s
                .strip_prefix('k')
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Condition::KRepetition)
                .ok_or_else(|| Error::invalid(format!("unknown condition `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub order: Vec<usize>,
    /// True where the category differs from the previous position.
    pub boundary_flags: Vec<bool>,
    pub condition: Condition,
    pub category_order: Vec<usize>,
    pub seed: u64,
}

pub fn boundary_flags(labels: &[usize], order: &[usize]) -> Vec<bool> {
    order.iter().enumerate().map(|(i, &idx)| i == 0 || labels[idx] != labels[order[i - 1]]).collect()
}

impl Schedule {
    /// Wraps an explicit order, computing boundary flags from labels.
    pub fn from_order(
        dataset: &Dataset,
        order: Vec<usize>,
        condition: Condition,
        category_order: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        if let Some(&bad) = order.iter().find(|&&i| i >= dataset.len()) {
            return Err(Error::invalid(format!("schedule index {bad} out of range for {} samples", dataset.len())));
        }
        let boundary_flags = boundary_flags(&dataset.labels, &order);
        Ok(Self { order, boundary_flags, condition, category_order, seed })
    }

    pub fn sequential(dataset: &Dataset) -> Self {
        let order: Vec<usize> = (0..dataset.len()).collect();
        Self {
            boundary_flags: boundary_flags(&dataset.labels, &order),
            order,
            condition: Condition::Sequential,
            category_order: (0..dataset.num_categories).collect(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Labels in presentation order.
    pub fn labels<'a>(&'a self, dataset: &'a Dataset) -> impl Iterator<Item = usize> + 'a {
        self.order.iter().map(move |&i| dataset.labels[i])
    }

    /// Checks that the order is a permutation of the dataset and the flags
    /// agree with its labels.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.order.len() != dataset.len() {
            return Err(Error::invalid(format!(
                "schedule has {} positions for {} samples",
                self.order.len(),
                dataset.len()
            )));
        }
        let mut seen = vec![false; dataset.len()];
        for &i in &self.order {
            if i >= dataset.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("schedule is not a permutation (index {i})")));
            }
        }
        if self.boundary_flags != boundary_flags(&dataset.labels, &self.order) {
            return Err(Error::invalid("boundary flags disagree with labels"));
        }
        Ok(())
    }

    /// `position,sample_index,category,boundary`
    pub fn write_csv(&self, dataset: &Dataset, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["position", "sample_index", "category", "boundary"])?;
        for (pos, (&idx, &b)) in self.order.iter().zip(&self.boundary_flags).enumerate() {
            w.write_record(&[
                pos.to_string(),
                idx.to_string(),
                dataset.labels[idx].to_string(),
                u8::from(b).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// One seeded permutation of each category's exemplars.
pub fn shared_within_category_orders(dataset: &Dataset, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    Ok(dataset
        .category_indices()
        .into_iter()
        .map(|mut g| {
            rng.shuffle(&mut g);
            g
        })
        .collect())
}

/// Cycles through `category_order`, emitting the next `k` unseen exemplars
/// of each category per visit. A category with fewer than `k` left emits
/// what remains and leaves the cycle.
pub fn k_repetition_schedule(
    dataset: &Dataset,
    category_order: &[usize],
    within_category_orders: &[Vec<usize>],
    k: usize,
) -> Result<Schedule> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if within_category_orders.len() != dataset.num_categories {
        return Err(Error::invalid(format!(
            "{} within-category orders for {} categories",
            within_category_orders.len(),
            dataset.num_categories
        )));
    }
    let mut cursor = vec![0usize; dataset.num_categories];
    let mut order = Vec::with_capacity(dataset.len());
    let mut active: Vec<usize> =
        category_order.iter().copied().filter(|&c| !within_category_orders[c].is_empty()).collect();
    while !active.is_empty() {
        active.retain(|&c| {
            let pool = &within_category_orders[c];
            let take = k.min(pool.len() - cursor[c]);
            order.extend_from_slice(&pool[cursor[c]..cursor[c] + take]);
            cursor[c] += take;
            cursor[c] < pool.len()
        });
    }
    Schedule::from_order(dataset, order, Condition::KRepetition(k), category_order.to_vec(), 0)
}

pub fn random_schedule(dataset: &Dataset, rng: &mut Rng) -> Result<Schedule> {
    let seed = rng.seed();
    let order = seeded_permutation(rng, dataset.len())?;
    Schedule::from_order(dataset, order, Condition::Random, (0..dataset.num_categories).collect(), seed)
}

/// Per-session state shared by every smoothness condition.
#[derive(Debug, Clone)]
pub struct Session {
    pub seed: u64,
    pub category_order: Vec<usize>,
    pub within_category_orders: Vec<Vec<usize>>,
}

impl Session {
    pub fn new(dataset: &Dataset, seed: u64) -> Result<Self> {
        let root = Rng::new(seed);
        let category_order = seeded_permutation(&mut root.derive(1), dataset.num_categories.max(1))?;
        let within_category_orders = shared_within_category_orders(dataset, &mut root.derive(2))?;
        Ok(Self { seed, category_order, within_category_orders })
    }

    /// A session over `dataset` that cycles categories in `category_order`
    /// (typically another session's) with its own within-category orders.
    pub fn with_category_order(dataset: &Dataset, seed: u64, category_order: Vec<usize>) -> Result<Self> {
        let mut sorted = category_order.clone();
        sorted.sort_unstable();
        if sorted != (0..dataset.num_categories.max(1)).collect::<Vec<_>>() {
            return Err(Error::invalid(format!(
                "category order {category_order:?} is not a permutation of {} categories",
                dataset.num_categories
            )));
        }
        let within_category_orders = shared_within_category_orders(dataset, &mut Rng::new(seed).derive(2))?;
        Ok(Self { seed, category_order, within_category_orders })
    }

    pub fn schedule(&self, dataset: &Dataset, condition: Condition) -> Result<Schedule> {
        let mut s = match condition {
            Condition::KRepetition(k) => {
                k_repetition_schedule(dataset, &self.category_order, &self.within_category_orders, k)?
            }
            Condition::Random => random_schedule(dataset, &mut Rng::new(self.seed).derive(3))?,
            Condition::Sequential => Schedule::sequential(dataset),
        };
        s.seed = self.seed;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(counts: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                samples.push(vec![c as f64, i as f64]);
                labels.push(c);
            }
        }
        Dataset::new("toy", samples, labels, counts.len()).unwrap()
    }

    fn tags(ds: &Dataset, s: &Schedule) -> Vec<(usize, usize)> {
        s.order.iter().map(|&i| (ds.labels[i], ds.samples[i][1] as usize)).collect()
    }

    #[test]
    fn shared_category_order_keeps_the_cycle() {
        let ds = toy(&[6, 6, 6, 6]);
        let a = Session::new(&ds, 5).unwrap();
        let b = Session::with_category_order(&ds, 9, a.category_order.clone()).unwrap();
        let sa = a.schedule(&ds, Condition::KRepetition(3)).unwrap();
        let sb = b.schedule(&ds, Condition::KRepetition(3)).unwrap();
        let labels = |s: &Schedule| s.order.iter().map(|&i| ds.labels[i]).collect::<Vec<_>>();
        assert_eq!(labels(&sa), labels(&sb));
        assert_ne!(sa.order, sb.order);
        assert!(Session::with_category_order(&ds, 9, vec![0, 1, 1, 2]).is_err());
    }

    #[test]
    fn one_repetition_follows_category_order() {
        // categories A=0, B=1, C=2; order B-A-C
        let ds = toy(&[3, 3, 3]);
        let within: Vec<Vec<usize>> = ds.category_indices();
        let s = k_repetition_schedule(&ds, &[1, 0, 2], &within, 1).unwrap();
        let expect = vec![(1, 0), (0, 0), (2, 0), (1, 1), (0, 1), (2, 1), (1, 2), (0, 2), (2, 2)];
        assert_eq!(tags(&ds, &s), expect);
        assert!(s.boundary_flags.iter().all(|&b| b));
    }

    #[test]
    fn three_repetition_blocks() {
        let ds = toy(&[6, 6, 6]);
        let within = ds.category_indices();
        let s = k_repetition_schedule(&ds, &[1, 0, 2], &within, 3).unwrap();
        let t = tags(&ds, &s);
        assert_eq!(&t[..10], &[(1, 0), (1, 1), (1, 2), (0, 0), (0, 1), (0, 2), (2, 0), (2, 1), (2, 2), (1, 3)]);
    }

    #[test]
    fn exhausted_category_leaves_cycle() {
        // brute-force simulation of the exhaustion rule
        let ds = toy(&[2, 5]);
        let within = ds.category_indices();
        let s = k_repetition_schedule(&ds, &[0, 1], &within, 2).unwrap();
        let labels: Vec<usize> = s.labels(&ds).collect();
        assert_eq!(labels, vec![0, 0, 1, 1, 1, 1, 1]);
        s.validate(&ds).unwrap();
    }

    #[test]
    fn random_schedule_edge_cases() {
        let ds = toy(&[1]);
        let s = random_schedule(&ds, &mut Rng::new(3)).unwrap();
        assert_eq!(s.order, vec![0]);
        assert_eq!(s.boundary_flags, vec![true]);
        let ds = toy(&[5, 5]);
        assert_eq!(random_schedule(&ds, &mut Rng::new(9)).unwrap(), random_schedule(&ds, &mut Rng::new(9)).unwrap());
    }

    #[test]
    fn random_schedule_run_length_matches_theory() {
        // Without replacement from 4 balanced categories of m items, the
        // probability that two adjacent positions match is (m-1)/(4m-1);
        // the mean number of same-category adjacencies is (N-1) times that.
        let m = 5;
        let ds = toy(&[m; 4]);
        let n = 4 * m;
        let p_same = (m - 1) as f64 / (n - 1) as f64;
        let expected_runs = 1.0 + (n - 1) as f64 * (1.0 - p_same);
        let trials = 10_000;
        let total: usize = (0..trials)
            .map(|seed| {
                let s = random_schedule(&ds, &mut Rng::new(seed)).unwrap();
                s.boundary_flags.iter().filter(|&&b| b).count()
            })
            .sum();
        let mean_runs = total as f64 / trials as f64;
        let mean_len = n as f64 / mean_runs;
        let expected_len = n as f64 / expected_runs;
        assert!((mean_len - expected_len).abs() < 0.01, "{mean_len} vs {expected_len}");
    }

    #[test]
    fn shared_orders_are_permutations_of_categories() {
        let ds = toy(&[300, 300, 300, 300]);
        let orders = shared_within_category_orders(&ds, &mut Rng::new(1)).unwrap();
        assert_eq!(orders.len(), 4);
        for (c, o) in orders.iter().enumerate() {
            assert_eq!(o.len(), 300);
            let mut sorted = o.clone();
            sorted.sort();
            assert_eq!(sorted, ds.category_indices()[c]);
        }
        let single = toy(&[1, 2]);
        assert_eq!(shared_within_category_orders(&single, &mut Rng::new(1)).unwrap()[0], vec![0]);
    }

    #[test]
    fn session_conditions_share_within_category_sequence() {
        let ds = toy(&[30, 30, 30]);
        let session = Session::new(&ds, 77).unwrap();
        let per_cat = |s: &Schedule| -> Vec<Vec<usize>> {
            let mut out = vec![Vec::new(); 3];
            for &i in &s.order {
                out[ds.labels[i]].push(i);
            }
            out
        };
        let base = per_cat(&session.schedule(&ds, Condition::KRepetition(1)).unwrap());
        for k in [3, 5, 10] {
            assert_eq!(per_cat(&session.schedule(&ds, Condition::KRepetition(k)).unwrap()), base);
        }
    }

    #[test]
    fn condition_round_trips_through_text() {
        for c in [Condition::KRepetition(5), Condition::Random, Condition::Sequential] {
            assert_eq!(c.to_string().parse::<Condition>().unwrap(), c);
        }
        assert!("k0".parse::<Condition>().is_err());
        assert!("smooth".parse::<Condition>().is_err());
    }

    #[test]
    fn validate_catches_bad_flags() {
        let ds = toy(&[2, 2]);
        let mut s = Schedule::sequential(&ds);
        s.validate(&ds).unwrap();
        s.boundary_flags[1] = true;
        assert!(s.validate(&ds).is_err());
        s.order = vec![0, 0, 1, 2];
        assert!(s.validate(&ds).is_err());
    }
}
