//! Learning an unknown cost function from observed chunk timings.
//!
//! A [`LearnedCostModel`] keeps "known points" `(size, cost)` where
//! `cost = duration * speed` is the time a unit-speed processor would need.
//! Between points the model is piecewise-linear; before any observation it is
//! the linear guess `initial_guess_ratio * n`, which splits batches
//! proportionally to speed. Every update is followed by a monotonicity repair
//! so the model stays invertible for the deadline search in
//! [`exact_analytic`](crate::partition::exact_analytic).
//!
//! Updates need `&mut self`; planning only reads. Callers serialize updates per
//! model and plan from a quiescent model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{interpolate_points, CostFunction, Speed};
use crate::partition::{exact_analytic, proportional, ClusterSpec, Partition, PartitionError};
use crate::scalar::Scalar;

/// Upper bound on stored points before the least informative ones are evicted.
pub const DEFAULT_CAPACITY: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptiveError {
    #[error("observation needs a positive size and a positive finite duration (size {size}, duration {duration})")]
    InvalidObservation { size: u64, duration: f64 },
    #[error("stored model is inconsistent: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// How a new cost at an already-known size combines with the stored one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStrategy {
    /// Keep only the latest cost; the observation count resets to 1.
    Replace,
    /// Mean over all observations at that size.
    #[default]
    OccurrenceWeightedMean,
    /// Largest cost seen.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct KnownPoint<S> {
    pub size: u64,
    pub cost: S,
    pub observations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", try_from = "StoredModel<S>")]
pub struct LearnedCostModel<S> {
    known_points: Vec<KnownPoint<S>>,
    update_strategy: UpdateStrategy,
    initial_guess_ratio: S,
    capacity: usize,
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct StoredModel<S> {
    known_points: Vec<KnownPoint<S>>,
    #[serde(default)]
    update_strategy: UpdateStrategy,
    initial_guess_ratio: S,
    #[serde(default = "default_capacity")]
    capacity: usize,
}

fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}

impl<S: Scalar> TryFrom<StoredModel<S>> for LearnedCostModel<S> {
    type Error = AdaptiveError;
    fn try_from(raw: StoredModel<S>) -> Result<Self, Self::Error> {
        let bad = |m: String| Err(AdaptiveError::InvalidModel(m));
        if !(raw.initial_guess_ratio.is_finite() && raw.initial_guess_ratio > S::zero()) {
            return bad("initial_guess_ratio must be positive".into());
        }
        if raw.capacity < 2 {
            return bad("capacity must be at least 2".into());
        }
        for (i, p) in raw.known_points.iter().enumerate() {
            if p.size == 0 || p.observations == 0 || !(p.cost.is_finite() && p.cost > S::zero()) {
                return bad(format!("point {i} needs positive size, cost and observations"));
            }
            if i > 0 {
                let prev = &raw.known_points[i - 1];
                if p.size <= prev.size || p.cost < prev.cost {
                    return bad(format!("point {i} breaks size/cost ordering"));
                }
            }
        }
        Ok(Self {
            known_points: raw.known_points,
            update_strategy: raw.update_strategy,
            initial_guess_ratio: raw.initial_guess_ratio,
            capacity: raw.capacity,
        })
    }
}

impl<S: Scalar> Default for LearnedCostModel<S> {
    fn default() -> Self {
        Self::new(UpdateStrategy::default(), S::one())
    }
}

impl<S: Scalar> LearnedCostModel<S> {
    /// An empty model. `initial_guess_ratio` is the slope of the linear guess
    /// used before the first observation.
    pub fn new(update_strategy: UpdateStrategy, initial_guess_ratio: S) -> Self {
        assert!(
            initial_guess_ratio.is_finite() && initial_guess_ratio > S::zero(),
            "initial guess ratio must be positive"
        );
        Self {
            known_points: Vec::new(),
            update_strategy,
            initial_guess_ratio,
            capacity: DEFAULT_CAPACITY,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        assert!(capacity >= 2, "capacity must be at least 2");
        self.capacity = capacity;
        self.evict_to_capacity();
        self
    }

    pub fn known_points(&self) -> &[KnownPoint<S>] {
        &self.known_points
    }

    pub fn update_strategy(&self) -> UpdateStrategy {
        self.update_strategy
    }

    pub fn initial_guess_ratio(&self) -> S {
        self.initial_guess_ratio
    }

    pub fn is_empty(&self) -> bool {
        self.known_points.is_empty()
    }

    /// Records that a chunk of `size` items took `duration` on a processor
    /// of speed `speed`, i.e. a unit-speed cost of `duration * speed`.
    pub fn observe(&mut self, size: u64, duration: S, speed: Speed<S>) -> Result<(), AdaptiveError> {
        if size == 0 || !(duration.is_finite() && duration > S::zero()) {
            return Err(AdaptiveError::InvalidObservation {
                size,
                duration: duration.to_f64().unwrap_or(f64::NAN),
            });
        }
        let cost = duration * speed.get();
        match self.known_points.binary_search_by_key(&size, |p| p.size) {
            Ok(i) => {
                let p = &mut self.known_points[i];
                match self.update_strategy {
                    UpdateStrategy::Replace => {
                        p.cost = cost;
                        p.observations = 1;
                    }
                    UpdateStrategy::OccurrenceWeightedMean => {
                        let w = S::from_count(p.observations);
                        p.cost = (p.cost * w + cost) / (w + S::one());
                        p.observations += 1;
                    }
                    UpdateStrategy::Max => {
                        p.cost = p.cost.max(cost);
                        p.observations += 1;
                    }
                }
            }
            Err(i) => self.known_points.insert(
                i,
                KnownPoint {
                    size,
                    cost,
                    observations: 1,
                },
            ),
        }
        self.repair();
        self.evict_to_capacity();
        Ok(())
    }

    /// Restores a non-decreasing cost sequence by pooling adjacent violators
    /// into their observation-weighted mean; conflicting neighbours end up
    /// sharing that mean.
    fn repair(&mut self) {
        // (weight, mean, number of points in block)
        let mut blocks: Vec<(S, S, usize)> = Vec::with_capacity(self.known_points.len());
        for p in &self.known_points {
            blocks.push((S::from_count(p.observations), p.cost, 1));
            while blocks.len() >= 2 {
                let (w2, m2, c2) = blocks[blocks.len() - 1];
                let (w1, m1, c1) = blocks[blocks.len() - 2];
                if m1 <= m2 {
                    break;
                }
                blocks.truncate(blocks.len() - 2);
                let w = w1 + w2;
                blocks.push((w, (m1 * w1 + m2 * w2) / w, c1 + c2));
            }
        }
        if blocks.len() == self.known_points.len() {
            return;
        }
        let mut i = 0;
        for (_, mean, count) in blocks {
            for p in &mut self.known_points[i..i + count] {
                p.cost = mean;
            }
            i += count;
        }
    }

    /// Drops interior points whose removal changes the interpolant least
    /// (smallest triangle with their neighbours) until within capacity.
    fn evict_to_capacity(&mut self) {
        while self.known_points.len() > self.capacity {
            let pts = &self.known_points;
            let area = |i: usize| {
                let (a, b, c) = (&pts[i - 1], &pts[i], &pts[i + 1]);
                let (xa, xb, xc) = (S::from_count(a.size), S::from_count(b.size), S::from_count(c.size));
                ((xb - xa) * (c.cost - a.cost) - (xc - xa) * (b.cost - a.cost)).abs()
            };
            let victim = (1..pts.len() - 1)
                .min_by(|&i, &j| area(i).partial_cmp(&area(j)).unwrap_or(std::cmp::Ordering::Equal))
                .expect("capacity >= 2 leaves an interior point");
            self.known_points.remove(victim);
        }
    }

    /// The model as a table cost function, or `None` while empty.
    ///
    /// Plateaus left by the repair are lifted by a few ulps so the table is
    /// strictly increasing, as cost functions must be.
    pub fn cost_function(&self) -> Option<CostFunction<S>> {
        if self.known_points.is_empty() {
            return None;
        }
        let bump = S::epsilon() * S::lit(16.0);
        let mut prev = S::zero();
        let points = self
            .known_points
            .iter()
            .map(|p| {
                let mut c = p.cost;
                if c <= prev {
                    c = prev + (prev * bump).max(S::min_positive_value());
                }
                prev = c;
                (p.size, c)
            })
            .collect();
        Some(CostFunction::table(points).expect("repaired points are strictly increasing"))
    }

    /// Current estimate of the unit-speed cost of `n` items: exact at known
    /// sizes, linear in between and beyond.
    pub fn interpolate(&self, n: S) -> S {
        if n <= S::zero() {
            return S::zero();
        }
        if self.known_points.is_empty() {
            return self.initial_guess_ratio * n;
        }
        let points: Vec<(u64, S)> = self.known_points.iter().map(|p| (p.size, p.cost)).collect();
        interpolate_points(&points, n)
    }

    /// Plans a batch of `n` items over processors with `speeds`.
    ///
    /// With no observations the split is proportional to speed; afterwards the
    /// deadline `T` is found by bisection over the interpolated model.
    pub fn plan_batch(&self, speeds: &[S], n: u64) -> Result<Partition<S>, AdaptiveError> {
        match self.cost_function() {
            None => {
                let guess = CostFunction::linear()
                    .with_scale(self.initial_guess_ratio)
                    .map_err(PartitionError::from)?;
                Ok(proportional(&ClusterSpec::uniform(speeds, guess)?, n)?)
            }
            Some(f) => Ok(exact_analytic(&ClusterSpec::uniform(speeds, f)?, n)?),
        }
    }
}

/// Outcome of one simulated batch in [`run_batches`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome<S> {
    pub sizes: Vec<u64>,
    /// Actual per-node durations under the true costs.
    pub durations: Vec<S>,
    pub makespan: S,
}

/// Plan → execute → observe loop over successive batches.
///
/// `true_costs[i]` stands in for reality on node `i`: it only produces the
/// durations fed back into the model.
pub fn run_batches<S: Scalar>(
    mut model: LearnedCostModel<S>,
    speeds: &[S],
    batch_sizes: &[u64],
    true_costs: &[CostFunction<S>],
) -> Result<(LearnedCostModel<S>, Vec<BatchOutcome<S>>), AdaptiveError> {
    let truth = ClusterSpec::unrelated(speeds, true_costs.to_vec())?;
    let mut outcomes = Vec::with_capacity(batch_sizes.len());
    for &n in batch_sizes {
        let plan = model.plan_batch(speeds, n)?;
        let actual = Partition::from_sizes(&truth, plan.into_sizes())?;
        for (i, (&size, &duration)) in actual.sizes().iter().zip(actual.projected_times()).enumerate() {
            if size > 0 && duration > S::zero() {
                let speed = Speed::new(speeds[i]).map_err(PartitionError::from)?;
                model.observe(size, duration, speed)?;
            }
        }
        outcomes.push(BatchOutcome {
            sizes: actual.sizes().to_vec(),
            durations: actual.projected_times().to_vec(),
            makespan: actual.makespan(),
        });
    }
    Ok((model, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(v: f64) -> Speed<f64> {
        Speed::new(v).unwrap()
    }

    fn model_with(points: &[(u64, f64)], strategy: UpdateStrategy) -> LearnedCostModel<f64> {
        let mut m = LearnedCostModel::new(strategy, 1.0);
        for &(s, c) in points {
            m.observe(s, c, k(1.0)).unwrap();
        }
        m
    }

    fn is_monotone(m: &LearnedCostModel<f64>) -> bool {
        m.known_points()
            .windows(2)
            .all(|w| w[0].size < w[1].size && w[0].cost <= w[1].cost)
    }

    #[test]
    fn first_observation() {
        let m = model_with(&[(1000, 10.0)], UpdateStrategy::default());
        assert_eq!(
            m.known_points(),
            &[KnownPoint {
                size: 1000,
                cost: 10.0,
                observations: 1
            }]
        );
    }

    #[test]
    fn cost_is_duration_times_speed() {
        let mut m = LearnedCostModel::default();
        m.observe(100, 4.0, k(2.5)).unwrap();
        assert_eq!(m.known_points()[0].cost, 10.0);
    }

    #[test]
    fn repair_merges_conflicting_pair() {
        let mut m = model_with(&[(10, 5.0), (20, 8.0)], UpdateStrategy::Replace);
        m.observe(15, 9.0, k(1.0)).unwrap();
        // 9 at size 15 exceeds 8 at size 20: both take the weighted mean 8.5
        let costs: Vec<f64> = m.known_points().iter().map(|p| p.cost).collect();
        assert_eq!(costs, vec![5.0, 8.5, 8.5]);
        assert!(is_monotone(&m));
    }

    #[test]
    fn repair_pools_longer_runs() {
        let mut m = model_with(&[(10, 5.0), (20, 6.0), (30, 7.0)], UpdateStrategy::Replace);
        m.observe(5, 30.0, k(1.0)).unwrap();
        assert!(is_monotone(&m));
        let costs: Vec<f64> = m.known_points().iter().map(|p| p.cost).collect();
        assert_eq!(costs, vec![12.0; 4]);
    }

    #[test]
    fn weighted_mean_update() {
        let m = model_with(&[(10, 5.0), (10, 7.0)], UpdateStrategy::OccurrenceWeightedMean);
        assert_eq!(
            m.known_points(),
            &[KnownPoint {
                size: 10,
                cost: 6.0,
                observations: 2
            }]
        );
    }

    #[test]
    fn max_and_replace_updates() {
        let m = model_with(&[(10, 5.0), (10, 7.0), (10, 6.0)], UpdateStrategy::Max);
        assert_eq!(m.known_points()[0].cost, 7.0);
        assert_eq!(m.known_points()[0].observations, 3);
        let m = model_with(&[(10, 5.0), (10, 7.0), (10, 6.0)], UpdateStrategy::Replace);
        assert_eq!(m.known_points()[0].cost, 6.0);
        assert_eq!(m.known_points()[0].observations, 1);
    }

    #[test]
    fn rejects_bad_observations() {
        let mut m = LearnedCostModel::<f64>::default();
        assert!(m.observe(0, 1.0, k(1.0)).is_err());
        assert!(m.observe(10, 0.0, k(1.0)).is_err());
        assert!(m.observe(10, f64::NAN, k(1.0)).is_err());
        assert!(m.is_empty());
    }

    #[test]
    fn empty_model_plans_proportionally() {
        let m = LearnedCostModel::<f64>::default();
        assert_eq!(m.plan_batch(&[1.0, 3.0], 8).unwrap().sizes(), &[2, 6]);
    }

    #[test]
    fn linear_table_splits_symmetrically() {
        let m = model_with(&[(10, 10.0), (20, 20.0), (40, 40.0)], UpdateStrategy::Replace);
        assert_eq!(m.plan_batch(&[1.0, 1.0], 10).unwrap().sizes(), &[5, 5]);
    }

    #[test]
    fn learned_quadratic_close_to_true_split() {
        let m = model_with(&[(10, 100.0), (20, 400.0), (40, 1600.0)], UpdateStrategy::Replace);
        let learned = m.plan_batch(&[1.0, 4.0], 50).unwrap();
        let truth = ClusterSpec::uniform(&[1.0, 4.0], CostFunction::power(2.0).unwrap()).unwrap();
        let oracle = exact_analytic(&truth, 50).unwrap();
        for (a, b) in learned.sizes().iter().zip(oracle.sizes()) {
            assert!(a.abs_diff(*b) <= 2, "{:?} vs {:?}", learned.sizes(), oracle.sizes());
        }
    }

    #[test]
    fn extrapolation_is_at_least_the_secant() {
        let m = model_with(&[(1000, 10_000.0)], UpdateStrategy::default());
        assert_eq!(m.interpolate(2000.0), 20_000.0);
        let m = model_with(&[(10, 100.0), (20, 400.0)], UpdateStrategy::default());
        let slope = m.interpolate(31.0) - m.interpolate(30.0);
        assert!(slope >= 400.0 / 20.0);
    }

    #[test]
    fn replace_fixed_point() {
        let mut m = model_with(&[(10, 100.0), (20, 400.0), (40, 1600.0)], UpdateStrategy::Replace);
        let before: Vec<f64> = (0..60).map(|n| m.interpolate(n as f64)).collect();
        let snapshot = m.clone();
        for n in [10u64, 20, 40] {
            let c = m.interpolate(n as f64);
            m.observe(n, c, k(1.0)).unwrap();
        }
        assert_eq!(m, snapshot);
        for n in [15u64, 30, 55] {
            let c = m.interpolate(n as f64);
            m.observe(n, c, k(1.0)).unwrap();
        }
        let after: Vec<f64> = (0..60).map(|n| m.interpolate(n as f64)).collect();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn capacity_evicts_collinear_points_first() {
        let mut m = LearnedCostModel::<f64>::new(UpdateStrategy::Replace, 1.0).with_capacity(3);
        for (s, c) in [(10, 10.0), (20, 20.0), (30, 100.0), (40, 200.0)] {
            m.observe(s, c, k(1.0)).unwrap();
        }
        let sizes: Vec<u64> = m.known_points().iter().map(|p| p.size).collect();
        assert_eq!(sizes.len(), 3);
        assert_eq!(sizes[0], 10);
        assert_eq!(sizes[2], 40);
    }

    #[test]
    fn one_linear_batch_matches_proportional() {
        let speeds = [1.0, 2.5, 4.0];
        let truth = vec![CostFunction::linear(); 3];
        let (_, out) = run_batches(LearnedCostModel::default(), &speeds, &[1000], &truth).unwrap();
        let prop = proportional(&ClusterSpec::uniform(&speeds, CostFunction::linear()).unwrap(), 1000).unwrap();
        assert_eq!(out[0].makespan, prop.makespan());
    }

    #[test]
    fn quadratic_learning_does_not_degrade() {
        let speeds = [1.0, 2.0];
        let truth = vec![CostFunction::power(2.0).unwrap(); 2];
        let (_, out) = run_batches(LearnedCostModel::default(), &speeds, &[1000; 10], &truth).unwrap();
        assert!(out[9].makespan <= out[0].makespan);
    }

    #[test]
    fn growing_nlogn_batches_learn_the_curve() {
        let speeds = [1.0, 1.5, 2.0];
        let truth = vec![CostFunction::nlogn(); 3];
        let batches: Vec<u64> = (1..=12).map(|i| 1000 * i).collect();
        let (model, _) = run_batches(LearnedCostModel::default(), &speeds, &batches, &truth).unwrap();
        let f = CostFunction::<f64>::nlogn();
        for n in [500.0, 1000.0, 2500.0, 4000.0, 6000.0] {
            let rel = (model.interpolate(n) - f.evaluate(n)).abs() / f.evaluate(n);
            assert!(rel < 0.10, "n={n} rel={rel}");
        }
    }

    #[test]
    fn json_persistence() {
        let m = model_with(&[(10, 100.0), (20, 400.0)], UpdateStrategy::Max);
        let text = serde_json::to_string(&m).unwrap();
        let back: LearnedCostModel<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let broken = r#"{"known_points":[{"size":20,"cost":5.0,"observations":1},{"size":10,"cost":6.0,"observations":1}],"initial_guess_ratio":1.0}"#;
        assert!(serde_json::from_str::<LearnedCostModel<f64>>(broken).is_err());
    }
}
