//! Sparse training observations drawn from a ground-truth field.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lwr::{DensityField, Environment, Grid};

/// One observation `rho(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub t: f64,
    pub rho: f64,
}

/// Training points with the environment and grid they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Sample>,
    source_env: Environment,
    source_grid: Grid,
    seed: u64,
}

impl SampleSet {
    pub fn new(points: Vec<Sample>, source_env: Environment, source_grid: Grid, seed: u64) -> Result<Self> {
        let mut seen = HashSet::with_capacity(points.len());
        for s in &points {
            if !source_grid.contains(s.x, s.t) {
                return Err(Error::InvalidSamples(format!(
                    "point ({}, {}) outside the source grid",
                    s.x, s.t
                )));
            }
            if !(0.0..=source_env.rho_m()).contains(&s.rho) {
                return Err(Error::InvalidSamples(format!(
                    "density {} at ({}, {}) outside [0, {}]",
                    s.rho,
                    s.x,
                    s.t,
                    source_env.rho_m()
                )));
            }
            if !seen.insert((s.x.to_bits(), s.t.to_bits())) {
                return Err(Error::InvalidSamples(format!("duplicate point ({}, {})", s.x, s.t)));
            }
        }
        Ok(Self {
            points,
            source_env,
            source_grid,
            seed,
        })
    }

    /// Every node of `field`, in storage order.
    pub fn full_grid(field: &DensityField) -> Result<Self> {
        let grid = *field.grid();
        let mut points = Vec::with_capacity(grid.node_count());
        for i in 0..grid.nx() {
            for n in 0..grid.nt() {
                points.push(Sample {
                    x: grid.x(i),
                    t: grid.t(n),
                    rho: field.get(i, n),
                });
            }
        }
        Self::new(points, *field.env(), grid, 0)
    }

    /// Skips validation; lets tests build targets outside the physical range.
    #[cfg(test)]
    pub(crate) fn new_unchecked(points: Vec<Sample>, like: &SampleSet) -> Self {
        Self { points, ..like.clone() }
    }

    pub fn points(&self) -> &[Sample] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source_env(&self) -> &Environment {
        &self.source_env
    }

    pub fn source_grid(&self) -> &Grid {
        &self.source_grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `self` followed by `newer`. Where both observe the same `(x, t)`,
    /// the newer observation replaces the older one in place. The result
    /// carries `newer`'s environment and seed; both sets must share a grid.
    pub fn union(&self, newer: &SampleSet) -> Result<SampleSet> {
        if self.source_grid != newer.source_grid {
            return Err(Error::InvalidSamples("sample sets come from different grids".into()));
        }
        let mut index = std::collections::HashMap::with_capacity(self.len() + newer.len());
        let mut points = self.points.clone();
        for (k, s) in points.iter().enumerate() {
            index.insert((s.x.to_bits(), s.t.to_bits()), k);
        }
        for s in &newer.points {
            match index.get(&(s.x.to_bits(), s.t.to_bits())) {
                Some(&k) => points[k] = *s,
                None => {
                    index.insert((s.x.to_bits(), s.t.to_bits()), points.len());
                    points.push(*s);
                }
            }
        }
        let rho_m = self.source_env.rho_m().min(newer.source_env.rho_m());
        if points.iter().any(|s| s.rho > rho_m) {
            return Err(Error::InvalidSamples(
                "union exceeds the newer environment's jam density".into(),
            ));
        }
        Ok(SampleSet {
            points,
            source_env: newer.source_env,
            source_grid: newer.source_grid,
            seed: newer.seed,
        })
    }
}

/// `count` distinct grid nodes chosen uniformly without replacement, listed
/// in storage order. Deterministic in `seed`.
pub fn sample_dataset(field: &DensityField, count: usize, seed: u64) -> Result<SampleSet> {
    let grid = *field.grid();
    let total = grid.node_count();
    if count > total {
        return Err(Error::InvalidSamples(format!(
            "requested {count} samples from {total} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, total, count).into_vec();
    chosen.sort_unstable();
    let nt = grid.nt();
    let points = chosen
        .into_iter()
        .map(|k| {
            let (i, n) = (k / nt, k % nt);
            Sample {
                x: grid.x(i),
                t: grid.t(n),
                rho: field.get(i, n),
            }
        })
        .collect();
    SampleSet::new(points, *field.env(), grid, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(grid: Grid) -> DensityField {
        DensityField::from_fn(grid, Environment::paper(), |x, t| 0.01 + 5e-5 * x + 1e-3 * t).unwrap()
    }

    #[test]
    fn exhaustive_sampling_hits_every_node_once() {
        let grid = Grid::new(0.0, 20.0, 2.0, 1.0, 0.1).unwrap();
        let f = field(grid);
        let s = sample_dataset(&f, grid.node_count(), 5).unwrap();
        assert_eq!(s.len(), grid.node_count());
        assert_eq!(
            s,
            SampleSet {
                seed: 5,
                ..SampleSet::full_grid(&f).unwrap()
            }
        );
    }

    #[test]
    fn six_percent_of_default_grid() {
        let grid = Grid::paper();
        let s = sample_dataset(&field(grid), 15_000, 1).unwrap();
        assert_eq!(grid.node_count(), 250_000);
        assert_eq!(s.len() as f64 / grid.node_count() as f64, 0.06);
    }

    #[test]
    fn sampling_is_seeded() {
        let f = field(Grid::new(0.0, 100.0, 2.0, 5.0, 0.1).unwrap());
        let a = sample_dataset(&f, 300, 9).unwrap();
        assert_eq!(a, sample_dataset(&f, 300, 9).unwrap());
        assert_ne!(a.points(), sample_dataset(&f, 300, 10).unwrap().points());
    }

    #[test]
    fn too_many_samples_rejected() {
        let grid = Grid::new(0.0, 4.0, 2.0, 0.1, 0.1).unwrap();
        assert!(sample_dataset(&field(grid), 7, 0).is_err());
    }

    #[test]
    fn invariants_enforced() {
        let grid = Grid::new(0.0, 4.0, 2.0, 0.2, 0.1).unwrap();
        let env = Environment::paper();
        let p = |x, t, rho| Sample { x, t, rho };
        assert!(SampleSet::new(vec![p(6.0, 0.0, 0.1)], env, grid, 0).is_err());
        assert!(SampleSet::new(vec![p(2.0, 0.0, 0.2)], env, grid, 0).is_err());
        assert!(SampleSet::new(vec![p(2.0, 0.1, 0.1), p(2.0, 0.1, 0.05)], env, grid, 0).is_err());
        assert!(SampleSet::new(vec![p(2.0, 0.1, 0.1), p(4.0, 0.1, 0.05)], env, grid, 0).is_ok());
    }

    #[test]
    fn union_prefers_newer_observations() {
        let grid = Grid::new(0.0, 4.0, 2.0, 0.2, 0.1).unwrap();
        let p = |x, t, rho| Sample { x, t, rho };
        let old = SampleSet::new(vec![p(0.0, 0.0, 0.1), p(2.0, 0.0, 0.1)], Environment::paper(), grid, 1).unwrap();
        let new_env = Environment::new(15.0, 0.15).unwrap();
        let new = SampleSet::new(vec![p(2.0, 0.0, 0.05), p(4.0, 0.2, 0.07)], new_env, grid, 2).unwrap();
        let u = old.union(&new).unwrap();
        assert_eq!(u.points(), &[p(0.0, 0.0, 0.1), p(2.0, 0.0, 0.05), p(4.0, 0.2, 0.07)]);
        assert_eq!(u.source_env(), &new_env);
        assert_eq!(u.seed(), 2);
        assert_eq!(old.union(&old).unwrap().points(), old.points());
    }
}
