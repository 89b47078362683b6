//! Associative SOM: a main weight bank plus `r` ancillary banks per neuron.
//!
//! The main bank learns like a plain SOM. Each ancillary bank `p` is pushed so
//! that its activity `y^p_ij = <x^p, w^p_ij>` tracks the main activity
//! `y^a_ij = exp(-‖x^a - w^a_ij‖ / σ_act)`:
//!
//! ```text
//! w^p_ijl += α(t) · x^p_l · (y^a_ij - y^p_ij)
//! ```
//!
//! At the end of every epoch (one pass-length of the main dataset) each
//! weight vector of every bank is scaled to unit length.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::som::{
    adapt, check_rows, check_shape, distance, quantization_error, seeded, uniform_weights,
    Codebook, Schedule, SomError, SomGrid,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsomOptions {
    /// Length scale of the main activity.
    pub activity_sigma: f64,
    /// Unit-normalize banks after initialization and at each epoch end.
    pub normalize: bool,
}

impl Default for AsomOptions {
    fn default() -> Self {
        AsomOptions {
            activity_sigma: 1.0,
            normalize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bank {
    pub dim: usize,
    pub weights: Vec<f64>,
}

impl Bank {
    fn vector(&self, idx: usize) -> &[f64] {
        &self.weights[idx * self.dim..(idx + 1) * self.dim]
    }

    fn normalize(&mut self) {
        for w in self.weights.chunks_exact_mut(self.dim) {
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                w.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .chunks_exact(self.dim)
            .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsomGrid {
    pub rows: usize,
    pub cols: usize,
    pub main: Bank,
    pub ancillary: Vec<Bank>,
    pub options: AsomOptions,
    pub rng_seed: u64,
}

impl Codebook for AsomGrid {
    fn grid_rows(&self) -> usize {
        self.rows
    }
    fn grid_cols(&self) -> usize {
        self.cols
    }
    fn dim(&self) -> usize {
        self.main.dim
    }
    fn weights(&self) -> &[f64] {
        &self.main.weights
    }
}

pub fn init_asom(
    rows: usize,
    cols: usize,
    main_dim: usize,
    ancillary_dims: &[usize],
    seed: u64,
) -> Result<AsomGrid, SomError> {
    init_asom_with(rows, cols, main_dim, ancillary_dims, seed, AsomOptions::default())
}

/// Draws the main bank first from the seeded stream (so with normalization
/// off it equals [`crate::som::init_grid`] for the same seed), then each
/// ancillary bank in order.
pub fn init_asom_with(
    rows: usize,
    cols: usize,
    main_dim: usize,
    ancillary_dims: &[usize],
    seed: u64,
    options: AsomOptions,
) -> Result<AsomGrid, SomError> {
    let mut dims = vec![main_dim];
    dims.extend_from_slice(ancillary_dims);
    check_shape(rows, cols, &dims)?;
    let n = rows * cols;
    let mut rng = seeded(seed);
    let main = Bank {
        dim: main_dim,
        weights: uniform_weights(&mut rng, n * main_dim),
    };
    let ancillary = ancillary_dims
        .iter()
        .map(|&d| Bank {
            dim: d,
            weights: uniform_weights(&mut rng, n * d),
        })
        .collect();
    let mut grid = AsomGrid {
        rows,
        cols,
        main,
        ancillary,
        options,
        rng_seed: seed,
    };
    if options.normalize {
        grid.normalize_banks();
    }
    Ok(grid)
}

impl AsomGrid {
    pub fn r(&self) -> usize {
        self.ancillary.len()
    }

    /// Total number of weight vectors, `rows · cols · (r + 1)`.
    pub fn weight_count(&self) -> usize {
        self.rows * self.cols * (self.r() + 1)
    }

    pub fn normalize_banks(&mut self) {
        self.main.normalize();
        self.ancillary.iter_mut().for_each(Bank::normalize);
    }

    /// `y^a_ij = exp(-‖x^a - w^a_ij‖ / σ_act)` for every neuron.
    pub fn main_activity(&self, x: &[f64]) -> Result<Vec<f64>, SomError> {
        if x.len() != self.main.dim {
            return Err(SomError::DimensionMismatch {
                expected: self.main.dim,
                found: x.len(),
            });
        }
        let s = self.options.activity_sigma;
        Ok((0..self.neuron_count())
            .map(|j| (-distance(self.main.vector(j), x) / s).exp())
            .collect())
    }

    /// `y^p_ij = <x^p, w^p_ij>` for ancillary bank `p`.
    pub fn ancillary_activity(&self, p: usize, x: &[f64]) -> Result<Vec<f64>, SomError> {
        let bank = &self.ancillary[p];
        if x.len() != bank.dim {
            return Err(SomError::DimensionMismatch {
                expected: bank.dim,
                found: x.len(),
            });
        }
        Ok((0..self.neuron_count())
            .map(|j| bank.vector(j).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }

    /// The main bank as a plain SOM grid.
    pub fn main_grid(&self) -> SomGrid {
        SomGrid {
            rows: self.rows,
            cols: self.cols,
            dim: self.main.dim,
            weights: self.main.weights.clone(),
            rng_seed: self.rng_seed,
        }
    }

    /// One coupled update at time `t` with aligned main / ancillary inputs.
    pub fn train_step(
        &mut self,
        x_main: &[f64],
        x_anc: &[&[f64]],
        t: usize,
        schedule: &Schedule,
    ) -> Result<usize, SomError> {
        if x_anc.len() != self.r() {
            return Err(SomError::DimensionMismatch {
                expected: self.r(),
                found: x_anc.len(),
            });
        }
        let bmu = self.find_bmu(x_main)?;
        let alpha = schedule.eta(t);
        // Activities use the weights at time t, before either bank moves.
        let y_main = if self.r() > 0 {
            self.main_activity(x_main)?
        } else {
            Vec::new()
        };
        let y_anc = x_anc
            .iter()
            .enumerate()
            .map(|(p, x)| self.ancillary_activity(p, x))
            .collect::<Result<Vec<_>, _>>()?;
        adapt(
            &mut self.main.weights,
            self.cols,
            self.main.dim,
            bmu,
            x_main,
            alpha,
            schedule.sigma(t),
        );
        for ((bank, x), y_p) in self.ancillary.iter_mut().zip(x_anc).zip(&y_anc) {
            for (j, w) in bank.weights.chunks_exact_mut(bank.dim).enumerate() {
                let gap = y_main[j] - y_p[j];
                for (wl, xl) in w.iter_mut().zip(x.iter()) {
                    *wl += alpha * xl * gap;
                }
            }
        }
        Ok(bmu)
    }
}

/// Trains for `schedule.total_iters` iterations, sampling aligned row indices
/// uniformly with replacement. Returns the main-bank quantization error at
/// each epoch end.
pub fn train_asom(
    grid: &mut AsomGrid,
    main_rows: &[Vec<f64>],
    ancillary_rows: &[Vec<Vec<f64>>],
    schedule: &Schedule,
    seed: u64,
) -> Result<Vec<f64>, SomError> {
    train_asom_observed(grid, main_rows, ancillary_rows, schedule, seed, |_, _| {})
}

/// [`train_asom`] with a callback invoked after each epoch's normalization,
/// receiving the 1-based epoch number and the grid.
pub fn train_asom_observed(
    grid: &mut AsomGrid,
    main_rows: &[Vec<f64>],
    ancillary_rows: &[Vec<Vec<f64>>],
    schedule: &Schedule,
    seed: u64,
    mut on_epoch: impl FnMut(usize, &AsomGrid),
) -> Result<Vec<f64>, SomError> {
    if schedule.total_iters == 0 {
        return Ok(Vec::new());
    }
    check_rows(main_rows, grid.main.dim)?;
    if ancillary_rows.len() != grid.r() {
        return Err(SomError::DimensionMismatch {
            expected: grid.r(),
            found: ancillary_rows.len(),
        });
    }
    for (bank, rows) in grid.ancillary.iter().zip(ancillary_rows) {
        if rows.len() != main_rows.len() {
            return Err(SomError::RowMisalignment {
                main: main_rows.len(),
                ancillary: rows.len(),
            });
        }
        check_rows(rows, bank.dim)?;
    }
    let n = main_rows.len();
    let mut rng = seeded(seed);
    let mut history = Vec::with_capacity(schedule.total_iters / n + 1);
    for t in 0..schedule.total_iters {
        let idx = rng.gen_range(0..n);
        let anc: Vec<&[f64]> = ancillary_rows.iter().map(|r| r[idx].as_slice()).collect();
        grid.train_step(&main_rows[idx], &anc, t, schedule)?;
        if (t + 1) % n == 0 {
            if grid.options.normalize {
                grid.normalize_banks();
            }
            history.push(quantization_error(grid, main_rows)?);
            on_epoch(history.len(), grid);
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::{init_grid, train};

    fn no_norm() -> AsomOptions {
        AsomOptions {
            activity_sigma: 1.0,
            normalize: false,
        }
    }

    #[test]
    fn counts() {
        assert_eq!(init_asom(20, 20, 8, &[12], 1).unwrap().weight_count(), 800);
        assert_eq!(init_asom(20, 20, 8, &[], 1).unwrap().weight_count(), 400);
        assert_eq!(init_asom(1, 1, 2, &[1, 1, 1], 1).unwrap().weight_count(), 4);
    }

    #[test]
    fn init_is_unit_norm_and_deterministic() {
        let g = init_asom(4, 5, 3, &[6, 2], 9).unwrap();
        for bank in std::iter::once(&g.main).chain(&g.ancillary) {
            assert!(bank.norms().all(|n| (n - 1.0).abs() < 1e-9));
        }
        assert_eq!(g, init_asom(4, 5, 3, &[6, 2], 9).unwrap());
        assert!(init_asom(4, 5, 3, &[0], 9).is_err());
    }

    #[test]
    fn unnormalized_main_matches_som_init() {
        let a = init_asom_with(3, 3, 4, &[2], 5, no_norm()).unwrap();
        assert_eq!(a.main.weights, init_grid(3, 3, 4, 5).unwrap().weights);
    }

    #[test]
    fn activity_values() {
        let mut g = init_asom_with(1, 2, 1, &[], 0, no_norm()).unwrap();
        g.main.weights = vec![1.0, 2.0];
        let y = g.main_activity(&[0.0]).unwrap();
        assert!((y[0] - (-1f64).exp()).abs() < 1e-12);
        assert!((y[1] - (-2f64).exp()).abs() < 1e-12);
        assert_eq!(g.main_activity(&[1.0]).unwrap()[0], 1.0);
        assert!(g.main_activity(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn activity_argmax_is_bmu() {
        let g = init_asom(6, 6, 4, &[], 3).unwrap();
        let x = [0.2, 0.9, 0.1, 0.5];
        let y = g.main_activity(&x).unwrap();
        let argmax = (0..y.len()).fold(0, |b, j| if y[j] > y[b] { j } else { b });
        assert_eq!(argmax, g.find_bmu(&x).unwrap());
        assert!(y.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    fn zero_rate_is_noop() {
        let mut g = init_asom(3, 3, 2, &[3], 4).unwrap();
        let before = g.clone();
        let s = Schedule {
            eta0: 0.0,
            ..Schedule::for_grid(10, 3, 3)
        };
        g.train_step(&[0.5, 0.5], &[&[1.0, 0.0, 0.0]], 0, &s).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn ancillary_fixed_point() {
        // With y^p = y^a for every neuron the ancillary bank must not move.
        let mut g = init_asom_with(1, 2, 1, &[1], 0, no_norm()).unwrap();
        g.main.weights = vec![0.0, 1.0];
        let x_main = [0.0];
        let y = g.main_activity(&x_main).unwrap();
        // x^p = 1 so y^p_j = w^p_j; choose w^p = y^a.
        g.ancillary[0].weights = y.clone();
        let before = g.ancillary[0].clone();
        g.train_step(&x_main, &[&[1.0]], 0, &Schedule::for_grid(10, 1, 2))
            .unwrap();
        assert_eq!(g.ancillary[0], before);
    }

    #[test]
    fn reduction_to_som() {
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|i| vec![i as f64 / 7.0, (i * i % 5) as f64 / 5.0])
            .collect();
        let s = Schedule::for_grid(300, 4, 4);
        let mut som = init_grid(4, 4, 2, 21).unwrap();
        let mut asom = init_asom_with(4, 4, 2, &[], 21, no_norm()).unwrap();
        let h1 = train(&mut som, &rows, &s, 8).unwrap();
        let h2 = train_asom(&mut asom, &rows, &[], &s, 8).unwrap();
        assert_eq!(som.weights, asom.main.weights);
        assert_eq!(h1, h2);
    }

    #[test]
    fn epoch_normalization() {
        let main: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0, 1.0]).collect();
        let anc: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut g = init_asom(3, 3, 2, &[5], 2).unwrap();
        // 10 iterations = two full epochs, so the last step is an epoch end.
        let h = train_asom(&mut g, &main, &[anc], &Schedule::for_grid(10, 3, 3), 1).unwrap();
        assert_eq!(h.len(), 2);
        for bank in std::iter::once(&g.main).chain(&g.ancillary) {
            assert!(bank.norms().all(|n| (n - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn misaligned_rows() {
        let mut g = init_asom(2, 2, 1, &[2], 0).unwrap();
        let err = train_asom(
            &mut g,
            &[vec![0.0], vec![1.0]],
            &[vec![vec![1.0, 0.0]]],
            &Schedule::for_grid(4, 2, 2),
            0,
        );
        assert_eq!(
            err,
            Err(SomError::RowMisalignment {
                main: 2,
                ancillary: 1
            })
        );
        assert!(matches!(
            train_asom(&mut g, &[vec![0.0]], &[], &Schedule::for_grid(4, 2, 2), 0),
            Err(SomError::DimensionMismatch { .. })
        ));
    }
}
