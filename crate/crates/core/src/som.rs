//! Kohonen self-organizing map on a rectangular lattice.
//!
//! Neurons are addressed by their row-major linear index. Competition picks
//! the neuron at minimum Euclidean distance (ties go to the lowest index) and
//! adaptation moves every neuron toward the sample, scaled by the learning
//! rate and a Gaussian of the lattice distance to the winner.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SomError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("ancillary dataset has {ancillary} rows, main dataset has {main}")]
    RowMisalignment { main: usize, ancillary: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
}

pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A lattice of weight vectors that competition can be run against.
pub trait Codebook {
    fn grid_rows(&self) -> usize;
    fn grid_cols(&self) -> usize;
    fn dim(&self) -> usize;
    /// Row-major `rows × cols × dim` weights.
    fn weights(&self) -> &[f64];

    fn neuron_count(&self) -> usize {
        self.grid_rows() * self.grid_cols()
    }

    fn neuron(&self, idx: usize) -> &[f64] {
        let d = self.dim();
        &self.weights()[idx * d..(idx + 1) * d]
    }

    fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.grid_cols(), idx % self.grid_cols())
    }

    /// Index of the best-matching unit; ties resolve to the lowest index.
    fn find_bmu(&self, x: &[f64]) -> Result<usize, SomError> {
        if x.len() != self.dim() {
            return Err(SomError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for j in 0..self.neuron_count() {
            let d = squared_distance(self.neuron(j), x);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        Ok(best)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Squared Euclidean distance between two neurons' lattice coordinates.
pub fn lattice_distance2(cols: usize, a: usize, b: usize) -> f64 {
    let (ra, ca) = ((a / cols) as f64, (a % cols) as f64);
    let (rb, cb) = ((b / cols) as f64, (b % cols) as f64);
    (ra - rb).powi(2) + (ca - cb).powi(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub rng_seed: u64,
}

impl Codebook for SomGrid {
    fn grid_rows(&self) -> usize {
        self.rows
    }
    fn grid_cols(&self) -> usize {
        self.cols
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub(crate) fn check_shape(rows: usize, cols: usize, dims: &[usize]) -> Result<(), SomError> {
    if rows == 0 || cols == 0 {
        return Err(SomError::InvalidDimension(format!(
            "grid must be at least 1x1, got {rows}x{cols}"
        )));
    }
    if dims.contains(&0) {
        return Err(SomError::InvalidDimension("input dimension must be >= 1".into()));
    }
    Ok(())
}

pub(crate) fn uniform_weights(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen::<f64>()).collect()
}

/// Uniform `[0, 1)` weights drawn from a ChaCha8 stream seeded with `seed`.
pub fn init_grid(rows: usize, cols: usize, dim: usize, seed: u64) -> Result<SomGrid, SomError> {
    check_shape(rows, cols, &[dim])?;
    let mut rng = seeded(seed);
    Ok(SomGrid {
        rows,
        cols,
        dim,
        weights: uniform_weights(&mut rng, rows * cols * dim),
        rng_seed: seed,
    })
}

/// Exponentially decaying learning rate and neighbourhood radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub total_iters: usize,
    pub eta0: f64,
    pub tau_eta: f64,
    pub sigma0: f64,
    pub tau_sigma: f64,
}

impl Schedule {
    /// Defaults: η₀ = 0.5, τ_η = T/4, σ₀ = max(rows, cols)/2, τ_σ = T / ln σ₀.
    pub fn for_grid(total_iters: usize, rows: usize, cols: usize) -> Self {
        let t = total_iters.max(1) as f64;
        let sigma0 = (rows.max(cols) as f64 / 2.0).max(1.0);
        let tau_sigma = if sigma0 > 1.0 { t / sigma0.ln() } else { t };
        Schedule {
            total_iters,
            eta0: 0.5,
            tau_eta: t / 4.0,
            sigma0,
            tau_sigma,
        }
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.eta0 * (-(t as f64) / self.tau_eta).exp()
    }

    pub fn sigma(&self, t: usize) -> f64 {
        (self.sigma0 * (-(t as f64) / self.tau_sigma).exp()).max(1.0)
    }
}

/// Moves every neuron toward `x` by `eta · exp(-d²/(2σ²)) · (x - w)`.
pub(crate) fn adapt(
    weights: &mut [f64],
    cols: usize,
    dim: usize,
    bmu: usize,
    x: &[f64],
    eta: f64,
    sigma: f64,
) {
    let two_sigma2 = 2.0 * sigma * sigma;
    for (j, w) in weights.chunks_exact_mut(dim).enumerate() {
        let theta = (-lattice_distance2(cols, j, bmu) / two_sigma2).exp();
        let rate = eta * theta;
        for (wk, xk) in w.iter_mut().zip(x) {
            *wk += rate * (xk - *wk);
        }
    }
}

/// One competition + adaptation step at time `t`. Returns the BMU.
pub fn train_step(
    grid: &mut SomGrid,
    x: &[f64],
    t: usize,
    schedule: &Schedule,
) -> Result<usize, SomError> {
    let bmu = grid.find_bmu(x)?;
    adapt(
        &mut grid.weights,
        grid.cols,
        grid.dim,
        bmu,
        x,
        schedule.eta(t),
        schedule.sigma(t),
    );
    Ok(bmu)
}

pub(crate) fn check_rows(rows: &[Vec<f64>], dim: usize) -> Result<(), SomError> {
    if rows.is_empty() {
        return Err(SomError::EmptyDataset);
    }
    match rows.iter().find(|r| r.len() != dim) {
        Some(r) => Err(SomError::DimensionMismatch {
            expected: dim,
            found: r.len(),
        }),
        None => Ok(()),
    }
}

/// Runs `schedule.total_iters` steps, sampling rows uniformly with
/// replacement. Returns the quantization error recorded after every
/// `rows.len()` iterations.
pub fn train(
    grid: &mut SomGrid,
    rows: &[Vec<f64>],
    schedule: &Schedule,
    seed: u64,
) -> Result<Vec<f64>, SomError> {
    if schedule.total_iters == 0 {
        return Ok(Vec::new());
    }
    check_rows(rows, grid.dim)?;
    let mut rng = seeded(seed);
    let mut history = Vec::with_capacity(schedule.total_iters / rows.len() + 1);
    for t in 0..schedule.total_iters {
        let x = &rows[rng.gen_range(0..rows.len())];
        train_step(grid, x, t, schedule)?;
        if (t + 1) % rows.len() == 0 {
            history.push(quantization_error(grid, rows)?);
        }
    }
    Ok(history)
}

/// Mean distance from each row to its BMU.
pub fn quantization_error<C: Codebook + ?Sized>(grid: &C, rows: &[Vec<f64>]) -> Result<f64, SomError> {
    check_rows(rows, grid.dim())?;
    let mut total = 0.0;
    for x in rows {
        let bmu = grid.find_bmu(x)?;
        total += distance(grid.neuron(bmu), x);
    }
    Ok(total / rows.len() as f64)
}

/// Per-neuron predicate labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledMap {
    pub rows: usize,
    pub cols: usize,
    pub labels: Vec<Option<usize>>,
    /// Hit counts per label for neurons that won at least one row.
    pub hits: Vec<BTreeMap<usize, usize>>,
}

fn majority(counts: &BTreeMap<usize, usize>) -> Option<usize> {
    // BTreeMap iterates labels ascending, so strict `>` keeps the lowest on ties.
    let mut best: Option<(usize, usize)> = None;
    for (&label, &n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((label, n));
        }
    }
    best.map(|(l, _)| l)
}

impl LabeledMap {
    /// A map with no labelled neurons.
    pub fn empty(rows: usize, cols: usize) -> Self {
        LabeledMap {
            rows,
            cols,
            labels: vec![None; rows * cols],
            hits: vec![BTreeMap::new(); rows * cols],
        }
    }

    pub fn label(&self, idx: usize) -> Option<usize> {
        self.labels.get(idx).copied().flatten()
    }

    /// The `k` labelled neurons closest to `idx` on the lattice (including
    /// `idx` itself), ordered by distance then index.
    pub fn nearest_labeled(&self, idx: usize, k: usize) -> Vec<usize> {
        let mut cands: Vec<(u64, usize)> = (0..self.labels.len())
            .filter(|&j| self.labels[j].is_some())
            .map(|j| (lattice_distance2(self.cols, idx, j) as u64, j))
            .collect();
        cands.sort_unstable();
        cands.into_iter().take(k).map(|(_, j)| j).collect()
    }

    /// Label tally over the `k` nearest labelled neurons.
    pub fn votes(&self, idx: usize, k: usize) -> BTreeMap<usize, usize> {
        let mut tally = BTreeMap::new();
        for j in self.nearest_labeled(idx, k) {
            if let Some(l) = self.labels[j] {
                *tally.entry(l).or_insert(0) += 1;
            }
        }
        tally
    }

    /// Majority of [`votes`](Self::votes); ties go to the lower label.
    pub fn winning_label(&self, idx: usize, k: usize) -> Option<usize> {
        majority(&self.votes(idx, k))
    }
}

/// Labels each neuron by majority vote of the rows it wins; neurons that win
/// nothing take the label of the nearest voted neuron.
pub fn label_map<C: Codebook + ?Sized>(
    grid: &C,
    rows: &[Vec<f64>],
    labels: &[usize],
) -> Result<LabeledMap, SomError> {
    if rows.len() != labels.len() {
        return Err(SomError::LabelMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let (r, c) = (grid.grid_rows(), grid.grid_cols());
    let mut map = LabeledMap::empty(r, c);
    for (x, &label) in rows.iter().zip(labels) {
        let bmu = grid.find_bmu(x)?;
        *map.hits[bmu].entry(label).or_insert(0) += 1;
    }
    let voted: Vec<(usize, usize)> = map
        .hits
        .iter()
        .enumerate()
        .filter_map(|(j, h)| majority(h).map(|l| (j, l)))
        .collect();
    if voted.is_empty() {
        return Ok(map);
    }
    for j in 0..r * c {
        let mut best = (f64::INFINITY, 0);
        for &(v, l) in &voted {
            let d = lattice_distance2(c, j, v);
            if d < best.0 {
                best = (d, l);
            }
        }
        map.labels[j] = Some(best.1);
    }
    Ok(map)
}

/// Fraction of rows whose BMU's 3×3 lattice neighbourhood (clipped at the
/// border) has a majority label equal to the row's own label.
pub fn neighborhood_purity<C: Codebook + ?Sized>(
    grid: &C,
    map: &LabeledMap,
    rows: &[Vec<f64>],
    labels: &[usize],
) -> Result<f64, SomError> {
    check_rows(rows, grid.dim())?;
    if rows.len() != labels.len() {
        return Err(SomError::LabelMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let mut agree = 0usize;
    for (x, &label) in rows.iter().zip(labels) {
        let bmu = grid.find_bmu(x)?;
        let (br, bc) = grid.coords(bmu);
        let mut tally = BTreeMap::new();
        for rr in br.saturating_sub(1)..=(br + 1).min(map.rows - 1) {
            for cc in bc.saturating_sub(1)..=(bc + 1).min(map.cols - 1) {
                if let Some(l) = map.label(rr * map.cols + cc) {
                    *tally.entry(l).or_insert(0) += 1;
                }
            }
        }
        if majority(&tally) == Some(label) {
            agree += 1;
        }
    }
    Ok(agree as f64 / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_from(rows: usize, cols: usize, dim: usize, weights: Vec<f64>) -> SomGrid {
        SomGrid {
            rows,
            cols,
            dim,
            weights,
            rng_seed: 0,
        }
    }

    fn fixed_schedule(eta0: f64, sigma0: f64) -> Schedule {
        Schedule {
            total_iters: 10,
            eta0,
            tau_eta: 1e300,
            sigma0,
            tau_sigma: 1e300,
        }
    }

    #[test]
    fn init_shape_and_range() {
        let g = init_grid(20, 20, 8, 7).unwrap();
        assert_eq!(g.weights.len(), 400 * 8);
        assert_eq!(g.neuron_count(), 400);
        assert!(g.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        assert_eq!(g, init_grid(20, 20, 8, 7).unwrap());
        assert_ne!(g.weights, init_grid(20, 20, 8, 8).unwrap().weights);
        assert_eq!(init_grid(1, 1, 1, 3).unwrap().weights.len(), 1);
    }

    #[test]
    fn init_rejects_zero_dims() {
        assert!(matches!(init_grid(0, 2, 1, 0), Err(SomError::InvalidDimension(_))));
        assert!(matches!(init_grid(2, 2, 0, 0), Err(SomError::InvalidDimension(_))));
    }

    #[test]
    fn bmu_hand_cases() {
        let g = grid_from(2, 2, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(g.find_bmu(&[0.1, 0.2]).unwrap(), 0);
        assert_eq!(g.find_bmu(&[1.0, 0.0]).unwrap(), 2);
        // equidistant from (0,0) and (0,1)
        assert_eq!(g.find_bmu(&[0.0, 0.5]).unwrap(), 0);
        assert_eq!(
            g.find_bmu(&[0.0]),
            Err(SomError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn step_hand_oracle() {
        let mut g = grid_from(1, 2, 1, vec![0.0, 1.0]);
        let s = fixed_schedule(0.5, 1.0);
        train_step(&mut g, &[0.0], 0, &s).unwrap();
        let expected = 1.0 + 0.5 * (-0.5f64).exp() * (0.0 - 1.0);
        assert_eq!(g.weights[0], 0.0);
        assert!((g.weights[1] - expected).abs() < 1e-12);
        assert!((g.weights[1] - 0.6967).abs() < 1e-4);
    }

    #[test]
    fn zero_rate_is_noop() {
        let mut g = init_grid(3, 3, 2, 1).unwrap();
        let before = g.clone();
        train_step(&mut g, &[0.3, 0.9], 0, &fixed_schedule(0.0, 2.0)).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn single_neuron_fixed_point() {
        let mut g = init_grid(1, 1, 3, 1).unwrap();
        train_step(&mut g, &[0.2, 0.4, 0.6], 0, &fixed_schedule(1.0, 1.0)).unwrap();
        assert_eq!(g.weights, vec![0.2, 0.4, 0.6]);
    }

    #[test]
    fn schedule_defaults() {
        let s = Schedule::for_grid(10_000, 20, 20);
        assert_eq!(s.eta0, 0.5);
        assert_eq!(s.sigma0, 10.0);
        assert!((s.eta(2500) - 0.5 * (-1f64).exp()).abs() < 1e-12);
        assert!((s.sigma(10_000) - 1.0).abs() < 1e-9);
        assert_eq!(s.sigma(20_000), 1.0);
        assert!(s.eta(9_999) > 0.0);
    }

    #[test]
    fn zero_iterations() {
        let mut g = init_grid(2, 2, 1, 0).unwrap();
        let before = g.clone();
        let h = train(&mut g, &[vec![0.5]], &Schedule::for_grid(0, 2, 2), 1).unwrap();
        assert!(h.is_empty());
        assert_eq!(g, before);
    }

    #[test]
    fn train_errors() {
        let mut g = init_grid(2, 2, 2, 0).unwrap();
        let s = Schedule::for_grid(5, 2, 2);
        assert_eq!(train(&mut g, &[], &s, 0), Err(SomError::EmptyDataset));
        assert!(matches!(
            train(&mut g, &[vec![1.0]], &s, 0),
            Err(SomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn repeated_row_converges() {
        let mut g = init_grid(5, 5, 3, 11).unwrap();
        let rows = vec![vec![0.25, 0.5, 0.75]; 4];
        let history = train(&mut g, &rows, &Schedule::for_grid(2_000, 5, 5), 3).unwrap();
        assert_eq!(history.len(), 500);
        assert!(*history.last().unwrap() < 1e-3);
    }

    #[test]
    fn qe_cases() {
        let g = grid_from(1, 1, 2, vec![0.5, 0.5]);
        assert_eq!(quantization_error(&g, &[vec![0.5, 0.5]]).unwrap(), 0.0);
        let qe = quantization_error(&g, &[vec![0.8, 0.9]]).unwrap();
        assert!((qe - 0.5).abs() < 1e-12);
    }

    #[test]
    fn labeling_single_label() {
        let g = init_grid(4, 4, 2, 5).unwrap();
        let m = label_map(&g, &[vec![0.1, 0.1]], &[0]).unwrap();
        assert!(m.labels.iter().all(|l| *l == Some(0)));
    }

    #[test]
    fn labeling_two_point_voronoi() {
        // 1x4 lattice; rows hit neurons 0 and 3.
        let g = grid_from(1, 4, 1, vec![0.0, 0.3, 0.7, 1.0]);
        let m = label_map(&g, &[vec![0.0], vec![1.0]], &[0, 1]).unwrap();
        assert_eq!(m.labels, vec![Some(0), Some(0), Some(1), Some(1)]);
        // tie at equal lattice distance goes to the lower index
        let g = grid_from(1, 3, 1, vec![0.0, 0.5, 1.0]);
        let m = label_map(&g, &[vec![0.0], vec![1.0]], &[1, 0]).unwrap();
        assert_eq!(m.labels, vec![Some(1), Some(1), Some(0)]);
    }

    #[test]
    fn labeling_majority_tie_lower_label() {
        let g = grid_from(1, 1, 1, vec![0.0]);
        let m = label_map(&g, &[vec![0.0], vec![0.0]], &[3, 2]).unwrap();
        assert_eq!(m.labels, vec![Some(2)]);
    }

    #[test]
    fn labeling_without_rows() {
        let g = init_grid(2, 2, 1, 0).unwrap();
        let m = label_map(&g, &[], &[]).unwrap();
        assert!(m.labels.iter().all(Option::is_none));
        assert!(label_map(&g, &[vec![0.0]], &[]).is_err());
    }

    #[test]
    fn votes_and_winner() {
        let mut m = LabeledMap::empty(1, 5);
        m.labels = vec![Some(0), Some(0), Some(1), Some(1), Some(1)];
        assert_eq!(m.nearest_labeled(2, 3), vec![2, 1, 3]);
        assert_eq!(m.winning_label(2, 3), Some(1));
        assert_eq!(m.winning_label(0, 2), Some(0));
        // 2 vs 2: lower label wins
        assert_eq!(m.winning_label(1, 4), Some(0));
    }

    proptest! {
        #[test]
        fn update_never_overshoots(
            w in prop::collection::vec(0.0f64..1.0, 6),
            x in prop::collection::vec(0.0f64..1.0, 2),
            eta in 0.0f64..=1.0,
            sigma in 1.0f64..5.0,
        ) {
            let mut g = grid_from(1, 3, 2, w.clone());
            let s = fixed_schedule(eta, sigma);
            train_step(&mut g, &x, 0, &s).unwrap();
            for j in 0..3 {
                for k in 0..2 {
                    let before = (w[j * 2 + k] - x[k]).abs();
                    let after = (g.weights[j * 2 + k] - x[k]).abs();
                    prop_assert!(after <= before + 1e-15);
                }
            }
        }

        #[test]
        fn bmu_invariant_under_scaling(
            w in prop::collection::vec(-1.0f64..1.0, 12),
            x in prop::collection::vec(-1.0f64..1.0, 3),
            scale in 0.01f64..100.0,
        ) {
            let g = grid_from(2, 2, 3, w.clone());
            let gs = grid_from(2, 2, 3, w.iter().map(|v| v * scale).collect());
            let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let scaled = gs.find_bmu(&xs).unwrap();
            let plain = g.find_bmu(&x).unwrap();
            // scaling every coordinate scales every distance by the same factor
            let d_plain = squared_distance(g.neuron(plain), &x);
            let d_scaled = squared_distance(g.neuron(scaled), &x);
            prop_assert!((d_plain - d_scaled).abs() <= 1e-9 * (1.0 + d_plain));
        }

        #[test]
        fn qe_nonnegative(seed in 0u64..50, x in prop::collection::vec(0.0f64..1.0, 2)) {
            let g = init_grid(3, 3, 2, seed).unwrap();
            prop_assert!(quantization_error(&g, &[x]).unwrap() >= 0.0);
        }
    }
}
