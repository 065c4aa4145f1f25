//! Echo-state-network forecasters: construction, training, and closed-loop
//! rollout.
//!
//! A model is a fixed sparse random recurrent matrix rescaled to an exact
//! spectral radius, fixed random input weights and biases, and a ridge-trained
//! linear readout that predicts the next state. Multi-step forecasts feed the
//! readout back as input.

mod pool;
mod ridge;

pub use pool::{enumerate_grid, train_pool, GridAxes, ModelPool, PoolEntry, PoolEntryState};
pub use ridge::ridge_solve;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

// Seed streams for the independent draws inside one model.
const STREAM_RESERVOIR: u64 = 0; // .. 0+attempt for resampling
const STREAM_INPUT: u64 = 100;
const STREAM_BIAS: u64 = 101;
const MAX_BUILD_ATTEMPTS: u64 = 8;

/// One point of the hyperparameter grid plus shared training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    /// Reservoir size (neurons).
    pub n_r: usize,
    /// Spectral radius the recurrent matrix is rescaled to.
    pub rho: f64,
    /// Connection probability of each recurrent entry.
    pub sparsity_p: f64,
    /// Leak rate blending the previous state into the update.
    pub leak_alpha: f64,
    /// Input weights are uniform on [-input_scale, input_scale].
    pub input_scale: f64,
    /// Biases are normal with this standard deviation.
    pub bias_std: f64,
    /// Ridge regularizer for the readout.
    pub ridge_lambda: f64,
    /// Training steps discarded before collecting states.
    pub washout: usize,
    /// RNG seed for all weight draws.
    pub seed: u64,
    /// Minimum teacher-forced warmup length accepted at prediction time.
    pub window_w: usize,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            n_r: 200,
            rho: 0.9,
            sparsity_p: 0.5,
            leak_alpha: 0.5,
            input_scale: 0.5,
            bias_std: 0.1,
            ridge_lambda: 1e-6,
            washout: 500,
            seed: 0,
            window_w: 20,
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_r < 1 {
            return Err(Error::Config("n_r must be at least 1".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.sparsity_p > 0.0 && self.sparsity_p <= 1.0) {
            return Err(Error::Config(format!(
                "sparsity_p must lie in (0,1], got {}",
                self.sparsity_p
            )));
        }
        if !(self.leak_alpha > 0.0 && self.leak_alpha <= 1.0) {
            return Err(Error::Config(format!(
                "leak_alpha must lie in (0,1], got {}",
                self.leak_alpha
            )));
        }
        if !(self.ridge_lambda > 0.0) {
            return Err(Error::Config(format!(
                "ridge_lambda must be positive, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// A built (and possibly trained) echo state network.
#[derive(Debug, Clone)]
pub struct ReservoirModel {
    config: ReservoirConfig,
    w_res: Array2<f64>,
    w_in: Array2<f64>,
    bias: Array1<f64>,
    w_out: Option<Array2<f64>>,
    input_dim: usize,
}

/// Characteristic polynomial of a small matrix by the Faddeev-LeVerrier
/// recurrence. Returns monic coefficients c with p(x) = sum c[i] x^(b-i).
fn charpoly(h: &Array2<f64>) -> Vec<f64> {
    let b = h.nrows();
    let mut c = vec![0.0; b + 1];
    c[0] = 1.0;
    let mut m = Array2::<f64>::zeros((b, b));
    for k in 1..=b {
        m = h.dot(&m);
        for i in 0..b {
            m[[i, i]] += c[k - 1];
        }
        let hm = h.dot(&m);
        let trace: f64 = (0..b).map(|i| hm[[i, i]]).sum();
        c[k] = -trace / k as f64;
    }
    c
}

/// Largest root modulus of a monic real polynomial via Durand-Kerner.
fn max_root_modulus(c: &[f64]) -> f64 {
    use rustfft::num_complex::Complex64;
    let deg = c.len() - 1;
    if deg == 0 {
        return 0.0;
    }
    let base = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (1..=deg as i32).map(|i| base.powi(i)).collect();
    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..deg {
            let mut p = Complex64::new(c[0], 0.0);
            for &ck in &c[1..] {
                p = p * roots[i] + ck;
            }
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    den *= roots[i] - roots[j];
                }
            }
            if den.norm_sqr() == 0.0 {
                continue;
            }
            let step = p / den;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 {
            break;
        }
    }
    roots.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Modified Gram-Schmidt in place; near-zero columns are zeroed. Returns the
/// number of surviving columns.
fn orthonormalize(q: &mut Array2<f64>) -> usize {
    let b = q.ncols();
    let mut rank = 0;
    for j in 0..b {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let qi = q.column(i).to_owned();
            q.column_mut(j).zip_mut_with(&qi, |x, &y| *x -= proj * y);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm > 1e-250 {
            q.column_mut(j).mapv_inplace(|x| x / norm);
            rank += 1;
        } else {
            q.column_mut(j).fill(0.0);
        }
    }
    rank
}

/// Dominant eigenvalue magnitude of `start`-many candidates by block power
/// (subspace) iteration with small-block Ritz values.
///
/// A scalar power iteration stalls on random reservoir matrices: the top
/// eigenvalues are usually complex pairs with near-degenerate moduli, so the
/// two-step-ratio magnitude oscillates without converging. Iterating a small
/// orthonormal block and taking the largest Ritz eigenvalue modulus converges
/// at the (much larger) gap to the first eigenvalue outside the block.
pub fn dominant_eigenvalue_magnitude(
    w: &ArrayView2<f64>,
    start: &Array2<f64>,
    max_iter: usize,
    tol: f64,
) -> f64 {
    let mut q = start.clone();
    if orthonormalize(&mut q) == 0 {
        return 0.0;
    }
    let mut prev: Option<f64> = None;
    let mut stable = 0usize;
    let mut est = 0.0;
    for it in 1..=max_iter {
        let z = w.dot(&q);
        if it % 10 == 0 || it == max_iter {
            let h = q.t().dot(&z);
            let scale = h.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if scale == 0.0 || !scale.is_finite() {
                return 0.0;
            }
            est = scale * max_root_modulus(&charpoly(&(&h / scale)));
            if let Some(p) = prev {
                if (est - p).abs() <= tol * est.max(f64::MIN_POSITIVE) {
                    stable += 1;
                    if stable >= 3 {
                        return est;
                    }
                } else {
                    stable = 0;
                }
            }
            prev = Some(est);
        }
        q = z;
        if orthonormalize(&mut q) == 0 {
            return 0.0;
        }
    }
    est
}

impl ReservoirModel {
    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn is_trained(&self) -> bool {
        self.w_out.is_some()
    }

    pub fn w_res(&self) -> ArrayView2<'_, f64> {
        self.w_res.view()
    }

    pub fn w_in(&self) -> ArrayView2<'_, f64> {
        self.w_in.view()
    }

    pub fn bias(&self) -> ArrayView1<'_, f64> {
        self.bias.view()
    }

    pub fn w_out(&self) -> Option<ArrayView2<'_, f64>> {
        self.w_out.as_ref().map(|w| w.view())
    }

    pub(crate) fn from_parts(
        config: ReservoirConfig,
        w_res: Array2<f64>,
        w_in: Array2<f64>,
        bias: Array1<f64>,
        w_out: Option<Array2<f64>>,
        input_dim: usize,
    ) -> Self {
        Self {
            config,
            w_res,
            w_in,
            bias,
            w_out,
            input_dim,
        }
    }

    /// Zero initial reservoir state.
    pub fn initial_state(&self) -> Array1<f64> {
        Array1::zeros(self.config.n_r)
    }

    /// One leaky-tanh update: r <- (1-a) r + a tanh(W r + W_in x + b).
    fn update(&self, state: &mut Array1<f64>, input: ArrayView1<f64>) {
        let alpha = self.config.leak_alpha;
        let mut pre = self.w_res.dot(state);
        pre += &self.w_in.dot(&input);
        pre += &self.bias;
        state.zip_mut_with(&pre, |r, &p| *r = (1.0 - alpha) * *r + alpha * p.tanh());
    }

    /// Drive the reservoir teacher-forced through `inputs`, mutating `state`.
    pub fn drive(&self, state: &mut Array1<f64>, inputs: ArrayView2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input dim {} does not match model input dim {}",
                inputs.ncols(),
                self.input_dim
            )));
        }
        if state.len() != self.config.n_r {
            return Err(Error::Shape(format!(
                "state length {} does not match reservoir size {}",
                state.len(),
                self.config.n_r
            )));
        }
        for row in inputs.rows() {
            self.update(state, row);
        }
        Ok(())
    }

    /// Run the recurrence over an input sequence and return one state per
    /// input.
    pub fn run_reservoir(&self, inputs: ArrayView2<f64>, r0: &Array1<f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input dim {} does not match model input dim {}",
                inputs.ncols(),
                self.input_dim
            )));
        }
        if r0.len() != self.config.n_r {
            return Err(Error::Shape(format!(
                "r0 length {} does not match reservoir size {}",
                r0.len(),
                self.config.n_r
            )));
        }
        if r0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("r0 must be finite".into()));
        }
        let mut state = r0.clone();
        let mut states = Array2::zeros((inputs.nrows(), self.config.n_r));
        for (t, row) in inputs.rows().into_iter().enumerate() {
            self.update(&mut state, row);
            states.row_mut(t).assign(&state);
        }
        Ok(states)
    }

    /// Fit the readout on one-step-ahead targets with teacher forcing,
    /// discarding the washout prefix.
    pub fn train_readout(&mut self, train: &Trajectory) -> Result<()> {
        let t = train.steps();
        let washout = self.config.washout;
        if t <= washout + 2 {
            return Err(Error::Config(format!(
                "training length {t} must exceed washout + 2 = {}",
                washout + 2
            )));
        }
        let data = train.data();
        let inputs = data.slice(ndarray::s![..t - 1, ..]);
        let targets = data.slice(ndarray::s![1.., ..]);
        let states = self.run_reservoir(inputs, &self.initial_state())?;
        let r = states.slice(ndarray::s![washout.., ..]);
        let y = targets.slice(ndarray::s![washout.., ..]);
        let w_out = ridge::ridge_solve(&r.to_owned(), &y.to_owned(), self.config.ridge_lambda)?;
        self.w_out = Some(w_out);
        Ok(())
    }

    /// Readout of the current state: the one-step forecast.
    pub fn readout(&self, state: &Array1<f64>) -> Result<Array1<f64>> {
        let w_out = self
            .w_out
            .as_ref()
            .ok_or_else(|| Error::Domain("model is not trained".into()))?;
        Ok(w_out.t().dot(state))
    }

    /// Autonomous closed-loop rollout from a prepared state. Returns a
    /// k_max x d matrix of forecasts at horizons 1..=k_max; if the loop
    /// produces a non-finite value, that and all later horizons are NaN.
    pub fn rollout_from(&self, state: &Array1<f64>, k_max: usize) -> Result<Array2<f64>> {
        let w_out = self
            .w_out
            .as_ref()
            .ok_or_else(|| Error::Domain("model is not trained".into()))?;
        let mut out = Array2::from_elem((k_max, self.input_dim), f64::NAN);
        let mut r = state.clone();
        let mut x = w_out.t().dot(&r);
        for k in 0..k_max {
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
            out.row_mut(k).assign(&x);
            if k + 1 < k_max {
                self.update(&mut r, x.view());
                x = w_out.t().dot(&r);
            }
        }
        Ok(out)
    }

    /// Forecast the state k steps past the end of a teacher-forced warmup
    /// window. The reservoir starts from zero, consumes the warmup, then
    /// rolls out autonomously; the k-th output is returned.
    pub fn forecast(&self, warmup: ArrayView2<f64>, k: usize) -> Result<Array1<f64>> {
        if k < 1 {
            return Err(Error::Domain("forecast horizon must be at least 1".into()));
        }
        if warmup.nrows() < self.config.window_w {
            return Err(Error::Config(format!(
                "warmup has {} rows; model requires at least {}",
                warmup.nrows(),
                self.config.window_w
            )));
        }
        let mut state = self.initial_state();
        self.drive(&mut state, warmup)?;
        let rolled = self.rollout_from(&state, k)?;
        let last = rolled.row(k - 1);
        if last.iter().any(|v| !v.is_finite()) {
            return Err(Error::RolloutDiverged { horizon: k });
        }
        Ok(last.to_owned())
    }
}

/// Build an untrained model from a config: sparse normal recurrent weights
/// rescaled to the requested spectral radius, uniform input weights, normal
/// biases. An all-zero (or nilpotent) draw is resampled with an incremented
/// sub-seed, up to 8 attempts.
pub fn build_reservoir(config: &ReservoirConfig, input_dim: usize) -> Result<ReservoirModel> {
    config.validate()?;
    if input_dim < 1 {
        return Err(Error::Config("input_dim must be at least 1".into()));
    }
    let n = config.n_r;

    let mut w_res = None;
    for attempt in 0..MAX_BUILD_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_RESERVOIR + attempt));
        let mut w = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < config.sparsity_p {
                    w[[i, j]] = rng.sample(StandardNormal);
                }
            }
        }
        let block = n.min(8);
        let start = Array2::from_shape_fn((n, block), |_| rng.sample::<f64, _>(StandardNormal));
        let magnitude = dominant_eigenvalue_magnitude(&w.view(), &start, 4000, 1e-12);
        if magnitude > 0.0 {
            w *= config.rho / magnitude;
            w_res = Some(w);
            break;
        }
    }
    let w_res = w_res.ok_or_else(|| {
        Error::Config(format!(
            "reservoir draw produced a zero dominant eigenvalue {MAX_BUILD_ATTEMPTS} times (seed {})",
            config.seed
        ))
    })?;

    let mut rng_in = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INPUT));
    let s = config.input_scale;
    let w_in = Array2::from_shape_fn((n, input_dim), |_| rng_in.random_range(-s..s));

    let mut rng_bias = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_BIAS));
    let bias = Array1::from_iter(
        (0..n).map(|_| config.bias_std * rng_bias.sample::<f64, _>(StandardNormal)),
    );

    Ok(ReservoirModel {
        config: config.clone(),
        w_res,
        w_in,
        bias,
        w_out: None,
        input_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TrajectorySource;

    fn small_config(n_r: usize, seed: u64) -> ReservoirConfig {
        ReservoirConfig {
            n_r,
            rho: 0.9,
            sparsity_p: 0.5,
            leak_alpha: 0.7,
            seed,
            washout: 0,
            ..ReservoirConfig::default()
        }
    }

    /// Independent spectral-radius oracle: two-column block power iteration
    /// with the 2x2 Ritz eigenvalues from the quadratic formula (complex
    /// pairs give |lambda| = sqrt(det)), run far past convergence.
    fn power_iteration_oracle(w: ArrayView2<f64>) -> f64 {
        let n = w.nrows();
        let mut a = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
        let mut b = Array1::zeros(n);
        for (i, x) in b.iter_mut().enumerate() {
            *x = 1e-3 * (((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5) + if i == 0 { 1.0 } else { 0.0 };
        }
        let mut est = 0.0;
        for _ in 0..30_000 {
            // Orthonormalize (a, b).
            let na = a.dot(&a).sqrt();
            if na == 0.0 {
                return 0.0;
            }
            a /= na;
            let proj = a.dot(&b);
            b.zip_mut_with(&a, |x, &y| *x -= proj * y);
            let nb = b.dot(&b).sqrt();
            if nb > 0.0 {
                b /= nb;
            }
            let wa = w.dot(&a);
            let wb = w.dot(&b);
            // 2x2 Ritz matrix [[a.wa, a.wb], [b.wa, b.wb]].
            let h11 = a.dot(&wa);
            let h12 = a.dot(&wb);
            let h21 = b.dot(&wa);
            let h22 = b.dot(&wb);
            let tr = h11 + h22;
            let det = h11 * h22 - h12 * h21;
            let disc = 0.25 * tr * tr - det;
            est = if disc >= 0.0 {
                let s = disc.sqrt();
                (0.5 * tr + s).abs().max((0.5 * tr - s).abs())
            } else {
                det.sqrt()
            };
            a = wa;
            b = wb;
        }
        est
    }

    #[test]
    fn spectral_radius_matches_configuration() {
        let cfg = ReservoirConfig {
            n_r: 200,
            rho: 0.9,
            sparsity_p: 0.3,
            seed: 5,
            ..ReservoirConfig::default()
        };
        let model = build_reservoir(&cfg, 3).unwrap();
        let measured = power_iteration_oracle(model.w_res());
        assert!(
            (measured - 0.9).abs() / 0.9 < 1e-6,
            "measured spectral radius {measured}"
        );
    }

    #[test]
    fn full_density_when_p_is_one() {
        let cfg = ReservoirConfig {
            n_r: 40,
            sparsity_p: 1.0,
            seed: 9,
            ..ReservoirConfig::default()
        };
        let model = build_reservoir(&cfg, 2).unwrap();
        assert!(model.w_res().iter().all(|v| *v != 0.0));
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = small_config(50, 77);
        let a = build_reservoir(&cfg, 4).unwrap();
        let b = build_reservoir(&cfg, 4).unwrap();
        assert_eq!(a.w_res(), b.w_res());
        assert_eq!(a.w_in(), b.w_in());
        assert_eq!(a.bias(), b.bias());
    }

    #[test]
    fn zero_everything_stays_zero() {
        // With zero bias, zero inputs, and zero initial state every update is
        // tanh(0) = 0.
        let cfg = ReservoirConfig {
            bias_std: 0.0,
            ..small_config(30, 3)
        };
        let model = build_reservoir(&cfg, 2).unwrap();
        let inputs = Array2::zeros((10, 2));
        let states = model.run_reservoir(inputs.view(), &model.initial_state()).unwrap();
        assert!(states.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_leak_matches_pure_tanh_recurrence() {
        let cfg = ReservoirConfig {
            leak_alpha: 1.0,
            ..small_config(20, 11)
        };
        let model = build_reservoir(&cfg, 2).unwrap();
        let inputs = Array2::from_shape_fn((15, 2), |(i, j)| ((i + j) as f64 * 0.37).sin());
        let states = model.run_reservoir(inputs.view(), &model.initial_state()).unwrap();

        // Re-implementation of the alpha = 1 special case.
        let mut r = Array1::<f64>::zeros(20);
        for (t, x) in inputs.rows().into_iter().enumerate() {
            let pre = model.w_res().dot(&r) + model.w_in().dot(&x) + model.bias();
            r = pre.mapv(f64::tanh);
            for (a, b) in states.row(t).iter().zip(r.iter()) {
                assert_eq!(a, b);
            }
        }
        // tanh range
        assert!(states.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn readout_matches_dense_normal_equation_oracle() {
        // Tiny case against an explicit Gaussian-elimination solve.
        let cfg = ReservoirConfig {
            n_r: 3,
            ridge_lambda: 1e-4,
            washout: 0,
            ..small_config(3, 21)
        };
        let mut model = build_reservoir(&cfg, 1).unwrap();
        let data = Array2::from_shape_fn((6, 1), |(i, _)| (i as f64 * 0.8).sin());
        let traj = Trajectory::new(data.clone(), 1.0, TrajectorySource::External).unwrap();
        model.train_readout(&traj).unwrap();

        let inputs = data.slice(ndarray::s![..5, ..]);
        let targets = data.slice(ndarray::s![1.., ..]);
        let states = model.run_reservoir(inputs, &model.initial_state()).unwrap();

        // Dense normal equations (R^T R + lambda I) w = R^T y via Gaussian
        // elimination with partial pivoting.
        let mut g = states.t().dot(&states);
        for i in 0..3 {
            g[[i, i]] += 1e-4;
        }
        let rhs = states.t().dot(&targets.to_owned());
        let mut aug: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let mut row: Vec<f64> = (0..3).map(|j| g[[i, j]]).collect();
                row.push(rhs[[i, 0]]);
                row
            })
            .collect();
        for p in 0..3 {
            let pivot = (p..3).max_by(|&a, &b| aug[a][p].abs().total_cmp(&aug[b][p].abs())).unwrap();
            aug.swap(p, pivot);
            for i in 0..3 {
                if i != p {
                    let factor = aug[i][p] / aug[p][p];
                    for j in p..4 {
                        aug[i][j] -= factor * aug[p][j];
                    }
                }
            }
        }
        let oracle: Vec<f64> = (0..3).map(|i| aug[i][3] / aug[i][i]).collect();

        let w_out = model.w_out().unwrap();
        for i in 0..3 {
            let rel = (w_out[[i, 0]] - oracle[i]).abs() / oracle[i].abs().max(1e-12);
            assert!(rel < 1e-8, "row {i}: {} vs oracle {}", w_out[[i, 0]], oracle[i]);
        }
    }

    #[test]
    fn one_step_forecast_equals_readout() {
        let cfg = small_config(25, 33);
        let mut model = build_reservoir(&cfg, 2).unwrap();
        let data = Array2::from_shape_fn((80, 2), |(i, j)| ((i + 2 * j) as f64 * 0.21).sin());
        let traj = Trajectory::new(data.clone(), 1.0, TrajectorySource::External).unwrap();
        model.train_readout(&traj).unwrap();

        let warmup = data.slice(ndarray::s![..30, ..]);
        let direct = model.forecast(warmup, 1).unwrap();
        let mut state = model.initial_state();
        model.drive(&mut state, warmup).unwrap();
        let readout = model.readout(&state).unwrap();
        assert_eq!(direct, readout);
    }

    #[test]
    fn two_step_forecast_composes_one_step_map() {
        // In a setting the readout can represent almost exactly (rich linear
        // regime), rolling out two steps equals applying the learned one-step
        // map twice by hand.
        let cfg = ReservoirConfig {
            n_r: 40,
            rho: 0.5,
            ridge_lambda: 1e-10,
            washout: 5,
            ..small_config(40, 55)
        };
        let mut model = build_reservoir(&cfg, 1).unwrap();
        let data = Array2::from_shape_fn((300, 1), |(i, _)| 0.05 * (i as f64 * 0.3).sin());
        let traj = Trajectory::new(data.clone(), 1.0, TrajectorySource::External).unwrap();
        model.train_readout(&traj).unwrap();

        let warmup = data.slice(ndarray::s![..50, ..]);
        let direct = model.forecast(warmup, 2).unwrap();

        // Manual composition: one-step output, feed it back, one step again.
        let mut state = model.initial_state();
        model.drive(&mut state, warmup).unwrap();
        let x1 = model.readout(&state).unwrap();
        let x1_row = x1.insert_axis(ndarray::Axis(0));
        model.drive(&mut state, x1_row.view()).unwrap();
        let x2 = model.readout(&state).unwrap();
        for (a, b) in direct.iter().zip(x2.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn short_warmup_is_rejected() {
        let cfg = small_config(10, 1);
        let mut model = build_reservoir(&cfg, 1).unwrap();
        let data = Array2::from_shape_fn((50, 1), |(i, _)| (i as f64).sin());
        let traj = Trajectory::new(data.clone(), 1.0, TrajectorySource::External).unwrap();
        model.train_readout(&traj).unwrap();
        let warmup = data.slice(ndarray::s![..5, ..]);
        assert!(model.forecast(warmup, 3).is_err());
        assert!(model.forecast(data.slice(ndarray::s![..30, ..]), 0).is_err());
    }
}
