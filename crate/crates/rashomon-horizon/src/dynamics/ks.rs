//! Kuramoto-Sivashinsky equation on a periodic domain, integrated with the
//! ETDRK4 exponential time-differencing scheme on a Fourier grid.
//!
//! u_t = -u u_x - u_xx - u_xxxx on [0, L), the nonlinear term handled as
//! -(u^2/2)_x in spectral space. The stiff linear part k^2 - k^4 is treated
//! exactly; the phi-function coefficients are evaluated by contour averaging
//! to avoid cancellation at small |L dt|.

use super::{Trajectory, TrajectorySource};
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Canonical chaotic regime at 64 grid points.
pub const DEFAULT_KS_DOMAIN: f64 = 22.0 * PI;
/// Default model-time step.
pub const DEFAULT_KS_DT: f64 = 0.25;

const CONTOUR_POINTS: usize = 32;

/// Precomputed ETDRK4 stepper for one (n, L, dt) discretization.
pub struct KsStepper {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    e_full: Vec<f64>,
    e_half: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
    /// -0.5 i k per mode (Nyquist zeroed), the spectral nonlinearity factor.
    deriv_half: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl KsStepper {
    pub fn new(n: usize, l: f64, dt: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Config(format!("ks needs even n >= 8, got {n}")));
        }
        if !(l > 0.0) || !(dt > 0.0) {
            return Err(Error::Config(format!("ks needs positive L and dt, got L={l}, dt={dt}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        let mut e_full = vec![0.0; n];
        let mut e_half = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; n];
        let mut f3 = vec![0.0; n];
        let mut deriv_half = vec![Complex64::new(0.0, 0.0); n];

        for j in 0..n {
            let freq = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let k = 2.0 * PI * freq / l;
            let lin = k * k - k.powi(4);
            e_full[j] = (dt * lin).exp();
            e_half[j] = (0.5 * dt * lin).exp();
            if j != n / 2 {
                deriv_half[j] = Complex64::new(0.0, -0.5 * k);
            }

            // Contour average of the phi functions around z = dt*lin.
            let z0 = Complex64::new(dt * lin, 0.0);
            let (mut sq, mut s1, mut s2, mut s3) = (
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
            );
            for m in 0..CONTOUR_POINTS {
                let theta = PI * (m as f64 + 0.5) / CONTOUR_POINTS as f64;
                let z = z0 + Complex64::new(theta.cos(), theta.sin());
                let ez = z.exp();
                let z3 = z * z * z;
                sq += ((z * 0.5).exp() - 1.0) / z;
                s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                s2 += (2.0 + z + ez * (z - 2.0)) / z3;
                s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let scale = dt / CONTOUR_POINTS as f64;
            q[j] = scale * sq.re;
            f1[j] = scale * s1.re;
            f2[j] = scale * s2.re;
            f3[j] = scale * s3.re;
        }

        Ok(Self {
            n,
            fwd,
            inv,
            e_full,
            e_half,
            q,
            f1,
            f2,
            f3,
            deriv_half,
            buf: vec![Complex64::default(); n],
        })
    }

    /// Spectrum of `u` with the 1/n normalization used throughout.
    fn to_spectrum(&mut self, u: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let mut v: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut v);
        v.iter_mut().for_each(|c| *c /= n as f64);
        v
    }

    fn to_real(&mut self, v: &[Complex64], out: &mut [f64]) {
        self.buf.copy_from_slice(v);
        self.inv.process(&mut self.buf);
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.re;
        }
    }

    /// Spectral nonlinearity N(v) = -0.5 i k FFT(u^2) with u = ifft(v).
    fn nonlinear(&mut self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        self.buf.copy_from_slice(v);
        self.inv.process(&mut self.buf);
        let mut w: Vec<Complex64> = self
            .buf
            .iter()
            .map(|u| Complex64::new(u.re * u.re, 0.0))
            .collect();
        self.fwd.process(&mut w);
        for (j, c) in w.iter_mut().enumerate() {
            *c = *c / n as f64 * self.deriv_half[j];
        }
        w
    }

    /// Advance a spectrum by one ETDRK4 step.
    ///
    /// The spectrum is re-symmetrized afterwards: the anti-Hermitian roundoff
    /// component feels only the linear dynamics (the nonlinear term is built
    /// from the real part), so without the projection it grows like
    /// exp(max(k^2 - k^4) t) until overflow.
    fn step_spectrum(&mut self, v: &mut [Complex64]) {
        let n = self.n;
        let nv = self.nonlinear(v);
        let mut a = vec![Complex64::default(); n];
        for j in 0..n {
            a[j] = self.e_half[j] * v[j] + self.q[j] * nv[j];
        }
        let na = self.nonlinear(&a);
        let mut b = vec![Complex64::default(); n];
        for j in 0..n {
            b[j] = self.e_half[j] * v[j] + self.q[j] * na[j];
        }
        let nb = self.nonlinear(&b);
        let mut c = vec![Complex64::default(); n];
        for j in 0..n {
            c[j] = self.e_half[j] * a[j] + self.q[j] * (2.0 * nb[j] - nv[j]);
        }
        let nc = self.nonlinear(&c);
        for j in 0..n {
            v[j] = self.e_full[j] * v[j]
                + self.f1[j] * nv[j]
                + 2.0 * self.f2[j] * (na[j] + nb[j])
                + self.f3[j] * nc[j];
        }
        symmetrize(v);
    }

    /// Advance a real-space state by one step.
    pub fn step(&mut self, u: &mut [f64]) {
        let mut v = self.to_spectrum(u);
        self.step_spectrum(&mut v);
        let mut out = vec![0.0; self.n];
        self.to_real(&v, &mut out);
        u.copy_from_slice(&out);
    }

    pub fn grid_points(&self) -> usize {
        self.n
    }
}

/// Enforce v_k = conj(v_{-k}) with real mean and Nyquist modes.
fn symmetrize(v: &mut [Complex64]) {
    let n = v.len();
    v[0] = Complex64::new(v[0].re, 0.0);
    v[n / 2] = Complex64::new(v[n / 2].re, 0.0);
    for j in 1..n / 2 {
        let avg = 0.5 * (v[j] + v[n - j].conj());
        v[j] = avg;
        v[n - j] = avg.conj();
    }
}

/// Integrate from an explicit initial profile, discarding `transient` steps.
pub fn simulate_ks_from(
    u0: &[f64],
    l: f64,
    dt: f64,
    steps: usize,
    transient: usize,
) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::Config(format!("need at least 2 recorded steps, got {steps}")));
    }
    let n = u0.len();
    let mut stepper = KsStepper::new(n, l, dt)?;
    // Evolve the spectrum across all steps; transform back once per record.
    let mut v = stepper.to_spectrum(u0);
    let mut u = vec![0.0; n];
    let mut data = Array2::zeros((steps, n));
    for step in 0..transient + steps {
        if step >= transient {
            let recorded = step - transient;
            stepper.to_real(&v, &mut u);
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { step });
            }
            data.row_mut(recorded)
                .iter_mut()
                .zip(&u)
                .for_each(|(slot, &x)| *slot = x);
            if recorded + 1 == steps {
                break;
            }
        }
        stepper.step_spectrum(&mut v);
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    Trajectory::new(data, dt, TrajectorySource::Ks)
}

/// Simulate from a small seeded random profile (mean removed).
pub fn simulate_ks(
    n: usize,
    l: f64,
    dt: f64,
    steps: usize,
    seed: u64,
    transient: usize,
) -> Result<Trajectory> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::Config(format!("ks needs even n >= 8, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u0: Vec<f64> = (0..n).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mean = u0.iter().sum::<f64>() / n as f64;
    u0.iter_mut().for_each(|x| *x -= mean);
    simulate_ks_from(&u0, l, dt, steps, transient)
}
