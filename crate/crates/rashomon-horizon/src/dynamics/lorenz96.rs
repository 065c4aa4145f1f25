//! Lorenz-96 system integrated with classical fourth-order Runge-Kutta.
//!
//! dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with cyclic indices.

use super::{Trajectory, TrajectorySource};
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Default sampling interval; RK4 is comfortably stable here for F <= 30.
pub const DEFAULT_LORENZ96_DT: f64 = 0.01;

/// The vector field plus a reusable RK4 stepper.
#[derive(Debug, Clone)]
pub struct Lorenz96 {
    pub d: usize,
    pub f: f64,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Lorenz96 {
    pub fn new(d: usize, f: f64) -> Result<Self> {
        if d < 4 {
            return Err(Error::Config(format!("lorenz96 needs d >= 4, got {d}")));
        }
        Ok(Self {
            d,
            f,
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            tmp: vec![0.0; d],
        })
    }

    fn deriv(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let ip1 = x[(i + 1) % d];
            let im1 = x[(i + d - 1) % d];
            let im2 = x[(i + d - 2) % d];
            out[i] = (ip1 - im2) * im1 - x[i] + self.f;
        }
    }

    /// One classical RK4 step in place.
    pub fn step(&mut self, x: &mut [f64], dt: f64) {
        let d = self.d;
        let mut k1 = std::mem::take(&mut self.k1);
        let mut k2 = std::mem::take(&mut self.k2);
        let mut k3 = std::mem::take(&mut self.k3);
        let mut k4 = std::mem::take(&mut self.k4);
        let mut tmp = std::mem::take(&mut self.tmp);

        self.deriv(x, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        self.deriv(&tmp, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        self.deriv(&tmp, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + dt * k3[i];
        }
        self.deriv(&tmp, &mut k4);
        for i in 0..d {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self.k4 = k4;
        self.tmp = tmp;
    }
}

/// Integrate from an explicit initial condition, discarding `transient` steps
/// before recording `steps` rows. Row 0 is the state after the transient.
pub fn simulate_lorenz96_from(
    x0: &[f64],
    f: f64,
    dt: f64,
    steps: usize,
    transient: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt <= 0.05) {
        return Err(Error::Config(format!(
            "lorenz96 requires 0 < dt <= 0.05 for RK4 stability, got {dt}"
        )));
    }
    if steps < 2 {
        return Err(Error::Config(format!("need at least 2 recorded steps, got {steps}")));
    }
    let mut sys = Lorenz96::new(x0.len(), f)?;
    let mut x = x0.to_vec();
    let mut data = Array2::zeros((steps, x0.len()));
    for step in 0..transient + steps {
        if step >= transient {
            let recorded = step - transient;
            data.row_mut(recorded)
                .iter_mut()
                .zip(&x)
                .for_each(|(slot, &v)| *slot = v);
            if recorded + 1 == steps {
                break;
            }
        }
        sys.step(&mut x, dt);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    Trajectory::new(data, dt, TrajectorySource::Lorenz96)
}

/// Simulate from the standard initial condition: x = F everywhere with a
/// small seeded perturbation on the first component.
pub fn simulate_lorenz96(
    d: usize,
    f: f64,
    dt: f64,
    steps: usize,
    seed: u64,
    transient: usize,
) -> Result<Trajectory> {
    if d < 4 {
        return Err(Error::Config(format!("lorenz96 needs d >= 4, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x0 = vec![f; d];
    let z: f64 = rng.sample(StandardNormal);
    x0[0] += 0.01 * z;
    simulate_lorenz96_from(&x0, f, dt, steps, transient)
}
