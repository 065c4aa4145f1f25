//! Scratch parameter scan (removed before release).

use ndarray::Array2;
use rashomon_horizon::dynamics::{simulate_lorenz96, SystemSpec, Trajectory, TrajectorySource};
use rashomon_horizon::lyapunov::{
    benettin_oracle_with, divergence_curve, embed_trajectory, mutual_information_delay,
    BenettinOptions,
};

fn subsample(traj: &Trajectory, stride: usize) -> Trajectory {
    let data = traj.data();
    let rows: Vec<usize> = (0..data.nrows()).step_by(stride).collect();
    let out = Array2::from_shape_fn((rows.len(), data.ncols()), |(i, j)| data[[rows[i], j]]);
    Trajectory::new(out, traj.dt() * stride as f64, TrajectorySource::Lorenz96).unwrap()
}

fn main() {
    for (d, f) in [(5usize, 10.0f64), (5, 20.0), (4, 20.0)] {
        let spec = SystemSpec::Lorenz96 { d, f };
        let ben = benettin_oracle_with(
            &spec,
            200_000,
            7,
            &BenettinOptions {
                transient: Some(2000),
                ..BenettinOptions::default()
            },
        )
        .unwrap();
        let stride = 10;
        let raw = simulate_lorenz96(d, f, 0.01, 20_000 * stride, 3, 2000).unwrap();
        let traj = subsample(&raw, stride);
        let dt = traj.dt();
        let series = traj.channel(0);
        let tau = mutual_information_delay(&series, 200).unwrap().tau;
        let points = embed_trajectory(traj.data(), 1, 1).unwrap();
        let curve = divergence_curve(points.view(), dt, 10 * tau, 1000, 100).unwrap();
        println!("d={d} F={f} ben={:.3} tau={tau} d0={:.3}", ben.lambda_max, curve.values[0]);
        let y = &curve.values;
        let slopes: Vec<f64> = (0..y.len())
            .map(|j| {
                let hi = (j + 2).min(y.len() - 1);
                let lo = j.saturating_sub(2);
                (y[hi] - y[lo]) / ((hi - lo) as f64 * dt)
            })
            .collect();
        print!("  local slopes: ");
        for j in (0..60).step_by(3) {
            print!("{:.2} ", slopes[j]);
        }
        println!();
        print!("  curve:        ");
        for j in (0..60).step_by(3) {
            print!("{:.2} ", y[j]);
        }
        println!();
    }
}
