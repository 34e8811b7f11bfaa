//! Oracles shared by the integration tests and the acceptance harness.
//!
//! Each function returns a measured quantity; the callers own the tolerances.
#![allow(dead_code)]

use std::f64::consts::PI;

use cable_core::assembly::{
    assemble_load, assemble_mass, assemble_nonlinear_jacobian, assemble_nonlinear_vector,
    assemble_stiffness, restrict_matrix, restrict_vector,
};
use cable_core::fracops::{apply_wsgd_history, gamma_fn, riemann_liouville_reference, WsgdWeights};
use cable_core::mesh::{FeFunction, Mesh2D};
use cable_core::problems::cable_benchmark;
use cable_core::stepper::{march, MarchOptions, Nonlinearity, ProblemSpec, Scheme};
use cable_core::FractionalOrder;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn order(g: f64) -> FractionalOrder {
    FractionalOrder::new(g).unwrap()
}

/// Grünwald weights straight from the binomial series, `g_i = (-1)^i C(γ, i)`.
pub fn binomial_weights(gamma: f64, n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut c = 1.0;
    for i in 1..=n {
        c *= (gamma - (i as f64 - 1.0)) / i as f64;
        out.push(if i % 2 == 0 { c } else { -c });
    }
    out
}

/// Checks the weight properties on one order; returns a description of the first violation.
pub fn weight_properties(gamma: f64, n: usize) -> Result<(), String> {
    let w = WsgdWeights::new(order(gamma), n);
    let g = w.g();
    if g[0] != 1.0 {
        return Err(format!("γ={gamma}: g0 = {}", g[0]));
    }
    let mut partial = 0.0;
    let mut gap_prev = f64::INFINITY;
    for (i, &gi) in g.iter().enumerate().skip(1) {
        if gi >= 0.0 {
            return Err(format!("γ={gamma}: g[{i}] = {gi} not negative"));
        }
        partial += gi;
        if !(partial > -1.0 && partial <= 0.0) {
            return Err(format!(
                "γ={gamma}: partial sum {partial} at {i} outside (-1, 0]"
            ));
        }
        let gap = (1.0 + partial).abs();
        if gap >= gap_prev {
            return Err(format!("γ={gamma}: |1 + Σg| not decreasing at {i}"));
        }
        gap_prev = gap;
    }
    let abs_sum: f64 = w.p().iter().map(|p| p.abs()).sum();
    if abs_sum > 2.0 * gamma + 2.0 {
        return Err(format!("γ={gamma}: Σ|p| = {abs_sum} > 2γ+2"));
    }
    Ok(())
}

/// `Σ_n (Σ_{i≤n} p_i w^{n-i}) w^n` and `‖w‖²`.
pub fn wsgd_quadratic_form(gamma: f64, w: &[f64]) -> (f64, f64) {
    let weights = WsgdWeights::new(order(gamma), w.len());
    let p = weights.p();
    let mut q = 0.0;
    for n in 0..w.len() {
        let inner: f64 = (0..=n).map(|i| p[i] * w[n - i]).sum();
        q += inner * w[n];
    }
    (q, w.iter().map(|v| v * v).sum())
}

/// Worst quadratic form relative to `‖w‖²` over `count` random vectors.
pub fn worst_quadratic_form(count: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let gamma = rng.random_range(0.01..0.99);
        let len = rng.random_range(1..=64);
        let w: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (q, scale) = wsgd_quadratic_form(gamma, &w);
        worst = worst.min(q / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

/// WSGD approximation of `D^γ t²` at `t = 1` with `m` steps.
pub fn wsgd_t_squared(gamma: f64, m: usize) -> f64 {
    let w = WsgdWeights::new(order(gamma), m);
    let tau = 1.0 / m as f64;
    let history: Vec<Vec<f64>> = (0..=m).map(|k| vec![(k as f64 * tau).powi(2)]).collect();
    apply_wsgd_history(&w, &history, tau).unwrap()[0]
}

/// Errors against `2/Γ(3-γ)` and observed orders over the given step counts.
pub fn wsgd_orders(gamma: f64, steps: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let exact = 2.0 / gamma_fn(3.0 - gamma);
    let errors: Vec<f64> = steps
        .iter()
        .map(|&m| (wsgd_t_squared(gamma, m) - exact).abs())
        .collect();
    let orders = errors
        .windows(2)
        .zip(steps.windows(2))
        .map(|(e, m)| (e[0] / e[1]).ln() / (m[1] as f64 / m[0] as f64).ln())
        .collect();
    (errors, orders)
}

/// Largest relative difference between the assembled Jacobian and central
/// differences of the assembled nonlinear vector, on random data.
pub fn jacobian_fd_error(n: usize, seed: u64) -> f64 {
    let mesh = Mesh2D::new(n).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..mesh.num_nodes())
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    let u = FeFunction::from_nodal(&mesh, vals.clone()).unwrap();
    let f = |v: f64| v * v * v - v;
    let df = |v: f64| 3.0 * v * v - 1.0;
    let jac = assemble_nonlinear_jacobian(&mesh, &u, df).unwrap();
    let eps = 1e-6;
    let scale = jac.max_abs();
    let mut worst = 0.0f64;
    for j in 0..mesh.num_nodes() {
        let mut plus = vals.clone();
        let mut minus = vals.clone();
        plus[j] += eps;
        minus[j] -= eps;
        let np = assemble_nonlinear_vector(&mesh, &FeFunction::from_nodal(&mesh, plus).unwrap(), f)
            .unwrap();
        let nm =
            assemble_nonlinear_vector(&mesh, &FeFunction::from_nodal(&mesh, minus).unwrap(), f)
                .unwrap();
        for i in 0..mesh.num_nodes() {
            let fd = (np[i] - nm[i]) / (2.0 * eps);
            worst = worst.max((fd - jac.get(i, j)).abs() / scale);
        }
    }
    worst
}

fn dense(m: &cable_core::CsrMatrix) -> DMatrix<f64> {
    let d = m.to_dense();
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| d[i][j])
}

/// Replays the first `steps` steps of the standard scheme with dense algebra
/// and returns the largest nodal difference from the library's stepper.
///
/// The oracle builds its own WSGD weights from the binomial series and runs
/// Newton with a dense LU solve.
pub fn dense_step_discrepancy(n: usize, steps: usize) -> f64 {
    let (alpha, beta, m_total) = (0.3, 0.7, 10);
    let case = cable_benchmark(alpha, beta, m_total).unwrap();
    let spec = case.spec.clone();
    let tau = spec.tau();
    let mesh = Mesh2D::new(n).unwrap();
    let mass = dense(&restrict_matrix(&mesh, &assemble_mass(&mesh)));
    let stiff = dense(&restrict_matrix(&mesh, &assemble_stiffness(&mesh)));
    let wsgd = |gamma: f64| -> Vec<f64> {
        let g = binomial_weights(gamma, m_total);
        let mut p = vec![(gamma + 2.0) / 2.0];
        for i in 1..=m_total {
            p.push((gamma + 2.0) / 2.0 * g[i] - gamma / 2.0 * g[i - 1]);
        }
        p
    };
    let (pa, pb) = (wsgd(alpha), wsgd(beta));
    let ni = mesh.num_interior();
    let mut hist: Vec<DVector<f64>> = vec![DVector::zeros(ni)];
    for step in 0..steps {
        let t = (step + 1) as f64 * tau;
        let (ct, time_part) = if step == 0 {
            (1.0 / tau, &hist[0] / tau)
        } else {
            (1.5 / tau, (&hist[step] * 2.0 - &hist[step - 1] * 0.5) / tau)
        };
        let mut tail_a = DVector::zeros(ni);
        let mut tail_b = DVector::zeros(ni);
        for i in 1..=step + 1 {
            tail_a += &hist[step + 1 - i] * (pa[i] / tau.powf(alpha));
            tail_b += &hist[step + 1 - i] * (pb[i] / tau.powf(beta));
        }
        let g = spec.source.clone();
        let load = DVector::from_vec(restrict_vector(
            &mesh,
            &assemble_load(&mesh, |x, y| g(x, y, t)),
        ));
        let rhs = &mass * (time_part - tail_a) - &stiff * tail_b + load;
        let k = &mass * (ct + pa[0] / tau.powf(alpha)) + &stiff * (pb[0] / tau.powf(beta));
        let mut x = hist[step].clone();
        for _ in 0..30 {
            let u = FeFunction::from_interior(&mesh, x.as_slice()).unwrap();
            let nl = restrict_vector(
                &mesh,
                &assemble_nonlinear_vector(&mesh, &u, |v| v * v * v - v).unwrap(),
            );
            let jac = dense(&restrict_matrix(
                &mesh,
                &assemble_nonlinear_jacobian(&mesh, &u, |v| 3.0 * v * v - 1.0).unwrap(),
            ));
            let r = &k * &x + DVector::from_vec(nl) - &rhs;
            let dx = (&k + jac).lu().solve(&(-r)).unwrap();
            x += &dx;
            if dx.norm() < 1e-14 {
                break;
            }
        }
        hist.push(x);
    }

    let mut short = spec.clone();
    short.steps = m_total;
    let res = march(
        &short,
        Scheme::Standard { n },
        &MarchOptions {
            keep_trajectory: true,
            ..Default::default()
        },
    )
    .unwrap();
    let traj = res.trajectory.unwrap();
    (1..=steps)
        .map(|s| {
            let lib = traj[s].interior_values(&mesh);
            lib.iter()
                .zip(hist[s].iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Dense LU solution of the interior Poisson-type system `(M + A) x = b`
/// against the library's CG, on mesh(n).
pub fn dense_linear_discrepancy(n: usize) -> f64 {
    use cable_core::linsolve::{solve_spd, SolverConfig};
    let mesh = Mesh2D::new(n).unwrap();
    let m = restrict_matrix(&mesh, &assemble_mass(&mesh));
    let a = restrict_matrix(&mesh, &assemble_stiffness(&mesh));
    let k = cable_core::CsrMatrix::linear_combination(&[(3.0, &m), (0.7, &a)]).unwrap();
    let b = restrict_vector(
        &mesh,
        &assemble_load(&mesh, |x, y| (PI * x).sin() * y * (1.0 - y) + x),
    );
    let (x, _) = solve_spd(&k, &b, &SolverConfig::default()).unwrap();
    let oracle = dense(&k).lu().solve(&DVector::from_vec(b)).unwrap();
    x.iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Largest `|u_t + D^α u - D^β Δu + F(u) - g|` of the benchmark at random
/// space-time points, with the fractional derivatives from quadrature.
pub fn manufactured_residual(alpha: f64, beta: f64, points: usize, seed: u64) -> f64 {
    let case = cable_benchmark(alpha, beta, 10).unwrap();
    let (a, b) = (order(alpha), order(beta));
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: f64 = rng.random();
        let y: f64 = rng.random();
        let t: f64 = rng.random_range(0.01..1.0);
        let s = (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
        let da = riemann_liouville_reference(a, |r| r * r, |r| 2.0 * r, t).unwrap();
        let db = riemann_liouville_reference(b, |r| r * r, |r| 2.0 * r, t).unwrap();
        let u = t * t * s;
        // Δ(t² S) = -8π² t² S
        let lhs = 2.0 * t * s + da * s + 8.0 * PI * PI * db * s + u * u * u - u;
        worst = worst.max((lhs - (case.spec.source)(x, y, t)).abs());
    }
    worst
}

/// Largest difference between two-grid and standard fine solutions over all
/// levels when `F(u) = -u`.
pub fn linear_twogrid_gap(coarse: usize, fine: usize, steps: usize) -> f64 {
    let mut spec = ProblemSpec::new(
        order(0.4),
        order(0.6),
        1.0,
        steps,
        Nonlinearity::linear(-1.0),
        |x, y, t| {
            (1.0 + t * t) * (PI * x).sin() * (2.0 * PI * y).sin()
                + t * x * y * (1.0 - x) * (1.0 - y)
        },
    );
    spec.initial = std::sync::Arc::new(|x, y| 4.0 * x * (1.0 - x) * y * (1.0 - y));
    let opts = MarchOptions {
        keep_trajectory: true,
        ..Default::default()
    };
    let tg = march(&spec, Scheme::TwoGrid { coarse, fine }, &opts).unwrap();
    let st = march(&spec, Scheme::Standard { n: fine }, &opts).unwrap();
    tg.trajectory
        .unwrap()
        .iter()
        .zip(st.trajectory.unwrap().iter())
        .flat_map(|(a, b)| {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}
