//! Manufactured benchmark and convergence studies.
//!
//! The benchmark uses `u(x, y, t) = t² sin(2πx) sin(2πy)` with
//! `F(u) = u³ - u` and `u₀ = 0` on `[0,1]² × [0,1]`; the source `g` is
//! obtained by substituting `u` into the equation, using
//! `D_t^γ t² = 2 t^{2-γ} / Γ(3-γ)`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::thread;

use crate::assembly::l2_error;
use crate::error::{Error, Result};
use crate::fracops::{gamma_fn, FractionalOrder};
use crate::stepper::{march, MarchOptions, MarchResult, Nonlinearity, ProblemSpec, Scheme};

/// A problem instance whose exact solution is known.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub spec: ProblemSpec,
}

impl ManufacturedCase {
    pub fn with_steps(&self, steps: usize) -> Self {
        let mut out = self.clone();
        out.spec.steps = steps;
        out
    }

    pub fn exact(&self, x: f64, y: f64, t: f64) -> f64 {
        self.spec.exact.as_ref().map_or(0.0, |u| u(x, y, t))
    }
}

/// Exact solution of the benchmark.
pub fn benchmark_exact(x: f64, y: f64, t: f64) -> f64 {
    t * t * (2.0 * PI * x).sin() * (2.0 * PI * y).sin()
}

/// The Cable benchmark with orders `alpha`, `beta` and `steps` time steps on `[0, 1]`.
pub fn cable_benchmark(alpha: f64, beta: f64, steps: usize) -> Result<ManufacturedCase> {
    let a = FractionalOrder::new(alpha)?;
    let b = FractionalOrder::new(beta)?;
    let ca = 2.0 / gamma_fn(3.0 - alpha);
    let cb = 16.0 * PI * PI / gamma_fn(3.0 - beta);
    let source = move |x: f64, y: f64, t: f64| {
        let s = (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
        let amp = 2.0 * t - t * t + ca * t.powf(2.0 - alpha) + cb * t.powf(2.0 - beta);
        amp * s + t.powi(6) * s * s * s
    };
    let mut spec = ProblemSpec::new(a, b, 1.0, steps, Nonlinearity::cubic(), source);
    spec.exact = Some(Arc::new(benchmark_exact));
    Ok(ManufacturedCase {
        name: format!("cable_a{alpha}_b{beta}"),
        spec,
    })
}

/// One row of a spatial convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// coarse mesh size (two-grid rows only)
    pub coarse_h: Option<f64>,
    pub h: f64,
    pub error_l2: f64,
    /// observed order against the previous row
    pub order: Option<f64>,
    pub cpu_seconds: f64,
}

/// `log(e_prev / e_curr) / log(s_prev / s_curr)`.
pub fn observed_order(e_prev: f64, e_curr: f64, s_prev: f64, s_curr: f64) -> f64 {
    (e_prev / e_curr).ln() / (s_prev / s_curr).ln()
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
pub(crate) fn run_ordered<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(&mut slots);
    thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

/// Marches `case` once per discretisation and tabulates the final-time
/// errors. Orders are taken against the fine mesh size.
pub fn convergence_study(
    case: &ManufacturedCase,
    schemes: &[Scheme],
    options: &MarchOptions,
    jobs: usize,
) -> Result<Vec<ConvergenceRow>> {
    if case.spec.exact.is_none() {
        return Err(Error::InvalidArgument(format!(
            "case {} has no exact solution",
            case.name
        )));
    }
    let results = run_ordered(schemes, jobs, |&s| march(&case.spec, s, options));
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(schemes.len());
    for (scheme, res) in schemes.iter().zip(results) {
        let res = res?;
        let h = 1.0 / scheme.fine_cells() as f64;
        let error_l2 = res.final_error.expect("exact solution attached");
        let order = rows
            .last()
            .map(|p| observed_order(p.error_l2, error_l2, p.h, h));
        let coarse_h = match *scheme {
            Scheme::TwoGrid { coarse, .. } => Some(1.0 / coarse as f64),
            Scheme::Standard { .. } => None,
        };
        rows.push(ConvergenceRow {
            coarse_h,
            h,
            error_l2,
            order,
            cpu_seconds: res.solve_seconds,
        });
    }
    Ok(rows)
}

/// One row of a temporal convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRow {
    pub steps: usize,
    pub tau: f64,
    pub error_l2: f64,
    pub order: Option<f64>,
}

/// How temporal errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalReference {
    /// against the exact solution (includes the spatial error)
    Exact,
    /// against a run on the same mesh with `steps` time steps, which isolates
    /// the time discretisation error
    FineStep { steps: usize },
}

/// Final-time errors for a sequence of step counts on one discretisation.
pub fn temporal_study(
    case: &ManufacturedCase,
    scheme: Scheme,
    steps: &[usize],
    reference: TemporalReference,
    options: &MarchOptions,
    jobs: usize,
) -> Result<Vec<TemporalRow>> {
    let mut all: Vec<usize> = steps.to_vec();
    if let TemporalReference::FineStep { steps: m } = reference {
        all.push(m);
    }
    let results: Vec<Result<MarchResult>> = run_ordered(&all, jobs, |&m| {
        march(&case.with_steps(m).spec, scheme, options)
    });
    let mut results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let reference_solution = match reference {
        TemporalReference::FineStep { .. } => results.pop().map(|r| r.solution),
        TemporalReference::Exact => None,
    };
    let mut rows: Vec<TemporalRow> = Vec::with_capacity(steps.len());
    for (&m, res) in steps.iter().zip(&results) {
        let error_l2 = match &reference_solution {
            None => res.final_error.ok_or_else(|| {
                Error::InvalidArgument(format!("case {} has no exact solution", case.name))
            })?,
            Some(r) => {
                let diff: Vec<f64> = res
                    .solution
                    .values()
                    .iter()
                    .zip(r.values())
                    .map(|(a, b)| a - b)
                    .collect();
                let d = crate::mesh::FeFunction::from_nodal(&res.mesh, diff)?;
                l2_error(&res.mesh, &d, |_, _| 0.0)?
            }
        };
        let tau = case.spec.final_time / m as f64;
        let order = rows
            .last()
            .map(|p| observed_order(p.error_l2, error_l2, p.tau, tau));
        rows.push(TemporalRow {
            steps: m,
            tau,
            error_l2,
            order,
        });
    }
    Ok(rows)
}
