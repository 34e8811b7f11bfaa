//! Fully discrete time marching.
//!
//! With `τ = T/M`, `t_n = nτ` and `δ_t u^n = (u^n - u^{n-1})/τ`, every step
//! solves, for all test functions `v`,
//!
//! ```text
//! (D_τ u^{n+1}, v) + ρ Σ_{i=0}^{n+1} p_α(i)/τ^α (u^{n+1-i}, v)
//!                  + κ Σ_{i=0}^{n+1} p_β(i)/τ^β (∇u^{n+1-i}, ∇v) + (F(u^{n+1}), v) = (g^{n+1}, v)
//! ```
//!
//! where `D_τ u^{n+1}` is `δ_t u^1` on the first step and
//! `(3/2)δ_t u^{n+1} - (1/2)δ_t u^n` afterwards, and `ρ = κ = 1` for the
//! Cable equation. In matrix form on the interior unknowns,
//!
//! ```text
//! [c_t M + ρ p_α(0)/τ^α M + κ p_β(0)/τ^β A] u^{n+1} + N(u^{n+1}) = rhs(history, g^{n+1})
//! ```
//!
//! with `c_t = 1/τ` for `n = 0` and `3/(2τ)` otherwise.
//!
//! The two-grid scheme solves this nonlinear system on a coarse mesh (Step I),
//! then a linear fine-mesh system in which `F(U)` is replaced by its
//! linearisation `F(u_H) + F'(u_H)(U - u_H)` about the prolongated coarse
//! solution (Step II).

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::assembly::{
    assemble_load, assemble_mass, assemble_nonlinear_jacobian, assemble_nonlinear_vector,
    assemble_stiffness, l2_error_with, l2_norm, restrict_matrix, restrict_vector, QuadratureRule,
};
use crate::error::{Error, Result};
use crate::fracops::{FractionalOrder, WsgdWeights};
use crate::linsolve::{newton_solve, solve_spd, SolveReport, SolverConfig};
use crate::mesh::{FeFunction, Mesh2D, Nesting};
use crate::sparse::CsrMatrix;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Reaction nonlinearity `F` together with its derivative.
#[derive(Clone)]
pub struct Nonlinearity {
    pub value: ScalarFn,
    pub derivative: ScalarFn,
}

impl Nonlinearity {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }

    /// `F(u) = u³ - u`.
    pub fn cubic() -> Self {
        Self::new(|u| u * u * u - u, |u| 3.0 * u * u - 1.0)
    }

    /// `F(u) = c·u`.
    pub fn linear(c: f64) -> Self {
        Self::new(move |u| c * u, move |_| c)
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Nonlinearity")
    }
}

/// Problem data: orders, horizon, nonlinearity, source, initial value.
#[derive(Clone)]
pub struct ProblemSpec {
    pub alpha: FractionalOrder,
    pub beta: FractionalOrder,
    pub final_time: f64,
    pub steps: usize,
    pub nonlinearity: Nonlinearity,
    pub source: SpaceTimeFn,
    pub initial: SpaceFn,
    pub exact: Option<SpaceTimeFn>,
    /// coefficient of the `D_t^α u` term
    pub reaction_coefficient: f64,
    /// coefficient of the `D_t^β Δu` term
    pub diffusion_coefficient: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("final_time", &self.final_time)
            .field("steps", &self.steps)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Problem with zero initial value, no exact solution and unit coefficients.
    pub fn new(
        alpha: FractionalOrder,
        beta: FractionalOrder,
        final_time: f64,
        steps: usize,
        nonlinearity: Nonlinearity,
        source: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            alpha,
            beta,
            final_time,
            steps,
            nonlinearity,
            source: Arc::new(source),
            initial: Arc::new(|_, _| 0.0),
            exact: None,
            reaction_coefficient: 1.0,
            diffusion_coefficient: 1.0,
        }
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {}",
                self.final_time
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 time steps, got {}",
                self.steps
            )));
        }
        for (x, y) in [(0.0, 0.3), (1.0, 0.7), (0.4, 0.0), (0.6, 1.0)] {
            let v = (self.initial)(x, y);
            if v.abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "initial value must vanish on the boundary, u0({x}, {y}) = {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Mesh-constant operators restricted to the interior unknowns, plus the
/// full-node data needed by the nonlinear assemblies.
#[derive(Debug, Clone)]
pub struct StepOperators {
    pub mesh: Mesh2D,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
}

impl StepOperators {
    pub fn new(mesh: &Mesh2D) -> Self {
        Self {
            mesh: mesh.clone(),
            mass: restrict_matrix(mesh, &assemble_mass(mesh)),
            stiffness: restrict_matrix(mesh, &assemble_stiffness(mesh)),
        }
    }

    pub fn unknowns(&self) -> usize {
        self.mass.rows()
    }

    fn solver_config(&self, base: &SolverConfig) -> SolverConfig {
        base.with_norm_scale(self.mesh.spacing())
    }

    /// Interior part of `∫ F(u_h) φ_i`.
    fn nonlinear_vector(&self, interior: &[f64], f: &ScalarFn) -> Result<Vec<f64>> {
        let u = FeFunction::from_interior(&self.mesh, interior)?;
        let full = assemble_nonlinear_vector(&self.mesh, &u, |v| f(v))?;
        Ok(restrict_vector(&self.mesh, &full))
    }

    /// Interior block of `∫ F'(u_h) φ_j φ_i`.
    fn nonlinear_jacobian(&self, u: &FeFunction, df: &ScalarFn) -> Result<CsrMatrix> {
        let full = assemble_nonlinear_jacobian(&self.mesh, u, |v| df(v))?;
        Ok(restrict_matrix(&self.mesh, &full))
    }
}

/// Solution history on one mesh together with the shared WSGD weights.
///
/// Levels are stored as interior-unknown vectors; [`TimeState::level`]
/// returns them as full nodal functions with zero boundary values.
#[derive(Debug, Clone)]
pub struct TimeState {
    history: Vec<Vec<f64>>,
    tau: f64,
    weights_alpha: Arc<WsgdWeights>,
    weights_beta: Arc<WsgdWeights>,
}

impl TimeState {
    /// State holding `u^0`, the nodal interpolant of the initial value.
    pub fn new(spec: &ProblemSpec, ops: &StepOperators) -> Self {
        let weights_alpha = Arc::new(WsgdWeights::new(spec.alpha, spec.steps));
        let weights_beta = Arc::new(WsgdWeights::new(spec.beta, spec.steps));
        Self::with_weights(spec, ops, weights_alpha, weights_beta)
    }

    pub fn with_weights(
        spec: &ProblemSpec,
        ops: &StepOperators,
        weights_alpha: Arc<WsgdWeights>,
        weights_beta: Arc<WsgdWeights>,
    ) -> Self {
        let initial = spec.initial.clone();
        let u0 = FeFunction::interpolate(&ops.mesh, |x, y| initial(x, y));
        Self {
            history: vec![u0.interior_values(&ops.mesh)],
            tau: spec.tau(),
            weights_alpha,
            weights_beta,
        }
    }

    /// Index `n` of the newest level `u^n`.
    pub fn step(&self) -> usize {
        self.history.len() - 1
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn latest(&self) -> &[f64] {
        self.history.last().expect("history is never empty")
    }

    pub fn level(&self, mesh: &Mesh2D, n: usize) -> Result<FeFunction> {
        let v = self.history.get(n).ok_or_else(|| {
            Error::InvalidArgument(format!("level {n} not computed (step {})", self.step()))
        })?;
        FeFunction::from_interior(mesh, v)
    }

    fn push(&mut self, level: Vec<f64>) {
        self.history.push(level);
    }

    /// Left-hand matrix `c_t M + ρ p_α(0)/τ^α M + κ p_β(0)/τ^β A` and the
    /// history part of the right-hand side for the step `n → n+1`.
    fn linear_part(
        &self,
        ops: &StepOperators,
        spec: &ProblemSpec,
    ) -> Result<(CsrMatrix, Vec<f64>)> {
        let tau = self.tau;
        let n = self.step();
        let un = &self.history[n];
        let (c_t, time_hist): (f64, Vec<f64>) = if n == 0 {
            (1.0 / tau, un.iter().map(|v| v / tau).collect())
        } else {
            let prev = &self.history[n - 1];
            (
                1.5 / tau,
                un.iter()
                    .zip(prev)
                    .map(|(a, b)| (2.0 * a - 0.5 * b) / tau)
                    .collect(),
            )
        };
        let rho = spec.reaction_coefficient;
        let kappa = spec.diffusion_coefficient;
        let mass_coef = c_t + rho * self.weights_alpha.leading_coefficient(tau);
        let stiff_coef = kappa * self.weights_beta.leading_coefficient(tau);
        let lhs =
            CsrMatrix::linear_combination(&[(mass_coef, &ops.mass), (stiff_coef, &ops.stiffness)])?;

        let tail_alpha = self.weights_alpha.history_tail(&self.history, tau)?;
        let tail_beta = self.weights_beta.history_tail(&self.history, tau)?;
        let mass_part: Vec<f64> = time_hist
            .iter()
            .zip(&tail_alpha)
            .map(|(t, a)| t - rho * a)
            .collect();
        let mut rhs = ops.mass.mul_vec(&mass_part);
        let diff = ops.stiffness.mul_vec(&tail_beta);
        rhs.iter_mut().zip(&diff).for_each(|(r, d)| *r -= kappa * d);
        Ok((lhs, rhs))
    }
}

fn source_load(ops: &StepOperators, spec: &ProblemSpec, t: f64) -> Vec<f64> {
    let g = spec.source.clone();
    restrict_vector(&ops.mesh, &assemble_load(&ops.mesh, |x, y| g(x, y, t)))
}

/// Advances `state` by one step of the standard nonlinear scheme.
pub fn step_standard(
    state: &mut TimeState,
    ops: &StepOperators,
    spec: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<(FeFunction, SolveReport)> {
    let n = state.step();
    let run = || -> Result<(Vec<f64>, SolveReport)> {
        let t_next = (n + 1) as f64 * state.tau;
        let (lhs, mut rhs) = state.linear_part(ops, spec)?;
        let load = source_load(ops, spec, t_next);
        rhs.iter_mut().zip(&load).for_each(|(r, l)| *r += l);

        let f = &spec.nonlinearity.value;
        let df = &spec.nonlinearity.derivative;
        let residual = |x: &[f64]| -> Result<Vec<f64>> {
            let mut r = lhs.mul_vec(x);
            let nl = ops.nonlinear_vector(x, f)?;
            for ((ri, ni), bi) in r.iter_mut().zip(&nl).zip(&rhs) {
                *ri += ni - bi;
            }
            Ok(r)
        };
        let jacobian = |x: &[f64]| -> Result<CsrMatrix> {
            let u = FeFunction::from_interior(&ops.mesh, x)?;
            let j = ops.nonlinear_jacobian(&u, df)?;
            CsrMatrix::linear_combination(&[(1.0, &lhs), (1.0, &j)])
        };
        newton_solve(residual, jacobian, state.latest(), &ops.solver_config(cfg))
    };
    let (next, report) = run().map_err(|e| e.at_step(n))?;
    let out = FeFunction::from_interior(&ops.mesh, &next)?;
    state.push(next);
    Ok((out, report))
}

/// Step II: advances the fine state by one linear solve around the coarse
/// solution `coarse_next` (a function on `nest.coarse` at the new time level).
pub fn step_fine_linearized(
    fine_state: &mut TimeState,
    nest: &Nesting,
    ops_fine: &StepOperators,
    spec: &ProblemSpec,
    coarse_next: &FeFunction,
    cfg: &SolverConfig,
) -> Result<(FeFunction, SolveReport)> {
    let n = fine_state.step();
    let run = || -> Result<(Vec<f64>, SolveReport)> {
        if ops_fine.mesh != nest.fine {
            return Err(Error::MeshMismatch {
                expected: nest.fine.cells_per_side(),
                found: ops_fine.mesh.cells_per_side(),
            });
        }
        let t_next = (n + 1) as f64 * fine_state.tau;
        let u_coarse = nest.prolongate(coarse_next)?;
        let (lhs, mut rhs) = fine_state.linear_part(ops_fine, spec)?;
        let load = source_load(ops_fine, spec, t_next);

        let f = &spec.nonlinearity.value;
        let df = &spec.nonlinearity.derivative;
        let mesh = &ops_fine.mesh;
        let jac_full = assemble_nonlinear_jacobian(mesh, &u_coarse, |v| df(v))?;
        let f_full = assemble_nonlinear_vector(mesh, &u_coarse, |v| f(v))?;
        // ∫ (F(u_H) - F'(u_H) u_H) φ_i
        let ju = jac_full.mul_vec(u_coarse.values());
        let constant: Vec<f64> = f_full.iter().zip(&ju).map(|(a, b)| a - b).collect();
        let constant = restrict_vector(mesh, &constant);
        for ((r, l), c) in rhs.iter_mut().zip(&load).zip(&constant) {
            *r += l - c;
        }
        let jac = restrict_matrix(mesh, &jac_full);
        let system = CsrMatrix::linear_combination(&[(1.0, &lhs), (1.0, &jac)])?;
        solve_spd(&system, &rhs, &ops_fine.solver_config(cfg))
    };
    let (next, report) = run().map_err(|e| e.at_step(n))?;
    let out = FeFunction::from_interior(&ops_fine.mesh, &next)?;
    fine_state.push(next);
    Ok((out, report))
}

/// One full two-grid step: Step I on the coarse mesh, then Step II.
pub fn step_twogrid(
    coarse_state: &mut TimeState,
    fine_state: &mut TimeState,
    nest: &Nesting,
    ops_coarse: &StepOperators,
    ops_fine: &StepOperators,
    spec: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<(FeFunction, FeFunction)> {
    if coarse_state.step() != fine_state.step() {
        return Err(Error::InvalidArgument(format!(
            "coarse state at step {} but fine state at step {}",
            coarse_state.step(),
            fine_state.step()
        )));
    }
    let (coarse, _) = step_standard(coarse_state, ops_coarse, spec, cfg)?;
    let (fine, _) = step_fine_linearized(fine_state, nest, ops_fine, spec, &coarse, cfg)?;
    Ok((coarse, fine))
}

/// Spatial discretisation for a march.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// standard nonlinear scheme on a mesh with `n` cells per side
    Standard { n: usize },
    /// two-grid scheme on a nested coarse/fine pair
    TwoGrid { coarse: usize, fine: usize },
}

impl Scheme {
    pub fn fine_cells(&self) -> usize {
        match *self {
            Scheme::Standard { n } => n,
            Scheme::TwoGrid { fine, .. } => fine,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarchOptions {
    pub solver: SolverConfig,
    /// keep every fine level `u^0..u^M` in the result
    pub keep_trajectory: bool,
    /// Gauss points per axis used for the reported final-time error
    pub error_points: usize,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            keep_trajectory: false,
            error_points: 3,
        }
    }
}

impl MarchOptions {
    pub fn with_error_points(mut self, k: usize) -> Self {
        self.error_points = k;
        self
    }
}

/// Outcome of a full march to the final time.
#[derive(Debug, Clone)]
pub struct MarchResult {
    pub mesh: Mesh2D,
    /// fine-mesh solution at the final time
    pub solution: FeFunction,
    /// coarse solution at the final time (two-grid only)
    pub coarse_solution: Option<FeFunction>,
    pub trajectory: Option<Vec<FeFunction>>,
    /// wall-clock seconds spent in the time loop, excluding assembly of the
    /// mesh-constant matrices and diagnostics
    pub solve_seconds: f64,
    /// Newton iterations per step (the coarse solves for two-grid)
    pub newton_iterations: Vec<usize>,
    /// `max_n ‖u^n‖_{L²}` over the fine levels
    pub max_l2_norm: f64,
    /// `‖u(T) - u^M‖_{L²}` when the exact solution is known
    pub final_error: Option<f64>,
}

impl MarchResult {
    pub fn total_newton_iterations(&self) -> usize {
        self.newton_iterations.iter().sum()
    }
}

/// Marches from `t = 0` to `T`. The two-grid scheme computes the whole coarse
/// trajectory first and then the fine trajectory.
pub fn march(spec: &ProblemSpec, scheme: Scheme, options: &MarchOptions) -> Result<MarchResult> {
    spec.validate()?;
    let weights_alpha = Arc::new(WsgdWeights::new(spec.alpha, spec.steps));
    let weights_beta = Arc::new(WsgdWeights::new(spec.beta, spec.steps));
    let cfg = &options.solver;
    let mut elapsed = Duration::ZERO;
    let mut newton_iterations = Vec::with_capacity(spec.steps);

    let (mesh, fine_state, coarse_solution) = match scheme {
        Scheme::Standard { n } => {
            let mesh = Mesh2D::new(n)?;
            let ops = StepOperators::new(&mesh);
            let mut state = TimeState::with_weights(spec, &ops, weights_alpha, weights_beta);
            for _ in 0..spec.steps {
                let start = Instant::now();
                let (_, report) = step_standard(&mut state, &ops, spec, cfg)?;
                elapsed += start.elapsed();
                newton_iterations.push(report.iterations);
            }
            (mesh, state, None)
        }
        Scheme::TwoGrid { coarse, fine } => {
            let nest = Nesting::new(coarse, fine)?;
            let ops_coarse = StepOperators::new(&nest.coarse);
            let ops_fine = StepOperators::new(&nest.fine);
            let mut coarse_state = TimeState::with_weights(
                spec,
                &ops_coarse,
                weights_alpha.clone(),
                weights_beta.clone(),
            );
            let mut fine_state =
                TimeState::with_weights(spec, &ops_fine, weights_alpha, weights_beta);
            let mut coarse_levels = Vec::with_capacity(spec.steps);
            for _ in 0..spec.steps {
                let start = Instant::now();
                let (u_h, report) = step_standard(&mut coarse_state, &ops_coarse, spec, cfg)?;
                elapsed += start.elapsed();
                newton_iterations.push(report.iterations);
                coarse_levels.push(u_h);
            }
            for u_h in &coarse_levels {
                let start = Instant::now();
                step_fine_linearized(&mut fine_state, &nest, &ops_fine, spec, u_h, cfg)?;
                elapsed += start.elapsed();
            }
            let last = coarse_levels.pop();
            (nest.fine, fine_state, last)
        }
    };

    let mut max_l2_norm = 0.0f64;
    let mut trajectory = options.keep_trajectory.then(Vec::new);
    for n in 0..=fine_state.step() {
        let level = fine_state.level(&mesh, n)?;
        max_l2_norm = max_l2_norm.max(l2_norm(&mesh, &level)?);
        if let Some(t) = trajectory.as_mut() {
            t.push(level);
        }
    }
    let solution = fine_state.level(&mesh, fine_state.step())?;
    let final_error = match &spec.exact {
        Some(exact) => {
            let t = spec.final_time;
            let rule = QuadratureRule::gauss_tensor(options.error_points.max(1));
            Some(l2_error_with(
                &mesh,
                &solution,
                |x, y| exact(x, y, t),
                &rule,
            )?)
        }
        None => None,
    };
    Ok(MarchResult {
        mesh,
        solution,
        coarse_solution,
        trajectory,
        solve_seconds: elapsed.as_secs_f64(),
        newton_iterations,
        max_l2_norm,
        final_error,
    })
}
