//! Fractional-derivative operators on a uniform time grid.
//!
//! The Grünwald-Letnikov coefficients `g_i` are the Taylor coefficients of
//! `(1 - z)^γ`. The WSGD weights combine two shifted copies of them,
//!
//! ```text
//! p(0) = (γ + 2)/2
//! p(i) = (γ + 2)/2 · g_i - γ/2 · g_{i-1},   i >= 1
//! ```
//!
//! and `Σ_{i=0}^{n+1} p(i) w^{n+1-i} / τ^γ` approximates the Riemann-Liouville
//! derivative of `w` at `t_{n+1}` to second order.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Order `γ` of a fractional derivative, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidOrder(gamma))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(gamma: f64) -> Result<Self> {
        Self::new(gamma)
    }
}

/// Grünwald-Letnikov weights `g_0..=g_n` from the multiplicative recurrence
/// `g_i = (1 - (γ+1)/i) g_{i-1}`.
pub fn grunwald_weights(order: FractionalOrder, n: usize) -> Vec<f64> {
    let gamma = order.value();
    let mut g = Vec::with_capacity(n + 1);
    g.push(1.0);
    for i in 1..=n {
        let prev = g[i - 1];
        g.push((1.0 - (gamma + 1.0) / i as f64) * prev);
    }
    g
}

/// Precomputed Grünwald and WSGD weight sequences for one fractional order.
///
/// Immutable once built; a march shares one instance per order across all
/// of its time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct WsgdWeights {
    order: FractionalOrder,
    g: Vec<f64>,
    p: Vec<f64>,
}

impl WsgdWeights {
    /// Weights for histories of up to `capacity + 1` levels.
    pub fn new(order: FractionalOrder, capacity: usize) -> Self {
        let gamma = order.value();
        let g = grunwald_weights(order, capacity);
        let lead = (gamma + 2.0) / 2.0;
        let shift = gamma / 2.0;
        let mut p = Vec::with_capacity(capacity + 1);
        p.push(lead * g[0]);
        p.extend(g.windows(2).map(|pair| lead * pair[1] - shift * pair[0]));
        Self { order, g, p }
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    /// Largest index `i` for which `g[i]` and `p[i]` are available.
    pub fn capacity(&self) -> usize {
        self.p.len() - 1
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// `p(0) / τ^γ`, the coefficient of the newest level.
    pub fn leading_coefficient(&self, tau: f64) -> f64 {
        self.p[0] / tau.powf(self.order.value())
    }

    /// Weighted sum over the already-known levels,
    /// `Σ_{i=1}^{n+1} p(i)/τ^γ · u^{n+1-i}`, given `past = [u^0, ..., u^n]`.
    ///
    /// With `past.len() == 1` (the first step) only `p(1)` is touched.
    pub fn history_tail(&self, past: &[Vec<f64>], tau: f64) -> Result<Vec<f64>> {
        let Some(first) = past.first() else {
            return Err(Error::InvalidArgument("empty history".into()));
        };
        let dim = first.len();
        if past.len() > self.capacity() {
            return Err(Error::HistoryTooLong {
                len: past.len() + 1,
                capacity: self.capacity(),
            });
        }
        check_tau(tau)?;
        let scale = tau.powf(-self.order.value());
        let n_plus_1 = past.len();
        let mut out = vec![0.0; dim];
        for (i, &pi) in self.p.iter().enumerate().take(n_plus_1 + 1).skip(1) {
            let level = &past[n_plus_1 - i];
            if level.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: level.len(),
                });
            }
            let c = pi * scale;
            for (o, v) in out.iter_mut().zip(level) {
                *o += c * v;
            }
        }
        Ok(out)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "time step must be positive, got {tau}"
        )))
    }
}

/// Builds the weight pair for `order` with history capacity `n`.
pub fn wsgd_weights(order: FractionalOrder, n: usize) -> WsgdWeights {
    WsgdWeights::new(order, n)
}

/// Discrete fractional derivative `Σ_{i=0}^{n+1} p(i)/τ^γ · u^{n+1-i}` for
/// `history = [u^0, ..., u^{n+1}]`.
pub fn apply_wsgd_history(
    weights: &WsgdWeights,
    history: &[Vec<f64>],
    tau: f64,
) -> Result<Vec<f64>> {
    let Some((newest, past)) = history.split_last() else {
        return Err(Error::InvalidArgument("empty history".into()));
    };
    if history.len() > weights.capacity() + 1 {
        return Err(Error::HistoryTooLong {
            len: history.len(),
            capacity: weights.capacity(),
        });
    }
    check_tau(tau)?;
    let lead = weights.leading_coefficient(tau);
    let mut out: Vec<f64> = newest.iter().map(|v| lead * v).collect();
    if !past.is_empty() {
        let tail = weights.history_tail(past, tau)?;
        if tail.len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                found: tail.len(),
            });
        }
        for (o, t) in out.iter_mut().zip(tail) {
            *o += t;
        }
    }
    Ok(out)
}

/// Riemann-Liouville derivative of order `γ` of a smooth `w` at `t > 0`,
/// evaluated by quadrature. Intended as a test oracle.
///
/// The Caputo integral `∫_0^t w'(s)(t-s)^{-γ} ds / Γ(1-γ)` is computed after
/// the substitution `r = (t-s)^{1-γ}`, which removes the endpoint singularity,
/// and the term `w(0) t^{-γ} / Γ(1-γ)` converts Caputo to Riemann-Liouville.
pub fn riemann_liouville_reference<W, D>(order: FractionalOrder, w: W, dw: D, t: f64) -> Result<f64>
where
    W: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "evaluation time must be positive, got {t}"
        )));
    }
    let gamma = order.value();
    let q = 1.0 / (1.0 - gamma);
    let upper = t.powf(1.0 - gamma);
    let integrand = |r: f64| dw(t - r.powf(q));
    let caputo_integral = adaptive_gauss_kronrod(integrand, 0.0, upper, 1e-10)? * q;
    let g1 = gamma_fn(1.0 - gamma);
    Ok(caputo_integral / g1 + w(0.0) * t.powf(-gamma) / g1)
}

/// Gamma function, Lanczos approximation (relative error well below 1e-12 on
/// the positive reals used here).
pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

// 15-point Kronrod nodes on [-1, 1] (non-negative half, descending) and weights;
// every odd-indexed node is also a 7-point Gauss node.
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS7_WEIGHTS[3] * fc;
    for k in 0..7 {
        let dx = half * KRONROD_NODES[k];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += KRONROD_WEIGHTS[k] * pair;
        if k % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[k / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive G7/K15 quadrature by recursive bisection with an absolute
/// tolerance split evenly between halves.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tolerance: f64,
) -> Result<f64> {
    const MAX_DEPTH: usize = 60;
    let mut evaluations = 0usize;
    let mut total = 0.0;
    let mut worst = 0.0f64;
    let mut failed = false;
    let mut stack = vec![(a, b, tolerance, 0usize)];
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (value, estimate) = kronrod_panel(&f, lo, hi);
        evaluations += 15;
        if estimate <= tol || depth >= MAX_DEPTH {
            if estimate > tol {
                failed = true;
                worst = worst.max(estimate);
            }
            total += value;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, 0.5 * tol, depth + 1));
        stack.push((mid, hi, 0.5 * tol, depth + 1));
    }
    if failed || !total.is_finite() {
        return Err(Error::Quadrature {
            tolerance,
            estimate: worst,
            evaluations,
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(g: f64) -> FractionalOrder {
        FractionalOrder::new(g).unwrap()
    }

    #[test]
    fn rejects_orders_outside_open_interval() {
        for bad in [0.0, 1.0, -0.3, 1.5, f64::NAN] {
            assert!(matches!(
                FractionalOrder::new(bad),
                Err(Error::InvalidOrder(_))
            ));
        }
        assert!(FractionalOrder::try_from(0.5).is_ok());
    }

    #[test]
    fn grunwald_small_cases() {
        assert_eq!(grunwald_weights(order(0.5), 0), vec![1.0]);
        assert_eq!(grunwald_weights(order(0.5), 2), vec![1.0, -0.5, -0.125]);
        assert_eq!(grunwald_weights(order(0.25), 1), vec![1.0, -0.25]);
    }

    #[test]
    fn grunwald_matches_gamma_ratio_for_moderate_indices() {
        // g_i = Γ(i-γ) / (Γ(-γ) Γ(i+1)), valid while the Gammas stay finite.
        let gamma = 0.37;
        let g = grunwald_weights(order(gamma), 60);
        for (i, gi) in g.iter().enumerate().skip(1) {
            let i = i as f64;
            let ratio = gamma_fn(i - gamma) / (gamma_fn(-gamma) * gamma_fn(i + 1.0));
            assert!(
                (gi - ratio).abs() <= 1e-12 * ratio.abs().max(1e-300),
                "i={i}"
            );
        }
    }

    #[test]
    fn grunwald_stays_finite_far_past_gamma_overflow() {
        let g = grunwald_weights(order(0.5), 5000);
        assert!(g.iter().all(|v| v.is_finite()));
        assert!(g[5000] < 0.0);
    }

    #[test]
    fn wsgd_leading_weights() {
        let w = wsgd_weights(order(0.5), 4);
        assert_eq!(w.p()[0], 1.25);
        assert!((w.p()[1] + 0.875).abs() < 1e-15);
        assert!((w.p()[2] + 0.03125).abs() < 1e-15);
        assert_eq!(w.capacity(), 4);
    }

    #[test]
    fn apply_history_examples() {
        let w = wsgd_weights(order(0.5), 10);
        let zero = apply_wsgd_history(&w, &[vec![0.0; 3], vec![0.0; 3]], 0.1).unwrap();
        assert_eq!(zero, vec![0.0; 3]);

        let single = apply_wsgd_history(&w, &[vec![1.0]], 1.0).unwrap();
        assert!((single[0] - 1.25).abs() < 1e-15);

        let two = apply_wsgd_history(&w, &[vec![1.0], vec![1.0]], 0.5).unwrap();
        assert!((two[0] - 0.375 / 0.5f64.sqrt()).abs() < 1e-14);
        assert!((two[0] - 0.53033).abs() < 1e-5);
    }

    #[test]
    fn apply_history_errors() {
        let w = wsgd_weights(order(0.5), 2);
        let long = vec![vec![1.0]; 4];
        assert!(matches!(
            apply_wsgd_history(&w, &long, 0.1),
            Err(Error::HistoryTooLong { .. })
        ));
        let ragged = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(matches!(
            apply_wsgd_history(&w, &ragged, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(apply_wsgd_history(&w, &[vec![1.0]], 0.0).is_err());
    }

    #[test]
    fn first_step_tail_uses_only_p1() {
        // Capacity 1 is exactly enough for the n = 0 step.
        let w = wsgd_weights(order(0.3), 1);
        let tail = w.history_tail(&[vec![2.0]], 1.0).unwrap();
        assert!((tail[0] - 2.0 * w.p()[1]).abs() < 1e-15);
        assert!(w.history_tail(&[vec![2.0], vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn kronrod_rule_is_exact_for_low_degree() {
        for deg in 0..=20u32 {
            let got = adaptive_gauss_kronrod(|x| x.powi(deg as i32), 0.0, 1.0, 1e-14).unwrap();
            assert!(
                (got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14,
                "degree {deg}"
            );
        }
    }

    #[test]
    fn reference_of_zero_is_zero() {
        let v = riemann_liouville_reference(order(0.4), |_| 0.0, |_| 0.0, 0.7).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn reference_matches_power_law() {
        // D^γ t² = Γ(3)/Γ(3-γ) t^{2-γ}; Γ(2.5) = 3√π/4.
        let v = riemann_liouville_reference(order(0.5), |t| t * t, |t| 2.0 * t, 1.0).unwrap();
        let gamma_25 = 0.75 * std::f64::consts::PI.sqrt();
        assert!((v - 2.0 / gamma_25).abs() < 1e-9);
        assert!((v - 1.504506).abs() < 1e-6);
    }

    #[test]
    fn reference_handles_nonzero_initial_value() {
        // D^γ 1 = t^{-γ}/Γ(1-γ) for the Riemann-Liouville derivative.
        let g = 0.3;
        let t = 0.8;
        let v = riemann_liouville_reference(order(g), |_| 1.0, |_| 0.0, t).unwrap();
        assert!((v - t.powf(-g) / gamma_fn(1.0 - g)).abs() < 1e-12);
    }
}
