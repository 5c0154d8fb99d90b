//! Projected gradient ascent for concave quadratics over a box.
//!
//! Steps use a Barzilai–Borwein trial length followed by Armijo backtracking
//! along the projection arc, so every accepted iterate increases the
//! objective. Because the objective is quadratic, the increase between two
//! points is computed exactly from gradients,
//! `f(v + d) - f(v) = (g(v) + g(v + d))·d / 2`, which avoids the cancellation
//! of subtracting two large objective values.

use crate::error::SolveError;

/// A concave quadratic objective.
pub trait ConcaveQuadratic {
    fn dim(&self) -> usize;
    fn value(&self, v: &[f64]) -> f64;
    fn gradient(&self, v: &[f64], out: &mut [f64]);
}

/// Componentwise bounds `lower <= v <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn from_upper(upper: Vec<f64>) -> Self {
        Self {
            lower: vec![0.0; upper.len()],
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, v: &mut [f64]) {
        for ((x, &lo), &hi) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.max(lo).min(hi);
        }
    }

    /// `‖P(v + g) - v‖₂`, zero exactly at a stationary point.
    pub fn projected_gradient_norm(&self, v: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..v.len() {
            let step = (v[i] + g[i]).max(self.lower[i]).min(self.upper[i]) - v[i];
            s += step * step;
        }
        s.sqrt()
    }
}

/// Step-length controls for the backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    /// Stop once `‖P(v + g) - v‖ <= tol * (1 + max(|f(v)|, value_scale))`.
    pub tol: f64,
    /// Floor on the magnitude used by the relative stopping rule. Useful when
    /// the objective is a shifted piece of a larger one and can sit near zero
    /// at the optimum while its gradient entries are large.
    pub value_scale: f64,
    pub max_iters: usize,
    pub step: StepRule,
    pub record_trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub pg_norm: f64,
    /// Objective value after every accepted step, starting with the initial
    /// point. Empty unless requested.
    pub trace: Vec<f64>,
}

const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e30;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `objective` over `bounds` starting from the projection of `start`.
pub fn maximize<F: ConcaveQuadratic + ?Sized>(
    objective: &F,
    bounds: &BoxBounds,
    start: &[f64],
    opts: &AscentOptions,
) -> Result<AscentResult, SolveError> {
    let n = objective.dim();
    debug_assert_eq!(bounds.dim(), n);
    debug_assert_eq!(start.len(), n);

    let mut v = start.to_vec();
    bounds.project(&mut v);
    let mut g = vec![0.0; n];
    objective.gradient(&v, &mut g);
    let mut f = objective.value(&v);
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(f);
    }

    let gmax = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut step = opts.step.initial_step / gmax.max(1.0);
    let mut cand = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    loop {
        let pg_norm = bounds.projected_gradient_norm(&v, &g);
        if pg_norm <= opts.tol * (1.0 + f.abs().max(opts.value_scale)) {
            return Ok(AscentResult {
                point: v,
                value: f,
                iterations,
                pg_norm,
                trace,
            });
        }
        if iterations >= opts.max_iters {
            return Err(SolveError::NonConvergence {
                iterations,
                pg_norm,
            });
        }
        iterations += 1;

        let mut t = step.clamp(MIN_STEP, MAX_STEP);
        loop {
            for i in 0..n {
                cand[i] = v[i] + t * g[i];
            }
            bounds.project(&mut cand);
            for i in 0..n {
                d[i] = cand[i] - v[i];
            }
            let gd = dot(&g, &d);
            objective.gradient(&cand, &mut g_new);
            let gain = 0.5 * (gd + dot(&g_new, &d));
            if gain >= opts.step.armijo * gd && gd > 0.0 {
                break;
            }
            t *= opts.step.shrink;
            if t < MIN_STEP {
                return Err(SolveError::NonConvergence {
                    iterations,
                    pg_norm,
                });
            }
        }

        // Barzilai–Borwein length for the next trial step.
        let mut ss = 0.0;
        let mut sr = 0.0;
        for i in 0..n {
            let r = g_new[i] - g[i];
            ss += d[i] * d[i];
            sr -= d[i] * r;
        }
        step = if sr > 0.0 { ss / sr } else { MAX_STEP };

        std::mem::swap(&mut v, &mut cand);
        std::mem::swap(&mut g, &mut g_new);
        f = objective.value(&v);
        if opts.record_trace {
            trace.push(f);
        }
    }
}
