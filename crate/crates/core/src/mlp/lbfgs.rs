//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The line search follows the bracketing/zoom scheme with safeguarded cubic
//! interpolation. Every accepted step satisfies the sufficient-decrease
//! condition, so the objective never increases between iterations.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the gradient 2-norm falls below this.
    pub grad_tol: f64,
    /// Stop when `|f_prev - f| <= loss_tol * max(|f_prev|, |f|)`.
    pub loss_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 500,
            grad_tol: 1e-6,
            loss_tol: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start point and after every accepted step.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    alpha: f64,
    f: f64,
    /// Directional derivative.
    d: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Evaluates along `x0 + alpha * dir`.
struct Line<'a, F> {
    objective: &'a mut F,
    x0: &'a [f64],
    dir: &'a [f64],
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Line<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        let x: Vec<f64> = self
            .x0
            .iter()
            .zip(self.dir)
            .map(|(a, d)| a + alpha * d)
            .collect();
        let mut g = vec![0.0; x.len()];
        let mut f = (self.objective)(&x, &mut g);
        let mut d = dot(&g, self.dir);
        if !f.is_finite() || !d.is_finite() {
            f = f64::INFINITY;
            d = f64::NAN;
        }
        Point { alpha, f, d, x, g }
    }
}

fn cubic_min(lo: &Point, hi: &Point) -> Option<f64> {
    if !lo.d.is_finite() || !hi.d.is_finite() || !hi.f.is_finite() {
        return None;
    }
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
    let disc = d1 * d1 - lo.d * hi.d;
    if disc < 0.0 {
        return None;
    }
    let d2 = (hi.alpha - lo.alpha).signum() * disc.sqrt();
    let a = hi.alpha - (hi.alpha - lo.alpha) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
    a.is_finite().then_some(a)
}

/// Returns a point satisfying the strong Wolfe conditions, or failing that
/// the best point found with sufficient decrease.
fn strong_wolfe<F: FnMut(&[f64], &mut [f64]) -> f64>(
    line: &mut Line<'_, F>,
    f0: f64,
    d0: f64,
    alpha_init: f64,
    opts: &LbfgsOptions,
) -> Option<Point> {
    let armijo = |p: &Point| p.f <= f0 + opts.c1 * p.alpha * d0;
    let curvature = |p: &Point| p.d.abs() <= -opts.c2 * d0;

    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        d: d0,
        x: line.x0.to_vec(),
        g: Vec::new(),
    };
    let mut alpha = alpha_init;
    let mut evals = 0;
    let (mut lo, mut hi) = loop {
        if evals >= opts.max_line_search {
            return None;
        }
        let cur = line.eval(alpha);
        evals += 1;
        if !armijo(&cur) || (evals > 1 && cur.f >= prev.f) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.d >= 0.0 {
            break (cur, prev);
        }
        alpha *= 2.0;
        prev = cur;
    };

    while evals < opts.max_line_search {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= f64::EPSILON * b.max(1e-300) {
            break;
        }
        let guard = 0.1 * width;
        let trial = match cubic_min(&lo, &hi) {
            Some(t) if t >= a + guard && t <= b - guard => t,
            _ => 0.5 * (a + b),
        };
        let cur = line.eval(trial);
        evals += 1;
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Some(cur);
            }
            if cur.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = std::mem::replace(&mut lo, cur);
            } else {
                lo = cur;
            }
        }
    }
    (lo.alpha > 0.0 && !lo.g.is_empty()).then_some(lo)
}

/// Minimizes `objective`, which writes the gradient into its second
/// argument and returns the function value.
pub fn minimize<F>(mut objective: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut history = vec![f];
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return LbfgsOutcome {
            grad_norm: f64::NAN,
            x,
            f,
            iterations: 0,
            converged: false,
            history,
        };
    }
    // (s, y, 1 / y.s)
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut converged = false;
    let mut iterations = 0;
    let mut alpha_buf = vec![0.0; opts.memory];

    while iterations < opts.max_iter {
        let gnorm = norm(&g);
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }

        // Two-loop recursion.
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        for (i, (s, y, rho)) in memory.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[i] = a;
            dir.iter_mut().zip(y).for_each(|(d, yv)| *d -= a * yv);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for (i, (s, y, rho)) in memory.iter().enumerate() {
            let b = rho * dot(y, &dir);
            dir.iter_mut()
                .zip(s)
                .for_each(|(d, sv)| *d += (alpha_buf[i] - b) * sv);
        }

        let mut d0 = dot(&g, &dir);
        if !(d0 < 0.0) {
            memory.clear();
            dir = g.iter().map(|v| -v).collect();
            d0 = -gnorm * gnorm;
        }
        let alpha_init = if memory.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };

        let mut line = Line {
            objective: &mut objective,
            x0: &x,
            dir: &dir,
        };
        let step = match strong_wolfe(&mut line, f, d0, alpha_init, opts) {
            Some(p) => p,
            None if !memory.is_empty() => {
                // Discard curvature pairs and retry along steepest descent.
                memory.clear();
                continue;
            }
            None => break,
        };

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let f_prev = f;
        x = step.x;
        g = step.g;
        f = step.f;
        history.push(f);
        iterations += 1;

        if (f_prev - f).abs() <= opts.loss_tol * f_prev.abs().max(f.abs()) {
            converged = true;
            break;
        }
    }
    LbfgsOutcome {
        grad_norm: norm(&g),
        x,
        f,
        iterations,
        converged,
        history,
    }
}
