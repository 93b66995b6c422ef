//! Limited-memory BFGS with Armijo backtracking, used for the M-step.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `max |grad| <= grad_tol`.
    pub grad_tol: f64,
    /// Stop when the relative decrease of the objective falls below this.
    pub f_tol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iter: 50,
            grad_tol: 1e-4,
            f_tol: 1e-12,
            armijo: 1e-4,
            max_backtracks: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Backtracking could not find a decrease; `x` is the best point seen.
    pub line_search_failed: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns `(value, gradient)`. A non-finite value is
/// treated as infeasible and triggers backtracking.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = match f(&x) {
        Some((v, g)) if v.is_finite() => (v, g),
        _ => {
            return LbfgsResult {
                x,
                f: f64::NAN,
                grad: vec![f64::NAN; n],
                iters: 0,
                converged: false,
                line_search_failed: true,
            }
        }
    };
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iters = 0;
    let mut converged = false;
    let mut line_search_failed = false;

    while iters < cfg.max_iter {
        if n == 0 || max_abs(&g) <= cfg.grad_tol {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let mut step = if hist.is_empty() {
            (1.0 / max_abs(&g)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + cfg.armijo * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        iters += 1;
        let Some((x_new, f_new, g_new)) = accepted else {
            if hist.is_empty() {
                line_search_failed = true;
                break;
            }
            hist.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        } else {
            hist.clear();
        }
        let decrease = fx - f_new;
        x = x_new;
        g = g_new;
        fx = f_new;
        if decrease <= cfg.f_tol * fx.abs().max(1.0) {
            converged = max_abs(&g) <= cfg.grad_tol.max(1e-6);
            break;
        }
    }

    LbfgsResult {
        x,
        f: fx,
        grad: g,
        iters,
        converged,
        line_search_failed,
    }
}
