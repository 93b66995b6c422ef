use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{GlobalStats, Hyperparams, ModelSpec, VariationalParams};
use crate::network::DynamicNetwork;
use crate::vem::elbo::{beta_block, edge_block, hyper_objective, EdgeSelection, HyperGradient};
use crate::vem::lbfgs::{minimize, LbfgsConfig};

/// Maps the free hyperparameters to a flat vector: `B` cells (upper triangle
/// when undirected), non-reference `beta` slices, then `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub k: usize,
    pub m: usize,
    pub jx: usize,
    pub jd: usize,
    pub directed: bool,
}

impl ParamLayout {
    pub fn new(spec: &ModelSpec, net: &DynamicNetwork) -> Self {
        ParamLayout {
            k: spec.k,
            m: spec.m,
            jx: net.jx(),
            jd: net.jd(),
            directed: spec.directed,
        }
    }

    pub fn of(hyper: &Hyperparams, directed: bool) -> Self {
        ParamLayout {
            k: hyper.k,
            m: hyper.m,
            jx: hyper.jx,
            jd: hyper.jd,
            directed,
        }
    }

    fn b_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.k;
        (0..k).flat_map(move |g| (0..k).map(move |h| (g, h))).filter(|&(g, h)| self.directed || g <= h)
    }

    pub fn n_b(&self) -> usize {
        if self.directed {
            self.k * self.k
        } else {
            self.k * (self.k + 1) / 2
        }
    }

    pub fn n_beta(&self) -> usize {
        self.m * self.k.saturating_sub(1) * self.jx
    }

    pub fn len(&self) -> usize {
        self.n_b() + self.n_beta() + self.jd
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pack_parts(&self, b: &[f64], beta: &[f64], gamma: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for (g, h) in self.b_cells() {
            v.push(b[g * self.k + h]);
        }
        for m in 0..self.m {
            for k in 1..self.k {
                for j in 0..self.jx {
                    v.push(beta[(m * self.k + k) * self.jx + j]);
                }
            }
        }
        v.extend_from_slice(gamma);
        v
    }

    pub fn pack(&self, hyper: &Hyperparams) -> Vec<f64> {
        self.pack_parts(&hyper.b, &hyper.beta, &hyper.gamma)
    }

    pub fn pack_gradient(&self, g: &HyperGradient) -> Vec<f64> {
        self.pack_parts(&g.b, &g.beta, &g.gamma)
    }

    pub fn unpack(&self, v: &[f64]) -> Hyperparams {
        let mut h = Hyperparams::zeros(self.k, self.m, self.jx, self.jd);
        let mut it = v.iter().copied();
        for (g, hh) in self.b_cells().collect::<Vec<_>>() {
            let val = it.next().expect("layout length");
            h.set_b(g, hh, val);
            if !self.directed {
                h.set_b(hh, g, val);
            }
        }
        for m in 0..self.m {
            for k in 1..self.k {
                for j in 0..self.jx {
                    h.set_beta(m, k, j, it.next().expect("layout length"));
                }
            }
        }
        for g in h.gamma.iter_mut() {
            *g = it.next().expect("layout length");
        }
        h
    }

    /// Human-readable parameter names, in packing order.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.b_cells().map(|(g, h)| format!("B[{}][{}]", g + 1, h + 1)).collect();
        for m in 0..self.m {
            for k in 1..self.k {
                for j in 0..self.jx {
                    out.push(format!("beta[{}][{}][{}]", m + 1, k + 1, j + 1));
                }
            }
        }
        out.extend((0..self.jd).map(|j| format!("gamma[{}]", j + 1)));
        out
    }
}

#[derive(Clone, Debug)]
pub struct MStepOutcome {
    pub hyper: Hyperparams,
    pub objective: f64,
    pub iters: usize,
    /// The quasi-Newton search stalled; `hyper` is the best point found and
    /// is never worse than the starting point.
    pub line_search_failed: bool,
}

pub(crate) fn optimize_hyper(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper0: &Hyperparams,
    spec: &ModelSpec,
    sel: &EdgeSelection,
    max_iter: usize,
) -> Result<MStepOutcome> {
    let (f0, _) = hyper_objective(net, vp, stats, hyper0, spec, sel, false)?;
    let (beta, beta_iters, beta_stalled) = optimize_beta(net, vp, stats, hyper0, spec, max_iter)?;
    let mut hyper = hyper0.clone();
    hyper.beta = beta;
    let (edge_iters, edge_stalled) = newton_edge(net, vp, &mut hyper, spec, sel, max_iter)?;
    let (f, _) = hyper_objective(net, vp, stats, &hyper, spec, sel, false)?;
    let iters = beta_iters.max(edge_iters);
    if beta_stalled || edge_stalled {
        warn!("M-step search stalled after {} iterations", iters);
    }
    if !f.is_finite() || f < f0 {
        return Ok(MStepOutcome {
            hyper: hyper0.clone(),
            objective: f0,
            iters,
            line_search_failed: true,
        });
    }
    Ok(MStepOutcome {
        hyper,
        objective: f,
        iters,
        line_search_failed: beta_stalled || edge_stalled,
    })
}

fn optimize_beta(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper0: &Hyperparams,
    spec: &ModelSpec,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, bool)> {
    let free: Vec<usize> = (0..spec.m)
        .flat_map(|m| (1..spec.k).flat_map(move |k| (0..hyper0.jx).map(move |j| (m, k, j))))
        .map(|(m, k, j)| hyper0.beta_index(m, k, j))
        .collect();
    if free.is_empty() {
        return Ok((hyper0.beta.clone(), 0, false));
    }
    let x0: Vec<f64> = free.iter().map(|&i| hyper0.beta[i]).collect();
    let cfg = LbfgsConfig {
        max_iter,
        ..LbfgsConfig::default()
    };
    let mut h = hyper0.clone();
    let objective = |x: &[f64]| {
        for (&i, &v) in free.iter().zip(x) {
            h.beta[i] = v;
        }
        match beta_block(net, vp, stats, &h, spec) {
            Ok((v, g)) => Some((-v, free.iter().map(|&i| -g[i]).collect())),
            Err(_) => None,
        }
    };
    let res = minimize(objective, &x0, &cfg);
    let mut beta = hyper0.beta.clone();
    if res.f.is_finite() {
        for (&i, &v) in free.iter().zip(&res.x) {
            beta[i] = v;
        }
    }
    Ok((beta, res.iters, res.line_search_failed))
}

fn set_edge_params(hyper: &mut Hyperparams, x: &[f64], directed: bool) {
    let k = hyper.k;
    let mut c = 0;
    for g in 0..k {
        for h in 0..k {
            if directed || g <= h {
                hyper.set_b(g, h, x[c]);
                if !directed {
                    hyper.set_b(h, g, x[c]);
                }
                c += 1;
            }
        }
    }
    hyper.gamma.copy_from_slice(&x[c..]);
}

fn edge_params(hyper: &Hyperparams, directed: bool) -> Vec<f64> {
    let k = hyper.k;
    let mut x: Vec<f64> = (0..k)
        .flat_map(|g| (0..k).map(move |h| (g, h)))
        .filter(|&(g, h)| directed || g <= h)
        .map(|(g, h)| hyper.b(g, h))
        .collect();
    x.extend_from_slice(&hyper.gamma);
    x
}

/// Damped Newton ascent on the edge block. The objective is concave in
/// `(B, gamma)`, so the negated Hessian is positive definite.
fn newton_edge(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    hyper: &mut Hyperparams,
    spec: &ModelSpec,
    sel: &EdgeSelection,
    max_iter: usize,
) -> Result<(usize, bool)> {
    let mut x = edge_params(hyper, spec.directed);
    let n = x.len();
    let mut cur = edge_block(net, vp, hyper, spec, sel)?;
    for iter in 0..max_iter {
        let neg_h = DMatrix::from_row_slice(n, n, &cur.hess).map(|v| -v);
        let step = match neg_h.cholesky() {
            Some(ch) => ch.solve(&DVector::from_column_slice(&cur.grad)),
            None => DVector::from_column_slice(&cur.grad) * 1e-3,
        };
        let decrement: f64 = step.iter().zip(&cur.grad).map(|(d, g)| d * g).sum();
        if step.amax() < 1e-10 || decrement < 2e-12 * cur.value.abs().max(1.0) {
            return Ok((iter, false));
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            set_edge_params(hyper, &trial, spec.directed);
            if let Ok(blk) = edge_block(net, vp, hyper, spec, sel) {
                if blk.value >= cur.value {
                    accepted = Some((trial, blk));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, blk)) => {
                x = trial;
                cur = blk;
            }
            None => {
                set_edge_params(hyper, &x, spec.directed);
                return Ok((iter, true));
            }
        }
    }
    set_edge_params(hyper, &x, spec.directed);
    Ok((max_iter, false))
}

/// Maximizes the bound over `(B, beta, gamma)` with the variational
/// parameters held fixed.
pub fn m_step(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper0: &Hyperparams,
    spec: &ModelSpec,
    max_iter: usize,
) -> Result<MStepOutcome> {
    optimize_hyper(net, vp, stats, hyper0, spec, &EdgeSelection::All, max_iter)
}
