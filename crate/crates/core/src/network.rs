//! Dynamic network container: per-period node presence, modeled dyads with
//! binary outcomes, monadic covariates per node-period and dyadic covariates
//! per dyad-period.
//!
//! Node-periods are addressed by a dense *slot* index (period-major, nodes in
//! registry order). Dyads are stored once per period in `(t, p, q)` order;
//! undirected networks keep only `p < q`.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One modeled dyad-period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dyad {
    pub t: usize,
    /// Sender (lower id when undirected), global node index.
    pub p: usize,
    /// Receiver (higher id when undirected), global node index.
    pub q: usize,
    /// Slot of `(p, t)`.
    pub p_slot: usize,
    /// Slot of `(q, t)`.
    pub q_slot: usize,
    pub y: bool,
}

/// Raw dyad input used by [`NetworkParts`].
#[derive(Clone, Debug, PartialEq)]
pub struct DyadRecord {
    pub t: usize,
    pub p: usize,
    pub q: usize,
    pub y: bool,
    pub d: Vec<f64>,
}

/// Unvalidated network description.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkParts {
    pub directed: bool,
    pub node_ids: Vec<String>,
    pub period_labels: Vec<i64>,
    pub x_names: Vec<String>,
    pub d_names: Vec<String>,
    /// Per period, the present nodes with their monadic covariate rows.
    pub monadic: Vec<Vec<(usize, Vec<f64>)>>,
    pub dyads: Vec<DyadRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicNetwork {
    directed: bool,
    node_ids: Vec<String>,
    period_labels: Vec<i64>,
    x_names: Vec<String>,
    d_names: Vec<String>,
    /// Per period, sorted global node indices.
    present: Vec<Vec<usize>>,
    /// `slot_of[t][node]`.
    slot_of: Vec<Vec<Option<usize>>>,
    slot_node: Vec<usize>,
    slot_period: Vec<usize>,
    x: Vec<f64>,
    dyads: Vec<Dyad>,
    d: Vec<f64>,
    period_ranges: Vec<Range<usize>>,
    n_inter: Vec<usize>,
}

impl DynamicNetwork {
    pub fn from_parts(parts: NetworkParts) -> Result<Self> {
        let NetworkParts {
            directed,
            node_ids,
            period_labels,
            x_names,
            d_names,
            mut monadic,
            mut dyads,
        } = parts;
        let n_periods = period_labels.len();
        let n_nodes = node_ids.len();
        let jx = x_names.len();
        let jd = d_names.len();
        if n_periods == 0 {
            return Err(Error::InvalidNetwork("network has no periods".into()));
        }
        if monadic.len() != n_periods {
            return Err(Error::InvalidNetwork(format!(
                "monadic rows given for {} periods, expected {}",
                monadic.len(),
                n_periods
            )));
        }
        let mut seen = HashSet::new();
        for id in &node_ids {
            if !seen.insert(id) {
                return Err(Error::InvalidNetwork(format!("duplicate node id {id:?}")));
            }
        }

        let mut present = Vec::with_capacity(n_periods);
        let mut slot_of = vec![vec![None; n_nodes]; n_periods];
        let mut slot_node = Vec::new();
        let mut slot_period = Vec::new();
        let mut x = Vec::new();
        for (t, rows) in monadic.iter_mut().enumerate() {
            rows.sort_by_key(|(node, _)| *node);
            let mut nodes = Vec::with_capacity(rows.len());
            for (node, row) in rows.iter() {
                if *node >= n_nodes {
                    return Err(Error::InvalidNetwork(format!(
                        "node index {node} out of range in period {t}"
                    )));
                }
                if slot_of[t][*node].is_some() {
                    return Err(Error::InvalidNetwork(format!(
                        "node {:?} listed twice in period {}",
                        node_ids[*node], period_labels[t]
                    )));
                }
                if row.len() != jx {
                    return Err(Error::Dimension(format!(
                        "monadic row for node {:?} at period {} has {} columns, expected {jx}",
                        node_ids[*node],
                        period_labels[t],
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "monadic covariates of node {:?} at period {}",
                        node_ids[*node], period_labels[t]
                    )));
                }
                slot_of[t][*node] = Some(slot_node.len());
                slot_node.push(*node);
                slot_period.push(t);
                x.extend_from_slice(row);
                nodes.push(*node);
            }
            present.push(nodes);
        }

        dyads.sort_by_key(|r| (r.t, r.p, r.q));
        let mut out_dyads = Vec::with_capacity(dyads.len());
        let mut d = Vec::with_capacity(dyads.len() * jd);
        let mut n_inter = vec![0usize; slot_node.len()];
        let mut period_ranges = vec![0..0; n_periods];
        let mut start = 0;
        for t in 0..n_periods {
            let begin = out_dyads.len();
            while start < dyads.len() && dyads[start].t == t {
                let r = &dyads[start];
                start += 1;
                if r.p == r.q {
                    return Err(Error::InvalidNetwork(format!(
                        "self-loop on node {:?} at period {}",
                        node_ids.get(r.p).map(String::as_str).unwrap_or("?"),
                        period_labels[t]
                    )));
                }
                if !directed && r.p > r.q {
                    return Err(Error::InvalidNetwork(
                        "undirected dyads must be stored with p < q".into(),
                    ));
                }
                let lookup = |node: usize| slot_of[t].get(node).copied().flatten();
                let (p_slot, q_slot) = match (lookup(r.p), lookup(r.q)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::InvalidNetwork(format!(
                            "dyad ({}, {}) at period {} has an endpoint not present in that period",
                            r.p, r.q, period_labels[t]
                        )))
                    }
                };
                if let Some(prev) = out_dyads.last() {
                    let prev: &Dyad = prev;
                    if prev.t == t && prev.p == r.p && prev.q == r.q {
                        return Err(Error::InvalidNetwork(format!(
                            "duplicate dyad ({:?}, {:?}) at period {}",
                            node_ids[r.p], node_ids[r.q], period_labels[t]
                        )));
                    }
                }
                if r.d.len() != jd {
                    return Err(Error::Dimension(format!(
                        "dyadic row has {} columns, expected {jd}",
                        r.d.len()
                    )));
                }
                if r.d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "dyadic covariates of ({:?}, {:?}) at period {}",
                        node_ids[r.p], node_ids[r.q], period_labels[t]
                    )));
                }
                n_inter[p_slot] += 1;
                n_inter[q_slot] += 1;
                d.extend_from_slice(&r.d);
                out_dyads.push(Dyad {
                    t,
                    p: r.p,
                    q: r.q,
                    p_slot,
                    q_slot,
                    y: r.y,
                });
            }
            period_ranges[t] = begin..out_dyads.len();
        }
        if start != dyads.len() {
            return Err(Error::InvalidNetwork(format!(
                "dyad refers to period index {} but only {n_periods} periods exist",
                dyads[start].t
            )));
        }

        Ok(DynamicNetwork {
            directed,
            node_ids,
            period_labels,
            x_names,
            d_names,
            present,
            slot_of,
            slot_node,
            slot_period,
            x,
            dyads: out_dyads,
            d,
            period_ranges,
            n_inter,
        })
    }

    /// Rebuilds a [`NetworkParts`] description of this network.
    pub fn to_parts(&self) -> NetworkParts {
        let monadic = (0..self.n_periods())
            .map(|t| {
                self.present[t]
                    .iter()
                    .map(|&node| {
                        let slot = self.slot_of[t][node].expect("present node has a slot");
                        (node, self.x_row(slot).to_vec())
                    })
                    .collect()
            })
            .collect();
        let dyads = self
            .dyads
            .iter()
            .enumerate()
            .map(|(i, dy)| DyadRecord {
                t: dy.t,
                p: dy.p,
                q: dy.q,
                y: dy.y,
                d: self.d_row(i).to_vec(),
            })
            .collect();
        NetworkParts {
            directed: self.directed,
            node_ids: self.node_ids.clone(),
            period_labels: self.period_labels.clone(),
            x_names: self.x_names.clone(),
            d_names: self.d_names.clone(),
            monadic,
            dyads,
        }
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn n_periods(&self) -> usize {
        self.period_labels.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    pub fn period_labels(&self) -> &[i64] {
        &self.period_labels
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn d_names(&self) -> &[String] {
        &self.d_names
    }

    pub fn jx(&self) -> usize {
        self.x_names.len()
    }

    pub fn jd(&self) -> usize {
        self.d_names.len()
    }

    /// Present nodes at `t`, ascending.
    pub fn present(&self, t: usize) -> &[usize] {
        &self.present[t]
    }

    pub fn n_present(&self, t: usize) -> usize {
        self.present[t].len()
    }

    pub fn n_slots(&self) -> usize {
        self.slot_node.len()
    }

    pub fn slot(&self, t: usize, node: usize) -> Option<usize> {
        self.slot_of.get(t)?.get(node).copied().flatten()
    }

    pub fn slot_node(&self, slot: usize) -> usize {
        self.slot_node[slot]
    }

    pub fn slot_period(&self, slot: usize) -> usize {
        self.slot_period[slot]
    }

    /// Slots of period `t` (contiguous).
    pub fn period_slots(&self, t: usize) -> Range<usize> {
        let start = self.present[..t].iter().map(Vec::len).sum::<usize>();
        start..start + self.present[t].len()
    }

    pub fn x_row(&self, slot: usize) -> &[f64] {
        let jx = self.jx();
        &self.x[slot * jx..(slot + 1) * jx]
    }

    pub fn dyads(&self) -> &[Dyad] {
        &self.dyads
    }

    pub fn n_dyads(&self) -> usize {
        self.dyads.len()
    }

    pub fn d_row(&self, dyad: usize) -> &[f64] {
        let jd = self.jd();
        &self.d[dyad * jd..(dyad + 1) * jd]
    }

    pub fn period_dyads(&self, t: usize) -> Range<usize> {
        self.period_ranges[t].clone()
    }

    /// Number of group indicators node-period `slot` instantiates.
    pub fn n_inter(&self, slot: usize) -> usize {
        self.n_inter[slot]
    }

    pub fn find_dyad(&self, t: usize, p: usize, q: usize) -> Option<usize> {
        let (p, q) = if self.directed || p < q { (p, q) } else { (q, p) };
        let range = self.period_ranges.get(t)?.clone();
        let slice = &self.dyads[range.clone()];
        slice
            .binary_search_by_key(&(p, q), |d| (d.p, d.q))
            .ok()
            .map(|i| range.start + i)
    }

    pub fn n_edges(&self, t: usize) -> usize {
        self.dyads[self.period_dyads(t)].iter().filter(|d| d.y).count()
    }

    /// Fraction of modeled dyads at `t` with an edge.
    pub fn density(&self, t: usize) -> f64 {
        let n = self.period_dyads(t).len();
        if n == 0 {
            0.0
        } else {
            self.n_edges(t) as f64 / n as f64
        }
    }

    /// Copy keeping only dyads for which `keep` returns true.
    pub fn filter_dyads(&self, mut keep: impl FnMut(usize) -> bool) -> Result<DynamicNetwork> {
        let mut parts = self.to_parts();
        let dyads = std::mem::take(&mut parts.dyads);
        parts.dyads = dyads
            .into_iter()
            .enumerate()
            .filter_map(|(i, r)| keep(i).then_some(r))
            .collect();
        DynamicNetwork::from_parts(parts)
    }

    /// Copy restricted to the first `n_periods` periods.
    pub fn window(&self, n_periods: usize) -> Result<DynamicNetwork> {
        if n_periods == 0 || n_periods > self.n_periods() {
            return Err(Error::InvalidConfig(format!(
                "window of {n_periods} periods outside 1..={}",
                self.n_periods()
            )));
        }
        let mut parts = self.to_parts();
        parts.period_labels.truncate(n_periods);
        parts.monadic.truncate(n_periods);
        parts.dyads.retain(|r| r.t < n_periods);
        DynamicNetwork::from_parts(parts)
    }

    /// Copy with monadic covariates replaced by `f(slot, row)`.
    pub fn map_x(&self, mut f: impl FnMut(usize, &mut [f64])) -> DynamicNetwork {
        let mut out = self.clone();
        let jx = out.jx();
        for slot in 0..out.n_slots() {
            f(slot, &mut out.x[slot * jx..(slot + 1) * jx]);
        }
        out
    }

    /// Copy keeping only the named monadic/dyadic columns (in the given order).
    pub fn select_covariates(&self, x_cols: &[usize], d_cols: &[usize]) -> Result<DynamicNetwork> {
        let mut parts = self.to_parts();
        if let Some(&c) = x_cols.iter().find(|&&c| c >= self.jx()) {
            return Err(Error::Dimension(format!("monadic column {c} out of range")));
        }
        if let Some(&c) = d_cols.iter().find(|&&c| c >= self.jd()) {
            return Err(Error::Dimension(format!("dyadic column {c} out of range")));
        }
        parts.x_names = x_cols.iter().map(|&c| self.x_names[c].clone()).collect();
        parts.d_names = d_cols.iter().map(|&c| self.d_names[c].clone()).collect();
        for rows in &mut parts.monadic {
            for (_, row) in rows.iter_mut() {
                *row = x_cols.iter().map(|&c| row[c]).collect();
            }
        }
        for r in &mut parts.dyads {
            r.d = d_cols.iter().map(|&c| r.d[c]).collect();
        }
        DynamicNetwork::from_parts(parts)
    }
}

/// All ordered (directed) or unordered (`p < q`) pairs among `nodes`.
pub fn all_pairs(nodes: &[usize], directed: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, &p) in nodes.iter().enumerate() {
        for (b, &q) in nodes.iter().enumerate() {
            if a == b || (!directed && b < a) {
                continue;
            }
            out.push((p, q));
        }
    }
    out
}
