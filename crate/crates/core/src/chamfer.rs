//! Directional Chamfer Distance between two functional representations.
//!
//! Each pair is matched to the counterpart minimizing
//! `‖p − p′‖ − λ⟨n, n′⟩` (position and direction jointly), in both directions,
//! and the two mean minima are summed. Functional similarity is the negative.
//! The norm is smoothed as `√(d² + ε²) − ε`, which is exactly Euclidean at
//! `ε = 0`.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::WorldFuncRep;
use crate::kinematics::GradientCotangent;
use crate::spatial::PointGrid;

/// Above this many candidates the nearest-term search goes through a grid.
pub const BRUTE_FORCE_LIMIT: usize = 512;

/// Smoothing used while optimizing; evaluation and reporting use zero.
pub const OPTIMIZATION_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Weight of the directional term, meters per unit cosine.
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            lambda: 0.5,
            epsilon: 0.0,
        }
    }
}

impl MetricConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "metric needs lambda >= 0 and epsilon >= 0 (got {}, {})",
                self.lambda, self.epsilon
            )));
        }
        Ok(())
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        MetricConfig { epsilon, ..self }
    }

    #[inline]
    fn smoothed_norm(&self, d: &Vector3<f64>) -> f64 {
        (d.norm_squared() + self.epsilon * self.epsilon).sqrt() - self.epsilon
    }

    #[inline]
    fn term(&self, p: &Point3<f64>, n: &Vector3<f64>, q: &Point3<f64>, m: &Vector3<f64>) -> f64 {
        self.smoothed_norm(&(p - q)) - self.lambda * n.dot(m)
    }
}

/// DCD value together with the recorded minimizing correspondences.
#[derive(Clone, Debug, PartialEq)]
pub struct DcdEval {
    pub value: f64,
    /// For each entry of X, the matched index in X′.
    pub forward: Vec<usize>,
    /// For each entry of X′, the matched index in X.
    pub backward: Vec<usize>,
}

fn check_pair(x: &WorldFuncRep, y: &WorldFuncRep, cfg: &MetricConfig) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("functional representation"));
    }
    cfg.check()
}

/// For every entry of `from`, the minimizing index in `to` and the term value.
fn one_sided(from: &WorldFuncRep, to: &WorldFuncRep, cfg: &MetricConfig) -> (f64, Vec<usize>) {
    let mut sum = 0.0;
    let mut idx = Vec::with_capacity(from.len());
    if to.len() <= BRUTE_FORCE_LIMIT {
        for (p, n) in from.points.iter().zip(&from.directions) {
            let (v, j) = brute_min(p, n, to, cfg);
            sum += v;
            idx.push(j);
        }
    } else {
        let grid = PointGrid::new(&to.points, PointGrid::auto_cell(&to.points, 4.0));
        for (p, n) in from.points.iter().zip(&from.directions) {
            let (v, j) = grid_min(p, n, to, &grid, cfg);
            sum += v;
            idx.push(j);
        }
    }
    (sum / from.len() as f64, idx)
}

fn brute_min(p: &Point3<f64>, n: &Vector3<f64>, to: &WorldFuncRep, cfg: &MetricConfig) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    for (j, (q, m)) in to.points.iter().zip(&to.directions).enumerate() {
        let v = cfg.term(p, n, q, m);
        if v < best.0 {
            best = (v, j);
        }
    }
    best
}

fn grid_min(p: &Point3<f64>, n: &Vector3<f64>, to: &WorldFuncRep, grid: &PointGrid, cfg: &MetricConfig) -> (f64, usize) {
    let center = grid.key_of(p);
    let last = grid.max_ring(center);
    let mut best = (f64::INFINITY, usize::MAX);
    for r in 0..=last {
        // Every candidate in this ring has term ≥ s(bound) − λ.
        let bound = grid.ring_lower_bound(r);
        let floor = (bound * bound + cfg.epsilon * cfg.epsilon).sqrt() - cfg.epsilon - cfg.lambda;
        if floor > best.0 {
            break;
        }
        grid.for_each_in_ring(center, r, |j| {
            let v = cfg.term(p, n, &to.points[j], &to.directions[j]);
            if v < best.0 || (v == best.0 && j < best.1) {
                best = (v, j);
            }
        });
    }
    best
}

pub fn dcd_eval(x: &WorldFuncRep, y: &WorldFuncRep, cfg: &MetricConfig) -> Result<DcdEval> {
    check_pair(x, y, cfg)?;
    let (fwd, forward) = one_sided(x, y, cfg);
    let (bwd, backward) = one_sided(y, x, cfg);
    Ok(DcdEval {
        value: fwd + bwd,
        forward,
        backward,
    })
}

pub fn dcd(x: &WorldFuncRep, y: &WorldFuncRep, cfg: &MetricConfig) -> Result<f64> {
    dcd_eval(x, y, cfg).map(|e| e.value)
}

pub fn functional_similarity(x: &WorldFuncRep, y: &WorldFuncRep, cfg: &MetricConfig) -> Result<f64> {
    dcd(x, y, cfg).map(|v| -v)
}

/// DCD of one reference against many candidates, in candidate order.
pub fn dcd_batch(x: &WorldFuncRep, candidates: &[WorldFuncRep], cfg: &MetricConfig) -> Result<Vec<f64>> {
    candidates.par_iter().map(|y| dcd(x, y, cfg)).collect()
}

/// Gradient of DCD with respect to the points and (ambient) directions of
/// `y`, holding the correspondences in `eval` fixed.
pub fn cotangent_from_eval(x: &WorldFuncRep, y: &WorldFuncRep, eval: &DcdEval, cfg: &MetricConfig) -> GradientCotangent {
    let mut g = GradientCotangent::zeros(y.len());
    let wx = 1.0 / x.len() as f64;
    let wy = 1.0 / y.len() as f64;
    let mut add = |i: usize, j: usize, w: f64| {
        let d = y.points[j] - x.points[i];
        let r = (d.norm_squared() + cfg.epsilon * cfg.epsilon).sqrt();
        if r > 0.0 {
            g.points[j] += d * (w / r);
        }
        g.directions[j] -= x.directions[i] * (cfg.lambda * w);
    };
    for (i, &j) in eval.forward.iter().enumerate() {
        add(i, j, wx);
    }
    for (j, &i) in eval.backward.iter().enumerate() {
        add(i, j, wy);
    }
    g
}

pub fn dcd_cotangent(x: &WorldFuncRep, y: &WorldFuncRep, cfg: &MetricConfig) -> Result<GradientCotangent> {
    let eval = dcd_eval(x, y, cfg)?;
    Ok(cotangent_from_eval(x, y, &eval, cfg))
}
