//! Frame-by-frame alignment of a target embodiment to a source functional
//! representation trajectory.
//!
//! Each frame minimizes `w1 · DCD(X_t, X′(q)) + w2 · limit_penalty(q)` by
//! first-order steps from a warm start (the previous frame's optimum), keeping
//! the best iterate seen and stopping once the best loss has not improved for
//! `patience` consecutive steps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chamfer::{cotangent_from_eval, dcd, dcd_eval, MetricConfig, OPTIMIZATION_EPSILON};
use crate::error::{Error, Result};
use crate::funcrep::{FuncRepTrajectory, FunctionalTemplate, WorldFuncRep};
use crate::kinematics::{
    entry_jacobians, evaluate_world_set_batch, forward_kinematics, pullback_with_poses, world_set_from_poses, LocalPointSet,
};
use crate::robot::mesh::rng_from_seed;
use crate::robot::{Embodiment, JointConfiguration, JointKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    PlainGradient,
    AdaptiveMoments,
    /// Levenberg–Marquardt steps on the majorizing quadratic of the loss,
    /// with correspondences held fixed per step. Falls back to adaptive
    /// moments for objectives that supply no curvature.
    DampedGaussNewton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    pub metric: MetricConfig,
    pub w1: f64,
    pub w2: f64,
    pub max_steps: usize,
    pub patience: usize,
    pub step_size: f64,
    pub optimizer: OptimizerKind,
    pub improvement_tol: f64,
    pub clamp_output: bool,
    /// Factor applied to the step size after a step that fails to lower the
    /// loss; the iterate then restarts from the best point. `1.0` disables
    /// backtracking and the optimizer follows its raw trajectory.
    pub step_decay: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            metric: MetricConfig {
                lambda: 0.5,
                epsilon: OPTIMIZATION_EPSILON,
            },
            w1: 1.0,
            w2: 1.0,
            max_steps: 300,
            patience: 10,
            step_size: 0.01,
            optimizer: OptimizerKind::DampedGaussNewton,
            improvement_tol: 1e-8,
            clamp_output: true,
            step_decay: 1.0,
        }
    }
}

impl AlignmentConfig {
    pub fn check(&self) -> Result<()> {
        self.metric.check()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return bad("weights must be non-negative");
        }
        if self.max_steps < 1 {
            return bad("max steps must be at least 1");
        }
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if !(self.step_size > 0.0) {
            return bad("step size must be positive");
        }
        if !(self.improvement_tol >= 0.0) {
            return bad("improvement tolerance must be non-negative");
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return bad("step decay must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    /// Best alignment loss reached (optimization smoothing applied).
    pub final_loss: f64,
    /// DCD of the returned configuration, unsmoothed.
    pub final_dcd: f64,
    pub final_penalty: f64,
    pub steps: usize,
    pub early_stopped: bool,
    /// Best loss after each step; non-increasing.
    #[serde(skip)]
    pub best_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignedTrajectory {
    pub configs: Vec<JointConfiguration>,
    pub diagnostics: Vec<FrameDiagnostics>,
}

impl AlignedTrajectory {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

/// Squared hinge on both joint limits.
pub fn joint_limit_penalty(q: &JointConfiguration, e: &Embodiment) -> Result<f64> {
    Ok(penalty_and_grad(q, e)?.0)
}

pub fn joint_limit_penalty_grad(q: &JointConfiguration, e: &Embodiment) -> Result<Vec<f64>> {
    Ok(penalty_and_grad(q, e)?.1)
}

fn penalty_and_grad(q: &JointConfiguration, e: &Embodiment) -> Result<(f64, Vec<f64>)> {
    if q.len() != e.dof() {
        return Err(Error::Dimension {
            what: "joint configuration",
            expected: e.dof(),
            got: q.len(),
        });
    }
    let mut total = 0.0;
    let mut grad = vec![0.0; q.len()];
    for (d, &ji) in e.dof_joints().iter().enumerate() {
        let (lo, hi) = (e.joints[ji].lower, e.joints[ji].upper);
        let v = q.0[d];
        if v > hi {
            total += (v - hi) * (v - hi);
            grad[d] = 2.0 * (v - hi);
        } else if v < lo {
            total += (lo - v) * (lo - v);
            grad[d] = -2.0 * (lo - v);
        }
    }
    Ok((total, grad))
}

/// A differentiable scalar objective over joint space.
pub trait Objective {
    fn evaluate(&self, q: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Loss, gradient and, when available, a positive semi-definite curvature
    /// model (row-major, `n × n`).
    fn evaluate_with_curvature(&self, q: &[f64]) -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
        let (l, g) = self.evaluate(q)?;
        Ok((l, g, None))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeOutcome {
    pub q: Vec<f64>,
    pub loss: f64,
    pub steps: usize,
    pub early_stopped: bool,
    pub best_trace: Vec<f64>,
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Moments {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn direction(&mut self, g: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        g.iter()
            .enumerate()
            .map(|(k, &gk)| {
                self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * gk;
                self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * gk * gk;
                (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS)
            })
            .collect()
    }
}

/// Step-capped first-order minimization with patience-based early stopping.
///
/// Step 0 evaluates `q_init`; each further step evaluates one new iterate. A
/// step counts as an improvement when it lowers the best loss by more than
/// `improvement_tol`. After `patience` consecutive non-improving steps the run
/// halts, so a loss that is flat after step `k` halts at step `k + patience`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, q_init: &[f64], cfg: &AlignmentConfig) -> Result<MinimizeOutcome> {
    cfg.check()?;
    let finite = |l: f64, g: &[f64]| l.is_finite() && g.iter().all(|v| v.is_finite());
    let n = q_init.len();
    let second_order = cfg.optimizer == OptimizerKind::DampedGaussNewton;
    let eval = |q: &[f64]| -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
        let (l, g, h) = if second_order {
            obj.evaluate_with_curvature(q)?
        } else {
            let (l, g) = obj.evaluate(q)?;
            (l, g, None)
        };
        if !finite(l, &g) {
            return Err(Error::NonFinite { frame: 0 });
        }
        Ok((l, g, h))
    };
    let (mut loss, mut grad, mut curv) = eval(q_init)?;
    let mut q = q_init.to_vec();
    let mut best_q = q.clone();
    let mut best = loss;
    let mut trace = Vec::with_capacity(cfg.max_steps);
    trace.push(best);
    let mut stall = 0usize;
    let mut lr = cfg.step_size;
    let mut damping = INITIAL_DAMPING;
    let mut moments = Moments::new(n);
    let backtrack = cfg.step_decay < 1.0;
    let mut steps = 1;
    let mut early = false;

    while steps < cfg.max_steps {
        let newton = curv.as_ref().and_then(|h| damped_step(h, &grad, damping));
        let step: Vec<f64> = match (&newton, cfg.optimizer) {
            (Some(d), _) => d.clone(),
            (None, OptimizerKind::PlainGradient) => grad.iter().map(|g| lr * g).collect(),
            (None, _) => moments.direction(&grad).iter().map(|d| lr * d).collect(),
        };
        let trial: Vec<f64> = q.iter().zip(&step).map(|(a, d)| a - d).collect();
        let (l, g, h) = eval(&trial)?;
        steps += 1;

        let improved = l < best - cfg.improvement_tol;
        if l < best {
            best = l;
            best_q.clone_from(&trial);
        }
        let reject = if newton.is_some() { l >= loss } else { backtrack && l >= loss };
        if reject {
            // The iterate stays put; retry with a more conservative step.
            if newton.is_some() {
                damping = (damping * DAMPING_UP).min(MAX_DAMPING);
            } else {
                lr *= cfg.step_decay;
            }
        } else {
            if newton.is_some() {
                damping = (damping / DAMPING_DOWN).max(MIN_DAMPING);
            }
            q = trial;
            loss = l;
            grad = g;
            curv = h;
        }
        trace.push(best);

        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                early = steps < cfg.max_steps;
                break;
            }
        }
    }
    Ok(MinimizeOutcome {
        q: best_q,
        loss: best,
        steps,
        early_stopped: early,
        best_trace: trace,
    })
}

const INITIAL_DAMPING: f64 = 1e-3;
const MIN_DAMPING: f64 = 1e-12;
const MAX_DAMPING: f64 = 1e12;
const DAMPING_UP: f64 = 4.0;
const DAMPING_DOWN: f64 = 3.0;
/// Largest change of any joint in one damped step (rad or m).
const MAX_NEWTON_STEP: f64 = 0.5;

/// Marquardt step `(H + μ·diag(H)) δ = g`, capped in max-norm. `None` when
/// the system cannot be factored.
fn damped_step(h: &DMatrix<f64>, g: &[f64], damping: f64) -> Option<Vec<f64>> {
    let n = g.len();
    if h.nrows() != n || h.ncols() != n {
        return None;
    }
    let scale = (0..n).map(|k| h[(k, k)]).fold(0.0, f64::max);
    let floor = 1e-9 * scale + 1e-12;
    let mut a = h.clone();
    for k in 0..n {
        a[(k, k)] += damping * h[(k, k)].max(floor);
    }
    let delta = a.cholesky()?.solve(&DVector::from_column_slice(g));
    let big = delta.amax();
    if !big.is_finite() {
        return None;
    }
    let shrink = if big > MAX_NEWTON_STEP { MAX_NEWTON_STEP / big } else { 1.0 };
    Some(delta.iter().map(|d| d * shrink).collect())
}

/// The alignment loss for one frame.
pub struct AlignObjective<'a> {
    pub target: &'a Embodiment,
    pub local: &'a LocalPointSet,
    pub reference: &'a WorldFuncRep,
    pub cfg: &'a AlignmentConfig,
}

impl AlignObjective<'_> {
    fn run(&self, q: &[f64], with_curvature: bool) -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
        let qc = JointConfiguration(q.to_vec());
        let poses = forward_kinematics(self.target, &qc)?;
        let world = world_set_from_poses(&poses, self.local);
        let metric = &self.cfg.metric;
        let eval = dcd_eval(self.reference, &world, metric)?;
        let cot = cotangent_from_eval(self.reference, &world, &eval, metric);
        let mut grad = pullback_with_poses(self.target, &poses, self.local, &cot);
        let (pen, pen_grad) = penalty_and_grad(&qc, self.target)?;
        for (g, pg) in grad.iter_mut().zip(&pen_grad) {
            *g = self.cfg.w1 * *g + self.cfg.w2 * pg;
        }
        let loss = self.cfg.w1 * eval.value + self.cfg.w2 * pen;
        if !with_curvature {
            return Ok((loss, grad, None));
        }

        // Majorizer of each matched term: s(|r|) by |r|²/(2ρ) with
        // ρ = √(|r|² + ε²), and −λ⟨n, n′⟩ by λ|n′ − n|²/2 (unit vectors).
        let x = self.reference;
        let (wx, wy) = (1.0 / x.len() as f64, 1.0 / world.len() as f64);
        let mut cp = vec![0.0; world.len()];
        let mut cn = vec![0.0; world.len()];
        let mut add = |i: usize, j: usize, w: f64| {
            let rho = ((world.points[j] - x.points[i]).norm_squared() + metric.epsilon * metric.epsilon).sqrt();
            if rho > 0.0 {
                cp[j] += w / rho;
            }
            cn[j] += metric.lambda * w;
        };
        for (i, &j) in eval.forward.iter().enumerate() {
            add(i, j, wx);
        }
        for (j, &i) in eval.backward.iter().enumerate() {
            add(i, j, wy);
        }
        let jac = entry_jacobians(self.target, &poses, self.local);
        let n = jac.dof;
        let mut h = DMatrix::<f64>::zeros(n, n);
        for j in 0..world.len() {
            let jp = &jac.points[j * n..(j + 1) * n];
            let jn = &jac.directions[j * n..(j + 1) * n];
            for a in 0..n {
                for b in a..n {
                    let v = cp[j] * jp[a].dot(&jp[b]) + cn[j] * jn[a].dot(&jn[b]);
                    h[(a, b)] += v;
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h *= self.cfg.w1;
        for (d, pg) in pen_grad.iter().enumerate() {
            if *pg != 0.0 {
                h[(d, d)] += 2.0 * self.cfg.w2;
            }
        }
        Ok((loss, grad, Some(h)))
    }
}

impl Objective for AlignObjective<'_> {
    fn evaluate(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (l, g, _) = self.run(q, false)?;
        Ok((l, g))
    }

    fn evaluate_with_curvature(&self, q: &[f64]) -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
        self.run(q, true)
    }
}

fn align_with_local(
    target: &Embodiment,
    local: &LocalPointSet,
    reference: &WorldFuncRep,
    q_init: &JointConfiguration,
    cfg: &AlignmentConfig,
) -> Result<(JointConfiguration, FrameDiagnostics)> {
    q_init.check(target)?;
    let obj = AlignObjective {
        target,
        local,
        reference,
        cfg,
    };
    let out = minimize(&obj, q_init.as_slice(), cfg)?;
    let mut q = JointConfiguration(out.q);
    if cfg.clamp_output {
        q = target.clamp(&q);
    }
    let world = world_set_from_poses(&forward_kinematics(target, &q)?, local);
    let final_dcd = dcd(reference, &world, &cfg.metric.with_epsilon(0.0))?;
    let final_penalty = joint_limit_penalty(&q, target)?;
    Ok((
        q,
        FrameDiagnostics {
            final_loss: out.loss,
            final_dcd,
            final_penalty,
            steps: out.steps,
            early_stopped: out.early_stopped,
            best_trace: out.best_trace,
        },
    ))
}

pub fn align_frame(
    target: &Embodiment,
    template: &FunctionalTemplate,
    reference: &WorldFuncRep,
    q_init: &JointConfiguration,
    cfg: &AlignmentConfig,
) -> Result<(JointConfiguration, FrameDiagnostics)> {
    let local = template.local_set(target)?;
    align_with_local(target, &local, reference, q_init, cfg)
}

/// Align every frame in order, warm-starting each from the previous optimum.
pub fn align_trajectory(
    source: &FuncRepTrajectory,
    target: &Embodiment,
    template: &FunctionalTemplate,
    q0: &JointConfiguration,
    cfg: &AlignmentConfig,
) -> Result<AlignedTrajectory> {
    if source.is_empty() {
        return Err(Error::Empty("source trajectory"));
    }
    cfg.check()?;
    let local = template.local_set(target)?;
    let mut configs = Vec::with_capacity(source.len());
    let mut diagnostics = Vec::with_capacity(source.len());
    let mut init = q0.clone();
    for (t, frame) in source.frames.iter().enumerate() {
        let (q, d) = align_with_local(target, &local, frame, &init, cfg).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { frame: t },
            e => e.in_frame(t),
        })?;
        init = q.clone();
        configs.push(q);
        diagnostics.push(d);
    }
    Ok(AlignedTrajectory { configs, diagnostics })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EisOutcome {
    pub config: JointConfiguration,
    pub candidates: Vec<JointConfiguration>,
    /// Functional similarity of each candidate against the reference.
    pub scores: Vec<f64>,
    /// Candidate indices of the elite set, best first.
    pub elite: Vec<usize>,
    /// Revolute joints whose elite values span more than π; their arithmetic
    /// mean may not be a meaningful angle.
    pub wide_spread: Vec<String>,
}

/// Elite-based initialization: sample `samples` configurations uniformly within
/// the joint limits, keep the best `⌈samples · fraction⌉` by functional
/// similarity to `reference`, and return their mean.
pub fn eis_initialize(
    target: &Embodiment,
    template: &FunctionalTemplate,
    reference: &WorldFuncRep,
    samples: usize,
    fraction: f64,
    seed: u64,
    cfg: &AlignmentConfig,
) -> Result<EisOutcome> {
    use rand::Rng;
    if samples < 10 {
        return Err(Error::InvalidArgument("EIS needs at least 10 samples".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument("elite fraction must lie in (0, 1]".into()));
    }
    let local = template.local_set(target)?;
    let lower = target.lower_limits();
    let upper = target.upper_limits();
    let mut rng = rng_from_seed(seed);
    let candidates: Vec<JointConfiguration> = (0..samples)
        .map(|_| {
            JointConfiguration(
                lower
                    .iter()
                    .zip(&upper)
                    .map(|(&lo, &hi)| {
                        let u: f64 = rng.random();
                        if hi > lo {
                            lo + u * (hi - lo)
                        } else {
                            lo
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    let metric = cfg.metric.with_epsilon(0.0);
    let worlds = evaluate_world_set_batch(target, &candidates, &local)?;
    let scores: Vec<f64> = worlds
        .par_iter()
        .map(|w| dcd(reference, w, &metric).map(|v| -v))
        .collect::<Result<_>>()?;

    let k = ((samples as f64 * fraction - 1e-9).ceil() as usize).clamp(1, samples);
    let mut order: Vec<usize> = (0..samples).collect();
    // Stable: equal scores keep the lower index first.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let elite: Vec<usize> = order[..k].to_vec();

    let anchor = &candidates[elite[0]].0;
    let mean: Vec<f64> = (0..target.dof())
        .map(|d| anchor[d] + elite.iter().map(|&i| candidates[i].0[d] - anchor[d]).sum::<f64>() / k as f64)
        .collect();
    let wide_spread = target
        .dof_joints()
        .iter()
        .enumerate()
        .filter(|(_, &ji)| target.joints[ji].kind == JointKind::Revolute)
        .filter(|(d, _)| {
            let (lo, hi) = elite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(candidates[i].0[*d]), hi.max(candidates[i].0[*d]))
            });
            hi - lo > std::f64::consts::PI
        })
        .map(|(_, &ji)| target.joints[ji].name.clone())
        .collect();
    Ok(EisOutcome {
        config: JointConfiguration(mean),
        candidates,
        scores,
        elite,
        wide_spread,
    })
}
