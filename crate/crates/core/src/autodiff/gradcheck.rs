//! Central-difference verification of the tape's gradients. Every analytic
//! gradient is compared coordinate-by-coordinate against (f(x+h)−f(x−h))/2h
//! with a step-refinement ladder: a coordinate only counts as failing if it
//! disagrees at every step size, which filters the false alarms a kinked
//! activation produces when the probe crosses its corner.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, Graph, NodeId, ParamStore};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Base half-step for central differences.
    pub step: f64,
    /// Relative-error tolerance a coordinate must meet at some step size.
    pub tol_rel: f64,
    /// Coordinates sampled per tensor (all of them when the tensor is
    /// smaller than this).
    pub max_coords: usize,
    /// Seed for coordinate sampling.
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-5, tol_rel: 1e-4, max_coords: 24, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error over every checked coordinate.
    pub max_rel: f64,
    pub coords_checked: usize,
    /// Human-readable location of the worst coordinate.
    pub worst: String,
}

/// Relative disagreement with a floor so near-zero gradients compare
/// absolutely.
fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3)
}

fn evaluate(
    store: &ParamStore,
    inputs: &[Tensor],
    build: &dyn Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
) -> Result<f64> {
    let mut graph = Graph::new(store);
    let nodes: Vec<NodeId> = inputs.iter().map(|t| graph.input(t.clone())).collect();
    let loss = build(&mut graph, &nodes)?;
    graph.real(loss)?.item()
}

enum Target {
    Param(usize),
    Input(usize),
}

/// Checks d(loss)/d(every parameter and every input) against central
/// differences. `build` must construct the same graph for the same store
/// and input contents; parameters are reached through `Graph::param` inside
/// the closure, inputs through the node handles passed to it.
pub fn grad_check(
    store: &mut ParamStore,
    inputs: &mut [Tensor],
    build: &dyn Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    // Analytic pass.
    let (param_grads, input_grads): (Gradients, Vec<Option<Tensor>>) = {
        let mut graph = Graph::new(store);
        let nodes: Vec<NodeId> = inputs.iter().map(|t| graph.input(t.clone())).collect();
        let loss = build(&mut graph, &nodes)?;
        graph.backward(loss)?;
        let pg = graph.param_grads()?;
        let ig = nodes
            .iter()
            .map(|&n| graph.grad(n).map(|v| v.as_real().cloned()).transpose())
            .collect::<Result<Vec<_>>>()?;
        (pg, ig)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut targets: Vec<(Target, usize, f64)> = Vec::new();
    let param_ids: Vec<_> = store.ids().collect();
    for &pid in &param_ids {
        let n = store.value(pid).numel();
        let analytic = param_grads.get(pid).cloned();
        for ix in pick_coords(&mut rng, n, opts.max_coords) {
            let a = analytic.as_ref().map_or(0.0, |t| t.data()[ix]);
            targets.push((Target::Param(pid.0), ix, a));
        }
    }
    for (k, t) in inputs.iter().enumerate() {
        let analytic = input_grads[k].clone();
        for ix in pick_coords(&mut rng, t.numel(), opts.max_coords) {
            let a = analytic.as_ref().map_or(0.0, |t| t.data()[ix]);
            targets.push((Target::Input(k), ix, a));
        }
    }

    let ladder = [opts.step, opts.step / 8.0, opts.step / 64.0];
    let mut report = GradCheckReport { max_rel: 0.0, coords_checked: targets.len(), worst: String::new() };
    for (target, ix, analytic) in targets {
        let mut best = f64::INFINITY;
        for &h in &ladder {
            let nudge = |store: &mut ParamStore, inputs: &mut [Tensor], delta: f64| match target {
                Target::Param(p) => store.value_mut(super::ParamId(p)).data_mut()[ix] += delta,
                Target::Input(k) => inputs[k].data_mut()[ix] += delta,
            };
            nudge(store, inputs, h);
            let plus = evaluate(store, inputs, build)?;
            nudge(store, inputs, -2.0 * h);
            let minus = evaluate(store, inputs, build)?;
            nudge(store, inputs, h);
            let fd = (plus - minus) / (2.0 * h);
            best = best.min(rel_err(analytic, fd));
            if best <= opts.tol_rel {
                break;
            }
        }
        if best > report.max_rel {
            report.max_rel = best;
            report.worst = match target {
                Target::Param(p) => format!("param `{}`[{ix}]", store.name_of(super::ParamId(p))),
                Target::Input(k) => format!("input #{k}[{ix}]"),
            };
        }
    }
    Ok(report)
}

fn pick_coords(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        (0..n).collect()
    } else {
        rand::seq::index::sample(rng, n, max).into_vec()
    }
}
