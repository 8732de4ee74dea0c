//! Closed-loop simulation harness.
//!
//! Per step `t`: the minimax controller absorbs the transition into `x(t)`
//! (skipped at `t = 0`) and re-selects its models, every policy computes
//! controls from `x(t)`, the disturbance `w(t)` is drawn, and the plant
//! advances.

use serde::{Deserialize, Serialize};

use crate::controllers::{hinf_policy, zero_policy, ControlDecision, MinimaxController};
use crate::disturbances::{DisturbanceKind, DisturbanceSpec};
use crate::dynamics::{edge_diff_sum, infer_disturbance, step_network_distributed, step_node, UncertainNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Zero,
    Hinf,
    Minimax,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Zero => "zero",
            ControllerKind::Hinf => "hinf",
            ControllerKind::Minimax => "minimax",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "hinf" => Ok(Self::Hinf),
            "minimax" => Ok(Self::Minimax),
            other => Err(Error::InvalidParameter(format!("unknown controller {other:?}"))),
        }
    }
}

/// Time-indexed record of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub controller: ControllerKind,
    /// `T + 1` rows of `N` states.
    pub states: Vec<Vec<f64>>,
    /// `T` rows of `N` node controls.
    pub node_controls: Vec<Vec<f64>>,
    /// `T` rows of `E` edge inputs.
    pub edge_inputs: Vec<Vec<f64>>,
    /// `T` rows of `N` disturbances.
    pub disturbances: Vec<Vec<f64>>,
    /// `T` rows of `N` selected indices; empty unless minimax.
    pub selections: Vec<Vec<usize>>,
}

impl SimulationTrace {
    pub fn horizon(&self) -> usize {
        self.node_controls.len()
    }

    /// Largest deviation between recorded and re-stepped states.
    pub fn replay_max_error(&self, net: &UncertainNetwork) -> Result<f64> {
        let a = net.true_parameters();
        let mut worst = 0.0f64;
        for t in 0..self.horizon() {
            let g = net.graph();
            let bu = g.incidence_apply(&self.edge_inputs[t])?;
            for i in 0..net.node_count() {
                let next = a[i] * self.states[t][i] + net.b() * bu[i] + self.disturbances[t][i];
                worst = worst.max((next - self.states[t + 1][i]).abs());
            }
        }
        Ok(worst)
    }

    /// Largest deviation between recorded and inferred disturbances under the true models.
    pub fn disturbance_recovery_error(&self, net: &UncertainNetwork) -> f64 {
        let a = net.true_parameters();
        let g = net.graph();
        let mut worst = 0.0f64;
        for t in 0..self.horizon() {
            for i in 0..net.node_count() {
                let s = edge_diff_sum(g, i, &self.node_controls[t]);
                let w = infer_disturbance(a[i], net.b(), self.states[t][i], s, self.states[t + 1][i]);
                worst = worst.max((w - self.disturbances[t][i]).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub controller: ControllerKind,
    pub gamma_eval: f64,
    /// `sum_t x_i^2 + u_i^2 - gamma^2 w_i^2` per node.
    pub per_node_cost: Vec<f64>,
    pub total_cost: f64,
    pub state_energy: f64,
    pub control_energy: f64,
    /// Energy of the edge inputs `u_i - u_j`, kept alongside the node-control energy.
    pub edge_input_energy: f64,
    pub disturbance_energy: f64,
    /// `sqrt((state + control energy) / disturbance energy)`; `None` without disturbance energy.
    pub empirical_gain: Option<f64>,
    /// First `t` after which every node keeps selecting its true model (minimax only).
    pub convergence_time: Option<usize>,
    pub switch_count: Vec<usize>,
    pub nonzero_initial_state: bool,
}

/// Full outcome of a run, including the final minimax evidence.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: SimulationTrace,
    pub metrics: RunMetrics,
    /// Minimax node states after absorbing the transition into `x(T)`.
    pub minimax: Option<MinimaxController>,
}

/// Runs one controller against one disturbance for `horizon` steps.
pub fn run(
    net: &UncertainNetwork,
    controller: ControllerKind,
    disturbance: &DisturbanceSpec,
    horizon: usize,
    gamma_eval: f64,
    x0: &[f64],
) -> Result<(SimulationTrace, RunMetrics)> {
    let out = run_full(net, controller, disturbance, horizon, gamma_eval, x0)?;
    Ok((out.trace, out.metrics))
}

pub fn run_full(
    net: &UncertainNetwork,
    controller: ControllerKind,
    disturbance: &DisturbanceSpec,
    horizon: usize,
    gamma_eval: f64,
    x0: &[f64],
) -> Result<RunOutcome> {
    net.ensure_valid()?;
    disturbance.check(net)?;
    net.graph().check_len(x0.len())?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let g = net.graph();
    let a_true = net.true_parameters();
    let mut minimax = (controller == ControllerKind::Minimax).then(|| MinimaxController::new(g));

    let mut trace = SimulationTrace {
        controller,
        states: Vec::with_capacity(horizon + 1),
        node_controls: Vec::with_capacity(horizon),
        edge_inputs: Vec::with_capacity(horizon),
        disturbances: Vec::with_capacity(horizon),
        selections: Vec::new(),
    };
    trace.states.push(x0.to_vec());

    for t in 0..horizon {
        let x = &trace.states[t];
        let decision: ControlDecision = match (&mut minimax, controller) {
            (Some(ctl), _) => {
                if t > 0 {
                    ctl.observe(g, &trace.states[t - 1], x, &trace.node_controls[t - 1])?;
                }
                trace.selections.push(ctl.select(net)?);
                ctl.decide(net, x)?
            }
            (None, ControllerKind::Hinf) => hinf_policy(g, net.b(), x, &a_true)?,
            (None, _) => zero_policy(g),
        };
        let w = disturbance.sample(t, x, net)?;
        let next = step_network_distributed(net, &a_true, x, &decision.node_controls, &w)?;
        trace.node_controls.push(decision.node_controls);
        trace.edge_inputs.push(decision.edge_inputs);
        trace.disturbances.push(w);
        trace.states.push(next);
    }
    if let Some(ctl) = &mut minimax {
        ctl.observe(
            g,
            &trace.states[horizon - 1],
            &trace.states[horizon],
            &trace.node_controls[horizon - 1],
        )?;
    }

    let metrics = compute_metrics(net, &trace, gamma_eval);
    Ok(RunOutcome {
        trace,
        metrics,
        minimax,
    })
}

fn sum_sq(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flat_map(|r| r.iter()).map(|v| v * v).sum()
}

pub fn compute_metrics(net: &UncertainNetwork, trace: &SimulationTrace, gamma_eval: f64) -> RunMetrics {
    let n = net.node_count();
    let g2 = gamma_eval * gamma_eval;
    let per_node_cost: Vec<f64> = (0..n)
        .map(|i| {
            let xs: f64 = trace.states.iter().map(|r| r[i] * r[i]).sum();
            let us: f64 = trace.node_controls.iter().map(|r| r[i] * r[i]).sum();
            let ws: f64 = trace.disturbances.iter().map(|r| r[i] * r[i]).sum();
            xs + us - g2 * ws
        })
        .collect();
    let state_energy = sum_sq(&trace.states);
    let control_energy = sum_sq(&trace.node_controls);
    let disturbance_energy = sum_sq(&trace.disturbances);
    let empirical_gain = if disturbance_energy > 0.0 {
        Some(((state_energy + control_energy) / disturbance_energy).sqrt())
    } else if state_energy + control_energy == 0.0 {
        Some(0.0)
    } else {
        None
    };

    let switch_count = (0..n)
        .map(|i| {
            trace
                .selections
                .windows(2)
                .filter(|w| w[0][i] != w[1][i])
                .count()
        })
        .collect();

    RunMetrics {
        controller: trace.controller,
        gamma_eval,
        total_cost: per_node_cost.iter().sum(),
        per_node_cost,
        state_energy,
        control_energy,
        edge_input_energy: sum_sq(&trace.edge_inputs),
        disturbance_energy,
        empirical_gain,
        convergence_time: convergence_time(&trace.selections, net.true_index()),
        switch_count,
        nonzero_initial_state: trace.states[0].iter().any(|&v| v != 0.0),
    }
}

/// First `t` with `selections[s] == truth` for all `s >= t`, or `None` if that
/// point falls inside the last 10% of the horizon.
pub fn convergence_time(selections: &[Vec<usize>], truth: &[usize]) -> Option<usize> {
    let horizon = selections.len();
    if horizon == 0 {
        return None;
    }
    let t = selections
        .iter()
        .rposition(|row| row.as_slice() != truth)
        .map_or(0, |last_wrong| last_wrong + 1);
    let guard = horizon.div_ceil(10);
    (t + guard <= horizon).then_some(t)
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

/// Paired runs of all three controllers on one disturbance realisation.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub minimax: RunOutcome,
    pub hinf: RunOutcome,
    pub zero: RunOutcome,
    /// `||x_minimax(t) - x_hinf(t)||_1`, `T + 1` entries.
    pub state_diff_l1: Vec<f64>,
    /// `||u_minimax(t) - u_hinf(t)||_1` over edge inputs of the two trajectories, `T` entries.
    pub control_diff_l1: Vec<f64>,
    /// `||u_minimax(t) - K_true x_minimax(t)||_1`: the minimax inputs against the
    /// H-infinity law applied in hindsight to the same states.
    pub hindsight_control_diff_l1: Vec<f64>,
    /// `|x_minimax - x_hinf|` at node 0.
    pub first_node_state_diff: Vec<f64>,
    /// `|u_minimax - u_hinf|` on edge 0.
    pub first_edge_control_diff: Vec<f64>,
}

pub fn compare(
    net: &UncertainNetwork,
    disturbance: &DisturbanceSpec,
    horizon: usize,
    gamma_eval: f64,
    x0: &[f64],
) -> Result<Comparison> {
    // the three runs share nothing, so they go on separate threads
    let go = |kind| run_full(net, kind, disturbance, horizon, gamma_eval, x0);
    let (minimax, hinf, zero) = std::thread::scope(|s| {
        let h = s.spawn(|| go(ControllerKind::Hinf));
        let z = s.spawn(|| go(ControllerKind::Zero));
        let m = go(ControllerKind::Minimax);
        (m, h.join().expect("hinf run panicked"), z.join().expect("zero run panicked"))
    });
    let (minimax, hinf, zero) = (minimax?, hinf?, zero?);

    let (m, h) = (&minimax.trace, &hinf.trace);
    let a_true = net.true_parameters();
    let state_diff_l1 = m.states.iter().zip(&h.states).map(|(p, q)| l1_diff(p, q)).collect();
    let control_diff_l1 = m
        .edge_inputs
        .iter()
        .zip(&h.edge_inputs)
        .map(|(p, q)| l1_diff(p, q))
        .collect();
    let hindsight_control_diff_l1 = (0..horizon)
        .map(|t| {
            let k = hinf_policy(net.graph(), net.b(), &m.states[t], &a_true)?;
            Ok(l1_diff(&m.edge_inputs[t], &k.edge_inputs))
        })
        .collect::<Result<Vec<_>>>()?;
    let first_node_state_diff = m.states.iter().zip(&h.states).map(|(p, q)| (p[0] - q[0]).abs()).collect();
    let first_edge_control_diff = m
        .edge_inputs
        .iter()
        .zip(&h.edge_inputs)
        .map(|(p, q)| (p[0] - q[0]).abs())
        .collect();

    Ok(Comparison {
        minimax,
        hinf,
        zero,
        state_diff_l1,
        control_diff_l1,
        hindsight_control_diff_l1,
        first_node_state_diff,
        first_edge_control_diff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub controller: ControllerKind,
    pub seeds: Vec<u64>,
    /// Network-level empirical gain per seed.
    pub gains: Vec<f64>,
    pub max_gain: f64,
    pub mean_gain: f64,
    /// Per node, the largest `sqrt(sum x_i^2 / sum w_i^2)` over seeds.
    pub per_node_max_ratio: Vec<f64>,
}

/// Empirical gains across disturbance seeds, starting from rest.
pub fn empirical_gain_sweep(
    net: &UncertainNetwork,
    controller: ControllerKind,
    disturbance: &DisturbanceKind,
    seeds: &[u64],
    horizon: usize,
) -> Result<SweepSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one seed".into()));
    }
    let n = net.node_count();
    let x0 = vec![0.0; n];
    let mut gains = Vec::with_capacity(seeds.len());
    let mut per_node_max_ratio = vec![0.0f64; n];
    for &seed in seeds {
        let spec = DisturbanceSpec {
            kind: disturbance.clone(),
            seed,
        };
        let (trace, metrics) = run(net, controller, &spec, horizon, 0.0, &x0)?;
        gains.push(metrics.empirical_gain.unwrap_or(0.0));
        for (i, slot) in per_node_max_ratio.iter_mut().enumerate() {
            let xs: f64 = trace.states.iter().map(|r| r[i] * r[i]).sum();
            let ws: f64 = trace.disturbances.iter().map(|r| r[i] * r[i]).sum();
            if ws > 0.0 {
                *slot = slot.max((xs / ws).sqrt());
            }
        }
    }
    Ok(SweepSummary {
        controller,
        seeds: seeds.to_vec(),
        max_gain: gains.iter().copied().fold(0.0, f64::max),
        mean_gain: gains.iter().sum::<f64>() / gains.len() as f64,
        gains,
        per_node_max_ratio,
    })
}

/// Empirical gain of an isolated node `x(t+1) = a x(t) + w(t)` from rest.
pub fn isolated_node_gain(a: f64, disturbance: &[f64]) -> f64 {
    let mut x = 0.0;
    let mut xs = 0.0;
    let mut ws = 0.0;
    for &w in disturbance {
        x = step_node(a, 0.0, x, 0.0, w);
        xs += x * x;
        ws += w * w;
    }
    if ws > 0.0 {
        (xs / ws).sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TrueModelRule;
    use crate::graph::generate_tree;

    fn net(n: usize, m: usize, seed: u64) -> UncertainNetwork {
        let g = generate_tree(n, seed).unwrap();
        UncertainNetwork::sample(g, 0.1, m, 0.05, seed, &TrueModelRule::Random { seed }).unwrap()
    }

    #[test]
    fn quiet_run_is_all_zero() {
        let net = net(15, 2, 1);
        for kind in [ControllerKind::Zero, ControllerKind::Hinf, ControllerKind::Minimax] {
            let (trace, metrics) =
                run(&net, kind, &DisturbanceSpec::zero(), 10, 5.0, &vec![0.0; 15]).unwrap();
            assert!(trace.states.iter().flatten().all(|&v| v == 0.0));
            assert!(trace.node_controls.iter().flatten().all(|&v| v == 0.0));
            assert_eq!(metrics.total_cost, 0.0);
            assert_eq!(metrics.empirical_gain, Some(0.0));
        }
    }

    #[test]
    fn trace_shapes_and_replay() {
        let net = net(20, 3, 2);
        let spec = DisturbanceSpec::gaussian(0.1, 3);
        let (trace, metrics) = run(&net, ControllerKind::Minimax, &spec, 25, 10.0, &vec![0.0; 20]).unwrap();
        assert_eq!(trace.states.len(), 26);
        assert_eq!(trace.edge_inputs[0].len(), 19);
        assert_eq!(trace.selections.len(), 25);
        assert!(trace.replay_max_error(&net).unwrap() <= 1e-12);
        assert!(trace.disturbance_recovery_error(&net) <= 1e-12);
        let sum: f64 = metrics.per_node_cost.iter().sum();
        assert!((sum - metrics.total_cost).abs() <= 1e-9 * sum.abs().max(1.0));
    }

    #[test]
    fn gamma_zero_cost_is_energy() {
        let net = net(10, 2, 4);
        let spec = DisturbanceSpec::gaussian(0.1, 1);
        let (_, m) = run(&net, ControllerKind::Hinf, &spec, 30, 0.0, &vec![0.0; 10]).unwrap();
        assert!(m.total_cost >= 0.0);
        assert!((m.total_cost - (m.state_energy + m.control_energy)).abs() <= 1e-9 * m.total_cost);
    }

    #[test]
    fn convergence_time_rules() {
        let truth = [1, 1];
        let rows = |v: &[[usize; 2]]| v.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let s = rows(&[[0, 0], [1, 0], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1]]);
        assert_eq!(convergence_time(&s, &truth), Some(2));
        let s = rows(&[[0, 0], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1], [0, 1]]);
        assert_eq!(convergence_time(&s, &truth), None);
        let s = rows(&[[1, 1]; 10]);
        assert_eq!(convergence_time(&s, &truth), Some(0));
        // change inside the last 10%
        let mut s = rows(&[[1, 1]; 20]);
        s[18] = vec![0, 1];
        assert_eq!(convergence_time(&s, &truth), None);
    }

    #[test]
    fn switch_counts() {
        let net = net(12, 3, 7);
        let spec = DisturbanceSpec::gaussian(0.1, 2);
        let (trace, m) = run(&net, ControllerKind::Minimax, &spec, 40, 1.0, &vec![0.3; 12]).unwrap();
        for i in 0..12 {
            let changes = (1..40).filter(|&t| trace.selections[t][i] != trace.selections[t - 1][i]).count();
            assert_eq!(m.switch_count[i], changes);
        }
        assert!(m.nonzero_initial_state);
    }

    #[test]
    fn stability_without_disturbance() {
        let net = net(30, 2, 9);
        for kind in [ControllerKind::Zero, ControllerKind::Hinf, ControllerKind::Minimax] {
            let (trace, _) = run(&net, kind, &DisturbanceSpec::zero(), 200, 1.0, &vec![1.0; 30]).unwrap();
            let norms: Vec<f64> = trace.states.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
            assert!(norms[200] < 1e-3 * norms[0]);
            // monotone after burn-in
            assert!(norms[20..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn sweep_gains_scale_invariant() {
        let net = net(10, 2, 3);
        let g1 = empirical_gain_sweep(&net, ControllerKind::Zero, &DisturbanceKind::Gaussian { variance: 0.1 }, &[1, 2], 50)
            .unwrap();
        let g2 = empirical_gain_sweep(&net, ControllerKind::Zero, &DisturbanceKind::Gaussian { variance: 10.0 }, &[1, 2], 50)
            .unwrap();
        for (a, b) in g1.gains.iter().zip(&g2.gains) {
            assert!((a - b).abs() <= 1e-10 * a);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = net(5, 2, 1);
        assert!(run(&net, ControllerKind::Zero, &DisturbanceSpec::zero(), 0, 1.0, &[0.0; 5]).is_err());
        assert!(run(&net, ControllerKind::Zero, &DisturbanceSpec::zero(), 3, 1.0, &[0.0; 4]).is_err());
        assert!("pid".parse::<ControllerKind>().is_err());
        assert_eq!("hinf".parse::<ControllerKind>().unwrap(), ControllerKind::Hinf);
    }
}
