//! `dmac`: generate networks, compute gain bounds and run closed-loop experiments.

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dmac_core::bounds::{compute_bounds, margin_check, riccati_residual, GainBounds, CLOSED_FORM_DENSE_LIMIT};
use dmac_core::disturbances::DisturbanceKind;
use dmac_core::simulate::{compare, empirical_gain_sweep, run, SweepSummary};
use dmac_core::{ControllerKind, TrueModelRule, UncertainNetwork};

use config::{GraphSpec, RunConfig};

#[derive(Parser)]
#[command(name = "dmac", version, about = "Distributed minimax adaptive control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a network and write network.json.
    Generate(Overrides),
    /// Compute gain bounds for a network.
    Bounds(Overrides),
    /// Run each configured controller and write traces and metrics.
    Simulate(Overrides),
    /// Run minimax, H-infinity and zero control on one disturbance and write the differences.
    Compare(Overrides),
    /// Empirical gains over disturbance seeds.
    Sweep(Overrides),
}

/// Command-line values take precedence over the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Existing network file instead of generating one.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Random tree with this many nodes.
    #[arg(long, group = "shape")]
    tree: Option<usize>,
    /// Path graph with this many nodes.
    #[arg(long, group = "shape")]
    line: Option<usize>,
    /// Star with this many nodes (node 0 is the center).
    #[arg(long, group = "shape")]
    star: Option<usize>,
    #[arg(long)]
    b: Option<f64>,
    /// Candidate models per node.
    #[arg(long)]
    models: Option<usize>,
    /// Minimum gap between candidates at a node.
    #[arg(long)]
    separation: Option<f64>,
    /// Seed for the tree and the candidate draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Same true model index at every node.
    #[arg(long, conflicts_with = "true_seed")]
    true_index: Option<usize>,
    /// Draw the true model index per node with this seed.
    #[arg(long)]
    true_seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Gaussian disturbance variance.
    #[arg(long)]
    variance: Option<f64>,
    #[arg(long)]
    disturbance_seed: Option<u64>,
    /// Cost weight; defaults to the computed upper bound.
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated subset of minimax,hinf,zero.
    #[arg(long, value_delimiter = ',')]
    controllers: Option<Vec<ControllerKind>>,
    /// Comma-separated disturbance seeds for `sweep`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Skip the SVG plot.
    #[arg(long)]
    no_plot: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(net) = &self.network {
            cfg.network = Some(net.clone());
        }
        let graph_seed = self.seed.or(match cfg.graph {
            Some(GraphSpec::Tree { seed, .. }) => Some(seed),
            _ => None,
        });
        if let Some(n) = self.tree {
            cfg.graph = Some(GraphSpec::Tree {
                n,
                seed: graph_seed.unwrap_or(0),
            });
        } else if let Some(n) = self.line {
            cfg.graph = Some(GraphSpec::Line { n });
        } else if let Some(n) = self.star {
            cfg.graph = Some(GraphSpec::Star { n });
        } else if let (Some(GraphSpec::Tree { seed, .. }), Some(s)) = (&mut cfg.graph, self.seed) {
            *seed = s;
        }
        if let Some(b) = self.b {
            cfg.b = b;
        }
        if let Some(m) = self.models {
            cfg.models.count = m;
        }
        if let Some(s) = self.separation {
            cfg.models.separation = s;
        }
        if let Some(s) = self.seed {
            cfg.models.seed = s;
        }
        if let Some(index) = self.true_index {
            cfg.true_model = TrueModelRule::Fixed { index };
        }
        if let Some(seed) = self.true_seed {
            cfg.true_model = TrueModelRule::Random { seed };
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(variance) = self.variance {
            cfg.disturbance.kind = DisturbanceKind::Gaussian { variance };
        }
        if let Some(s) = self.disturbance_seed {
            cfg.disturbance.seed = s;
        }
        if let Some(g) = self.gamma {
            cfg.gamma_eval = Some(g);
        }
        if let Some(c) = &self.controllers {
            cfg.controllers = c.clone();
        }
        if let Some(s) = &self.seeds {
            cfg.sweep_seeds = s.clone();
        }
        if self.no_plot {
            cfg.plot = false;
        }
        Ok(cfg)
    }
}

/// Bounds plus the certificate checks that are cheap enough to report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BoundsRecord {
    node_count: usize,
    edge_count: usize,
    b: f64,
    max_degree: usize,
    #[serde(flatten)]
    bounds: GainBounds,
    margin_at_gamma_lower: bool,
    margin_at_gamma_upper: Option<bool>,
    /// Only for networks small enough for a dense check.
    riccati_residual_at_gamma_upper: Option<f64>,
}

fn bounds_record(net: &UncertainNetwork) -> Result<BoundsRecord> {
    let bounds = compute_bounds(net)?;
    let upper = net.upper_parameters();
    let margin_at_gamma_upper = bounds.gamma_upper.map(|g| margin_check(&upper, g));
    let riccati_residual_at_gamma_upper = match bounds.gamma_upper {
        Some(g) if net.node_count() <= CLOSED_FORM_DENSE_LIMIT && margin_check(&net.true_parameters(), g) => {
            Some(riccati_residual(&net.true_parameters(), net.graph(), net.b(), g)?)
        }
        _ => None,
    };
    Ok(BoundsRecord {
        node_count: net.node_count(),
        edge_count: net.graph().edge_count(),
        b: net.b(),
        max_degree: net.graph().max_degree(),
        margin_at_gamma_lower: margin_check(&upper, bounds.gamma_lower),
        margin_at_gamma_upper,
        riccati_residual_at_gamma_upper,
        bounds,
    })
}

/// Configured weight, else the upper bound, else the dense-formula bound.
fn gamma_eval(cfg: &RunConfig, net: &UncertainNetwork) -> Result<f64> {
    if let Some(g) = cfg.gamma_eval {
        return Ok(g);
    }
    let b = compute_bounds(net)?;
    Ok(b.gamma_upper.unwrap_or(b.gamma_closed_form))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let net = cfg.resolve_network()?;
    prepare_out(&cfg.out)?;
    let path = cfg.out.join("network.json");
    output::write_json(&path, &net)?;
    println!(
        "wrote {} ({} nodes, {} edges)",
        path.display(),
        net.node_count(),
        net.graph().edge_count()
    );
    Ok(())
}

fn cmd_bounds(cfg: &RunConfig) -> Result<()> {
    let net = cfg.resolve_network()?;
    let record = bounds_record(&net)?;
    prepare_out(&cfg.out)?;
    output::write_json(&cfg.out.join("bounds.json"), &record)?;
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let net = cfg.resolve_network()?;
    let gamma = gamma_eval(cfg, &net)?;
    let x0 = cfg.initial_state.build(net.node_count());
    prepare_out(&cfg.out)?;
    output::write_json(&cfg.out.join("network.json"), &net)?;
    for &kind in &cfg.controllers {
        let (trace, metrics) = run(&net, kind, &cfg.disturbance, cfg.horizon, gamma, &x0)?;
        output::write_trace(&cfg.out.join(format!("trace_{}.csv", kind.name())), &trace)?;
        output::write_json(&cfg.out.join(format!("metrics_{}.json", kind.name())), &metrics)?;
        println!(
            "{}: total cost {:.6}, empirical gain {}",
            kind.name(),
            metrics.total_cost,
            metrics.empirical_gain.map_or("n/a".into(), |g| format!("{g:.6}"))
        );
    }
    Ok(())
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let net = cfg.resolve_network()?;
    let gamma = gamma_eval(cfg, &net)?;
    let x0 = cfg.initial_state.build(net.node_count());
    let c = compare(&net, &cfg.disturbance, cfg.horizon, gamma, &x0)?;
    prepare_out(&cfg.out)?;
    output::write_json(&cfg.out.join("network.json"), &net)?;
    for outcome in [&c.minimax, &c.hinf, &c.zero] {
        let name = outcome.trace.controller.name();
        output::write_trace(&cfg.out.join(format!("trace_{name}.csv")), &outcome.trace)?;
    }
    let metrics: std::collections::BTreeMap<&str, _> = [&c.minimax, &c.hinf, &c.zero]
        .into_iter()
        .map(|o| (o.trace.controller.name(), &o.metrics))
        .collect();
    output::write_json(&cfg.out.join("metrics.json"), &metrics)?;
    output::write_differences(&cfg.out.join("differences.csv"), &c)?;
    if cfg.plot {
        fs::write(cfg.out.join("differences.svg"), output::difference_plot(&c))?;
    }
    match c.minimax.metrics.convergence_time {
        Some(t) => println!("minimax selections settle on the true models at t = {t}"),
        None => println!("minimax selections did not settle on the true models"),
    }
    println!("wrote comparison to {}", cfg.out.display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let net = cfg.resolve_network()?;
    let summaries = cfg
        .controllers
        .iter()
        .map(|&kind| empirical_gain_sweep(&net, kind, &cfg.disturbance.kind, &cfg.sweep_seeds, cfg.horizon))
        .collect::<dmac_core::Result<Vec<SweepSummary>>>()?;
    prepare_out(&cfg.out)?;
    output::write_json(&cfg.out.join("sweep.json"), &summaries)?;
    for s in &summaries {
        println!(
            "{}: max gain {:.6}, mean gain {:.6} over {} seeds",
            s.controller.name(),
            s.max_gain,
            s.mean_gain,
            s.seeds.len()
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(o) => cmd_generate(&o.resolve()?),
        Command::Bounds(o) => cmd_bounds(&o.resolve()?),
        Command::Simulate(o) => cmd_simulate(&o.resolve()?),
        Command::Compare(o) => cmd_compare(&o.resolve()?),
        Command::Sweep(o) => cmd_sweep(&o.resolve()?),
    }
}
