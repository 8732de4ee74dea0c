//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dmac_core::disturbances::keyed_normal;
use dmac_core::graph::{generate_line, generate_star, generate_tree};
use dmac_core::{CandidateSet, ControllerKind, DisturbanceSpec, NetworkGraph, TrueModelRule, UncertainNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Tree { n: usize, seed: u64 },
    Line { n: usize },
    Star { n: usize },
    Edges { n: usize, edges: Vec<[usize; 2]> },
}

impl GraphSpec {
    pub fn build(&self) -> Result<NetworkGraph> {
        Ok(match self {
            GraphSpec::Tree { n, seed } => generate_tree(*n, *seed)?,
            GraphSpec::Line { n } => generate_line(*n)?,
            GraphSpec::Star { n } => generate_star(*n)?,
            GraphSpec::Edges { n, edges } => {
                NetworkGraph::new(*n, edges.iter().map(|e| (e[0], e[1])).collect())?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
    /// Explicit candidate lists; overrides sampling when present.
    #[serde(default)]
    pub candidates: Option<Vec<Vec<f64>>>,
}

fn default_count() -> usize {
    2
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            count: default_count(),
            separation: 0.0,
            seed: 0,
            candidates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    Zero,
    Constant { value: f64 },
    Gaussian { std_dev: f64, seed: u64 },
}

impl InitialState {
    pub fn build(&self, n: usize) -> Vec<f64> {
        match self {
            InitialState::Zero => vec![0.0; n],
            InitialState::Constant { value } => vec![*value; n],
            InitialState::Gaussian { std_dev, seed } => {
                (0..n).map(|i| std_dev * keyed_normal(*seed, 0, i)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Previously generated network file; replaces `graph`, `b`, `models` and `true_model`.
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub models: ModelSpec,
    #[serde(default = "default_truth")]
    pub true_model: TrueModelRule,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_disturbance")]
    pub disturbance: DisturbanceSpec,
    #[serde(default = "default_initial")]
    pub initial_state: InitialState,
    /// Defaults to the computed upper bound.
    #[serde(default)]
    pub gamma_eval: Option<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_controllers")]
    pub controllers: Vec<ControllerKind>,
    #[serde(default = "default_sweep_seeds")]
    pub sweep_seeds: Vec<u64>,
    #[serde(default = "default_true")]
    pub plot: bool,
}

fn default_b() -> f64 {
    0.1
}
fn default_truth() -> TrueModelRule {
    TrueModelRule::Fixed { index: 0 }
}
fn default_horizon() -> usize {
    50
}
fn default_disturbance() -> DisturbanceSpec {
    DisturbanceSpec::gaussian(0.1, 0)
}
fn default_initial() -> InitialState {
    InitialState::Zero
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_controllers() -> Vec<ControllerKind> {
    vec![ControllerKind::Minimax, ControllerKind::Hinf, ControllerKind::Zero]
}
fn default_sweep_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_true() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // network paths are relative to the config file
        if let (Some(net), Some(dir)) = (&cfg.network, path.parent()) {
            if net.is_relative() {
                cfg.network = Some(dir.join(net));
            }
        }
        Ok(cfg)
    }

    /// Builds the network and rejects it unless every admissibility check passes.
    pub fn resolve_network(&self) -> Result<UncertainNetwork> {
        let net = match &self.network {
            Some(path) => read_network(path)?,
            None => {
                let Some(graph) = &self.graph else {
                    bail!("no graph given: set [graph] in the config, pass --tree/--line/--star, or --network");
                };
                let graph = graph.build()?;
                match &self.models.candidates {
                    Some(lists) => {
                        let sets = lists
                            .iter()
                            .map(|v| CandidateSet::new(v.clone()))
                            .collect::<dmac_core::Result<Vec<_>>>()?;
                        let truth = self.true_model.resolve(&sets)?;
                        UncertainNetwork::new(graph, self.b, sets, truth)?
                    }
                    None => UncertainNetwork::sample(
                        graph,
                        self.b,
                        self.models.count,
                        self.models.separation,
                        self.models.seed,
                        &self.true_model,
                    )?,
                }
            }
        };
        net.ensure_valid()?;
        Ok(net)
    }
}

pub fn read_network(path: &Path) -> Result<UncertainNetwork> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let net: UncertainNetwork =
        serde_json::from_str(&text).with_context(|| format!("parsing network {}", path.display()))?;
    Ok(net)
}
