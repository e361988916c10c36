//! Experiment configuration: one TOML document with the sections
//! `[workload]`, `[partition]`, `[mesh]`, `[core]`, `[energy]` and `[run]`.
//! Every key is optional; unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::EnergyCostTable;
use crate::neurocore::{CoreTiming, Mode};
use crate::noc::MeshConfig;
use crate::partition::{MemoryBudget, Placement, SssParams};
use crate::snn::{ConvLayer, NeuronKind, NeuronModel, StimulusSpec, DEFAULT_FRAC_BITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Brunel,
    Vogels,
    Conv,
}

/// Generator parameters. Random-network fields apply to `brunel` and
/// `vogels`, convolution fields to `conv`; unset weights and connection
/// probability fall back to the chosen network's usual values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub kind: WorkloadKind,
    pub name: Option<String>,
    pub seed: u64,
    pub n_excitatory: u32,
    pub n_inhibitory: u32,
    pub conn_prob: Option<f64>,
    pub w_exc: Option<f64>,
    pub w_inh: Option<f64>,
    /// `[channels, width, height]`.
    pub input: [u16; 3],
    pub layers: Vec<ConvLayer>,
    pub weight_min: f64,
    pub weight_max: f64,
    pub frac_bits: u8,
    pub neuron: NeuronModel,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            kind: WorkloadKind::Conv,
            name: None,
            seed: 1,
            n_excitatory: 205,
            n_inhibitory: 51,
            conn_prob: None,
            w_exc: None,
            w_inh: None,
            input: [1, 12, 12],
            layers: vec![ConvLayer {
                out_channels: 8,
                kernel: 3,
                stride: 1,
                padding: 1,
            }],
            weight_min: 20.0,
            weight_max: 100.0,
            frac_bits: DEFAULT_FRAC_BITS,
            neuron: NeuronKind::Lif.default_model(),
        }
    }
}

impl WorkloadConfig {
    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match self.kind {
            WorkloadKind::Brunel | WorkloadKind::Vogels => format!(
                "{}-{}",
                if self.kind == WorkloadKind::Brunel {
                    "brunel"
                } else {
                    "vogels"
                },
                self.n_excitatory + self.n_inhibitory
            ),
            WorkloadKind::Conv => {
                let [c, w, h] = self.input;
                let chans: Vec<String> = self.layers.iter().map(|l| l.out_channels.to_string()).collect();
                format!("conv-{c}x{w}x{h}-{}", chans.join("-"))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionerKind {
    /// Consecutive neuron ids, greedily cut at the memory budget.
    Naive,
    /// Hilbert-curve order of the layer layout, greedily cut.
    Hsfc,
    /// `Hsfc` followed by stochastic segment-swap refinement.
    HsfcSss,
}

impl PartitionerKind {
    pub const ALL: [PartitionerKind; 3] = [PartitionerKind::Naive, PartitionerKind::Hsfc, PartitionerKind::HsfcSss];
}

impl fmt::Display for PartitionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionerKind::Naive => "naive",
            PartitionerKind::Hsfc => "hsfc",
            PartitionerKind::HsfcSss => "hsfc-sss",
        })
    }
}

impl FromStr for PartitionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(PartitionerKind::Naive),
            "hsfc" => Ok(PartitionerKind::Hsfc),
            "hsfc-sss" => Ok(PartitionerKind::HsfcSss),
            other => Err(Error::InvalidParameter(format!("unknown partitioner `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub kind: PartitionerKind,
    pub placement: Placement,
    pub sss: SssParams,
    pub budget: MemoryBudget,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            kind: PartitionerKind::HsfcSss,
            placement: Placement::Hilbert,
            sss: SssParams::default(),
            budget: MemoryBudget::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub timesteps: u32,
    /// Integration step in milliseconds.
    pub dt: f64,
    /// Record every link traversal (written by `simulate --trace`).
    pub trace: bool,
    pub stimulus: StimulusSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::UniSpike,
            timesteps: 50,
            dt: 1.0,
            trace: false,
            stimulus: StimulusSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub workload: WorkloadConfig,
    pub partition: PartitionConfig,
    pub mesh: MeshConfig,
    pub core: CoreTiming,
    pub energy: EnergyCostTable,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        self.core.validate()?;
        self.energy.validate()?;
        self.partition.budget.validate()?;
        self.workload.neuron.validate()?;
        let sss = &self.partition.sss;
        if !(0.0..=1.0).contains(&sss.seg_ratio) || !(sss.cooling > 0.0 && sss.cooling <= 1.0) {
            return Err(Error::Config(
                "sss seg_ratio must be in [0, 1] and cooling in (0, 1]".into(),
            ));
        }
        if self.run.timesteps == 0 {
            return Err(Error::Config("run.timesteps must be >= 1".into()));
        }
        if !(self.run.dt > 0.0 && self.run.dt.is_finite()) {
            return Err(Error::Config("run.dt must be > 0".into()));
        }
        if self.workload.kind == WorkloadKind::Conv && self.workload.layers.is_empty() {
            return Err(Error::Config("conv workload needs at least one layer".into()));
        }
        Ok(())
    }

    /// Replaces every seed (workload, partition refinement, stimulus).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.workload.seed = seed;
        self.partition.sss.seed = seed;
        self.run.stimulus.seed = seed;
        self
    }

    /// SHA-256 over the canonical JSON form of the whole configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}
