//! Spiking network representation, benchmark generators and the NoC-free
//! reference simulator.

mod generate;
pub(crate) mod io;
mod model;
mod reference;

pub use generate::{build_brunel, build_conv_topology, build_vogels, ConvLayer, ConvSpec, RandomNetSpec};
pub use io::{read_graph_binary, read_graph_text, write_graph_binary, write_graph_text};
pub use model::{step_neuron, AdExParams, IzhikevichParams, LifParams, NeuronKind, NeuronModel, NeuronState};
pub use reference::{reference_simulate, SpikeTrain, Stimulus, StimulusKind, StimulusSpec};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense neuron identifier in `[0, neuron_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId(pub u32);

impl NeuronId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

pub const DEFAULT_FRAC_BITS: u8 = 8;

/// Signed 16-bit fixed-point synaptic weight. The number of fractional
/// bits is a property of the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Weight(pub i16);

impl Weight {
    pub fn from_f64(value: f64, frac_bits: u8) -> Result<Self> {
        let scaled = (value * f64::from(1u32 << frac_bits)).round();
        if !scaled.is_finite() || scaled < f64::from(i16::MIN) || scaled > f64::from(i16::MAX) {
            return Err(Error::InvalidParameter(format!(
                "weight {value} not representable with {frac_bits} fractional bits"
            )));
        }
        Ok(Weight(scaled as i16))
    }

    pub fn to_f64(self, frac_bits: u8) -> f64 {
        f64::from(self.0) / f64::from(1u32 << frac_bits)
    }
}

/// Converts an exact integer sum of raw weights into an input current.
pub fn accumulated_current(raw_sum: i64, frac_bits: u8) -> f64 {
    raw_sum as f64 / f64::from(1u32 << frac_bits)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Synapse {
    pub post: NeuronId,
    pub weight: Weight,
}

/// Spatial coordinates of a neuron inside a structured (convolutional)
/// network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerTag {
    pub layer: u16,
    pub channel: u16,
    pub x: u16,
    pub y: u16,
}

/// Directed weighted graph of neurons.
///
/// Adjacency lists are kept sorted by post-synaptic id. Neuron parameters
/// are stored as a small palette plus one palette index per neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct SnnGraph {
    models: Vec<NeuronModel>,
    model_of: Vec<u16>,
    synapses: Vec<Vec<Synapse>>,
    tags: Option<Vec<LayerTag>>,
    frac_bits: u8,
}

impl SnnGraph {
    pub fn new(
        models: Vec<NeuronModel>,
        model_of: Vec<u16>,
        mut synapses: Vec<Vec<Synapse>>,
        tags: Option<Vec<LayerTag>>,
        frac_bits: u8,
    ) -> Result<Self> {
        let n = model_of.len();
        if n > u32::MAX as usize {
            return Err(Error::InvalidGraph("too many neurons".into()));
        }
        if synapses.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} adjacency lists for {n} neurons",
                synapses.len()
            )));
        }
        if frac_bits > 15 {
            return Err(Error::InvalidGraph(format!("{frac_bits} fractional bits")));
        }
        for m in &models {
            m.validate()?;
        }
        if let Some(&bad) = model_of.iter().find(|&&m| m as usize >= models.len()) {
            return Err(Error::InvalidGraph(format!("model index {bad} out of range")));
        }
        if let Some(tags) = &tags {
            if tags.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "{} layer tags for {n} neurons",
                    tags.len()
                )));
            }
        }
        for (pre, list) in synapses.iter_mut().enumerate() {
            if let Some(s) = list.iter().find(|s| s.post.index() >= n) {
                return Err(Error::InvalidGraph(format!(
                    "synapse n{pre} -> {} beyond {n} neurons",
                    s.post
                )));
            }
            list.sort_by_key(|s| (s.post, s.weight));
        }
        Ok(Self {
            models,
            model_of,
            synapses,
            tags,
            frac_bits,
        })
    }

    pub fn neuron_count(&self) -> usize {
        self.model_of.len()
    }

    pub fn synapse_count(&self) -> usize {
        self.synapses.iter().map(Vec::len).sum()
    }

    pub fn frac_bits(&self) -> u8 {
        self.frac_bits
    }

    pub fn models(&self) -> &[NeuronModel] {
        &self.models
    }

    pub fn model_index(&self, n: NeuronId) -> u16 {
        self.model_of[n.index()]
    }

    pub fn model(&self, n: NeuronId) -> &NeuronModel {
        &self.models[self.model_of[n.index()] as usize]
    }

    pub fn outgoing(&self, n: NeuronId) -> &[Synapse] {
        &self.synapses[n.index()]
    }

    pub fn tags(&self) -> Option<&[LayerTag]> {
        self.tags.as_deref()
    }

    pub fn tag(&self, n: NeuronId) -> Option<LayerTag> {
        self.tags.as_ref().map(|t| t[n.index()])
    }

    pub fn neurons(&self) -> impl Iterator<Item = NeuronId> {
        (0..self.neuron_count() as u32).map(NeuronId)
    }

    /// Number of incoming synapses per neuron.
    pub fn in_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.neuron_count()];
        for list in &self.synapses {
            for s in list {
                deg[s.post.index()] += 1;
            }
        }
        deg
    }

    /// Reverse adjacency: for each neuron, the list of its pre-synaptic
    /// neurons (with multiplicity).
    pub fn incoming(&self) -> Vec<Vec<NeuronId>> {
        let mut inc = vec![Vec::new(); self.neuron_count()];
        for (pre, list) in self.synapses.iter().enumerate() {
            for s in list {
                inc[s.post.index()].push(NeuronId(pre as u32));
            }
        }
        inc
    }
}
