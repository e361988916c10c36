use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{accumulated_current, step_neuron, NeuronId, SnnGraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusKind {
    Constant,
    Poisson,
}

/// External input drive. Poisson stimulus injects `amplitude` into a
/// neuron with probability `rate` per timestep; constant stimulus injects
/// it every timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusSpec {
    pub kind: StimulusKind,
    pub amplitude: f64,
    pub rate: f64,
    /// Restrict the drive to neurons of one layer; untagged graphs treat
    /// every neuron as layer 0.
    pub target_layer: Option<u16>,
    /// Stop driving after this many timesteps.
    pub active_steps: Option<u32>,
    pub seed: u64,
}

impl Default for StimulusSpec {
    fn default() -> Self {
        Self {
            kind: StimulusKind::Poisson,
            amplitude: 450.0,
            rate: 0.1,
            target_layer: None,
            active_steps: None,
            seed: 1,
        }
    }
}

impl StimulusSpec {
    /// `neuron_layers[i]` is the layer of neuron `i` (0 for untagged).
    pub fn materialize(&self, neuron_layers: &[u16], timesteps: u32) -> Result<Stimulus> {
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter("stimulus amplitude must be finite".into()));
        }
        if self.kind == StimulusKind::Poisson && !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::InvalidParameter(format!(
                "stimulus rate {} outside [0, 1]",
                self.rate
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut steps = Vec::with_capacity(timesteps as usize);
        for t in 0..timesteps {
            let active = self.active_steps.is_none_or(|a| t < a);
            let row = neuron_layers
                .iter()
                .map(|&layer| {
                    let targeted = self.target_layer.is_none_or(|l| l == layer);
                    let hit = match self.kind {
                        StimulusKind::Constant => true,
                        // Always draw so the stream does not depend on targeting.
                        StimulusKind::Poisson => rng.gen_bool(self.rate),
                    };
                    if active && targeted && hit {
                        self.amplitude
                    } else {
                        0.0
                    }
                })
                .collect();
            steps.push(row);
        }
        Ok(Stimulus { steps })
    }
}

/// Materialized external current, indexed `[timestep][neuron]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stimulus {
    steps: Vec<Vec<f64>>,
}

impl Stimulus {
    pub fn from_steps(steps: Vec<Vec<f64>>) -> Self {
        Self { steps }
    }

    pub fn zeros(neurons: usize, timesteps: u32) -> Self {
        Self {
            steps: vec![vec![0.0; neurons]; timesteps as usize],
        }
    }

    pub fn timesteps(&self) -> usize {
        self.steps.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.steps[t]
    }

    pub fn check_shape(&self, neurons: usize, timesteps: u32) -> Result<()> {
        if self.steps.len() != timesteps as usize {
            return Err(Error::StimulusShape {
                expected: format!("{timesteps} timesteps"),
                got: format!("{} timesteps", self.steps.len()),
            });
        }
        if let Some(row) = self.steps.iter().find(|r| r.len() != neurons) {
            return Err(Error::StimulusShape {
                expected: format!("{neurons} neurons per timestep"),
                got: format!("{} neurons", row.len()),
            });
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.steps.len() as u64).to_le_bytes());
        for row in &self.steps {
            h.update((row.len() as u64).to_le_bytes());
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Sorted firing neuron ids per timestep.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub steps: Vec<Vec<NeuronId>>,
}

impl SpikeTrain {
    pub fn timestep_count(&self) -> usize {
        self.steps.len()
    }

    pub fn spike_count(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_count() == 0
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.steps.len() as u64).to_le_bytes());
        for step in &self.steps {
            h.update((step.len() as u32).to_le_bytes());
            for n in step {
                h.update(n.0.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// One line per timestep: `t: id id id`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (t, step) in self.steps.iter().enumerate() {
            out.push_str(&t.to_string());
            out.push(':');
            for n in step {
                out.push(' ');
                out.push_str(&n.0.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Direct, NoC-free simulation with synchronous timesteps and one step of
/// synaptic delay: spikes emitted in step `t` are integrated in `t + 1`.
pub fn reference_simulate(graph: &SnnGraph, stimulus: &Stimulus, timesteps: u32, dt: f64) -> Result<SpikeTrain> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    let n = graph.neuron_count();
    stimulus.check_shape(n, timesteps)?;
    let mut states: Vec<_> = graph.neurons().map(|id| graph.model(id).initial_state()).collect();
    let mut acc = vec![0i64; n];
    let mut train = SpikeTrain::default();
    for t in 0..timesteps as usize {
        let stim = stimulus.row(t);
        let mut fired = Vec::new();
        for id in graph.neurons() {
            let i = id.index();
            let input = accumulated_current(acc[i], graph.frac_bits()) + stim[i];
            let (next, spiked) = step_neuron(&states[i], input, graph.model(id), dt)?;
            states[i] = next;
            if spiked {
                fired.push(id);
            }
        }
        acc.iter_mut().for_each(|a| *a = 0);
        for &pre in &fired {
            for s in graph.outgoing(pre) {
                acc[s.post.index()] += i64::from(s.weight.0);
            }
        }
        train.steps.push(fired);
    }
    Ok(train)
}
