use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LayerTag, NeuronId, NeuronKind, NeuronModel, SnnGraph, Synapse, Weight, DEFAULT_FRAC_BITS};
use crate::error::{Error, Result};

/// Parameters of an Erdős–Rényi excitatory/inhibitory network.
///
/// Excitatory neurons occupy ids `[0, n_excitatory)`, inhibitory ones
/// follow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomNetSpec {
    pub n_excitatory: u32,
    pub n_inhibitory: u32,
    pub conn_prob: f64,
    pub w_exc: f64,
    pub w_inh: f64,
    pub seed: u64,
    pub model: NeuronModel,
    pub frac_bits: u8,
}

impl RandomNetSpec {
    pub fn brunel(n_excitatory: u32, n_inhibitory: u32, seed: u64) -> Self {
        Self {
            n_excitatory,
            n_inhibitory,
            conn_prob: 0.1,
            w_exc: 20.0,
            w_inh: -100.0,
            seed,
            model: NeuronKind::Lif.default_model(),
            frac_bits: DEFAULT_FRAC_BITS,
        }
    }

    /// 4:1 excitatory/inhibitory, sparse, with strong inhibition.
    pub fn vogels(n_excitatory: u32, n_inhibitory: u32, seed: u64) -> Self {
        Self {
            n_excitatory,
            n_inhibitory,
            conn_prob: 0.02,
            w_exc: 20.0,
            w_inh: -120.0,
            seed,
            model: NeuronKind::Lif.default_model(),
            frac_bits: DEFAULT_FRAC_BITS,
        }
    }
}

fn build_random(spec: &RandomNetSpec) -> Result<SnnGraph> {
    let n = spec.n_excitatory as u64 + spec.n_inhibitory as u64;
    if n == 0 {
        return Err(Error::InvalidParameter("network needs at least one neuron".into()));
    }
    if !(spec.conn_prob > 0.0 && spec.conn_prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "connection probability {} outside (0, 1]",
            spec.conn_prob
        )));
    }
    if spec.w_inh > 0.0 {
        return Err(Error::InvalidParameter("inhibitory weight must be non-positive".into()));
    }
    let n = n as u32;
    let w_exc = Weight::from_f64(spec.w_exc, spec.frac_bits)?;
    let w_inh = Weight::from_f64(spec.w_inh, spec.frac_bits)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut synapses = Vec::with_capacity(n as usize);
    for pre in 0..n {
        let weight = if pre < spec.n_excitatory { w_exc } else { w_inh };
        let mut list = Vec::new();
        for post in 0..n {
            if post != pre && rng.gen_bool(spec.conn_prob) {
                list.push(Synapse {
                    post: NeuronId(post),
                    weight,
                });
            }
        }
        synapses.push(list);
    }
    SnnGraph::new(vec![spec.model], vec![0; n as usize], synapses, None, spec.frac_bits)
}

/// Brunel-style balanced random network.
pub fn build_brunel(spec: &RandomNetSpec) -> Result<SnnGraph> {
    build_random(spec)
}

/// Vogels-style sparse random network (static connectivity).
pub fn build_vogels(spec: &RandomNetSpec) -> Result<SnnGraph> {
    build_random(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayer {
    pub out_channels: u16,
    pub kernel: u16,
    pub stride: u16,
    pub padding: u16,
}

/// A stack of convolution layers applied to an input feature map of
/// `input = [channels, width, height]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub input: [u16; 3],
    pub layers: Vec<ConvLayer>,
    pub weight_min: f64,
    pub weight_max: f64,
    pub seed: u64,
    pub model: NeuronModel,
    pub frac_bits: u8,
}

fn conv_out_dim(input: u16, layer: &ConvLayer, axis: &str) -> Result<u16> {
    let span = input as i64 + 2 * layer.padding as i64 - layer.kernel as i64;
    if layer.kernel == 0 || layer.stride == 0 {
        return Err(Error::ConvShape("kernel and stride must be >= 1".into()));
    }
    if span < 0 || span % layer.stride as i64 != 0 {
        return Err(Error::ConvShape(format!(
            "{axis}: input {input}, kernel {}, stride {}, padding {} does not tile",
            layer.kernel, layer.stride, layer.padding
        )));
    }
    Ok((span / layer.stride as i64 + 1) as u16)
}

/// Builds a convolutional topology where every output neuron receives
/// from all input channels inside its kernel window. Kernel weights are
/// shared across spatial positions.
pub fn build_conv_topology(spec: &ConvSpec) -> Result<SnnGraph> {
    let [c0, w0, h0] = spec.input;
    if c0 == 0 || w0 == 0 || h0 == 0 {
        return Err(Error::ConvShape("input dimensions must be positive".into()));
    }
    if !(spec.weight_min <= spec.weight_max) {
        return Err(Error::InvalidParameter("weight_min > weight_max".into()));
    }
    let mut shapes = vec![(c0, w0, h0)];
    for layer in &spec.layers {
        let &(_, w, h) = shapes.last().unwrap();
        if layer.out_channels == 0 {
            return Err(Error::ConvShape("layer with zero output channels".into()));
        }
        let wo = conv_out_dim(w, layer, "width")?;
        let ho = conv_out_dim(h, layer, "height")?;
        shapes.push((layer.out_channels, wo, ho));
    }

    let mut offsets = Vec::with_capacity(shapes.len());
    let mut total = 0usize;
    for &(c, w, h) in &shapes {
        offsets.push(total);
        total += c as usize * w as usize * h as usize;
    }
    if total > u32::MAX as usize {
        return Err(Error::ConvShape("topology too large".into()));
    }
    let id = |layer: usize, c: u16, x: u16, y: u16| -> u32 {
        let (_, w, h) = shapes[layer];
        (offsets[layer] + (c as usize * h as usize + y as usize) * w as usize + x as usize) as u32
    };

    let mut tags = Vec::with_capacity(total);
    for (layer, &(c, w, h)) in shapes.iter().enumerate() {
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    tags.push(LayerTag {
                        layer: layer as u16,
                        channel: ch,
                        x,
                        y,
                    });
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut synapses = vec![Vec::new(); total];
    for (li, layer) in spec.layers.iter().enumerate() {
        let (ci_n, wi, hi) = shapes[li];
        let (co_n, wo, ho) = shapes[li + 1];
        let k = layer.kernel as usize;
        let kernel: Vec<Weight> = (0..co_n as usize * ci_n as usize * k * k)
            .map(|_| {
                let w = if spec.weight_min == spec.weight_max {
                    spec.weight_min
                } else {
                    rng.gen_range(spec.weight_min..spec.weight_max)
                };
                Weight::from_f64(w, spec.frac_bits)
            })
            .collect::<Result<_>>()?;
        for co in 0..co_n {
            for yo in 0..ho {
                for xo in 0..wo {
                    let post = NeuronId(id(li + 1, co, xo, yo));
                    for ci in 0..ci_n {
                        for ky in 0..layer.kernel {
                            for kx in 0..layer.kernel {
                                let xi = xo as i64 * layer.stride as i64 + kx as i64 - layer.padding as i64;
                                let yi = yo as i64 * layer.stride as i64 + ky as i64 - layer.padding as i64;
                                if xi < 0 || yi < 0 || xi >= wi as i64 || yi >= hi as i64 {
                                    continue;
                                }
                                let pre = id(li, ci, xi as u16, yi as u16);
                                let kidx =
                                    ((co as usize * ci_n as usize + ci as usize) * k + ky as usize) * k + kx as usize;
                                synapses[pre as usize].push(Synapse {
                                    post,
                                    weight: kernel[kidx],
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    SnnGraph::new(vec![spec.model], vec![0; total], synapses, Some(tags), spec.frac_bits)
}
