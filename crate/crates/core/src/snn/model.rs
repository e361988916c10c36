//! Neuron dynamics: leaky integrate-and-fire, Izhikevich and adaptive
//! exponential integrate-and-fire, each advanced by one forward-Euler step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant (ms).
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_th: f64,
    pub v_reset: f64,
    pub refractory_steps: u32,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_m: 20.0,
            v_rest: 0.0,
            v_th: 20.0,
            v_reset: 10.0,
            refractory_steps: 2,
        }
    }
}

/// Dimensionless Izhikevich parameters. Defaults give regular spiking.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IzhikevichParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for IzhikevichParams {
    fn default() -> Self {
        Self {
            a: 0.02,
            b: 0.2,
            c: -65.0,
            d: 8.0,
        }
    }
}

/// Units: pF, nS, mV, ms, pA.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdExParams {
    pub c_m: f64,
    pub g_l: f64,
    pub e_l: f64,
    pub v_t: f64,
    pub delta_t: f64,
    pub a: f64,
    pub b: f64,
    pub tau_w: f64,
    pub v_th: f64,
    pub v_reset: f64,
}

impl Default for AdExParams {
    fn default() -> Self {
        Self {
            c_m: 281.0,
            g_l: 30.0,
            e_l: -70.6,
            v_t: -50.4,
            delta_t: 2.0,
            a: 4.0,
            b: 80.5,
            tau_w: 144.0,
            v_th: -40.0,
            v_reset: -70.6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NeuronModel {
    Lif(LifParams),
    Izhikevich(IzhikevichParams),
    AdEx(AdExParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronKind {
    Lif,
    Izhikevich,
    AdEx,
}

impl NeuronKind {
    pub fn default_model(self) -> NeuronModel {
        match self {
            NeuronKind::Lif => NeuronModel::Lif(LifParams::default()),
            NeuronKind::Izhikevich => NeuronModel::Izhikevich(IzhikevichParams::default()),
            NeuronKind::AdEx => NeuronModel::AdEx(AdExParams::default()),
        }
    }
}

/// Dynamic state of one neuron.
///
/// `u` is the recovery variable (Izhikevich) or adaptation current (AdEx);
/// unused by LIF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    pub u: f64,
    pub refractory: u32,
}

impl NeuronModel {
    pub fn kind(&self) -> NeuronKind {
        match self {
            NeuronModel::Lif(_) => NeuronKind::Lif,
            NeuronModel::Izhikevich(_) => NeuronKind::Izhikevich,
            NeuronModel::AdEx(_) => NeuronKind::AdEx,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match self {
            NeuronModel::Lif(p) => {
                if !(p.tau_m > 0.0) {
                    return bad("LIF tau_m must be > 0");
                }
                if !(p.v_th > p.v_reset) {
                    return bad("LIF v_th must exceed v_reset");
                }
                if ![p.v_rest, p.v_th, p.v_reset].iter().all(|v| v.is_finite()) {
                    return bad("LIF potentials must be finite");
                }
            }
            NeuronModel::Izhikevich(p) => {
                if ![p.a, p.b, p.c, p.d].iter().all(|v| v.is_finite()) {
                    return bad("Izhikevich parameters must be finite");
                }
            }
            NeuronModel::AdEx(p) => {
                if !(p.c_m > 0.0 && p.g_l > 0.0 && p.delta_t > 0.0 && p.tau_w > 0.0) {
                    return bad("AdEx C, g_L, delta_T and tau_w must be > 0");
                }
                if !(p.v_th > p.v_reset) {
                    return bad("AdEx v_th must exceed v_reset");
                }
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> NeuronState {
        match self {
            NeuronModel::Lif(p) => NeuronState {
                v: p.v_rest,
                u: 0.0,
                refractory: 0,
            },
            NeuronModel::Izhikevich(p) => NeuronState {
                v: p.c,
                u: p.b * p.c,
                refractory: 0,
            },
            NeuronModel::AdEx(p) => NeuronState {
                v: p.e_l,
                u: 0.0,
                refractory: 0,
            },
        }
    }
}

/// Advance one neuron by `dt` milliseconds under `input` (synaptic plus
/// external current, resistance folded in for LIF).
///
/// A neuron fires when its potential after the update is at or above
/// threshold; the model's reset rule is then applied.
pub fn step_neuron(state: &NeuronState, input: f64, model: &NeuronModel, dt: f64) -> Result<(NeuronState, bool)> {
    if !(state.v.is_finite() && state.u.is_finite()) {
        return Err(Error::NonFiniteState { what: "input state" });
    }
    if !input.is_finite() {
        return Err(Error::NonFiniteState { what: "input current" });
    }
    let mut next = *state;
    let mut fired = false;
    match model {
        NeuronModel::Lif(p) => {
            if state.refractory > 0 {
                next.v = p.v_reset;
                next.refractory = state.refractory - 1;
            } else {
                next.v = state.v + (dt / p.tau_m) * (-(state.v - p.v_rest) + input);
                if next.v >= p.v_th {
                    fired = true;
                    next.v = p.v_reset;
                    next.refractory = p.refractory_steps;
                }
            }
        }
        NeuronModel::Izhikevich(p) => {
            let v = state.v;
            let u = state.u;
            next.v = v + dt * (0.04 * v * v + 5.0 * v + 140.0 - u + input);
            next.u = u + dt * p.a * (p.b * v - u);
            if next.v >= 30.0 {
                fired = true;
                next.v = p.c;
                next.u += p.d;
            }
        }
        NeuronModel::AdEx(p) => {
            let v = state.v;
            let w = state.u;
            let spike_current = p.g_l * p.delta_t * ((v - p.v_t) / p.delta_t).exp();
            next.v = v + dt / p.c_m * (-p.g_l * (v - p.e_l) + spike_current - w + input);
            next.u = w + dt / p.tau_w * (p.a * (v - p.e_l) - w);
            if next.v >= p.v_th {
                fired = true;
                next.v = p.v_reset;
                next.u += p.b;
            }
        }
    }
    if !(next.v.is_finite() && next.u.is_finite()) {
        return Err(Error::NonFiniteState { what: "membrane" });
    }
    Ok((next, fired))
}
