use std::io;

use crate::Coord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("inconsistent convolution shape: {0}")]
    ConvShape(String),

    #[error("non-finite neuron state ({what}) after update")]
    NonFiniteState { what: &'static str },

    #[error("stimulus shape mismatch: expected {expected}, got {got}")]
    StimulusShape { expected: String, got: String },

    #[error("coordinate ({x}, {y}) outside a {side}x{side} Hilbert grid")]
    HilbertOutOfGrid { x: u32, y: u32, side: u32 },

    #[error("neuron {neuron} alone exceeds the core memory budget ({resource})")]
    Unpartitionable { neuron: u32, resource: &'static str },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("mesh {width}x{height} too small for {clusters} clusters")]
    MeshTooSmall { width: u16, height: u16, clusters: usize },

    #[error("packet from {src} carries unknown neuron index {index} for core {core}")]
    UnknownSynapseKey { core: Coord, src: Coord, index: u32 },

    #[error("neuron cursor exhausted at core {0}")]
    CursorExhausted(Coord),

    #[error("packet rejected by network: {0}")]
    Injection(String),

    #[error("network watchdog: no progress for {idle_cycles} NoC cycles at cycle {cycle}; {diagnostics}")]
    Deadlock {
        cycle: u64,
        idle_cycles: u64,
        diagnostics: String,
    },

    #[error("deployment artifact: {0}")]
    Artifact(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("malformed {what}: line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
