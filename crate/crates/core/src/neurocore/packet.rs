use serde::{Deserialize, Serialize};

use super::Bitmap;
use crate::Coord;

/// Flow-control unit. Body flits carry the firing neuron's index local to
/// the source core.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flit {
    Head { dest: Coord, src: Coord },
    Body { index: u32, tail: bool },
}

impl Flit {
    pub fn is_head(&self) -> bool {
        matches!(self, Flit::Head { .. })
    }

    pub fn is_tail(&self) -> bool {
        matches!(self, Flit::Body { tail: true, .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpikePacket {
    pub dest: Coord,
    pub src: Coord,
    pub neuron_indices: Vec<u32>,
    /// Time the packet is handed to the packet generator, in picoseconds.
    pub injection_time: u64,
}

impl SpikePacket {
    pub fn flit_len(&self) -> usize {
        1 + self.neuron_indices.len()
    }

    pub fn flits(&self) -> Vec<Flit> {
        let last = self.neuron_indices.len().saturating_sub(1);
        std::iter::once(Flit::Head {
            dest: self.dest,
            src: self.src,
        })
        .chain(
            self.neuron_indices
                .iter()
                .enumerate()
                .map(|(i, &index)| Flit::Body { index, tail: i == last }),
        )
        .collect()
    }
}

/// Destination-centric dispatch: one packet per `max_body` fired neurons
/// that connect to `dest`.
pub fn generate_merged_packets(
    src: Coord,
    dest: Coord,
    conn: &Bitmap,
    act: &Bitmap,
    max_body: usize,
    time: u64,
) -> Vec<SpikePacket> {
    assert!(max_body >= 1, "max_body must be >= 1");
    let hits: Vec<u32> = conn.and(act).iter_ones().collect();
    hits.chunks(max_body)
        .map(|chunk| SpikePacket {
            dest,
            src,
            neuron_indices: chunk.to_vec(),
            injection_time: time,
        })
        .collect()
}

/// Neuron-centric dispatch: one single-spike packet per destination.
pub fn generate_baseline_packets(src: Coord, index: u32, dests: &[Coord], time: u64) -> Vec<SpikePacket> {
    dests
        .iter()
        .map(|&dest| SpikePacket {
            dest,
            src,
            neuron_indices: vec![index],
            injection_time: time,
        })
        .collect()
}
