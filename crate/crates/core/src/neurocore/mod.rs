//! Behavioral model of one neuromorphic core: spike decode, weight
//! accumulation, neuron updates in execution-queue order and packet
//! generation in either transmission mode.

mod bitmap;
mod packet;

pub use bitmap::Bitmap;
pub use packet::{generate_baseline_packets, generate_merged_packets, Flit, SpikePacket};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{validate_schedule, CheckingTable, DestMap, ExecQueue};
use crate::snn::{accumulated_current, step_neuron, NeuronId, NeuronModel, NeuronState, Weight};
use crate::Coord;

/// Bytes touched per stored synapse entry (post index + weight).
pub const SYNAPSE_ENTRY_BYTES: u64 = 4;
pub const ACCUMULATOR_BYTES: u64 = 4;
pub const NEURON_STATE_BYTES: u64 = 24;
pub const DEST_LIST_ENTRY_BYTES: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Neuron-centric: one packet per (fired neuron, destination), sent on fire.
    Baseline,
    /// Destination-centric: merged packets sent when a barrier neuron completes.
    UniSpike,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::UniSpike => "unispike",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "unispike" => Ok(Mode::UniSpike),
            other => Err(Error::InvalidParameter(format!("unknown mode `{other}`"))),
        }
    }
}

/// Cycle costs of the core pipeline. Defaults are engineering values, not
/// measurements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreTiming {
    pub core_period_ps: u64,
    /// Per synaptic accumulation triggered by a decoded spike.
    pub decode_cycles_per_event: u64,
    pub update_cycles: u64,
    pub generate_cycles_per_flit: u64,
    pub max_body_flits: usize,
}

impl Default for CoreTiming {
    fn default() -> Self {
        Self {
            core_period_ps: 2000,
            decode_cycles_per_event: 1,
            update_cycles: 4,
            generate_cycles_per_flit: 1,
            max_body_flits: 16,
        }
    }
}

impl CoreTiming {
    pub fn validate(&self) -> Result<()> {
        if self.core_period_ps == 0 || self.update_cycles == 0 || self.max_body_flits == 0 {
            return Err(Error::InvalidParameter(
                "core period, update cycles and max_body_flits must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Key of the destination-side synapse table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SynapseKey {
    pub src: Coord,
    pub index: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalSynapse {
    pub post: u32,
    pub weight: Weight,
}

/// Static, deployable contents of one core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreProgram {
    pub coord: Coord,
    /// Local index -> global neuron id.
    pub neurons: Vec<NeuronId>,
    pub models: Vec<NeuronModel>,
    pub model_of: Vec<u16>,
    /// Incoming synapses, including intra-core ones under the core's own coordinate.
    pub synapses: BTreeMap<SynapseKey, Vec<LocalSynapse>>,
    pub connections: BTreeMap<Coord, Bitmap>,
    pub queue: ExecQueue,
    pub table: CheckingTable,
    pub frac_bits: u8,
}

impl CoreProgram {
    pub fn local_count(&self) -> usize {
        self.neurons.len()
    }

    pub fn dest_map(&self) -> DestMap {
        self.connections
            .iter()
            .map(|(&c, bits)| (c, bits.iter_ones().collect::<BTreeSet<u32>>()))
            .collect()
    }

    /// External destinations of each local neuron, row-major.
    pub fn destinations_by_neuron(&self) -> Vec<Vec<Coord>> {
        let mut out = vec![Vec::new(); self.local_count()];
        for (&c, bits) in &self.connections {
            for i in bits.iter_ones() {
                out[i as usize].push(c);
            }
        }
        out
    }

    /// Structural problems, one message per problem; empty when consistent.
    pub fn check(&self) -> Vec<String> {
        let n = self.local_count();
        let mut issues = Vec::new();
        if self.model_of.len() != n {
            issues.push(format!("{} model indices for {n} neurons", self.model_of.len()));
        }
        if let Some(&m) = self.model_of.iter().find(|&&m| m as usize >= self.models.len()) {
            issues.push(format!("model index {m} outside palette of {}", self.models.len()));
        }
        for model in &self.models {
            if let Err(e) = model.validate() {
                issues.push(e.to_string());
            }
        }
        for (key, posts) in &self.synapses {
            if key.src == self.coord && key.index as usize >= n {
                issues.push(format!("intra-core synapse from unknown local neuron {}", key.index));
            }
            if let Some(s) = posts.iter().find(|s| s.post as usize >= n) {
                issues.push(format!(
                    "synapse from {}#{} targets unknown neuron {}",
                    key.src, key.index, s.post
                ));
            }
        }
        for (c, bits) in &self.connections {
            if *c == self.coord {
                issues.push(format!("connection bitmap targets the core itself ({c})"));
            }
            if bits.len() != n {
                issues.push(format!(
                    "connection bitmap for {c} has {} bits, expected {n}",
                    bits.len()
                ));
            }
            if bits.count_ones() == 0 {
                issues.push(format!("connection bitmap for {c} is empty"));
            }
        }
        let mut seen = vec![false; n];
        for q in self.queue.iter() {
            match seen.get_mut(q as usize) {
                Some(s) if !*s => *s = true,
                Some(_) => {}
                None => issues.push(format!("execution queue holds unknown neuron {q}")),
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            issues.push(format!("neuron {missing} never updated: execution queue incomplete"));
        }
        issues.extend(
            validate_schedule(&self.queue, &self.table, &self.dest_map())
                .iter()
                .map(ToString::to_string),
        );
        issues
    }
}

/// Counters for one core and one timestep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreActivity {
    pub decoded_flits: u64,
    pub accumulations: u64,
    pub updates: u64,
    pub generated_flits: u64,
    pub sram_read_bytes: u64,
    pub sram_write_bytes: u64,
}

impl CoreActivity {
    pub fn add(&mut self, other: &CoreActivity) {
        self.decoded_flits += other.decoded_flits;
        self.accumulations += other.accumulations;
        self.updates += other.updates;
        self.generated_flits += other.generated_flits;
        self.sram_read_bytes += other.sram_read_bytes;
        self.sram_write_bytes += other.sram_write_bytes;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub neuron: u32,
    pub fired: bool,
    /// Destinations unlocked by this neuron, in binding order.
    pub dispatch: Vec<Coord>,
}

/// Result of running one timestep on one core in isolation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoreStep {
    /// Packets in emission order; `injection_time` is when each becomes
    /// available to the packet generator.
    pub emitted: Vec<SpikePacket>,
    /// Decode plus update time, in picoseconds.
    pub busy_ps: u64,
    /// Local indices that fired, ascending.
    pub fired: Vec<u32>,
    /// Destinations dispatched (UniSpike), in dispatch order.
    pub dispatched: Vec<Coord>,
    pub activity: CoreActivity,
}

/// Mutable state of one core.
#[derive(Clone, Debug)]
pub struct CoreState {
    program: CoreProgram,
    mode: Mode,
    dests_of: Vec<Vec<Coord>>,
    states: Vec<NeuronState>,
    acc: Vec<i64>,
    activation: Bitmap,
    cursor: usize,
    /// Fired neurons with intra-core targets, integrated next timestep.
    local_pending: Vec<u32>,
    activity: CoreActivity,
}

impl CoreState {
    pub fn new(program: CoreProgram, mode: Mode) -> Result<Self> {
        let issues = program.check();
        if !issues.is_empty() {
            return Err(Error::Artifact(format!(
                "core {}: {}",
                program.coord,
                issues.join("; ")
            )));
        }
        let n = program.local_count();
        let states = program
            .model_of
            .iter()
            .map(|&m| program.models[m as usize].initial_state())
            .collect();
        Ok(Self {
            dests_of: program.destinations_by_neuron(),
            states,
            acc: vec![0; n],
            activation: Bitmap::new(n),
            cursor: 0,
            local_pending: Vec::new(),
            activity: CoreActivity::default(),
            mode,
            program,
        })
    }

    pub fn coord(&self) -> Coord {
        self.program.coord
    }

    pub fn program(&self) -> &CoreProgram {
        &self.program
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn activation(&self) -> &Bitmap {
        &self.activation
    }

    pub fn accumulators(&self) -> &[i64] {
        &self.acc
    }

    pub fn activity(&self) -> &CoreActivity {
        &self.activity
    }

    fn accumulate(&mut self, key: SynapseKey) -> Result<u64> {
        let posts = self.program.synapses.get(&key).ok_or(Error::UnknownSynapseKey {
            core: self.program.coord,
            src: key.src,
            index: key.index,
        })?;
        for s in posts {
            self.acc[s.post as usize] += i64::from(s.weight.0);
        }
        let events = posts.len() as u64;
        self.activity.accumulations += events;
        self.activity.sram_read_bytes += events * (SYNAPSE_ENTRY_BYTES + ACCUMULATOR_BYTES);
        self.activity.sram_write_bytes += events * ACCUMULATOR_BYTES;
        Ok(events)
    }

    /// Integrates one arrived packet; returns the number of accumulations.
    pub fn decode_packet(&mut self, packet: &SpikePacket) -> Result<u64> {
        if packet.dest != self.program.coord {
            return Err(Error::Injection(format!(
                "packet for {} delivered to core {}",
                packet.dest, self.program.coord
            )));
        }
        let mut events = 0;
        for &index in &packet.neuron_indices {
            events += self.accumulate(SynapseKey { src: packet.src, index })?;
            self.activity.decoded_flits += 1;
        }
        Ok(events)
    }

    /// Integrates the previous timestep's intra-core spikes.
    pub fn deliver_local(&mut self) -> Result<u64> {
        let pending = std::mem::take(&mut self.local_pending);
        let mut events = 0;
        for index in pending {
            events += self.accumulate(SynapseKey {
                src: self.program.coord,
                index,
            })?;
        }
        Ok(events)
    }

    /// Updates the neuron under the cursor. `external` holds per-local-neuron
    /// stimulus current for this timestep.
    pub fn update_next_neuron(&mut self, external: &[f64], dt: f64) -> Result<UpdateOutcome> {
        let Some(&i) = self.program.queue.0.get(self.cursor) else {
            return Err(Error::CursorExhausted(self.program.coord));
        };
        let idx = i as usize;
        let model = &self.program.models[self.program.model_of[idx] as usize];
        let input =
            accumulated_current(self.acc[idx], self.program.frac_bits) + external.get(idx).copied().unwrap_or(0.0);
        let (next, fired) = step_neuron(&self.states[idx], input, model, dt)?;
        self.states[idx] = next;
        self.activity.updates += 1;
        self.activity.sram_read_bytes += NEURON_STATE_BYTES + ACCUMULATOR_BYTES;
        self.activity.sram_write_bytes += NEURON_STATE_BYTES;
        if fired {
            self.activation.set(idx);
            let key = SynapseKey {
                src: self.program.coord,
                index: i,
            };
            if self.program.synapses.contains_key(&key) {
                self.local_pending.push(i);
            }
        }
        self.cursor += 1;
        let dispatch = self.program.table.get(i).map(<[Coord]>::to_vec).unwrap_or_default();
        Ok(UpdateOutcome {
            neuron: i,
            fired,
            dispatch,
        })
    }

    /// Packets produced by one update outcome in the core's mode.
    pub fn packets_for(&mut self, outcome: &UpdateOutcome, max_body: usize, time: u64) -> Vec<SpikePacket> {
        let src = self.program.coord;
        let packets = match self.mode {
            Mode::Baseline if outcome.fired => {
                let dests = &self.dests_of[outcome.neuron as usize];
                self.activity.sram_read_bytes += dests.len() as u64 * DEST_LIST_ENTRY_BYTES;
                generate_baseline_packets(src, outcome.neuron, dests, time)
            }
            Mode::Baseline => Vec::new(),
            Mode::UniSpike => {
                let mut out = Vec::new();
                for dest in &outcome.dispatch {
                    let conn = &self.program.connections[dest];
                    self.activity.sram_read_bytes += 2 * conn.byte_len() as u64 + DEST_LIST_ENTRY_BYTES;
                    out.extend(generate_merged_packets(
                        src,
                        *dest,
                        conn,
                        &self.activation,
                        max_body,
                        time,
                    ));
                }
                out
            }
        };
        self.activity.generated_flits += packets.iter().map(|p| p.flit_len() as u64).sum::<u64>();
        packets
    }

    /// Clears per-timestep state and returns the activity counters of the
    /// finished step.
    pub fn end_timestep(&mut self) -> CoreActivity {
        self.activation.clear();
        self.acc.iter_mut().for_each(|a| *a = 0);
        self.cursor = 0;
        std::mem::take(&mut self.activity)
    }

    /// Runs a full timestep starting at `start_ps`, assuming an unbounded
    /// output queue.
    pub fn run_timestep(
        &mut self,
        arrivals: &[SpikePacket],
        external: &[f64],
        dt: f64,
        timing: &CoreTiming,
        start_ps: u64,
    ) -> Result<CoreStep> {
        let mut events = self.deliver_local()?;
        for p in arrivals {
            events += self.decode_packet(p)?;
        }
        let mut cycles = events * timing.decode_cycles_per_event;
        let mut step = CoreStep::default();
        for _ in 0..self.program.queue.len() {
            let outcome = self.update_next_neuron(external, dt)?;
            cycles += timing.update_cycles;
            let done = start_ps + cycles * timing.core_period_ps;
            if outcome.fired {
                step.fired.push(outcome.neuron);
            }
            step.dispatched.extend(&outcome.dispatch);
            let packets = self.packets_for(&outcome, timing.max_body_flits, done);
            step.emitted.extend(packets);
        }
        step.fired.sort_unstable();
        step.busy_ps = cycles * timing.core_period_ps;
        step.activity = self.end_timestep();
        Ok(step)
    }
}

/// One-call form of [`CoreState::run_timestep`].
pub fn run_core_timestep(
    core: &mut CoreState,
    arrivals: &[SpikePacket],
    external: &[f64],
    dt: f64,
    timing: &CoreTiming,
    start_ps: u64,
) -> Result<CoreStep> {
    core.run_timestep(arrivals, external, dt, timing, start_ps)
}

#[cfg(test)]
mod tests;
