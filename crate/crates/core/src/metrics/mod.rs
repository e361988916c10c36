//! Traffic and activity accounting, event-based energy costing and the
//! address-redundancy profile.

mod report;

pub use report::{
    compare, emit_comparison, emit_report, read_report, CellSummary, ComparisonReport, LatencyStats, Ratios, RunReport,
    StepRow,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neurocore::CoreActivity;
use crate::noc::PacketRecord;
use crate::Coord;

/// Exact event counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub injected_flits: u64,
    pub ejected_flits: u64,
    pub flit_hops: u64,
    pub packets: u64,
    pub head_flits: u64,
    pub body_flits: u64,
    pub neuron_updates: u64,
    pub decoded_flits: u64,
    pub accumulations: u64,
    pub sram_read_bytes: u64,
    pub sram_write_bytes: u64,
}

impl Counts {
    pub fn add(&mut self, o: &Counts) {
        self.injected_flits += o.injected_flits;
        self.ejected_flits += o.ejected_flits;
        self.flit_hops += o.flit_hops;
        self.packets += o.packets;
        self.head_flits += o.head_flits;
        self.body_flits += o.body_flits;
        self.neuron_updates += o.neuron_updates;
        self.decoded_flits += o.decoded_flits;
        self.accumulations += o.accumulations;
        self.sram_read_bytes += o.sram_read_bytes;
        self.sram_write_bytes += o.sram_write_bytes;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    FlitHop,
    Injection { head: bool },
    Ejection,
    PacketSent,
    SramRead { bytes: u64 },
    SramWrite { bytes: u64 },
    NeuronUpdate,
    Decode,
}

/// Totals plus a breakdown per (timestep, core). Network events are
/// attributed to the packet's source core.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficLedger {
    totals: Counts,
    per_core: BTreeMap<(u32, Coord), Counts>,
}

impl TrafficLedger {
    pub fn totals(&self) -> &Counts {
        &self.totals
    }

    pub fn per_core(&self) -> &BTreeMap<(u32, Coord), Counts> {
        &self.per_core
    }

    /// Sum over cores for one timestep.
    pub fn timestep(&self, t: u32) -> Counts {
        let mut c = Counts::default();
        for (_, v) in self
            .per_core
            .range((t, Coord::new(0, 0))..=(t, Coord::new(u16::MAX, u16::MAX)))
        {
            c.add(v);
        }
        c
    }

    fn apply(&mut self, core: Coord, timestep: u32, f: impl Fn(&mut Counts)) {
        f(&mut self.totals);
        f(self.per_core.entry((timestep, core)).or_default());
    }

    pub fn record_event(&mut self, event: Event, core: Coord, timestep: u32) {
        self.apply(core, timestep, |c| match event {
            Event::FlitHop => c.flit_hops += 1,
            Event::Injection { head } => {
                c.injected_flits += 1;
                if head {
                    c.head_flits += 1;
                } else {
                    c.body_flits += 1;
                }
            }
            Event::Ejection => c.ejected_flits += 1,
            Event::PacketSent => c.packets += 1,
            Event::SramRead { bytes } => c.sram_read_bytes += bytes,
            Event::SramWrite { bytes } => c.sram_write_bytes += bytes,
            Event::NeuronUpdate => c.neuron_updates += 1,
            Event::Decode => c.decoded_flits += 1,
        });
    }

    /// Records a delivered packet in bulk: injection, ejection and per-link
    /// traversals of all its flits.
    pub fn record_packet(&mut self, record: &PacketRecord, timestep: u32) {
        let flits = record.flits as u64;
        self.apply(record.src, timestep, |c| {
            c.packets += 1;
            c.injected_flits += flits;
            c.ejected_flits += flits;
            c.head_flits += 1;
            c.body_flits += flits - 1;
            c.flit_hops += record.flit_hops();
        });
    }

    pub fn record_activity(&mut self, core: Coord, timestep: u32, a: &CoreActivity) {
        self.apply(core, timestep, |c| {
            c.neuron_updates += a.updates;
            c.decoded_flits += a.decoded_flits;
            c.accumulations += a.accumulations;
            c.sram_read_bytes += a.sram_read_bytes;
            c.sram_write_bytes += a.sram_write_bytes;
        });
    }
}

/// Per-event energy costs (arbitrary units) and static power (units per ps).
///
/// The defaults are placeholders chosen for plausible relative magnitudes;
/// they are not measured values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyCostTable {
    pub sram_read_per_byte: f64,
    pub sram_write_per_byte: f64,
    pub neuron_update_op: f64,
    pub router_per_flit: f64,
    pub link_per_flit: f64,
    pub decode_per_flit: f64,
    pub core_static_per_ps: f64,
    pub router_static_per_ps: f64,
}

impl Default for EnergyCostTable {
    fn default() -> Self {
        Self {
            sram_read_per_byte: 1.0,
            sram_write_per_byte: 1.25,
            neuron_update_op: 2.0,
            router_per_flit: 6.0,
            link_per_flit: 3.0,
            decode_per_flit: 1.0,
            core_static_per_ps: 1e-4,
            router_static_per_ps: 5e-5,
        }
    }
}

impl EnergyCostTable {
    pub fn zero() -> Self {
        Self {
            sram_read_per_byte: 0.0,
            sram_write_per_byte: 0.0,
            neuron_update_op: 0.0,
            router_per_flit: 0.0,
            link_per_flit: 0.0,
            decode_per_flit: 0.0,
            core_static_per_ps: 0.0,
            router_static_per_ps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sram_read_per_byte,
            self.sram_write_per_byte,
            self.neuron_update_op,
            self.router_per_flit,
            self.link_per_flit,
            self.decode_per_flit,
            self.core_static_per_ps,
            self.router_static_per_ps,
        ];
        if all.iter().all(|c| c.is_finite() && *c >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "energy costs must be finite and non-negative".into(),
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub sram_read: f64,
    pub sram_write: f64,
    pub neuron_update: f64,
    pub router: f64,
    pub link: f64,
    pub decode: f64,
    pub dynamic: f64,
    pub core_static: f64,
    pub router_static: f64,
    #[serde(rename = "static")]
    pub static_: f64,
    pub total: f64,
}

/// Dynamic energy is the sum of event counts times per-event costs; static
/// energy is power times modeled time for every core and router.
pub fn compute_energy(
    counts: &Counts,
    costs: &EnergyCostTable,
    cores: usize,
    routers: usize,
    total_time_ps: u64,
) -> EnergyBreakdown {
    let hops = counts.flit_hops as f64;
    let mut e = EnergyBreakdown {
        sram_read: counts.sram_read_bytes as f64 * costs.sram_read_per_byte,
        sram_write: counts.sram_write_bytes as f64 * costs.sram_write_per_byte,
        neuron_update: counts.neuron_updates as f64 * costs.neuron_update_op,
        router: hops * costs.router_per_flit,
        link: hops * costs.link_per_flit,
        decode: counts.decoded_flits as f64 * costs.decode_per_flit,
        core_static: cores as f64 * costs.core_static_per_ps * total_time_ps as f64,
        router_static: routers as f64 * costs.router_static_per_ps * total_time_ps as f64,
        ..EnergyBreakdown::default()
    };
    e.dynamic = e.sram_read + e.sram_write + e.neuron_update + e.router + e.link + e.decode;
    e.static_ = e.core_static + e.router_static;
    e.total = e.dynamic + e.static_;
    e
}

/// One transmitted packet, as needed for redundancy profiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PacketLogEntry {
    pub timestep: u32,
    pub src_x: u16,
    pub src_y: u16,
    pub dest_x: u16,
    pub dest_y: u16,
    pub flits: u32,
    pub inject_cycle: u64,
    pub eject_cycle: u64,
}

impl PacketLogEntry {
    pub fn new(record: &PacketRecord, timestep: u32) -> Self {
        Self {
            timestep,
            src_x: record.src.x,
            src_y: record.src.y,
            dest_x: record.dest.x,
            dest_y: record.dest.y,
            flits: record.flits as u32,
            inject_cycle: record.head_inject_cycle,
            eject_cycle: record.tail_eject_cycle,
        }
    }

    pub fn src(&self) -> Coord {
        Coord::new(self.src_x, self.src_y)
    }

    pub fn dest(&self) -> Coord {
        Coord::new(self.dest_x, self.dest_y)
    }
}

pub fn write_packet_log<W: Write>(log: &[PacketLogEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in log {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Lines starting with `#` are skipped.
pub fn read_packet_log<R: Read>(input: R) -> Result<Vec<PacketLogEntry>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize().map(|e| e.map_err(Error::from)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedundancyProfile {
    /// One address per packet head.
    pub total_address_count: u64,
    /// One address per distinct (source, destination, timestep).
    pub effective_address_count: u64,
    pub payload_flit_count: u64,
    pub ratio: f64,
    /// No packets were observed; `ratio` is reported as 1.
    pub empty: bool,
}

pub fn redundancy_profile(log: &[PacketLogEntry]) -> RedundancyProfile {
    let distinct: BTreeSet<(u32, Coord, Coord)> = log.iter().map(|e| (e.timestep, e.src(), e.dest())).collect();
    let total = log.len() as u64;
    let effective = distinct.len() as u64;
    RedundancyProfile {
        total_address_count: total,
        effective_address_count: effective,
        payload_flit_count: log.iter().map(|e| u64::from(e.flits) - 1).sum(),
        ratio: if total == 0 {
            1.0
        } else {
            effective as f64 / total as f64
        },
        empty: total == 0,
    }
}
