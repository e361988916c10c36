//! Cycle-level 2D-mesh network: XY routing, wormhole switching, virtual
//! channels and credit-based flow control.
//!
//! Each router has five input ports (four neighbors plus the local network
//! interface) with `vcs_per_port` virtual channels of `vc_buffer_depth`
//! flits. A flit that arrives at a router becomes eligible for the switch
//! `link_cycles + router_pipeline_cycles` cycles after it was sent, or after
//! `link_cycles` if the router is its destination (ejection bypasses the
//! pipeline). All cross-router effects of a cycle (flit arrivals, credit
//! returns, VC releases) are applied at the end of that cycle, so routers
//! can be evaluated in any order.

mod trace;

pub use trace::{write_trace_csv, TraceRecord};

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neurocore::{Flit, SpikePacket};
use crate::Coord;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub width: u16,
    pub height: u16,
    pub vcs_per_port: usize,
    pub vc_buffer_depth: usize,
    pub router_pipeline_cycles: u64,
    pub link_cycles: u64,
    pub noc_period_ps: u64,
    /// Packets a network interface queues before refusing more; a refused
    /// packet stalls the source core's generator.
    pub injection_queue_packets: usize,
    /// Cycles without any flit movement, while flits are in flight, before
    /// the run is aborted.
    pub watchdog_cycles: u64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            vcs_per_port: 4,
            vc_buffer_depth: 4,
            router_pipeline_cycles: 2,
            link_cycles: 1,
            noc_period_ps: 6250,
            injection_queue_packets: 8,
            watchdog_cycles: 100_000,
        }
    }
}

impl MeshConfig {
    pub fn with_size(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("width", u64::from(self.width)),
            ("height", u64::from(self.height)),
            ("vcs_per_port", self.vcs_per_port as u64),
            ("vc_buffer_depth", self.vc_buffer_depth as u64),
            ("router_pipeline_cycles", self.router_pipeline_cycles),
            ("link_cycles", self.link_cycles),
            ("noc_period_ps", self.noc_period_ps),
            ("injection_queue_packets", self.injection_queue_packets as u64),
            ("watchdog_cycles", self.watchdog_cycles),
        ];
        match counts.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::InvalidParameter(format!("mesh {name} must be >= 1"))),
            None => Ok(()),
        }
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn router_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Uncontended head-to-tail latency of a packet, in NoC cycles.
    pub fn zero_load_latency(&self, hops: u32, flits: usize) -> u64 {
        u64::from(hops) * (self.router_pipeline_cycles + self.link_cycles) + flits as u64 - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Port {
    East,
    West,
    North,
    South,
    /// Injection (input side) or ejection (output side).
    Local,
}

impl Port {
    pub const ALL: [Port; 5] = [Port::East, Port::West, Port::North, Port::South, Port::Local];

    fn index(self) -> usize {
        self as usize
    }

    fn opposite(self) -> Port {
        match self {
            Port::East => Port::West,
            Port::West => Port::East,
            Port::North => Port::South,
            Port::South => Port::North,
            Port::Local => Port::Local,
        }
    }

    fn step(self, c: Coord) -> Coord {
        match self {
            Port::East => Coord::new(c.x + 1, c.y),
            Port::West => Coord::new(c.x - 1, c.y),
            Port::North => Coord::new(c.x, c.y + 1),
            Port::South => Coord::new(c.x, c.y - 1),
            Port::Local => c,
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::East => "E",
            Port::West => "W",
            Port::North => "N",
            Port::South => "S",
            Port::Local => "L",
        })
    }
}

/// Dimension-order routing: resolve X fully, then Y. `Local` means eject.
pub fn xy_route(current: Coord, dest: Coord) -> Port {
    if dest.x > current.x {
        Port::East
    } else if dest.x < current.x {
        Port::West
    } else if dest.y > current.y {
        Port::North
    } else if dest.y < current.y {
        Port::South
    } else {
        Port::Local
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PacketId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub id: PacketId,
    pub src: Coord,
    pub dest: Coord,
    pub flits: usize,
    pub hops: u32,
    pub enqueue_cycle: u64,
    pub head_inject_cycle: u64,
    pub tail_eject_cycle: u64,
}

impl PacketRecord {
    /// Head injection to tail ejection, in NoC cycles.
    pub fn latency(&self) -> u64 {
        self.tail_eject_cycle - self.head_inject_cycle
    }

    pub fn flit_hops(&self) -> u64 {
        self.flits as u64 * u64::from(self.hops)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivered {
    pub packet: SpikePacket,
    pub record: PacketRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Injection {
    Accepted(PacketId),
    /// The network interface queue is full; retry later.
    BackPressure,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NocCounters {
    pub injected_flits: u64,
    pub ejected_flits: u64,
    pub flit_hops: u64,
    pub head_flits: u64,
    pub body_flits: u64,
    pub packets_delivered: u64,
}

#[derive(Clone, Copy, Debug)]
struct NocFlit {
    packet: PacketId,
    flit: Flit,
}

#[derive(Clone, Debug, Default)]
struct InputVc {
    buf: VecDeque<(NocFlit, u64)>,
    route: Option<Port>,
    out_vc: usize,
}

/// Upstream view of the VCs behind one output port.
#[derive(Clone, Debug)]
struct OutputPort {
    credits: Vec<usize>,
    busy: Vec<bool>,
    rr: usize,
}

impl OutputPort {
    fn new(vcs: usize, depth: usize) -> Self {
        Self {
            credits: vec![depth; vcs],
            busy: vec![false; vcs],
            rr: 0,
        }
    }

    fn free_vc(&self) -> Option<usize> {
        (0..self.busy.len()).find(|&v| !self.busy[v] && self.credits[v] > 0)
    }
}

#[derive(Clone, Debug)]
struct Pending {
    id: PacketId,
    flits: VecDeque<Flit>,
    vc: Option<usize>,
    eligible: u64,
}

#[derive(Clone, Debug)]
struct Router {
    coord: Coord,
    inputs: Vec<Vec<InputVc>>,
    outputs: Vec<OutputPort>,
    /// Network interface: queue plus its view of the local input VCs.
    ni_queue: VecDeque<Pending>,
    ni_port: OutputPort,
}

/// Cross-router effect, applied at the end of the cycle.
#[derive(Clone, Copy, Debug)]
enum Deferred {
    Arrive {
        router: usize,
        port: Port,
        vc: usize,
        flit: NocFlit,
        ready_at: u64,
    },
    /// Slot freed in `port`/`vc` of `router`: return a credit upstream and,
    /// for tails, release the VC.
    Freed {
        router: usize,
        port: Port,
        vc: usize,
        release: bool,
    },
}

struct InFlight {
    packet: SpikePacket,
    record: PacketRecord,
}

pub struct Noc {
    cfg: MeshConfig,
    routers: Vec<Router>,
    cycle: u64,
    next_id: u64,
    in_flight: BTreeMap<PacketId, InFlight>,
    delivered: Vec<Delivered>,
    counters: NocCounters,
    idle_cycles: u64,
    trace: Option<Vec<TraceRecord>>,
}

impl Noc {
    pub fn new(cfg: MeshConfig) -> Result<Self> {
        cfg.validate()?;
        let routers = (0..cfg.router_count())
            .map(|i| Router {
                coord: Coord::from_index(i, cfg.width),
                inputs: vec![vec![InputVc::default(); cfg.vcs_per_port]; Port::ALL.len()],
                outputs: vec![OutputPort::new(cfg.vcs_per_port, cfg.vc_buffer_depth); Port::ALL.len()],
                ni_queue: VecDeque::new(),
                ni_port: OutputPort::new(cfg.vcs_per_port, cfg.vc_buffer_depth),
            })
            .collect();
        Ok(Self {
            cfg,
            routers,
            cycle: 0,
            next_id: 0,
            in_flight: BTreeMap::new(),
            delivered: Vec::new(),
            counters: NocCounters::default(),
            idle_cycles: 0,
            trace: None,
        })
    }

    pub fn config(&self) -> &MeshConfig {
        &self.cfg
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Next cycle to be simulated.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn counters(&self) -> &NocCounters {
        &self.counters
    }

    /// True when no flit is buffered anywhere and every injection queue is empty.
    pub fn drained(&self) -> bool {
        self.in_flight.is_empty()
    }

    pub fn in_flight_packets(&self) -> usize {
        self.in_flight.len()
    }

    pub fn can_inject(&self, src: Coord) -> bool {
        self.cfg.contains(src)
            && self.routers[src.index(self.cfg.width)].ni_queue.len() < self.cfg.injection_queue_packets
    }

    /// Queues `packet` at its source's network interface. Its first flit can
    /// enter the router in the current cycle.
    pub fn inject_packet(&mut self, packet: SpikePacket) -> Result<Injection> {
        let (src, dest) = (packet.src, packet.dest);
        if !self.cfg.contains(src) || !self.cfg.contains(dest) {
            return Err(Error::Injection(format!("{src} -> {dest} leaves the mesh")));
        }
        if src == dest {
            return Err(Error::Injection(format!("packet from {src} addressed to itself")));
        }
        if packet.neuron_indices.is_empty() {
            return Err(Error::Injection("packet without body flits".into()));
        }
        if !self.can_inject(src) {
            return Ok(Injection::BackPressure);
        }
        let id = PacketId(self.next_id);
        self.next_id += 1;
        let flits: VecDeque<Flit> = packet.flits().into();
        let record = PacketRecord {
            id,
            src,
            dest,
            flits: flits.len(),
            hops: src.manhattan(dest),
            enqueue_cycle: self.cycle,
            head_inject_cycle: 0,
            tail_eject_cycle: 0,
        };
        self.routers[src.index(self.cfg.width)].ni_queue.push_back(Pending {
            id,
            flits,
            vc: None,
            eligible: self.cycle,
        });
        self.in_flight.insert(id, InFlight { packet, record });
        Ok(Injection::Accepted(id))
    }

    /// Packets whose tail ejected since the last call, in ejection order.
    pub fn take_delivered(&mut self) -> Vec<Delivered> {
        std::mem::take(&mut self.delivered)
    }

    /// Jumps an idle network forward to `cycle`.
    pub fn skip_to(&mut self, cycle: u64) {
        if self.drained() && cycle > self.cycle {
            self.cycle = cycle;
        }
    }

    fn neighbor(&self, router: usize, port: Port) -> usize {
        port.step(self.routers[router].coord).index(self.cfg.width)
    }

    /// Simulates one NoC cycle.
    pub fn step(&mut self) -> Result<()> {
        let now = self.cycle;
        let mut deferred = Vec::new();
        let mut progress = false;
        for r in 0..self.routers.len() {
            progress |= self.inject_from_ni(r, now);
            progress |= self.switch(r, now, &mut deferred);
        }
        for d in deferred {
            self.apply(d);
        }
        self.cycle += 1;
        if progress || self.drained() {
            self.idle_cycles = 0;
        } else {
            self.idle_cycles += 1;
            if self.idle_cycles >= self.cfg.watchdog_cycles {
                return Err(Error::Deadlock {
                    cycle: now,
                    idle_cycles: self.idle_cycles,
                    diagnostics: self.diagnostics(),
                });
            }
        }
        Ok(())
    }

    /// Steps until every queued packet has been delivered.
    pub fn run_until_drained(&mut self) -> Result<()> {
        while !self.drained() {
            self.step()?;
        }
        Ok(())
    }

    fn inject_from_ni(&mut self, r: usize, now: u64) -> bool {
        let pipeline = self.cfg.router_pipeline_cycles;
        let router = &mut self.routers[r];
        let Some(front) = router.ni_queue.front_mut() else {
            return false;
        };
        if front.eligible > now {
            return false;
        }
        let vc = match front.vc {
            Some(vc) => vc,
            None => match router.ni_port.free_vc() {
                Some(vc) => {
                    router.ni_port.busy[vc] = true;
                    front.vc = Some(vc);
                    vc
                }
                None => return false,
            },
        };
        if router.ni_port.credits[vc] == 0 {
            return false;
        }
        let flit = front.flits.pop_front().expect("pending packet has flits");
        let id = front.id;
        if front.flits.is_empty() {
            router.ni_queue.pop_front();
        }
        router.ni_port.credits[vc] -= 1;
        router.inputs[Port::Local.index()][vc]
            .buf
            .push_back((NocFlit { packet: id, flit }, now + pipeline));
        self.counters.injected_flits += 1;
        if flit.is_head() {
            self.counters.head_flits += 1;
            if let Some(p) = self.in_flight.get_mut(&id) {
                p.record.head_inject_cycle = now;
            }
        } else {
            self.counters.body_flits += 1;
        }
        true
    }

    fn switch(&mut self, r: usize, now: u64, deferred: &mut Vec<Deferred>) -> bool {
        let vcs = self.cfg.vcs_per_port;
        let slots = Port::ALL.len() * vcs;
        let coord = self.routers[r].coord;
        let mut input_used = [false; 5];
        let mut moved = false;

        // route computation for packets whose head reached the front
        for port in &mut self.routers[r].inputs {
            for vc in port.iter_mut() {
                if vc.route.is_none() {
                    if let Some((
                        NocFlit {
                            flit: Flit::Head { dest, .. },
                            ..
                        },
                        _,
                    )) = vc.buf.front()
                    {
                        vc.route = Some(xy_route(coord, *dest));
                    }
                }
            }
        }

        for out in Port::ALL {
            let router = &self.routers[r];
            let op = &router.outputs[out.index()];
            let start = op.rr;
            let mut winner = None;
            for k in 1..=slots {
                let slot = (start + k) % slots;
                let (ip, v) = (slot / vcs, slot % vcs);
                if input_used[ip] {
                    continue;
                }
                let ivc = &router.inputs[ip][v];
                let Some(&(nf, ready_at)) = ivc.buf.front() else {
                    continue;
                };
                if ready_at > now || ivc.route != Some(out) {
                    continue;
                }
                let out_vc = if out == Port::Local {
                    0
                } else if nf.flit.is_head() {
                    match op.free_vc() {
                        Some(v) => v,
                        None => continue,
                    }
                } else if op.credits[ivc.out_vc] > 0 {
                    ivc.out_vc
                } else {
                    continue;
                };
                winner = Some((slot, ip, v, out_vc));
                break;
            }
            let Some((slot, ip, v, out_vc)) = winner else {
                continue;
            };
            input_used[ip] = true;
            moved = true;
            let link = self.cfg.link_cycles;
            let pipeline = self.cfg.router_pipeline_cycles;
            let next = if out == Port::Local { r } else { self.neighbor(r, out) };
            let router = &mut self.routers[r];
            router.outputs[out.index()].rr = slot;
            let ivc = &mut router.inputs[ip][v];
            let (nf, _) = ivc.buf.pop_front().expect("winner has a flit");
            let tail = nf.flit.is_tail();
            if nf.flit.is_head() {
                ivc.out_vc = out_vc;
            }
            if tail {
                ivc.route = None;
            }
            deferred.push(Deferred::Freed {
                router: r,
                port: Port::ALL[ip],
                vc: v,
                release: tail,
            });
            if out == Port::Local {
                self.counters.ejected_flits += 1;
                if tail {
                    let mut done = self.in_flight.remove(&nf.packet).expect("ejected packet is tracked");
                    done.record.tail_eject_cycle = now;
                    self.counters.packets_delivered += 1;
                    self.delivered.push(Delivered {
                        packet: done.packet,
                        record: done.record,
                    });
                }
                continue;
            }
            let op = &mut router.outputs[out.index()];
            op.credits[out_vc] -= 1;
            if nf.flit.is_head() {
                op.busy[out_vc] = true;
            }
            self.counters.flit_hops += 1;
            let next_coord = self.routers[next].coord;
            let ejects_next = match self.in_flight.get(&nf.packet) {
                Some(p) => p.record.dest == next_coord,
                None => false,
            };
            let ready_at = now + link + if ejects_next { 0 } else { pipeline };
            if let Some(trace) = &mut self.trace {
                trace.push(TraceRecord {
                    cycle: now,
                    time_ps: now * self.cfg.noc_period_ps,
                    from: coord,
                    to: next_coord,
                    vc: out_vc,
                    packet: nf.packet.0,
                    flit: match nf.flit {
                        Flit::Head { .. } => "head",
                        Flit::Body { tail: true, .. } => "tail",
                        Flit::Body { .. } => "body",
                    },
                });
            }
            deferred.push(Deferred::Arrive {
                router: next,
                port: out.opposite(),
                vc: out_vc,
                flit: nf,
                ready_at,
            });
        }
        moved
    }

    fn apply(&mut self, d: Deferred) {
        match d {
            Deferred::Arrive {
                router,
                port,
                vc,
                flit,
                ready_at,
            } => {
                self.routers[router].inputs[port.index()][vc]
                    .buf
                    .push_back((flit, ready_at));
            }
            Deferred::Freed {
                router,
                port,
                vc,
                release,
            } => {
                let upstream = if port == Port::Local {
                    &mut self.routers[router].ni_port
                } else {
                    let up = self.neighbor(router, port);
                    &mut self.routers[up].outputs[port.opposite().index()]
                };
                upstream.credits[vc] += 1;
                if release {
                    upstream.busy[vc] = false;
                }
            }
        }
    }

    fn diagnostics(&self) -> String {
        let mut parts = Vec::new();
        for router in &self.routers {
            let buffered: usize = router.inputs.iter().flatten().map(|vc| vc.buf.len()).sum();
            if buffered > 0 || !router.ni_queue.is_empty() {
                parts.push(format!(
                    "{}: {buffered} buffered, {} queued",
                    router.coord,
                    router.ni_queue.len()
                ));
            }
        }
        format!("{} packets in flight; {}", self.in_flight.len(), parts.join(", "))
    }
}
