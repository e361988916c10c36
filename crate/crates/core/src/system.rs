//! Whole-system run: cores, packet generators and the network advanced on
//! one picosecond timeline, with a global barrier between timesteps.
//!
//! Within a timestep every core first integrates the spikes delivered in
//! the previous one, then updates its neurons in execution-queue order.
//! Packets leave the update engine at fixed completion times and pass
//! through a per-core generator (one core cycle per flit) into the network
//! interface queue; a full queue stalls the generator but never the update
//! engine. The barrier releases once every core has finished, every
//! generator is empty and the network has drained.

use std::collections::VecDeque;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::deploy::Deployment;
use crate::error::{Error, Result};
use crate::metrics::{
    compute_energy, EnergyBreakdown, EnergyCostTable, LatencyStats, PacketLogEntry, StepRow, TrafficLedger,
};
use crate::neurocore::{CoreState, CoreTiming, Mode, SpikePacket};
use crate::noc::{Injection, MeshConfig, Noc, PacketRecord, TraceRecord};
use crate::snn::{NeuronId, SpikeTrain, Stimulus};
use crate::Coord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub mesh: MeshConfig,
    pub timing: CoreTiming,
    pub mode: Mode,
    pub timesteps: u32,
    /// Integration step in milliseconds.
    pub dt: f64,
    pub costs: EnergyCostTable,
    pub trace: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SimOutput {
    pub spikes: SpikeTrain,
    pub ledger: TrafficLedger,
    pub steps: Vec<StepRow>,
    pub exec_time_ps: u64,
    pub energy: EnergyBreakdown,
    pub packet_log: Vec<PacketLogEntry>,
    pub latency: LatencyStats,
    pub trace: Vec<TraceRecord>,
}

fn ceil_to(t: u64, grid: u64) -> u64 {
    t.div_ceil(grid) * grid
}

/// Packet generator of one core.
#[derive(Debug, Default)]
struct Generator {
    pending: VecDeque<SpikePacket>,
    /// Packet being generated and the time generation completes.
    current: Option<(SpikePacket, u64)>,
    free_at: u64,
    stalled: bool,
}

impl Generator {
    fn load(&mut self, packets: Vec<SpikePacket>, step_start: u64) {
        self.pending = packets.into();
        self.free_at = step_start;
    }

    fn idle(&self) -> bool {
        self.current.is_none() && self.pending.is_empty()
    }

    fn fill(&mut self, timing: &CoreTiming) {
        if self.current.is_none() {
            if let Some(p) = self.pending.pop_front() {
                let start = p.injection_time.max(self.free_at);
                let finish = start + p.flit_len() as u64 * timing.generate_cycles_per_flit * timing.core_period_ps;
                self.current = Some((p, finish));
            }
        }
    }

    fn next_completion(&mut self, timing: &CoreTiming) -> Option<u64> {
        self.fill(timing);
        self.current.as_ref().map(|(_, f)| *f)
    }

    /// Hands every packet finished by `now` to the network interface.
    fn advance(&mut self, now: u64, noc: &mut Noc, timing: &CoreTiming) -> Result<()> {
        loop {
            self.fill(timing);
            let Some((packet, finish)) = &self.current else {
                return Ok(());
            };
            if *finish > now {
                return Ok(());
            }
            match noc.inject_packet(packet.clone())? {
                Injection::Accepted(_) => {
                    self.free_at = if self.stalled { now } else { *finish };
                    self.stalled = false;
                    self.current = None;
                }
                Injection::BackPressure => {
                    self.stalled = true;
                    return Ok(());
                }
            }
        }
    }
}

/// Runs `config.timesteps` synchronous timesteps of a deployment.
pub fn run_experiment(deployment: &Deployment, config: &SystemConfig, stimulus: &Stimulus) -> Result<SimOutput> {
    let mesh = &config.mesh;
    mesh.validate()?;
    config.timing.validate()?;
    config.costs.validate()?;
    if (mesh.width, mesh.height) != (deployment.mesh_width, deployment.mesh_height) {
        return Err(Error::Config(format!(
            "mesh {}x{} does not match the deployment's {}x{}",
            mesh.width, mesh.height, deployment.mesh_width, deployment.mesh_height
        )));
    }
    if !(config.dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    let violations = deployment.violations();
    if !violations.is_empty() {
        return Err(Error::Artifact(violations.join("; ")));
    }
    stimulus.check_shape(deployment.neuron_count, config.timesteps)?;

    let timing = &config.timing;
    let mut programs: Vec<_> = deployment.cores.clone();
    programs.sort_by_key(|p| p.coord);
    let mut cores = programs
        .into_iter()
        .map(|p| CoreState::new(p, config.mode))
        .collect::<Result<Vec<_>>>()?;
    let mut noc = Noc::new(mesh.clone())?;
    if config.trace {
        noc.enable_trace();
    }
    let mut generators: Vec<Generator> = cores.iter().map(|_| Generator::default()).collect();
    let mut arrivals: Vec<Vec<SpikePacket>> = vec![Vec::new(); cores.len()];
    let mut out = SimOutput::default();
    let mut records: Vec<PacketRecord> = Vec::new();
    let routers = mesh.router_count();
    let mut start = 0u64;

    for t in 0..config.timesteps {
        let row = stimulus.row(t as usize);
        let mut fired: Vec<NeuronId> = Vec::new();
        let mut busy_end = start;
        for (i, core) in cores.iter_mut().enumerate() {
            let external: Vec<f64> = core.program().neurons.iter().map(|n| row[n.index()]).collect();
            let incoming = std::mem::take(&mut arrivals[i]);
            let step = core.run_timestep(&incoming, &external, config.dt, timing, start)?;
            busy_end = busy_end.max(start + step.busy_ps);
            out.ledger.record_activity(core.coord(), t, &step.activity);
            fired.extend(step.fired.iter().map(|&j| core.program().neurons[j as usize]));
            generators[i].load(step.emitted, start);
        }
        fired.sort_unstable();
        out.spikes.steps.push(fired);

        let period = mesh.noc_period_ps;
        noc.skip_to(start.div_ceil(period));
        let mut last_eject: Option<u64> = None;
        let mut gen_end = start;
        loop {
            let pending = generators.iter().any(|g| !g.idle());
            if !pending && noc.drained() {
                break;
            }
            if noc.drained() {
                let next = generators
                    .iter_mut()
                    .filter_map(|g| g.next_completion(timing))
                    .min()
                    .expect("a generator has work");
                noc.skip_to(next.div_ceil(period));
            }
            let now = noc.cycle() * period;
            for g in &mut generators {
                g.advance(now, &mut noc, timing)?;
                gen_end = gen_end.max(g.free_at);
            }
            let cycle = noc.cycle();
            noc.step()?;
            for d in noc.take_delivered() {
                last_eject = Some(cycle);
                out.ledger.record_packet(&d.record, t);
                out.packet_log.push(PacketLogEntry::new(&d.record, t));
                records.push(d.record);
                let k = cores_position(&cores, d.packet.dest)
                    .ok_or_else(|| Error::Artifact(format!("packet delivered to empty core {}", d.packet.dest)))?;
                arrivals[k].push(d.packet);
            }
        }
        let net_end = last_eject.map_or(start, |c| (c + 1) * period);
        // next step starts on the core clock grid
        let end = ceil_to(busy_end.max(gen_end).max(net_end), timing.core_period_ps);
        let duration = end - start;
        let counts = out.ledger.timestep(t);
        let energy = compute_energy(&counts, &config.costs, routers, routers, duration);
        out.steps.push(StepRow {
            timestep: t,
            injected_flits: counts.injected_flits,
            flit_hops: counts.flit_hops,
            packets: counts.packets,
            busy_ps: busy_end - start,
            drain_ps: end - busy_end,
            dynamic_energy: energy.dynamic,
            static_energy: energy.static_,
        });
        debug!(
            "timestep {t}: {} spikes, {} flits, {} ps",
            out.spikes.steps[t as usize].len(),
            counts.injected_flits,
            duration
        );
        start = end;
    }
    out.exec_time_ps = start;
    out.energy = compute_energy(out.ledger.totals(), &config.costs, routers, routers, out.exec_time_ps);
    out.latency = LatencyStats::from_records(&records);
    out.trace = noc.take_trace();
    Ok(out)
}

fn cores_position(cores: &[CoreState], c: Coord) -> Option<usize> {
    cores.binary_search_by(|core| core.coord().cmp(&c)).ok()
}
