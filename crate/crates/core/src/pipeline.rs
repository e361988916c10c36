//! End-to-end stages driven by an [`ExperimentConfig`]: build the network,
//! partition and place it, deploy, simulate and compare.

use rayon::prelude::*;

use crate::config::{ExperimentConfig, PartitionConfig, PartitionerKind, WorkloadConfig, WorkloadKind};
use crate::deploy::{build_deployment, Deployment};
use crate::error::Result;
use crate::metrics::{compare, redundancy_profile, ComparisonReport, RunReport};
use crate::neurocore::Mode;
use crate::noc::MeshConfig;
use crate::partition::{initial_partition, map_clusters, naive_partition, sss_refine, CoreMap, Partition};
use crate::snn::{build_brunel, build_conv_topology, build_vogels, ConvSpec, RandomNetSpec, SnnGraph};
use crate::system::{run_experiment, SimOutput, SystemConfig};

pub fn build_graph(w: &WorkloadConfig) -> Result<SnnGraph> {
    match w.kind {
        WorkloadKind::Brunel | WorkloadKind::Vogels => {
            let mut spec = if w.kind == WorkloadKind::Brunel {
                RandomNetSpec::brunel(w.n_excitatory, w.n_inhibitory, w.seed)
            } else {
                RandomNetSpec::vogels(w.n_excitatory, w.n_inhibitory, w.seed)
            };
            spec.conn_prob = w.conn_prob.unwrap_or(spec.conn_prob);
            spec.w_exc = w.w_exc.unwrap_or(spec.w_exc);
            spec.w_inh = w.w_inh.unwrap_or(spec.w_inh);
            spec.model = w.neuron;
            spec.frac_bits = w.frac_bits;
            if w.kind == WorkloadKind::Brunel {
                build_brunel(&spec)
            } else {
                build_vogels(&spec)
            }
        }
        WorkloadKind::Conv => build_conv_topology(&ConvSpec {
            input: w.input,
            layers: w.layers.clone(),
            weight_min: w.weight_min,
            weight_max: w.weight_max,
            seed: w.seed,
            model: w.neuron,
            frac_bits: w.frac_bits,
        }),
    }
}

pub fn partition_graph(
    graph: &SnnGraph,
    cfg: &PartitionConfig,
    kind: PartitionerKind,
    mesh: &MeshConfig,
) -> Result<(Partition, CoreMap)> {
    let partition = match kind {
        PartitionerKind::Naive => naive_partition(graph, &cfg.budget)?,
        PartitionerKind::Hsfc => initial_partition(graph, &cfg.budget)?,
        PartitionerKind::HsfcSss => sss_refine(&initial_partition(graph, &cfg.budget)?, graph, &cfg.budget, &cfg.sss)?,
    };
    let map = map_clusters(&partition, mesh.width, mesh.height, cfg.placement)?;
    Ok((partition, map))
}

pub fn deploy(cfg: &ExperimentConfig, graph: &SnnGraph, kind: PartitionerKind) -> Result<Deployment> {
    let (partition, map) = partition_graph(graph, &cfg.partition, kind, &cfg.mesh)?;
    build_deployment(
        graph,
        &partition,
        &map,
        &cfg.partition.budget,
        &cfg.digest(),
        &kind.to_string(),
    )
}

pub fn system_config(cfg: &ExperimentConfig, mode: Mode) -> SystemConfig {
    SystemConfig {
        mesh: cfg.mesh.clone(),
        timing: cfg.core.clone(),
        mode,
        timesteps: cfg.run.timesteps,
        dt: cfg.run.dt,
        costs: cfg.energy.clone(),
        trace: cfg.run.trace,
    }
}

#[derive(Debug)]
pub struct Simulation {
    pub report: RunReport,
    pub output: SimOutput,
}

/// Simulates a deployment with the configured stimulus.
pub fn simulate(cfg: &ExperimentConfig, deployment: &Deployment, mode: Mode) -> Result<Simulation> {
    let stimulus = cfg.run.stimulus.materialize(&deployment.layers, cfg.run.timesteps)?;
    let sys = system_config(cfg, mode);
    let output = run_experiment(deployment, &sys, &stimulus)?;
    let report = RunReport {
        workload: cfg.workload.display_name(),
        config_digest: cfg.digest(),
        mode,
        partitioner: deployment.partitioner.clone(),
        timesteps: cfg.run.timesteps,
        cores: deployment.cores.len(),
        exec_time_ps: output.exec_time_ps,
        traffic: *output.ledger.totals(),
        energy: output.energy,
        redundancy: redundancy_profile(&output.packet_log),
        latency: output.latency,
        destination_objective: deployment.destination_objective,
        spike_count: output.spikes.spike_count() as u64,
        spike_digest: output.spikes.digest(),
        mesh: cfg.mesh.clone(),
        core_timing: cfg.core.clone(),
        cost_table: cfg.energy.clone(),
        per_timestep: output.steps.clone(),
    };
    Ok(Simulation { report, output })
}

pub fn run_cell(cfg: &ExperimentConfig, graph: &SnnGraph, mode: Mode, kind: PartitionerKind) -> Result<Simulation> {
    let deployment = deploy(cfg, graph, kind)?;
    simulate(cfg, &deployment, mode)
}

/// Every (mode, partitioner) combination, Baseline/naive first.
pub fn default_matrix() -> Vec<(Mode, PartitionerKind)> {
    [Mode::Baseline, Mode::UniSpike]
        .into_iter()
        .flat_map(|m| PartitionerKind::ALL.into_iter().map(move |k| (m, k)))
        .collect()
}

/// Runs the cells in parallel; ratios are taken against the Baseline/naive
/// cell when present, else the first cell.
pub fn run_comparison(
    cfg: &ExperimentConfig,
    graph: &SnnGraph,
    cells: &[(Mode, PartitionerKind)],
) -> Result<(Vec<RunReport>, ComparisonReport)> {
    let reports = cells
        .par_iter()
        .map(|&(mode, kind)| run_cell(cfg, graph, mode, kind).map(|s| s.report))
        .collect::<Result<Vec<_>>>()?;
    let reference = cells
        .iter()
        .position(|&c| c == (Mode::Baseline, PartitionerKind::Naive))
        .unwrap_or(0);
    let comparison = compare(&reports, reference, &cfg.digest());
    Ok((reports, comparison))
}
