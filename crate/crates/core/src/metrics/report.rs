use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Counts, EnergyBreakdown, EnergyCostTable, RedundancyProfile};
use crate::error::Result;
use crate::neurocore::{CoreTiming, Mode};
use crate::noc::{MeshConfig, PacketRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub packets: u64,
    pub min_cycles: u64,
    pub max_cycles: u64,
    pub mean_cycles: f64,
}

impl LatencyStats {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a PacketRecord>) -> Self {
        let mut s = LatencyStats {
            min_cycles: u64::MAX,
            ..Default::default()
        };
        let mut sum = 0u64;
        for r in records {
            let l = r.latency();
            s.packets += 1;
            s.min_cycles = s.min_cycles.min(l);
            s.max_cycles = s.max_cycles.max(l);
            sum += l;
        }
        if s.packets == 0 {
            s.min_cycles = 0;
        } else {
            s.mean_cycles = sum as f64 / s.packets as f64;
        }
        s
    }
}

/// One row of the per-timestep series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub timestep: u32,
    pub injected_flits: u64,
    pub flit_hops: u64,
    pub packets: u64,
    /// Start of the step until the last core finished updating.
    pub busy_ps: u64,
    /// Remaining time until the network drained and the barrier released.
    pub drain_ps: u64,
    pub dynamic_energy: f64,
    pub static_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub workload: String,
    pub config_digest: String,
    pub mode: Mode,
    pub partitioner: String,
    pub timesteps: u32,
    pub cores: usize,
    pub exec_time_ps: u64,
    pub traffic: Counts,
    pub energy: EnergyBreakdown,
    pub redundancy: RedundancyProfile,
    pub latency: LatencyStats,
    pub destination_objective: u64,
    pub spike_count: u64,
    pub spike_digest: String,
    pub mesh: MeshConfig,
    pub core_timing: CoreTiming,
    pub cost_table: EnergyCostTable,
    pub per_timestep: Vec<StepRow>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Per-timestep CSV, preceded by a `# config_digest=` comment line.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# config_digest={}\n", self.config_digest).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record([
                "timestep",
                "mode",
                "injected_flits",
                "flit_hops",
                "packets",
                "busy_ps",
                "drain_ps",
                "dynamic_energy",
                "static_energy",
            ])?;
            for r in &self.per_timestep {
                w.write_record([
                    r.timestep.to_string(),
                    self.mode.to_string(),
                    r.injected_flits.to_string(),
                    r.flit_hops.to_string(),
                    r.packets.to_string(),
                    r.busy_ps.to_string(),
                    r.drain_ps.to_string(),
                    r.dynamic_energy.to_string(),
                    r.static_energy.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`.
pub fn emit_report(report: &RunReport, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let json = dir.join(format!("{stem}.json"));
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&json, report.to_json()?)?;
    fs::write(&csv, report.to_csv()?)?;
    Ok((json, csv))
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mode: Mode,
    pub partitioner: String,
    pub exec_time_ps: u64,
    pub injected_flits: u64,
    pub flit_hops: u64,
    pub total_energy: f64,
    pub destination_objective: u64,
    pub spike_digest: String,
}

/// Reference-normalized ratios; values above 1 favor the compared cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub traffic_saving: f64,
    pub injected_flit_saving: f64,
    pub speedup: f64,
    pub energy_eff: f64,
}

impl Ratios {
    pub fn between(reference: &CellSummary, cell: &CellSummary) -> Self {
        let ratio = |a: f64, b: f64| if a == b { 1.0 } else { a / b };
        Self {
            traffic_saving: ratio(reference.flit_hops as f64, cell.flit_hops as f64),
            injected_flit_saving: ratio(reference.injected_flits as f64, cell.injected_flits as f64),
            speedup: ratio(reference.exec_time_ps as f64, cell.exec_time_ps as f64),
            energy_eff: ratio(reference.total_energy, cell.total_energy),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub workload: String,
    pub config_digest: String,
    pub reference: usize,
    pub cells: Vec<CellSummary>,
    pub ratios: Vec<Ratios>,
    /// Every cell produced the same spike train.
    pub spikes_identical: bool,
}

impl CellSummary {
    pub fn of(r: &RunReport) -> Self {
        Self {
            mode: r.mode,
            partitioner: r.partitioner.clone(),
            exec_time_ps: r.exec_time_ps,
            injected_flits: r.traffic.injected_flits,
            flit_hops: r.traffic.flit_hops,
            total_energy: r.energy.total,
            destination_objective: r.destination_objective,
            spike_digest: r.spike_digest.clone(),
        }
    }
}

/// Ratios of every report against `reports[reference]`.
pub fn compare(reports: &[RunReport], reference: usize, config_digest: &str) -> ComparisonReport {
    let cells: Vec<CellSummary> = reports.iter().map(CellSummary::of).collect();
    let ratios = cells.iter().map(|c| Ratios::between(&cells[reference], c)).collect();
    ComparisonReport {
        workload: reports.first().map(|r| r.workload.clone()).unwrap_or_default(),
        config_digest: config_digest.to_string(),
        reference,
        spikes_identical: cells.windows(2).all(|w| w[0].spike_digest == w[1].spike_digest),
        cells,
        ratios,
    }
}

impl ComparisonReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# config_digest={}\n", self.config_digest).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record([
                "mode",
                "partitioner",
                "exec_time_ps",
                "injected_flits",
                "flit_hops",
                "total_energy",
                "destination_objective",
                "traffic_saving",
                "injected_flit_saving",
                "speedup",
                "energy_eff",
            ])?;
            for (c, r) in self.cells.iter().zip(&self.ratios) {
                w.write_record([
                    c.mode.to_string(),
                    c.partitioner.clone(),
                    c.exec_time_ps.to_string(),
                    c.injected_flits.to_string(),
                    c.flit_hops.to_string(),
                    c.total_energy.to_string(),
                    c.destination_objective.to_string(),
                    r.traffic_saving.to_string(),
                    r.injected_flit_saving.to_string(),
                    r.speedup.to_string(),
                    r.energy_eff.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }
}

/// Writes `comparison.json` and `comparison.csv` into `dir`.
pub fn emit_comparison(report: &ComparisonReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let json = dir.join("comparison.json");
    let csv = dir.join("comparison.csv");
    let mut f = fs::File::create(&json)?;
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")?;
    fs::write(&csv, report.to_csv()?)?;
    Ok((json, csv))
}
