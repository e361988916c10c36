use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use unispike::config::{ExperimentConfig, PartitionerKind};
use unispike::deploy::{read_bundle, write_bundle};
use unispike::metrics::{emit_comparison, emit_report, read_packet_log, redundancy_profile, write_packet_log};
use unispike::neurocore::Mode;
use unispike::noc::write_trace_csv;
use unispike::pipeline;
use unispike::snn::{read_graph_text, write_graph_text};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATIONS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "unispike",
    version,
    about = "Spike-transmission experiments on a simulated neuromorphic mesh"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the workload, refinement and stimulus seeds.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration, every default included.
    ShowConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Build the workload network and write `graph.txt`.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Partition and place a graph, then write `deployment.usdb`.
    Partition {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/graph.txt`.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        partitioner: Option<PartitionerKind>,
    },
    /// Run a deployment and write its report, spike train and packet log.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/deployment.usdb`.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        /// Also write every link traversal to `trace-<mode>-<partitioner>.csv`.
        #[arg(long)]
        trace: bool,
    },
    /// Address-redundancy profile of a packet log.
    Profile {
        #[arg(long)]
        packets: PathBuf,
        /// Also write `profile.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every mode/partitioner combination and write ratio tables.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// List schedule and partition violations of a deployment bundle.
    Validate {
        #[arg(long)]
        bundle: PathBuf,
    },
}

/// A check failed; the details were already printed.
#[derive(Debug, thiserror::Error)]
#[error("{0} violation(s) found")]
struct Violations(usize);

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigFailure(String);

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| ConfigFailure(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    Ok(match args.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn digest_line(digest: &str) -> String {
    format!("# config_digest={digest}\n")
}

fn write_with_digest(
    path: &Path,
    digest: &str,
    body: impl FnOnce(&mut dyn Write) -> unispike::Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    w.write_all(digest_line(digest).as_bytes())?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_show_config(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args)?;
    print!("# config_digest={}\n{}", cfg.digest(), cfg.to_toml()?);
    Ok(())
}

fn cmd_generate(common: &Common) -> Result<()> {
    let cfg = load_config(&common.cfg)?;
    let graph = pipeline::build_graph(&cfg.workload)?;
    fs::create_dir_all(&common.out)?;
    let path = common.out.join("graph.txt");
    write_with_digest(&path, &cfg.digest(), |w| write_graph_text(&graph, w))?;
    println!(
        "{}: {} neurons, {} synapses -> {}",
        cfg.workload.display_name(),
        graph.neuron_count(),
        graph.synapse_count(),
        path.display()
    );
    Ok(())
}

fn cmd_partition(common: &Common, graph: Option<&Path>, partitioner: Option<PartitionerKind>) -> Result<()> {
    let mut cfg = load_config(&common.cfg)?;
    if let Some(k) = partitioner {
        cfg.partition.kind = k;
    }
    let graph_path = graph.map_or_else(|| common.out.join("graph.txt"), Path::to_path_buf);
    let file = fs::File::open(&graph_path).with_context(|| format!("opening {}", graph_path.display()))?;
    let graph = read_graph_text(BufReader::new(file))?;
    let d = pipeline::deploy(&cfg, &graph, cfg.partition.kind)?;
    fs::create_dir_all(&common.out)?;
    let path = common.out.join("deployment.usdb");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    write_bundle(&d, &mut w)?;
    w.flush()?;
    let max_neurons = d.cores.iter().map(|c| c.local_count()).max().unwrap_or(0);
    println!(
        "{}: {} cores on {}x{}, up to {max_neurons} neurons per core, destination objective {} -> {}",
        d.partitioner,
        d.cores.len(),
        d.mesh_width,
        d.mesh_height,
        d.destination_objective,
        path.display()
    );
    Ok(())
}

fn cmd_simulate(common: &Common, bundle: Option<&Path>, mode: Option<Mode>, trace: bool) -> Result<()> {
    let mut cfg = load_config(&common.cfg)?;
    if let Some(m) = mode {
        cfg.run.mode = m;
    }
    cfg.run.trace |= trace;
    let bundle_path = bundle.map_or_else(|| common.out.join("deployment.usdb"), Path::to_path_buf);
    let file = fs::File::open(&bundle_path).with_context(|| format!("opening {}", bundle_path.display()))?;
    let d = read_bundle(&mut BufReader::new(file))?;
    if d.config_digest != cfg.digest() {
        info!(
            "bundle was built from config {}, running with {}",
            d.config_digest,
            cfg.digest()
        );
    }
    let sim = pipeline::simulate(&cfg, &d, cfg.run.mode)?;
    let digest = &sim.report.config_digest;
    let stem = format!("run-{}-{}", cfg.run.mode, d.partitioner);
    let (json, _) = emit_report(&sim.report, &common.out, &stem)?;
    fs::write(
        common.out.join(format!("{stem}.spikes.txt")),
        digest_line(digest) + &sim.output.spikes.to_text(),
    )?;
    write_with_digest(&common.out.join(format!("{stem}.packets.csv")), digest, |w| {
        write_packet_log(&sim.output.packet_log, w)
    })?;
    if cfg.run.trace {
        write_with_digest(
            &common.out.join(format!("trace-{}-{}.csv", cfg.run.mode, d.partitioner)),
            digest,
            |w| write_trace_csv(&sim.output.trace, w),
        )?;
    }
    let r = &sim.report;
    println!(
        "{} {}: {} spikes (digest {}), {} flits injected, {} flit-hops, {} ps -> {}",
        r.mode,
        r.partitioner,
        r.spike_count,
        r.spike_digest,
        r.traffic.injected_flits,
        r.traffic.flit_hops,
        r.exec_time_ps,
        json.display()
    );
    Ok(())
}

fn cmd_profile(packets: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(packets).with_context(|| format!("reading {}", packets.display()))?;
    let digest = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_digest="))
        .unwrap_or("")
        .to_string();
    let log = read_packet_log(text.as_bytes())?;
    let profile = redundancy_profile(&log);
    let doc = serde_json::json!({ "config_digest": digest, "profile": profile });
    let rendered = serde_json::to_string_pretty(&doc)? + "\n";
    print!("{rendered}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("profile.json"), rendered)?;
    }
    Ok(())
}

fn cmd_compare(common: &Common) -> Result<()> {
    let cfg = load_config(&common.cfg)?;
    let graph = pipeline::build_graph(&cfg.workload)?;
    let cells = pipeline::default_matrix();
    info!("running {} cells", cells.len());
    let (reports, cmp) = pipeline::run_comparison(&cfg, &graph, &cells)?;
    for r in &reports {
        emit_report(r, &common.out, &format!("run-{}-{}", r.mode, r.partitioner))?;
    }
    let (_, csv) = emit_comparison(&cmp, &common.out)?;
    for (c, r) in cmp.cells.iter().zip(&cmp.ratios) {
        println!(
            "{:<9} {:<9} traffic x{:.3}  speedup x{:.3}  energy x{:.3}",
            c.mode.to_string(),
            c.partitioner,
            r.traffic_saving,
            r.speedup,
            r.energy_eff
        );
    }
    if !cmp.spikes_identical {
        warn!("cells disagree on the spike train");
    }
    println!("-> {}", csv.display());
    Ok(())
}

fn cmd_validate(bundle: &Path) -> Result<()> {
    let file = fs::File::open(bundle).with_context(|| format!("opening {}", bundle.display()))?;
    let d = read_bundle(&mut BufReader::new(file))?;
    let violations = d.violations();
    for v in &violations {
        println!("violation: {v}");
    }
    if !violations.is_empty() {
        return Err(Violations(violations.len()).into());
    }
    println!("ok: {} cores, {} neurons", d.cores.len(), d.neuron_count);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::ShowConfig { cfg } => cmd_show_config(cfg),
        Command::Generate { common } => cmd_generate(common),
        Command::Partition {
            common,
            graph,
            partitioner,
        } => cmd_partition(common, graph.as_deref(), *partitioner),
        Command::Simulate {
            common,
            bundle,
            mode,
            trace,
        } => cmd_simulate(common, bundle.as_deref(), *mode, *trace),
        Command::Profile { packets, out } => cmd_profile(packets, out.as_deref()),
        Command::Compare { common } => cmd_compare(common),
        Command::Validate { bundle } => cmd_validate(bundle),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Violations>() {
            return EXIT_VIOLATIONS;
        }
        if cause.is::<ConfigFailure>() {
            return EXIT_CONFIG;
        }
        if let Some(unispike::Error::Config(_) | unispike::Error::InvalidParameter(_) | unispike::Error::Parse { .. }) =
            cause.downcast_ref::<unispike::Error>()
        {
            return EXIT_CONFIG;
        }
    }
    EXIT_RUNTIME
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
