//! `ttnsim`: generate circuits, plan trees, simulate, dry-run and compare.
//!
//! Exit codes: 0 success, 2 invalid input, 3 non-convergence, 4 memory cap exceeded.

mod run;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use ttnsim_core::circuit::{
    gen_lattice, gen_random, gen_treelike, load_circuit, write_circuit, with_hadamard_layer, Circuit,
};
use ttnsim_core::dryrun::{admissible, dryrun, gen_triangle_pattern, leaf_order, DryRunTarget, EdgeDim};
use ttnsim_core::mps::random_order;
use ttnsim_core::reference::{overlap_error, parse_state, write_state};
use ttnsim_core::tree::{find_tree_structure, TreeTopology};
use ttnsim_core::{Result, SimError, TruncationPolicy};

use run::{fidelity, Engine, Network, Outcome, RunSpec};

#[derive(Parser)]
#[command(name = "ttnsim", version, about = "Tree tensor network circuit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated circuit file.
    Gen(GenArgs),
    /// Plan a tree topology for a circuit.
    Plan(PlanArgs),
    /// Simulate a circuit and report metrics.
    Simulate(SimulateArgs),
    /// Track bond dimensions symbolically.
    Dryrun(DryrunArgs),
    /// Overlap error and metric deltas between two runs or two state files.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Prepend a Hadamard on every qubit.
    #[arg(long, global = true)]
    hadamard_layer: bool,
}

#[derive(Subcommand)]
enum GenKind {
    /// n×n grid with cycling nearest-neighbour layers.
    Lattice {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Clusters of four chained qubits joined through a centre qubit.
    Treelike {
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Nested triangle pattern on a perfect ternary tree.
    Triangle {
        #[arg(long, default_value_t = 2)]
        levels: usize,
        #[arg(long, default_value_t = 64)]
        dmax: u64,
        /// Also write the matching topology here.
        #[arg(long)]
        topology_out: Option<PathBuf>,
    },
    /// Random single- and two-qubit gates.
    Random {
        #[arg(long)]
        qubits: usize,
        #[arg(long)]
        gates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct PlanArgs {
    circuit: PathBuf,
    /// Number of clusters; defaults to about one per four qubits.
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Network selection shared by the simulating commands.
#[derive(Args, Clone)]
struct NetworkArgs {
    /// Topology file for the tree engine; planned from the circuit when omitted.
    #[arg(long, conflicts_with = "clusters")]
    topology: Option<PathBuf>,
    /// Cluster count used when planning a topology.
    #[arg(long)]
    clusters: Option<usize>,
    /// Chain order: `natural`, `tree` (leaf order of the topology), `random`, or a comma list.
    #[arg(long, default_value = "natural")]
    order: String,
    /// Seed for random orders.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    circuit: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Ttn)]
    engine: Engine,
    #[command(flatten)]
    network: NetworkArgs,
    /// Relative singular value threshold; a comma list runs one record per value.
    #[arg(long, value_delimiter = ',')]
    sigma_rel: Vec<f64>,
    /// Maximum bond dimension kept by truncation.
    #[arg(long)]
    cap: Option<usize>,
    /// Maximum total stored entries.
    #[arg(long)]
    memory_cap: Option<usize>,
    /// Initial basis state as a bit string, qubit 0 first.
    #[arg(long)]
    bits: Option<String>,
    /// JSON array of run records.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Final dense amplitudes (single policy only).
    #[arg(long)]
    state_out: Option<PathBuf>,
}

#[derive(Args)]
struct DryrunArgs {
    circuit: PathBuf,
    /// `ttn` runs on a tree, `mps` on a chain.
    #[arg(long, value_enum, default_value_t = Engine::Ttn)]
    engine: Engine,
    #[command(flatten)]
    network: NetworkArgs,
    /// Bond ceiling used for the verdicts.
    #[arg(long)]
    dmax: Option<u64>,
    /// Clamp bonds to this dimension.
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Circuit run twice, as `--a` and `--b`.
    #[arg(required_unless_present = "states", conflicts_with = "states")]
    circuit: Option<PathBuf>,
    /// Reference run, `engine[:policy]`.
    #[arg(long, default_value = "ttn:exact")]
    a: RunSpec,
    /// Compared run, `engine[:policy]`.
    #[arg(long, default_value = "ttn:exact")]
    b: RunSpec,
    #[command(flatten)]
    network: NetworkArgs,
    #[arg(long)]
    memory_cap: Option<usize>,
    #[arg(long)]
    bits: Option<String>,
    /// Compare two state files instead of running a circuit.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    states: Vec<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Dryrun(a) => cmd_dryrun(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                SimError::NonConvergence { .. } => 3,
                SimError::MemoryCapExceeded { .. } => 4,
                _ => 2,
            })
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| SimError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn default_clusters(n: usize) -> usize {
    ((n + 2) / 4).clamp(1, n.max(1))
}

fn parse_bits(bits: Option<&str>, n: usize) -> Result<Vec<u8>> {
    let Some(bits) = bits else {
        return Ok(vec![0; n]);
    };
    bits.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(SimError::invalid(format!("bit strings use 0 and 1, got {other:?}"))),
        })
        .collect()
}

impl NetworkArgs {
    fn topology(&self, c: &Circuit) -> Result<TreeTopology> {
        match &self.topology {
            Some(path) => TreeTopology::from_json(&read(path)?),
            None => {
                let k = self.clusters.unwrap_or_else(|| default_clusters(c.num_qubits()));
                find_tree_structure(c, k)
            }
        }
    }

    fn order(&self, c: &Circuit) -> Result<Vec<usize>> {
        let n = c.num_qubits();
        match self.order.as_str() {
            "natural" => Ok((0..n).collect()),
            "tree" => Ok(leaf_order(&self.topology(c)?)),
            "random" => Ok(random_order(n, self.seed)),
            list => list
                .split(',')
                .map(|q| {
                    q.trim()
                        .parse()
                        .map_err(|_| SimError::invalid(format!("cannot parse chain order {list:?}")))
                })
                .collect(),
        }
    }

    fn network(&self, engine: Engine, c: &Circuit) -> Result<Network> {
        Ok(match engine {
            Engine::Ttn => Network::Tree(self.topology(c)?),
            Engine::Mps => Network::Chain(self.order(c)?),
            Engine::Statevector => Network::Dense,
        })
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut topology = None;
    let c = match a.kind {
        GenKind::Lattice { n, depth, seed } => gen_lattice(n, depth, seed)?,
        GenKind::Treelike { clusters, reps } => gen_treelike(clusters, reps)?,
        GenKind::Triangle { levels, dmax, topology_out } => {
            let (c, t) = gen_triangle_pattern(levels, dmax)?;
            topology = topology_out.map(|p| (p, t));
            c
        }
        GenKind::Random { qubits, gates, seed } => gen_random(qubits, gates, seed)?,
    };
    let c = if a.hadamard_layer { with_hadamard_layer(&c) } else { c };
    if let Some((path, t)) = topology {
        emit(Some(&path), &t.to_json())?;
    }
    emit(a.out.as_deref(), &write_circuit(&c))
}

fn cmd_plan(a: PlanArgs) -> Result<()> {
    let c = load_circuit(&a.circuit)?;
    let k = a.clusters.unwrap_or_else(|| default_clusters(c.num_qubits()));
    let start = Instant::now();
    let t = find_tree_structure(&c, k)?;
    eprintln!(
        "planned {} qubits into {k} clusters in {:.3e} s",
        c.num_qubits(),
        start.elapsed().as_secs_f64()
    );
    emit(a.out.as_deref(), &t.to_json())
}

#[derive(Serialize)]
struct CircuitInfo {
    path: String,
    num_qubits: usize,
    num_gates: usize,
    two_qubit_gates: usize,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    engine: Engine,
    circuit: &'a CircuitInfo,
    policy: String,
    seed: u64,
    d_max_observed: usize,
    m_entries: usize,
    truncation_events: usize,
    discarded_weight: f64,
    /// Absent when the circuit is too wide for the dense oracle.
    fidelity: Option<f64>,
    edges: &'a [EdgeDim],
    gate_seconds: &'a [f64],
    total_seconds: f64,
}

const RUN_CSV_HEADER: &str = "engine,num_qubits,num_gates,policy,seed,d_max_observed,m_entries,\
truncation_events,discarded_weight,fidelity,total_seconds,mean_gate_seconds\n";

fn policies(sigma_rel: &[f64], cap: Option<usize>) -> Vec<TruncationPolicy> {
    if sigma_rel.is_empty() {
        return vec![cap.map_or(TruncationPolicy::Exact, TruncationPolicy::Cap)];
    }
    sigma_rel
        .iter()
        .map(|&s| match cap {
            Some(d_max) => TruncationPolicy::Both { sigma_rel: s, d_max },
            None => TruncationPolicy::Threshold(s),
        })
        .collect()
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let c = load_circuit(&a.circuit)?;
    let bits = parse_bits(a.bits.as_deref(), c.num_qubits())?;
    let network = a.network.network(a.engine, &c)?;
    let policies = policies(&a.sigma_rel, a.cap);
    if a.state_out.is_some() && policies.len() > 1 {
        return Err(SimError::invalid("--state-out needs a single policy"));
    }
    let info = CircuitInfo {
        path: a.circuit.display().to_string(),
        num_qubits: c.num_qubits(),
        num_gates: c.gates().len(),
        two_qubit_gates: c.two_qubit_gates().count(),
    };

    let mut outcomes: Vec<(TruncationPolicy, Outcome, Option<f64>)> = Vec::new();
    for policy in policies {
        let outcome = run::run(&c, &network, policy, &bits, a.memory_cap)?;
        let fid = fidelity(&c, &bits, &outcome)?;
        println!(
            "{} {policy}: d_max {} m_entries {} truncations {} fidelity {} in {:.3e} s",
            a.engine,
            outcome.d_max_observed,
            outcome.m_entries,
            outcome.truncation_events,
            fid.map_or_else(|| "n/a".to_string(), f),
            outcome.total_seconds
        );
        outcomes.push((policy, outcome, fid));
    }

    if let Some(path) = &a.state_out {
        let (_, outcome, _) = &outcomes[0];
        let state = outcome.state.as_ref().ok_or_else(|| {
            SimError::invalid(format!("{} qubits is too many for a state dump", c.num_qubits()))
        })?;
        emit(Some(path), &write_state(state))?;
    }
    if let Some(path) = &a.metrics_out {
        let records: Vec<RunRecord> = outcomes
            .iter()
            .map(|(policy, o, fid)| RunRecord {
                engine: a.engine,
                circuit: &info,
                policy: policy.to_string(),
                seed: a.network.seed,
                d_max_observed: o.d_max_observed,
                m_entries: o.m_entries,
                truncation_events: o.truncation_events,
                discarded_weight: o.discarded_weight,
                fidelity: *fid,
                edges: &o.edges,
                gate_seconds: &o.gate_seconds,
                total_seconds: o.total_seconds,
            })
            .collect();
        emit(Some(path), &json(&records))?;
    }
    if let Some(path) = &a.csv_out {
        let mut csv = String::from(RUN_CSV_HEADER);
        for (policy, o, fid) in &outcomes {
            let mean = if o.gate_seconds.is_empty() {
                0.0
            } else {
                o.total_seconds / o.gate_seconds.len() as f64
            };
            let _ = writeln!(
                csv,
                "{},{},{},{policy},{},{},{},{},{},{},{},{}",
                a.engine,
                info.num_qubits,
                info.num_gates,
                a.network.seed,
                o.d_max_observed,
                o.m_entries,
                o.truncation_events,
                f(o.discarded_weight),
                fid.map(f).unwrap_or_default(),
                f(o.total_seconds),
                f(mean)
            );
        }
        emit(Some(path), &csv)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DryrunOutput<'a> {
    report: &'a ttnsim_core::dryrun::DryRunReport,
    admissibility: Option<&'a ttnsim_core::dryrun::AdmissibilityReport>,
}

fn cmd_dryrun(a: DryrunArgs) -> Result<()> {
    let c = load_circuit(&a.circuit)?;
    let (target, topology) = match a.engine {
        Engine::Ttn => {
            let t = a.network.topology(&c)?;
            (DryRunTarget::Tree(t.clone()), Some(t))
        }
        Engine::Mps => (DryRunTarget::Chain(a.network.order(&c)?), None),
        Engine::Statevector => {
            return Err(SimError::invalid("dry-runs need the ttn or mps engine"));
        }
    };
    let report = dryrun(&c, &target, a.cap, a.dmax)?;
    println!(
        "{} dry-run: max dim {} m_entries {} cap events {}",
        report.network,
        report.max_dim(),
        report.m_entries,
        report.cap_events
    );
    if let (Some(d), Some(within)) = (report.d_max, report.within_d_max) {
        println!("bonds within d_max {d}: {within}");
    }
    let admissibility = match (&topology, a.dmax) {
        (Some(t), Some(d)) => {
            let r = admissible(&c, t, d)?;
            println!(
                "admissible: {} (l_cluster {}, edge crossings ok {}, node crossings ok {})",
                r.admissible, r.l_cluster, r.edge_crossings_ok, r.node_crossings_ok
            );
            Some(r)
        }
        _ => None,
    };
    if let Some(path) = &a.csv_out {
        emit(Some(path), &report.to_csv())?;
    }
    if let Some(path) = &a.metrics_out {
        let out = DryrunOutput {
            report: &report,
            admissibility: admissibility.as_ref(),
        };
        emit(Some(path), &json(&out))?;
    }
    Ok(())
}

const COMPARE_CSV_HEADER: &str = "run_a,run_b,overlap_error,m_entries_a,m_entries_b,m_saved,\
delta_m_entries,d_max_a,d_max_b,delta_d_max\n";
const COMPARE_STATES_CSV_HEADER: &str = "state_a,state_b,overlap_error\n";

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let csv = if let [sa, sb] = a.states.as_slice() {
        let x = parse_state(&read(sa)?)?;
        let y = parse_state(&read(sb)?)?;
        let err = overlap_error(&x, &y)?;
        println!("overlap error {}", f(err));
        format!(
            "{COMPARE_STATES_CSV_HEADER}{},{},{}\n",
            sa.display(),
            sb.display(),
            f(err)
        )
    } else {
        let path = a.circuit.as_ref().expect("clap requires a circuit without --states");
        let c = load_circuit(path)?;
        let bits = parse_bits(a.bits.as_deref(), c.num_qubits())?;
        let mut runs = Vec::with_capacity(2);
        for spec in [a.a, a.b] {
            let network = a.network.network(spec.engine, &c)?;
            let o = run::run(&c, &network, spec.policy, &bits, a.memory_cap)?;
            if o.state.is_none() {
                return Err(SimError::TooManyQubits {
                    qubits: c.num_qubits(),
                    cap: ttnsim_core::reference::STATEVECTOR_QUBIT_CAP,
                });
            }
            runs.push(o);
        }
        let (x, y) = (&runs[0], &runs[1]);
        let err = overlap_error(x.state.as_ref().unwrap(), y.state.as_ref().unwrap())?;
        let m_saved = 1.0 - y.m_entries as f64 / x.m_entries as f64;
        println!(
            "{} vs {}: overlap error {} m_entries {} -> {} (M_saved {})",
            a.a,
            a.b,
            f(err),
            x.m_entries,
            y.m_entries,
            f(m_saved)
        );
        format!(
            "{COMPARE_CSV_HEADER}{},{},{},{},{},{},{},{},{},{}\n",
            a.a,
            a.b,
            f(err),
            x.m_entries,
            y.m_entries,
            f(m_saved),
            y.m_entries as i64 - x.m_entries as i64,
            x.d_max_observed,
            y.d_max_observed,
            y.d_max_observed as i64 - x.d_max_observed as i64
        )
    };
    if let Some(path) = &a.csv_out {
        emit(Some(path), &csv)?;
    }
    Ok(())
}
