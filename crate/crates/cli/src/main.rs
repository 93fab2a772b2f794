use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use sst_core::costs::CostModel;
use sst_core::exact::EXACT_MSSC_SET_LIMIT;
use sst_core::gen::{self, GenKind};
use sst_core::greedy::{modified_greedy, plain_greedy, true_cost};
use sst_core::hardness::{dre_to_sst, recover_dre, DreInstance};
use sst_core::instance::{monte_carlo_cost, validate_partition};
use sst_core::io::{
    from_json, round_sig, to_json, InstanceFile, LoadedInstance, MsscFile, Probability,
    SolutionFile,
};
use sst_core::mssc::{mssc_greedy, price_audit, DegradedChoice, ExactChoice};
use sst_core::{BatchSequence, Instance, SstError, TestSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "sst", version, about = "Batch testing of series systems with subadditive costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run modified greedy and write the solution.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo trials to cross-check the expected cost.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive optimum (n <= 20).
    Exact {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plain greedy, modified greedy and the optimum side by side.
    Compare {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Greedy min-sum set cover with its price accounting.
    Mssc {
        instance: PathBuf,
        /// Use the adversarial choice that is within this factor of the best ratio.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Generate an instance file.
    Gen {
        /// bad_greedy, random_additive, random_tree, random_machines or random_metric
        kind: String,
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a densest-r-edges graph to testing, solve it and recover a vertex set.
    Reduce {
        graph: PathBuf,
        /// Where to write the reduced instance.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time modified greedy on generated instances.
    Bench {
        kind: String,
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per size.
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                SstError::Input(_) => 2,
                SstError::Capacity { .. } => 3,
                SstError::Contract(_) => 4,
            })
        }
    }
}

type Result<T> = sst_core::Result<T>;

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve {
            instance,
            epsilon,
            seed,
            trials,
            out,
        } => solve(&instance, epsilon, seed, trials, out.as_deref()),
        Command::Exact {
            instance,
            epsilon,
            out,
        } => exact(&instance, epsilon, out.as_deref()),
        Command::Compare { instance, epsilon } => compare(&instance, epsilon),
        Command::Mssc { instance, rho } => mssc(&instance, rho),
        Command::Gen {
            kind,
            n,
            seed,
            out,
        } => {
            let file = gen::generate(kind.parse()?, n, seed)?;
            emit(&to_json(&file), out.as_deref())
        }
        Command::Reduce { graph, out } => reduce(&graph, out.as_deref()),
        Command::Bench {
            kind,
            sizes,
            seed,
            trials,
            epsilon,
        } => bench(kind.parse()?, &sizes, seed, trials, epsilon),
    }
}

/// 10 significant digits; `inf` for unbounded guarantees.
fn num(x: f64) -> String {
    if x.is_finite() {
        round_sig(x).to_string()
    } else {
        "inf".to_string()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| SstError::input(format!("cannot read {}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| SstError::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn load(path: &Path, eps: f64) -> Result<(LoadedInstance, String)> {
    let text = read(path)?;
    let file: InstanceFile = from_json(&text).map_err(|e| match e {
        SstError::Input(m) => SstError::input(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((file.load(eps)?, digest(text.as_bytes())))
}

/// True expected cost, or `None` when batch costs are beyond exact evaluation.
fn evaluate(instance: &Instance, model: &dyn CostModel, seq: &BatchSequence) -> Result<Option<f64>> {
    match true_cost(instance, seq, |s| model.exact_cost(s)) {
        Ok(c) => Ok(Some(c)),
        Err(SstError::Capacity { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct RunReport {
    algorithm: String,
    instance_digest: String,
    expected_cost: Option<f64>,
    upper_bound: f64,
    gamma: Option<f64>,
    rho: Option<f64>,
    implied_bound: Option<f64>,
    batches: usize,
    truncation: usize,
    wall_time_ms: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<MonteCarlo>,
}

#[derive(Serialize)]
struct MonteCarlo {
    trials: usize,
    mean: f64,
    stderr: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then(|| round_sig(x))
}

fn solution_file(algorithm: &str, seq: &BatchSequence, bounds: &[f64], cost: Option<f64>, upper: f64) -> SolutionFile {
    SolutionFile {
        algorithm: algorithm.to_string(),
        batches: seq.batches.clone(),
        batch_cost_bounds: bounds.iter().map(|&b| round_sig(b)).collect(),
        expected_cost: cost.map(round_sig),
        upper_bound: round_sig(upper),
    }
}

fn solve(path: &Path, eps: f64, seed: u64, trials: Option<usize>, out: Option<&Path>) -> Result<()> {
    let (loaded, digest) = load(path, eps)?;
    let (inst, model) = (&loaded.instance, loaded.model.as_ref());
    let start = Instant::now();
    let (chosen, _) = modified_greedy(inst, &model, &model)?;
    let wall = start.elapsed();
    let exec = chosen.executable_sequence();
    validate_partition(inst, &exec.sequence)
        .map_err(|v| SstError::contract(format!("modified greedy produced an invalid sequence: {v}")))?;
    let cost = evaluate(inst, model, &exec.sequence)?;
    let monte_carlo = match trials.filter(|_| cost.is_some()) {
        Some(t) => {
            let est = monte_carlo_cost(inst, &exec.sequence, |s| model.exact_cost(s).unwrap_or(f64::NAN), t, seed)?;
            Some(MonteCarlo {
                trials: t,
                mean: round_sig(est.mean),
                stderr: round_sig(est.stderr),
            })
        }
        None => None,
    };
    let g = model.guarantee();
    let report = RunReport {
        algorithm: "modified_greedy".into(),
        instance_digest: digest,
        expected_cost: cost.map(round_sig),
        upper_bound: round_sig(chosen.upper_bound),
        gamma: finite(g.gamma),
        rho: finite(g.rho),
        implied_bound: finite(g.implied_bound()),
        batches: exec.sequence.len(),
        truncation: chosen.k,
        wall_time_ms: round_sig(wall.as_secs_f64() * 1e3),
        seed,
        monte_carlo,
    };
    print!("{}", to_json(&report));
    let solution = solution_file("modified_greedy", &exec.sequence, &exec.batch_cost_bounds, cost, chosen.upper_bound);
    if let Some(out) = out {
        emit(&to_json(&solution), Some(out))?;
    }
    Ok(())
}

fn exact(path: &Path, eps: f64, out: Option<&Path>) -> Result<()> {
    let (loaded, _) = load(path, eps)?;
    let (inst, model) = (&loaded.instance, loaded.model.as_ref());
    let result = model.exact_optimum(inst)?;
    let seq = &result.opt_sequence;
    let bounds: Vec<f64> = seq.iter().map(|b| model.exact_cost(b)).collect::<Result<_>>()?;
    let solution = solution_file("exact", seq, &bounds, Some(result.opt_cost), result.opt_cost);
    println!("optimum {}", num(result.opt_cost));
    for (b, c) in seq.iter().zip(&bounds) {
        println!("  {b}  cost {}", num(*c));
    }
    if let Some(out) = out {
        emit(&to_json(&solution), Some(out))?;
    }
    Ok(())
}

fn compare(path: &Path, eps: f64) -> Result<()> {
    let (loaded, _) = load(path, eps)?;
    let (inst, model) = (&loaded.instance, loaded.model.as_ref());
    let (plain, modified, opt) = std::thread::scope(|s| {
        let plain = s.spawn(|| -> Result<Option<f64>> {
            let trace = plain_greedy(inst, &model)?;
            evaluate(inst, model, &trace.sequence())
        });
        let modified = s.spawn(|| -> Result<(Option<f64>, f64)> {
            let (chosen, _) = modified_greedy(inst, &model, &model)?;
            Ok((evaluate(inst, model, &chosen.executable_sequence().sequence)?, chosen.upper_bound))
        });
        let opt = s.spawn(|| match model.exact_optimum(inst) {
            Ok(r) => Ok(Some(r.opt_cost)),
            Err(SstError::Capacity { .. }) => Ok(None),
            Err(e) => Err(e),
        });
        (
            plain.join().expect("plain greedy thread"),
            modified.join().expect("modified greedy thread"),
            opt.join().expect("exact thread"),
        )
    });
    let (plain, (modified, bound), opt) = (plain?, modified?, opt?);
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), num);
    println!("{:<18}{:>18}", "algorithm", "expected cost");
    println!("{:<18}{:>18}", "plain greedy", show(plain));
    println!("{:<18}{:>18}   (bound {})", "modified greedy", show(modified), num(bound));
    match opt {
        Some(o) => println!("{:<18}{:>18}", "exact", num(o)),
        None => println!("exact: omitted, instance too large for exhaustive search (n = {})", inst.n()),
    }
    Ok(())
}

fn mssc(path: &Path, rho: Option<f64>) -> Result<()> {
    let file: MsscFile = from_json(&read(path)?)?;
    let inst = file.load()?;
    let solution = match rho {
        Some(rho) if rho >= 1.0 => mssc_greedy(&inst, &DegradedChoice { rho })?,
        Some(rho) => return Err(SstError::input(format!("rho = {rho} must be at least 1"))),
        None => mssc_greedy(&inst, &ExactChoice)?,
    };
    println!("greedy order {:?}", solution.order);
    println!("greedy objective {}", num(solution.objective));
    for row in price_audit(&inst, &solution)? {
        println!(
            "  set {}  covers {}  price {}",
            row.set,
            num(row.covered_weight),
            num(row.price)
        );
    }
    if inst.sets.len() <= EXACT_MSSC_SET_LIMIT {
        let (order, best) = sst_core::exact::exact_mssc(&inst)?;
        println!("exact order {order:?}");
        println!("exact objective {}", num(best));
    } else {
        println!("exact: omitted, more than {EXACT_MSSC_SET_LIMIT} sets");
    }
    Ok(())
}

#[derive(Serialize)]
struct ReduceReport {
    q: f64,
    batches: Vec<TestSet>,
    expected_cost: f64,
    kept_batches: usize,
    vertices: Vec<usize>,
    induced_edges: usize,
    size_bound: f64,
    size_ok: bool,
    edge_target: f64,
    edges_ok: bool,
    log_edge_target: f64,
    log_edges_ok: bool,
}

fn reduce(path: &Path, out: Option<&Path>) -> Result<()> {
    let dre: DreInstance = from_json(&read(path)?)?;
    dre.validate()?;
    let (inst, cost) = dre_to_sst(&dre)?;
    let file = InstanceFile {
        n: inst.n(),
        pass_probs: inst.pass_probs().iter().map(|&p| Probability::Number(p)).collect(),
        cost_model: sst_core::costs::CostModelSpec::AndCoverage {
            machine_sets: cost.machine_sets().iter().map(|s| s.as_slice().to_vec()).collect(),
        },
        batch_family: None,
    };
    if let Some(out) = out {
        emit(&to_json(&file), Some(out))?;
    }
    let (chosen, _) = modified_greedy(&inst, &cost, &cost)?;
    let seq = chosen.executable_sequence().sequence;
    let rec = recover_dre(&dre, &seq)?;
    let report = ReduceReport {
        q: round_sig(inst.fail_probs()[0]),
        batches: seq.batches.clone(),
        expected_cost: round_sig(rec.sequence_cost),
        kept_batches: rec.j,
        size_bound: round_sig(2.0 * rec.sequence_cost),
        size_ok: rec.size_ok,
        edge_target: round_sig(rec.edge_target),
        edges_ok: rec.edges_ok,
        log_edge_target: round_sig(rec.log_edge_target),
        log_edges_ok: rec.log_edges_ok,
        induced_edges: rec.induced_edges,
        vertices: rec.vertices,
    };
    print!("{}", to_json(&report));
    Ok(())
}

fn bench(kind: GenKind, sizes: &[usize], seed: u64, trials: usize, eps: f64) -> Result<()> {
    println!("{:>6}{:>14}{:>14}{:>16}", "n", "mean ms", "max ms", "mean bound");
    for &n in sizes {
        let (mut total, mut worst, mut bound) = (0.0f64, 0.0f64, 0.0);
        for t in 0..trials.max(1) {
            let file = gen::generate(kind, n, seed.wrapping_add(t as u64))?;
            let loaded = file.load(eps)?;
            let model = loaded.model.as_ref();
            let start = Instant::now();
            let (chosen, _) = modified_greedy(&loaded.instance, &model, &model)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            total += ms;
            worst = worst.max(ms);
            bound += chosen.upper_bound;
        }
        let k = trials.max(1) as f64;
        println!("{n:>6}{:>14}{:>14}{:>16}", num(total / k), num(worst), num(bound / k));
    }
    Ok(())
}
