//! Command-line front end for signature synthesis and matching.
//!
//! Verdicts go to stdout as one JSON object per line; progress and summaries
//! go to stderr. Exit codes: 0 success (or detection for match/scan), 1 clean
//! (no detection), 2 invalid input, 3 empty or zero-weight signature, 4
//! internal failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num::ToPrimitive;

use sigforge::encoder;
use sigforge::matcher::{self, parse_decimal, Cutoffs, MatchVerdict};
use sigforge::model::{load_iccg, load_signature, save_iccg, save_signature, Iccg, Signature};
use sigforge::obfuscator::{obfuscate, recipe_from_json};
use sigforge::oracle::oracle_mscs;
use sigforge::synth::infer_signature;
use sigforge::wcnf::export_wcnf;
use sigforge::weights::{compute_weights, load_weights, save_weights};
use sigforge::{Result, SigError};

#[derive(Parser)]
#[command(
    name = "sigforge",
    version,
    about = "Synthesizes and matches semantic malware signatures over inter-component call graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute metadata weights from a directory of benign app graphs
    Weights {
        #[arg(long)]
        benign_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a family signature from sample graphs
    Synth {
        /// Sample graph files (JSON)
        #[arg(required = true)]
        samples: Vec<PathBuf>,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        family: String,
        #[arg(long)]
        out: PathBuf,
        /// Also export the solver input in WCNF text form
        #[arg(long)]
        emit_wcnf: Option<PathBuf>,
    },
    /// Match one app graph against one signature
    Match {
        app: PathBuf,
        #[arg(long)]
        signature: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Delta above which a non-embedding app is a zero-day candidate
        #[arg(long, default_value = "0.5")]
        zero_day_cutoff: String,
        /// Delta above which a non-embedding app counts as obfuscated
        #[arg(long, default_value = "0.8")]
        obf_cutoff: String,
        /// Write the common subgraph backing the verdict here
        #[arg(long)]
        partial_out: Option<PathBuf>,
    },
    /// Match one app graph against a directory of signatures
    Scan {
        app: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value = "0.5")]
        zero_day_cutoff: String,
        #[arg(long, default_value = "0.8")]
        obf_cutoff: String,
        /// Worker threads for matching families in parallel
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write each detection's common subgraph into this directory
        #[arg(long)]
        partials_dir: Option<PathBuf>,
    },
    /// Exhaustive reference synthesis (small inputs only)
    Oracle {
        #[arg(required = true)]
        samples: Vec<PathBuf>,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a seeded obfuscation recipe to a graph
    Obfuscate {
        graph: PathBuf,
        /// JSON array of operations
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick a zero-day cutoff by leave-one-family-out validation
    Tune {
        /// Directory with one subdirectory of sample graphs per family
        #[arg(long)]
        families_dir: PathBuf,
        #[arg(long)]
        benign_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.4,0.5,0.6,0.7,0.8")]
        candidates: Vec<String>,
        #[arg(long, default_value = "0.9")]
        target_tpr: String,
    },
}

/// Sorted .json files directly under `dir`.
fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| SigError::io(dir, e))? {
        let path = entry.map_err(|e| SigError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(SigError::InvalidInput(format!(
            "no .json files in {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn load_graph_dir(dir: &Path) -> Result<Vec<Iccg>> {
    json_files(dir)?.iter().map(|p| load_iccg(p)).collect()
}

fn load_graphs(paths: &[PathBuf]) -> Result<Vec<Iccg>> {
    paths.iter().map(|p| load_iccg(p)).collect()
}

fn cutoffs_from(zero_day: &str, obfuscated: &str) -> Result<Cutoffs> {
    Ok(Cutoffs {
        zero_day: parse_decimal(zero_day)?,
        obfuscated: parse_decimal(obfuscated)?,
    })
}

fn ratio_f64(r: &num::BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn print_verdict(v: &MatchVerdict, partial_path: Option<&Path>) {
    let mut obj = serde_json::json!({
        "family": v.family,
        "kind": v.kind.as_str(),
        "delta": ratio_f64(&v.delta),
    });
    if let Some(p) = partial_path {
        obj["partial_path"] = serde_json::Value::String(p.display().to_string());
    }
    println!("{obj}");
}

fn describe_signature(sig: &Signature) -> String {
    format!(
        "family {}: {} vertices, {} control-flow edges, {} metadata edges, suspiciousness {}",
        sig.family,
        sig.graph.vertex_count(),
        sig.graph.cf_edge_count(),
        sig.graph.meta_edge_count(),
        sig.suspiciousness
    )
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Weights { benign_dir, out } => {
            let benign = load_graph_dir(&benign_dir)?;
            let table = compute_weights(&benign);
            save_weights(&table, &out)?;
            eprintln!(
                "computed weights for {} labels over {} benign apps",
                table.entries().count(),
                benign.len()
            );
            Ok(0)
        }
        Cmd::Synth {
            samples,
            weights,
            family,
            out,
            emit_wcnf,
        } => {
            let graphs = load_graphs(&samples)?;
            let table = load_weights(&weights)?;
            if let Some(path) = emit_wcnf {
                let (problem, _) = encoder::encode(&graphs, &table)?;
                export_wcnf(&problem, &path)?;
                eprintln!("wrote solver input to {}", path.display());
            }
            let sig = infer_signature(&graphs, &table, &family)?;
            save_signature(&sig, &out)?;
            eprintln!("{}", describe_signature(&sig));
            if sig.is_empty() {
                eprintln!("signature is empty: the samples share no suspicious structure");
                return Ok(3);
            }
            Ok(0)
        }
        Cmd::Match {
            app,
            signature,
            weights,
            zero_day_cutoff,
            obf_cutoff,
            partial_out,
        } => {
            let app = load_iccg(&app)?;
            let sig = load_signature(&signature)?;
            let table = load_weights(&weights)?;
            let cutoffs = cutoffs_from(&zero_day_cutoff, &obf_cutoff)?;
            let verdict = matcher::approx_match(&app, &sig, &table, &cutoffs)?;
            let partial_path = match (&partial_out, verdict.kind.is_detection()) {
                (Some(path), true) => {
                    save_iccg(&verdict.partial, path)?;
                    Some(path.as_path())
                }
                _ => None,
            };
            print_verdict(&verdict, partial_path);
            eprintln!(
                "{}: {} (delta {})",
                verdict.family,
                verdict.kind.as_str(),
                verdict.delta
            );
            Ok(if verdict.kind.is_detection() { 0 } else { 1 })
        }
        Cmd::Scan {
            app,
            db,
            weights,
            zero_day_cutoff,
            obf_cutoff,
            jobs,
            partials_dir,
        } => {
            let app = load_iccg(&app)?;
            let sigs: Vec<Signature> = json_files(&db)?
                .iter()
                .map(|p| load_signature(p))
                .collect::<Result<_>>()?;
            let table = load_weights(&weights)?;
            let cutoffs = cutoffs_from(&zero_day_cutoff, &obf_cutoff)?;
            let report = matcher::scan(&app, &sigs, &table, &cutoffs, jobs)?;
            if let Some(dir) = &partials_dir {
                std::fs::create_dir_all(dir).map_err(|e| SigError::io(dir, e))?;
            }
            for v in &report.verdicts {
                let partial_path = match (&partials_dir, v.kind.is_detection()) {
                    (Some(dir), true) => {
                        let path = dir.join(format!("{}.partial.json", v.family));
                        save_iccg(&v.partial, &path)?;
                        Some(path)
                    }
                    _ => None,
                };
                print_verdict(v, partial_path.as_deref());
            }
            match report.best_verdict() {
                Some(best) if best.kind.is_detection() => {
                    eprintln!(
                        "best match: {} as {} (delta {})",
                        best.family,
                        best.kind.as_str(),
                        best.delta
                    );
                    Ok(0)
                }
                _ => {
                    eprintln!("no family matched");
                    Ok(1)
                }
            }
        }
        Cmd::Oracle {
            samples,
            weights,
            out,
        } => {
            let graphs = load_graphs(&samples)?;
            let table = load_weights(&weights)?;
            let result = oracle_mscs(&graphs, &table)?;
            if let Some(path) = &out {
                save_iccg(&result.graph, path)?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "objective": result.objective,
                    "vertices": result.graph.vertex_count(),
                    "cf_edges": result.graph.cf_edge_count(),
                    "meta_edges": result.graph.meta_edge_count(),
                })
            );
            Ok(0)
        }
        Cmd::Obfuscate {
            graph,
            recipe,
            seed,
            out,
        } => {
            let g = load_iccg(&graph)?;
            let text = std::fs::read_to_string(&recipe).map_err(|e| SigError::io(&recipe, e))?;
            let ops = recipe_from_json(&text)?;
            let mutated = obfuscate(&g, &ops, seed)?;
            save_iccg(&mutated, &out)?;
            eprintln!(
                "obfuscated {}: {} vertices, {} control-flow edges, {} metadata edges",
                mutated.name(),
                mutated.vertex_count(),
                mutated.cf_edge_count(),
                mutated.meta_edge_count()
            );
            Ok(0)
        }
        Cmd::Tune {
            families_dir,
            benign_dir,
            candidates,
            target_tpr,
        } => {
            let mut families: Vec<(String, Vec<Iccg>)> = Vec::new();
            let mut subdirs: Vec<PathBuf> = Vec::new();
            for entry in
                std::fs::read_dir(&families_dir).map_err(|e| SigError::io(&families_dir, e))?
            {
                let path = entry.map_err(|e| SigError::io(&families_dir, e))?.path();
                if path.is_dir() {
                    subdirs.push(path);
                }
            }
            subdirs.sort();
            for dir in subdirs {
                let name = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "family".into());
                families.push((name, load_graph_dir(&dir)?));
            }
            let benign = load_graph_dir(&benign_dir)?;
            let parsed: Vec<num::BigRational> = candidates
                .iter()
                .map(|c| parse_decimal(c))
                .collect::<Result<_>>()?;
            let target = parse_decimal(&target_tpr)?;
            let result = matcher::tune_cutoff(&families, &benign, &parsed, &target)?;
            for p in &result.roc {
                println!(
                    "{}",
                    serde_json::json!({
                        "cutoff": ratio_f64(&p.cutoff),
                        "tpr": ratio_f64(&p.tpr),
                        "fpr": ratio_f64(&p.fpr),
                    })
                );
            }
            println!("{}", serde_json::json!({ "chosen": ratio_f64(&result.chosen) }));
            eprintln!("chosen zero-day cutoff: {}", result.chosen);
            Ok(0)
        }
    }
}

fn error_code(e: &SigError) -> u8 {
    match e {
        SigError::Io { .. }
        | SigError::Parse { .. }
        | SigError::InvalidGraph { .. }
        | SigError::InvalidInput(_)
        | SigError::TooLarge(_) => 2,
        SigError::ZeroSignature(_) => 3,
        SigError::HardUnsat(_) | SigError::Overflow(_) | SigError::Internal(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
