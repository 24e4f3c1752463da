use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use gtc_core::aux::{build_reconciliation, check_pair};
use gtc_core::gene::{informative_triplets, AxiomReport, GeneTree, TransferForest};
use gtc_core::newick::{
    emit_gene_tree, emit_species_tree, parse_gene_tree, parse_gene_tree_lenient, parse_species_map,
    parse_species_tree, species_tree_for,
};
use gtc_core::oracle::{self, InstanceGenConfig};
use gtc_core::report::{Certificate, Report, Verdict};
use gtc_core::solver::{solve_gtc_with, solve_with, Policy, SolveOptions, SolveOutcome};
use gtc_core::ValidGeneTree;

/// Time-consistent species trees from event-labeled gene trees.
#[derive(Parser)]
#[command(name = "gtc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GeneInput {
    /// Gene tree in annotated Newick (`-` for stdin).
    gene: PathBuf,
    /// Two-column TSV gene→species map; overrides `@species` suffixes.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a binary time-consistent species tree.
    Solve {
        #[command(flatten)]
        input: GeneInput,
        /// Refine this almost-binary species tree instead of the star.
        #[arg(long)]
        start_tree: Option<PathBuf>,
        /// Include a reconciliation map with time maps.
        #[arg(long)]
        emit_reconciliation: bool,
        #[arg(long)]
        json: bool,
        /// Add per-phase timings to the JSON report.
        #[arg(long)]
        timing: bool,
        /// Randomize cherry and split choices with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Cross-check incremental bookkeeping against full recomputation.
        #[arg(long)]
        verify_incremental: bool,
    },
    /// Test a gene tree against a species tree.
    Check {
        #[command(flatten)]
        input: GeneInput,
        /// Species tree in Newick.
        species: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the informative triplets.
    Triplets {
        #[command(flatten)]
        input: GeneInput,
        /// Report axiom violations as warnings instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Report axiom violations.
    Validate {
        #[command(flatten)]
        input: GeneInput,
        #[arg(long)]
        json: bool,
    },
    /// Exhaustive search over binary species trees.
    Oracle {
        #[command(flatten)]
        input: GeneInput,
        /// Largest species count to enumerate.
        #[arg(long, default_value_t = oracle::DEFAULT_LIMIT)]
        limit: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        json: bool,
    },
    /// Simulate a gene tree along a random species tree.
    Gen {
        #[arg(long, default_value_t = 5)]
        species: usize,
        /// Cap on simultaneously living gene lineages.
        #[arg(long, default_value_t = 20)]
        genes: usize,
        #[arg(long, default_value_t = 0.3)]
        dup: f64,
        #[arg(long, default_value_t = 0.3)]
        hgt: f64,
        #[arg(long, default_value_t = 0.1)]
        loss: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Swap the species of this many random leaf pairs afterwards.
        #[arg(long, default_value_t = 0)]
        swaps: usize,
        /// Write the gene tree here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the generating species tree.
        #[arg(long)]
        species_out: Option<PathBuf>,
    },
}

macro_rules! outln {
    ($out:expr, $($arg:tt)*) => {{
        use std::fmt::Write as _;
        let _ = writeln!($out, $($arg)*);
    }};
}

fn read(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn species_map(input: &GeneInput) -> Result<Option<Vec<(String, String)>>> {
    input
        .map
        .as_deref()
        .map(|p| parse_species_map(&read(p)?).with_context(|| format!("in {}", p.display())))
        .transpose()
}

fn load(input: &GeneInput) -> Result<ValidGeneTree> {
    let map = species_map(input)?;
    parse_gene_tree(&read(&input.gene)?, map.as_deref()).with_context(|| format!("in {}", input.gene.display()))
}

fn load_lenient(input: &GeneInput) -> Result<(GeneTree, AxiomReport)> {
    let map = species_map(input)?;
    parse_gene_tree_lenient(&read(&input.gene)?, map.as_deref()).with_context(|| format!("in {}", input.gene.display()))
}

fn code(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn run(cli: Cli, out: &mut String) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            input,
            start_tree,
            emit_reconciliation,
            json,
            timing,
            seed,
            verify_incremental,
        } => {
            let mut times = BTreeMap::new();
            let t = Instant::now();
            let g = load(&input)?;
            times.insert("parse".to_string(), ms(t));
            let t = Instant::now();
            g.triplets();
            times.insert("triplets".to_string(), ms(t));
            let opts = SolveOptions {
                policy: seed.map_or(Policy::Deterministic, |seed| Policy::Randomized { seed }),
                verify_incremental,
            };
            let t = Instant::now();
            let outcome = match &start_tree {
                Some(p) => {
                    let s0 = parse_species_tree(&read(p)?).with_context(|| format!("in {}", p.display()))?;
                    let s0 = species_tree_for(&g, &s0)?;
                    solve_gtc_with(&g, &s0, &opts)?
                }
                None => solve_with(&g, &opts)?,
            };
            times.insert("solve".to_string(), ms(t));
            let rec = match (&outcome, emit_reconciliation) {
                (SolveOutcome::Solved { tree, .. }, true) => {
                    let t = Instant::now();
                    let rec = build_reconciliation(&g, tree)?;
                    times.insert("reconcile".to_string(), ms(t));
                    Some(rec)
                }
                _ => None,
            };
            let mut report = Report::from_solve(&g, &outcome, rec.as_ref());
            if timing {
                report.timing = Some(times);
            }
            if json {
                outln!(out, "{}", report.to_json());
            } else {
                match &report.species_tree {
                    Some(nwk) => outln!(out, "{nwk}"),
                    None => {
                        let cert = report.certificate.as_ref().expect("failure has a certificate");
                        outln!(out, "no solution: {}", cert.reason);
                        if let Some(stuck) = &cert.stuck_tree {
                            outln!(out, "stuck at {stuck}");
                        }
                    }
                }
                if let Some(rec) = &report.reconciliation {
                    for p in &rec.genes {
                        outln!(out, "{}\t{}\t{}\t{}", p.gene, p.event, p.placement, p.time);
                    }
                }
                if let Some(times) = &report.timing {
                    for (k, v) in times {
                        eprintln!("{k}: {v:.3} ms");
                    }
                }
            }
            Ok(code(outcome.is_solved()))
        }
        Command::Check { input, species, json } => {
            let g = load(&input)?;
            let s = parse_species_tree(&read(&species)?).with_context(|| format!("in {}", species.display()))?;
            let s = species_tree_for(&g, &s)?;
            let verdict = check_pair(&g, &s)?;
            let report = Report::from_check(&g, &s, &verdict);
            if json {
                outln!(out, "{}", report.to_json());
            } else {
                match &report.certificate {
                    None => outln!(out, "consistent"),
                    Some(c) if !c.missing_triplets.is_empty() => {
                        outln!(out, "inconsistent: species tree misses triplets");
                        for t in &c.missing_triplets {
                            outln!(out, "{t}");
                        }
                    }
                    Some(c) => outln!(out, "inconsistent: cycle {}", c.cycle.join(" -> ")),
                }
            }
            Ok(code(verdict.is_consistent()))
        }
        Command::Triplets { input, lenient } => {
            let g = if lenient {
                let (g, report) = load_lenient(&input)?;
                for v in &report.violations {
                    eprintln!("warning: {} {}", v.axiom, v.detail);
                }
                g
            } else {
                load(&input)?.into_inner()
            };
            let r = informative_triplets(&g, &TransferForest::new(&g));
            let mut lines: Vec<String> = r
                .iter()
                .map(|t| format!("{},{}|{}", g.species_name(t.a), g.species_name(t.b), g.species_name(t.c)))
                .collect();
            lines.sort();
            for l in lines {
                outln!(out, "{l}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { input, json } => {
            let (g, axioms) = load_lenient(&input)?;
            let report = Report::from_axioms(&g, &axioms);
            if json {
                outln!(out, "{}", report.to_json());
            } else if axioms.ok() {
                outln!(out, "valid");
            } else {
                for v in &axioms.violations {
                    outln!(out, "{}\t{}", v.axiom, v.detail);
                }
            }
            Ok(code(axioms.ok()))
        }
        Command::Oracle { input, limit, jobs, json } => {
            let g = load(&input)?;
            let found = if jobs > 1 {
                oracle::brute_force_solve_parallel(&g, limit, jobs)?
            } else {
                oracle::brute_force_solve(&g, limit)?
            };
            let report = match &found {
                Some(s) => Report::from_check(&g, s, &check_pair(&g, s)?).with_command("oracle").with_verdict(Verdict::Solution),
                None => Report::empty("oracle", Verdict::NoSolution).with_certificate(Certificate {
                    reason: "exhaustive_search".into(),
                    ..Default::default()
                }),
            };
            if json {
                outln!(out, "{}", report.to_json());
            } else {
                outln!(out, "{}", report.species_tree.as_deref().unwrap_or("no solution"));
            }
            Ok(code(found.is_some()))
        }
        Command::Gen {
            species,
            genes,
            dup,
            hgt,
            loss,
            seed,
            swaps,
            out: out_path,
            species_out,
        } => {
            let inst = oracle::generate_instance(&InstanceGenConfig {
                species_count: species,
                gene_count_hint: genes,
                dup_rate: dup,
                hgt_rate: hgt,
                loss_rate: loss,
                seed,
            })?;
            let gene = if swaps > 0 {
                oracle::perturb_species(&inst.gene, swaps, seed)?
            } else {
                inst.gene
            };
            let text = emit_gene_tree(&gene) + "\n";
            match out_path {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => out.push_str(&text),
            }
            if let Some(p) = species_out {
                std::fs::write(&p, emit_species_tree(&inst.species_tree) + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let mut out = String::new();
    let result = run(Cli::parse(), &mut out);
    // a closed pipe downstream is not an error
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
