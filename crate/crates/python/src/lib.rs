//! Python bindings.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gtc_core::aux::{build_reconciliation, check_pair};
use gtc_core::newick::{
    emit_gene_tree, emit_species_tree, parse_gene_tree, parse_gene_tree_lenient, parse_species_tree,
    species_tree_for, species_tree_names,
};
use gtc_core::oracle::{self, InstanceGenConfig};
use gtc_core::report::{reconciliation_report, Report};
use gtc_core::solver::{solve_gtc_with, solve_with, Policy, SolveOptions, SolveOutcome};
use gtc_core::{PairVerdict, ValidGeneTree};

create_exception!(gtc, GtcError, PyValueError);

fn err(e: gtc_core::Error) -> PyErr {
    GtcError::new_err(e.to_string())
}

/// An event-labeled gene tree that satisfies the axioms.
#[pyclass(module = "gtc", frozen)]
struct GeneTree {
    inner: ValidGeneTree,
}

#[pymethods]
impl GeneTree {
    /// Parses annotated Newick; `species_map` overrides `@species` suffixes.
    #[staticmethod]
    #[pyo3(signature = (text, species_map=None))]
    fn parse(text: &str, species_map: Option<Vec<(String, String)>>) -> PyResult<Self> {
        let inner = parse_gene_tree(text, species_map.as_deref()).map_err(err)?;
        Ok(Self { inner })
    }

    fn to_newick(&self) -> String {
        emit_gene_tree(&self.inner)
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.inner.tree().leaf_count()
    }

    #[getter]
    fn species(&self) -> Vec<String> {
        self.inner.species_names().to_vec()
    }

    #[getter]
    fn transfer_edge_count(&self) -> usize {
        self.inner.transfer_edges().len()
    }

    /// Informative triplets as sorted `(a, b, c)` tuples meaning `ab|c`.
    fn triplets(&self) -> Vec<(String, String, String)> {
        let g = &self.inner;
        let mut out: Vec<_> = g
            .triplets()
            .iter()
            .map(|t| {
                (
                    g.species_name(t.a).to_string(),
                    g.species_name(t.b).to_string(),
                    g.species_name(t.c).to_string(),
                )
            })
            .collect();
        out.sort();
        out
    }

    fn __repr__(&self) -> String {
        format!("GeneTree({:?})", emit_gene_tree(&self.inner))
    }
}

/// Outcome of `solve`.
#[pyclass(module = "gtc", frozen, get_all)]
struct SolveResult {
    solved: bool,
    /// Newick of the binary species tree, if any.
    species_tree: Option<String>,
    /// `(part_a, part_b)` of each refinement, in order.
    steps: Vec<(Vec<String>, Vec<String>)>,
    report_json: String,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!("SolveResult(solved={}, species_tree={:?})", self.solved, self.species_tree)
    }
}

/// Builds a binary time-consistent species tree, optionally refining an
/// almost-binary `start_tree`. A `seed` randomizes the choice of splits.
#[pyfunction]
#[pyo3(signature = (gene, start_tree=None, seed=None, emit_reconciliation=false))]
fn solve(gene: &GeneTree, start_tree: Option<&str>, seed: Option<u64>, emit_reconciliation: bool) -> PyResult<SolveResult> {
    let g = &gene.inner;
    let opts = SolveOptions {
        policy: seed.map_or(Policy::Deterministic, |seed| Policy::Randomized { seed }),
        verify_incremental: false,
    };
    let outcome = match start_tree {
        Some(text) => {
            let s0 = species_tree_for(g, &parse_species_tree(text).map_err(err)?).map_err(err)?;
            solve_gtc_with(g, &s0, &opts)
        }
        None => solve_with(g, &opts),
    }
    .map_err(err)?;
    let rec = match (&outcome, emit_reconciliation) {
        (SolveOutcome::Solved { tree, .. }, true) => Some(build_reconciliation(g, tree).map_err(err)?),
        _ => None,
    };
    let report = Report::from_solve(g, &outcome, rec.as_ref());
    let steps = report
        .trace
        .as_ref()
        .map(|t| t.steps.iter().map(|s| (s.part_a.clone(), s.part_b.clone())).collect())
        .unwrap_or_default();
    Ok(SolveResult {
        solved: outcome.is_solved(),
        species_tree: report.species_tree.clone(),
        steps,
        report_json: report.to_json(),
    })
}

/// Tests a gene tree against a species tree. Returns `(consistent, report_json)`.
#[pyfunction]
fn check(gene: &GeneTree, species_tree: &str) -> PyResult<(bool, String)> {
    let g = &gene.inner;
    let s = species_tree_for(g, &parse_species_tree(species_tree).map_err(err)?).map_err(err)?;
    let verdict = check_pair(g, &s).map_err(err)?;
    Ok((verdict == PairVerdict::Consistent, Report::from_check(g, &s, &verdict).to_json()))
}

/// A time-consistent reconciliation with a species tree, as JSON.
#[pyfunction]
fn reconcile(gene: &GeneTree, species_tree: &str) -> PyResult<String> {
    let g = &gene.inner;
    let s = species_tree_for(g, &parse_species_tree(species_tree).map_err(err)?).map_err(err)?;
    let rec = build_reconciliation(g, &s).map_err(err)?;
    Ok(serde_json::to_string_pretty(&reconciliation_report(g, &s, &rec)).expect("serializes"))
}

/// Exhaustive search over binary species trees.
#[pyfunction]
#[pyo3(signature = (gene, limit=oracle::DEFAULT_LIMIT, jobs=1))]
fn brute_force(py: Python<'_>, gene: &GeneTree, limit: usize, jobs: usize) -> PyResult<Option<String>> {
    let g = &gene.inner;
    let found = py
        .allow_threads(|| oracle::brute_force_solve_parallel(g, limit, jobs.max(1)))
        .map_err(err)?;
    Ok(found.map(|s| emit_species_tree(&species_tree_names(g, &s))))
}

/// Axiom violations of a gene tree as `(axiom, detail)` pairs.
#[pyfunction]
#[pyo3(signature = (text, species_map=None))]
fn validate(text: &str, species_map: Option<Vec<(String, String)>>) -> PyResult<Vec<(String, String)>> {
    let (_, report) = parse_gene_tree_lenient(text, species_map.as_deref()).map_err(err)?;
    Ok(report.violations.iter().map(|v| (v.axiom.to_string(), v.detail.clone())).collect())
}

/// Simulates a gene tree; returns it with the generating species tree.
#[pyfunction]
#[pyo3(signature = (species=5, genes=20, dup=0.3, hgt=0.3, loss=0.1, seed=0, swaps=0))]
fn generate(species: usize, genes: usize, dup: f64, hgt: f64, loss: f64, seed: u64, swaps: usize) -> PyResult<(GeneTree, String)> {
    let inst = oracle::generate_instance(&InstanceGenConfig {
        species_count: species,
        gene_count_hint: genes,
        dup_rate: dup,
        hgt_rate: hgt,
        loss_rate: loss,
        seed,
    })
    .map_err(err)?;
    let inner = if swaps > 0 {
        oracle::perturb_species(&inst.gene, swaps, seed).map_err(err)?
    } else {
        inst.gene
    };
    Ok((GeneTree { inner }, emit_species_tree(&inst.species_tree)))
}

#[pymodule]
fn gtc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GtcError", m.py().get_type_bound::<GtcError>())?;
    m.add_class::<GeneTree>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(reconcile, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
