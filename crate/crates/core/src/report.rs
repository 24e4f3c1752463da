//! Name-based JSON reports.
//!
//! Gene vertices are named by their label (leaves) or `#id` (internal);
//! species vertices by their species (leaves) or `{A,B,..}` (the cluster).
//! Field order is fixed and timings are only present when requested, so
//! identical inputs give byte-identical reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aux::{AuxVertex, PairVerdict, Placement, Reconciliation, SpeciesTree};
use crate::gene::{AxiomReport, GeneTree, SpeciesId};
use crate::newick::{emit_species_tree, species_tree_names};
use crate::solver::{FailureReason, GoodSplitGraph, PairVerdictSummary, SolveOutcome, SolveTrace};
use crate::tree::VertexId;
use crate::triplet::Triplet;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Solution,
    NoSolution,
    Consistent,
    InconsistentPair,
    Valid,
    AxiomViolations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub species_tree: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconciliation: Option<ReconciliationReport>,
    /// Milliseconds per phase.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub sorted_initial: usize,
    pub steps: Vec<StepReport>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub cherry: String,
    pub part_a: Vec<String>,
    pub part_b: Vec<String>,
    pub sorted_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub reason: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_triplets: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicting_triplets: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cycle: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<String>,
    /// The stuck species tree when the search stopped early.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stuck_tree: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unsorted: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub good_split_graphs: Vec<GraphReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axiom_violations: Vec<AxiomReportEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphReport {
    pub cherry: String,
    pub vertices: Vec<String>,
    /// `[a, b, conditions]`
    pub edges: Vec<(String, String, Vec<String>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReportEntry {
    pub axiom: String,
    pub vertex: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<String>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub genes: Vec<GenePlacement>,
    pub species_time: Vec<(String, i64)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenePlacement {
    pub gene: String,
    pub event: String,
    /// A species vertex, or `parent->child` for an edge (`^` is the stem).
    pub placement: String,
    pub time: i64,
}

/// Vertex naming for one gene tree and species tree.
pub struct Names<'a> {
    g: &'a GeneTree,
    s: Option<&'a SpeciesTree>,
}

impl<'a> Names<'a> {
    pub fn new(g: &'a GeneTree, s: Option<&'a SpeciesTree>) -> Self {
        Self { g, s }
    }

    pub fn gene(&self, v: VertexId) -> String {
        match self.g.tree().label(v) {
            Some(l) => l.clone(),
            None => format!("#{}", v.index()),
        }
    }

    pub fn species(&self, id: SpeciesId) -> String {
        self.g.species_name(id).to_string()
    }

    pub fn species_vertex(&self, s: &SpeciesTree, x: VertexId) -> String {
        match s.label(x) {
            Some(&id) => self.species(id),
            None => {
                let mut names: Vec<String> = s.leaves_below(x).iter().map(|&l| self.species(*s.label(l).expect("leaf"))).collect();
                names.sort();
                format!("{{{}}}", names.join(","))
            }
        }
    }

    pub fn triplet(&self, t: &Triplet<SpeciesId>) -> String {
        format!("{},{}|{}", self.species(t.a), self.species(t.b), self.species(t.c))
    }

    pub fn aux(&self, v: AuxVertex) -> String {
        match v {
            AuxVertex::Gene(u) => format!("T:{}", self.gene(u)),
            AuxVertex::Species(x) => format!("S:{}", self.species_vertex(self.s.expect("species tree"), x)),
        }
    }

    fn species_list(&self, ids: &[SpeciesId]) -> Vec<String> {
        let mut v: Vec<String> = ids.iter().map(|&i| self.species(i)).collect();
        v.sort();
        v
    }

    fn graph(&self, s: &SpeciesTree, gsg: &GoodSplitGraph) -> GraphReport {
        GraphReport {
            cherry: self.species_vertex(s, gsg.cherry),
            vertices: self.species_list(&gsg.vertices),
            edges: gsg
                .edges
                .iter()
                .map(|e| {
                    let (a, b) = (self.species(e.a), self.species(e.b));
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    (a, b, e.conditions.iter().map(|c| format!("{c:?}")).collect())
                })
                .collect(),
        }
    }
}

fn base(command: &str, verdict: Verdict) -> Report {
    Report {
        schema: SCHEMA,
        command: command.to_string(),
        verdict,
        species_tree: None,
        trace: None,
        certificate: None,
        reconciliation: None,
        timing: None,
    }
}

fn trace_report(names: &Names, s: &SpeciesTree, trace: &SolveTrace) -> TraceReport {
    TraceReport {
        sorted_initial: trace.sorted_initial,
        steps: trace
            .steps
            .iter()
            .map(|st| StepReport {
                // cherry ids survive refinement, so the final tree names them
                cherry: names.species_vertex(s, st.cherry),
                part_a: names.species_list(&st.part_a),
                part_b: names.species_list(&st.part_b),
                sorted_after: st.sorted_after,
            })
            .collect(),
    }
}

fn verdict_certificate(names: &Names, verdict: &PairVerdict) -> Option<Certificate> {
    match verdict {
        PairVerdict::Consistent => None,
        PairVerdict::MissingTriplets(ts) => Some(Certificate {
            reason: "missing_triplets".into(),
            missing_triplets: ts.iter().map(|t| names.triplet(t)).collect(),
            ..Default::default()
        }),
        PairVerdict::Cyclic(cycle) => Some(Certificate {
            reason: "cycle".into(),
            cycle: cycle.iter().map(|&v| names.aux(v)).collect(),
            ..Default::default()
        }),
    }
}

impl Report {
    pub fn from_solve(g: &GeneTree, outcome: &SolveOutcome, reconciliation: Option<&Reconciliation>) -> Self {
        match outcome {
            SolveOutcome::Solved { tree, trace } => {
                let names = Names::new(g, Some(tree));
                let mut r = base("solve", Verdict::Solution);
                r.species_tree = Some(emit_species_tree(&species_tree_names(g, tree)));
                r.trace = Some(trace_report(&names, tree, trace));
                r.reconciliation = reconciliation.map(|rec| reconciliation_report(g, tree, rec));
                r
            }
            SolveOutcome::NoSolution { trace, explanation } => {
                let s = &explanation.tree;
                let names = Names::new(g, Some(s));
                let mut r = base("solve", Verdict::NoSolution);
                r.trace = Some(trace_report(&names, s, trace));
                let mut cert = match &explanation.reason {
                    FailureReason::NoGoodSplit => Certificate {
                        reason: "no_good_split".into(),
                        ..Default::default()
                    },
                    FailureReason::NoEligibleCherry => Certificate {
                        reason: "no_eligible_cherry".into(),
                        ..Default::default()
                    },
                    FailureReason::InconsistentStart { verdict } => {
                        let v = match verdict {
                            PairVerdictSummary::MissingTriplets { triplets } => PairVerdict::MissingTriplets(triplets.clone()),
                            PairVerdictSummary::Cyclic { cycle } => PairVerdict::Cyclic(cycle.clone()),
                        };
                        let mut c = verdict_certificate(&names, &v).expect("inconsistent");
                        c.reason = format!("inconsistent_start:{}", c.reason);
                        c
                    }
                    FailureReason::StartDisagrees { conflicts } => Certificate {
                        reason: "start_disagrees".into(),
                        conflicting_triplets: conflicts.iter().map(|t| names.triplet(t)).collect(),
                        ..Default::default()
                    },
                    FailureReason::LeafSelfLoop { leaf } => Certificate {
                        reason: "leaf_self_loop".into(),
                        leaf: Some(names.species(*leaf)),
                        ..Default::default()
                    },
                };
                cert.stuck_tree = Some(emit_species_tree(&species_tree_names(g, s)));
                cert.unsorted = explanation.unsorted.iter().map(|&v| names.aux(v)).collect();
                cert.good_split_graphs = explanation.graphs.iter().map(|gsg| names.graph(s, gsg)).collect();
                r.certificate = Some(cert);
                r
            }
        }
    }

    pub fn from_check(g: &GeneTree, s: &SpeciesTree, verdict: &PairVerdict) -> Self {
        let names = Names::new(g, Some(s));
        let mut r = base(
            "check",
            if verdict.is_consistent() { Verdict::Consistent } else { Verdict::InconsistentPair },
        );
        r.species_tree = Some(emit_species_tree(&species_tree_names(g, s)));
        r.certificate = verdict_certificate(&names, verdict);
        r
    }

    pub fn from_axioms(g: &GeneTree, report: &AxiomReport) -> Self {
        let names = Names::new(g, None);
        let mut r = base("validate", if report.ok() { Verdict::Valid } else { Verdict::AxiomViolations });
        if !report.ok() {
            r.certificate = Some(Certificate {
                reason: "axiom_violations".into(),
                axiom_violations: report
                    .violations
                    .iter()
                    .map(|v| AxiomReportEntry {
                        axiom: v.axiom.to_string(),
                        vertex: names.gene(v.vertex),
                        other: v.other.map(|o| names.gene(o)),
                        detail: v.detail.clone(),
                    })
                    .collect(),
                ..Default::default()
            });
        }
        r
    }

    /// A report with only a verdict.
    pub fn empty(command: &str, verdict: Verdict) -> Self {
        base(command, verdict)
    }

    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }

    pub fn with_certificate(mut self, certificate: Certificate) -> Self {
        self.certificate = Some(certificate);
        self
    }

    pub fn with_command(mut self, command: &str) -> Self {
        self.command = command.to_string();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn reconciliation_report(g: &GeneTree, s: &SpeciesTree, rec: &Reconciliation) -> ReconciliationReport {
    let names = Names::new(g, Some(s));
    let t = g.tree();
    let mut order: Vec<VertexId> = t.postorder();
    order.reverse();
    ReconciliationReport {
        genes: order
            .iter()
            .map(|&u| GenePlacement {
                gene: names.gene(u),
                event: g.event(u).code().map_or("leaf".to_string(), |c| c.to_string()),
                placement: match rec.placement[u.index()] {
                    Placement::Vertex(x) => names.species_vertex(s, x),
                    Placement::Edge { parent, child } => format!(
                        "{}->{}",
                        parent.map_or("^".to_string(), |p| names.species_vertex(s, p)),
                        names.species_vertex(s, child)
                    ),
                },
                time: rec.gene_time[u.index()],
            })
            .collect(),
        species_time: {
            let mut v: Vec<VertexId> = s.postorder();
            v.reverse();
            v.iter().map(|&x| (names.species_vertex(s, x), rec.species_time[x.index()])).collect()
        },
    }
}
