//! Time-consistent species trees from event-labeled gene trees.

pub mod aux;
pub mod error;
pub mod gene;
pub mod newick;
pub mod oracle;
pub mod report;
pub mod solver;
pub mod tree;
pub mod triplet;

pub use aux::{check_pair, PairVerdict, SpeciesTree};
pub use error::{Error, Result};
pub use gene::{EventLabel, GeneTree, SpeciesId, ValidGeneTree};
pub use tree::{RootedTree, TreeBuilder, VertexId};
pub use solver::{solve, solve_gtc, SolveOptions, SolveOutcome};
pub use triplet::{Triplet, TripletSet};
