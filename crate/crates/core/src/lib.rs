//! Critical (sandpile) groups of graphs by exact integer linear algebra.
//!
//! The critical group of a connected graph is the finite abelian group
//! carried by the cokernel of the graph Laplacian; its order is the number
//! of spanning trees. This crate computes it three ways and checks the ways
//! against each other:
//!
//! * generic route: Smith normal form of the Laplacian ([`snf`]);
//! * staged route for layered multipartite graphs: a pipeline of unimodular
//!   reductions that shrinks the Laplacian down to a small core while
//!   preserving the cokernel ([`pipeline`]);
//! * closed forms for layered graphs with 2 to 6 parts ([`group`]).
//!
//! Independent oracles (spanning-tree counts by brute force, by the
//! Matrix-Tree theorem and by eigenvalues, plus a chip-firing simulation of
//! the sandpile group) live in [`oracles`].
//!
//! All arithmetic is arbitrary precision; nothing here rounds.

pub mod graph;
pub mod group;
pub mod matrix;
pub mod oracles;
pub mod pipeline;
pub mod snf;

pub use graph::{layered_kpartite, layered_laplacian_direct, Graph, LayeredSpec};
pub use group::{closed_form, critical_group, spanning_trees_formula, AbelianGroup};
pub use matrix::{ElementaryOp, IntMatrix, MatrixError};
pub use pipeline::{run_pipeline, PipelineError, PipelineRun, StageReport};
pub use snf::{cokernel, invariant_factors, smith_normal_form, SnfResult};
