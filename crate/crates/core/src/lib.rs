//! Structural analysis of directed graphs, discrete branching systems, and
//! the Cuntz-Krieger operator families they induce, together with the
//! basis-alignment construction that turns a concrete finite-dimensional
//! representation of a graph C*-algebra into one induced by a branching
//! system.
//!
//! Modules, bottom-up:
//!
//! * [`graph`]: directed multigraphs, undirected paths, P-simplicity,
//!   connected components.
//! * [`structure`]: extreme-vertex peeling, level sets, classification of
//!   components, final/initial roles, structural checks.
//! * [`branching`]: weighted point-mass branching systems, their validator,
//!   and a synthesizer for acyclic graphs.
//! * [`operators`]: exact weighted partial isometries and the relation
//!   verifier.
//! * [`alignment`]: concrete representations, basis alignment, extraction
//!   of the branching system and the intertwining unitary.

pub mod alignment;
pub mod branching;
pub mod error;
pub mod export;
pub mod families;
pub mod graph;
pub mod linalg;
pub mod operators;
pub mod report;
pub mod structure;

pub use error::{Error, Result};
