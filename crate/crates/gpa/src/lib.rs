//! Bipartite graph planar algebras: loop spaces, the augmented loop tower,
//! tangle state sums and the string-adding embedding.

pub mod embed;
pub mod gpa_ops;
pub mod graphs;
pub mod loopspace;
pub mod tangles;
pub mod tower;
pub mod verify;
