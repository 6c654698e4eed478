//! Regression graphs: block-ordered graphs with arrows, dashed and full lines,
//! their independence structures, marginalisation and Markov equivalence,
//! exact distributional oracles, and stepwise fitting of sequences of
//! regressions.

pub mod cli;
pub mod fitting;
pub mod graph;
pub mod independence;
pub mod oracle;
pub mod par;
pub mod transform;
