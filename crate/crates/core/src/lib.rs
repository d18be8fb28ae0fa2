//! Toolkit for natural-language feedback in interactive text-to-SQL:
//! SQL parsing and diffing, template feedback, a trainable feedback
//! evaluator, simulator prompting, and error-correction metrics.

pub mod corpus;
pub mod edit_engine;
pub mod embedding;
pub mod evaluator;
pub mod metrics;
pub mod simulator;
pub mod sql;
pub mod text;
pub mod verbalizer;
