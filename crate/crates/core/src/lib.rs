//! Generate, modify, validate, run and repair OpenFOAM cases with an LLM
//! in the loop.

pub mod agent;
pub mod bench;
pub mod case;
pub mod cli;
pub mod foam;
pub mod llm;
