pub mod agent;
pub mod formats;
pub mod harness;
pub mod llm;
pub mod trace;
