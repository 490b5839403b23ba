//! Deterministic core of an LLM-based text-to-SQL system.

pub mod augment;
pub mod calibration;
pub mod http;
pub mod linking;
pub mod llm;
pub mod pipeline;
pub mod lora;
pub mod prompt;
pub mod schema;
pub mod sql;
