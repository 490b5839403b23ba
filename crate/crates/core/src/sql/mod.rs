//! A pragmatic SQL SELECT dialect: parsing, canonical rendering, keyword
//! components for candidate comparison and skeleton extraction.
//!
//! The dialect covers SELECT with joins, subqueries in IN, FROM and scalar
//! position, aggregates, GROUP BY/HAVING, ORDER BY and LIMIT. Keywords are
//! case-insensitive, strings take single or double quotes and backticks quote
//! identifiers.

pub mod ast;
pub mod components;
mod error;
pub mod generator;
pub mod lexer;
mod parser;
mod render;
pub mod skeleton;

pub use ast::*;
pub use components::SqlComponents;
pub use error::{SqlError, SyntaxError};
pub use render::render_expr;
pub use skeleton::SqlSkeleton;

pub fn parse_sql(text: &str) -> Result<Query, SqlError> {
    parser::parse(text)
}

pub fn render_sql(query: &Query) -> String {
    render::render(query)
}

pub fn extract_components(query: &Query) -> Result<SqlComponents, SqlError> {
    components::extract(query)
}

pub fn components_compatible(a: &SqlComponents, b: &SqlComponents) -> bool {
    components::compatible(a, b)
}

pub fn extract_skeleton(query: &Query) -> SqlSkeleton {
    skeleton::skeleton(query)
}

/// Parses `text` and returns its skeleton.
pub fn skeleton_of(text: &str) -> Result<SqlSkeleton, SqlError> {
    parse_sql(text).map(|q| skeleton::skeleton(&q))
}
