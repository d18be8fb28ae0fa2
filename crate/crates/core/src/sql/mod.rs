//! Spider-subset SQL: parsing with schema binding, canonical rendering and
//! value-aware exact set match.

mod ast;
mod lexer;
mod parser;
mod plan;
pub(crate) mod render;

pub use ast::*;
pub use plan::{PlanStep, QueryPlan};

use thiserror::Error;

use crate::corpus::DatabaseSchema;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("binding error at position {position}: {message} '{identifier}'")]
    Binding {
        position: usize,
        identifier: String,
        message: String,
    },
}

/// Parse `text` against `schema`, resolving aliases to concrete tables.
pub fn parse_sql(text: &str, schema: &DatabaseSchema) -> Result<Query, SqlError> {
    parser::parse(text, schema)
}

/// Render an AST as SQL. Columns are qualified only where the block has more
/// than one table (or the column belongs to an enclosing block).
pub fn render_sql(ast: &Query) -> String {
    render::query(ast, render::Style::SQL)
}

/// Sort every order-insensitive clause list (select items, tables, joins,
/// group-by columns, AND/OR children, IN lists) by a stable rendering.
/// ORDER BY keys keep their order.
pub fn canonicalize(ast: &Query) -> Query {
    render::canonicalize(ast)
}

/// Order-insensitive, value-aware structural equality.
pub fn exact_set_match(a: &Query, b: &Query) -> bool {
    canonicalize(a) == canonicalize(b)
}

/// A normalized rendering of the canonical form; equal keys iff
/// [`exact_set_match`].
pub fn canonical_key(ast: &Query) -> String {
    render::query(&canonicalize(ast), render::Style::KEY)
}
