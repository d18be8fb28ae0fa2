//! Clause-level edit scripts between a wrong and a gold query.
//!
//! Both sides are canonicalized before diffing, so item positions and the
//! nested-subquery indices in [`PathSeg::Nested`] refer to the canonical
//! form of the wrong query.

mod apply;
mod diff;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sql::render::{self, Style};
use crate::sql::{
    canonicalize, ColumnExpr, ColumnRef, Condition, Connector, Direction, Join, OrderBy, Query, QueryPlan, SetOp,
    SetOpKind,
};

pub use apply::apply;
pub use diff::diff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    Select,
    From,
    Where,
    GroupBy,
    Having,
    OrderLimit,
    DistinctFlag,
    LogicConnector,
    Subquery,
}

impl Clause {
    pub fn name(self) -> &'static str {
        match self {
            Clause::Select => "select",
            Clause::From => "from",
            Clause::Where => "where",
            Clause::GroupBy => "group_by",
            Clause::Having => "having",
            Clause::OrderLimit => "order_limit",
            Clause::DistinctFlag => "distinct_flag",
            Clause::LogicConnector => "logic_connector",
            Clause::Subquery => "subquery",
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Replace,
    Add,
    Remove,
    Flip,
}

/// The AST fragment an edit adds, removes or replaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Table(String),
    Join(Join),
    Select(ColumnExpr),
    /// The SELECT DISTINCT flag.
    Distinct,
    /// A top-level child of a WHERE or HAVING condition.
    Condition(Condition),
    GroupBy(ColumnRef),
    OrderLimit {
        order_by: Option<OrderBy>,
        limit: Option<u64>,
    },
    /// A whole set-operation tail (operator plus the right-hand query).
    SetOp(SetOp),
    /// A WHERE/HAVING child carrying a nested query.
    NestedCondition { having: bool, condition: Condition },
}

impl Item {
    /// Compact SQL-ish rendering without table qualifiers.
    pub fn display(&self) -> String {
        let s = Style::DISPLAY;
        match self {
            Item::Table(t) => t.clone(),
            Item::Join(j) => render::join(j, s, &[]),
            Item::Select(e) => render::column_expr(e, s, &[]),
            Item::Distinct => "DISTINCT".into(),
            Item::Condition(c) | Item::NestedCondition { condition: c, .. } => render::condition(c, s, &[]),
            Item::GroupBy(c) => render::column_ref(c, s, &[]),
            Item::OrderLimit { order_by, limit } => render::order_limit(order_by.as_ref(), *limit, s, &[]),
            Item::SetOp(op) => format!("{} {}", op.kind.sql(), render::query(&op.query, s)),
        }
    }
}

/// Direction-like toggles that carry no item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flip {
    Connector {
        having: bool,
        from: Connector,
        to: Connector,
    },
    Direction {
        from: Direction,
        to: Direction,
    },
    SetOp {
        from: SetOpKind,
        to: SetOpKind,
    },
}

impl Flip {
    pub fn detail(&self) -> String {
        match self {
            Flip::Connector { from, to, .. } => format!("{} -> {}", from.sql(), to.sql()),
            Flip::Direction { from, to } => format!("{} -> {}", from.sql(), to.sql()),
            Flip::SetOp { from, to } => format!("{} -> {}", from.sql(), to.sql()),
        }
    }
}

/// Step from a block to one of its sub-blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSeg {
    /// The right operand of the block's set operation.
    SetOp,
    /// The i-th nested query of the block, in `Query::nested_subqueries` order.
    Nested(usize),
}

/// Tables of the edited block on each side; used when verbalizing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockContext {
    pub wrong_tables: Vec<String>,
    pub gold_tables: Vec<String>,
    /// ORDER BY keys of the wrong block (a direction flip names them).
    #[serde(default)]
    pub order_keys: Vec<ColumnExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub clause: Clause,
    pub kind: EditKind,
    pub old: Option<Item>,
    pub new: Option<Item>,
    pub flip: Option<Flip>,
    /// Block of the (canonical) wrong query the edit applies to.
    pub path: Vec<PathSeg>,
    pub context: BlockContext,
    /// Explanation step of that block, when the wrong query has several.
    pub step: Option<usize>,
}

impl Edit {
    pub fn old_text(&self) -> Option<String> {
        self.old.as_ref().map(Item::display)
    }

    pub fn new_text(&self) -> Option<String> {
        self.new.as_ref().map(Item::display)
    }

    /// Linearized form, e.g. `REPLACE(from, breeds -> treatments)`.
    pub fn linearize(&self) -> String {
        let c = self.clause.name();
        match self.kind {
            EditKind::Replace => format!(
                "REPLACE({c}, {} -> {})",
                self.old_text().unwrap_or_default(),
                self.new_text().unwrap_or_default()
            ),
            EditKind::Add => format!("ADD({c}, {})", self.new_text().unwrap_or_default()),
            EditKind::Remove => format!("REMOVE({c}, {})", self.old_text().unwrap_or_default()),
            EditKind::Flip => format!("FLIP({c}, {})", self.flip.map(|f| f.detail()).unwrap_or_default()),
        }
    }

    /// Whether an entire SELECT block is added or removed.
    pub fn is_structural(&self) -> bool {
        matches!(
            (self.kind, self.old.as_ref().or(self.new.as_ref())),
            (EditKind::Add | EditKind::Remove, Some(Item::SetOp(_) | Item::NestedCondition { .. }))
        )
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.linearize())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub edits: Vec<Edit>,
}

impl EditScript {
    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Edits joined by `" ; "`.
    pub fn linearize(&self) -> String {
        self.edits.iter().map(Edit::linearize).collect::<Vec<_>>().join(" ; ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralErrorKind {
    MissingSubqueryUnion,
    MissingSubqueryExcept,
    MissingSubqueryIntersect,
    MissingSubqueryWhere,
    RedundantSubqueryWhere,
    RedundantSubquerySetop,
}

impl StructuralErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MissingSubqueryUnion => "missing_subquery_union",
            Self::MissingSubqueryExcept => "missing_subquery_except",
            Self::MissingSubqueryIntersect => "missing_subquery_intersect",
            Self::MissingSubqueryWhere => "missing_subquery_where",
            Self::RedundantSubqueryWhere => "redundant_subquery_where",
            Self::RedundantSubquerySetop => "redundant_subquery_setop",
        }
    }
}

/// Kind of the first whole-subquery addition or removal in the script.
pub fn classify_structural(script: &EditScript) -> Option<StructuralErrorKind> {
    script.edits.iter().find_map(|e| match (e.kind, e.old.as_ref().or(e.new.as_ref())) {
        (EditKind::Add, Some(Item::SetOp(op))) => Some(match op.kind {
            SetOpKind::Union => StructuralErrorKind::MissingSubqueryUnion,
            SetOpKind::Except => StructuralErrorKind::MissingSubqueryExcept,
            SetOpKind::Intersect => StructuralErrorKind::MissingSubqueryIntersect,
        }),
        (EditKind::Remove, Some(Item::SetOp(_))) => Some(StructuralErrorKind::RedundantSubquerySetop),
        (EditKind::Add, Some(Item::NestedCondition { .. })) => Some(StructuralErrorKind::MissingSubqueryWhere),
        (EditKind::Remove, Some(Item::NestedCondition { .. })) => Some(StructuralErrorKind::RedundantSubqueryWhere),
        _ => None,
    })
}

/// Unit-cost edit distance: the length of the diff script.
pub fn edit_distance(a: &Query, b: &Query) -> usize {
    diff(a, b).len()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("cannot apply {edit}: {reason}")]
    NotApplicable { edit: String, reason: String },
    #[error("edit path {0:?} does not exist in the query")]
    BadPath(Vec<PathSeg>),
}

/// Block of `q` reached by following `path`.
pub(crate) fn block_at<'a>(q: &'a Query, path: &[PathSeg]) -> Option<&'a Query> {
    let mut cur = q;
    for seg in path {
        cur = match seg {
            PathSeg::SetOp => cur.set_op.as_ref()?.query.as_ref(),
            PathSeg::Nested(i) => *cur.nested_subqueries().get(*i)?,
        };
    }
    Some(cur)
}

/// Explanation step numbers for each edit, taken from the wrong query's plan.
pub(crate) fn assign_steps(wrong_canonical: &Query, edits: &mut [Edit]) {
    let plan = QueryPlan::new(wrong_canonical);
    if !plan.is_multi_step() {
        return;
    }
    for e in edits {
        let Some(b) = block_at(wrong_canonical, &e.path) else {
            e.step = None;
            continue;
        };
        let set_op = matches!(e.flip, Some(Flip::SetOp { .. }))
            || matches!((&e.old, &e.new), (Some(Item::SetOp(_)), _) | (_, Some(Item::SetOp(_))));
        // FROM edits belong to the join step, set-op edits to the combining step
        e.step = match (set_op, plan.combine_step_of(b)) {
            (true, Some(c)) => Some(c),
            _ => plan.steps_of(b).map(|(block, join)| match (e.clause, join) {
                (Clause::From, Some(j)) => j,
                _ => block,
            }),
        };
    }
}

/// `canonicalize` shortcut used by both halves of the engine.
pub(crate) fn canon(q: &Query) -> Query {
    canonicalize(q)
}
