//! Clause-structured AST for the Spider subset of SQL.
//!
//! Identifiers are stored lowercased and fully resolved: the AST never
//! carries table aliases.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// A resolved `table.column` reference.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
        }
    }
}

/// Either a concrete column or `*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Col {
    Star,
    Column(ColumnRef),
}

impl Col {
    pub fn column(&self) -> Option<&ColumnRef> {
        match self {
            Col::Star => None,
            Col::Column(c) => Some(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    None,
    Max,
    Min,
    Count,
    Sum,
    Avg,
}

impl Aggregator {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Aggregator::None => None,
            Aggregator::Max => Some("max"),
            Aggregator::Min => Some("min"),
            Aggregator::Count => Some("count"),
            Aggregator::Sum => Some("sum"),
            Aggregator::Avg => Some("avg"),
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word.to_ascii_lowercase().as_str() {
            "max" => Some(Aggregator::Max),
            "min" => Some(Aggregator::Min),
            "count" => Some(Aggregator::Count),
            "sum" => Some(Aggregator::Sum),
            "avg" => Some(Aggregator::Avg),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

/// An optionally aggregated column expression: `agg(DISTINCT col op col2)`.
///
/// Used for select items, condition operands and ORDER BY keys.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnExpr {
    pub agg: Aggregator,
    pub distinct: bool,
    pub column: Col,
    pub arithmetic: Option<(ArithOp, Col)>,
}

impl ColumnExpr {
    pub fn plain(column: Col) -> Self {
        Self {
            agg: Aggregator::None,
            distinct: false,
            column,
            arithmetic: None,
        }
    }

    pub fn aggregated(agg: Aggregator, distinct: bool, column: Col) -> Self {
        Self {
            agg,
            distinct,
            column,
            arithmetic: None,
        }
    }
}

/// A literal value, kept verbatim (quotes stripped).
///
/// Equality is value-aware: numeric text compares numerically (so the
/// string `"8"` equals the number `8`) and other text compares
/// case-insensitively.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Literal {
    pub text: String,
    pub quoted: bool,
}

impl Literal {
    pub fn number(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            quoted: false,
        }
    }

    pub fn string(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            quoted: true,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        let t = self.text.trim();
        if t.is_empty() {
            return None;
        }
        t.parse::<f64>().ok().filter(|v| v.is_finite())
    }

    /// Normalized comparison key.
    pub fn key(&self) -> String {
        match self.as_number() {
            Some(v) => format!("{}", canonical_number(v)),
            None => format!("'{}'", self.text.to_lowercase()),
        }
    }
}

fn canonical_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Literal {}

impl Hash for Literal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Between,
    In,
    NotIn,
    Like,
    NotLike,
}

impl CompareOp {
    pub fn sql(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
            CompareOp::Between => "BETWEEN",
            CompareOp::In => "IN",
            CompareOp::NotIn => "NOT IN",
            CompareOp::Like => "LIKE",
            CompareOp::NotLike => "NOT LIKE",
        }
    }
}

/// Right-hand side of an atomic condition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Literal(Literal),
    List(Vec<Literal>),
    Column(ColumnRef),
    Subquery(Box<Query>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub operand: ColumnExpr,
    pub op: CompareOp,
    pub value: Value,
    /// Upper bound of a BETWEEN.
    pub second_value: Option<Literal>,
}

impl Atom {
    pub fn has_subquery(&self) -> bool {
        matches!(self.value, Value::Subquery(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connector {
    And,
    Or,
}

impl Connector {
    pub fn sql(self) -> &'static str {
        match self {
            Connector::And => "AND",
            Connector::Or => "OR",
        }
    }
}

/// Condition tree. `And`/`Or` nodes always hold at least two children.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Atom(Atom),
    And(Vec<Condition>),
    Or(Vec<Condition>),
}

impl Condition {
    pub fn connector(&self) -> Option<Connector> {
        match self {
            Condition::Atom(_) => None,
            Condition::And(_) => Some(Connector::And),
            Condition::Or(_) => Some(Connector::Or),
        }
    }

    /// Top-level children: a single atom is its own only child.
    pub fn children(&self) -> Vec<&Condition> {
        match self {
            Condition::Atom(_) => vec![self],
            Condition::And(c) | Condition::Or(c) => c.iter().collect(),
        }
    }

    /// Build a tree from top-level children, collapsing degenerate cases.
    pub fn from_children(connector: Connector, mut children: Vec<Condition>) -> Option<Condition> {
        match children.len() {
            0 => None,
            1 => children.pop(),
            _ => Some(match connector {
                Connector::And => Condition::And(children),
                Connector::Or => Condition::Or(children),
            }),
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Condition::Atom(a) => out.push(a),
            Condition::And(c) | Condition::Or(c) => c.iter().for_each(|x| x.collect_atoms(out)),
        }
    }

    pub fn has_subquery(&self) -> bool {
        self.atoms().iter().any(|a| a.has_subquery())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Asc,
    Desc,
}

impl Direction {
    pub fn sql(self) -> &'static str {
        match self {
            Direction::Asc => "ASC",
            Direction::Desc => "DESC",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderBy {
    pub keys: Vec<ColumnExpr>,
    pub direction: Direction,
}

/// Equality join condition `left = right`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Join {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FromClause {
    pub tables: Vec<String>,
    pub joins: Vec<Join>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectClause {
    pub distinct: bool,
    pub items: Vec<ColumnExpr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetOpKind {
    Union,
    Intersect,
    Except,
}

impl SetOpKind {
    pub fn sql(self) -> &'static str {
        match self {
            SetOpKind::Union => "UNION",
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

impl fmt::Display for SetOpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sql())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetOp {
    pub kind: SetOpKind,
    pub query: Box<Query>,
}

/// One SELECT block plus an optional set operation chaining the next block.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub select: SelectClause,
    pub from: FromClause,
    pub where_clause: Option<Condition>,
    pub group_by: Vec<ColumnRef>,
    pub having: Option<Condition>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
    pub set_op: Option<SetOp>,
}

impl Query {
    /// Nested queries appearing as condition values in this block (WHERE
    /// first, then HAVING), in tree order. Does not descend into the set-op
    /// chain.
    pub fn nested_subqueries(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        for cond in [&self.where_clause, &self.having].into_iter().flatten() {
            for atom in cond.atoms() {
                if let Value::Subquery(q) = &atom.value {
                    out.push(q.as_ref());
                }
            }
        }
        out
    }

    /// The blocks of the set-op chain, starting with `self`.
    pub fn chain(&self) -> Vec<&Query> {
        let mut out = vec![self];
        let mut cur = self;
        while let Some(op) = &cur.set_op {
            cur = &op.query;
            out.push(cur);
        }
        out
    }

    /// Mutable access to the block at `depth` along the set-op chain.
    pub fn chain_block_mut(&mut self, depth: usize) -> Option<&mut Query> {
        let mut cur = self;
        for _ in 0..depth {
            cur = cur.set_op.as_mut()?.query.as_mut();
        }
        Some(cur)
    }

    /// Copy of this block with the set-op chain cut off.
    pub fn block(&self) -> Query {
        Query {
            set_op: None,
            ..self.clone()
        }
    }
}
