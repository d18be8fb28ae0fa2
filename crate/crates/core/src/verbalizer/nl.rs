//! Natural-language phrases for SQL fragments.

use crate::corpus::DatabaseSchema;
use crate::sql::{
    Aggregator, ArithOp, Atom, Col, ColumnExpr, ColumnRef, CompareOp, Condition, Direction, Join, Literal, Query,
    Value,
};

/// `snake_case` schema name as words.
pub fn words(name: &str) -> String {
    name.replace('_', " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) struct Phraser<'a> {
    pub schema: &'a DatabaseSchema,
    /// Tables in scope; a column is qualified when its name occurs in more
    /// than one of them.
    pub tables: Vec<String>,
    pub nested: &'a dyn Fn(&Query) -> String,
}

impl Phraser<'_> {
    pub fn column_ref(&self, c: &ColumnRef) -> String {
        let owners = self
            .tables
            .iter()
            .filter(|t| self.schema.column(t, &c.column).is_some())
            .count();
        if owners > 1 {
            format!("{} 's {}", words(&c.table), words(&c.column))
        } else {
            words(&c.column)
        }
    }

    fn col(&self, c: &Col) -> String {
        match c {
            Col::Star => "all columns".into(),
            Col::Column(r) => self.column_ref(r),
        }
    }

    pub fn expr(&self, e: &ColumnExpr) -> String {
        let mut inner = self.col(&e.column);
        if let Some((op, c2)) = &e.arithmetic {
            let w = match op {
                ArithOp::Add => "plus",
                ArithOp::Sub => "minus",
                ArithOp::Mul => "times",
                ArithOp::Div => "divided by",
            };
            inner = format!("{inner} {w} {}", self.col(c2));
        }
        let distinct = if e.distinct { "different " } else { "" };
        match (e.agg, &e.column) {
            (Aggregator::Count, Col::Star) if e.arithmetic.is_none() => "number of rows".into(),
            (Aggregator::Count, _) => format!("number of {distinct}{inner}"),
            (Aggregator::Max, _) => format!("maximum {distinct}{inner}"),
            (Aggregator::Min, _) => format!("minimum {distinct}{inner}"),
            (Aggregator::Avg, _) => format!("average {distinct}{inner}"),
            (Aggregator::Sum, _) => format!("sum of {distinct}{inner}"),
            (Aggregator::None, _) => format!("{distinct}{inner}"),
        }
    }

    pub fn exprs(&self, es: &[ColumnExpr]) -> String {
        es.iter().map(|e| self.expr(e)).collect::<Vec<_>>().join(" , ")
    }

    pub fn literal(&self, l: &Literal) -> String {
        l.text.clone()
    }

    pub fn atom(&self, a: &Atom) -> String {
        let lhs = self.expr(&a.operand);
        let rhs = match &a.value {
            Value::Literal(l) => self.literal(l),
            Value::List(items) => items.iter().map(|l| self.literal(l)).collect::<Vec<_>>().join(" , "),
            Value::Column(c) => self.column_ref(c),
            Value::Subquery(q) => (self.nested)(q),
        };
        let op = match a.op {
            CompareOp::Eq => "equals",
            CompareOp::Ne => "not equals",
            CompareOp::Lt => "less than",
            CompareOp::Gt => "greater than",
            CompareOp::Le => "less than or equals",
            CompareOp::Ge => "greater than or equals",
            CompareOp::Between => {
                let hi = a.second_value.as_ref().map(|l| self.literal(l)).unwrap_or_default();
                return format!("{lhs} between {rhs} and {hi}");
            }
            CompareOp::In => "one of",
            CompareOp::NotIn => "not one of",
            CompareOp::Like => "matches",
            CompareOp::NotLike => "does not match",
        };
        format!("{lhs} {op} {rhs}")
    }

    pub fn condition(&self, c: &Condition) -> String {
        match c {
            Condition::Atom(a) => self.atom(a),
            Condition::And(ch) | Condition::Or(ch) => {
                let conn = if matches!(c, Condition::And(_)) { " and " } else { " or " };
                ch.iter().map(|x| self.condition(x)).collect::<Vec<_>>().join(conn)
            }
        }
    }

    pub fn join(&self, j: &Join) -> String {
        format!("{} equals {}", self.column_ref(&j.left), self.column_ref(&j.right))
    }
}

pub fn direction(d: Direction) -> &'static str {
    match d {
        Direction::Asc => "ascending",
        Direction::Desc => "descending",
    }
}

pub fn extreme(d: Direction) -> &'static str {
    match d {
        Direction::Asc => "smallest",
        Direction::Desc => "largest",
    }
}

/// `a`, `a and b`, `a , b and c`.
pub fn list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(" , ")),
    }
}
