//! SQL rendering and canonicalization.

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Qualify {
    /// Always `table.column`.
    Always,
    /// Bare column names.
    Never,
    /// Qualify only when the enclosing block needs it.
    Context,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Style {
    pub qualify: Qualify,
    pub normalize_literals: bool,
}

impl Style {
    pub const SQL: Style = Style {
        qualify: Qualify::Context,
        normalize_literals: false,
    };
    pub const KEY: Style = Style {
        qualify: Qualify::Always,
        normalize_literals: true,
    };
    pub const DISPLAY: Style = Style {
        qualify: Qualify::Never,
        normalize_literals: false,
    };
}

/// Tables of the block a fragment is rendered in.
pub(crate) type Ctx<'a> = &'a [String];

fn needs_qualifier(style: Style, ctx: Ctx<'_>, c: &ColumnRef) -> bool {
    match style.qualify {
        Qualify::Always => true,
        Qualify::Never => false,
        Qualify::Context => {
            let distinct_tables = {
                let mut t: Vec<&String> = ctx.iter().collect();
                t.sort();
                t.dedup();
                t.len()
            };
            distinct_tables > 1 || !ctx.iter().any(|t| t == &c.table)
        }
    }
}

pub(crate) fn column_ref(c: &ColumnRef, style: Style, ctx: Ctx<'_>) -> String {
    if needs_qualifier(style, ctx, c) {
        format!("{}.{}", c.table, c.column)
    } else {
        c.column.clone()
    }
}

fn col(c: &Col, style: Style, ctx: Ctx<'_>) -> String {
    match c {
        Col::Star => "*".into(),
        Col::Column(r) => column_ref(r, style, ctx),
    }
}

pub(crate) fn column_expr(e: &ColumnExpr, style: Style, ctx: Ctx<'_>) -> String {
    let mut inner = String::new();
    if e.distinct {
        inner.push_str("DISTINCT ");
    }
    inner.push_str(&col(&e.column, style, ctx));
    if let Some((op, c2)) = &e.arithmetic {
        inner.push_str(&format!(" {} {}", op.symbol(), col(c2, style, ctx)));
    }
    match e.agg.keyword() {
        Some(kw) => format!("{kw}({inner})"),
        None => inner,
    }
}

pub(crate) fn literal(l: &Literal, style: Style) -> String {
    if style.normalize_literals {
        return l.key();
    }
    if l.quoted {
        if l.text.contains('"') {
            format!("'{}'", l.text.replace('\'', "''"))
        } else {
            format!("\"{}\"", l.text)
        }
    } else {
        l.text.clone()
    }
}

pub(crate) fn atom(a: &Atom, style: Style, ctx: Ctx<'_>) -> String {
    let lhs = column_expr(&a.operand, style, ctx);
    let rhs = match &a.value {
        Value::Literal(l) => literal(l, style),
        Value::List(items) => format!(
            "({})",
            items.iter().map(|l| literal(l, style)).collect::<Vec<_>>().join(", ")
        ),
        Value::Column(c) => column_ref(c, style, ctx),
        Value::Subquery(q) => format!("({})", query(q, style)),
    };
    match (&a.op, &a.second_value) {
        (CompareOp::Between, Some(hi)) => format!("{lhs} BETWEEN {rhs} AND {}", literal(hi, style)),
        (op, _) => format!("{lhs} {} {rhs}", op.sql()),
    }
}

pub(crate) fn condition(c: &Condition, style: Style, ctx: Ctx<'_>) -> String {
    match c {
        Condition::Atom(a) => atom(a, style, ctx),
        Condition::And(children) | Condition::Or(children) => {
            let conn = c.connector().expect("group").sql();
            children
                .iter()
                .map(|ch| match ch {
                    Condition::Atom(_) => condition(ch, style, ctx),
                    _ => format!("({})", condition(ch, style, ctx)),
                })
                .collect::<Vec<_>>()
                .join(&format!(" {conn} "))
        }
    }
}

pub(crate) fn join(j: &Join, style: Style, ctx: Ctx<'_>) -> String {
    format!("{} = {}", column_ref(&j.left, style, ctx), column_ref(&j.right, style, ctx))
}

pub(crate) fn order_limit(order_by: Option<&OrderBy>, limit: Option<u64>, style: Style, ctx: Ctx<'_>) -> String {
    let mut parts = Vec::new();
    if let Some(o) = order_by {
        let keys = o
            .keys
            .iter()
            .map(|k| column_expr(k, style, ctx))
            .collect::<Vec<_>>()
            .join(", ");
        parts.push(format!("ORDER BY {keys} {}", o.direction.sql()));
    }
    if let Some(n) = limit {
        parts.push(format!("LIMIT {n}"));
    }
    parts.join(" ")
}

/// Render a single block, ignoring its set-op chain.
pub(crate) fn block(q: &Query, style: Style) -> String {
    let ctx: Ctx<'_> = &q.from.tables;
    let mut out = String::from("SELECT ");
    if q.select.distinct {
        out.push_str("DISTINCT ");
    }
    out.push_str(
        &q.select
            .items
            .iter()
            .map(|e| column_expr(e, style, ctx))
            .collect::<Vec<_>>()
            .join(", "),
    );
    out.push_str(" FROM ");
    out.push_str(&q.from.tables.join(" JOIN "));
    if !q.from.joins.is_empty() {
        out.push_str(" ON ");
        out.push_str(
            &q.from
                .joins
                .iter()
                .map(|j| join(j, style, ctx))
                .collect::<Vec<_>>()
                .join(" AND "),
        );
    }
    if let Some(w) = &q.where_clause {
        out.push_str(" WHERE ");
        out.push_str(&condition(w, style, ctx));
    }
    if !q.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        out.push_str(
            &q.group_by
                .iter()
                .map(|c| column_ref(c, style, ctx))
                .collect::<Vec<_>>()
                .join(", "),
        );
    }
    if let Some(h) = &q.having {
        out.push_str(" HAVING ");
        out.push_str(&condition(h, style, ctx));
    }
    let ol = order_limit(q.order_by.as_ref(), q.limit, style, ctx);
    if !ol.is_empty() {
        out.push(' ');
        out.push_str(&ol);
    }
    out
}

pub(crate) fn query(q: &Query, style: Style) -> String {
    let mut out = block(q, style);
    if let Some(op) = &q.set_op {
        out.push_str(&format!(" {} {}", op.kind.sql(), query(&op.query, style)));
    }
    out
}

/// Rendering used to order clause items during canonicalization.
pub(crate) fn expr_key(e: &ColumnExpr) -> String {
    column_expr(e, Style::KEY, &[])
}

pub(crate) fn condition_key(c: &Condition) -> String {
    condition(c, Style::KEY, &[])
}

pub(crate) fn join_key(j: &Join) -> String {
    join(j, Style::KEY, &[])
}

pub(crate) fn canonicalize(q: &Query) -> Query {
    let mut items = q.select.items.clone();
    items.sort_by_cached_key(expr_key);

    let mut tables = q.from.tables.clone();
    tables.sort();
    let mut joins: Vec<Join> = q
        .from
        .joins
        .iter()
        .map(|j| {
            if j.left > j.right {
                Join {
                    left: j.right.clone(),
                    right: j.left.clone(),
                }
            } else {
                j.clone()
            }
        })
        .collect();
    joins.sort_by_cached_key(join_key);

    let mut group_by = q.group_by.clone();
    group_by.sort();

    Query {
        select: SelectClause {
            distinct: q.select.distinct,
            items,
        },
        from: FromClause { tables, joins },
        where_clause: q.where_clause.as_ref().map(canonical_condition),
        group_by,
        having: q.having.as_ref().map(canonical_condition),
        // key order is significant for ORDER BY
        order_by: q.order_by.clone(),
        limit: q.limit,
        set_op: q.set_op.as_ref().map(|op| SetOp {
            kind: op.kind,
            query: Box::new(canonicalize(&op.query)),
        }),
    }
}

pub(crate) fn canonical_condition(c: &Condition) -> Condition {
    match c {
        Condition::Atom(a) => {
            let mut a = a.clone();
            match &mut a.value {
                Value::Subquery(q) => **q = canonicalize(q),
                Value::List(items) => items.sort_by_cached_key(|l| l.key()),
                _ => {}
            }
            Condition::Atom(a)
        }
        Condition::And(_) | Condition::Or(_) => {
            let conn = c.connector().expect("group");
            let mut flat = Vec::new();
            flatten_into(c, conn, &mut flat);
            let mut children: Vec<Condition> = flat.iter().map(|c| canonical_condition(c)).collect();
            children.sort_by_cached_key(condition_key);
            Condition::from_children(conn, children).expect("group has children")
        }
    }
}

fn flatten_into<'a>(c: &'a Condition, conn: Connector, out: &mut Vec<&'a Condition>) {
    match c {
        Condition::And(ch) | Condition::Or(ch) if c.connector() == Some(conn) => {
            for x in ch {
                flatten_into(x, conn, out);
            }
        }
        other => out.push(other),
    }
}
