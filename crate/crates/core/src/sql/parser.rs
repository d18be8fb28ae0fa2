//! Recursive-descent parser for the Spider SQL subset with schema binding.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SqlError;
use crate::corpus::DatabaseSchema;

const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "union", "intersect",
    "except", "join", "inner", "on", "as", "and", "or", "not", "in", "like", "between", "asc",
    "desc", "distinct", "left", "right", "outer", "cross",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Column reference before binding.
#[derive(Clone, Debug)]
struct RawCol {
    qualifier: Option<String>,
    name: String,
    pos: usize,
}

#[derive(Clone, Debug)]
enum RawColOrStar {
    Star,
    Col(RawCol),
}

#[derive(Clone, Debug)]
struct RawExpr {
    agg: Aggregator,
    distinct: bool,
    column: RawColOrStar,
    arithmetic: Option<(ArithOp, RawColOrStar)>,
}

/// Name-resolution scope of one SELECT block.
struct Scope<'p> {
    /// (alias or table name, resolved table), both lowercased.
    bindings: Vec<(String, String)>,
    parent: Option<&'p Scope<'p>>,
}

pub(crate) struct Parser<'s> {
    tokens: Vec<Token>,
    idx: usize,
    end: usize,
    schema: &'s DatabaseSchema,
}

pub(crate) fn parse(text: &str, schema: &DatabaseSchema) -> Result<Query, SqlError> {
    if text.trim().is_empty() {
        return Err(SqlError::Syntax {
            position: 0,
            message: "empty query".into(),
        });
    }
    let tokens = tokenize(text)?;
    let mut p = Parser {
        end: text.len(),
        tokens,
        idx: 0,
        schema,
    };
    let q = p.query(None)?;
    while p.peek_is(|t| matches!(t, Tok::Semi)) {
        p.idx += 1;
    }
    if let Some(t) = p.tokens.get(p.idx) {
        return Err(SqlError::Syntax {
            position: t.pos,
            message: format!("unexpected token '{}' after end of query", t.describe()),
        });
    }
    Ok(q)
}

impl<'s> Parser<'s> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    fn peek_is(&self, f: impl Fn(&Tok) -> bool) -> bool {
        self.peek().map(|t| f(&t.tok)).unwrap_or(false)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        self.peek().map(|t| t.is_keyword(kw)).unwrap_or(false)
    }

    fn peek_kw_at(&self, offset: usize, kw: &str) -> bool {
        self.tokens
            .get(self.idx + offset)
            .map(|t| t.is_keyword(kw))
            .unwrap_or(false)
    }

    fn pos(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        let found = self
            .peek()
            .map(|t| format!("'{}'", t.describe()))
            .unwrap_or_else(|| "end of input".into());
        Err(SqlError::Syntax {
            position: self.pos(),
            message: format!("{}, found {}", message.into(), found),
        })
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected {}", kw.to_uppercase()))
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek_is(|t| *t == tok) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SqlError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), SqlError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s),
                pos,
            }) if !is_reserved(s) => {
                let out = (s.to_lowercase(), *pos);
                self.idx += 1;
                Ok(out)
            }
            _ => self.error(format!("expected {what}")),
        }
    }

    fn query(&mut self, parent: Option<&Scope<'_>>) -> Result<Query, SqlError> {
        self.expect_kw("select")?;
        let distinct = self.eat_kw("distinct");
        let mut raw_items = vec![self.select_item()?];
        while self.eat(Tok::Comma) {
            raw_items.push(self.select_item()?);
        }

        self.expect_kw("from")?;
        let (tables, raw_joins, bindings) = self.from_clause()?;
        let scope = Scope { bindings, parent };

        let items = raw_items
            .iter()
            .map(|r| self.bind_expr(r, &scope))
            .collect::<Result<Vec<_>, _>>()?;
        let joins = raw_joins
            .iter()
            .map(|(l, r)| {
                Ok(Join {
                    left: self.bind_col(l, &scope)?,
                    right: self.bind_col(r, &scope)?,
                })
            })
            .collect::<Result<Vec<_>, SqlError>>()?;

        let mut q = Query {
            select: SelectClause { distinct, items },
            from: FromClause { tables, joins },
            ..Query::default()
        };

        if self.eat_kw("where") {
            q.where_clause = Some(self.condition(&scope)?);
        }
        if self.peek_kw("group") {
            self.idx += 1;
            self.expect_kw("by")?;
            loop {
                let raw = self.raw_col()?;
                q.group_by.push(self.bind_col(&raw, &scope)?);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        if self.eat_kw("having") {
            q.having = Some(self.condition(&scope)?);
        }
        if self.peek_kw("order") {
            self.idx += 1;
            self.expect_kw("by")?;
            let mut keys = Vec::new();
            let mut direction: Option<Direction> = None;
            loop {
                let raw = self.value_expr()?;
                keys.push(self.bind_expr(&raw, &scope)?);
                let dir_pos = self.pos();
                let dir = if self.eat_kw("desc") {
                    Some(Direction::Desc)
                } else if self.eat_kw("asc") {
                    Some(Direction::Asc)
                } else {
                    None
                };
                if let Some(d) = dir {
                    if direction.is_some_and(|prev| prev != d) {
                        return Err(SqlError::Syntax {
                            position: dir_pos,
                            message: "mixed ORDER BY directions are outside the supported grammar".into(),
                        });
                    }
                    direction = Some(d);
                }
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
            q.order_by = Some(OrderBy {
                keys,
                direction: direction.unwrap_or(Direction::Asc),
            });
        }
        if self.eat_kw("limit") {
            match self.peek() {
                Some(Token {
                    tok: Tok::Number(n),
                    pos,
                }) => {
                    let pos = *pos;
                    let v = n.parse::<u64>().map_err(|_| SqlError::Syntax {
                        position: pos,
                        message: format!("LIMIT expects a non-negative integer, found '{n}'"),
                    })?;
                    self.idx += 1;
                    q.limit = Some(v);
                }
                _ => return self.error("expected LIMIT count"),
            }
        }

        let kind = if self.eat_kw("union") {
            Some(SetOpKind::Union)
        } else if self.eat_kw("intersect") {
            Some(SetOpKind::Intersect)
        } else if self.eat_kw("except") {
            Some(SetOpKind::Except)
        } else {
            None
        };
        if let Some(kind) = kind {
            let right = self.query(parent)?;
            q.set_op = Some(SetOp {
                kind,
                query: Box::new(right),
            });
        }
        Ok(q)
    }

    #[allow(clippy::type_complexity)]
    fn from_clause(&mut self) -> Result<(Vec<String>, Vec<(RawCol, RawCol)>, Vec<(String, String)>), SqlError> {
        let mut tables = Vec::new();
        let mut joins = Vec::new();
        let mut bindings = Vec::new();
        loop {
            if self.peek_is(|t| matches!(t, Tok::LParen)) {
                return self.error("subqueries in FROM are outside the supported grammar; expected table name");
            }
            let (name, pos) = self.ident("table name")?;
            let table = match self.schema.table(&name) {
                Some(t) => t.name.to_lowercase(),
                None => {
                    return Err(SqlError::Binding {
                        position: pos,
                        identifier: name,
                        message: "unknown table".into(),
                    })
                }
            };
            let alias = if self.eat_kw("as") {
                Some(self.ident("table alias")?.0)
            } else if self.peek_is(|t| matches!(t, Tok::Ident(s) if !is_reserved(s))) {
                Some(self.ident("table alias")?.0)
            } else {
                None
            };
            bindings.push((table.clone(), table.clone()));
            if let Some(a) = alias {
                bindings.push((a, table.clone()));
            }
            tables.push(table);

            if self.eat_kw("on") {
                loop {
                    let l = self.raw_col()?;
                    self.expect(Tok::Eq, "'=' in join condition")?;
                    let r = self.raw_col()?;
                    joins.push((l, r));
                    if !self.eat_kw("and") {
                        break;
                    }
                }
            }

            if self.eat(Tok::Comma) {
                continue;
            }
            if self.peek_kw("join") {
                self.idx += 1;
                continue;
            }
            if self.peek_kw("inner") && self.peek_kw_at(1, "join") {
                self.idx += 2;
                continue;
            }
            break;
        }
        Ok((tables, joins, bindings))
    }

    fn raw_col(&mut self) -> Result<RawCol, SqlError> {
        let (first, pos) = self.ident("column name")?;
        if self.eat(Tok::Dot) {
            let (second, _) = self.ident("column name after '.'")?;
            Ok(RawCol {
                qualifier: Some(first),
                name: second,
                pos,
            })
        } else {
            Ok(RawCol {
                qualifier: None,
                name: first,
                pos,
            })
        }
    }

    fn col_or_star(&mut self) -> Result<RawColOrStar, SqlError> {
        if self.eat(Tok::Star) {
            Ok(RawColOrStar::Star)
        } else {
            Ok(RawColOrStar::Col(self.raw_col()?))
        }
    }

    fn arith_op(&mut self) -> Option<ArithOp> {
        let op = match self.peek().map(|t| &t.tok) {
            Some(Tok::Plus) => ArithOp::Add,
            Some(Tok::Minus) => ArithOp::Sub,
            Some(Tok::Star) => ArithOp::Mul,
            Some(Tok::Slash) => ArithOp::Div,
            _ => return None,
        };
        self.idx += 1;
        Some(op)
    }

    /// `agg ( [DISTINCT] col [op col] )` or `col [op col]`.
    fn value_expr(&mut self) -> Result<RawExpr, SqlError> {
        let agg = match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. })
                if Aggregator::from_keyword(s).is_some()
                    && matches!(self.tokens.get(self.idx + 1).map(|t| &t.tok), Some(Tok::LParen)) =>
            {
                Aggregator::from_keyword(s)
            }
            _ => None,
        };
        if let Some(agg) = agg {
            self.idx += 2;
            let distinct = self.eat_kw("distinct");
            let column = self.col_or_star()?;
            let arithmetic = match self.arith_op() {
                Some(op) => Some((op, self.col_or_star()?)),
                None => None,
            };
            self.expect(Tok::RParen, "')' closing aggregate")?;
            return Ok(RawExpr {
                agg,
                distinct,
                column,
                arithmetic,
            });
        }
        if self.peek_is(|t| matches!(t, Tok::Star)) {
            self.idx += 1;
            return Ok(RawExpr {
                agg: Aggregator::None,
                distinct: false,
                column: RawColOrStar::Star,
                arithmetic: None,
            });
        }
        if !self.peek_is(|t| matches!(t, Tok::Ident(s) if !is_reserved(s))) {
            return self.error("expected select item");
        }
        let column = RawColOrStar::Col(self.raw_col()?);
        let arithmetic = match self.arith_op() {
            Some(op) => Some((op, RawColOrStar::Col(self.raw_col()?))),
            None => None,
        };
        Ok(RawExpr {
            agg: Aggregator::None,
            distinct: false,
            column,
            arithmetic,
        })
    }

    fn select_item(&mut self) -> Result<RawExpr, SqlError> {
        let e = self.value_expr()?;
        if self.eat_kw("as") {
            self.ident("column alias")?;
        }
        Ok(e)
    }

    fn condition(&mut self, scope: &Scope<'_>) -> Result<Condition, SqlError> {
        let mut parts = vec![self.and_condition(scope)?];
        while self.eat_kw("or") {
            parts.push(self.and_condition(scope)?);
        }
        Ok(Condition::from_children(Connector::Or, parts).expect("non-empty"))
    }

    fn and_condition(&mut self, scope: &Scope<'_>) -> Result<Condition, SqlError> {
        let mut parts = vec![self.primary_condition(scope)?];
        while self.eat_kw("and") {
            parts.push(self.primary_condition(scope)?);
        }
        Ok(Condition::from_children(Connector::And, parts).expect("non-empty"))
    }

    fn primary_condition(&mut self, scope: &Scope<'_>) -> Result<Condition, SqlError> {
        if self.peek_is(|t| matches!(t, Tok::LParen)) {
            self.idx += 1;
            let c = self.condition(scope)?;
            self.expect(Tok::RParen, "')' closing condition group")?;
            return Ok(c);
        }
        let raw = self.value_expr()?;
        let operand = self.bind_expr(&raw, scope)?;
        let negated = self.eat_kw("not");
        let op_pos = self.pos();
        let op = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Eq) => CompareOp::Eq,
            Some(Tok::Ne) => CompareOp::Ne,
            Some(Tok::Lt) => CompareOp::Lt,
            Some(Tok::Gt) => CompareOp::Gt,
            Some(Tok::Le) => CompareOp::Le,
            Some(Tok::Ge) => CompareOp::Ge,
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("between") => CompareOp::Between,
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("in") => CompareOp::In,
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("like") => CompareOp::Like,
            _ => return self.error("expected comparison operator"),
        };
        self.idx += 1;
        let op = match (negated, op) {
            (false, op) => op,
            (true, CompareOp::In) => CompareOp::NotIn,
            (true, CompareOp::Like) => CompareOp::NotLike,
            (true, _) => {
                return Err(SqlError::Syntax {
                    position: op_pos,
                    message: "NOT is only supported before IN or LIKE".into(),
                })
            }
        };

        let (value, second_value) = match op {
            CompareOp::Between => {
                let lo = self.literal()?;
                self.expect_kw("and")?;
                let hi = self.literal()?;
                (Value::Literal(lo), Some(hi))
            }
            CompareOp::In | CompareOp::NotIn => {
                self.expect(Tok::LParen, "'(' after IN")?;
                let v = if self.peek_kw("select") {
                    Value::Subquery(Box::new(self.query(Some(scope))?))
                } else {
                    let mut list = vec![self.literal()?];
                    while self.eat(Tok::Comma) {
                        list.push(self.literal()?);
                    }
                    Value::List(list)
                };
                self.expect(Tok::RParen, "')' closing IN list")?;
                (v, None)
            }
            _ => (self.comparison_value(scope)?, None),
        };
        Ok(Condition::Atom(Atom {
            operand,
            op,
            value,
            second_value,
        }))
    }

    fn comparison_value(&mut self, scope: &Scope<'_>) -> Result<Value, SqlError> {
        if self.peek_is(|t| matches!(t, Tok::LParen)) {
            self.idx += 1;
            if !self.peek_kw("select") {
                return self.error("expected SELECT in parenthesized value");
            }
            let q = self.query(Some(scope))?;
            self.expect(Tok::RParen, "')' closing subquery")?;
            return Ok(Value::Subquery(Box::new(q)));
        }
        if self.peek_is(|t| matches!(t, Tok::Ident(s) if !is_reserved(s))) {
            let raw = self.raw_col()?;
            return Ok(Value::Column(self.bind_col(&raw, scope)?));
        }
        Ok(Value::Literal(self.literal()?))
    }

    fn literal(&mut self) -> Result<Literal, SqlError> {
        let neg = self.eat(Tok::Minus);
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Number(n)) => {
                self.idx += 1;
                Ok(Literal::number(if neg { format!("-{n}") } else { n }))
            }
            Some(Tok::Str(s)) if !neg => {
                self.idx += 1;
                Ok(Literal::string(s))
            }
            _ => self.error("expected literal value"),
        }
    }

    fn bind_expr(&self, raw: &RawExpr, scope: &Scope<'_>) -> Result<ColumnExpr, SqlError> {
        let bind = |c: &RawColOrStar| -> Result<Col, SqlError> {
            match c {
                RawColOrStar::Star => Ok(Col::Star),
                RawColOrStar::Col(rc) => Ok(Col::Column(self.bind_col(rc, scope)?)),
            }
        };
        Ok(ColumnExpr {
            agg: raw.agg,
            distinct: raw.distinct,
            column: bind(&raw.column)?,
            arithmetic: match &raw.arithmetic {
                Some((op, c)) => Some((*op, bind(c)?)),
                None => None,
            },
        })
    }

    fn bind_col(&self, raw: &RawCol, scope: &Scope<'_>) -> Result<ColumnRef, SqlError> {
        let mut cur = Some(scope);
        match &raw.qualifier {
            Some(q) => {
                while let Some(s) = cur {
                    if let Some((_, table)) = s.bindings.iter().find(|(a, _)| a == q) {
                        return self.check_column(table, raw);
                    }
                    cur = s.parent;
                }
                Err(SqlError::Binding {
                    position: raw.pos,
                    identifier: q.clone(),
                    message: "unknown table or alias".into(),
                })
            }
            None => {
                while let Some(s) = cur {
                    for (_, table) in &s.bindings {
                        if self
                            .schema
                            .table(table)
                            .is_some_and(|t| t.column(&raw.name).is_some())
                        {
                            return Ok(ColumnRef::new(table.clone(), raw.name.clone()));
                        }
                    }
                    cur = s.parent;
                }
                Err(SqlError::Binding {
                    position: raw.pos,
                    identifier: raw.name.clone(),
                    message: "column not found in any table in scope".into(),
                })
            }
        }
    }

    fn check_column(&self, table: &str, raw: &RawCol) -> Result<ColumnRef, SqlError> {
        match self.schema.table(table).and_then(|t| t.column(&raw.name)) {
            Some(_) => Ok(ColumnRef::new(table, raw.name.clone())),
            None => Err(SqlError::Binding {
                position: raw.pos,
                identifier: format!("{table}.{}", raw.name),
                message: "unknown column".into(),
            }),
        }
    }
}
