//! Template feedback: one templated sentence per edit, split into primary
//! and secondary spans.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nl::{self, Phraser};
use crate::corpus::DatabaseSchema;
use crate::edit_engine::{Clause, Edit, EditKind, EditScript, Flip, Item};
use crate::sql::{Condition, Connector, Query, SetOpKind};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanClass {
    Primary,
    Secondary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub text: String,
    pub class: SpanClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateFeedback {
    pub spans: Vec<Span>,
    pub source_edits: EditScript,
}

impl TemplateFeedback {
    pub fn text(&self) -> String {
        self.spans.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    /// Tokens of [`text`](Self::text), each with the class of its span.
    pub fn tokens(&self) -> Vec<(String, SpanClass)> {
        self.spans
            .iter()
            .flat_map(|s| tokenize(&s.text).into_iter().map(move |t| (t, s.class)))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("no template covers {0}")]
    UnsupportedEdit(String),
    #[error("cannot verbalize an empty edit script")]
    EmptyScript,
    #[error("template inventory has no entry '{0}'")]
    MissingTemplate(String),
    #[error("template '{0}' produced no primary span")]
    NoPrimary(String),
    #[error("invalid template inventory: {0}")]
    Inventory(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPattern {
    pub span: SpanClass,
    pub text: String,
}

/// Template id → span patterns with `[placeholder]` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateInventory {
    pub version: u32,
    pub step_prefix: String,
    pub templates: BTreeMap<String, Vec<SpanPattern>>,
}

const BUILTIN: &str = include_str!("../../data/templates.json");

impl TemplateInventory {
    pub fn builtin() -> &'static TemplateInventory {
        static INV: OnceLock<TemplateInventory> = OnceLock::new();
        INV.get_or_init(|| Self::from_json(BUILTIN).expect("bundled templates parse"))
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        serde_json::from_str(text).map_err(|e| TemplateError::Inventory(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Inventory(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Substitute `[name]` slots; `None` if any slot has no value.
fn fill(pattern: &str, vars: &Vars) -> Option<String> {
    let mut out = String::with_capacity(pattern.len() + 32);
    let mut rest = pattern;
    while let Some(open) = rest.find('[') {
        let close = open + rest[open..].find(']')?;
        out.push_str(&rest[..open]);
        out.push_str(vars.get(&rest[open + 1..close])?);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Some(out.split_whitespace().collect::<Vec<_>>().join(" "))
}

pub fn template_feedback(script: &EditScript, schema: &DatabaseSchema) -> Result<TemplateFeedback, TemplateError> {
    template_feedback_with(script, schema, TemplateInventory::builtin())
}

pub fn template_feedback_with(
    script: &EditScript,
    schema: &DatabaseSchema,
    inv: &TemplateInventory,
) -> Result<TemplateFeedback, TemplateError> {
    if script.is_empty() {
        return Err(TemplateError::EmptyScript);
    }
    let mut spans = Vec::new();
    let mut prev_step = None;
    for edit in &script.edits {
        let (id, vars) = instantiate(edit, schema)?;
        let patterns = inv.templates.get(id).ok_or_else(|| TemplateError::MissingTemplate(id.into()))?;
        let mut sentence: Vec<Span> = patterns
            .iter()
            .filter_map(|p| {
                fill(&p.text, &vars).map(|text| Span {
                    text,
                    class: p.span,
                })
            })
            .filter(|s| !s.text.is_empty())
            .collect();
        if !sentence.iter().any(|s| s.class == SpanClass::Primary) {
            return Err(TemplateError::NoPrimary(id.into()));
        }
        let last = sentence.last_mut().expect("non-empty");
        if !last.text.ends_with('.') {
            last.text.push_str(" .");
        }
        if edit.step.is_some() && edit.step != prev_step {
            let mut v = Vars::new();
            v.insert("step".into(), edit.step.unwrap_or_default().to_string());
            if let Some(text) = fill(&inv.step_prefix, &v) {
                spans.push(Span {
                    text,
                    class: SpanClass::Primary,
                });
            }
        }
        prev_step = edit.step;
        spans.extend(sentence);
    }
    Ok(TemplateFeedback {
        spans,
        source_edits: script.clone(),
    })
}

fn set_op_phrase(k: SetOpKind) -> &'static str {
    match k {
        SetOpKind::Union => "either of the two results",
        SetOpKind::Intersect => "both of the two results",
        SetOpKind::Except => "the first result but not the second",
    }
}

type Vars = BTreeMap<String, String>;

fn instantiate(e: &Edit, schema: &DatabaseSchema) -> Result<(&'static str, Vars), TemplateError> {
    let mut tables = e.context.wrong_tables.clone();
    for t in &e.context.gold_tables {
        if !tables.contains(t) {
            tables.push(t.clone());
        }
    }
    let nested = |_: &Query| "the results of a nested query".to_string();
    let p = Phraser {
        schema,
        tables,
        nested: &nested,
    };
    let unsupported = || TemplateError::UnsupportedEdit(e.linearize());

    let mut v = Vars::new();
    let (old, new) = (e.old.as_ref(), e.new.as_ref());
    // slot suffixes for the old and new item under this edit kind
    let (old_slot, new_slot) = match e.kind {
        EditKind::Replace => ("wrong", "correct"),
        _ => ("old", "new"),
    };
    let by_kind = |replace, add, remove| match e.kind {
        EditKind::Replace => Ok(replace),
        EditKind::Add => Ok(add),
        EditKind::Remove => Ok(remove),
        EditKind::Flip => Err(unsupported()),
    };
    let put = |v: &mut Vars, prefix: &str, slot: &str, value: String| {
        v.insert(format!("{prefix}_{slot}"), value);
    };

    let id = match (e.clause, e.kind, old.or(new)) {
        (Clause::Subquery, EditKind::Flip, _) => match e.flip {
            Some(Flip::SetOp { from, to }) => {
                put(&mut v, "setop", "wrong", set_op_phrase(from).into());
                put(&mut v, "setop", "correct", set_op_phrase(to).into());
                "setop.flip"
            }
            _ => return Err(unsupported()),
        },
        (Clause::Subquery, _, _) => return Err(unsupported()),
        (Clause::LogicConnector, _, _) => match e.flip {
            Some(Flip::Connector {
                from: Connector::And,
                to: Connector::Or,
                ..
            }) => "connector.and_to_or",
            Some(Flip::Connector {
                from: Connector::Or,
                to: Connector::And,
                ..
            }) => "connector.or_to_and",
            _ => return Err(unsupported()),
        },
        (_, EditKind::Add, Some(Item::Distinct)) => "distinct.add",
        (_, EditKind::Remove, Some(Item::Distinct)) => "distinct.remove",
        (Clause::From, _, Some(Item::Table(_))) => {
            for (slot, item) in [(old_slot, old), (new_slot, new)] {
                if let Some(Item::Table(t)) = item {
                    put(&mut v, "tab", slot, nl::words(t));
                }
            }
            if e.kind == EditKind::Add && !e.context.wrong_tables.is_empty() {
                let olds: Vec<String> = e.context.wrong_tables.iter().map(|t| nl::words(t)).collect();
                put(&mut v, "tab", "old", nl::list(&olds));
            }
            by_kind("from.replace", "from.add", "from.remove")?
        }
        (Clause::From, _, Some(Item::Join(_))) => {
            for (slot, item) in [(old_slot, old), (new_slot, new)] {
                if let Some(Item::Join(j)) = item {
                    put(&mut v, "join", slot, p.join(j));
                }
            }
            by_kind("join.replace", "join.add", "join.remove")?
        }
        (Clause::Select, _, Some(Item::Select(_))) => {
            for (slot, item) in [(old_slot, old), (new_slot, new)] {
                if let Some(Item::Select(x)) = item {
                    put(&mut v, "col", slot, p.expr(x));
                }
            }
            by_kind("select.replace", "select.add", "select.remove")?
        }
        (Clause::Where | Clause::Having, _, Some(Item::Condition(_))) => {
            let having = e.clause == Clause::Having;
            if let (true, Some(Item::Condition(Condition::Atom(a))), Some(Item::Condition(Condition::Atom(b)))) =
                (having && e.kind == EditKind::Replace, old, new)
            {
                if a.op == b.op && a.value == b.value && a.second_value == b.second_value {
                    put(&mut v, "opd", "wrong", p.expr(&a.operand));
                    put(&mut v, "opd", "correct", p.expr(&b.operand));
                    return Ok(("having.replace_operand", v));
                }
            }
            for (slot, item) in [(old_slot, old), (new_slot, new)] {
                if let Some(Item::Condition(c)) = item {
                    put(&mut v, "cond", slot, p.condition(c));
                }
            }
            if having {
                by_kind("having.replace", "having.add", "having.remove")?
            } else {
                by_kind("where.replace", "where.add", "where.remove")?
            }
        }
        (Clause::GroupBy, _, Some(Item::GroupBy(_))) => {
            for (slot, item) in [(old_slot, old), (new_slot, new)] {
                if let Some(Item::GroupBy(c)) = item {
                    put(&mut v, "col", slot, p.column_ref(c));
                }
            }
            by_kind("group_by.replace", "group_by.add", "group_by.remove")?
        }
        (Clause::OrderLimit, EditKind::Flip, _) => match e.flip {
            Some(Flip::Direction { from, to }) if !e.context.order_keys.is_empty() => {
                put(&mut v, "dir", "wrong", nl::direction(from).into());
                put(&mut v, "dir", "correct", nl::direction(to).into());
                put(&mut v, "col", "correct", p.exprs(&e.context.order_keys));
                "order.flip"
            }
            _ => return Err(unsupported()),
        },
        (Clause::OrderLimit, _, Some(Item::OrderLimit { .. })) => {
            let mut gold_shape = None;
            for (slot, item) in [(old_slot, old), (new_slot, new)] {
                let Some(Item::OrderLimit { order_by, limit }) = item else {
                    continue;
                };
                if let Some(o) = order_by {
                    put(&mut v, "dir", slot, nl::direction(o.direction).into());
                    put(&mut v, "col", slot, p.exprs(&o.keys));
                    put(&mut v, "extreme", slot, nl::extreme(o.direction).into());
                }
                let tail = match limit {
                    Some(n) if order_by.is_some() => format!(" and keep the first {n} results"),
                    _ => String::new(),
                };
                put(&mut v, "limit", slot, tail);
                if let Some(n) = limit {
                    put(&mut v, "n", "new", n.to_string());
                }
                if slot == new_slot {
                    gold_shape = Some((order_by.is_some(), *limit));
                }
            }
            match (e.kind, gold_shape) {
                (EditKind::Remove, _) => "order.remove",
                (EditKind::Add, Some((true, Some(1)))) => "order.add_top1",
                (EditKind::Replace, Some((true, Some(1)))) => "order.replace_top1",
                (EditKind::Add, Some((true, _))) => "order.add",
                (EditKind::Replace, Some((true, _))) => "order.replace",
                (_, Some((false, Some(_)))) => "order.add_limit",
                _ => return Err(unsupported()),
            }
        }
        _ => return Err(unsupported()),
    };
    Ok((id, v))
}
