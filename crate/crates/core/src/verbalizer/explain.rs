//! Step-wise explanations of a query.

use serde::{Deserialize, Serialize};

use super::nl::{self, Phraser};
use crate::corpus::DatabaseSchema;
use crate::sql::render::{self, Style};
use crate::sql::{Aggregator, Col, PlanStep, Query, QueryPlan, SetOpKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Join,
    Block,
    Combine,
}

/// What an explanation step describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRef {
    pub kind: StepKind,
    /// The block's SQL (without its set-op tail), or the set operator.
    pub sql: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    /// One entry per step; prefixed with `Step k:` when there are several.
    pub steps: Vec<String>,
    pub step_refs: Vec<StepRef>,
}

impl Explanation {
    pub fn text(&self) -> String {
        self.steps.join(" ")
    }
}

fn results_of(step: usize) -> String {
    format!("the results of step {step}")
}

pub fn explain(ast: &Query, schema: &DatabaseSchema) -> Explanation {
    let plan = QueryPlan::new(ast);
    let nested = |q: &Query| match plan.result_of(q) {
        Some(s) => results_of(s),
        None => "the results of a nested query".into(),
    };
    let mut steps = Vec::with_capacity(plan.steps.len());
    let mut refs = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        match step {
            PlanStep::Join { query } => {
                let t: Vec<String> = query.from.tables.iter().map(|t| format!("{} table", nl::words(t))).collect();
                let rest: Vec<String> = t[1..].iter().map(|x| format!("in {x}")).collect();
                steps.push(format!(
                    "for each row in {} , find the corresponding rows {}",
                    t[0],
                    rest.join(" and ")
                ));
                refs.push(StepRef {
                    kind: StepKind::Join,
                    sql: render::query(&query.block(), Style::SQL),
                });
            }
            PlanStep::Block { query, join_step, .. } => {
                let p = Phraser {
                    schema,
                    tables: query.from.tables.clone(),
                    nested: &nested,
                };
                steps.push(block_step(query, *join_step, &p));
                refs.push(StepRef {
                    kind: StepKind::Block,
                    sql: render::query(&query.block(), Style::SQL),
                });
            }
            PlanStep::Combine { kind, left, right } => {
                let (l, r) = (results_of(*left), results_of(*right));
                steps.push(match kind {
                    SetOpKind::Union => format!("show the rows that are in either {l} or {r}"),
                    SetOpKind::Intersect => format!("show the rows that are in both {l} and {r}"),
                    SetOpKind::Except => format!("show the rows that are in {l} but not in {r}"),
                });
                refs.push(StepRef {
                    kind: StepKind::Combine,
                    sql: kind.sql().into(),
                });
            }
        }
    }
    if steps.len() > 1 {
        for (i, s) in steps.iter_mut().enumerate() {
            *s = format!("Step {}: {s}", i + 1);
        }
    }
    Explanation { steps, step_refs: refs }
}

fn block_step(q: &Query, join_step: Option<usize>, p: &Phraser<'_>) -> String {
    let source = match join_step {
        Some(s) => results_of(s),
        None => format!("{} table", nl::words(&q.from.tables[0])),
    };
    let count_rows = matches!(
        q.select.items.as_slice(),
        [e] if e.agg == Aggregator::Count && e.column == Col::Star && e.arithmetic.is_none() && !e.distinct
    );
    let mut out = if count_rows {
        format!("find the number of rows in {source}")
    } else {
        let distinct = if q.select.distinct { "different " } else { "" };
        format!("find the {distinct}{} of {source}", p.exprs(&q.select.items))
    };
    if let Some(w) = &q.where_clause {
        out.push_str(&format!(" whose {}", p.condition(w)));
    }
    if !q.group_by.is_empty() {
        let cols: Vec<String> = q.group_by.iter().map(|c| p.column_ref(c)).collect();
        out.push_str(&format!(" for each value of {}", nl::list(&cols)));
    }
    if let Some(h) = &q.having {
        out.push_str(&format!(" and keep the groups whose {}", p.condition(h)));
    }
    match (&q.order_by, q.limit) {
        (Some(o), Some(1)) => out.push_str(&format!(" with the {} {}", nl::extreme(o.direction), p.exprs(&o.keys))),
        (Some(o), limit) => {
            out.push_str(&format!(
                " ordered by {} in {} order",
                p.exprs(&o.keys),
                nl::direction(o.direction)
            ));
            if let Some(n) = limit {
                out.push_str(&format!(" and keep the first {n} results"));
            }
        }
        (None, Some(n)) => out.push_str(&format!(" and keep the first {n} results")),
        (None, None) => {}
    }
    out
}
