//! Step decomposition of a query, shared by explanations and edit scripts.
//!
//! Steps are numbered from 1 in post order: nested subqueries of a block
//! come first, then the join of its tables (only when it has several),
//! then the block itself. A set operation's combining step comes after
//! both of its operands.

use super::ast::{Query, SetOpKind};

#[derive(Debug, Clone)]
pub enum PlanStep<'a> {
    /// Pairing rows across the tables of a multi-table block.
    Join { query: &'a Query },
    /// One SELECT block (its set-op chain is described by later steps).
    Block {
        query: &'a Query,
        /// Step producing the joined rows the block reads from.
        join_step: Option<usize>,
        /// Step numbers of the block's nested subqueries, in
        /// [`Query::nested_subqueries`] order.
        subquery_steps: Vec<usize>,
    },
    Combine {
        kind: SetOpKind,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct QueryPlan<'a> {
    pub steps: Vec<PlanStep<'a>>,
    /// Step number of each block along the top-level set-op chain.
    pub chain_steps: Vec<usize>,
    /// Step producing the final result.
    pub result: usize,
    /// Result step of every nested query, in visiting order.
    pub subquery_results: Vec<(&'a Query, usize)>,
}

impl<'a> QueryPlan<'a> {
    pub fn new(q: &'a Query) -> Self {
        let mut steps = Vec::new();
        let mut subquery_results = Vec::new();
        let (result, chain_steps) = visit(q, &mut steps, &mut subquery_results);
        Self {
            steps,
            chain_steps,
            result,
            subquery_results,
        }
    }

    pub fn is_multi_step(&self) -> bool {
        self.steps.len() > 1
    }

    /// Step producing the result of nested query `q`.
    pub fn result_of(&self, q: &Query) -> Option<usize> {
        self.subquery_results
            .iter()
            .find(|(s, _)| std::ptr::eq(*s, q))
            .map(|(_, step)| *step)
    }

    /// Block step (and join step, if any) of a block, found by identity.
    pub fn steps_of(&self, block: &Query) -> Option<(usize, Option<usize>)> {
        self.steps.iter().enumerate().find_map(|(i, s)| match s {
            PlanStep::Block { query, join_step, .. } if std::ptr::eq(*query, block) => Some((i + 1, *join_step)),
            _ => None,
        })
    }
}

impl QueryPlan<'_> {
    /// Step combining `block` with the rest of its set-op chain.
    pub fn combine_step_of(&self, block: &Query) -> Option<usize> {
        let (b, _) = self.steps_of(block)?;
        self.steps.iter().enumerate().find_map(|(i, s)| match s {
            PlanStep::Combine { left, .. } if *left == b => Some(i + 1),
            _ => None,
        })
    }
}

type Results<'a> = Vec<(&'a Query, usize)>;

fn visit<'a>(q: &'a Query, steps: &mut Vec<PlanStep<'a>>, results: &mut Results<'a>) -> (usize, Vec<usize>) {
    let subquery_steps = q
        .nested_subqueries()
        .into_iter()
        .map(|s| {
            let r = visit(s, steps, results).0;
            results.push((s, r));
            r
        })
        .collect();
    let join_step = if q.from.tables.len() > 1 {
        steps.push(PlanStep::Join { query: q });
        Some(steps.len())
    } else {
        None
    };
    steps.push(PlanStep::Block {
        query: q,
        join_step,
        subquery_steps,
    });
    let block = steps.len();
    match &q.set_op {
        Some(op) => {
            let (right, mut chain) = visit(&op.query, steps, results);
            steps.push(PlanStep::Combine {
                kind: op.kind,
                left: block,
                right,
            });
            chain.insert(0, block);
            (steps.len(), chain)
        }
        None => (block, vec![block]),
    }
}
