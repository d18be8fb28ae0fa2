use strsim::normalized_levenshtein;

use super::*;
use crate::sql::{Atom, Value};

/// Edit script turning `wrong` into `gold`.
pub fn diff(wrong: &Query, gold: &Query) -> EditScript {
    let w = canon(wrong);
    let g = canon(gold);
    let mut edits = Vec::new();
    diff_block(&w, &g, &[], &mut edits);
    assign_steps(&w, &mut edits);
    EditScript { edits }
}

enum Pairing<T> {
    Replace(T, T),
    Remove(T),
    Add(T),
}

/// Remove common items (as multisets), then pair leftovers greedily by
/// descending similarity of their renderings. Replaces come first, in
/// wrong-side order, then removals, then additions.
fn pair_items<T: PartialEq + Clone>(wrong: &[T], gold: &[T], show: impl Fn(&T) -> String) -> Vec<Pairing<T>> {
    let mut gold_left: Vec<Option<&T>> = gold.iter().map(Some).collect();
    let mut removed = Vec::new();
    for w in wrong {
        match gold_left.iter_mut().find(|g| g.is_some_and(|g| g == w)) {
            Some(slot) => *slot = None,
            None => removed.push(w),
        }
    }
    let added: Vec<&T> = gold_left.into_iter().flatten().collect();

    let rs: Vec<String> = removed.iter().map(|x| show(x)).collect();
    let as_: Vec<String> = added.iter().map(|x| show(x)).collect();
    let mut cands = Vec::with_capacity(rs.len() * as_.len());
    for (i, r) in rs.iter().enumerate() {
        for (j, a) in as_.iter().enumerate() {
            cands.push((normalized_levenshtein(r, a), i, j));
        }
    }
    cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut partner: Vec<Option<usize>> = vec![None; removed.len()];
    let mut taken = vec![false; added.len()];
    for (_, i, j) in cands {
        if partner[i].is_none() && !taken[j] {
            partner[i] = Some(j);
            taken[j] = true;
        }
    }

    let mut out = Vec::new();
    for (i, p) in partner.iter().enumerate() {
        if let Some(j) = p {
            out.push(Pairing::Replace(removed[i].clone(), added[*j].clone()));
        }
    }
    for (i, p) in partner.iter().enumerate() {
        if p.is_none() {
            out.push(Pairing::Remove(removed[i].clone()));
        }
    }
    for (j, t) in taken.iter().enumerate() {
        if !t {
            out.push(Pairing::Add(added[j].clone()));
        }
    }
    out
}

struct Emitter<'a> {
    path: &'a [PathSeg],
    context: BlockContext,
    out: Vec<Edit>,
}

impl Emitter<'_> {
    fn push(&mut self, clause: Clause, kind: EditKind, old: Option<Item>, new: Option<Item>, flip: Option<Flip>) {
        self.out.push(Edit {
            clause,
            kind,
            old,
            new,
            flip,
            path: self.path.to_vec(),
            context: self.context.clone(),
            step: None,
        });
    }

    fn pairs<T>(&mut self, clause: Clause, pairs: Vec<Pairing<T>>, wrap: impl Fn(T) -> Item) {
        for p in pairs {
            match p {
                Pairing::Replace(a, b) => self.push(clause, EditKind::Replace, Some(wrap(a)), Some(wrap(b)), None),
                Pairing::Remove(a) => self.push(clause, EditKind::Remove, Some(wrap(a)), None, None),
                Pairing::Add(b) => self.push(clause, EditKind::Add, None, Some(wrap(b)), None),
            }
        }
    }
}

fn display_condition(c: &Condition) -> String {
    render::condition(c, Style::DISPLAY, &[])
}

/// A child that is a single atom comparing against a nested query.
fn subquery_atom(c: &Condition) -> Option<&Atom> {
    match c {
        Condition::Atom(a) if a.has_subquery() => Some(a),
        _ => None,
    }
}

fn same_head(a: &Atom, b: &Atom) -> bool {
    a.operand == b.operand && a.op == b.op && a.second_value == b.second_value
}

fn nested_index(block: &Query, target: &Query) -> usize {
    block
        .nested_subqueries()
        .iter()
        .position(|q| std::ptr::eq(*q, target))
        .expect("nested query belongs to its block")
}

/// Diff of one WHERE or HAVING condition. Returns recursive jobs for
/// paired nested queries that differ only inside the subquery.
fn diff_condition<'q>(
    em: &mut Emitter<'_>,
    structural: &mut Vec<(Clause, EditKind, Item)>,
    wrong_block: &'q Query,
    wrong: Option<&'q Condition>,
    gold: Option<&'q Condition>,
    having: bool,
) -> Vec<(usize, &'q Query, &'q Query)> {
    let clause = if having { Clause::Having } else { Clause::Where };
    let children = |c: Option<&'q Condition>| c.map(|c| c.children()).unwrap_or_default();
    let (w_all, g_all) = (children(wrong), children(gold));
    let split = |xs: &[&'q Condition]| -> (Vec<&'q Condition>, Vec<&'q Condition>) {
        xs.iter().copied().partition(|c| !c.has_subquery())
    };
    let (w_plain, w_nested) = split(&w_all);
    let (g_plain, g_nested) = split(&g_all);

    let plain = pair_items(&w_plain, &g_plain, |c| display_condition(c));
    em.pairs(clause, plain, |c| Item::Condition(c.clone()));

    let conn = |c: Option<&Condition>| c.and_then(Condition::connector).unwrap_or(Connector::And);
    let (wc, gc) = (conn(wrong), conn(gold));
    if g_all.len() >= 2 && wc != gc {
        em.push(
            Clause::LogicConnector,
            EditKind::Flip,
            None,
            None,
            Some(Flip::Connector { having, from: wc, to: gc }),
        );
    }

    let mut jobs = Vec::new();
    for p in pair_items(&w_nested, &g_nested, |c| display_condition(c)) {
        match p {
            Pairing::Replace(a, b) => match (subquery_atom(a), subquery_atom(b)) {
                (Some(x), Some(y)) if same_head(x, y) => {
                    if let (Value::Subquery(qa), Value::Subquery(qb)) = (&x.value, &y.value) {
                        jobs.push((nested_index(wrong_block, qa), qa.as_ref(), qb.as_ref()));
                    }
                }
                _ => em.push(
                    clause,
                    EditKind::Replace,
                    Some(Item::Condition(a.clone())),
                    Some(Item::Condition(b.clone())),
                    None,
                ),
            },
            Pairing::Remove(a) => structural.push((
                Clause::Subquery,
                EditKind::Remove,
                Item::NestedCondition {
                    having,
                    condition: a.clone(),
                },
            )),
            Pairing::Add(b) => structural.push((
                Clause::Subquery,
                EditKind::Add,
                Item::NestedCondition {
                    having,
                    condition: b.clone(),
                },
            )),
        }
    }
    jobs
}

fn diff_block(w: &Query, g: &Query, path: &[PathSeg], out: &mut Vec<Edit>) {
    let mut em = Emitter {
        path,
        context: BlockContext {
            wrong_tables: w.from.tables.clone(),
            gold_tables: g.from.tables.clone(),
            order_keys: w.order_by.as_ref().map(|o| o.keys.clone()).unwrap_or_default(),
        },
        out: Vec::new(),
    };
    let mut structural: Vec<(Clause, EditKind, Item)> = Vec::new();

    em.pairs(Clause::From, pair_items(&w.from.tables, &g.from.tables, |t| t.clone()), Item::Table);
    em.pairs(
        Clause::From,
        pair_items(&w.from.joins, &g.from.joins, |j| render::join(j, Style::DISPLAY, &[])),
        Item::Join,
    );

    em.pairs(
        Clause::Select,
        pair_items(&w.select.items, &g.select.items, |e| render::column_expr(e, Style::DISPLAY, &[])),
        Item::Select,
    );
    match (w.select.distinct, g.select.distinct) {
        (false, true) => em.push(Clause::DistinctFlag, EditKind::Add, None, Some(Item::Distinct), None),
        (true, false) => em.push(Clause::DistinctFlag, EditKind::Remove, Some(Item::Distinct), None, None),
        _ => {}
    }

    let mut jobs = diff_condition(
        &mut em,
        &mut structural,
        w,
        w.where_clause.as_ref(),
        g.where_clause.as_ref(),
        false,
    );

    em.pairs(
        Clause::GroupBy,
        pair_items(&w.group_by, &g.group_by, |c| render::column_ref(c, Style::DISPLAY, &[])),
        Item::GroupBy,
    );

    jobs.extend(diff_condition(
        &mut em,
        &mut structural,
        w,
        w.having.as_ref(),
        g.having.as_ref(),
        true,
    ));

    let ol = |q: &Query| Item::OrderLimit {
        order_by: q.order_by.clone(),
        limit: q.limit,
    };
    let present = |q: &Query| q.order_by.is_some() || q.limit.is_some();
    if (&w.order_by, w.limit) != (&g.order_by, g.limit) {
        match (present(w), present(g)) {
            (false, _) => em.push(Clause::OrderLimit, EditKind::Add, None, Some(ol(g)), None),
            (_, false) => em.push(Clause::OrderLimit, EditKind::Remove, Some(ol(w)), None, None),
            _ => match (&w.order_by, &g.order_by) {
                (Some(a), Some(b)) if a.keys == b.keys && w.limit == g.limit => em.push(
                    Clause::OrderLimit,
                    EditKind::Flip,
                    None,
                    None,
                    Some(Flip::Direction {
                        from: a.direction,
                        to: b.direction,
                    }),
                ),
                _ => em.push(Clause::OrderLimit, EditKind::Replace, Some(ol(w)), Some(ol(g)), None),
            },
        }
    }

    for (clause, kind, item) in structural {
        match kind {
            EditKind::Add => em.push(clause, kind, None, Some(item), None),
            _ => em.push(clause, kind, Some(item), None, None),
        }
    }

    let mut set_op_job = None;
    match (&w.set_op, &g.set_op) {
        (None, Some(op)) => em.push(Clause::Subquery, EditKind::Add, None, Some(Item::SetOp(op.clone())), None),
        (Some(op), None) => em.push(Clause::Subquery, EditKind::Remove, Some(Item::SetOp(op.clone())), None, None),
        (Some(a), Some(b)) => {
            if a.kind != b.kind {
                em.push(
                    Clause::Subquery,
                    EditKind::Flip,
                    None,
                    None,
                    Some(Flip::SetOp { from: a.kind, to: b.kind }),
                );
            }
            set_op_job = Some((a.query.as_ref(), b.query.as_ref()));
        }
        (None, None) => {}
    }

    out.extend(em.out);

    for (i, a, b) in jobs {
        let mut p = path.to_vec();
        p.push(PathSeg::Nested(i));
        diff_block(a, b, &p, out);
    }
    if let Some((a, b)) = set_op_job {
        let mut p = path.to_vec();
        p.push(PathSeg::SetOp);
        diff_block(a, b, &p, out);
    }
}
