use super::*;
use crate::sql::Value;

/// Apply `script` to `wrong`. The input is left untouched; the result is
/// built from the canonical form of `wrong`, which is what the script's
/// paths refer to.
pub fn apply(wrong: &Query, script: &EditScript) -> Result<Query, EditError> {
    let mut q = canon(wrong);
    apply_at(&mut q, &script.edits, &mut Vec::new())?;
    Ok(q)
}

fn apply_at(q: &mut Query, edits: &[Edit], path: &mut Vec<PathSeg>) -> Result<(), EditError> {
    let below = |seg: PathSeg, path: &[PathSeg]| {
        edits
            .iter()
            .any(|e| e.path.len() > path.len() && e.path.starts_with(path) && e.path[path.len()] == seg)
    };

    // sub-blocks first, so block-level items still compare against the
    // wrong query's own subqueries
    let count = q.nested_subqueries().len();
    for i in 0..count {
        if below(PathSeg::Nested(i), path) {
            let sub = nested_mut(q, i).ok_or_else(|| EditError::BadPath(path.clone()))?;
            path.push(PathSeg::Nested(i));
            apply_at(sub, edits, path)?;
            path.pop();
        }
    }
    if below(PathSeg::SetOp, path) {
        let sub = match q.set_op.as_mut() {
            Some(op) => op.query.as_mut(),
            None => {
                let mut p = path.clone();
                p.push(PathSeg::SetOp);
                return Err(EditError::BadPath(p));
            }
        };
        path.push(PathSeg::SetOp);
        apply_at(sub, edits, path)?;
        path.pop();
    }

    for e in edits.iter().filter(|e| e.path == *path) {
        apply_one(q, e)?;
    }
    Ok(())
}

/// Mutable counterpart of `Query::nested_subqueries()[i]`.
fn nested_mut(q: &mut Query, i: usize) -> Option<&mut Query> {
    fn walk<'a>(c: &'a mut Condition, out: &mut Vec<&'a mut Query>) {
        match c {
            Condition::Atom(a) => {
                if let Value::Subquery(q) = &mut a.value {
                    out.push(q.as_mut());
                }
            }
            Condition::And(ch) | Condition::Or(ch) => ch.iter_mut().for_each(|x| walk(x, out)),
        }
    }
    let mut all = Vec::new();
    for c in [&mut q.where_clause, &mut q.having].into_iter().flatten() {
        walk(c, &mut all);
    }
    all.into_iter().nth(i)
}

fn fail(e: &Edit, reason: impl Into<String>) -> EditError {
    EditError::NotApplicable {
        edit: e.linearize(),
        reason: reason.into(),
    }
}

fn edit_list<T: PartialEq + Clone>(list: &mut Vec<T>, e: &Edit, old: Option<&T>, new: Option<&T>) -> Result<(), EditError> {
    match (old, new) {
        (Some(o), n) => {
            let pos = list
                .iter()
                .position(|x| x == o)
                .ok_or_else(|| fail(e, "item not found in clause"))?;
            match n {
                Some(n) => list[pos] = n.clone(),
                None => {
                    list.remove(pos);
                }
            }
        }
        (None, Some(n)) => list.push(n.clone()),
        (None, None) => return Err(fail(e, "edit carries no item")),
    }
    Ok(())
}

fn edit_condition(slot: &mut Option<Condition>, e: &Edit, old: Option<&Condition>, new: Option<&Condition>) -> Result<(), EditError> {
    let conn = slot.as_ref().and_then(Condition::connector).unwrap_or(Connector::And);
    let mut children: Vec<Condition> = slot
        .as_ref()
        .map(|c| c.children().into_iter().cloned().collect())
        .unwrap_or_default();
    edit_list(&mut children, e, old, new)?;
    *slot = Condition::from_children(conn, children);
    Ok(())
}

fn apply_one(q: &mut Query, e: &Edit) -> Result<(), EditError> {
    if let Some(flip) = e.flip {
        return apply_flip(q, e, flip);
    }
    let (old, new) = (e.old.as_ref(), e.new.as_ref());
    let kind_of = |i: Option<&Item>| i.map(std::mem::discriminant);
    if old.is_some() && new.is_some() && kind_of(old) != kind_of(new) {
        return Err(fail(e, "old and new items differ in kind"));
    }
    match old.or(new).expect("non-flip edits carry an item") {
        Item::Table(_) => {
            let pick = |i: Option<&Item>| match i {
                Some(Item::Table(t)) => Some(t.clone()),
                _ => None,
            };
            edit_list(&mut q.from.tables, e, pick(old).as_ref(), pick(new).as_ref())
        }
        Item::Join(_) => {
            let pick = |i: Option<&Item>| match i {
                Some(Item::Join(j)) => Some(j.clone()),
                _ => None,
            };
            edit_list(&mut q.from.joins, e, pick(old).as_ref(), pick(new).as_ref())
        }
        Item::Select(_) => {
            let pick = |i: Option<&Item>| match i {
                Some(Item::Select(x)) => Some(x.clone()),
                _ => None,
            };
            edit_list(&mut q.select.items, e, pick(old).as_ref(), pick(new).as_ref())
        }
        Item::Distinct => match e.kind {
            EditKind::Add if !q.select.distinct => {
                q.select.distinct = true;
                Ok(())
            }
            EditKind::Remove if q.select.distinct => {
                q.select.distinct = false;
                Ok(())
            }
            _ => Err(fail(e, "DISTINCT flag is not in the expected state")),
        },
        Item::GroupBy(_) => {
            let pick = |i: Option<&Item>| match i {
                Some(Item::GroupBy(c)) => Some(c.clone()),
                _ => None,
            };
            edit_list(&mut q.group_by, e, pick(old).as_ref(), pick(new).as_ref())
        }
        Item::Condition(_) | Item::NestedCondition { .. } => {
            let having = match (e.clause, old.or(new)) {
                (Clause::Having, _) => true,
                (_, Some(Item::NestedCondition { having, .. })) => *having,
                _ => false,
            };
            let pick = |i: Option<&Item>| match i {
                Some(Item::Condition(c)) | Some(Item::NestedCondition { condition: c, .. }) => Some(c.clone()),
                _ => None,
            };
            let slot = if having { &mut q.having } else { &mut q.where_clause };
            edit_condition(slot, e, pick(old).as_ref(), pick(new).as_ref())
        }
        Item::OrderLimit { .. } => {
            if let Some(Item::OrderLimit { order_by, limit }) = old {
                if (&q.order_by, q.limit) != (order_by, *limit) {
                    return Err(fail(e, "ORDER BY/LIMIT differs from the edit's old value"));
                }
            } else if q.order_by.is_some() || q.limit.is_some() {
                return Err(fail(e, "block already has ORDER BY/LIMIT"));
            }
            match new {
                Some(Item::OrderLimit { order_by, limit }) => {
                    q.order_by = order_by.clone();
                    q.limit = *limit;
                }
                _ => {
                    q.order_by = None;
                    q.limit = None;
                }
            }
            Ok(())
        }
        Item::SetOp(_) => {
            if let Some(Item::SetOp(op)) = old {
                match &q.set_op {
                    Some(cur) if cur == op => {}
                    _ => return Err(fail(e, "set operation differs from the edit's old value")),
                }
            } else if q.set_op.is_some() {
                return Err(fail(e, "block already has a set operation"));
            }
            q.set_op = match new {
                Some(Item::SetOp(op)) => Some(op.clone()),
                _ => None,
            };
            Ok(())
        }
    }
}

fn apply_flip(q: &mut Query, e: &Edit, flip: Flip) -> Result<(), EditError> {
    match flip {
        Flip::Connector { having, from, to } => {
            let slot = if having { &mut q.having } else { &mut q.where_clause };
            let current = slot.as_ref().and_then(Condition::connector).unwrap_or(Connector::And);
            if current != from {
                return Err(fail(e, "connector differs from the edit's old value"));
            }
            if let Some(c) = slot.take() {
                let children: Vec<Condition> = c.children().into_iter().cloned().collect();
                *slot = Condition::from_children(to, children);
            }
            Ok(())
        }
        Flip::Direction { from, to } => match q.order_by.as_mut() {
            Some(o) if o.direction == from => {
                o.direction = to;
                Ok(())
            }
            _ => Err(fail(e, "ORDER BY direction differs from the edit's old value")),
        },
        Flip::SetOp { from, to } => match q.set_op.as_mut() {
            Some(op) if op.kind == from => {
                op.kind = to;
                Ok(())
            }
            _ => Err(fail(e, "set operator differs from the edit's old value")),
        },
    }
}
