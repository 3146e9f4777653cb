//! Process ordering: a breadth-first (FIFO Kahn) topological traversal.
//!
//! Sources and stores take part in the traversal, so a process that reads a
//! store written by another process is ordered after it. Ties between ready
//! vertices are broken by declaration order; weakly connected components are
//! visited in the declaration order of their first process.

use std::collections::VecDeque;

use petgraph::unionfind::UnionFind;

use super::{validate, Dfd, DfdError, VertexId, VertexKind};

struct Adjacency {
    succ: Vec<Vec<usize>>,
    indegree: Vec<usize>,
}

fn adjacency(dfd: &Dfd) -> Adjacency {
    let n = dfd.vertices.len();
    let mut succ = vec![Vec::new(); n];
    let mut indegree = vec![0; n];
    for e in &dfd.edges {
        if let (Some(a), Some(b)) = (dfd.position(&e.from), dfd.position(&e.to)) {
            succ[a].push(b);
            indegree[b] += 1;
        }
    }
    for s in &mut succ {
        s.sort_unstable();
    }
    Adjacency { succ, indegree }
}

fn ensure_valid(dfd: &Dfd) -> Result<(), DfdError> {
    let report = validate(dfd);
    match report.findings.into_iter().next() {
        None => Ok(()),
        Some(super::Finding::Cycle(ids)) => Err(DfdError::Cycle(ids)),
        Some(other) => Err(DfdError::Invalid(other)),
    }
}

pub fn process_ordering(dfd: &Dfd) -> Result<Vec<VertexId>, DfdError> {
    ensure_valid(dfd)?;
    let n = dfd.vertices.len();
    let Adjacency { succ, mut indegree } = adjacency(dfd);

    let mut components = UnionFind::<usize>::new(n);
    for (a, targets) in succ.iter().enumerate() {
        for &b in targets {
            components.union(a, b);
        }
    }
    let is_process = |i: usize| dfd.vertices[i].kind() == VertexKind::Process;

    // Component representatives, ordered by their first declared process.
    let mut roots: Vec<usize> = Vec::new();
    for i in (0..n).filter(|&i| is_process(i)) {
        let root = components.find(i);
        if !roots.contains(&root) {
            roots.push(root);
        }
    }

    let mut order = Vec::new();
    for root in roots {
        let mut queue: VecDeque<usize> = (0..n)
            .filter(|&i| components.find(i) == root && indegree[i] == 0)
            .collect();
        while let Some(v) = queue.pop_front() {
            if is_process(v) {
                order.push(dfd.vertices[v].id.clone());
            }
            for &w in &succ[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
    }
    Ok(order)
}

/// `true` when data flows from process `from` to `to` along directed edges,
/// through any intermediate vertices.
pub fn reaches(dfd: &Dfd, from: &VertexId, to: &VertexId) -> bool {
    let (Some(start), Some(goal)) = (dfd.position(from), dfd.position(to)) else {
        return false;
    };
    let succ = adjacency(dfd).succ;
    let mut seen = vec![false; dfd.vertices.len()];
    let mut stack = succ[start].clone();
    while let Some(v) = stack.pop() {
        if v == goal {
            return true;
        }
        if !std::mem::replace(&mut seen[v], true) {
            stack.extend(&succ[v]);
        }
    }
    false
}

/// Check a user-supplied ordering: it must list every process exactly once
/// and never place a process before one whose output reaches it.
pub fn check_ordering(dfd: &Dfd, ordering: &[VertexId]) -> Result<(), DfdError> {
    ensure_valid(dfd)?;
    let processes: Vec<&VertexId> = dfd.processes().map(|v| &v.id).collect();
    for id in ordering {
        if !processes.contains(&id) {
            return Err(DfdError::BadOrdering(format!("{id} is not a process")));
        }
    }
    for id in &processes {
        match ordering.iter().filter(|o| o == id).count() {
            1 => {}
            0 => return Err(DfdError::BadOrdering(format!("{id} is missing"))),
            _ => return Err(DfdError::BadOrdering(format!("{id} is listed twice"))),
        }
    }
    for (i, later) in ordering.iter().enumerate() {
        for earlier in &ordering[..i] {
            if reaches(dfd, later, earlier) {
                return Err(DfdError::BadOrdering(format!(
                    "{later} feeds {earlier} but is ordered after it"
                )));
            }
        }
    }
    Ok(())
}
