use std::collections::HashMap;
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{join_ids, Background, Dfd, VertexId, VertexLabel};

/// One invariant violation. Findings are data: validation never fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    DuplicateVertex(VertexId),
    IncompleteSpec(VertexId),
    EmptyDescription(VertexId),
    DanglingEdge {
        from: VertexId,
        to: VertexId,
        missing: VertexId,
    },
    EmptyEdgeLabel {
        from: VertexId,
        to: VertexId,
    },
    /// Vertices of one strongly connected component, in declaration order.
    Cycle(Vec<VertexId>),
    EmptyTaskDescription,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DuplicateVertex(id) => write!(f, "duplicate vertex: {id}"),
            Finding::IncompleteSpec(id) => write!(f, "incomplete ProcessSpec: {id}"),
            Finding::EmptyDescription(id) => write!(f, "empty description: {id}"),
            Finding::DanglingEdge { from, to, missing } => {
                write!(f, "dangling edge: {from} -> {to} (unknown vertex {missing})")
            }
            Finding::EmptyEdgeLabel { from, to } => write!(f, "empty edge label: {from} -> {to}"),
            Finding::Cycle(ids) => write!(f, "cycle: {}", join_ids(ids)),
            Finding::EmptyTaskDescription => f.write_str("empty task description"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return f.write_str("ok");
        }
        for (i, finding) in self.findings.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{finding}")?;
        }
        Ok(())
    }
}

pub fn validate(dfd: &Dfd) -> ValidationReport {
    let mut findings = Vec::new();
    let mut index: HashMap<&VertexId, usize> = HashMap::new();

    for (i, v) in dfd.vertices.iter().enumerate() {
        if index.insert(&v.id, i).is_some() {
            findings.push(Finding::DuplicateVertex(v.id.clone()));
        }
        match &v.label {
            VertexLabel::Process(spec) if !spec.is_complete() => findings.push(Finding::IncompleteSpec(v.id.clone())),
            VertexLabel::Source(text) | VertexLabel::Store(text) if text.trim().is_empty() => {
                findings.push(Finding::EmptyDescription(v.id.clone()))
            }
            _ => {}
        }
    }

    let mut graph = DiGraph::<usize, ()>::with_capacity(dfd.vertices.len(), dfd.edges.len());
    let nodes: Vec<_> = (0..dfd.vertices.len()).map(|i| graph.add_node(i)).collect();
    for e in &dfd.edges {
        let ends = (index.get(&e.from), index.get(&e.to));
        match ends {
            (Some(&a), Some(&b)) => {
                graph.add_edge(nodes[a], nodes[b], ());
            }
            (None, _) => findings.push(Finding::DanglingEdge {
                from: e.from.clone(),
                to: e.to.clone(),
                missing: e.from.clone(),
            }),
            (_, None) => findings.push(Finding::DanglingEdge {
                from: e.from.clone(),
                to: e.to.clone(),
                missing: e.to.clone(),
            }),
        }
        if e.label.trim().is_empty() {
            findings.push(Finding::EmptyEdgeLabel {
                from: e.from.clone(),
                to: e.to.clone(),
            });
        }
    }

    let mut cycles: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1 || graph.contains_edge(scc[0], scc[0]))
        .map(|scc| {
            let mut members: Vec<usize> = scc.into_iter().map(|n| graph[n]).collect();
            members.sort_unstable();
            members
        })
        .collect();
    cycles.sort();
    findings.extend(
        cycles
            .into_iter()
            .map(|members| Finding::Cycle(members.into_iter().map(|i| dfd.vertices[i].id.clone()).collect())),
    );

    ValidationReport { findings }
}

pub fn validate_background(background: &Background) -> ValidationReport {
    let mut report = validate(&background.dfd);
    if background.task_description.trim().is_empty() {
        report.findings.push(Finding::EmptyTaskDescription);
    }
    report
}
