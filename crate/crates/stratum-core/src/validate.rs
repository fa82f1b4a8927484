//! Application-level constraint checking run before planning or code
//! generation. All violations are collected into one report instead of
//! failing fast; placement feasibility is checked separately in `placement`.

use crate::lang::{ComponentKind, PipelineSpec};
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

/// Validation rule identifiers, rendered verbatim in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    /// Pipeline declares no components.
    EEmpty,
    /// Component name declared more than once.
    EDuplicate,
    /// Flow endpoint names no declared component.
    EUnknownComponent,
    /// Flow digraph contains a cycle.
    ECycle,
    /// Inference component without a model reference.
    EMissingModel,
    /// Component neither reachable from an ingestion component nor a
    /// batch/visualization component with an incoming flow.
    EUnreachable,
    /// Flow with identical source and destination.
    ESelfLoop,
    /// Numeric field outside its allowed range.
    ERange,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorCode::EEmpty => "E_EMPTY",
            ErrorCode::EDuplicate => "E_DUPLICATE",
            ErrorCode::EUnknownComponent => "E_UNKNOWN_COMPONENT",
            ErrorCode::ECycle => "E_CYCLE",
            ErrorCode::EMissingModel => "E_MISSING_MODEL",
            ErrorCode::EUnreachable => "E_UNREACHABLE",
            ErrorCode::ESelfLoop => "E_SELF_LOOP",
            ErrorCode::ERange => "E_RANGE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub code: ErrorCode,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.subject, self.message)
    }
}

/// Outcome of [`validate`]. `ok` holds exactly when `errors` is empty, and
/// errors are ordered by the source position of the offending item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    /// Renders the report one error per line, `CODE subject: message`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.errors {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

/// Checks a parsed spec against the application-level rule set.
pub fn validate(spec: &PipelineSpec) -> ValidationReport {
    let ncomp = spec.components.len();
    // Anchor every error to the source position of its subject so the final
    // report follows declaration order: components first by index, then flows.
    let mut found: Vec<(usize, ValidationError)> = Vec::new();
    let flow_anchor = |i: usize| ncomp + i;

    if spec.components.is_empty() {
        found.push((
            0,
            ValidationError {
                code: ErrorCode::EEmpty,
                subject: spec.name.clone(),
                message: "pipeline declares no components".into(),
            },
        ));
    }

    let mut first_index: HashMap<&str, usize> = HashMap::new();
    for (i, c) in spec.components.iter().enumerate() {
        if first_index.contains_key(c.name.as_str()) {
            found.push((
                i,
                ValidationError {
                    code: ErrorCode::EDuplicate,
                    subject: c.name.clone(),
                    message: "component name declared more than once".into(),
                },
            ));
        } else {
            first_index.insert(c.name.as_str(), i);
        }
    }

    for (i, c) in spec.components.iter().enumerate() {
        if c.kind == ComponentKind::Inference && c.model.is_none() {
            found.push((
                i,
                ValidationError {
                    code: ErrorCode::EMissingModel,
                    subject: c.name.clone(),
                    message: "inference component has no model".into(),
                },
            ));
        }
        if c.replicas < 1 {
            found.push((
                i,
                ValidationError {
                    code: ErrorCode::ERange,
                    subject: c.name.clone(),
                    message: "replicas must be at least 1".into(),
                },
            ));
        }
    }

    // Edges usable for graph analyses: known endpoints, no self-loops.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (i, f) in spec.flows.iter().enumerate() {
        if f.src == f.dst {
            found.push((
                flow_anchor(i),
                ValidationError {
                    code: ErrorCode::ESelfLoop,
                    subject: f.src.clone(),
                    message: "flow source and destination are the same component".into(),
                },
            ));
            continue;
        }
        let mut known = true;
        for endpoint in [&f.src, &f.dst] {
            if !first_index.contains_key(endpoint.as_str()) {
                known = false;
                found.push((
                    flow_anchor(i),
                    ValidationError {
                        code: ErrorCode::EUnknownComponent,
                        subject: endpoint.clone(),
                        message: format!("flow {} -> {} names an undeclared component", f.src, f.dst),
                    },
                ));
            }
        }
        if known {
            edges.push((first_index[f.src.as_str()], first_index[f.dst.as_str()]));
        }
    }

    // One E_CYCLE per cyclic strongly connected component, naming the member
    // earliest in source order.
    for scc in cyclic_sccs(ncomp, &edges) {
        let anchor = scc.iter().copied().min().expect("scc is non-empty");
        found.push((
            anchor,
            ValidationError {
                code: ErrorCode::ECycle,
                subject: spec.components[anchor].name.clone(),
                message: "flow graph contains a cycle through this component".into(),
            },
        ));
    }

    // Reachability from ingestion components over the known-edge graph.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    let mut indegree: Vec<usize> = vec![0; ncomp];
    for &(u, v) in &edges {
        adjacency[u].push(v);
        indegree[v] += 1;
    }
    let mut reachable: Vec<bool> = vec![false; ncomp];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, c) in spec.components.iter().enumerate() {
        if c.kind == ComponentKind::Ingestion {
            reachable[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !reachable[v] {
                reachable[v] = true;
                queue.push_back(v);
            }
        }
    }
    for (i, c) in spec.components.iter().enumerate() {
        if c.kind == ComponentKind::Ingestion || reachable[i] {
            continue;
        }
        let sink_with_input = matches!(c.kind, ComponentKind::Batch | ComponentKind::Visualization)
            && indegree[i] > 0;
        if !sink_with_input {
            found.push((
                i,
                ValidationError {
                    code: ErrorCode::EUnreachable,
                    subject: c.name.clone(),
                    message: "component receives no data from any ingestion component".into(),
                },
            ));
        }
    }

    found.sort_by_key(|(anchor, _)| *anchor);
    ValidationReport {
        errors: found.into_iter().map(|(_, e)| e).collect(),
    }
}

/// Computes a topological order over components of a spec that validated ok.
/// Ties are broken by source order, which keeps downstream consumers
/// deterministic. Returns `None` when the flow graph is cyclic.
pub fn topological_order(spec: &PipelineSpec) -> Option<Vec<usize>> {
    let ncomp = spec.components.len();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, c) in spec.components.iter().enumerate() {
        index.entry(c.name.as_str()).or_insert(i);
    }
    let mut indegree = vec![0usize; ncomp];
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for f in &spec.flows {
        let (Some(&u), Some(&v)) = (index.get(f.src.as_str()), index.get(f.dst.as_str())) else {
            return None;
        };
        if u == v {
            return None;
        }
        adjacency[u].push(v);
        indegree[v] += 1;
    }
    let mut order = Vec::with_capacity(ncomp);
    let mut ready: Vec<usize> = (0..ncomp).filter(|&i| indegree[i] == 0).collect();
    while let Some(&next) = ready.iter().min() {
        ready.retain(|&i| i != next);
        order.push(next);
        for &v in &adjacency[next] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.push(v);
            }
        }
    }
    (order.len() == ncomp).then_some(order)
}

/// Tarjan's strongly connected components, returning only SCCs of size >= 2
/// (self-loops never enter `edges`), in ascending order of their smallest
/// member.
fn cyclic_sccs(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    struct State {
        adjacency: Vec<Vec<usize>>,
        index: Vec<Option<usize>>,
        lowlink: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        counter: usize,
        sccs: Vec<Vec<usize>>,
    }

    fn strongconnect(s: &mut State, v: usize) {
        s.index[v] = Some(s.counter);
        s.lowlink[v] = s.counter;
        s.counter += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for i in 0..s.adjacency[v].len() {
            let w = s.adjacency[v][i];
            if s.index[w].is_none() {
                strongconnect(s, w);
                s.lowlink[v] = s.lowlink[v].min(s.lowlink[w]);
            } else if s.on_stack[w] {
                s.lowlink[v] = s.lowlink[v].min(s.index[w].expect("indexed"));
            }
        }
        if s.lowlink[v] == s.index[v].expect("indexed") {
            let mut scc = Vec::new();
            loop {
                let w = s.stack.pop().expect("stack holds the scc");
                s.on_stack[w] = false;
                scc.push(w);
                if w == v {
                    break;
                }
            }
            if scc.len() > 1 {
                s.sccs.push(scc);
            }
        }
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen = HashSet::new();
    for &(u, v) in edges {
        if seen.insert((u, v)) {
            adjacency[u].push(v);
        }
    }
    let mut state = State {
        adjacency,
        index: vec![None; n],
        lowlink: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        counter: 0,
        sccs: Vec::new(),
    };
    for v in 0..n {
        if state.index[v].is_none() {
            strongconnect(&mut state, v);
        }
    }
    let mut sccs = state.sccs;
    for scc in &mut sccs {
        scc.sort_unstable();
    }
    sccs.sort_by_key(|scc| scc[0]);
    sccs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn codes(report: &ValidationReport) -> Vec<ErrorCode> {
        report.errors.iter().map(|e| e.code).collect()
    }

    fn two_node_cycle() -> PipelineSpec {
        parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             component b { kind: stream cpu: 1 mem: 64 }\n\
             flow a -> b\n\
             flow b -> a\n\
             }",
        )
        .unwrap()
    }

    #[test]
    fn two_cycle_reports_exactly_e_cycle() {
        let report = validate(&two_node_cycle());
        assert_eq!(codes(&report), vec![ErrorCode::ECycle]);
        assert_eq!(report.errors[0].subject, "a");
    }

    #[test]
    fn dangling_endpoint_reports_unknown_component() {
        let spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             flow a -> ghost\n\
             }",
        )
        .unwrap();
        let report = validate(&spec);
        assert_eq!(codes(&report), vec![ErrorCode::EUnknownComponent]);
        assert_eq!(report.errors[0].subject, "ghost");
    }

    #[test]
    fn empty_pipeline_is_rejected() {
        let report = validate(&parse("pipeline p { }").unwrap());
        assert_eq!(codes(&report), vec![ErrorCode::EEmpty]);
        assert_eq!(report.errors[0].subject, "p");
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             }",
        )
        .unwrap();
        assert_eq!(codes(&validate(&spec)), vec![ErrorCode::EDuplicate]);
    }

    #[test]
    fn stream_without_ingestion_path_is_unreachable() {
        let spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             component lonely { kind: stream cpu: 1 mem: 64 }\n\
             }",
        )
        .unwrap();
        let report = validate(&spec);
        assert_eq!(codes(&report), vec![ErrorCode::EUnreachable]);
        assert_eq!(report.errors[0].subject, "lonely");
    }

    #[test]
    fn batch_with_incoming_flow_is_allowed_without_ingestion_path() {
        // b feeds the batch node but b itself is unreachable; only b errors.
        let spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             component b { kind: stream cpu: 1 mem: 64 }\n\
             component sink { kind: batch cpu: 1 mem: 64 }\n\
             flow b -> sink\n\
             }",
        )
        .unwrap();
        let report = validate(&spec);
        assert_eq!(codes(&report), vec![ErrorCode::EUnreachable]);
        assert_eq!(report.errors[0].subject, "b");
    }

    #[test]
    fn programmatic_self_loop_and_bad_replicas_are_caught() {
        let mut spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             component b { kind: stream cpu: 1 mem: 64 }\n\
             flow a -> b\n\
             }",
        )
        .unwrap();
        spec.flows.push(crate::lang::Flow {
            src: "b".into(),
            dst: "b".into(),
            max_latency_ms: None,
        });
        spec.components[1].replicas = 0;
        let report = validate(&spec);
        assert_eq!(codes(&report), vec![ErrorCode::ERange, ErrorCode::ESelfLoop]);
    }

    #[test]
    fn programmatic_missing_model_is_caught() {
        let mut spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             component infer { kind: inference cpu: 1 mem: 64 model: m@1 }\n\
             flow a -> infer\n\
             }",
        )
        .unwrap();
        spec.components[1].model = None;
        assert_eq!(codes(&validate(&spec)), vec![ErrorCode::EMissingModel]);
    }

    #[test]
    fn flow_order_shuffle_changes_only_error_order() {
        let mut spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             flow a -> ghost1\n\
             flow a -> ghost2\n\
             }",
        )
        .unwrap();
        let before = validate(&spec);
        spec.flows.reverse();
        let after = validate(&spec);
        assert_eq!(before.ok(), after.ok());
        let mut b: Vec<_> = before.errors.iter().map(|e| e.subject.clone()).collect();
        let mut a: Vec<_> = after.errors.iter().map(|e| e.subject.clone()).collect();
        assert_eq!(b, vec!["ghost1", "ghost2"]);
        assert_eq!(a, vec!["ghost2", "ghost1"]);
        b.sort();
        a.sort();
        assert_eq!(b, a);
    }

    #[test]
    fn valid_spec_has_topological_order() {
        let spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 }\n\
             component b { kind: stream cpu: 1 mem: 64 }\n\
             component c { kind: visualization cpu: 1 mem: 64 }\n\
             flow a -> b\n\
             flow b -> c\n\
             }",
        )
        .unwrap();
        assert!(validate(&spec).ok());
        assert_eq!(topological_order(&spec), Some(vec![0, 1, 2]));
        assert_eq!(topological_order(&two_node_cycle()), None);
    }

    #[test]
    fn report_renders_one_line_per_error() {
        let report = validate(&two_node_cycle());
        assert_eq!(
            report.render(),
            "E_CYCLE a: flow graph contains a cycle through this component\n"
        );
    }
}
