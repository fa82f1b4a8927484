//! Component-to-node placement: feasibility checking, an exhaustive
//! cost-minimal solver, and a greedy first-fit-decreasing heuristic.
//!
//! All replicas of a component live on one node. The objective is monetary
//! cost only (`sum of replicas * cpu * cost_per_core_hour`); latency bounds,
//! capacities, and tier hints enter as hard constraints.

use crate::lang::{PipelineSpec, TierHint};
use crate::topology::{ResourceTopology, Tier};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Which solver produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Exact,
    Heuristic,
}

/// A complete assignment of components to nodes. Serialized with keys in
/// lexicographic order so output is byte-deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub mode: PlanMode,
    pub cost_per_hour: f64,
    pub assignments: BTreeMap<String, String>,
    pub replicas: BTreeMap<String, u32>,
}

impl PlacementPlan {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("plan serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, PlacementError> {
        serde_json::from_str(text).map_err(|e| PlacementError::MalformedPlan(e.to_string()))
    }
}

/// Feasibility rules a plan can violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    #[serde(rename = "CAP_CPU")]
    CapCpu,
    #[serde(rename = "CAP_MEM")]
    CapMem,
    #[serde(rename = "CAP_GPU")]
    CapGpu,
    #[serde(rename = "TIER")]
    Tier,
    #[serde(rename = "LATENCY")]
    Latency,
    #[serde(rename = "UNREACHABLE")]
    Unreachable,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::CapCpu => "CAP_CPU",
            Rule::CapMem => "CAP_MEM",
            Rule::CapGpu => "CAP_GPU",
            Rule::Tier => "TIER",
            Rule::Latency => "LATENCY",
            Rule::Unreachable => "UNREACHABLE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub subject: String,
}

/// Result of [`check_feasible`]: feasible exactly when `violations` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityVerdict {
    pub violations: Vec<Violation>,
}

impl FeasibilityVerdict {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error("plan does not assign component '{0}'")]
    UnassignedComponent(String),
    #[error("plan references unknown component '{0}'")]
    UnknownComponent(String),
    #[error("plan references unknown node '{0}'")]
    UnknownNode(String),
    #[error("no feasible assignment exists")]
    Infeasible,
    #[error("heuristic found no feasible node for component '{0}' (not a proof of infeasibility)")]
    HeuristicInfeasible(String),
    #[error("plan JSON is malformed: {0}")]
    MalformedPlan(String),
}

fn tier_matches(hint: TierHint, tier: Tier) -> bool {
    match hint {
        TierHint::Any => true,
        TierHint::Edge => tier == Tier::Edge,
        TierHint::Fog => tier == Tier::Fog,
        TierHint::Cloud => tier == Tier::Cloud,
    }
}

/// Checks every capacity, tier, and latency constraint of `plan`.
///
/// Violation order is deterministic: per-node capacity rules in topology
/// order (cpu, mem, gpu), then tier mismatches in component source order,
/// then bounded flows in source order.
pub fn check_feasible(
    spec: &PipelineSpec,
    topology: &ResourceTopology,
    plan: &PlacementPlan,
) -> Result<FeasibilityVerdict, PlacementError> {
    for name in plan.assignments.keys() {
        if spec.component(name).is_none() {
            return Err(PlacementError::UnknownComponent(name.clone()));
        }
    }
    for c in &spec.components {
        let node_id = plan
            .assignments
            .get(&c.name)
            .ok_or_else(|| PlacementError::UnassignedComponent(c.name.clone()))?;
        if topology.node(node_id).is_none() {
            return Err(PlacementError::UnknownNode(node_id.clone()));
        }
    }

    let replicas_of = |name: &str| -> f64 {
        f64::from(plan.replicas.get(name).copied().unwrap_or(1))
    };

    let mut violations = Vec::new();

    for node in &topology.nodes {
        let mut cpu = 0.0;
        let mut mem = 0.0;
        let mut gpu = 0.0;
        for c in &spec.components {
            if plan.assignments[&c.name] == node.id {
                let r = replicas_of(&c.name);
                cpu += r * c.cpu;
                mem += r * c.mem as f64;
                if c.gpu.is_required() {
                    gpu += r;
                }
            }
        }
        if cpu > node.cpu_cores {
            violations.push(Violation { rule: Rule::CapCpu, subject: node.id.clone() });
        }
        if mem > node.mem_mb as f64 {
            violations.push(Violation { rule: Rule::CapMem, subject: node.id.clone() });
        }
        if gpu > f64::from(node.gpus) {
            violations.push(Violation { rule: Rule::CapGpu, subject: node.id.clone() });
        }
    }

    for c in &spec.components {
        let node = topology.node(&plan.assignments[&c.name]).expect("checked above");
        if !tier_matches(c.tier_hint, node.tier) {
            violations.push(Violation { rule: Rule::Tier, subject: c.name.clone() });
        }
    }

    for f in &spec.flows {
        let Some(bound) = f.max_latency_ms else { continue };
        let (Some(src_node), Some(dst_node)) =
            (plan.assignments.get(&f.src), plan.assignments.get(&f.dst))
        else {
            continue;
        };
        let subject = format!("{}->{}", f.src, f.dst);
        match topology.latency(src_node, dst_node).expect("nodes checked above") {
            None => violations.push(Violation { rule: Rule::Unreachable, subject }),
            Some(latency) if latency > bound => {
                violations.push(Violation { rule: Rule::Latency, subject })
            }
            Some(_) => {}
        }
    }

    Ok(FeasibilityVerdict { violations })
}

/// Plan cost: sum over components in source order of
/// `replicas * cpu * cost_per_core_hour(node)`. Summation order is part of
/// the contract so independently coded enumerators agree bit-exactly.
pub fn plan_cost(spec: &PipelineSpec, topology: &ResourceTopology, assignment: &[usize]) -> f64 {
    let mut cost = 0.0;
    for (c, &n) in spec.components.iter().zip(assignment) {
        cost += f64::from(c.replicas) * c.cpu * topology.nodes[n].cost_per_core_hour;
    }
    cost
}

fn plan_from_assignment(
    spec: &PipelineSpec,
    topology: &ResourceTopology,
    assignment: &[usize],
    mode: PlanMode,
) -> PlacementPlan {
    let mut assignments = BTreeMap::new();
    let mut replicas = BTreeMap::new();
    for (c, &n) in spec.components.iter().zip(assignment) {
        assignments.insert(c.name.clone(), topology.nodes[n].id.clone());
        replicas.insert(c.name.clone(), c.replicas);
    }
    PlacementPlan {
        mode,
        cost_per_hour: plan_cost(spec, topology, assignment),
        assignments,
        replicas,
    }
}

/// Exhaustively enumerates all |nodes|^|components| assignments and returns
/// the cheapest feasible one; ties resolve to the lexicographically smallest
/// assignment (components in source order, candidate nodes in ascending id
/// order). The caller bounds instance size (the CLI refuses beyond 10^6).
pub fn plan_exact(
    spec: &PipelineSpec,
    topology: &ResourceTopology,
) -> Result<PlacementPlan, PlacementError> {
    let ncomp = spec.components.len();
    // Enumerate over nodes in ascending id order so the first minimum found
    // is the lexicographic tie-break winner.
    let mut node_order: Vec<usize> = (0..topology.nodes.len()).collect();
    node_order.sort_by(|&a, &b| topology.nodes[a].id.cmp(&topology.nodes[b].id));
    if ncomp == 0 || node_order.is_empty() {
        return Err(PlacementError::Infeasible);
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut digits = vec![0usize; ncomp];
    loop {
        let assignment: Vec<usize> = digits.iter().map(|&d| node_order[d]).collect();
        let probe = plan_from_assignment(spec, topology, &assignment, PlanMode::Exact);
        let verdict = check_feasible(spec, topology, &probe)?;
        if verdict.feasible() {
            let cost = probe.cost_per_hour;
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, assignment));
            }
        }

        // Advance the mixed-radix counter, last component fastest.
        let mut i = ncomp;
        loop {
            if i == 0 {
                return match best {
                    Some((_, assignment)) => {
                        Ok(plan_from_assignment(spec, topology, &assignment, PlanMode::Exact))
                    }
                    None => Err(PlacementError::Infeasible),
                };
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < node_order.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Greedy heuristic: components in descending `replicas * cpu` order (ties:
/// source order), each assigned to the feasible node with the smallest
/// marginal cost (ties: ascending node id), checking remaining capacity,
/// tier hint, and latency bounds against already-placed neighbors. No
/// backtracking, so failure is not a proof of infeasibility.
pub fn plan_heuristic(
    spec: &PipelineSpec,
    topology: &ResourceTopology,
) -> Result<PlacementPlan, PlacementError> {
    let ncomp = spec.components.len();
    if ncomp == 0 || topology.nodes.is_empty() {
        return Err(PlacementError::HeuristicInfeasible(String::new()));
    }
    let mut order: Vec<usize> = (0..ncomp).collect();
    order.sort_by(|&a, &b| {
        let wa = f64::from(spec.components[a].replicas) * spec.components[a].cpu;
        let wb = f64::from(spec.components[b].replicas) * spec.components[b].cpu;
        wb.partial_cmp(&wa).expect("cpu demands are finite").then(a.cmp(&b))
    });
    let mut node_order: Vec<usize> = (0..topology.nodes.len()).collect();
    node_order.sort_by(|&a, &b| topology.nodes[a].id.cmp(&topology.nodes[b].id));

    let mut cpu_left: Vec<f64> = topology.nodes.iter().map(|n| n.cpu_cores).collect();
    let mut mem_left: Vec<f64> = topology.nodes.iter().map(|n| n.mem_mb as f64).collect();
    let mut gpu_left: Vec<f64> = topology.nodes.iter().map(|n| f64::from(n.gpus)).collect();
    let mut placed: Vec<Option<usize>> = vec![None; ncomp];

    for &ci in &order {
        let c = &spec.components[ci];
        let r = f64::from(c.replicas);
        let mut chosen: Option<(f64, usize)> = None;
        for &ni in &node_order {
            let node = &topology.nodes[ni];
            if !tier_matches(c.tier_hint, node.tier) {
                continue;
            }
            if r * c.cpu > cpu_left[ni]
                || r * c.mem as f64 > mem_left[ni]
                || (c.gpu.is_required() && r > gpu_left[ni])
            {
                continue;
            }
            let mut latency_ok = true;
            for f in &spec.flows {
                let Some(bound) = f.max_latency_ms else { continue };
                let other = if f.src == c.name {
                    &f.dst
                } else if f.dst == c.name {
                    &f.src
                } else {
                    continue;
                };
                let Some(oi) = spec.components.iter().position(|o| &o.name == other) else {
                    continue;
                };
                let Some(other_node) = placed[oi] else { continue };
                match topology
                    .latency(&node.id, &topology.nodes[other_node].id)
                    .expect("both ids come from the topology")
                {
                    Some(latency) if latency <= bound => {}
                    _ => {
                        latency_ok = false;
                        break;
                    }
                }
            }
            if !latency_ok {
                continue;
            }
            let marginal = r * c.cpu * node.cost_per_core_hour;
            // Strict < keeps the earliest (smallest id) node on ties.
            if chosen.as_ref().is_none_or(|(best, _)| marginal < *best) {
                chosen = Some((marginal, ni));
            }
        }
        match chosen {
            Some((_, ni)) => {
                placed[ci] = Some(ni);
                cpu_left[ni] -= r * c.cpu;
                mem_left[ni] -= r * c.mem as f64;
                if c.gpu.is_required() {
                    gpu_left[ni] -= r;
                }
            }
            None => return Err(PlacementError::HeuristicInfeasible(c.name.clone())),
        }
    }

    let assignment: Vec<usize> = placed.into_iter().map(|p| p.expect("all placed")).collect();
    Ok(plan_from_assignment(spec, topology, &assignment, PlanMode::Heuristic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::topology::load_topology;

    fn two_node_topology() -> ResourceTopology {
        load_topology(
            r#"{"nodes": [
              {"id": "cheap", "tier": "edge", "cpu_cores": 4, "mem_mb": 4096, "gpus": 0, "cost_per_core_hour": 0.05},
              {"id": "pricey", "tier": "cloud", "cpu_cores": 4, "mem_mb": 4096, "gpus": 2, "cost_per_core_hour": 0.40}],
            "links": [{"a": "cheap", "b": "pricey", "latency_ms": 20, "bandwidth_mbps": 100}]}"#,
        )
        .unwrap()
    }

    fn one_component(extra: &str) -> PipelineSpec {
        parse(&format!(
            "pipeline p {{ component a {{ kind: ingestion cpu: 1 mem: 128 {extra} }} }}"
        ))
        .unwrap()
    }

    #[test]
    fn exact_fit_is_feasible() {
        let spec = one_component("");
        let topo = load_topology(
            r#"{"nodes": [{"id": "n", "tier": "edge", "cpu_cores": 1, "mem_mb": 128, "gpus": 0, "cost_per_core_hour": 0.1}], "links": []}"#,
        )
        .unwrap();
        let plan = plan_exact(&spec, &topo).unwrap();
        assert!(check_feasible(&spec, &topo, &plan).unwrap().feasible());
    }

    #[test]
    fn gpu_component_on_gpuless_node_violates_cap_gpu() {
        let spec = one_component("gpu: required");
        let topo = load_topology(
            r#"{"nodes": [{"id": "n", "tier": "edge", "cpu_cores": 4, "mem_mb": 4096, "gpus": 0, "cost_per_core_hour": 0.1}], "links": []}"#,
        )
        .unwrap();
        let plan = PlacementPlan {
            mode: PlanMode::Exact,
            cost_per_hour: 0.0,
            assignments: [("a".to_string(), "n".to_string())].into(),
            replicas: [("a".to_string(), 1u32)].into(),
        };
        let verdict = check_feasible(&spec, &topo, &plan).unwrap();
        assert_eq!(
            verdict.violations,
            vec![Violation { rule: Rule::CapGpu, subject: "n".into() }]
        );
    }

    #[test]
    fn exact_prefers_cheaper_node() {
        let spec = one_component("");
        let plan = plan_exact(&spec, &two_node_topology()).unwrap();
        assert_eq!(plan.assignments["a"], "cheap");
        assert_eq!(plan.cost_per_hour, 0.05);
        assert_eq!(plan.mode, PlanMode::Exact);
    }

    #[test]
    fn gpu_requirement_forces_the_expensive_node() {
        let spec = one_component("gpu: required");
        let plan = plan_exact(&spec, &two_node_topology()).unwrap();
        assert_eq!(plan.assignments["a"], "pricey");
    }

    #[test]
    fn infeasible_instance_is_proven() {
        let spec = one_component("gpu: required");
        let topo = load_topology(
            r#"{"nodes": [{"id": "n", "tier": "edge", "cpu_cores": 4, "mem_mb": 4096, "gpus": 0, "cost_per_core_hour": 0.1}], "links": []}"#,
        )
        .unwrap();
        assert!(matches!(plan_exact(&spec, &topo), Err(PlacementError::Infeasible)));
    }

    #[test]
    fn heuristic_matches_exact_when_no_choice_exists() {
        let spec = one_component("gpu: required");
        let topo = two_node_topology();
        let exact = plan_exact(&spec, &topo).unwrap();
        let greedy = plan_heuristic(&spec, &topo).unwrap();
        assert_eq!(greedy.assignments, exact.assignments);
        assert_eq!(greedy.cost_per_hour, exact.cost_per_hour);
        assert_eq!(greedy.mode, PlanMode::Heuristic);
    }

    #[test]
    fn adversarial_colocation_defeats_greedy_but_not_exact() {
        // The latency bound is only satisfiable with both components on one
        // node; greedy puts `a` on the cheap node first and gets stuck.
        let spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 2 mem: 128 }\n\
             component b { kind: stream cpu: 1 mem: 128 }\n\
             flow a -> b { max_latency_ms: 5 }\n\
             }",
        )
        .unwrap();
        let topo = load_topology(
            r#"{"nodes": [
              {"id": "cheap", "tier": "edge", "cpu_cores": 2, "mem_mb": 4096, "gpus": 0, "cost_per_core_hour": 0.01},
              {"id": "pricey", "tier": "cloud", "cpu_cores": 4, "mem_mb": 4096, "gpus": 0, "cost_per_core_hour": 1.0}],
            "links": [{"a": "cheap", "b": "pricey", "latency_ms": 50, "bandwidth_mbps": 100}]}"#,
        )
        .unwrap();
        let exact = plan_exact(&spec, &topo).unwrap();
        assert_eq!(exact.assignments["a"], "pricey");
        assert_eq!(exact.assignments["b"], "pricey");
        assert!(matches!(
            plan_heuristic(&spec, &topo),
            Err(PlacementError::HeuristicInfeasible(name)) if name == "b"
        ));
    }

    #[test]
    fn bounded_flow_across_unlinked_nodes_is_unreachable() {
        let spec = parse(
            "pipeline p {\n\
             component a { kind: ingestion cpu: 1 mem: 64 tier_hint: edge }\n\
             component b { kind: stream cpu: 1 mem: 64 tier_hint: cloud }\n\
             flow a -> b { max_latency_ms: 100 }\n\
             }",
        )
        .unwrap();
        let topo = load_topology(
            r#"{"nodes": [
              {"id": "e", "tier": "edge", "cpu_cores": 4, "mem_mb": 4096, "gpus": 0, "cost_per_core_hour": 0.1},
              {"id": "c", "tier": "cloud", "cpu_cores": 4, "mem_mb": 4096, "gpus": 0, "cost_per_core_hour": 0.1}],
            "links": []}"#,
        )
        .unwrap();
        let plan = PlacementPlan {
            mode: PlanMode::Exact,
            cost_per_hour: 0.0,
            assignments: [("a".to_string(), "e".to_string()), ("b".to_string(), "c".to_string())]
                .into(),
            replicas: [("a".to_string(), 1u32), ("b".to_string(), 1u32)].into(),
        };
        let verdict = check_feasible(&spec, &topo, &plan).unwrap();
        assert_eq!(
            verdict.violations,
            vec![Violation { rule: Rule::Unreachable, subject: "a->b".into() }]
        );
        assert!(matches!(plan_exact(&spec, &topo), Err(PlacementError::Infeasible)));
    }

    #[test]
    fn tier_hint_is_a_hard_constraint() {
        let spec = one_component("tier_hint: fog");
        let topo = two_node_topology();
        assert!(matches!(plan_exact(&spec, &topo), Err(PlacementError::Infeasible)));
    }

    #[test]
    fn plan_errors_on_unknown_names() {
        let spec = one_component("");
        let topo = two_node_topology();
        let bad_node = PlacementPlan {
            mode: PlanMode::Exact,
            cost_per_hour: 0.0,
            assignments: [("a".to_string(), "ghost".to_string())].into(),
            replicas: [("a".to_string(), 1u32)].into(),
        };
        assert!(matches!(
            check_feasible(&spec, &topo, &bad_node),
            Err(PlacementError::UnknownNode(_))
        ));
        let bad_comp = PlacementPlan {
            mode: PlanMode::Exact,
            cost_per_hour: 0.0,
            assignments: [("ghost".to_string(), "cheap".to_string())].into(),
            replicas: BTreeMap::new(),
        };
        assert!(matches!(
            check_feasible(&spec, &topo, &bad_comp),
            Err(PlacementError::UnknownComponent(_))
        ));
        let missing = PlacementPlan {
            mode: PlanMode::Exact,
            cost_per_hour: 0.0,
            assignments: BTreeMap::new(),
            replicas: BTreeMap::new(),
        };
        assert!(matches!(
            check_feasible(&spec, &topo, &missing),
            Err(PlacementError::UnassignedComponent(_))
        ));
    }

    #[test]
    fn plan_serialization_is_stable_and_round_trips() {
        let spec = one_component("");
        let plan = plan_exact(&spec, &two_node_topology()).unwrap();
        let a = plan.to_json();
        let b = plan_exact(&spec, &two_node_topology()).unwrap().to_json();
        assert_eq!(a, b);
        assert_eq!(PlacementPlan::from_json(&a).unwrap(), plan);
        // Keys appear in the documented order.
        let mode_pos = a.find("\"mode\"").unwrap();
        let cost_pos = a.find("\"cost_per_hour\"").unwrap();
        let assign_pos = a.find("\"assignments\"").unwrap();
        let repl_pos = a.find("\"replicas\"").unwrap();
        assert!(mode_pos < cost_pos && cost_pos < assign_pos && assign_pos < repl_pos);
    }
}
