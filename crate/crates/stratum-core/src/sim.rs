//! Deterministic discrete-time fluid simulation of a deployed pipeline.
//!
//! Each tick is one second. Components are processed in topological order, so
//! output produced this tick is delivered downstream within the same tick;
//! latency realism comes from the link-latency term of the per-flow estimate,
//! not from tick counting. A component's completions are split equally across
//! its outgoing flows, which keeps conservation exact: everything generated
//! ends up either completed at a sink or sitting in a queue.
//!
//! Ticks are numbered from 0. When a controller is attached it decides after
//! each tick except the last; its actions are logged with, and take effect
//! at, the following tick.

use crate::controller::{Action, ActionKind, ControllerPolicy, PolicyContext};
use crate::lang::{ComponentKind, PipelineSpec};
use crate::placement::{
    check_feasible, FeasibilityVerdict, PlacementError, PlacementPlan, PlanMode, Violation,
};
use crate::topology::ResourceTopology;
use crate::validate::{topological_order, validate, ValidationReport};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Simulation horizon and scheduled ingestion-rate changes.
#[derive(Debug, Clone, Default)]
pub struct SimConfig {
    pub ticks: u32,
    pub rate_overrides: Vec<RateOverride>,
}

/// From `tick` onward, the named ingestion component generates at `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateOverride {
    pub component: String,
    pub tick: u32,
    pub rate: f64,
}

/// Live state of one component, indexed by spec source order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentState {
    pub queue: f64,
    pub replicas: u32,
    pub host: String,
    pub generated: f64,
    pub completed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub components: Vec<ComponentState>,
}

/// One row of the per-component metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTickRow {
    pub tick: u32,
    pub component: String,
    pub host: String,
    pub replicas: u32,
    pub in_rate: f64,
    pub utilization: f64,
    pub queue: f64,
    pub completions: f64,
}

/// One row of the per-flow metrics CSV. `latency_ms` is `None` when the
/// hosting nodes are unlinked (rendered as `inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTickRow {
    pub tick: u32,
    pub src: String,
    pub dst: String,
    pub latency_ms: Option<f64>,
    pub violation: bool,
}

/// Action log entry: applied controller actions, plus rejected ones kept for
/// the audit trail (the built-in policy never produces rejections).
#[derive(Debug, Clone, PartialEq)]
pub enum ActionLogEntry {
    Applied(Action),
    Rejected { action: Action, violations: Vec<Violation> },
}

impl std::fmt::Display for ActionLogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActionLogEntry::Applied(a) => write!(f, "{a}"),
            ActionLogEntry::Rejected { action, violations } => {
                let detail: Vec<String> = violations
                    .iter()
                    .map(|v| format!("{} {}", v.rule, v.subject))
                    .collect();
                write!(
                    f,
                    "t={} {} rejected {} ({})",
                    action.tick,
                    action.component,
                    kind_word(&action.kind),
                    detail.join(", ")
                )
            }
        }
    }
}

fn kind_word(kind: &ActionKind) -> &'static str {
    match kind {
        ActionKind::ScaleOut { .. } => "scale_out",
        ActionKind::ScaleIn { .. } => "scale_in",
        ActionKind::Migrate { .. } => "migrate",
        ActionKind::Saturated { .. } => "saturated",
    }
}

/// Exact mass balance over a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationSummary {
    pub generated: f64,
    pub sink_completions: f64,
    pub final_queues: f64,
}

impl ConservationSummary {
    /// `generated - sink_completions - final_queues`; 0 when mass balances.
    pub fn residual(&self) -> f64 {
        self.generated - self.sink_completions - self.final_queues
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub components: Vec<ComponentTickRow>,
    pub flows: Vec<FlowTickRow>,
    pub actions: Vec<ActionLogEntry>,
    pub conservation: ConservationSummary,
    pub final_state: SimState,
}

impl SimReport {
    /// Per-component metrics as CSV, header included.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("tick,component,host,replicas,in_rate,utilization,queue,completions\n");
        for r in &self.components {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.tick, r.component, r.host, r.replicas, r.in_rate, r.utilization, r.queue, r.completions
            );
        }
        out
    }

    /// Per-flow metrics as CSV, header included.
    pub fn flows_csv(&self) -> String {
        let mut out = String::from("tick,src,dst,latency_ms,violation\n");
        for r in &self.flows {
            let latency = match r.latency_ms {
                Some(v) => format!("{v}"),
                None => "inf".to_string(),
            };
            let _ = writeln!(out, "{},{},{},{},{}", r.tick, r.src, r.dst, latency, r.violation);
        }
        out
    }

    /// Action log, one line per entry.
    pub fn action_log(&self) -> String {
        let mut out = String::new();
        for entry in &self.actions {
            let _ = writeln!(out, "{entry}");
        }
        out
    }

    pub fn utilization_of(&self, component: &str, tick: u32) -> Option<f64> {
        self.components
            .iter()
            .find(|r| r.component == component && r.tick == tick)
            .map(|r| r.utilization)
    }

    pub fn queue_of(&self, component: &str, tick: u32) -> Option<f64> {
        self.components
            .iter()
            .find(|r| r.component == component && r.tick == tick)
            .map(|r| r.queue)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("spec failed validation:\n{}", .0.render())]
    InvalidSpec(ValidationReport),
    #[error("plan is not feasible: {0:?}")]
    InfeasiblePlan(FeasibilityVerdict),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("rate override targets unknown component '{0}'")]
    UnknownOverrideComponent(String),
    #[error("rate override targets '{0}', which is not an ingestion component")]
    OverrideNotIngestion(String),
    #[error("rate override tick {tick} is outside 0..{ticks}")]
    OverrideTickOutOfRange { tick: u32, ticks: u32 },
    #[error("rate override for '{component}' must not be negative, got {rate}")]
    NegativeOverrideRate { component: String, rate: f64 },
    #[error("simulation needs at least 1 tick")]
    ZeroTicks,
}

/// Runs the simulation for `config.ticks` ticks, with an optional elasticity
/// controller in the loop.
pub fn run(
    spec: &PipelineSpec,
    topology: &ResourceTopology,
    plan: &PlacementPlan,
    config: &SimConfig,
    policy: Option<&dyn ControllerPolicy>,
) -> Result<SimReport, SimError> {
    if config.ticks < 1 {
        return Err(SimError::ZeroTicks);
    }
    let report = validate(spec);
    if !report.ok() {
        return Err(SimError::InvalidSpec(report));
    }
    let verdict = check_feasible(spec, topology, plan)?;
    if !verdict.feasible() {
        return Err(SimError::InfeasiblePlan(verdict));
    }
    for o in &config.rate_overrides {
        let Some(c) = spec.component(&o.component) else {
            return Err(SimError::UnknownOverrideComponent(o.component.clone()));
        };
        if c.kind != ComponentKind::Ingestion {
            return Err(SimError::OverrideNotIngestion(o.component.clone()));
        }
        if o.tick >= config.ticks {
            return Err(SimError::OverrideTickOutOfRange { tick: o.tick, ticks: config.ticks });
        }
        if o.rate < 0.0 {
            return Err(SimError::NegativeOverrideRate {
                component: o.component.clone(),
                rate: o.rate,
            });
        }
    }

    let order = topological_order(spec).expect("validated specs are acyclic");
    let ncomp = spec.components.len();
    let name_index: BTreeMap<&str, usize> = spec
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let out_degree: Vec<usize> = spec
        .components
        .iter()
        .map(|c| spec.flows.iter().filter(|f| f.src == c.name).count())
        .collect();

    let mut state = SimState {
        components: spec
            .components
            .iter()
            .map(|c| ComponentState {
                queue: 0.0,
                replicas: plan.replicas.get(&c.name).copied().unwrap_or(c.replicas),
                host: plan.assignments[&c.name].clone(),
                generated: 0.0,
                completed: 0.0,
            })
            .collect(),
    };

    let mut component_rows = Vec::with_capacity(ncomp * config.ticks as usize);
    let mut flow_rows = Vec::with_capacity(spec.flows.len() * config.ticks as usize);
    let mut actions: Vec<ActionLogEntry> = Vec::new();
    let mut histories: Vec<Vec<f64>> = vec![Vec::with_capacity(config.ticks as usize); ncomp];
    let mut last_action_tick: Vec<Option<u32>> = vec![None; ncomp];

    for tick in 0..config.ticks {
        // Deliveries arriving at each component this tick.
        let mut inflow = vec![0.0f64; ncomp];
        let mut mu = vec![0.0f64; ncomp];
        let mut tick_rows: Vec<ComponentTickRow> = Vec::with_capacity(ncomp);

        for &ci in &order {
            let c = &spec.components[ci];
            let ingestion_rate = if c.kind == ComponentKind::Ingestion {
                effective_rate(c.rate, &config.rate_overrides, &c.name, tick)
            } else {
                0.0
            };
            let in_rate = ingestion_rate + inflow[ci];
            let st = &mut state.components[ci];
            mu[ci] = f64::from(st.replicas) * c.service_rate;
            let offered = st.queue + in_rate;
            let completions = offered.min(mu[ci]);
            st.queue = offered - completions;
            let utilization = ((st.queue + in_rate) / mu[ci]).min(1.0);
            st.generated += ingestion_rate;
            st.completed += completions;

            if out_degree[ci] > 0 && completions > 0.0 {
                let share = completions / out_degree[ci] as f64;
                for f in &spec.flows {
                    if f.src == c.name {
                        inflow[name_index[f.dst.as_str()]] += share;
                    }
                }
            }

            histories[ci].push(utilization);
            tick_rows.push(ComponentTickRow {
                tick,
                component: c.name.clone(),
                host: st.host.clone(),
                replicas: st.replicas,
                in_rate,
                utilization,
                queue: st.queue,
                completions,
            });
        }
        // Emit rows in source order regardless of the processing order.
        tick_rows.sort_by_key(|r| name_index[r.component.as_str()]);
        component_rows.extend(tick_rows);

        for f in &spec.flows {
            let si = name_index[f.src.as_str()];
            let di = name_index[f.dst.as_str()];
            let link = topology
                .latency(&state.components[si].host, &state.components[di].host)
                .expect("hosts stay inside the topology");
            let latency_ms = link.map(|l| l + 1000.0 * state.components[di].queue / mu[di]);
            let violation = match (f.max_latency_ms, latency_ms) {
                (Some(bound), Some(est)) => est > bound,
                (Some(_), None) => true,
                (None, _) => false,
            };
            flow_rows.push(FlowTickRow {
                tick,
                src: f.src.clone(),
                dst: f.dst.clone(),
                latency_ms,
                violation,
            });
        }

        // Controller hook: decide after every tick but the last; actions are
        // logged with and take effect at the next tick.
        if let Some(policy) = policy {
            if tick + 1 < config.ticks {
                let ctx = PolicyContext {
                    tick: tick + 1,
                    spec,
                    topology,
                    state: &state,
                    utilization_history: &histories,
                    last_action_tick: &last_action_tick,
                };
                for action in policy.decide(&ctx) {
                    apply_action(spec, topology, &mut state, &name_index, action, &mut actions, &mut last_action_tick);
                }
            }
        }
    }

    let generated: f64 = state.components.iter().map(|c| c.generated).sum();
    let sink_completions: f64 = state
        .components
        .iter()
        .enumerate()
        .filter(|(i, _)| out_degree[*i] == 0)
        .map(|(_, c)| c.completed)
        .sum();
    let final_queues: f64 = state.components.iter().map(|c| c.queue).sum();

    Ok(SimReport {
        components: component_rows,
        flows: flow_rows,
        actions,
        conservation: ConservationSummary { generated, sink_completions, final_queues },
        final_state: state,
    })
}

fn effective_rate(base: f64, overrides: &[RateOverride], component: &str, tick: u32) -> f64 {
    let mut rate = base;
    let mut best: Option<u32> = None;
    for o in overrides {
        if o.component == component && o.tick <= tick && best.is_none_or(|b| o.tick >= b) {
            best = Some(o.tick);
            rate = o.rate;
        }
    }
    rate
}

/// Applies one controller action, guarded by a feasibility re-check of the
/// post-action state. Infeasible actions are rejected, logged, and leave the
/// state untouched.
fn apply_action(
    spec: &PipelineSpec,
    topology: &ResourceTopology,
    state: &mut SimState,
    name_index: &BTreeMap<&str, usize>,
    action: Action,
    log: &mut Vec<ActionLogEntry>,
    last_action_tick: &mut [Option<u32>],
) {
    let Some(&ci) = name_index.get(action.component.as_str()) else {
        log.push(ActionLogEntry::Rejected { action, violations: Vec::new() });
        return;
    };

    if matches!(action.kind, ActionKind::Saturated { .. }) {
        last_action_tick[ci] = Some(action.tick);
        log.push(ActionLogEntry::Applied(action));
        return;
    }

    let mut next = state.clone();
    let valid = match &action.kind {
        ActionKind::ScaleOut { replicas } | ActionKind::ScaleIn { replicas } => {
            next.components[ci].replicas = *replicas;
            *replicas >= 1
        }
        ActionKind::Migrate { destination } => {
            next.components[ci].host = destination.clone();
            topology.node(destination).is_some()
        }
        ActionKind::Saturated { .. } => unreachable!("handled above"),
    };
    if !valid {
        log.push(ActionLogEntry::Rejected { action, violations: Vec::new() });
        return;
    }

    let probe = plan_of_state(spec, &next);
    match check_feasible(spec, topology, &probe) {
        Ok(verdict) if verdict.feasible() => {
            *state = next;
            last_action_tick[ci] = Some(action.tick);
            log.push(ActionLogEntry::Applied(action));
        }
        Ok(verdict) => {
            log.push(ActionLogEntry::Rejected { action, violations: verdict.violations });
        }
        Err(_) => {
            log.push(ActionLogEntry::Rejected { action, violations: Vec::new() });
        }
    }
}

/// Snapshot of the live state as a placement plan, for feasibility checks.
/// The cost field is not meaningful here and is left at 0.
pub fn plan_of_state(spec: &PipelineSpec, state: &SimState) -> PlacementPlan {
    let mut assignments = BTreeMap::new();
    let mut replicas = BTreeMap::new();
    for (i, c) in spec.components.iter().enumerate() {
        assignments.insert(c.name.clone(), state.components[i].host.clone());
        replicas.insert(c.name.clone(), state.components[i].replicas);
    }
    PlacementPlan {
        mode: PlanMode::Heuristic,
        cost_per_hour: 0.0,
        assignments,
        replicas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::placement::plan_exact;
    use crate::topology::load_topology;

    fn chain_spec(rate: f64, service_rate: f64) -> PipelineSpec {
        parse(&format!(
            "pipeline p {{\n\
             component src {{ kind: ingestion cpu: 1 mem: 64 rate: {rate} service_rate: 100 }}\n\
             component worker {{ kind: stream cpu: 1 mem: 64 service_rate: {service_rate} }}\n\
             flow src -> worker\n\
             }}"
        ))
        .unwrap()
    }

    fn one_node_topology() -> ResourceTopology {
        load_topology(
            r#"{"nodes": [{"id": "n1", "tier": "edge", "cpu_cores": 8, "mem_mb": 8192, "gpus": 0, "cost_per_core_hour": 0.1}], "links": []}"#,
        )
        .unwrap()
    }

    fn run_chain(rate: f64, service_rate: f64, ticks: u32) -> SimReport {
        let spec = chain_spec(rate, service_rate);
        let topo = one_node_topology();
        let plan = plan_exact(&spec, &topo).unwrap();
        run(&spec, &topo, &plan, &SimConfig { ticks, rate_overrides: vec![] }, None).unwrap()
    }

    #[test]
    fn quiescent_pipeline_stays_at_zero() {
        let report = run_chain(0.0, 10.0, 10);
        for row in &report.components {
            assert_eq!(row.utilization, 0.0);
            assert_eq!(row.queue, 0.0);
            assert_eq!(row.completions, 0.0);
        }
        assert_eq!(report.conservation.residual(), 0.0);
    }

    #[test]
    fn steady_chain_holds_exactly_half_utilization() {
        let report = run_chain(5.0, 10.0, 20);
        for tick in 0..20 {
            assert_eq!(report.utilization_of("worker", tick), Some(0.5));
            assert_eq!(report.queue_of("worker", tick), Some(0.0));
        }
        assert_eq!(report.conservation.residual(), 0.0);
    }

    #[test]
    fn overloaded_worker_grows_twenty_per_tick_at_full_utilization() {
        let report = run_chain(60.0, 40.0, 10);
        for tick in 0..10 {
            assert_eq!(report.utilization_of("worker", tick), Some(1.0));
            assert_eq!(report.queue_of("worker", tick), Some(20.0 * f64::from(tick + 1)));
        }
        // Queue at the final tick: 20 per tick since onset at tick 0.
        assert_eq!(report.queue_of("worker", 9), Some(200.0));
        assert_eq!(report.conservation.residual(), 0.0);
    }

    #[test]
    fn override_propagates_downstream_in_the_same_tick() {
        let spec = chain_spec(5.0, 100.0);
        let topo = one_node_topology();
        let plan = plan_exact(&spec, &topo).unwrap();
        let config = SimConfig {
            ticks: 6,
            rate_overrides: vec![RateOverride { component: "src".into(), tick: 3, rate: 50.0 }],
        };
        let report = run(&spec, &topo, &plan, &config, None).unwrap();
        let in_rate = |t: u32| {
            report
                .components
                .iter()
                .find(|r| r.component == "worker" && r.tick == t)
                .unwrap()
                .in_rate
        };
        assert_eq!(in_rate(2), 5.0);
        assert_eq!(in_rate(3), 50.0);
        assert_eq!(in_rate(5), 50.0);
    }

    #[test]
    fn fan_out_splits_completions_equally_and_conserves_mass() {
        let spec = parse(
            "pipeline p {\n\
             component src { kind: ingestion cpu: 1 mem: 64 rate: 10 service_rate: 100 }\n\
             component left { kind: stream cpu: 1 mem: 64 service_rate: 100 }\n\
             component right { kind: stream cpu: 1 mem: 64 service_rate: 100 }\n\
             flow src -> left\n\
             flow src -> right\n\
             }",
        )
        .unwrap();
        let topo = one_node_topology();
        let plan = plan_exact(&spec, &topo).unwrap();
        let report =
            run(&spec, &topo, &plan, &SimConfig { ticks: 8, rate_overrides: vec![] }, None).unwrap();
        let left = report.components.iter().find(|r| r.component == "left" && r.tick == 0).unwrap();
        assert_eq!(left.in_rate, 5.0);
        assert_eq!(report.conservation.residual(), 0.0);
        assert_eq!(report.conservation.sink_completions, 8.0 * 10.0);
    }

    #[test]
    fn identical_runs_produce_identical_reports() {
        let a = run_chain(7.0, 10.0, 25);
        let b = run_chain(7.0, 10.0, 25);
        assert_eq!(a, b);
        assert_eq!(a.metrics_csv(), b.metrics_csv());
        assert_eq!(a.flows_csv(), b.flows_csv());
    }

    #[test]
    fn csv_headers_match_the_interface() {
        let report = run_chain(0.0, 10.0, 1);
        assert!(report
            .metrics_csv()
            .starts_with("tick,component,host,replicas,in_rate,utilization,queue,completions\n"));
        assert!(report.flows_csv().starts_with("tick,src,dst,latency_ms,violation\n"));
    }

    #[test]
    fn flow_latency_estimate_includes_queueing_delay() {
        // Overloaded worker: estimate = 0 (same node) + 1000 * queue / mu.
        let report = run_chain(60.0, 40.0, 3);
        let flow0 = report.flows.iter().find(|f| f.tick == 0).unwrap();
        assert_eq!(flow0.latency_ms, Some(1000.0 * 20.0 / 40.0));
        assert!(!flow0.violation);
    }

    #[test]
    fn bounded_flow_flags_violations_under_backlog() {
        let spec = parse(
            "pipeline p {\n\
             component src { kind: ingestion cpu: 1 mem: 64 rate: 60 service_rate: 100 }\n\
             component worker { kind: stream cpu: 1 mem: 64 service_rate: 40 }\n\
             flow src -> worker { max_latency_ms: 50 }\n\
             }",
        )
        .unwrap();
        let topo = one_node_topology();
        let plan = plan_exact(&spec, &topo).unwrap();
        let report =
            run(&spec, &topo, &plan, &SimConfig { ticks: 2, rate_overrides: vec![] }, None).unwrap();
        // 1000 * 20 / 40 = 500 ms > 50 ms.
        assert!(report.flows[0].violation);
    }

    #[test]
    fn rejects_infeasible_plans_and_bad_overrides() {
        let spec = chain_spec(5.0, 10.0);
        let topo = one_node_topology();
        let plan = plan_exact(&spec, &topo).unwrap();

        let mut broken = plan.clone();
        broken.replicas.insert("worker".into(), 1000);
        let err = run(&spec, &topo, &broken, &SimConfig { ticks: 1, rate_overrides: vec![] }, None)
            .unwrap_err();
        assert!(matches!(err, SimError::InfeasiblePlan(_)));

        let bad = SimConfig {
            ticks: 5,
            rate_overrides: vec![RateOverride { component: "worker".into(), tick: 0, rate: 9.0 }],
        };
        assert!(matches!(
            run(&spec, &topo, &plan, &bad, None).unwrap_err(),
            SimError::OverrideNotIngestion(_)
        ));

        let bad = SimConfig {
            ticks: 5,
            rate_overrides: vec![RateOverride { component: "src".into(), tick: 5, rate: 9.0 }],
        };
        assert!(matches!(
            run(&spec, &topo, &plan, &bad, None).unwrap_err(),
            SimError::OverrideTickOutOfRange { .. }
        ));
    }

    #[test]
    fn rogue_policy_actions_are_rejected_and_logged() {
        struct Rogue;
        impl ControllerPolicy for Rogue {
            fn decide(&self, ctx: &PolicyContext<'_>) -> Vec<Action> {
                if ctx.tick == 1 {
                    vec![Action {
                        tick: ctx.tick,
                        component: "worker".into(),
                        kind: ActionKind::ScaleOut { replicas: 1000 },
                    }]
                } else {
                    Vec::new()
                }
            }
        }
        let spec = chain_spec(5.0, 10.0);
        let topo = one_node_topology();
        let plan = plan_exact(&spec, &topo).unwrap();
        let report = run(
            &spec,
            &topo,
            &plan,
            &SimConfig { ticks: 3, rate_overrides: vec![] },
            Some(&Rogue),
        )
        .unwrap();
        assert_eq!(report.final_state.components[1].replicas, 1);
        assert_eq!(report.actions.len(), 1);
        let line = report.action_log();
        assert!(line.starts_with("t=1 worker rejected scale_out ("), "{line}");
        assert!(line.contains("CAP_CPU"), "{line}");
    }
}
