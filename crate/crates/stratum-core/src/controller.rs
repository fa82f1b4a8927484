//! Closed-loop elasticity policy: watches per-tick utilization and emits
//! scale-out, scale-in, migrate, or saturated events.
//!
//! The default [`ThresholdPolicy`] uses threshold/hysteresis rules: a
//! component must stay above `high_util` for `high_window` consecutive ticks
//! (or below `low_util` for `low_window`) before anything fires, and actions
//! for one component are spaced at least `cooldown` ticks apart.

use crate::lang::{Component, PipelineSpec};
use crate::sim::SimState;
use crate::topology::{NodeDesc, ResourceTopology};
use std::fmt;

/// Tunables for [`ThresholdPolicy`]. Defaults: scale out above 0.8 utilization
/// sustained 3 ticks, scale in below 0.3 sustained 10 ticks, 5-tick cooldown,
/// never below one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub high_util: f64,
    pub low_util: f64,
    pub high_window: u32,
    pub low_window: u32,
    pub cooldown: u32,
    pub min_replicas: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            high_util: 0.8,
            low_util: 0.3,
            high_window: 3,
            low_window: 10,
            cooldown: 5,
            min_replicas: 1,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.high_util > 0.0 && self.high_util <= 1.0) {
            return Err(format!("high_util must be in (0, 1], got {}", self.high_util));
        }
        if !(self.low_util >= 0.0 && self.low_util < 1.0) {
            return Err(format!("low_util must be in [0, 1), got {}", self.low_util));
        }
        if self.low_util >= self.high_util {
            return Err(format!(
                "low_util must be below high_util, got {} >= {}",
                self.low_util, self.high_util
            ));
        }
        if self.high_window < 1 || self.low_window < 1 {
            return Err("windows must be at least 1 tick".into());
        }
        if self.min_replicas < 1 {
            return Err("min_replicas must be at least 1".into());
        }
        Ok(())
    }
}

/// Resource that blocked a scale-out, in reporting priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaturationReason {
    Gpu,
    Cpu,
    Mem,
}

impl fmt::Display for SaturationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SaturationReason::Gpu => "gpu",
            SaturationReason::Cpu => "cpu",
            SaturationReason::Mem => "mem",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionKind {
    ScaleOut { replicas: u32 },
    ScaleIn { replicas: u32 },
    Migrate { destination: String },
    Saturated { reason: SaturationReason },
}

/// One controller decision, logged as `t=<tick> <component> <kind> <detail>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub tick: u32,
    pub component: String,
    pub kind: ActionKind,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} {} ", self.tick, self.component)?;
        match &self.kind {
            ActionKind::ScaleOut { replicas } => write!(f, "scale_out {replicas}"),
            ActionKind::ScaleIn { replicas } => write!(f, "scale_in {replicas}"),
            ActionKind::Migrate { destination } => write!(f, "migrate {destination}"),
            ActionKind::Saturated { reason } => write!(f, "saturated {reason}"),
        }
    }
}

/// Everything a policy may look at when deciding. `tick` is the tick the
/// actions will be logged with and take effect at; utilization history covers
/// ticks `0..tick`.
pub struct PolicyContext<'a> {
    pub tick: u32,
    pub spec: &'a PipelineSpec,
    pub topology: &'a ResourceTopology,
    pub state: &'a SimState,
    /// Per component (spec source order), utilization per elapsed tick.
    pub utilization_history: &'a [Vec<f64>],
    /// Per component, the tick of its most recent logged action.
    pub last_action_tick: &'a [Option<u32>],
}

/// A controller decides after each tick; the run loop applies (or rejects)
/// its actions before the next tick. Implementations must be pure functions
/// of the context.
pub trait ControllerPolicy {
    fn decide(&self, ctx: &PolicyContext<'_>) -> Vec<Action>;
}

/// The default threshold/hysteresis policy.
#[derive(Debug, Clone, Default)]
pub struct ThresholdPolicy {
    config: PolicyConfig,
}

impl ThresholdPolicy {
    pub fn new(config: PolicyConfig) -> Result<Self, String> {
        config.validate()?;
        Ok(ThresholdPolicy { config })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }
}

/// True when the last `window` entries of `history`, padded at the front with
/// utilization 0 for ticks before the simulation started, all satisfy `pred`.
fn window_met(history: &[f64], window: u32, pred: impl Fn(f64) -> bool) -> bool {
    let window = window as usize;
    let observed = history.len().min(window);
    let padded = window - observed;
    (0..padded).all(|_| pred(0.0)) && history[history.len() - observed..].iter().all(|&u| pred(u))
}

/// Aggregate load currently hosted on `node`, from live replica counts.
fn node_usage(spec: &PipelineSpec, state: &SimState, node: &str) -> (f64, f64, f64) {
    let mut cpu = 0.0;
    let mut mem = 0.0;
    let mut gpu = 0.0;
    for (i, c) in spec.components.iter().enumerate() {
        if state.components[i].host == node {
            let r = f64::from(state.components[i].replicas);
            cpu += r * c.cpu;
            mem += r * c.mem as f64;
            if c.gpu.is_required() {
                gpu += r;
            }
        }
    }
    (cpu, mem, gpu)
}

/// Checks whether one more replica of `c` fits on `node` given current usage.
/// Reports the first blocking resource in gpu, cpu, mem order.
fn scale_out_headroom(
    spec: &PipelineSpec,
    state: &SimState,
    c: &Component,
    node: &NodeDesc,
) -> Result<(), SaturationReason> {
    let (cpu, mem, gpu) = node_usage(spec, state, &node.id);
    if c.gpu.is_required() && gpu + 1.0 > f64::from(node.gpus) {
        return Err(SaturationReason::Gpu);
    }
    if cpu + c.cpu > node.cpu_cores {
        return Err(SaturationReason::Cpu);
    }
    if mem + c.mem as f64 > node.mem_mb as f64 {
        return Err(SaturationReason::Mem);
    }
    Ok(())
}

impl ControllerPolicy for ThresholdPolicy {
    fn decide(&self, ctx: &PolicyContext<'_>) -> Vec<Action> {
        let cfg = &self.config;
        let mut actions = Vec::new();

        for (ci, c) in ctx.spec.components.iter().enumerate() {
            let history = &ctx.utilization_history[ci];
            let comp_state = &ctx.state.components[ci];
            let cooldown_ok = ctx.last_action_tick[ci]
                .is_none_or(|last| ctx.tick.saturating_sub(last) >= cfg.cooldown);
            if !cooldown_ok {
                continue;
            }

            if window_met(history, cfg.high_window, |u| u > cfg.high_util) {
                let host = ctx
                    .topology
                    .node(&comp_state.host)
                    .expect("state hosts come from the topology");
                match scale_out_headroom(ctx.spec, ctx.state, c, host) {
                    Ok(()) => actions.push(Action {
                        tick: ctx.tick,
                        component: c.name.clone(),
                        kind: ActionKind::ScaleOut { replicas: comp_state.replicas + 1 },
                    }),
                    Err(reason) => {
                        match migration_target(ctx, ci) {
                            Some(destination) => actions.push(Action {
                                tick: ctx.tick,
                                component: c.name.clone(),
                                kind: ActionKind::Migrate { destination },
                            }),
                            None => actions.push(Action {
                                tick: ctx.tick,
                                component: c.name.clone(),
                                kind: ActionKind::Saturated { reason },
                            }),
                        }
                    }
                }
                continue;
            }

            if comp_state.replicas > cfg.min_replicas
                && window_met(history, cfg.low_window, |u| u < cfg.low_util)
            {
                actions.push(Action {
                    tick: ctx.tick,
                    component: c.name.clone(),
                    kind: ActionKind::ScaleIn { replicas: comp_state.replicas - 1 },
                });
            }
        }
        actions
    }
}

/// Cheapest node (cost per core hour, ties by ascending id) that satisfies the
/// component's tier hint, has capacity for `replicas + 1` with the component
/// removed from its current host, and keeps every bounded adjacent flow within
/// its latency limit against the other components' current hosts.
fn migration_target(ctx: &PolicyContext<'_>, ci: usize) -> Option<String> {
    let spec = ctx.spec;
    let c = &spec.components[ci];
    let comp_state = &ctx.state.components[ci];
    let want = f64::from(comp_state.replicas + 1);

    let mut candidates: Vec<&NodeDesc> = ctx.topology.nodes.iter().collect();
    candidates.sort_by(|a, b| {
        a.cost_per_core_hour
            .partial_cmp(&b.cost_per_core_hour)
            .expect("costs are finite")
            .then_with(|| a.id.cmp(&b.id))
    });

    'candidate: for node in candidates {
        if !matches!(c.tier_hint, crate::lang::TierHint::Any) && c.tier_hint.as_str() != node.tier.as_str() {
            continue;
        }
        let (mut cpu, mut mem, mut gpu) = node_usage(spec, ctx.state, &node.id);
        if comp_state.host == node.id {
            let r = f64::from(comp_state.replicas);
            cpu -= r * c.cpu;
            mem -= r * c.mem as f64;
            if c.gpu.is_required() {
                gpu -= r;
            }
        }
        if cpu + want * c.cpu > node.cpu_cores
            || mem + want * c.mem as f64 > node.mem_mb as f64
            || (c.gpu.is_required() && gpu + want > f64::from(node.gpus))
        {
            continue;
        }
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
            let other_host = &ctx.state.components[oi].host;
            match ctx
                .topology
                .latency(&node.id, other_host)
                .expect("hosts come from the topology")
            {
                Some(latency) if latency <= bound => {}
                _ => continue 'candidate,
            }
        }
        return Some(node.id.clone());
    }
    None
}
