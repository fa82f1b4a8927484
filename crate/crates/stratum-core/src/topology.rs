//! Cloud-fog-edge resource topology: node descriptions, undirected latency
//! links, and the JSON loader.
//!
//! Links are single-hop: two nodes without a direct link are mutually
//! unreachable for latency purposes, and `latency(x, x)` is 0 by definition.
//! Bandwidth is loaded and reported but never used as a constraint.

use crate::lang::is_identifier;
use serde::Serialize;
use serde_json::Value;
use std::collections::HashMap;
use std::fmt;

/// Infrastructure tier of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Edge,
    Fog,
    Cloud,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Edge => "edge",
            Tier::Fog => "fog",
            Tier::Cloud => "cloud",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDesc {
    pub id: String,
    pub tier: Tier,
    pub cpu_cores: f64,
    pub mem_mb: u64,
    pub gpus: u32,
    pub cost_per_core_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkDesc {
    pub a: String,
    pub b: String,
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
}

/// Loaded topology. Immutable after load; node and link order is file order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceTopology {
    pub nodes: Vec<NodeDesc>,
    pub links: Vec<LinkDesc>,
}

/// Topology file error carrying a JSON-path-style location such as
/// `nodes[2].cpu_cores`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct TopologyError {
    pub path: String,
    pub message: String,
}

impl TopologyError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        TopologyError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl ResourceTopology {
    pub fn node(&self, id: &str) -> Option<&NodeDesc> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Single-hop latency between two nodes in milliseconds; `None` means
    /// unreachable. Symmetric, and 0 for `x == x`. Fails on unknown ids.
    pub fn latency(&self, x: &str, y: &str) -> Result<Option<f64>, TopologyError> {
        for id in [x, y] {
            if self.node(id).is_none() {
                return Err(TopologyError::new("nodes", format!("unknown node id '{id}'")));
            }
        }
        if x == y {
            return Ok(Some(0.0));
        }
        Ok(self
            .links
            .iter()
            .find(|l| (l.a == x && l.b == y) || (l.a == y && l.b == x))
            .map(|l| l.latency_ms))
    }

    /// Canonical JSON rendering: schema field order, file order for nodes and
    /// links, two-space indent, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("topology serializes");
        text.push('\n');
        text
    }
}

/// Parses and checks a topology document from JSON text.
pub fn load_topology(source: &str) -> Result<ResourceTopology, TopologyError> {
    let root: Value = serde_json::from_str(source)
        .map_err(|e| TopologyError::new("$", format!("invalid JSON: {e}")))?;
    let obj = expect_object(&root, "$")?;
    reject_unknown_keys(obj, "$", &["nodes", "links"])?;

    let mut nodes = Vec::new();
    for (i, item) in expect_array(require(obj, "$", "nodes")?, "nodes")?.iter().enumerate() {
        nodes.push(parse_node(item, &format!("nodes[{i}]"))?);
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if ids.insert(n.id.as_str(), i).is_some() {
            return Err(TopologyError::new(
                format!("nodes[{i}].id"),
                format!("duplicate node id '{}'", n.id),
            ));
        }
    }

    let mut links = Vec::new();
    let links_value = obj.get("links").cloned().unwrap_or_else(|| Value::Array(Vec::new()));
    let mut seen_pairs: HashMap<(String, String), usize> = HashMap::new();
    for (i, item) in expect_array(&links_value, "links")?.iter().enumerate() {
        let path = format!("links[{i}]");
        let link = parse_link(item, &path)?;
        if link.a == link.b {
            return Err(TopologyError::new(path, format!("self-link on node '{}'", link.a)));
        }
        for (field, id) in [("a", &link.a), ("b", &link.b)] {
            if !ids.contains_key(id.as_str()) {
                return Err(TopologyError::new(
                    format!("{path}.{field}"),
                    format!("link endpoint '{id}' is not a declared node"),
                ));
            }
        }
        let mut pair = (link.a.clone(), link.b.clone());
        if pair.0 > pair.1 {
            std::mem::swap(&mut pair.0, &mut pair.1);
        }
        if seen_pairs.insert(pair, i).is_some() {
            return Err(TopologyError::new(
                path,
                format!("duplicate link between '{}' and '{}'", link.a, link.b),
            ));
        }
        links.push(link);
    }

    Ok(ResourceTopology { nodes, links })
}

fn parse_node(value: &Value, path: &str) -> Result<NodeDesc, TopologyError> {
    let obj = expect_object(value, path)?;
    reject_unknown_keys(
        obj,
        path,
        &["id", "tier", "cpu_cores", "mem_mb", "gpus", "cost_per_core_hour"],
    )?;
    let id = expect_identifier(require(obj, path, "id")?, &format!("{path}.id"))?;
    let tier_text = expect_string(require(obj, path, "tier")?, &format!("{path}.tier"))?;
    let tier = match tier_text.as_str() {
        "edge" => Tier::Edge,
        "fog" => Tier::Fog,
        "cloud" => Tier::Cloud,
        other => {
            return Err(TopologyError::new(
                format!("{path}.tier"),
                format!("tier must be edge, fog, or cloud, got '{other}'"),
            ))
        }
    };
    let cpu_cores = expect_number(require(obj, path, "cpu_cores")?, &format!("{path}.cpu_cores"))?;
    if cpu_cores <= 0.0 {
        return Err(TopologyError::new(
            format!("{path}.cpu_cores"),
            "cpu_cores must be greater than 0",
        ));
    }
    let mem_mb = expect_positive_integer(require(obj, path, "mem_mb")?, &format!("{path}.mem_mb"))?;
    let gpus_value = expect_number(require(obj, path, "gpus")?, &format!("{path}.gpus"))?;
    if gpus_value < 0.0 || gpus_value.fract() != 0.0 || gpus_value > u32::MAX as f64 {
        return Err(TopologyError::new(
            format!("{path}.gpus"),
            "gpus must be a non-negative integer",
        ));
    }
    let cost = expect_number(
        require(obj, path, "cost_per_core_hour")?,
        &format!("{path}.cost_per_core_hour"),
    )?;
    if cost < 0.0 {
        return Err(TopologyError::new(
            format!("{path}.cost_per_core_hour"),
            "cost_per_core_hour must not be negative",
        ));
    }
    Ok(NodeDesc {
        id,
        tier,
        cpu_cores,
        mem_mb,
        gpus: gpus_value as u32,
        cost_per_core_hour: cost,
    })
}

fn parse_link(value: &Value, path: &str) -> Result<LinkDesc, TopologyError> {
    let obj = expect_object(value, path)?;
    reject_unknown_keys(obj, path, &["a", "b", "latency_ms", "bandwidth_mbps"])?;
    let a = expect_identifier(require(obj, path, "a")?, &format!("{path}.a"))?;
    let b = expect_identifier(require(obj, path, "b")?, &format!("{path}.b"))?;
    let latency_ms = expect_number(require(obj, path, "latency_ms")?, &format!("{path}.latency_ms"))?;
    if latency_ms < 0.0 {
        return Err(TopologyError::new(
            format!("{path}.latency_ms"),
            "latency_ms must not be negative",
        ));
    }
    let bandwidth_mbps = expect_number(
        require(obj, path, "bandwidth_mbps")?,
        &format!("{path}.bandwidth_mbps"),
    )?;
    if bandwidth_mbps <= 0.0 {
        return Err(TopologyError::new(
            format!("{path}.bandwidth_mbps"),
            "bandwidth_mbps must be greater than 0",
        ));
    }
    Ok(LinkDesc {
        a,
        b,
        latency_ms,
        bandwidth_mbps,
    })
}

fn expect_object<'v>(
    value: &'v Value,
    path: &str,
) -> Result<&'v serde_json::Map<String, Value>, TopologyError> {
    value
        .as_object()
        .ok_or_else(|| TopologyError::new(path, "expected a JSON object"))
}

fn expect_array<'v>(value: &'v Value, path: &str) -> Result<&'v Vec<Value>, TopologyError> {
    value
        .as_array()
        .ok_or_else(|| TopologyError::new(path, "expected a JSON array"))
}

fn expect_string(value: &Value, path: &str) -> Result<String, TopologyError> {
    value
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| TopologyError::new(path, "expected a string"))
}

fn expect_identifier(value: &Value, path: &str) -> Result<String, TopologyError> {
    let s = expect_string(value, path)?;
    if is_identifier(&s) {
        Ok(s)
    } else {
        Err(TopologyError::new(path, format!("'{s}' is not a valid identifier")))
    }
}

fn expect_number(value: &Value, path: &str) -> Result<f64, TopologyError> {
    value
        .as_f64()
        .ok_or_else(|| TopologyError::new(path, "expected a number"))
}

fn expect_positive_integer(value: &Value, path: &str) -> Result<u64, TopologyError> {
    match value.as_u64() {
        Some(n) if n >= 1 => Ok(n),
        _ => Err(TopologyError::new(path, "expected a positive integer")),
    }
}

fn require<'v>(
    obj: &'v serde_json::Map<String, Value>,
    path: &str,
    key: &str,
) -> Result<&'v Value, TopologyError> {
    obj.get(key)
        .ok_or_else(|| TopologyError::new(format!("{path}.{key}"), "missing required key"))
}

fn reject_unknown_keys(
    obj: &serde_json::Map<String, Value>,
    path: &str,
    allowed: &[&str],
) -> Result<(), TopologyError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(TopologyError::new(
                format!("{path}.{key}"),
                format!("unknown key '{key}'"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLETON: &str = r#"{"nodes": [{"id": "n1", "tier": "edge", "cpu_cores": 2, "mem_mb": 1024, "gpus": 0, "cost_per_core_hour": 0.1}], "links": []}"#;

    #[test]
    fn singleton_topology_loads_and_self_latency_is_zero() {
        let topo = load_topology(SINGLETON).unwrap();
        assert_eq!(topo.nodes.len(), 1);
        assert_eq!(topo.latency("n1", "n1").unwrap(), Some(0.0));
    }

    #[test]
    fn self_link_is_rejected_with_path() {
        let src = r#"{"nodes": [{"id": "x", "tier": "edge", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0}],
                      "links": [{"a": "x", "b": "x", "latency_ms": 1, "bandwidth_mbps": 10}]}"#;
        let err = load_topology(src).unwrap_err();
        assert_eq!(err.path, "links[0]");
        assert!(err.message.contains("self-link"), "{}", err.message);
    }

    #[test]
    fn duplicate_pair_is_rejected_regardless_of_orientation() {
        let src = r#"{"nodes": [
              {"id": "x", "tier": "edge", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0},
              {"id": "y", "tier": "fog", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0}],
            "links": [
              {"a": "x", "b": "y", "latency_ms": 1, "bandwidth_mbps": 10},
              {"a": "y", "b": "x", "latency_ms": 2, "bandwidth_mbps": 10}]}"#;
        let err = load_topology(src).unwrap_err();
        assert_eq!(err.path, "links[1]");
        assert!(err.message.contains("duplicate link"), "{}", err.message);
    }

    #[test]
    fn unknown_keys_and_endpoints_are_rejected() {
        let err = load_topology(
            r#"{"nodes": [{"id": "x", "tier": "edge", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0, "color": "red"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "nodes[0].color");

        let err = load_topology(
            r#"{"nodes": [{"id": "x", "tier": "edge", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0}],
                "links": [{"a": "x", "b": "ghost", "latency_ms": 1, "bandwidth_mbps": 10}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "links[0].b");
    }

    #[test]
    fn range_violations_carry_field_paths() {
        let err = load_topology(
            r#"{"nodes": [{"id": "x", "tier": "edge", "cpu_cores": 0, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "nodes[0].cpu_cores");

        let err = load_topology(
            r#"{"nodes": [{"id": "x", "tier": "edge", "cpu_cores": 1, "mem_mb": 0, "gpus": 0, "cost_per_core_hour": 0}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "nodes[0].mem_mb");
    }

    #[test]
    fn duplicate_node_id_is_rejected() {
        let src = r#"{"nodes": [
              {"id": "x", "tier": "edge", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0},
              {"id": "x", "tier": "fog", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0}]}"#;
        let err = load_topology(src).unwrap_err();
        assert_eq!(err.path, "nodes[1].id");
    }

    #[test]
    fn latency_is_symmetric_and_none_when_unlinked() {
        let src = r#"{"nodes": [
              {"id": "x", "tier": "edge", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0},
              {"id": "y", "tier": "fog", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0},
              {"id": "z", "tier": "cloud", "cpu_cores": 1, "mem_mb": 1, "gpus": 0, "cost_per_core_hour": 0}],
            "links": [{"a": "x", "b": "y", "latency_ms": 7.5, "bandwidth_mbps": 10}]}"#;
        let topo = load_topology(src).unwrap();
        assert_eq!(topo.latency("x", "y").unwrap(), Some(7.5));
        assert_eq!(topo.latency("y", "x").unwrap(), Some(7.5));
        assert_eq!(topo.latency("x", "z").unwrap(), None);
        assert!(topo.latency("x", "ghost").is_err());
    }

    #[test]
    fn canonical_serialization_is_a_fixed_point() {
        let topo = load_topology(SINGLETON).unwrap();
        let canonical = topo.to_canonical_json();
        let reloaded = load_topology(&canonical).unwrap();
        assert_eq!(reloaded, topo);
        assert_eq!(reloaded.to_canonical_json(), canonical);
    }

    #[test]
    fn malformed_json_reports_root_path() {
        let err = load_topology("{not json").unwrap_err();
        assert_eq!(err.path, "$");
    }
}
