//! Abstract syntax tree for the pipeline specification language.

use std::fmt;

/// A parsed pipeline specification: the DAG of analytics components and the
/// flows between them. Component and flow order is source order; tie-breaking
/// in the placement solvers depends on it.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub name: String,
    pub components: Vec<Component>,
    pub flows: Vec<Flow>,
}

impl PipelineSpec {
    /// Looks up a component by name, returning the first declaration.
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }
}

/// The five analytics component kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    Ingestion,
    Stream,
    Batch,
    Inference,
    Visualization,
}

impl ComponentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComponentKind::Ingestion => "ingestion",
            ComponentKind::Stream => "stream",
            ComponentKind::Batch => "batch",
            ComponentKind::Inference => "inference",
            ComponentKind::Visualization => "visualization",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// GPU requirement of a component. One GPU unit is consumed per replica of a
/// `Required` component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GpuRequirement {
    Required,
    #[default]
    None,
}

impl GpuRequirement {
    pub fn is_required(&self) -> bool {
        matches!(self, GpuRequirement::Required)
    }
}

/// Tier placement hint. Anything but `Any` is a hard placement constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TierHint {
    Edge,
    Fog,
    Cloud,
    #[default]
    Any,
}

impl TierHint {
    pub fn as_str(&self) -> &'static str {
        match self {
            TierHint::Edge => "edge",
            TierHint::Fog => "fog",
            TierHint::Cloud => "cloud",
            TierHint::Any => "any",
        }
    }
}

/// Reference to a registered model, rendered as `name@version`.
/// `version` is either an explicit version or the literal `latest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRef {
    pub name: String,
    pub version: String,
}

impl ModelRef {
    pub fn is_latest(&self) -> bool {
        self.version == "latest"
    }
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

/// One analytics component. Numeric fields use fixed units: cpu in cores,
/// mem in MB, rate and service_rate in msg/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    pub cpu: f64,
    pub mem: u64,
    pub gpu: GpuRequirement,
    pub tier_hint: TierHint,
    pub replicas: u32,
    /// Ingestion rate in msg/s; only meaningful for `kind: ingestion`.
    pub rate: f64,
    /// Service capacity in msg/s per replica.
    pub service_rate: f64,
    /// Present iff `kind: inference`.
    pub model: Option<ModelRef>,
}

impl Component {
    pub const DEFAULT_REPLICAS: u32 = 1;
    pub const DEFAULT_RATE: f64 = 0.0;
    pub const DEFAULT_SERVICE_RATE: f64 = 10.0;
}

/// A dataflow edge between two components, optionally carrying a QoS latency
/// bound in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub src: String,
    pub dst: String,
    pub max_latency_ms: Option<f64>,
}

/// Parse failure with a 1-based position into the source text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: u32, column: u32, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Returns true when `s` matches `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifier_rules() {
        assert!(is_identifier("camera_ingest"));
        assert!(is_identifier("_x9"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("9lives"));
        assert!(!is_identifier("a-b"));
    }

    #[test]
    fn model_ref_renders_name_at_version() {
        let m = ModelRef {
            name: "traffic_vision".into(),
            version: "2".into(),
        };
        assert_eq!(m.to_string(), "traffic_vision@2");
        assert!(!m.is_latest());
    }
}
