//! Deterministic infrastructure-as-code manifests: one YAML-style document
//! per hosting node plus an index file. Keys are emitted in a fixed order
//! with two-space indent so golden-file comparisons are byte-exact; the
//! format is documented in `docs/manifest-format.md`.
//!
//! Model references are resolved and pinned at generation time: a manifest
//! never contains the version `latest`.

use crate::lang::{ComponentKind, PipelineSpec};
use crate::placement::{check_feasible, FeasibilityVerdict, PlacementError, PlacementPlan};
use crate::registry::{EvalStrategy, RegistryError, RegistryStore};
use crate::topology::{ResourceTopology, Tier};
use crate::validate::{validate, ValidationReport};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One deployable unit: a component with its resolved model, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestUnit {
    pub component: String,
    pub kind: ComponentKind,
    pub replicas: u32,
    pub cpu: f64,
    pub mem_mb: u64,
    pub gpu: bool,
    /// Pinned `name@version`, never `latest`.
    pub model: Option<String>,
}

/// A flow whose source is hosted on this manifest's node.
#[derive(Debug, Clone, PartialEq)]
pub struct WiringEntry {
    pub src: String,
    pub src_node: String,
    pub dst: String,
    pub dst_node: String,
    /// `None` when the hosting nodes are unlinked (rendered as `inf`).
    pub latency_ms: Option<f64>,
}

/// Per-node deployment document. Units are sorted by component name and
/// wiring by (src, dst).
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentManifest {
    pub node_id: String,
    pub tier: Tier,
    pub pipeline: String,
    pub units: Vec<ManifestUnit>,
    pub wiring: Vec<WiringEntry>,
}

impl DeploymentManifest {
    pub fn file_name(&self) -> String {
        format!("{}.deploy.yaml", self.node_id)
    }

    /// Renders the manifest document. Byte-deterministic.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "node: {}", self.node_id);
        let _ = writeln!(out, "tier: {}", self.tier);
        let _ = writeln!(out, "pipeline: {}", self.pipeline);
        let _ = writeln!(out, "units:");
        for u in &self.units {
            let _ = writeln!(out, "  - component: {}", u.component);
            let _ = writeln!(out, "    kind: {}", u.kind);
            let _ = writeln!(out, "    replicas: {}", u.replicas);
            let _ = writeln!(out, "    cpu: {}", u.cpu);
            let _ = writeln!(out, "    mem_mb: {}", u.mem_mb);
            let _ = writeln!(out, "    gpu: {}", u.gpu);
            match &u.model {
                Some(pinned) => {
                    let _ = writeln!(out, "    model: {pinned}");
                }
                None => {
                    let _ = writeln!(out, "    model: none");
                }
            }
        }
        if self.wiring.is_empty() {
            let _ = writeln!(out, "wiring: []");
        } else {
            let _ = writeln!(out, "wiring:");
            for w in &self.wiring {
                let _ = writeln!(
                    out,
                    "  - flow: {}@{} -> {}@{}",
                    w.src, w.src_node, w.dst, w.dst_node
                );
                match w.latency_ms {
                    Some(l) => {
                        let _ = writeln!(out, "    latency_ms: {l}");
                    }
                    None => {
                        let _ = writeln!(out, "    latency_ms: inf");
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CodegenError {
    #[error("spec failed validation:\n{}", .0.render())]
    InvalidSpec(ValidationReport),
    #[error("refusing to generate from an infeasible plan: {0:?}")]
    InfeasiblePlan(FeasibilityVerdict),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("cannot resolve model: {0}")]
    Model(#[from] RegistryError),
    #[error("manifest I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Transforms a validated spec plus a feasible plan into per-node manifests,
/// resolving every model reference through the registry. Output covers
/// exactly the nodes hosting at least one component, sorted by node id.
pub fn generate(
    spec: &PipelineSpec,
    topology: &ResourceTopology,
    plan: &PlacementPlan,
    registry: &RegistryStore,
    strategy: &EvalStrategy,
) -> Result<Vec<DeploymentManifest>, CodegenError> {
    let report = validate(spec);
    if !report.ok() {
        return Err(CodegenError::InvalidSpec(report));
    }
    let verdict = check_feasible(spec, topology, plan)?;
    if !verdict.feasible() {
        return Err(CodegenError::InfeasiblePlan(verdict));
    }

    let mut hosting: Vec<&str> = plan.assignments.values().map(String::as_str).collect();
    hosting.sort_unstable();
    hosting.dedup();

    let mut manifests = Vec::with_capacity(hosting.len());
    for node_id in hosting {
        let node = topology.node(node_id).expect("plan checked against topology");
        let mut units = Vec::new();
        for c in &spec.components {
            if plan.assignments[&c.name] != node_id {
                continue;
            }
            let model = match &c.model {
                Some(model_ref) => {
                    let record = registry.resolve(model_ref, strategy)?;
                    Some(format!("{}@{}", record.name, record.version))
                }
                None => None,
            };
            units.push(ManifestUnit {
                component: c.name.clone(),
                kind: c.kind,
                replicas: plan.replicas.get(&c.name).copied().unwrap_or(c.replicas),
                cpu: c.cpu,
                mem_mb: c.mem,
                gpu: c.gpu.is_required(),
                model,
            });
        }
        units.sort_by(|a, b| a.component.cmp(&b.component));

        let mut wiring = Vec::new();
        for f in &spec.flows {
            let src_node = plan.assignments[&f.src].clone();
            if src_node != node_id {
                continue;
            }
            let dst_node = plan.assignments[&f.dst].clone();
            let latency_ms = topology
                .latency(&src_node, &dst_node)
                .expect("plan checked against topology");
            wiring.push(WiringEntry {
                src: f.src.clone(),
                src_node,
                dst: f.dst.clone(),
                dst_node,
                latency_ms,
            });
        }
        wiring.sort_by(|a, b| a.src.cmp(&b.src).then_with(|| a.dst.cmp(&b.dst)));

        manifests.push(DeploymentManifest {
            node_id: node.id.clone(),
            tier: node.tier,
            pipeline: spec.name.clone(),
            units,
            wiring,
        });
    }
    Ok(manifests)
}

/// Renders the `index.yaml` document listing manifest files in node order.
pub fn render_index(pipeline: &str, manifests: &[DeploymentManifest]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pipeline: {pipeline}");
    if manifests.is_empty() {
        let _ = writeln!(out, "manifests: []");
    } else {
        let _ = writeln!(out, "manifests:");
        for m in manifests {
            let _ = writeln!(out, "  - {}", m.file_name());
        }
    }
    out
}

/// Writes `index.yaml` plus one `<node>.deploy.yaml` per manifest into `dir`,
/// creating it if needed. Returns the written paths, index first.
pub fn write_manifests(
    dir: &Path,
    pipeline: &str,
    manifests: &[DeploymentManifest],
) -> Result<Vec<PathBuf>, CodegenError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(manifests.len() + 1);
    let index_path = dir.join("index.yaml");
    std::fs::write(&index_path, render_index(pipeline, manifests))?;
    written.push(index_path);
    for m in manifests {
        let path = dir.join(m.file_name());
        std::fs::write(&path, m.render())?;
        written.push(path);
    }
    Ok(written)
}
