//! Typed inter-component call graph (ICCG) model and its canonical JSON form.
//!
//! An ICCG is a triple (V, X, Y): typed vertices, directed control-flow edges,
//! and labeled metadata edges. Graphs are immutable after construction and all
//! containers iterate in a canonical order, so equal graphs serialize to
//! identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SigError};

/// Reserved id of the synthetic entry-point vertex.
pub const SYSTEM_ID: &str = "SYSTEM";

/// Component types. `System` is reserved for the single synthetic
/// entry-point vertex with id [`SYSTEM_ID`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentType {
    Activity,
    Provider,
    Receiver,
    Service,
    System,
}

impl ComponentType {
    /// The four concrete (non-system) component types, in canonical order.
    pub const CONCRETE: [ComponentType; 4] = [
        ComponentType::Activity,
        ComponentType::Provider,
        ComponentType::Receiver,
        ComponentType::Service,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentType::Activity => "activity",
            ComponentType::Provider => "provider",
            ComponentType::Receiver => "receiver",
            ComponentType::Service => "service",
            ComponentType::System => "system",
        }
    }
}

impl fmt::Display for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Objective tiers for metadata labels, most significant first.
/// Control-flow edges form a fourth, least significant tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Filter = 0,
    ApiAction = 1,
    Taint = 2,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Filter, Tier::ApiAction, Tier::Taint];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Number of objective tiers: three metadata tiers plus the edge-count tier.
pub const TIER_COUNT: usize = 4;

/// Index of the edge-count tier within an objective vector.
pub const EDGE_TIER: usize = 3;

/// Metadata edge labels. Variant order matches canonical sort order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetadataLabel {
    /// Registration for a broadcast/intent source (on a SYSTEM -> component edge).
    IntentFilter { name: String },
    /// Call to an API from the suspicious list.
    SuspiciousApi { name: String },
    /// A suspicious runtime action.
    SuspiciousAction { name: String },
    /// Tainted data-flow from a source to a sink.
    TaintFlow { source: String, sink: String },
}

impl MetadataLabel {
    pub fn filter(name: &str) -> Self {
        MetadataLabel::IntentFilter { name: name.into() }
    }

    pub fn api(name: &str) -> Self {
        MetadataLabel::SuspiciousApi { name: name.into() }
    }

    pub fn action(name: &str) -> Self {
        MetadataLabel::SuspiciousAction { name: name.into() }
    }

    pub fn taint(source: &str, sink: &str) -> Self {
        MetadataLabel::TaintFlow {
            source: source.into(),
            sink: sink.into(),
        }
    }

    /// Objective tier this label scores in.
    pub fn tier(&self) -> Tier {
        match self {
            MetadataLabel::IntentFilter { .. } => Tier::Filter,
            MetadataLabel::SuspiciousApi { .. } | MetadataLabel::SuspiciousAction { .. } => {
                Tier::ApiAction
            }
            MetadataLabel::TaintFlow { .. } => Tier::Taint,
        }
    }
}

impl fmt::Display for MetadataLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetadataLabel::IntentFilter { name } => write!(f, "filter({name})"),
            MetadataLabel::SuspiciousApi { name } => write!(f, "api({name})"),
            MetadataLabel::SuspiciousAction { name } => write!(f, "action({name})"),
            MetadataLabel::TaintFlow { source, sink } => write!(f, "taint({source} -> {sink})"),
        }
    }
}

// Wire form of a label: {"kind": "...", "args": [...]}.
#[derive(Serialize, Deserialize)]
struct LabelWire {
    kind: String,
    args: Vec<String>,
}

impl Serialize for MetadataLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = match self {
            MetadataLabel::IntentFilter { name } => LabelWire {
                kind: "filter".into(),
                args: vec![name.clone()],
            },
            MetadataLabel::SuspiciousApi { name } => LabelWire {
                kind: "api".into(),
                args: vec![name.clone()],
            },
            MetadataLabel::SuspiciousAction { name } => LabelWire {
                kind: "action".into(),
                args: vec![name.clone()],
            },
            MetadataLabel::TaintFlow { source, sink } => LabelWire {
                kind: "taint".into(),
                args: vec![source.clone(), sink.clone()],
            },
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetadataLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let wire = LabelWire::deserialize(d)?;
        let arity = |n: usize| -> std::result::Result<(), D::Error> {
            if wire.args.len() == n {
                Ok(())
            } else {
                Err(D::Error::custom(format!(
                    "label kind {:?} takes {} arg(s), got {}",
                    wire.kind,
                    n,
                    wire.args.len()
                )))
            }
        };
        match wire.kind.as_str() {
            "filter" => {
                arity(1)?;
                Ok(MetadataLabel::filter(&wire.args[0]))
            }
            "api" => {
                arity(1)?;
                Ok(MetadataLabel::api(&wire.args[0]))
            }
            "action" => {
                arity(1)?;
                Ok(MetadataLabel::action(&wire.args[0]))
            }
            "taint" => {
                arity(2)?;
                Ok(MetadataLabel::taint(&wire.args[0], &wire.args[1]))
            }
            other => Err(D::Error::custom(format!("unknown label kind {other:?}"))),
        }
    }
}

/// A metadata edge: source vertex, destination vertex, label.
pub type MetaEdge = (String, String, MetadataLabel);

/// Immutable typed component graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iccg {
    name: String,
    vertices: BTreeMap<String, ComponentType>,
    cf_edges: BTreeSet<(String, String)>,
    meta_edges: BTreeSet<MetaEdge>,
}

impl Iccg {
    /// Builds a graph, checking every structural invariant. Violations name
    /// the offending entity.
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<(String, ComponentType)>,
        cf_edges: Vec<(String, String)>,
        meta_edges: Vec<MetaEdge>,
    ) -> Result<Iccg> {
        let name = name.into();
        let bad = |detail: String| SigError::InvalidGraph {
            graph: name.clone(),
            detail,
        };

        let mut vmap = BTreeMap::new();
        for (id, ty) in vertices {
            if id.is_empty() {
                return Err(bad("vertex with empty id".into()));
            }
            if (ty == ComponentType::System) != (id == SYSTEM_ID) {
                return Err(bad(format!(
                    "vertex {id:?} of type {ty}: id {SYSTEM_ID:?} and type system imply each other"
                )));
            }
            if vmap.insert(id.clone(), ty).is_some() {
                return Err(bad(format!("duplicate vertex id {id:?}")));
            }
        }

        let mut xset = BTreeSet::new();
        for (src, dst) in cf_edges {
            for end in [&src, &dst] {
                if !vmap.contains_key(end) {
                    return Err(bad(format!("cf edge ({src:?}, {dst:?}) references unknown vertex {end:?}")));
                }
            }
            if dst == SYSTEM_ID {
                return Err(bad(format!("cf edge ({src:?}, {dst:?}) enters {SYSTEM_ID}")));
            }
            if !xset.insert((src.clone(), dst.clone())) {
                return Err(bad(format!("duplicate cf edge ({src:?}, {dst:?})")));
            }
        }

        let mut yset = BTreeSet::new();
        for (src, dst, label) in meta_edges {
            for end in [&src, &dst] {
                if !vmap.contains_key(end) {
                    return Err(bad(format!("metadata edge ({src:?}, {dst:?}, {label}) references unknown vertex {end:?}")));
                }
            }
            let shown = format!("({src:?}, {dst:?}, {label})");
            if !yset.insert((src, dst, label)) {
                return Err(bad(format!("duplicate metadata edge {shown}")));
            }
        }

        Ok(Iccg {
            name,
            vertices: vmap,
            cf_edges: xset,
            meta_edges: yset,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertices(&self) -> impl Iterator<Item = (&str, ComponentType)> {
        self.vertices.iter().map(|(id, ty)| (id.as_str(), *ty))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices excluding the SYSTEM entry point.
    pub fn non_system_vertices(&self) -> impl Iterator<Item = (&str, ComponentType)> {
        self.vertices().filter(|(_, ty)| *ty != ComponentType::System)
    }

    pub fn vertex_type(&self, id: &str) -> Option<ComponentType> {
        self.vertices.get(id).copied()
    }

    pub fn has_system(&self) -> bool {
        self.vertices.contains_key(SYSTEM_ID)
    }

    pub fn cf_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.cf_edges.iter().map(|(s, d)| (s.as_str(), d.as_str()))
    }

    pub fn cf_edge_count(&self) -> usize {
        self.cf_edges.len()
    }

    pub fn has_cf_edge(&self, src: &str, dst: &str) -> bool {
        self.cf_edges.contains(&(src.to_string(), dst.to_string()))
    }

    pub fn meta_edges(&self) -> impl Iterator<Item = &MetaEdge> {
        self.meta_edges.iter()
    }

    pub fn meta_edge_count(&self) -> usize {
        self.meta_edges.len()
    }

    pub fn has_meta_edge(&self, src: &str, dst: &str, label: &MetadataLabel) -> bool {
        self.meta_edges
            .contains(&(src.to_string(), dst.to_string(), label.clone()))
    }

    /// Count of non-system vertices per concrete type. Types with no
    /// vertices are present with count zero.
    pub fn type_census(&self) -> BTreeMap<ComponentType, usize> {
        let mut census: BTreeMap<ComponentType, usize> =
            ComponentType::CONCRETE.iter().map(|t| (*t, 0)).collect();
        for (_, ty) in self.non_system_vertices() {
            *census.get_mut(&ty).expect("concrete type") += 1;
        }
        census
    }

    /// True when the graph carries no analyzable content: no non-system
    /// vertices, no control-flow edges and no metadata.
    pub fn is_trivial(&self) -> bool {
        self.non_system_vertices().next().is_none()
            && self.cf_edges.is_empty()
            && self.meta_edges.is_empty()
    }

    /// Returns a new graph whose control-flow relation is the transitive
    /// closure of this one. Vertices, metadata and name are unchanged.
    pub fn transitive_closure(&self) -> Iccg {
        let ids: Vec<&String> = self.vertices.keys().collect();
        let index: BTreeMap<&String, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let n = ids.len();

        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, d) in &self.cf_edges {
            succ[index[s]].push(index[d]);
        }

        // BFS from each vertex; an edge (u, v) exists in the closure iff v is
        // reachable from u by a non-empty path.
        let mut closed = BTreeSet::new();
        for start in 0..n {
            let mut seen = vec![false; n];
            let mut queue: Vec<usize> = succ[start].clone();
            while let Some(v) = queue.pop() {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                closed.insert((ids[start].clone(), ids[v].clone()));
                queue.extend(&succ[v]);
            }
        }

        Iccg {
            name: self.name.clone(),
            vertices: self.vertices.clone(),
            cf_edges: closed,
            meta_edges: self.meta_edges.clone(),
        }
    }

    /// Same graph under a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Iccg {
        let mut g = self.clone();
        g.name = name.into();
        g
    }
}

// ---------------------------------------------------------------------------
// Canonical JSON (graph format v1)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct VertexWire {
    id: String,
    #[serde(rename = "type")]
    ty: ComponentType,
}

#[derive(Serialize, Deserialize)]
struct MetaEdgeWire {
    src: String,
    dst: String,
    label: MetadataLabel,
}

#[derive(Serialize, Deserialize)]
struct IccgWire {
    name: String,
    vertices: Vec<VertexWire>,
    cf_edges: Vec<(String, String)>,
    meta_edges: Vec<MetaEdgeWire>,
}

impl From<&Iccg> for IccgWire {
    fn from(g: &Iccg) -> IccgWire {
        IccgWire {
            name: g.name.clone(),
            vertices: g
                .vertices
                .iter()
                .map(|(id, ty)| VertexWire {
                    id: id.clone(),
                    ty: *ty,
                })
                .collect(),
            cf_edges: g.cf_edges.iter().cloned().collect(),
            meta_edges: g
                .meta_edges
                .iter()
                .map(|(src, dst, label)| MetaEdgeWire {
                    src: src.clone(),
                    dst: dst.clone(),
                    label: label.clone(),
                })
                .collect(),
        }
    }
}

impl IccgWire {
    fn build(self) -> Result<Iccg> {
        Iccg::new(
            self.name,
            self.vertices.into_iter().map(|v| (v.id, v.ty)).collect(),
            self.cf_edges,
            self.meta_edges
                .into_iter()
                .map(|m| (m.src, m.dst, m.label))
                .collect(),
        )
    }
}

/// Serializes a graph to its canonical JSON text. Output is byte-stable:
/// equal graphs produce identical bytes.
pub fn iccg_to_json(g: &Iccg) -> String {
    let mut s = serde_json::to_string_pretty(&IccgWire::from(g)).expect("serializable");
    s.push('\n');
    s
}

/// Parses a graph from JSON text, validating every structural invariant.
/// `origin` names the source in error messages.
pub fn iccg_from_json(text: &str, origin: &str) -> Result<Iccg> {
    let wire: IccgWire = serde_json::from_str(text).map_err(|e| SigError::Parse {
        path: origin.to_string(),
        detail: e.to_string(),
    })?;
    wire.build()
}

pub fn load_iccg(path: &Path) -> Result<Iccg> {
    let text = std::fs::read_to_string(path).map_err(|e| SigError::io(path, e))?;
    iccg_from_json(&text, &path.display().to_string())
}

pub fn save_iccg(g: &Iccg, path: &Path) -> Result<()> {
    std::fs::write(path, iccg_to_json(g)).map_err(|e| SigError::io(path, e))
}

// ---------------------------------------------------------------------------
// Signatures
// ---------------------------------------------------------------------------

/// A family signature: the synthesized common graph plus its scores under
/// the weight table used at synthesis time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub graph: Iccg,
    pub family: String,
    /// Scalar suspiciousness: non-system vertex count + control-flow edge
    /// count + sum of metadata weights.
    pub suspiciousness: BigRational,
    /// Per-tier metadata weight sums (filter, api/action, taint).
    pub tier_scores: [BigRational; 3],
}

impl Signature {
    pub fn is_empty(&self) -> bool {
        self.graph.is_trivial()
    }
}

/// Exact rational on the wire as a numerator/denominator pair.
#[derive(Serialize, Deserialize)]
pub(crate) struct RationalWire {
    pub num: u64,
    pub den: u64,
}

impl RationalWire {
    pub(crate) fn encode(r: &BigRational, what: &str) -> Result<RationalWire> {
        let to_u64 = |v: &num::BigInt| -> Result<u64> {
            u64::try_from(v.clone()).map_err(|_| SigError::Overflow(format!("{what}: {v} exceeds u64")))
        };
        Ok(RationalWire {
            num: to_u64(r.numer())?,
            den: to_u64(r.denom())?,
        })
    }

    pub(crate) fn decode(&self) -> Result<BigRational> {
        if self.den == 0 {
            return Err(SigError::InvalidInput("rational with zero denominator".into()));
        }
        Ok(BigRational::new(self.num.into(), self.den.into()))
    }
}

#[derive(Serialize, Deserialize)]
struct SignatureWire {
    family: String,
    suspiciousness: RationalWire,
    tier_scores: Vec<RationalWire>,
    #[serde(flatten)]
    graph: IccgWire,
}

pub fn signature_to_json(sig: &Signature) -> Result<String> {
    let wire = SignatureWire {
        family: sig.family.clone(),
        suspiciousness: RationalWire::encode(&sig.suspiciousness, "suspiciousness")?,
        tier_scores: sig
            .tier_scores
            .iter()
            .map(|r| RationalWire::encode(r, "tier score"))
            .collect::<Result<Vec<_>>>()?,
        graph: IccgWire::from(&sig.graph),
    };
    let mut s = serde_json::to_string_pretty(&wire).expect("serializable");
    s.push('\n');
    Ok(s)
}

pub fn signature_from_json(text: &str, origin: &str) -> Result<Signature> {
    let wire: SignatureWire = serde_json::from_str(text).map_err(|e| SigError::Parse {
        path: origin.to_string(),
        detail: e.to_string(),
    })?;
    if wire.tier_scores.len() != 3 {
        return Err(SigError::Parse {
            path: origin.to_string(),
            detail: format!("expected 3 tier scores, got {}", wire.tier_scores.len()),
        });
    }
    let mut tiers = wire.tier_scores.iter().map(|r| r.decode());
    Ok(Signature {
        family: wire.family,
        suspiciousness: wire.suspiciousness.decode()?,
        tier_scores: [
            tiers.next().unwrap()?,
            tiers.next().unwrap()?,
            tiers.next().unwrap()?,
        ],
        graph: wire.graph.build()?,
    })
}

pub fn load_signature(path: &Path) -> Result<Signature> {
    let text = std::fs::read_to_string(path).map_err(|e| SigError::io(path, e))?;
    signature_from_json(&text, &path.display().to_string())
}

pub fn save_signature(sig: &Signature, path: &Path) -> Result<()> {
    std::fs::write(path, signature_to_json(sig)?).map_err(|e| SigError::io(path, e))
}
