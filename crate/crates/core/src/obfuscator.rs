//! Seeded graph transformations that mimic common evasion tactics.
//!
//! Each operation preserves graph validity (no edges into the system vertex,
//! no duplicate ids). Runs are reproducible: the same recipe and seed yield
//! the same output graph.

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Result, SigError};
use crate::model::{ComponentType, Iccg, MetadataLabel, Tier, SYSTEM_ID};

/// One obfuscation step. A recipe is a JSON array of these.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ObfuscationOp {
    /// Replace every non-system component id with a generated one.
    RenameComponents,
    /// Subdivide `count` randomly chosen control-flow edges u -> v into
    /// u -> dummy -> v, where dummy is a fresh activity.
    InsertDummyOnEdge { count: usize },
    /// Delete round(fraction * n) metadata edges where n is the number of
    /// candidates; `tier` restricts candidates to one tier when present.
    RemoveMetadata {
        fraction: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tier: Option<Tier>,
    },
    /// Add `count` control-flow edges between existing vertices that are not
    /// already connected. Never targets the system vertex or adds self-loops.
    AddNoiseEdges { count: usize },
}

pub fn recipe_from_json(text: &str) -> Result<Vec<ObfuscationOp>> {
    serde_json::from_str(text).map_err(|e| SigError::InvalidInput(format!("bad recipe: {e}")))
}

pub fn recipe_to_json(ops: &[ObfuscationOp]) -> String {
    let mut s = serde_json::to_string_pretty(ops).expect("recipe serialization cannot fail");
    s.push('\n');
    s
}

struct Parts {
    name: String,
    vertices: Vec<(String, ComponentType)>,
    cf_edges: Vec<(String, String)>,
    meta_edges: Vec<(String, String, MetadataLabel)>,
}

impl Parts {
    fn of(g: &Iccg) -> Self {
        Parts {
            name: g.name().to_string(),
            vertices: g.vertices().map(|(id, ty)| (id.to_string(), ty)).collect(),
            cf_edges: g
                .cf_edges()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            meta_edges: g.meta_edges().cloned().collect(),
        }
    }

    fn build(self) -> Result<Iccg> {
        Iccg::new(self.name, self.vertices, self.cf_edges, self.meta_edges)
            .map_err(|e| SigError::Internal(format!("obfuscation broke the graph: {e}")))
    }
}

fn fresh_id(parts: &Parts, prefix: &str, counter: &mut usize) -> String {
    loop {
        let id = format!("{prefix}{counter}");
        *counter += 1;
        if !parts.vertices.iter().any(|(v, _)| *v == id) {
            return id;
        }
    }
}

fn rename_components(parts: &mut Parts, rng: &mut ChaCha8Rng) {
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    for (id, _) in &parts.vertices {
        if id == SYSTEM_ID {
            rename.insert(id.clone(), id.clone());
        } else {
            rename.insert(id.clone(), format!("obf{:08x}", rng.random_range(0..u32::MAX)));
        }
    }
    for (id, _) in &mut parts.vertices {
        *id = rename[id].clone();
    }
    for (a, b) in &mut parts.cf_edges {
        *a = rename[a].clone();
        *b = rename[b].clone();
    }
    for (a, b, _) in &mut parts.meta_edges {
        *a = rename[a].clone();
        *b = rename[b].clone();
    }
}

fn insert_dummies(parts: &mut Parts, count: usize, rng: &mut ChaCha8Rng, counter: &mut usize) {
    for _ in 0..count {
        if parts.cf_edges.is_empty() {
            return;
        }
        let at = rng.random_range(0..parts.cf_edges.len());
        let (src, dst) = parts.cf_edges.swap_remove(at);
        let dummy = fresh_id(parts, "dummy", counter);
        parts.vertices.push((dummy.clone(), ComponentType::Activity));
        parts.cf_edges.push((src, dummy.clone()));
        parts.cf_edges.push((dummy, dst));
    }
}

fn remove_metadata(parts: &mut Parts, fraction: f64, tier: Option<Tier>, rng: &mut ChaCha8Rng) {
    let candidates: Vec<usize> = parts
        .meta_edges
        .iter()
        .enumerate()
        .filter(|(_, (_, _, label))| tier.is_none_or(|t| label.tier() == t))
        .map(|(i, _)| i)
        .collect();
    let k = (fraction * candidates.len() as f64).round() as usize;
    let k = k.min(candidates.len());
    let mut doomed: Vec<usize> = index_sample(rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    doomed.sort_unstable();
    for i in doomed.into_iter().rev() {
        parts.meta_edges.remove(i);
    }
}

fn add_noise_edges(parts: &mut Parts, count: usize, rng: &mut ChaCha8Rng) {
    let sources: Vec<String> = parts.vertices.iter().map(|(id, _)| id.clone()).collect();
    let targets: Vec<String> = sources.iter().filter(|id| *id != SYSTEM_ID).cloned().collect();
    let mut non_edges: Vec<(String, String)> = Vec::new();
    for s in &sources {
        for d in &targets {
            if s != d && !parts.cf_edges.iter().any(|(a, b)| a == s && b == d) {
                non_edges.push((s.clone(), d.clone()));
            }
        }
    }
    let k = count.min(non_edges.len());
    let mut picks: Vec<usize> = index_sample(rng, non_edges.len(), k).into_iter().collect();
    picks.sort_unstable();
    for i in picks {
        parts.cf_edges.push(non_edges[i].clone());
    }
}

/// Applies a recipe to a graph with a fixed seed.
pub fn obfuscate(graph: &Iccg, ops: &[ObfuscationOp], seed: u64) -> Result<Iccg> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Parts::of(graph);
    let mut dummy_counter = 0usize;
    for op in ops {
        match op {
            ObfuscationOp::RenameComponents => rename_components(&mut parts, &mut rng),
            ObfuscationOp::InsertDummyOnEdge { count } => {
                insert_dummies(&mut parts, *count, &mut rng, &mut dummy_counter)
            }
            ObfuscationOp::RemoveMetadata { fraction, tier } => {
                if !(0.0..=1.0).contains(fraction) {
                    return Err(SigError::InvalidInput(format!(
                        "remove_metadata fraction {fraction} outside [0, 1]"
                    )));
                }
                remove_metadata(&mut parts, *fraction, *tier, &mut rng)
            }
            ObfuscationOp::AddNoiseEdges { count } => add_noise_edges(&mut parts, *count, &mut rng),
        }
    }
    parts.build()
}
