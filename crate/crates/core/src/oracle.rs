//! Exhaustive reference for the maximally-suspicious common subgraph.
//!
//! Independent of the solver pipeline: enumerates candidate vertex subsets of
//! the first sample (any common subgraph embeds into it, so that is no loss),
//! all injective type-preserving maps into the remaining samples, and keeps
//! every edge and metadata triple consistent across a map tuple. Guarded to
//! six non-system vertices per sample; cost grows factorially beyond that.

use std::collections::BTreeMap;

use crate::error::{Result, SigError};
use crate::model::{ComponentType, Iccg, MetadataLabel, EDGE_TIER, SYSTEM_ID, TIER_COUNT};
use crate::synth::quantized_objective;
use crate::weights::{quantize, WeightTable};

pub const ORACLE_VERTEX_LIMIT: usize = 6;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub graph: Iccg,
    pub objective: [u64; TIER_COUNT],
}

/// All ways to injectively assign `slots` (base vertex indices) to distinct
/// `targets`, in deterministic order.
fn injective_assignments(slots: &[usize], targets: &[String]) -> Vec<Vec<(usize, String)>> {
    fn go(
        slots: &[usize],
        targets: &[String],
        used: &mut Vec<bool>,
        acc: &mut Vec<(usize, String)>,
        out: &mut Vec<Vec<(usize, String)>>,
    ) {
        let Some(&slot) = slots.first() else {
            out.push(acc.clone());
            return;
        };
        for (t, target) in targets.iter().enumerate() {
            if used[t] {
                continue;
            }
            used[t] = true;
            acc.push((slot, target.clone()));
            go(&slots[1..], targets, used, acc, out);
            acc.pop();
            used[t] = false;
        }
    }
    let mut out = Vec::new();
    go(slots, targets, &mut vec![false; targets.len()], &mut Vec::new(), &mut out);
    out
}

/// All injective type-preserving maps of the chosen base vertices into one
/// sample. Empty when a type group exceeds the sample's census.
fn maps_into(
    chosen: &[usize],
    base_verts: &[(String, ComponentType)],
    sample: &Iccg,
) -> Vec<BTreeMap<usize, String>> {
    let mut by_type: BTreeMap<ComponentType, Vec<usize>> = BTreeMap::new();
    for &i in chosen {
        by_type.entry(base_verts[i].1).or_default().push(i);
    }

    let mut maps: Vec<BTreeMap<usize, String>> = vec![BTreeMap::new()];
    for (ty, group) in &by_type {
        let targets: Vec<String> = sample
            .vertices()
            .filter(|(_, t)| t == ty)
            .map(|(id, _)| id.to_string())
            .collect();
        let options = injective_assignments(group, &targets);
        if options.is_empty() {
            return Vec::new();
        }
        let mut grown = Vec::with_capacity(maps.len() * options.len());
        for m in &maps {
            for opt in &options {
                let mut next = m.clone();
                next.extend(opt.iter().cloned());
                grown.push(next);
            }
        }
        maps = grown;
    }
    maps
}

/// Exhaustively computes the optimal objective vector and a witness graph.
pub fn oracle_mscs(samples: &[Iccg], weights: &WeightTable) -> Result<OracleResult> {
    if samples.is_empty() {
        return Err(SigError::InvalidInput("no sample graphs".into()));
    }
    for s in samples {
        let n = s.non_system_vertices().count();
        if n > ORACLE_VERTEX_LIMIT {
            return Err(SigError::TooLarge(format!(
                "sample {} has {n} non-system vertices (limit {ORACLE_VERTEX_LIMIT})",
                s.name()
            )));
        }
    }

    let all_system = samples.iter().all(Iccg::has_system);
    let base = &samples[0];
    let base_verts: Vec<(String, ComponentType)> = base
        .non_system_vertices()
        .map(|(id, ty)| (id.to_string(), ty))
        .collect();
    let k = base_verts.len();
    let vert_index: BTreeMap<&str, usize> = base_verts
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (id.as_str(), i))
        .collect();

    let quant = |label: &MetadataLabel| quantize(&weights.weight(label));

    // Best = (objective vector, vertex count, kept base edges, kept triples).
    type Kept = (Vec<(String, String)>, Vec<(String, String, MetadataLabel)>);
    let mut best: Option<([u64; TIER_COUNT], usize, u64, Kept)> = None;

    for mask in 0u64..(1 << k) {
        let chosen: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();

        // In-scope vertex test for edge endpoints of the base graph.
        let in_scope = |id: &str| -> bool {
            if id == SYSTEM_ID {
                return all_system;
            }
            mask >> vert_index[id] & 1 == 1
        };

        let mut per_sample: Vec<Vec<BTreeMap<usize, String>>> = Vec::with_capacity(samples.len() - 1);
        let mut dead = false;
        for s in &samples[1..] {
            let maps = maps_into(&chosen, &base_verts, s);
            if maps.is_empty() {
                dead = true;
                break;
            }
            per_sample.push(maps);
        }
        if dead {
            continue;
        }

        // Odometer over one map choice per remaining sample.
        let mut pick = vec![0usize; per_sample.len()];
        loop {
            let translate = |i: usize, id: &str| -> String {
                if id == SYSTEM_ID {
                    SYSTEM_ID.to_string()
                } else {
                    per_sample[i][pick[i]][&vert_index[id]].clone()
                }
            };

            let mut kept_edges: Vec<(String, String)> = Vec::new();
            for (u, v) in base.cf_edges() {
                if !in_scope(u) || !in_scope(v) {
                    continue;
                }
                let everywhere = (0..per_sample.len())
                    .all(|i| samples[i + 1].has_cf_edge(&translate(i, u), &translate(i, v)));
                if everywhere {
                    kept_edges.push((u.to_string(), v.to_string()));
                }
            }

            let mut kept_meta: Vec<(String, String, MetadataLabel)> = Vec::new();
            let mut vector = [0u64; TIER_COUNT];
            for (u, v, label) in base.meta_edges() {
                if !in_scope(u) || !in_scope(v) {
                    continue;
                }
                let everywhere = (0..per_sample.len())
                    .all(|i| samples[i + 1].has_meta_edge(&translate(i, u), &translate(i, v), label));
                if everywhere {
                    vector[label.tier().index()] += quant(label)?;
                    kept_meta.push((u.to_string(), v.to_string(), label.clone()));
                }
            }
            vector[EDGE_TIER] = kept_edges.len() as u64;

            let better = match &best {
                None => true,
                Some((bv, bcount, _, _)) => {
                    vector > *bv || (vector == *bv && chosen.len() < *bcount)
                }
            };
            if better {
                best = Some((vector, chosen.len(), mask, (kept_edges, kept_meta)));
            }

            // Advance the odometer.
            let mut idx = 0;
            loop {
                if idx == pick.len() {
                    break;
                }
                pick[idx] += 1;
                if pick[idx] < per_sample[idx].len() {
                    break;
                }
                pick[idx] = 0;
                idx += 1;
            }
            if idx == pick.len() {
                break;
            }
        }
    }

    let (vector, _, mask, (kept_edges, kept_meta)) = best.expect("empty subset always evaluated");

    // Rebuild with canonical ids, mirroring the synthesizer's naming.
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    let mut per_type: BTreeMap<ComponentType, usize> = BTreeMap::new();
    let mut vertices: Vec<(String, ComponentType)> = Vec::new();
    if all_system {
        vertices.push((SYSTEM_ID.into(), ComponentType::System));
        rename.insert(SYSTEM_ID.into(), SYSTEM_ID.into());
    }
    for ty in ComponentType::CONCRETE {
        for (i, (id, vty)) in base_verts.iter().enumerate() {
            if *vty == ty && mask >> i & 1 == 1 {
                let c = per_type.entry(ty).or_insert(0);
                let fresh = format!("{}{}", ty.as_str(), c);
                *c += 1;
                rename.insert(id.clone(), fresh.clone());
                vertices.push((fresh, ty));
            }
        }
    }
    let graph = Iccg::new(
        "reference",
        vertices,
        kept_edges
            .into_iter()
            .map(|(u, v)| (rename[&u].clone(), rename[&v].clone()))
            .collect(),
        kept_meta
            .into_iter()
            .map(|(u, v, l)| (rename[&u].clone(), rename[&v].clone(), l))
            .collect(),
    )
    .map_err(|e| SigError::Internal(format!("reference graph malformed: {e}")))?;

    let recheck = quantized_objective(&graph, weights)?;
    if recheck != vector {
        return Err(SigError::Internal(format!(
            "reference objective mismatch: counted {vector:?}, graph scores {recheck:?}"
        )));
    }
    Ok(OracleResult {
        graph,
        objective: vector,
    })
}
