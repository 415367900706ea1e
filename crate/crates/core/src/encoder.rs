//! Encodes the maximally-suspicious common subgraph problem over a set of
//! sample graphs as weighted partial MaxSAT.
//!
//! Variables:
//!   d(v)        candidate vertex v is selected into the signature
//!   f_i(v, w)   candidate v maps to vertex w of sample i (same type only;
//!               type preservation is compiled away rather than encoded)
//!   x0(u, v)    the signature keeps control-flow edge (u, v)
//!   y0(u, v, l) the signature keeps metadata edge (u, v) labeled l
//!
//! The candidate pool has min-census slots per concrete type, plus the shared
//! SYSTEM vertex when every sample carries one. Hard clauses force every model
//! to decode into a graph that embeds into every sample; soft unit clauses on
//! y0 (tiered by label kind, weight = quantized rarity) and x0 (weight 1,
//! bottom tier) score the signature.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Result, SigError};
use crate::model::{ComponentType, Iccg, MetadataLabel, Tier};
use crate::sat::{Clause, Lit};
use crate::wcnf::{Soft, WcnfProblem};
use crate::weights::{label_universe, quantize, WeightTable};

/// A position in the candidate pool: the shared SYSTEM vertex or a typed slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PoolRef {
    System,
    Slot(usize),
}

/// Candidate vertex pool: one slot per type per min-census count, in
/// canonical type order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexPool {
    pub slot_types: Vec<ComponentType>,
    /// True iff every sample contains the SYSTEM vertex.
    pub has_system: bool,
}

impl VertexPool {
    pub fn slot_count(&self) -> usize {
        self.slot_types.len()
    }
}

/// Pool sized by the per-type minimum census over all samples. A common
/// subgraph can never use more vertices of a type than its scarcest sample
/// offers, so the pool is complete.
pub fn build_pool(samples: &[Iccg]) -> Result<VertexPool> {
    if samples.is_empty() {
        return Err(SigError::InvalidInput("no sample graphs".into()));
    }
    let censuses: Vec<_> = samples.iter().map(|s| s.type_census()).collect();
    let mut slot_types = Vec::new();
    for ty in ComponentType::CONCRETE {
        let m = censuses.iter().map(|c| c[&ty]).min().expect("non-empty");
        slot_types.extend(std::iter::repeat_n(ty, m));
    }
    let with_system = samples.iter().filter(|s| s.has_system()).count();
    if with_system != 0 && with_system != samples.len() {
        log::warn!(
            "{} of {} samples lack the SYSTEM vertex; SYSTEM-anchored structure is pruned",
            samples.len() - with_system,
            samples.len()
        );
    }
    Ok(VertexPool {
        slot_types,
        has_system: with_system == samples.len(),
    })
}

/// Mapping between solver variables and the entities they stand for.
#[derive(Debug, Clone)]
pub struct VarMap {
    pub pool: VertexPool,
    /// Slot index -> d variable.
    pub domain: Vec<u32>,
    /// Sample index -> SYSTEM anchor variable (present iff pool.has_system).
    pub anchors: Vec<Option<u32>>,
    /// Sample index -> (slot, sample vertex id) -> f variable.
    pub embed: Vec<BTreeMap<(usize, String), u32>>,
    pub x0: BTreeMap<(PoolRef, PoolRef), u32>,
    pub y0: BTreeMap<(PoolRef, PoolRef, MetadataLabel), u32>,
}

impl VarMap {
    fn ref_type(&self, r: PoolRef) -> ComponentType {
        match r {
            PoolRef::System => ComponentType::System,
            PoolRef::Slot(i) => self.pool.slot_types[i],
        }
    }
}

/// Candidate target ids for a pool ref within one sample, in id order.
fn candidates<'a>(sample: &'a Iccg, ty: ComponentType) -> Vec<&'a str> {
    sample
        .vertices()
        .filter(|(_, t)| *t == ty)
        .map(|(id, _)| id)
        .collect()
}

/// True when some edge of `sample` could realize signature edge (u, v):
/// endpoint types match and loop structure is compatible (a pool self-loop
/// needs a sample self-loop; distinct pool endpoints need distinct targets).
fn cf_feasible(sample: &Iccg, ut: ComponentType, vt: ComponentType, same_ref: bool) -> bool {
    sample.cf_edges().any(|(w, wp)| {
        sample.vertex_type(w) == Some(ut)
            && sample.vertex_type(wp) == Some(vt)
            && (w == wp) == same_ref
    })
}

fn meta_feasible(
    sample: &Iccg,
    ut: ComponentType,
    vt: ComponentType,
    same_ref: bool,
    label: &MetadataLabel,
) -> bool {
    sample.meta_edges().any(|(w, wp, l)| {
        l == label
            && sample.vertex_type(w) == Some(ut)
            && sample.vertex_type(wp) == Some(vt)
            && (w == wp) == same_ref
    })
}

/// Builds the MaxSAT instance for the given samples under a weight table.
pub fn encode(samples: &[Iccg], weights: &WeightTable) -> Result<(WcnfProblem, VarMap)> {
    let pool = build_pool(samples)?;
    let m = pool.slot_count();
    let n = samples.len();

    let mut next_var: u32 = 0;
    let mut alloc = || {
        next_var += 1;
        next_var
    };

    // --- variables, in a fixed order ---
    let domain: Vec<u32> = (0..m).map(|_| alloc()).collect();

    let mut anchors: Vec<Option<u32>> = Vec::with_capacity(n);
    let mut embed: Vec<BTreeMap<(usize, String), u32>> = Vec::with_capacity(n);
    for sample in samples {
        anchors.push(pool.has_system.then(&mut alloc));
        let mut map = BTreeMap::new();
        for (slot, ty) in pool.slot_types.iter().enumerate() {
            for w in candidates(sample, *ty) {
                map.insert((slot, w.to_string()), alloc());
            }
        }
        embed.push(map);
    }

    let mut refs: Vec<PoolRef> = Vec::with_capacity(m + 1);
    if pool.has_system {
        refs.push(PoolRef::System);
    }
    refs.extend((0..m).map(PoolRef::Slot));
    let rtype = |r: PoolRef| match r {
        PoolRef::System => ComponentType::System,
        PoolRef::Slot(i) => pool.slot_types[i],
    };

    let mut x0: BTreeMap<(PoolRef, PoolRef), u32> = BTreeMap::new();
    for &u in &refs {
        for &v in &refs {
            if v == PoolRef::System {
                continue; // nothing flows into SYSTEM
            }
            let feasible = samples
                .iter()
                .all(|s| cf_feasible(s, rtype(u), rtype(v), u == v));
            if feasible {
                x0.insert((u, v), alloc());
            }
        }
    }

    // Labels must occur in every sample to be shareable at all.
    let mut common_labels: BTreeSet<MetadataLabel> = label_universe([&samples[0]]);
    for s in &samples[1..] {
        let here = label_universe([s]);
        common_labels.retain(|l| here.contains(l));
    }

    let mut y0: BTreeMap<(PoolRef, PoolRef, MetadataLabel), u32> = BTreeMap::new();
    for &u in &refs {
        for &v in &refs {
            for label in &common_labels {
                let feasible = samples
                    .iter()
                    .all(|s| meta_feasible(s, rtype(u), rtype(v), u == v, label));
                if feasible {
                    y0.insert((u, v, label.clone()), alloc());
                }
            }
        }
    }

    let vm = VarMap {
        pool,
        domain,
        anchors,
        embed,
        x0,
        y0,
    };

    // --- hard clauses ---
    let mut hard: Vec<Clause> = Vec::new();
    let flit = |i: usize, r: PoolRef, w: &str| -> Lit {
        match r {
            PoolRef::System => vm.anchors[i].expect("anchor exists") as Lit,
            PoolRef::Slot(slot) => vm.embed[i][&(slot, w.to_string())] as Lit,
        }
    };

    // SYSTEM anchoring: each sample's SYSTEM maps to SYSTEM, unconditionally.
    for anchor in vm.anchors.iter().flatten() {
        hard.push(vec![*anchor as Lit]);
    }

    for (i, sample) in samples.iter().enumerate() {
        for (slot, ty) in vm.pool.slot_types.iter().enumerate() {
            let cands = candidates(sample, *ty);
            let d = vm.domain[slot] as Lit;

            // Constant domain: d(v) <-> some f(v, w).
            let mut definition: Clause = vec![-d];
            definition.extend(cands.iter().map(|w| flit(i, PoolRef::Slot(slot), w)));
            hard.push(definition);
            for w in &cands {
                hard.push(vec![-flit(i, PoolRef::Slot(slot), w), d]);
            }

            // Function: at most one target per slot.
            for a in 0..cands.len() {
                for b in a + 1..cands.len() {
                    hard.push(vec![
                        -flit(i, PoolRef::Slot(slot), cands[a]),
                        -flit(i, PoolRef::Slot(slot), cands[b]),
                    ]);
                }
            }
        }

        // One-to-one: distinct same-type slots never share a target.
        for u in 0..vm.pool.slot_types.len() {
            for v in u + 1..vm.pool.slot_types.len() {
                if vm.pool.slot_types[u] != vm.pool.slot_types[v] {
                    continue;
                }
                for w in candidates(sample, vm.pool.slot_types[u]) {
                    hard.push(vec![
                        -flit(i, PoolRef::Slot(u), w),
                        -flit(i, PoolRef::Slot(v), w),
                    ]);
                }
            }
        }
    }

    // Control-flow preservation: a kept edge whose endpoints map to a
    // non-edge of some sample is contradictory.
    for (&(u, v), &x) in &vm.x0 {
        for (i, sample) in samples.iter().enumerate() {
            for w in candidates(sample, vm.ref_type(u)) {
                for wp in candidates(sample, vm.ref_type(v)) {
                    if (w == wp) != (u == v) {
                        continue; // incompatible loop structure
                    }
                    if sample.has_cf_edge(w, wp) {
                        continue;
                    }
                    let mut clause = vec![-(x as Lit)];
                    if u != PoolRef::System {
                        clause.push(-flit(i, u, w));
                    }
                    if v != PoolRef::System && v != u {
                        clause.push(-flit(i, v, wp));
                    }
                    hard.push(clause);
                }
            }
        }
    }

    // Metadata preservation, same shape.
    for (&(u, v, ref label), &y) in &vm.y0 {
        for (i, sample) in samples.iter().enumerate() {
            for w in candidates(sample, vm.ref_type(u)) {
                for wp in candidates(sample, vm.ref_type(v)) {
                    if (w == wp) != (u == v) {
                        continue;
                    }
                    if sample.has_meta_edge(w, wp, label) {
                        continue;
                    }
                    let mut clause = vec![-(y as Lit)];
                    if u != PoolRef::System {
                        clause.push(-flit(i, u, w));
                    }
                    if v != PoolRef::System && v != u {
                        clause.push(-flit(i, v, wp));
                    }
                    hard.push(clause);
                }
            }
        }
    }

    // No spurious structure: kept edges need both endpoints selected.
    for (&(u, v), &x) in &vm.x0 {
        for r in [u, v] {
            if let PoolRef::Slot(slot) = r {
                hard.push(vec![-(x as Lit), vm.domain[slot] as Lit]);
            }
        }
    }
    for (&(u, v, _), &y) in &vm.y0 {
        for r in [u, v] {
            if let PoolRef::Slot(slot) = r {
                hard.push(vec![-(y as Lit), vm.domain[slot] as Lit]);
            }
        }
    }

    // --- soft clauses: metadata by tier, then edges ---
    let mut tiers: Vec<Vec<Soft>> = vec![Vec::new(); 4];
    for tier in Tier::ALL {
        for (&(_, _, ref label), &y) in &vm.y0 {
            if label.tier() != tier {
                continue;
            }
            let w = quantize(&weights.weight(label))?;
            tiers[tier.index()].push((vec![y as Lit], w));
        }
    }
    for &x in vm.x0.values() {
        tiers[3].push((vec![x as Lit], 1));
    }

    let problem = WcnfProblem::new(next_var, hard, tiers)?;
    Ok((problem, vm))
}
