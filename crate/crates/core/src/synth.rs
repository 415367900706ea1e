//! Signature synthesis: solve the encoded instance, decode the model into a
//! graph, verify it embeds into every sample, and score it.

use num::{BigRational, Zero};

use crate::encoder::{encode, PoolRef, VarMap};
use crate::error::{Result, SigError};
use crate::matcher::exact_match;
use crate::maxsat::{maximize_lex_with, Assignment};
use crate::model::{ComponentType, Iccg, Signature, EDGE_TIER, SYSTEM_ID, TIER_COUNT};
use crate::weights::{quantize, WeightTable};

/// Reads the selected signature graph out of a model. Selected slots get
/// fresh canonical ids per type ("receiver0", "service0", ...) in pool order.
pub fn decode(sol: &Assignment, vm: &VarMap) -> Result<Iccg> {
    let truth = |var: u32| -> bool { sol.model[var as usize] };

    // Canonical id per selected slot.
    let mut ids: Vec<Option<String>> = vec![None; vm.pool.slot_count()];
    let mut per_type: std::collections::BTreeMap<ComponentType, usize> = Default::default();
    for (slot, ty) in vm.pool.slot_types.iter().enumerate() {
        if truth(vm.domain[slot]) {
            let k = per_type.entry(*ty).or_insert(0);
            ids[slot] = Some(format!("{}{}", ty.as_str(), k));
            *k += 1;
        }
    }

    let mut vertices: Vec<(String, ComponentType)> = Vec::new();
    let system_selected = vm.anchors.iter().flatten().any(|&v| truth(v));
    if system_selected {
        vertices.push((SYSTEM_ID.into(), ComponentType::System));
    }
    for (slot, id) in ids.iter().enumerate() {
        if let Some(id) = id {
            vertices.push((id.clone(), vm.pool.slot_types[slot]));
        }
    }

    let resolve = |r: PoolRef| -> Result<String> {
        match r {
            PoolRef::System => Ok(SYSTEM_ID.into()),
            PoolRef::Slot(slot) => ids[slot].clone().ok_or_else(|| {
                SigError::Internal(format!("edge kept on unselected slot {slot}"))
            }),
        }
    };

    let mut cf = Vec::new();
    for (&(u, v), &x) in &vm.x0 {
        if truth(x) {
            cf.push((resolve(u)?, resolve(v)?));
        }
    }
    let mut meta = Vec::new();
    for ((u, v, label), &y) in &vm.y0 {
        if truth(y) {
            meta.push((resolve(*u)?, resolve(*v)?, label.clone()));
        }
    }

    Iccg::new("signature", vertices, cf, meta)
        .map_err(|e| SigError::Internal(format!("decoded graph is malformed: {e}")))
}

/// Weighted size broken into solver tiers: quantized metadata weight per
/// tier, then the control-flow edge count.
pub fn quantized_objective(g: &Iccg, weights: &WeightTable) -> Result<[u64; TIER_COUNT]> {
    let mut v = [0u64; TIER_COUNT];
    for (_, _, label) in g.meta_edges() {
        let w = quantize(&weights.weight(label))?;
        let t = label.tier().index();
        v[t] = v[t]
            .checked_add(w)
            .ok_or_else(|| SigError::Overflow("tier sum exceeds u64".into()))?;
    }
    v[EDGE_TIER] = g.cf_edge_count() as u64;
    Ok(v)
}

/// Scalar weighted size f(G): non-system vertex count, plus control-flow
/// edge count, plus the exact rational weight of every metadata edge.
/// Also returns the per-tier metadata sums.
pub fn signature_suspiciousness(
    g: &Iccg,
    weights: &WeightTable,
) -> (BigRational, [BigRational; 3]) {
    let mut tiers = [
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
    ];
    for (_, _, label) in g.meta_edges() {
        tiers[label.tier().index()] += weights.weight(label);
    }
    let structural = g.non_system_vertices().count() + g.cf_edge_count();
    let scalar = BigRational::from_integer(structural.into())
        + tiers.iter().sum::<BigRational>();
    (scalar, tiers)
}

/// Synthesizes the family signature: the common subgraph of all samples that
/// maximizes (filter weight, api/action weight, taint weight, edge count)
/// lexicographically, with a minimal vertex set among optimal solutions.
///
/// The result is verified before being returned: it must embed into every
/// sample and its recomputed objective must equal the solver's.
pub fn infer_signature(samples: &[Iccg], weights: &WeightTable, family: &str) -> Result<Signature> {
    if samples.is_empty() {
        return Err(SigError::InvalidInput(
            "signature inference needs at least one sample".into(),
        ));
    }
    if samples.len() == 1 {
        log::warn!(
            "inferring a signature from a single sample; it will overfit to {}",
            samples[0].name()
        );
    }

    let (problem, vm) = encode(samples, weights)?;
    let sol = maximize_lex_with(&problem, &vm.domain)?;
    let graph = decode(&sol, &vm)?;

    for sample in samples {
        if exact_match(&graph, sample).is_none() {
            return Err(SigError::Internal(format!(
                "synthesized signature does not embed into sample {}",
                sample.name()
            )));
        }
    }
    let recomputed = quantized_objective(&graph, weights)?;
    if recomputed[..] != sol.objective[..] {
        return Err(SigError::Internal(format!(
            "objective mismatch: solver {:?}, graph {:?}",
            sol.objective, recomputed
        )));
    }

    let (suspiciousness, tier_scores) = signature_suspiciousness(&graph, weights);
    Ok(Signature {
        graph: graph.renamed(family),
        family: family.to_string(),
        suspiciousness,
        tier_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MetadataLabel;
    use crate::weights::compute_weights;

    fn v(id: &str, ty: ComponentType) -> (String, ComponentType) {
        (id.to_string(), ty)
    }

    fn e(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    fn me(a: &str, b: &str, l: MetadataLabel) -> (String, String, MetadataLabel) {
        (a.to_string(), b.to_string(), l)
    }

    fn sms_pair() -> Vec<Iccg> {
        let g1 = Iccg::new(
            "m1",
            vec![
                v(SYSTEM_ID, ComponentType::System),
                v("rcv", ComponentType::Receiver),
                v("svc", ComponentType::Service),
                v("ui", ComponentType::Activity),
            ],
            vec![e(SYSTEM_ID, "rcv"), e("rcv", "svc"), e(SYSTEM_ID, "ui")],
            vec![
                me(SYSTEM_ID, "rcv", MetadataLabel::filter("SMS_RECEIVED")),
                me("svc", "svc", MetadataLabel::taint("DeviceId", "Internet")),
                me("ui", "ui", MetadataLabel::filter("MAIN")),
            ],
        )
        .unwrap();
        let g2 = Iccg::new(
            "m2",
            vec![
                v(SYSTEM_ID, ComponentType::System),
                v("recv2", ComponentType::Receiver),
                v("work2", ComponentType::Service),
            ],
            vec![e(SYSTEM_ID, "recv2"), e("recv2", "work2")],
            vec![
                me(SYSTEM_ID, "recv2", MetadataLabel::filter("SMS_RECEIVED")),
                me("work2", "work2", MetadataLabel::taint("DeviceId", "Internet")),
                me("work2", "work2", MetadataLabel::api("sendTextMessage")),
            ],
        )
        .unwrap();
        vec![g1, g2]
    }

    #[test]
    fn recovers_shared_core() {
        let samples = sms_pair();
        let weights = compute_weights(&[]);
        let sig = infer_signature(&samples, &weights, "smsfam").unwrap();
        let g = &sig.graph;

        let verts: Vec<_> = g.vertices().map(|(id, ty)| (id.to_string(), ty)).collect();
        assert_eq!(
            verts,
            vec![
                v(SYSTEM_ID, ComponentType::System),
                v("receiver0", ComponentType::Receiver),
                v("service0", ComponentType::Service),
            ]
        );
        assert!(g.has_cf_edge(SYSTEM_ID, "receiver0"));
        assert!(g.has_cf_edge("receiver0", "service0"));
        assert_eq!(g.cf_edge_count(), 2);
        assert!(g.has_meta_edge(SYSTEM_ID, "receiver0", &MetadataLabel::filter("SMS_RECEIVED")));
        assert!(g.has_meta_edge("service0", "service0", &MetadataLabel::taint("DeviceId", "Internet")));
        assert_eq!(g.meta_edge_count(), 2);

        // Weight 1 per label (empty corpus): tier sums quantize to 1000.
        assert_eq!(quantized_objective(g, &weights).unwrap(), [1000, 0, 1000, 2]);
        assert_eq!(sig.family, "smsfam");
        // f = 2 non-system vertices + 2 edges + weights 1 + 1.
        assert_eq!(sig.suspiciousness, BigRational::from_integer(6.into()));
    }

    #[test]
    fn single_sample_signature_covers_everything() {
        let samples = sms_pair();
        let weights = compute_weights(&[]);
        let sig = infer_signature(&samples[..1], &weights, "solo").unwrap();
        // Against itself, the whole sample is common.
        assert_eq!(
            quantized_objective(&sig.graph, &weights).unwrap(),
            quantized_objective(&samples[0], &weights).unwrap()
        );
        assert!(exact_match(&sig.graph, &samples[0]).is_some());
    }

    #[test]
    fn planted_core_recovered_from_noisy_samples() {
        let weights = compute_weights(&[]);
        // Five samples share receiver -> service with a filter and a taint;
        // every sample adds noise that no other sample repeats. Noise vertex
        // types alternate so not even the noise edge shape is common.
        let samples: Vec<Iccg> = (0..5)
            .map(|k| {
                let noise = format!("noise{k}");
                let noise_ty = if k % 2 == 0 {
                    ComponentType::Activity
                } else {
                    ComponentType::Provider
                };
                Iccg::new(
                    format!("s{k}"),
                    vec![
                        v(SYSTEM_ID, ComponentType::System),
                        v("r", ComponentType::Receiver),
                        v("s", ComponentType::Service),
                        v(&noise, noise_ty),
                    ],
                    vec![
                        e(SYSTEM_ID, "r"),
                        e("r", "s"),
                        e("s", &noise),
                    ],
                    vec![
                        me(SYSTEM_ID, "r", MetadataLabel::filter("BOOT_COMPLETED")),
                        me("s", "s", MetadataLabel::taint("Contacts", "Internet")),
                        me(&noise, &noise, MetadataLabel::api(&format!("uniq{k}"))),
                    ],
                )
                .unwrap()
            })
            .collect();
        let core = Iccg::new(
            "core",
            vec![
                v(SYSTEM_ID, ComponentType::System),
                v("r", ComponentType::Receiver),
                v("s", ComponentType::Service),
            ],
            vec![e(SYSTEM_ID, "r"), e("r", "s")],
            vec![
                me(SYSTEM_ID, "r", MetadataLabel::filter("BOOT_COMPLETED")),
                me("s", "s", MetadataLabel::taint("Contacts", "Internet")),
            ],
        )
        .unwrap();
        let sig = infer_signature(&samples, &weights, "planted").unwrap();
        assert_eq!(
            quantized_objective(&sig.graph, &weights).unwrap(),
            quantized_objective(&core, &weights).unwrap()
        );
        // The noise activity slot exists in the pool but must not be kept.
        assert!(sig.graph.vertices().all(|(_, ty)| ty != ComponentType::Activity));
    }

    #[test]
    fn unrelated_samples_give_trivial_signature() {
        let weights = compute_weights(&[]);
        let g1 = Iccg::new(
            "a",
            vec![v(SYSTEM_ID, ComponentType::System), v("x", ComponentType::Activity)],
            vec![e(SYSTEM_ID, "x")],
            vec![me("x", "x", MetadataLabel::api("one"))],
        )
        .unwrap();
        let g2 = Iccg::new(
            "b",
            vec![v(SYSTEM_ID, ComponentType::System), v("y", ComponentType::Provider)],
            vec![],
            vec![me("y", "y", MetadataLabel::api("two"))],
        )
        .unwrap();
        let sig = infer_signature(&[g1, g2], &weights, "none").unwrap();
        assert!(sig.is_empty());
        assert!(sig.suspiciousness.is_zero());
    }

    #[test]
    fn decoded_models_always_embed() {
        // Beyond the optimum: force individual structure vars off and check
        // that any hard-satisfying model decodes to a common subgraph.
        use crate::maxsat::maximize_lex;
        use crate::sat::{sat_solve, SatOutcome};

        let samples = sms_pair();
        let weights = compute_weights(&[]);
        let (p, vm) = encode(&samples, &weights).unwrap();
        let opt = maximize_lex(&p).unwrap();

        let mut structure_vars: Vec<u32> = vm.x0.values().copied().collect();
        structure_vars.extend(vm.y0.values().copied());
        for &var in &structure_vars {
            let out = sat_solve(p.num_vars(), p.hard(), &[-(var as i32)]).unwrap();
            let SatOutcome::Sat(model) = out else {
                panic!("hard clauses satisfiable with var {var} off");
            };
            let sol = Assignment {
                objective: p.objective_of(&model),
                model,
            };
            let g = decode(&sol, &vm).unwrap();
            for s in &samples {
                assert!(exact_match(&g, s).is_some(), "model must embed into {}", s.name());
            }
        }
        // The optimum itself, too.
        let g = decode(&opt, &vm).unwrap();
        for s in &samples {
            assert!(exact_match(&g, s).is_some());
        }
    }
}
