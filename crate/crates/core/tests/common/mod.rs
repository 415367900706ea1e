//! Shared helpers for the integration tests: fixture loading and a seeded
//! random instance generator sized so the exhaustive reference stays cheap.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigforge::model::{load_iccg, ComponentType, Iccg, MetadataLabel, SYSTEM_ID};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> Iccg {
    load_iccg(&fixture_path(name)).expect("fixture loads")
}

pub fn benign_fixtures() -> Vec<Iccg> {
    (0..9)
        .map(|i| load_fixture(&format!("benign/b{i}.json")))
        .collect()
}

/// Labels the random generator draws from. Small enough that exhaustive
/// enumeration stays fast, mixed across all three metadata tiers.
pub fn label_pool() -> Vec<MetadataLabel> {
    vec![
        MetadataLabel::filter("SMS_RECEIVED"),
        MetadataLabel::filter("BOOT_COMPLETED"),
        MetadataLabel::api("sendTextMessage"),
        MetadataLabel::action("abortBroadcast"),
        MetadataLabel::taint("DeviceId", "Internet"),
        MetadataLabel::taint("File", "Sms"),
    ]
}

pub struct RandomInstance {
    pub samples: Vec<Iccg>,
    pub benign: Vec<Iccg>,
}

/// Builds 2 to 4 samples with at most 4 non-system vertices each (at most 2
/// per type), random control-flow and metadata edges, an optional planted
/// receiver-service core, and SYSTEM present in all, none, or a mix of the
/// samples. Also builds a benign corpus of 0 to 4 apps for the weight table.
pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = label_pool();
    let n_samples = rng.random_range(2..=4usize);
    let system_mode = rng.random_range(0..3u8);
    let plant = rng.random_bool(0.5);

    let mut samples = Vec::with_capacity(n_samples);
    for gi in 0..n_samples {
        let has_system = match system_mode {
            0 => true,
            1 => false,
            _ => gi % 2 == 0,
        };
        let mut vertices: Vec<(String, ComponentType)> = Vec::new();
        let mut census: BTreeMap<ComponentType, usize> = BTreeMap::new();
        if has_system {
            vertices.push((SYSTEM_ID.into(), ComponentType::System));
        }
        if plant {
            vertices.push((format!("g{gi}core_r"), ComponentType::Receiver));
            vertices.push((format!("g{gi}core_s"), ComponentType::Service));
            census.insert(ComponentType::Receiver, 1);
            census.insert(ComponentType::Service, 1);
        }
        let extra = rng.random_range(if plant { 0..=2usize } else { 1..=3usize });
        for k in 0..extra {
            let open: Vec<ComponentType> = ComponentType::CONCRETE
                .into_iter()
                .filter(|t| census.get(t).copied().unwrap_or(0) < 2)
                .collect();
            let ty = open[rng.random_range(0..open.len())];
            vertices.push((format!("g{gi}x{k}"), ty));
            *census.entry(ty).or_insert(0) += 1;
        }

        let ids: Vec<String> = vertices.iter().map(|(id, _)| id.clone()).collect();
        let mut cf: Vec<(String, String)> = Vec::new();
        for s in &ids {
            for d in &ids {
                if s != d && d != SYSTEM_ID && rng.random_bool(0.3) {
                    cf.push((s.clone(), d.clone()));
                }
            }
        }
        let mut meta_slots: Vec<(String, String, MetadataLabel)> = Vec::new();
        for s in &ids {
            for d in &ids {
                for l in &labels {
                    meta_slots.push((s.clone(), d.clone(), l.clone()));
                }
            }
        }
        let take = rng.random_range(0..=4usize.min(meta_slots.len()));
        let mut meta: Vec<(String, String, MetadataLabel)> =
            rand::seq::index::sample(&mut rng, meta_slots.len(), take)
                .into_iter()
                .map(|i| meta_slots[i].clone())
                .collect();
        if plant {
            let r = format!("g{gi}core_r");
            let s = format!("g{gi}core_s");
            cf.push((r.clone(), s.clone()));
            meta.push((r.clone(), r.clone(), labels[0].clone()));
            meta.push((s.clone(), s.clone(), labels[4].clone()));
        }
        // The random picks above may collide with the planted core.
        cf.sort();
        cf.dedup();
        meta.sort();
        meta.dedup();
        samples.push(Iccg::new(format!("sample-{gi}"), vertices, cf, meta).expect("valid sample"));
    }

    let n_benign = rng.random_range(0..=4usize);
    let mut benign = Vec::with_capacity(n_benign);
    for bi in 0..n_benign {
        let act = format!("app{bi}");
        let vertices = vec![
            (SYSTEM_ID.to_string(), ComponentType::System),
            (act.clone(), ComponentType::Activity),
        ];
        let cf = vec![(SYSTEM_ID.to_string(), act.clone())];
        let mut meta = Vec::new();
        for l in &labels {
            if rng.random_bool(0.3) {
                meta.push((act.clone(), act.clone(), l.clone()));
            }
        }
        benign.push(Iccg::new(format!("benign-{bi}"), vertices, cf, meta).expect("valid benign"));
    }

    RandomInstance { samples, benign }
}

/// Copy of `g` with the metadata edge at `idx` (in iteration order) removed.
pub fn without_meta_edge(g: &Iccg, idx: usize) -> Iccg {
    let meta: Vec<(String, String, MetadataLabel)> = g
        .meta_edges()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, m)| m.clone())
        .collect();
    Iccg::new(
        g.name(),
        g.vertices().map(|(id, ty)| (id.to_string(), ty)).collect(),
        g.cf_edges()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        meta,
    )
    .expect("removal keeps the graph valid")
}
