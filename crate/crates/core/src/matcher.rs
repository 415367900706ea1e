//! Signature matching: exact embedding, similarity-based approximate
//! matching, multi-family scans and detection-cutoff tuning.
//!
//! The similarity of app A to signature S_F is
//!
//! ```text
//! delta = f(S) / f(S_F)
//! ```
//!
//! where S is the maximally-suspicious common subgraph of the
//! transitively-closed app and the signature, and f is the weighted size
//! (non-system vertices + edges + metadata weight). delta is 1 exactly when
//! the whole signature survives in the app, and 0 when nothing does.

use std::collections::BTreeMap;

use num::{BigRational, One, Signed, Zero};

use crate::error::{Result, SigError};
use crate::model::{ComponentType, Iccg, Signature, SYSTEM_ID};
use crate::synth::infer_signature;
use crate::weights::WeightTable;

/// A witness that the signature occurs in an app: signature vertex id to
/// app vertex id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    pub mapping: BTreeMap<String, String>,
}

/// Searches for an injective, type- and structure-preserving embedding of
/// `sig` into `app`. Deterministic: vertices and candidate targets are tried
/// in id order, SYSTEM pinned first.
pub fn exact_match(sig: &Iccg, app: &Iccg) -> Option<Embedding> {
    let mut sig_vertices: Vec<(&str, ComponentType)> = sig.vertices().collect();
    // SYSTEM first (it has exactly one candidate), then id order.
    sig_vertices.sort_by_key(|(id, ty)| (*ty != ComponentType::System, id.to_string()));

    let mut mapping: BTreeMap<&str, &str> = BTreeMap::new();
    let mut used: Vec<&str> = Vec::new();

    fn consistent(sig: &Iccg, app: &Iccg, mapping: &BTreeMap<&str, &str>, v: &str, w: &str) -> bool {
        for (src, dst) in sig.cf_edges() {
            let (ws, wd) = match (src == v, dst == v) {
                (true, true) => (w, w),
                (true, false) => match mapping.get(dst) {
                    Some(m) => (w, *m),
                    None => continue,
                },
                (false, true) => match mapping.get(src) {
                    Some(m) => (*m, w),
                    None => continue,
                },
                (false, false) => continue,
            };
            if !app.has_cf_edge(ws, wd) {
                return false;
            }
        }
        for (src, dst, label) in sig.meta_edges() {
            let (ws, wd) = match (src == v, dst == v) {
                (true, true) => (w, w),
                (true, false) => match mapping.get(dst.as_str()) {
                    Some(m) => (w, *m),
                    None => continue,
                },
                (false, true) => match mapping.get(src.as_str()) {
                    Some(m) => (*m, w),
                    None => continue,
                },
                (false, false) => continue,
            };
            if !app.has_meta_edge(ws, wd, label) {
                return false;
            }
        }
        true
    }

    fn assign<'a>(
        sig: &'a Iccg,
        app: &'a Iccg,
        order: &[(&'a str, ComponentType)],
        pos: usize,
        mapping: &mut BTreeMap<&'a str, &'a str>,
        used: &mut Vec<&'a str>,
    ) -> bool {
        let Some(&(v, ty)) = order.get(pos) else {
            return true;
        };
        let candidates: Vec<&str> = if ty == ComponentType::System {
            if app.has_system() {
                vec![SYSTEM_ID]
            } else {
                Vec::new()
            }
        } else {
            app.vertices()
                .filter(|(id, t)| *t == ty && !used.contains(id))
                .map(|(id, _)| id)
                .collect()
        };
        for w in candidates {
            if !consistent(sig, app, mapping, v, w) {
                continue;
            }
            mapping.insert(v, w);
            used.push(w);
            if assign(sig, app, order, pos + 1, mapping, used) {
                return true;
            }
            mapping.remove(v);
            used.pop();
        }
        false
    }

    if assign(sig, app, &sig_vertices, 0, &mut mapping, &mut used) {
        Some(Embedding {
            mapping: mapping
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        })
    } else {
        None
    }
}

/// Weighted size f(G): non-system vertices + control-flow edges + exact
/// metadata weight. The SYSTEM vertex itself is free, so two graphs sharing
/// nothing but SYSTEM score zero; SYSTEM-incident edges and metadata count.
pub fn weighted_size(g: &Iccg, weights: &WeightTable) -> BigRational {
    let structural = g.non_system_vertices().count() + g.cf_edge_count();
    let meta: BigRational = g
        .meta_edges()
        .map(|(_, _, label)| weights.weight(label))
        .sum();
    BigRational::from_integer(structural.into()) + meta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchKind {
    NoMatch,
    ZeroDayCandidate,
    Obfuscated,
    Exact,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::NoMatch => "no_match",
            MatchKind::ZeroDayCandidate => "zero_day_candidate",
            MatchKind::Obfuscated => "obfuscated",
            MatchKind::Exact => "exact",
        }
    }

    pub fn is_detection(self) -> bool {
        self != MatchKind::NoMatch
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchVerdict {
    pub family: String,
    pub kind: MatchKind,
    pub delta: BigRational,
    /// The common subgraph backing the verdict, for analyst inspection.
    pub partial: Iccg,
}

/// Detection thresholds; both are compared strictly (delta must exceed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cutoffs {
    pub zero_day: BigRational,
    pub obfuscated: BigRational,
}

impl Default for Cutoffs {
    fn default() -> Cutoffs {
        Cutoffs {
            zero_day: BigRational::new(1.into(), 2.into()),
            obfuscated: BigRational::new(4.into(), 5.into()),
        }
    }
}

/// Parses a decimal string ("0.8", "1", ".25") into an exact rational.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || SigError::InvalidInput(format!("{s:?} is not a decimal number"));
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: num::BigInt = digits.parse().map_err(|_| bad())?;
    let den = num::BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(BigRational::new(num, den))
}

/// Classifies app `app` against one signature.
///
/// An exact embedding of the raw app yields `Exact` with delta 1. Otherwise
/// the app is transitively closed and the common subgraph with the signature
/// is re-synthesized; its weighted size relative to the signature's gives
/// delta, classified against the cutoffs.
pub fn approx_match(
    app: &Iccg,
    sig: &Signature,
    weights: &WeightTable,
    cutoffs: &Cutoffs,
) -> Result<MatchVerdict> {
    let f_sig = weighted_size(&sig.graph, weights);
    if f_sig.is_zero() {
        return Err(SigError::ZeroSignature(sig.family.clone()));
    }

    if exact_match(&sig.graph, app).is_some() {
        return Ok(MatchVerdict {
            family: sig.family.clone(),
            kind: MatchKind::Exact,
            delta: BigRational::one(),
            partial: sig.graph.clone(),
        });
    }

    let closed = app.transitive_closure();
    let common = infer_signature(
        &[closed, sig.graph.clone()],
        weights,
        &format!("{}-partial", sig.family),
    )?;
    let delta = weighted_size(&common.graph, weights) / &f_sig;
    debug_assert!(!delta.is_negative() && delta <= BigRational::one());

    let kind = if delta > cutoffs.obfuscated {
        MatchKind::Obfuscated
    } else if delta > cutoffs.zero_day {
        MatchKind::ZeroDayCandidate
    } else {
        MatchKind::NoMatch
    };
    Ok(MatchVerdict {
        family: sig.family.clone(),
        kind,
        delta,
        partial: common.graph,
    })
}

/// One verdict per signature (family order) plus the index of the best:
/// any Exact wins, otherwise the highest delta, ties to the first family.
#[derive(Debug, Clone)]
pub struct ScanReport {
    pub verdicts: Vec<MatchVerdict>,
    pub best: Option<usize>,
}

impl ScanReport {
    pub fn best_verdict(&self) -> Option<&MatchVerdict> {
        self.best.map(|i| &self.verdicts[i])
    }
}

/// Matches the app against every signature in the database. `jobs` > 1
/// splits families across threads; results are merged in family order, so
/// the report does not depend on the thread count.
pub fn scan(
    app: &Iccg,
    db: &[Signature],
    weights: &WeightTable,
    cutoffs: &Cutoffs,
    jobs: usize,
) -> Result<ScanReport> {
    let mut order: Vec<usize> = (0..db.len()).collect();
    order.sort_by(|&a, &b| db[a].family.cmp(&db[b].family));

    let jobs = jobs.max(1).min(order.len().max(1));
    let mut results: Vec<Option<Result<MatchVerdict>>> = Vec::new();
    results.resize_with(order.len(), || None);

    if jobs <= 1 {
        for (slot, &i) in order.iter().enumerate() {
            results[slot] = Some(approx_match(app, &db[i], weights, cutoffs));
        }
    } else {
        let chunk = order.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            for (indices, out) in order.chunks(chunk).zip(results.chunks_mut(chunk)) {
                scope.spawn(move || {
                    for (slot, &i) in indices.iter().enumerate() {
                        out[slot] = Some(approx_match(app, &db[i], weights, cutoffs));
                    }
                });
            }
        });
    }

    let mut verdicts = Vec::with_capacity(order.len());
    for r in results {
        verdicts.push(r.expect("scan slot filled")?);
    }

    let mut best: Option<usize> = None;
    for (i, v) in verdicts.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &verdicts[b];
                (v.kind == MatchKind::Exact && cur.kind != MatchKind::Exact)
                    || (cur.kind != MatchKind::Exact && v.delta > cur.delta)
            }
        };
        if better {
            best = Some(i);
        }
    }
    Ok(ScanReport { verdicts, best })
}

/// One operating point of the detector.
#[derive(Debug, Clone)]
pub struct RocPoint {
    pub cutoff: BigRational,
    pub tpr: BigRational,
    pub fpr: BigRational,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub chosen: BigRational,
    pub roc: Vec<RocPoint>,
}

/// Picks a zero-day cutoff by leave-one-family-out cross validation.
///
/// Each family's samples are scanned against the signatures of the other
/// families only; the true-positive rate at a cutoff is the fraction of all
/// samples whose best delta exceeds it. False positives are measured by
/// scanning the benign apps against the full signature database. The chosen
/// cutoff is the largest candidate with TPR >= `target_tpr`, falling back
/// to the smallest candidate if none reaches it.
pub fn tune_cutoff(
    families: &[(String, Vec<Iccg>)],
    benign: &[Iccg],
    candidates: &[BigRational],
    target_tpr: &BigRational,
) -> Result<TuneResult> {
    if families.len() < 2 {
        return Err(SigError::InvalidInput(
            "cutoff tuning needs at least two families".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(SigError::InvalidInput("no candidate cutoffs".into()));
    }
    for (name, samples) in families {
        if samples.is_empty() {
            return Err(SigError::InvalidInput(format!("family {name} has no samples")));
        }
    }

    let weights = crate::weights::compute_weights(benign);
    let cutoffs = Cutoffs::default(); // kinds are ignored here; only delta matters

    let signatures: Vec<Signature> = families
        .iter()
        .map(|(name, samples)| infer_signature(samples, &weights, name))
        .collect::<Result<Vec<_>>>()?;

    let best_delta = |app: &Iccg, db: &[&Signature]| -> Result<BigRational> {
        let mut best = BigRational::zero();
        for sig in db {
            let v = approx_match(app, sig, &weights, &cutoffs)?;
            if v.delta > best {
                best = v.delta;
            }
        }
        Ok(best)
    };

    let mut malware_deltas: Vec<BigRational> = Vec::new();
    for (i, (_, samples)) in families.iter().enumerate() {
        let others: Vec<&Signature> = signatures
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, s)| s)
            .collect();
        for app in samples {
            malware_deltas.push(best_delta(app, &others)?);
        }
    }

    let full: Vec<&Signature> = signatures.iter().collect();
    let mut benign_deltas: Vec<BigRational> = Vec::new();
    for app in benign {
        benign_deltas.push(best_delta(app, &full)?);
    }

    let ratio = |hits: usize, total: usize| -> BigRational {
        if total == 0 {
            BigRational::zero()
        } else {
            BigRational::new(hits.into(), total.into())
        }
    };

    let mut sorted: Vec<BigRational> = candidates.to_vec();
    sorted.sort();
    let roc: Vec<RocPoint> = sorted
        .iter()
        .map(|c| {
            let tp = malware_deltas.iter().filter(|d| *d > c).count();
            let fp = benign_deltas.iter().filter(|d| *d > c).count();
            RocPoint {
                cutoff: c.clone(),
                tpr: ratio(tp, malware_deltas.len()),
                fpr: ratio(fp, benign_deltas.len()),
            }
        })
        .collect();

    let chosen = roc
        .iter()
        .rev()
        .find(|p| &p.tpr >= target_tpr)
        .map(|p| p.cutoff.clone())
        .unwrap_or_else(|| {
            log::warn!(
                "no candidate cutoff reaches TPR {target_tpr}; falling back to the smallest"
            );
            sorted[0].clone()
        });
    Ok(TuneResult { chosen, roc })
}
