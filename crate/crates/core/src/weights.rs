//! Rarity weights for metadata labels, learned from a benign corpus.
//!
//! A label that appears in many benign apps is weak evidence; one that never
//! appears benign is strong evidence. With a corpus of B apps of which b_y
//! contain label y, the weight is (B + 1) / (b_y + 1), kept as an exact
//! rational. Labels never seen benign default to B + 1.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use num::{BigRational, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SigError};
use crate::model::{Iccg, MetadataLabel, RationalWire};

/// Weight table derived from a benign corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTable {
    benign_count: u64,
    entries: BTreeMap<MetadataLabel, BigRational>,
}

impl WeightTable {
    /// Table for an empty corpus: every label weighs 1.
    pub fn empty() -> WeightTable {
        WeightTable {
            benign_count: 0,
            entries: BTreeMap::new(),
        }
    }

    pub fn benign_count(&self) -> u64 {
        self.benign_count
    }

    /// Weight of a label; labels absent from the table default to B + 1.
    pub fn weight(&self, label: &MetadataLabel) -> BigRational {
        match self.entries.get(label) {
            Some(w) => w.clone(),
            None => BigRational::from_integer((self.benign_count + 1).into()),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MetadataLabel, &BigRational)> {
        self.entries.iter()
    }
}

/// Every distinct metadata label occurring in any of the graphs.
pub fn label_universe<'a>(graphs: impl IntoIterator<Item = &'a Iccg>) -> BTreeSet<MetadataLabel> {
    let mut universe = BTreeSet::new();
    for g in graphs {
        for (_, _, label) in g.meta_edges() {
            universe.insert(label.clone());
        }
    }
    universe
}

/// Computes the weight table for a benign corpus. Containment is counted at
/// app level: an app contributes at most once per label no matter how many
/// edges carry it.
pub fn compute_weights(benign: &[Iccg]) -> WeightTable {
    let b_total = benign.len() as u64;
    let mut contained: BTreeMap<MetadataLabel, u64> = BTreeMap::new();
    for app in benign {
        for label in label_universe([app]) {
            *contained.entry(label).or_insert(0) += 1;
        }
    }
    let entries = contained
        .into_iter()
        .map(|(label, b_y)| {
            let w = BigRational::new((b_total + 1).into(), (b_y + 1).into());
            (label, w)
        })
        .collect();
    WeightTable {
        benign_count: b_total,
        entries,
    }
}

/// Fixed-point weight used in solver objectives: round(w * 1000), floored
/// at 1 so every label keeps nonzero influence. Errors if the result does
/// not fit in u64.
pub fn quantize(w: &BigRational) -> Result<u64> {
    let scaled = (w * BigRational::from_integer(1000.into())).round();
    let q = scaled
        .to_integer()
        .to_u64()
        .ok_or_else(|| SigError::Overflow(format!("quantized weight {w} exceeds u64")))?;
    Ok(q.max(1))
}

// ---------------------------------------------------------------------------
// Weight table JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EntryWire {
    label: MetadataLabel,
    #[serde(flatten)]
    weight: RationalWire,
}

#[derive(Serialize, Deserialize)]
struct TableWire {
    benign_count: u64,
    entries: Vec<EntryWire>,
}

pub fn weights_to_json(table: &WeightTable) -> Result<String> {
    let wire = TableWire {
        benign_count: table.benign_count,
        entries: table
            .entries
            .iter()
            .map(|(label, w)| {
                Ok(EntryWire {
                    label: label.clone(),
                    weight: RationalWire::encode(w, "weight")?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let mut s = serde_json::to_string_pretty(&wire).expect("serializable");
    s.push('\n');
    Ok(s)
}

pub fn weights_from_json(text: &str, origin: &str) -> Result<WeightTable> {
    let wire: TableWire = serde_json::from_str(text).map_err(|e| SigError::Parse {
        path: origin.to_string(),
        detail: e.to_string(),
    })?;
    let mut entries = BTreeMap::new();
    for e in wire.entries {
        let w = e.weight.decode()?;
        if entries.insert(e.label.clone(), w).is_some() {
            return Err(SigError::Parse {
                path: origin.to_string(),
                detail: format!("duplicate weight entry for {}", e.label),
            });
        }
    }
    Ok(WeightTable {
        benign_count: wire.benign_count,
        entries,
    })
}

pub fn load_weights(path: &Path) -> Result<WeightTable> {
    let text = std::fs::read_to_string(path).map_err(|e| SigError::io(path, e))?;
    weights_from_json(&text, &path.display().to_string())
}

pub fn save_weights(table: &WeightTable, path: &Path) -> Result<()> {
    std::fs::write(path, weights_to_json(table)?).map_err(|e| SigError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ComponentType;

    fn app(name: &str, labels: &[MetadataLabel]) -> Iccg {
        let meta = labels
            .iter()
            .map(|l| ("a".to_string(), "a".to_string(), l.clone()))
            .collect();
        Iccg::new(name, vec![("a".into(), ComponentType::Activity)], vec![], meta).unwrap()
    }

    #[test]
    fn weight_formula_exact() {
        let common = MetadataLabel::filter("COMMON");
        let rare = MetadataLabel::api("rare");
        let corpus = vec![
            app("b0", &[common.clone(), rare.clone()]),
            app("b1", &[common.clone()]),
            app("b2", &[common.clone()]),
            app("b3", &[]),
        ];
        let table = compute_weights(&corpus);
        assert_eq!(table.benign_count(), 4);
        // common: (4+1)/(3+1); rare: (4+1)/(1+1); unseen: 5.
        assert_eq!(table.weight(&common), BigRational::new(5.into(), 4.into()));
        assert_eq!(table.weight(&rare), BigRational::new(5.into(), 2.into()));
        assert_eq!(
            table.weight(&MetadataLabel::taint("x", "y")),
            BigRational::from_integer(5.into())
        );
    }

    #[test]
    fn app_level_counting_ignores_repeats() {
        let l = MetadataLabel::filter("F");
        let repeat = Iccg::new(
            "b",
            vec![
                ("a".into(), ComponentType::Activity),
                ("c".into(), ComponentType::Activity),
            ],
            vec![],
            vec![
                ("a".into(), "a".into(), l.clone()),
                ("c".into(), "c".into(), l.clone()),
            ],
        )
        .unwrap();
        let table = compute_weights(&[repeat]);
        assert_eq!(table.weight(&l), BigRational::from_integer(1.into()));
    }

    #[test]
    fn quantize_rounds_to_milli() {
        let w = BigRational::new(10.into(), 3.into());
        assert_eq!(quantize(&w).unwrap(), 3333);
        let tiny = BigRational::new(1.into(), 10_000.into());
        assert_eq!(quantize(&tiny).unwrap(), 1);
        let exact = BigRational::from_integer(7.into());
        assert_eq!(quantize(&exact).unwrap(), 7000);
    }

    #[test]
    fn table_json_round_trip() {
        let corpus = vec![
            app("b0", &[MetadataLabel::filter("X"), MetadataLabel::taint("s", "k")]),
            app("b1", &[MetadataLabel::filter("X")]),
            app("b2", &[MetadataLabel::action("act")]),
        ];
        let table = compute_weights(&corpus);
        let text = weights_to_json(&table).unwrap();
        let back = weights_from_json(&text, "mem").unwrap();
        assert_eq!(table, back);
    }
}
