//! Weighted partial CNF problems with tiered soft clauses, and the classic
//! DIMACS WCNF interchange format ("p wcnf <vars> <clauses> <top>").
//!
//! Soft clauses live in ordered tiers, most significant first. For export the
//! tiers are flattened into single integer weights: each tier's scale exceeds
//! the total weight of everything below it, so one flattened objective value
//! encodes the whole lexicographic vector.

use std::path::Path;

use crate::error::{Result, SigError};
use crate::sat::{eval_clause, Clause, Model};

/// A soft clause with its (positive) weight.
pub type Soft = (Clause, u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WcnfProblem {
    num_vars: u32,
    hard: Vec<Clause>,
    soft_tiers: Vec<Vec<Soft>>,
    /// Hard-clause weight marker: strictly larger than the sum of all
    /// flattened soft weights.
    top: u64,
}

fn check_clause(num_vars: u32, clause: &[i32]) -> Result<()> {
    for &l in clause {
        if l == 0 || l.unsigned_abs() > num_vars {
            return Err(SigError::InvalidInput(format!(
                "literal {l} out of range for {num_vars} variables"
            )));
        }
    }
    Ok(())
}

fn overflow(what: &str) -> SigError {
    SigError::Overflow(format!("{what} exceeds u64 while flattening weights"))
}

impl WcnfProblem {
    pub fn new(num_vars: u32, hard: Vec<Clause>, soft_tiers: Vec<Vec<Soft>>) -> Result<WcnfProblem> {
        for c in &hard {
            check_clause(num_vars, c)?;
        }
        for tier in &soft_tiers {
            for (c, w) in tier {
                check_clause(num_vars, c)?;
                if *w == 0 {
                    return Err(SigError::InvalidInput("soft clause with zero weight".into()));
                }
            }
        }
        let mut p = WcnfProblem {
            num_vars,
            hard,
            soft_tiers,
            top: 0,
        };
        let scales = p.scales()?;
        let mut top: u64 = 1;
        for (tier, scale) in p.soft_tiers.iter().zip(&scales) {
            for (_, w) in tier {
                let flat = w.checked_mul(*scale).ok_or_else(|| overflow("soft weight"))?;
                top = top.checked_add(flat).ok_or_else(|| overflow("top"))?;
            }
        }
        p.top = top;
        Ok(p)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn hard(&self) -> &[Clause] {
        &self.hard
    }

    pub fn soft_tiers(&self) -> &[Vec<Soft>] {
        &self.soft_tiers
    }

    pub fn top(&self) -> u64 {
        self.top
    }

    /// Sum of soft weights per tier.
    pub fn tier_totals(&self) -> Vec<u64> {
        self.soft_tiers
            .iter()
            .map(|tier| tier.iter().map(|(_, w)| *w).sum())
            .collect()
    }

    /// Per-tier flattening scales. `scales[t]` strictly dominates the summed
    /// flattened weight of all tiers below t.
    pub fn scales(&self) -> Result<Vec<u64>> {
        let totals = self.tier_totals();
        let mut scales = vec![0u64; totals.len()];
        let mut below: u64 = 0; // sum of scale * total for all lower tiers
        for t in (0..totals.len()).rev() {
            let scale = below.checked_add(1).ok_or_else(|| overflow("scale"))?;
            scales[t] = scale;
            let contribution = scale.checked_mul(totals[t]).ok_or_else(|| overflow("tier total"))?;
            below = below.checked_add(contribution).ok_or_else(|| overflow("tier sum"))?;
        }
        Ok(scales)
    }

    /// Per-tier sums of satisfied soft weight under a model.
    pub fn objective_of(&self, model: &Model) -> Vec<u64> {
        self.soft_tiers
            .iter()
            .map(|tier| {
                tier.iter()
                    .filter(|(c, _)| eval_clause(model, c))
                    .map(|(_, w)| *w)
                    .sum()
            })
            .collect()
    }

    /// Single-scalar form of an objective vector under the flattening scales.
    pub fn flatten_objective(&self, objective: &[u64]) -> Result<u64> {
        let scales = self.scales()?;
        if objective.len() != scales.len() {
            return Err(SigError::InvalidInput(format!(
                "objective has {} tiers, problem has {}",
                objective.len(),
                scales.len()
            )));
        }
        let mut total: u64 = 0;
        for (w, scale) in objective.iter().zip(&scales) {
            let part = w.checked_mul(*scale).ok_or_else(|| overflow("objective"))?;
            total = total.checked_add(part).ok_or_else(|| overflow("objective"))?;
        }
        Ok(total)
    }

    fn clause_count(&self) -> usize {
        self.hard.len() + self.soft_tiers.iter().map(Vec::len).sum::<usize>()
    }

    /// Renders the classic DIMACS WCNF text. Byte-stable: clause order is
    /// hard clauses first, then soft tiers most significant first.
    pub fn to_wcnf_text(&self) -> Result<String> {
        let scales = self.scales()?;
        let mut out = String::new();
        out.push_str(&format!(
            "p wcnf {} {} {}\n",
            self.num_vars,
            self.clause_count(),
            self.top
        ));
        let write_clause = |out: &mut String, weight: u64, clause: &[i32]| {
            out.push_str(&weight.to_string());
            for l in clause {
                out.push(' ');
                out.push_str(&l.to_string());
            }
            out.push_str(" 0\n");
        };
        for c in &self.hard {
            write_clause(&mut out, self.top, c);
        }
        for (tier, scale) in self.soft_tiers.iter().zip(&scales) {
            for (c, w) in tier {
                write_clause(&mut out, w * scale, c);
            }
        }
        Ok(out)
    }
}

/// Writes the problem in DIMACS WCNF form.
pub fn export_wcnf(p: &WcnfProblem, path: &Path) -> Result<()> {
    std::fs::write(path, p.to_wcnf_text()?).map_err(|e| SigError::io(path, e))
}

/// Parses classic DIMACS WCNF text. All soft clauses land in a single tier;
/// weight equal to the header's top marks a clause hard.
pub fn parse_wcnf_text(text: &str, origin: &str) -> Result<WcnfProblem> {
    let perr = |line_no: usize, detail: String| SigError::Parse {
        path: origin.to_string(),
        detail: format!("line {line_no}: {detail}"),
    };

    let mut header: Option<(u32, usize, u64)> = None;
    let mut hard: Vec<Clause> = Vec::new();
    let mut soft: Vec<Soft> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(perr(line_no, "duplicate problem line".into()));
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 5 || tokens[1] != "wcnf" {
                return Err(perr(line_no, format!("expected 'p wcnf <vars> <clauses> <top>', got {line:?}")));
            }
            let nv: u32 = tokens[2].parse().map_err(|_| perr(line_no, "bad variable count".into()))?;
            let nc: usize = tokens[3].parse().map_err(|_| perr(line_no, "bad clause count".into()))?;
            let top: u64 = tokens[4].parse().map_err(|_| perr(line_no, "bad top weight".into()))?;
            if top == 0 {
                return Err(perr(line_no, "top weight must be positive".into()));
            }
            header = Some((nv, nc, top));
            continue;
        }
        let Some((nv, _, top)) = header else {
            return Err(perr(line_no, "clause before problem line".into()));
        };
        let mut tokens = line.split_whitespace();
        let weight: u64 = tokens
            .next()
            .expect("non-empty line")
            .parse()
            .map_err(|_| perr(line_no, "bad clause weight".into()))?;
        if weight == 0 {
            return Err(perr(line_no, "clause weight must be positive".into()));
        }
        if weight > top {
            return Err(perr(line_no, format!("weight {weight} exceeds top {top}")));
        }
        let mut clause: Clause = Vec::new();
        let mut terminated = false;
        for t in tokens {
            let l: i32 = t.parse().map_err(|_| perr(line_no, format!("bad literal {t:?}")))?;
            if l == 0 {
                terminated = true;
                break;
            }
            if l.unsigned_abs() > nv {
                return Err(perr(line_no, format!("literal {l} out of range")));
            }
            clause.push(l);
        }
        if !terminated {
            return Err(perr(line_no, "clause not terminated by 0".into()));
        }
        if weight == top {
            hard.push(clause);
        } else {
            soft.push((clause, weight));
        }
    }

    let Some((nv, nc, top)) = header else {
        return Err(SigError::Parse {
            path: origin.to_string(),
            detail: "missing problem line".into(),
        });
    };
    let got = hard.len() + soft.len();
    if got != nc {
        return Err(SigError::Parse {
            path: origin.to_string(),
            detail: format!("header declares {nc} clauses, found {got}"),
        });
    }
    let p = WcnfProblem::new(nv, hard, vec![soft])?;
    if p.top() > top {
        return Err(SigError::Parse {
            path: origin.to_string(),
            detail: format!(
                "soft weights sum to {} which reaches the top weight {top}; hard and soft clauses are ambiguous",
                p.top() - 1
            ),
        });
    }
    Ok(p)
}

pub fn parse_wcnf(path: &Path) -> Result<WcnfProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| SigError::io(path, e))?;
    parse_wcnf_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiered() -> WcnfProblem {
        WcnfProblem::new(
            3,
            vec![vec![1, 2], vec![-1, 3]],
            vec![
                vec![(vec![1], 5), (vec![2], 7)],
                vec![(vec![3], 2)],
                vec![],
                vec![(vec![-2], 1), (vec![-3], 1)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn scales_dominate_lower_tiers() {
        let p = tiered();
        let scales = p.scales().unwrap();
        let totals = p.tier_totals();
        assert_eq!(scales.len(), 4);
        assert_eq!(scales[3], 1);
        for t in 0..3 {
            let below: u64 = (t + 1..4).map(|u| scales[u] * totals[u]).sum();
            assert!(scales[t] > below, "tier {t}: scale {} below {}", scales[t], below);
        }
        // top exceeds the total flattened soft weight.
        let total_flat: u64 = (0..4).map(|t| scales[t] * totals[t]).sum();
        assert_eq!(p.top(), total_flat + 1);
    }

    #[test]
    fn export_parse_round_trip_is_byte_identical() {
        let p = tiered();
        let text = p.to_wcnf_text().unwrap();
        let parsed = parse_wcnf_text(&text, "mem").unwrap();
        // Parsed problems carry one tier; re-export must reproduce the bytes.
        assert_eq!(parsed.soft_tiers().len(), 1);
        assert_eq!(parsed.to_wcnf_text().unwrap(), text);
    }

    #[test]
    fn parse_classifies_hard_and_soft() {
        let text = "c comment\np wcnf 2 3 100\n100 1 2 0\n5 1 0\n7 -2 0\n";
        let p = parse_wcnf_text(text, "mem").unwrap();
        assert_eq!(p.hard(), &[vec![1, 2]]);
        assert_eq!(p.soft_tiers()[0], vec![(vec![1], 5), (vec![-2], 7)]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "p wcnf 2 1 10\n5 1\n";
        let err = parse_wcnf_text(text, "mem").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        let text = "p wcnf 2 1 10\n5 9 0\n";
        let err = parse_wcnf_text(text, "mem").unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");

        let text = "p wcnf 2 2 10\n5 1 0\n";
        let err = parse_wcnf_text(text, "mem").unwrap_err();
        assert!(err.to_string().contains("declares 2"), "{err}");
    }

    #[test]
    fn objective_evaluation_per_tier() {
        let p = tiered();
        // model: 1=T, 2=F, 3=T  (index 0 unused)
        let model = vec![false, true, false, true];
        assert_eq!(p.objective_of(&model), vec![5, 2, 0, 1]);
        assert_eq!(
            p.flatten_objective(&p.objective_of(&model)).unwrap(),
            5 * p.scales().unwrap()[0] + 2 * p.scales().unwrap()[1] + 1
        );
    }
}
