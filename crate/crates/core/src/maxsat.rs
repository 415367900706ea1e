//! Lexicographic weighted-partial MaxSAT on top of the SAT core.
//!
//! Tiers are optimized most significant first by a linear SAT-UNSAT search:
//! repeatedly demand strictly more satisfied soft weight via a pseudo-boolean
//! "at least B" constraint until the solver says UNSAT, then freeze the tier
//! at its achieved weight as a permanent hard bound and move on. Freezing the
//! weight (not the satisfied clause set) keeps every lexicographically optimal
//! solution available to later tiers.
//!
//! An optional final pass minimizes how many of a caller-chosen variable set
//! are true, as a deterministic tie-break among optimal solutions.

use std::collections::BTreeSet;

use crate::error::{Result, SigError};
use crate::sat::{eval_all, sat_solve, Clause, Lit, Model, SatOutcome};
use crate::wcnf::WcnfProblem;

/// An optimal solution: a model over the problem's variables plus the
/// per-tier satisfied soft weight, most significant tier first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub model: Model,
    pub objective: Vec<u64>,
}

/// Weighted literals; satisfied weight is the sum over literals true in a
/// model.
type Items = Vec<(Lit, u64)>;

fn item_sum(model: &Model, items: &[(Lit, u64)]) -> u64 {
    items
        .iter()
        .filter(|(l, _)| model[l.unsigned_abs() as usize] == (*l > 0))
        .map(|(_, w)| *w)
        .sum()
}

/// Distinct subset sums of `weights`, or None once the set exceeds `cap`.
fn subset_sums(weights: &[u64], cap: usize) -> Option<BTreeSet<u64>> {
    let mut sums = BTreeSet::from([0u64]);
    for &w in weights {
        let bumped: Vec<u64> = sums.iter().map(|s| s + w).collect();
        sums.extend(bumped);
        if sums.len() > cap {
            return None;
        }
    }
    Some(sums)
}

/// Smallest satisfiable-in-principle weight strictly above `achieved`, or
/// None when `achieved` already equals the tier total. Falls back to
/// `achieved + 1` when the subset-sum set is too large to enumerate.
fn next_bound(items: &[(Lit, u64)], achieved: u64) -> Option<u64> {
    let total: u64 = items.iter().map(|(_, w)| *w).sum();
    if achieved >= total {
        return None;
    }
    let weights: Vec<u64> = items.iter().map(|(_, w)| *w).collect();
    match subset_sums(&weights, 4096) {
        Some(sums) => sums.range(achieved + 1..).next().copied(),
        None => Some(achieved + 1),
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Sequential weighted counter enforcing sum(w_i * [lit_i]) >= bound.
///
/// Register variable r[j][s] means "the first j items contribute at least s",
/// with sums clamped at the bound. Registers only constrain downward
/// (one-sided implications), which is all a lower bound needs. Fresh
/// variables are taken from `next_var`; clauses are appended to `out`.
fn encode_at_least(items: &[(Lit, u64)], bound: u64, next_var: &mut u32, out: &mut Vec<Clause>) {
    if bound == 0 {
        return;
    }
    let total: u64 = items.iter().map(|(_, w)| *w).sum();
    if total < bound {
        out.push(Vec::new()); // unsatisfiable on its face
        return;
    }

    let g = items.iter().map(|(_, w)| *w).fold(bound, gcd);
    let weights: Vec<u64> = items.iter().map(|(_, w)| w / g).collect();
    let bound = bound.div_ceil(g);

    // levels[j] = distinct clamped sums achievable with the first j items.
    let mut levels: Vec<Vec<u64>> = Vec::with_capacity(items.len() + 1);
    levels.push(vec![0]);
    for (j, &w) in weights.iter().enumerate() {
        let prev = &levels[j];
        let mut next: BTreeSet<u64> = prev.iter().copied().collect();
        next.extend(prev.iter().map(|s| (s + w).min(bound)));
        levels.push(next.into_iter().collect());
    }

    // Register variables, allocated level by level in ascending sum order.
    let mut regs: Vec<Vec<(u64, Lit)>> = Vec::with_capacity(levels.len());
    regs.push(Vec::new());
    for level in levels.iter().skip(1) {
        let mut row = Vec::new();
        for &s in level.iter().filter(|&&s| s > 0) {
            *next_var += 1;
            row.push((s, *next_var as Lit));
        }
        regs.push(row);
    }

    let reg_at = |j: usize, s: u64| -> Option<Lit> {
        regs[j].iter().find(|(v, _)| *v == s).map(|(_, l)| *l)
    };
    // Smallest register sum at level j that is >= s.
    let reg_ceiling = |j: usize, s: u64| -> Option<Lit> {
        regs[j].iter().find(|(v, _)| *v >= s).map(|(_, l)| *l)
    };

    for (j, &(item_lit, _)) in items.iter().enumerate() {
        let level = j + 1;
        let w = weights[j];
        for &(s, r) in &regs[level] {
            // r -> (carry from level-1) or (item j true and prefix >= s - w).
            let carry = reg_ceiling(level - 1, s);
            let pre = s.saturating_sub(w);
            let item_possible = levels[level - 1].iter().any(|&p| (p + w).min(bound) >= s);
            let pre_reg = if item_possible && pre > 0 {
                Some(reg_ceiling(level - 1, pre).expect("pre sum representable"))
            } else {
                None
            };

            let mut c1 = vec![-r];
            if let Some(cr) = carry {
                c1.push(cr);
            }
            if item_possible {
                c1.push(item_lit);
            }
            debug_assert!(c1.len() > 1, "register sum must be reachable");
            out.push(c1);

            if item_possible {
                if let Some(p) = pre_reg {
                    let mut c2 = vec![-r];
                    if let Some(cr) = carry {
                        c2.push(cr);
                    }
                    c2.push(p);
                    out.push(c2);
                }
            }
        }
    }

    let final_reg = reg_at(levels.len() - 1, bound).expect("bound reachable");
    out.push(vec![final_reg]);
}

/// At most k of the given literals true, built as "at least n - k false".
fn encode_at_most(lits: &[Lit], k: usize, next_var: &mut u32, out: &mut Vec<Clause>) {
    if k >= lits.len() {
        return;
    }
    let negated: Items = lits.iter().map(|&l| (-l, 1)).collect();
    encode_at_least(&negated, (lits.len() - k) as u64, next_var, out);
}

/// Maximizes the soft tiers of `p` lexicographically, most significant tier
/// first. See [`maximize_lex_with`] for the tie-break variant.
pub fn maximize_lex(p: &WcnfProblem) -> Result<Assignment> {
    maximize_lex_with(p, &[])
}

/// Like [`maximize_lex`], but after all tiers are frozen at their optima,
/// additionally minimizes how many variables of `minimize_vars` are assigned
/// true. This selects a canonical representative among equally optimal
/// solutions and never changes the objective vector.
pub fn maximize_lex_with(p: &WcnfProblem, minimize_vars: &[u32]) -> Result<Assignment> {
    let mut clauses: Vec<Clause> = p.hard().to_vec();
    let mut num_vars = p.num_vars();

    // Relax non-unit soft clauses: (C, w) becomes hard (C or r) plus the
    // weighted literal -r. Unit softs contribute their literal directly.
    let mut tier_items: Vec<Items> = Vec::with_capacity(p.soft_tiers().len());
    for tier in p.soft_tiers() {
        let mut items: Items = Vec::new();
        for (c, w) in tier {
            match c.len() {
                0 => {} // never satisfiable; contributes nothing
                1 => items.push((c[0], *w)),
                _ => {
                    num_vars += 1;
                    let r = num_vars as Lit;
                    let mut relaxed = c.clone();
                    relaxed.push(r);
                    clauses.push(relaxed);
                    items.push((-r, *w));
                }
            }
        }
        tier_items.push(items);
    }

    let mut model = match sat_solve(num_vars, &clauses, &[])? {
        SatOutcome::Sat(m) => m,
        SatOutcome::Unsat => return Err(SigError::HardUnsat("base constraints".into())),
    };

    for items in &tier_items {
        loop {
            let achieved = item_sum(&model, items);
            let Some(bound) = next_bound(items, achieved) else {
                break;
            };
            let mut trial = clauses.clone();
            let mut trial_vars = num_vars;
            encode_at_least(items, bound, &mut trial_vars, &mut trial);
            match sat_solve(trial_vars, &trial, &[])? {
                SatOutcome::Sat(m) => model = m,
                SatOutcome::Unsat => break,
            }
        }
        // Freeze the achieved weight as a permanent lower bound.
        let achieved = item_sum(&model, items);
        if achieved > 0 {
            encode_at_least(items, achieved, &mut num_vars, &mut clauses);
        }
    }

    if !minimize_vars.is_empty() {
        loop {
            let lits: Vec<Lit> = minimize_vars.iter().map(|&v| v as Lit).collect();
            let true_count = lits.iter().filter(|&&l| model[l as usize]).count();
            if true_count == 0 {
                break;
            }
            let mut trial = clauses.clone();
            let mut trial_vars = num_vars;
            encode_at_most(&lits, true_count - 1, &mut trial_vars, &mut trial);
            match sat_solve(trial_vars, &trial, &[])? {
                SatOutcome::Sat(m) => model = m,
                SatOutcome::Unsat => break,
            }
        }
    }

    // Trust nothing: re-check the model against the original hard clauses
    // and recompute the objective from clause satisfaction.
    let mut final_model = model;
    final_model.truncate(p.num_vars() as usize + 1);
    final_model.resize(p.num_vars() as usize + 1, false);
    if !eval_all(&final_model, p.hard()) {
        return Err(SigError::Internal(
            "optimizer produced a model violating hard clauses".into(),
        ));
    }
    let objective = p.objective_of(&final_model);
    Ok(Assignment {
        model: final_model,
        objective,
    })
}
