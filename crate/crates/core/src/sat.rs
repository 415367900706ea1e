//! Propositional SAT core: DPLL with two-watched-literal propagation and
//! chronological backtracking.
//!
//! Literals use the DIMACS convention: variable v (1-based) appears as +v or
//! -v. Branching is deterministic: lowest-numbered unassigned variable first,
//! positive phase first. Solved from scratch per call; instances here are
//! small and determinism matters more than speed.

use crate::error::{Result, SigError};

pub type Lit = i32;
pub type Clause = Vec<Lit>;

/// Truth values indexed by variable; `model[0]` is unused.
pub type Model = Vec<bool>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(Model),
    Unsat,
}

impl SatOutcome {
    pub fn model(&self) -> Option<&Model> {
        match self {
            SatOutcome::Sat(m) => Some(m),
            SatOutcome::Unsat => None,
        }
    }
}

/// True iff the clause has a literal made true by the model.
pub fn eval_clause(model: &Model, clause: &[Lit]) -> bool {
    clause.iter().any(|&l| {
        let v = l.unsigned_abs() as usize;
        model[v] == (l > 0)
    })
}

/// Independent check that a model satisfies every clause. Used to validate
/// solver output before anything downstream trusts it.
pub fn eval_all(model: &Model, clauses: &[Clause]) -> bool {
    clauses.iter().all(|c| eval_clause(model, c))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Value {
    Unassigned,
    True,
    False,
}

struct Solver {
    num_vars: usize,
    clauses: Vec<Clause>,
    // Watch lists indexed by literal (see `widx`); entries are clause indices.
    watches: Vec<Vec<usize>>,
    assign: Vec<Value>,
    trail: Vec<Lit>,
    // Start position of each decision level in the trail.
    level_start: Vec<usize>,
    // Whether the decision at each level has already been flipped.
    flipped: Vec<bool>,
    prop_head: usize,
}

fn widx(lit: Lit) -> usize {
    let v = lit.unsigned_abs() as usize;
    2 * (v - 1) + usize::from(lit < 0)
}

impl Solver {
    fn value(&self, lit: Lit) -> Value {
        let v = lit.unsigned_abs() as usize;
        match (self.assign[v], lit > 0) {
            (Value::Unassigned, _) => Value::Unassigned,
            (Value::True, true) | (Value::False, false) => Value::True,
            _ => Value::False,
        }
    }

    /// Assigns `lit` true; false means the literal was already false.
    fn enqueue(&mut self, lit: Lit) -> bool {
        match self.value(lit) {
            Value::False => false,
            Value::True => true,
            Value::Unassigned => {
                let v = lit.unsigned_abs() as usize;
                self.assign[v] = if lit > 0 { Value::True } else { Value::False };
                self.trail.push(lit);
                true
            }
        }
    }

    /// Propagates all pending assignments. Returns false on conflict.
    fn propagate(&mut self) -> bool {
        while self.prop_head < self.trail.len() {
            let lit = self.trail[self.prop_head];
            self.prop_head += 1;
            let falsified = -lit;

            let mut ws = std::mem::take(&mut self.watches[widx(falsified)]);
            let mut kept = 0;
            let mut conflict = false;
            let mut i = 0;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                // Keep the falsified literal at slot 1.
                if self.clauses[ci][0] == falsified {
                    self.clauses[ci].swap(0, 1);
                }
                if self.value(self.clauses[ci][0]) == Value::True {
                    ws[kept] = ci;
                    kept += 1;
                    continue;
                }
                // Look for a non-false replacement watch.
                let replacement = (2..self.clauses[ci].len())
                    .find(|&k| self.value(self.clauses[ci][k]) != Value::False);
                if let Some(k) = replacement {
                    self.clauses[ci].swap(1, k);
                    let new_watch = self.clauses[ci][1];
                    self.watches[widx(new_watch)].push(ci);
                    continue;
                }
                // Clause is unit on slot 0, or conflicting.
                ws[kept] = ci;
                kept += 1;
                let unit = self.clauses[ci][0];
                if !self.enqueue(unit) {
                    // Conflict: keep the rest of the watch list intact.
                    while i < ws.len() {
                        ws[kept] = ws[i];
                        kept += 1;
                        i += 1;
                    }
                    conflict = true;
                }
            }
            ws.truncate(kept);
            self.watches[widx(falsified)] = ws;
            if conflict {
                return false;
            }
        }
        true
    }

    fn undo_to(&mut self, pos: usize) {
        while self.trail.len() > pos {
            let lit = self.trail.pop().expect("non-empty trail");
            self.assign[lit.unsigned_abs() as usize] = Value::Unassigned;
        }
        self.prop_head = pos;
    }

    /// Chronological backtracking: flip the deepest unflipped decision.
    /// Returns false when no decision remains (formula is unsatisfiable).
    fn resolve_conflict(&mut self) -> bool {
        loop {
            let Some(&start) = self.level_start.last() else {
                return false;
            };
            let decision = self.trail[start];
            if *self.flipped.last().expect("level") {
                self.undo_to(start);
                self.level_start.pop();
                self.flipped.pop();
                continue;
            }
            self.undo_to(start);
            *self.flipped.last_mut().expect("level") = true;
            let ok = self.enqueue(-decision);
            debug_assert!(ok, "flipped decision cannot be falsified after undo");
            return true;
        }
    }

    fn next_unassigned(&self) -> Option<usize> {
        (1..=self.num_vars).find(|&v| self.assign[v] == Value::Unassigned)
    }

    fn search(&mut self) -> SatOutcome {
        loop {
            if !self.propagate() {
                if !self.resolve_conflict() {
                    return SatOutcome::Unsat;
                }
                continue;
            }
            match self.next_unassigned() {
                None => {
                    let mut model = vec![false; self.num_vars + 1];
                    for v in 1..=self.num_vars {
                        model[v] = self.assign[v] == Value::True;
                    }
                    return SatOutcome::Sat(model);
                }
                Some(v) => {
                    self.level_start.push(self.trail.len());
                    self.flipped.push(false);
                    let ok = self.enqueue(v as Lit);
                    debug_assert!(ok, "decision variable was unassigned");
                }
            }
        }
    }
}

/// Normalizes a clause: sorted by variable with positive literal first,
/// duplicates removed. Returns None for tautologies.
fn normalize(clause: &[Lit]) -> Option<Clause> {
    let mut c: Clause = clause.to_vec();
    c.sort_unstable_by_key(|&l| (l.unsigned_abs(), l < 0));
    c.dedup();
    for pair in c.windows(2) {
        if pair[0] == -pair[1] {
            return None;
        }
    }
    Some(c)
}

/// Decides satisfiability of the clause set under the given assumption
/// literals. A returned model is validated against every input clause
/// before being handed back.
pub fn sat_solve(num_vars: u32, clauses: &[Clause], assumptions: &[Lit]) -> Result<SatOutcome> {
    let n = num_vars as usize;
    let check_lit = |l: Lit| -> Result<()> {
        let v = l.unsigned_abs() as usize;
        if l == 0 || v > n {
            return Err(SigError::InvalidInput(format!(
                "literal {l} out of range for {num_vars} variables"
            )));
        }
        Ok(())
    };

    let mut solver = Solver {
        num_vars: n,
        clauses: Vec::with_capacity(clauses.len()),
        watches: vec![Vec::new(); 2 * n],
        assign: vec![Value::Unassigned; n + 1],
        trail: Vec::new(),
        level_start: Vec::new(),
        flipped: Vec::new(),
        prop_head: 0,
    };

    let mut units: Vec<Lit> = Vec::new();
    for clause in clauses {
        for &l in clause {
            check_lit(l)?;
        }
        let Some(c) = normalize(clause) else {
            continue; // tautology
        };
        match c.len() {
            0 => return Ok(SatOutcome::Unsat),
            1 => units.push(c[0]),
            _ => {
                let ci = solver.clauses.len();
                solver.watches[widx(c[0])].push(ci);
                solver.watches[widx(c[1])].push(ci);
                solver.clauses.push(c);
            }
        }
    }

    for &l in assumptions {
        check_lit(l)?;
    }
    // Root-level facts: unit clauses, then assumptions.
    for &l in units.iter().chain(assumptions) {
        if !solver.enqueue(l) {
            return Ok(SatOutcome::Unsat);
        }
    }

    let outcome = solver.search();
    if let SatOutcome::Sat(model) = &outcome {
        if !eval_all(model, clauses) || !assumptions.iter().all(|&l| model[l.unsigned_abs() as usize] == (l > 0)) {
            return Err(SigError::Internal(
                "solver returned a model rejected by the clause evaluator".into(),
            ));
        }
    }
    Ok(outcome)
}
