//! Conflict-driven clause-learning SAT solver with two watched literals.

use std::sync::atomic::{AtomicBool, Ordering};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, negated: bool) -> Lit {
        Lit(var << 1 | negated as u32)
    }
    pub fn var(self) -> u32 {
        self.0 >> 1
    }
    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }
    fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

/// Branching heuristic.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Heuristic {
    /// Activity-based ordering, bumped on conflicts.
    #[default]
    Vsids,
    /// Lowest unassigned variable index first.
    Static,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SatResult {
    Sat,
    Unsat,
}

#[derive(Debug, thiserror::Error)]
#[error("SAT search cancelled")]
pub struct Cancelled;

const UNDEF: u8 = 2;

struct Clause {
    lits: Vec<Lit>,
}

fn lit_value(assign: &[u8], l: Lit) -> u8 {
    let a = assign[l.var() as usize];
    if a == UNDEF {
        UNDEF
    } else {
        a ^ l.is_neg() as u8
    }
}

pub struct SatSolver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>,
    assign: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: Vec<u32>,
    heap_pos: Vec<Option<usize>>,
    phase: Vec<bool>,
    seen: Vec<bool>,
    heuristic: Heuristic,
    unsat: bool,
    pub conflicts: u64,
    pub decisions: u64,
}

impl SatSolver {
    pub fn new(heuristic: Heuristic) -> Self {
        SatSolver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            heap: Vec::new(),
            heap_pos: Vec::new(),
            phase: Vec::new(),
            seen: Vec::new(),
            heuristic,
            unsat: false,
            conflicts: 0,
            decisions: 0,
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.assign.len() as u32
    }

    pub fn new_var(&mut self) -> u32 {
        let v = self.assign.len() as u32;
        self.assign.push(UNDEF);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.heap_pos.push(None);
        self.phase.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap_insert(v);
        v
    }

    fn value(&self, l: Lit) -> u8 {
        lit_value(&self.assign, l)
    }

    pub fn model_value(&self, var: u32) -> bool {
        self.assign[var as usize] == 1
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    pub fn add_clause(&mut self, lits: &[Lit]) {
        if self.unsat {
            return;
        }
        debug_assert_eq!(self.decision_level(), 0);
        let mut ls: Vec<Lit> = lits.to_vec();
        ls.sort();
        ls.dedup();
        for w in ls.windows(2) {
            if w[0] == !w[1] {
                return;
            }
        }
        ls.retain(|&l| self.value(l) != 0);
        if ls.iter().any(|&l| self.value(l) == 1) {
            return;
        }
        match ls.len() {
            0 => self.unsat = true,
            1 => {
                self.enqueue(ls[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
            }
            _ => {
                let ci = self.clauses.len();
                self.watches[(!ls[0]).idx()].push(ci);
                self.watches[(!ls[1]).idx()].push(ci);
                self.clauses.push(Clause { lits: ls });
            }
        }
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var() as usize;
        self.assign[v] = !l.is_neg() as u8;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause index.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.idx()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let lits = &mut self.clauses[ci].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if lit_value(&self.assign, first) == 1 {
                    ws[j] = ci;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    if lit_value(&self.assign, lits[k]) != 0 {
                        lits.swap(1, k);
                        let nl = lits[1];
                        self.watches[(!nl).idx()].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = ci;
                j += 1;
                if self.value(first) == 0 {
                    conflict = Some(ci);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(ci));
                }
            }
            ws.truncate(j);
            self.watches[p.idx()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)];
        let mut counter = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let dl = self.decision_level();
        loop {
            let lits = self.clauses[confl].lits.clone();
            let start = if p.is_some() { 1 } else { 0 };
            for &q in &lits[start..] {
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(q.var());
                    if self.level[v] >= dl {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            self.seen[pl.var() as usize] = false;
            counter -= 1;
            if counter == 0 {
                break;
            }
            confl = self.reason[pl.var() as usize].expect("implied literal has a reason");
            // reason clauses keep the implied literal first
            let c = &mut self.clauses[confl].lits;
            if c[0] != pl {
                let pos = c.iter().position(|&l| l == pl).expect("literal in reason");
                c.swap(0, pos);
            }
        }
        learnt[0] = !p.expect("uip");
        for l in &learnt[1..] {
            self.seen[l.var() as usize] = false;
        }
        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var() as usize] > self.level[learnt[max_i].var() as usize] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            bt = self.level[learnt[1].var() as usize];
        }
        (learnt, bt)
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var();
            self.assign[v as usize] = UNDEF;
            self.reason[v as usize] = None;
            self.phase[v as usize] = !l.is_neg();
            if self.heap_pos[v as usize].is_none() {
                self.heap_insert(v);
            }
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    fn bump(&mut self, v: u32) {
        if self.heuristic != Heuristic::Vsids {
            return;
        }
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        if let Some(pos) = self.heap_pos[v as usize] {
            self.heap_up(pos);
        }
    }

    fn better(&self, a: u32, b: u32) -> bool {
        match self.heuristic {
            Heuristic::Static => a < b,
            Heuristic::Vsids => {
                let (x, y) = (self.activity[a as usize], self.activity[b as usize]);
                x > y || (x == y && a < b)
            }
        }
    }

    fn heap_insert(&mut self, v: u32) {
        self.heap.push(v);
        let pos = self.heap.len() - 1;
        self.heap_pos[v as usize] = Some(pos);
        self.heap_up(pos);
    }

    fn heap_up(&mut self, mut pos: usize) {
        while pos > 0 {
            let parent = (pos - 1) / 2;
            if self.better(self.heap[pos], self.heap[parent]) {
                self.heap_swap(pos, parent);
                pos = parent;
            } else {
                break;
            }
        }
    }

    fn heap_down(&mut self, mut pos: usize) {
        loop {
            let (l, r) = (2 * pos + 1, 2 * pos + 2);
            let mut best = pos;
            if l < self.heap.len() && self.better(self.heap[l], self.heap[best]) {
                best = l;
            }
            if r < self.heap.len() && self.better(self.heap[r], self.heap[best]) {
                best = r;
            }
            if best == pos {
                break;
            }
            self.heap_swap(pos, best);
            pos = best;
        }
    }

    fn heap_swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.heap_pos[self.heap[a] as usize] = Some(a);
        self.heap_pos[self.heap[b] as usize] = Some(b);
    }

    fn heap_pop(&mut self) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0];
        let last = self.heap.pop().expect("non-empty");
        self.heap_pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.heap_pos[last as usize] = Some(0);
            self.heap_down(0);
        }
        Some(top)
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap_pop() {
            if self.assign[v as usize] == UNDEF {
                return Some(Lit::new(v, !self.phase[v as usize]));
            }
        }
        None
    }

    pub fn solve(&mut self, cancel: Option<&AtomicBool>) -> Result<SatResult, Cancelled> {
        if self.unsat {
            return Ok(SatResult::Unsat);
        }
        if self.propagate().is_some() {
            self.unsat = true;
            return Ok(SatResult::Unsat);
        }
        let mut restart_idx = 1u64;
        let mut budget = 100 * luby(restart_idx);
        let mut since_restart = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                since_restart += 1;
                if self.conflicts.is_multiple_of(256) {
                    if let Some(c) = cancel {
                        if c.load(Ordering::Relaxed) {
                            return Err(Cancelled);
                        }
                    }
                }
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return Ok(SatResult::Unsat);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let ci = self.clauses.len();
                    self.watches[(!learnt[0]).idx()].push(ci);
                    self.watches[(!learnt[1]).idx()].push(ci);
                    let first = learnt[0];
                    self.clauses.push(Clause { lits: learnt });
                    self.enqueue(first, Some(ci));
                }
                self.var_inc /= 0.95;
            } else {
                if since_restart >= budget {
                    since_restart = 0;
                    restart_idx += 1;
                    budget = 100 * luby(restart_idx);
                    self.cancel_until(0);
                    continue;
                }
                match self.pick_branch() {
                    None => return Ok(SatResult::Sat),
                    Some(l) => {
                        self.decisions += 1;
                        if self.decisions.is_multiple_of(4096) {
                            if let Some(c) = cancel {
                                if c.load(Ordering::Relaxed) {
                                    return Err(Cancelled);
                                }
                            }
                        }
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
        }
    }
}

fn luby(mut i: u64) -> u64 {
    // 1 1 2 1 1 2 4 ...
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1 << seq
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(v: i32) -> Lit {
        Lit::new(v.unsigned_abs() - 1, v < 0)
    }

    fn run(n: u32, cls: &[Vec<i32>], h: Heuristic) -> (SatResult, Vec<bool>) {
        let mut s = SatSolver::new(h);
        for _ in 0..n {
            s.new_var();
        }
        for c in cls {
            let ls: Vec<Lit> = c.iter().map(|&v| lit(v)).collect();
            s.add_clause(&ls);
        }
        let r = s.solve(None).unwrap();
        let m = (0..n).map(|v| s.model_value(v)).collect();
        (r, m)
    }

    fn satisfies(cls: &[Vec<i32>], m: &[bool]) -> bool {
        cls.iter().all(|c| c.iter().any(|&v| m[(v.unsigned_abs() - 1) as usize] == (v > 0)))
    }

    #[test]
    fn luby_sequence_prefix() {
        let v: Vec<u64> = (0..9).map(luby).collect();
        assert_eq!(v, vec![1, 1, 2, 1, 1, 2, 4, 1, 1]);
    }

    #[test]
    fn pigeonhole_three_into_two_is_unsat() {
        // p(i,j): pigeon i in hole j, var = 2*i + j + 1
        let mut cls = vec![];
        for i in 0..3 {
            cls.push(vec![2 * i + 1, 2 * i + 2]);
        }
        for j in 0..2 {
            for a in 0..3 {
                for b in (a + 1)..3 {
                    cls.push(vec![-(2 * a + j + 1), -(2 * b + j + 1)]);
                }
            }
        }
        for h in [Heuristic::Vsids, Heuristic::Static] {
            assert_eq!(run(6, &cls, h).0, SatResult::Unsat);
        }
    }

    #[test]
    fn models_satisfy_every_clause() {
        let cls = vec![vec![1, 2, -3], vec![-1, 3], vec![-2, 3], vec![3, 4], vec![-4, -1]];
        for h in [Heuristic::Vsids, Heuristic::Static] {
            let (r, m) = run(4, &cls, h);
            assert_eq!(r, SatResult::Sat);
            assert!(satisfies(&cls, &m));
        }
    }

    #[test]
    fn empty_clause_is_unsat() {
        assert_eq!(run(1, &[vec![]], Heuristic::Vsids).0, SatResult::Unsat);
        assert_eq!(run(1, &[vec![1], vec![-1]], Heuristic::Vsids).0, SatResult::Unsat);
    }
}
