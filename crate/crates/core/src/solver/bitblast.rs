//! Tseitin encoding of terms into clauses over a [`SatSolver`].

use std::collections::HashMap;
use std::sync::Arc;

use super::sat::{Lit, SatSolver};
use super::term::{Op, TermId, TermStore};

pub struct BitBlaster<'a> {
    pub store: &'a TermStore,
    pub sat: SatSolver,
    cache: HashMap<TermId, Vec<Lit>>,
    tru: Lit,
    pub vars: Vec<(Arc<str>, TermId, Vec<Lit>)>,
}

impl<'a> BitBlaster<'a> {
    pub fn new(store: &'a TermStore, mut sat: SatSolver) -> Self {
        let v = sat.new_var();
        let tru = Lit::new(v, false);
        sat.add_clause(&[tru]);
        BitBlaster { store, sat, cache: HashMap::new(), tru, vars: Vec::new() }
    }

    fn konst(&self, b: bool) -> Lit {
        if b {
            self.tru
        } else {
            !self.tru
        }
    }

    fn as_const(&self, l: Lit) -> Option<bool> {
        if l == self.tru {
            Some(true)
        } else if l == !self.tru {
            Some(false)
        } else {
            None
        }
    }

    fn fresh(&mut self) -> Lit {
        Lit::new(self.sat.new_var(), false)
    }

    pub fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        match (self.as_const(a), self.as_const(b)) {
            (Some(false), _) | (_, Some(false)) => return self.konst(false),
            (Some(true), _) => return b,
            (_, Some(true)) => return a,
            _ => {}
        }
        if a == b {
            return a;
        }
        if a == !b {
            return self.konst(false);
        }
        let o = self.fresh();
        self.sat.add_clause(&[!o, a]);
        self.sat.add_clause(&[!o, b]);
        self.sat.add_clause(&[o, !a, !b]);
        o
    }

    pub fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and2(!a, !b)
    }

    pub fn xor2(&mut self, a: Lit, b: Lit) -> Lit {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), _) => return if x { !b } else { b },
            (_, Some(y)) => return if y { !a } else { a },
            _ => {}
        }
        if a == b {
            return self.konst(false);
        }
        if a == !b {
            return self.konst(true);
        }
        let o = self.fresh();
        self.sat.add_clause(&[!o, a, b]);
        self.sat.add_clause(&[!o, !a, !b]);
        self.sat.add_clause(&[o, !a, b]);
        self.sat.add_clause(&[o, a, !b]);
        o
    }

    pub fn mux(&mut self, c: Lit, t: Lit, e: Lit) -> Lit {
        match self.as_const(c) {
            Some(true) => return t,
            Some(false) => return e,
            None => {}
        }
        if t == e {
            return t;
        }
        let o = self.fresh();
        self.sat.add_clause(&[!c, !t, o]);
        self.sat.add_clause(&[!c, t, !o]);
        self.sat.add_clause(&[c, !e, o]);
        self.sat.add_clause(&[c, e, !o]);
        o
    }

    fn full_add(&mut self, a: Lit, b: Lit, c: Lit) -> (Lit, Lit) {
        let ab = self.xor2(a, b);
        let s = self.xor2(ab, c);
        let t1 = self.and2(a, b);
        let t2 = self.and2(ab, c);
        let carry = self.or2(t1, t2);
        (s, carry)
    }

    fn adder(&mut self, a: &[Lit], b: &[Lit], carry_in: Lit) -> Vec<Lit> {
        let mut c = carry_in;
        let mut out = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let (s, co) = self.full_add(a[i], b[i], c);
            out.push(s);
            c = co;
        }
        out
    }

    fn const_bits(&self, bits: &[Lit]) -> Option<u64> {
        bits.iter().enumerate().try_fold(0u64, |acc, (i, &l)| self.as_const(l).map(|v| acc | ((v as u64) << i)))
    }

    fn multiplier(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        if self.const_bits(a).is_some() && self.const_bits(b).is_none() {
            return self.multiplier(b, a);
        }
        let w = a.len();
        if let Some(k) = self.const_bits(b) {
            // fewer partial products through the negated constant: a*k = -(a*(-k))
            let nk = k.wrapping_neg() & super::term::mask(w as u32);
            if nk.count_ones() + 1 < k.count_ones() {
                let nb: Vec<Lit> = (0..w).map(|i| self.konst((nk >> i) & 1 == 1)).collect();
                let p = self.multiplier(a, &nb);
                let inv: Vec<Lit> = p.iter().map(|&l| !l).collect();
                let zero = vec![self.konst(false); w];
                let one = self.konst(true);
                return self.adder(&inv, &zero, one);
            }
        }
        let mut acc = vec![self.konst(false); w];
        for i in 0..w {
            if self.as_const(b[i]) == Some(false) {
                continue;
            }
            let mut partial = vec![self.konst(false); w];
            for j in 0..(w - i) {
                partial[i + j] = self.and2(a[j], b[i]);
            }
            let f = self.konst(false);
            acc = self.adder(&acc, &partial, f);
        }
        acc
    }

    fn ult_bits(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut lt = self.konst(false);
        for i in 0..a.len() {
            let na_b = self.and2(!a[i], b[i]);
            let x = self.xor2(a[i], b[i]);
            let keep = self.and2(!x, lt);
            lt = self.or2(na_b, keep);
        }
        lt
    }

    fn eq_bits(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut r = self.konst(true);
        for i in 0..a.len() {
            let x = self.xor2(a[i], b[i]);
            r = self.and2(r, !x);
        }
        r
    }

    fn shifter(&mut self, a: &[Lit], sh: &[Lit], kind: &Op) -> Vec<Lit> {
        let w = a.len();
        let fill = match kind {
            Op::Ashr => a[w - 1],
            _ => self.konst(false),
        };
        let mut cur = a.to_vec();
        let mut overflow = self.konst(false);
        for (k, &bit) in sh.iter().enumerate() {
            let amount = 1usize.checked_shl(k as u32).unwrap_or(usize::MAX);
            if amount >= w {
                overflow = self.or2(overflow, bit);
                continue;
            }
            let mut next = Vec::with_capacity(w);
            for i in 0..w {
                let shifted = match kind {
                    Op::Shl => {
                        if i >= amount {
                            cur[i - amount]
                        } else {
                            fill
                        }
                    }
                    _ => {
                        if i + amount < w {
                            cur[i + amount]
                        } else {
                            fill
                        }
                    }
                };
                next.push(self.mux(bit, shifted, cur[i]));
            }
            cur = next;
        }
        cur.into_iter().map(|l| self.mux(overflow, fill, l)).collect()
    }

    /// Bits of `t`, least significant first.
    pub fn blast(&mut self, root: TermId) -> Vec<Lit> {
        if let Some(v) = self.cache.get(&root) {
            return v.clone();
        }
        for t in self.store.cone(&[root]) {
            if self.cache.contains_key(&t) {
                continue;
            }
            let bits = self.blast_node(t);
            self.cache.insert(t, bits);
        }
        self.cache[&root].clone()
    }

    fn blast_node(&mut self, t: TermId) -> Vec<Lit> {
        let n = self.store.node(t);
        let w = n.sort.width() as usize;
        let args: Vec<Vec<Lit>> = n.args.iter().map(|a| self.cache[a].clone()).collect();
        let a = |i: usize| &args[i];
        match &n.op {
            Op::BoolConst(b) => vec![self.konst(*b)],
            Op::BvConst(v) => (0..w).map(|i| self.konst(v >> i & 1 == 1)).collect(),
            Op::Var(name) => {
                let bits: Vec<Lit> = (0..w).map(|_| self.fresh()).collect();
                self.vars.push((name.clone(), t, bits.clone()));
                bits
            }
            Op::Not => vec![!a(0)[0]],
            Op::And => vec![self.and2(a(0)[0], a(1)[0])],
            Op::Or => vec![self.or2(a(0)[0], a(1)[0])],
            Op::Xor => vec![self.xor2(a(0)[0], a(1)[0])],
            Op::Ite => {
                let c = a(0)[0];
                (0..w).map(|i| self.mux(c, a(1)[i], a(2)[i])).collect()
            }
            Op::Eq => {
                let (x, y) = (a(0).clone(), a(1).clone());
                vec![self.eq_bits(&x, &y)]
            }
            Op::Neg => {
                let inv: Vec<Lit> = a(0).iter().map(|&l| !l).collect();
                let one = self.konst(true);
                let zero = vec![self.konst(false); w];
                self.adder(&inv, &zero, one)
            }
            Op::BvNot => a(0).iter().map(|&l| !l).collect(),
            Op::Add => {
                let f = self.konst(false);
                self.adder(&a(0).clone(), &a(1).clone(), f)
            }
            Op::Sub => {
                let inv: Vec<Lit> = a(1).iter().map(|&l| !l).collect();
                let one = self.konst(true);
                self.adder(&a(0).clone(), &inv, one)
            }
            Op::Mul => self.multiplier(&a(0).clone(), &a(1).clone()),
            Op::BvAnd => (0..w).map(|i| self.and2(a(0)[i], a(1)[i])).collect(),
            Op::BvOr => (0..w).map(|i| self.or2(a(0)[i], a(1)[i])).collect(),
            Op::BvXor => (0..w).map(|i| self.xor2(a(0)[i], a(1)[i])).collect(),
            Op::Shl | Op::Lshr | Op::Ashr => {
                let op = n.op.clone();
                self.shifter(&a(0).clone(), &a(1).clone(), &op)
            }
            Op::Ult => vec![self.ult_bits(&a(0).clone(), &a(1).clone())],
            Op::Ule => vec![!self.ult_bits(&a(1).clone(), &a(0).clone())],
            Op::Slt | Op::Sle => {
                let mut x = a(0).clone();
                let mut y = a(1).clone();
                let m = x.len() - 1;
                x[m] = !x[m];
                y[m] = !y[m];
                if n.op == Op::Slt {
                    vec![self.ult_bits(&x, &y)]
                } else {
                    vec![!self.ult_bits(&y, &x)]
                }
            }
            Op::Extract(hi, lo) => a(0)[*lo as usize..=*hi as usize].to_vec(),
            Op::ZeroExt(k) => {
                let mut v = a(0).clone();
                v.extend(std::iter::repeat_n(self.konst(false), *k as usize));
                v
            }
            Op::SignExt(k) => {
                let mut v = a(0).clone();
                let s = *v.last().expect("non-empty");
                v.extend(std::iter::repeat_n(s, *k as usize));
                v
            }
            Op::Concat => {
                let mut v = a(1).clone();
                v.extend(a(0).iter().copied());
                v
            }
        }
    }

    pub fn assert_true(&mut self, t: TermId) {
        let l = self.blast(t)[0];
        self.sat.add_clause(&[l]);
    }

    /// Value of a blasted term in the current SAT model.
    pub fn value_of(&self, bits: &[Lit]) -> u64 {
        let mut v = 0u64;
        for (i, &l) in bits.iter().enumerate().take(64) {
            let b = self.sat.model_value(l.var()) ^ l.is_neg();
            if b {
                v |= 1 << i;
            }
        }
        v
    }
}
