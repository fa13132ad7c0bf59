//! Hash-consed bit-vector and boolean terms with simplifying constructors.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TermId(u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Sort {
    Bool,
    Bv(u32),
}

impl Sort {
    pub fn width(self) -> u32 {
        match self {
            Sort::Bool => 1,
            Sort::Bv(w) => w,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Op {
    BoolConst(bool),
    BvConst(u64),
    Var(Arc<str>),
    Not,
    And,
    Or,
    Xor,
    Ite,
    Eq,
    Neg,
    BvNot,
    Add,
    Sub,
    Mul,
    BvAnd,
    BvOr,
    BvXor,
    Shl,
    Lshr,
    Ashr,
    Ult,
    Ule,
    Slt,
    Sle,
    Extract(u32, u32),
    ZeroExt(u32),
    SignExt(u32),
    Concat,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Node {
    pub op: Op,
    pub args: Box<[TermId]>,
    pub sort: Sort,
}

/// Sums with more distinct atoms than this are left as built.
const LINEAR_ATOMS: usize = 24;
const LINEAR_VISITS: usize = 256;

/// `k + sum(coef * atom)` modulo 2^w, without zero coefficients.
#[derive(Debug, Default, PartialEq, Eq)]
struct Linear {
    k: u64,
    terms: BTreeMap<TermId, u64>,
}

impl Linear {
    fn absorb(&mut self, other: Linear, m: u64) -> bool {
        self.k = self.k.wrapping_add(other.k) & m;
        for (t, c) in other.terms {
            let e = self.terms.entry(t).or_insert(0);
            *e = e.wrapping_add(c) & m;
            if *e == 0 {
                self.terms.remove(&t);
            }
        }
        self.terms.len() <= LINEAR_ATOMS
    }
}

/// Arena of shared terms. Children always have smaller ids than their parents.
#[derive(Clone, Default, Debug)]
pub struct TermStore {
    nodes: Vec<Node>,
    map: HashMap<Node, TermId>,
}

pub fn mask(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

pub fn to_signed(v: u64, w: u32) -> i64 {
    if w >= 64 {
        return v as i64;
    }
    let v = v & mask(w);
    if w > 0 && v >> (w - 1) & 1 == 1 {
        (v | !mask(w)) as i64
    } else {
        v as i64
    }
}

fn commutative(op: &Op) -> bool {
    matches!(op, Op::And | Op::Or | Op::Xor | Op::Eq | Op::Add | Op::Mul | Op::BvAnd | Op::BvOr | Op::BvXor)
}

impl TermStore {
    pub fn new() -> Self {
        let mut s = TermStore::default();
        s.intern(Op::BoolConst(false), vec![], Sort::Bool);
        s.intern(Op::BoolConst(true), vec![], Sort::Bool);
        s
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, t: TermId) -> &Node {
        &self.nodes[t.index()]
    }

    pub fn sort(&self, t: TermId) -> Sort {
        self.nodes[t.index()].sort
    }

    pub fn width(&self, t: TermId) -> u32 {
        self.sort(t).width()
    }

    fn intern(&mut self, op: Op, mut args: Vec<TermId>, sort: Sort) -> TermId {
        if commutative(&op) && args.len() == 2 && args[0] > args[1] {
            args.swap(0, 1);
        }
        let node = Node { op, args: args.into_boxed_slice(), sort };
        if let Some(&id) = self.map.get(&node) {
            return id;
        }
        let id = TermId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.map.insert(node, id);
        id
    }

    /// Linear view of `scale * t`, or `None` when it is too large to be worth normalizing.
    fn linear(&self, t: TermId, scale: u64) -> Option<Linear> {
        let m = mask(self.width(t));
        let mut lin = Linear::default();
        let mut stack = vec![(t, scale & m)];
        let mut visits = 0;
        while let Some((t, c)) = stack.pop() {
            visits += 1;
            if visits > LINEAR_VISITS {
                return None;
            }
            if c == 0 {
                continue;
            }
            let n = self.node(t);
            let konst = |i: usize| self.as_bv(n.args[i]);
            match n.op {
                Op::BvConst(v) => lin.k = lin.k.wrapping_add(c.wrapping_mul(v)) & m,
                Op::Add => stack.extend([(n.args[0], c), (n.args[1], c)]),
                Op::Sub => stack.extend([(n.args[0], c), (n.args[1], c.wrapping_neg() & m)]),
                Op::Neg => stack.push((n.args[0], c.wrapping_neg() & m)),
                Op::Mul if konst(1).is_some() => stack.push((n.args[0], c.wrapping_mul(konst(1).unwrap()) & m)),
                Op::Mul if konst(0).is_some() => stack.push((n.args[1], c.wrapping_mul(konst(0).unwrap()) & m)),
                _ => {
                    let e = lin.terms.entry(t).or_insert(0);
                    *e = e.wrapping_add(c) & m;
                    if *e == 0 {
                        lin.terms.remove(&t);
                    }
                    if lin.terms.len() > LINEAR_ATOMS {
                        return None;
                    }
                }
            }
        }
        Some(lin)
    }

    /// Canonical term of a linear form: atoms in id order, constant last.
    fn build_linear(&mut self, lin: Linear, w: u32) -> TermId {
        let m = mask(w);
        let sort = Sort::Bv(w);
        let mut acc: Option<TermId> = None;
        for (t, c) in lin.terms {
            let term = if c == 1 {
                t
            } else if c == m {
                self.intern(Op::Neg, vec![t], sort)
            } else {
                let kc = self.bv(w, c);
                self.intern(Op::Mul, vec![t, kc], sort)
            };
            acc = Some(match acc {
                None => term,
                Some(a) => self.intern(Op::Add, vec![a, term], sort),
            });
        }
        match acc {
            None => self.bv(w, lin.k),
            Some(a) if lin.k == 0 => a,
            Some(a) => {
                let kc = self.bv(w, lin.k);
                self.intern(Op::Add, vec![a, kc], sort)
            }
        }
    }

    /// Linear form of `a op b` for additive operators and products with a constant.
    fn linear_binop(&self, op: &Op, a: TermId, b: TermId) -> Option<Linear> {
        let m = mask(self.width(a));
        match op {
            Op::Add | Op::Sub => {
                let mut la = self.linear(a, 1)?;
                let lb = self.linear(b, if *op == Op::Add { 1 } else { m })?;
                la.absorb(lb, m).then_some(la)
            }
            Op::Mul => match (self.as_bv(a), self.as_bv(b)) {
                (_, Some(k)) => self.linear(a, k),
                (Some(k), _) => self.linear(b, k),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn tru(&self) -> TermId {
        TermId(1)
    }

    pub fn fals(&self) -> TermId {
        TermId(0)
    }

    pub fn bool(&self, b: bool) -> TermId {
        if b {
            self.tru()
        } else {
            self.fals()
        }
    }

    pub fn bv(&mut self, w: u32, v: u64) -> TermId {
        self.intern(Op::BvConst(v & mask(w)), vec![], Sort::Bv(w))
    }

    pub fn bv_signed(&mut self, w: u32, v: i64) -> TermId {
        self.bv(w, v as u64)
    }

    pub fn var(&mut self, name: &str, sort: Sort) -> TermId {
        self.intern(Op::Var(Arc::from(name)), vec![], sort)
    }

    pub fn as_bool(&self, t: TermId) -> Option<bool> {
        match self.node(t).op {
            Op::BoolConst(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_bv(&self, t: TermId) -> Option<u64> {
        match self.node(t).op {
            Op::BvConst(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_const(&self, t: TermId) -> bool {
        matches!(self.node(t).op, Op::BoolConst(_) | Op::BvConst(_))
    }

    pub fn var_name(&self, t: TermId) -> Option<&str> {
        match &self.node(t).op {
            Op::Var(n) => Some(n),
            _ => None,
        }
    }

    fn is_not_of(&self, a: TermId, b: TermId) -> bool {
        let n = self.node(a);
        n.op == Op::Not && n.args[0] == b
    }

    pub fn not(&mut self, a: TermId) -> TermId {
        if let Some(b) = self.as_bool(a) {
            return self.bool(!b);
        }
        let n = self.node(a);
        if n.op == Op::Not {
            return n.args[0];
        }
        self.intern(Op::Not, vec![a], Sort::Bool)
    }

    pub fn and(&mut self, a: TermId, b: TermId) -> TermId {
        match (self.as_bool(a), self.as_bool(b)) {
            (Some(false), _) | (_, Some(false)) => return self.fals(),
            (Some(true), _) => return b,
            (_, Some(true)) => return a,
            _ => {}
        }
        if a == b {
            return a;
        }
        if self.is_not_of(a, b) || self.is_not_of(b, a) {
            return self.fals();
        }
        // a absorbed by a conjunct already present
        for (x, y) in [(a, b), (b, a)] {
            let n = self.node(y);
            if n.op == Op::And && n.args.contains(&x) {
                return y;
            }
        }
        self.intern(Op::And, vec![a, b], Sort::Bool)
    }

    pub fn or(&mut self, a: TermId, b: TermId) -> TermId {
        match (self.as_bool(a), self.as_bool(b)) {
            (Some(true), _) | (_, Some(true)) => return self.tru(),
            (Some(false), _) => return b,
            (_, Some(false)) => return a,
            _ => {}
        }
        if a == b {
            return a;
        }
        if self.is_not_of(a, b) || self.is_not_of(b, a) {
            return self.tru();
        }
        // (g & c) | (g & !c) == g
        let (na, nb) = (self.node(a).clone(), self.node(b).clone());
        if na.op == Op::And && nb.op == Op::And {
            for i in 0..2 {
                for j in 0..2 {
                    if na.args[i] == nb.args[j] {
                        let (x, y) = (na.args[1 - i], nb.args[1 - j]);
                        if self.is_not_of(x, y) || self.is_not_of(y, x) {
                            return na.args[i];
                        }
                    }
                }
            }
        }
        for (x, y) in [(a, b), (b, a)] {
            let n = self.node(y);
            if n.op == Op::And && n.args.contains(&x) {
                return x;
            }
            if n.op == Op::Or && n.args.contains(&x) {
                return y;
            }
        }
        self.intern(Op::Or, vec![a, b], Sort::Bool)
    }

    pub fn xor(&mut self, a: TermId, b: TermId) -> TermId {
        match (self.as_bool(a), self.as_bool(b)) {
            (Some(x), Some(y)) => return self.bool(x != y),
            (Some(false), _) => return b,
            (_, Some(false)) => return a,
            (Some(true), _) => return self.not(b),
            (_, Some(true)) => return self.not(a),
            _ => {}
        }
        if a == b {
            return self.fals();
        }
        self.intern(Op::Xor, vec![a, b], Sort::Bool)
    }

    pub fn implies(&mut self, a: TermId, b: TermId) -> TermId {
        let na = self.not(a);
        self.or(na, b)
    }

    pub fn and_all(&mut self, ts: impl IntoIterator<Item = TermId>) -> TermId {
        let mut acc = self.tru();
        for t in ts {
            acc = self.and(acc, t);
        }
        acc
    }

    pub fn or_all(&mut self, ts: impl IntoIterator<Item = TermId>) -> TermId {
        let mut acc = self.fals();
        for t in ts {
            acc = self.or(acc, t);
        }
        acc
    }

    pub fn ite(&mut self, c: TermId, a: TermId, b: TermId) -> TermId {
        if let Some(cv) = self.as_bool(c) {
            return if cv { a } else { b };
        }
        if a == b {
            return a;
        }
        if self.node(c).op == Op::Not {
            let inner = self.node(c).args[0];
            return self.ite(inner, b, a);
        }
        let sort = self.sort(a);
        if sort == Sort::Bool {
            match (self.as_bool(a), self.as_bool(b)) {
                (Some(true), Some(false)) => return c,
                (Some(false), Some(true)) => return self.not(c),
                (Some(true), _) => return self.or(c, b),
                (Some(false), _) => {
                    let nc = self.not(c);
                    return self.and(nc, b);
                }
                (_, Some(true)) => {
                    let nc = self.not(c);
                    return self.or(nc, a);
                }
                (_, Some(false)) => return self.and(c, a),
                _ => {}
            }
        }
        // collapse nested selections on the same condition
        let na = self.node(a).clone();
        if na.op == Op::Ite && na.args[0] == c {
            return self.ite(c, na.args[1], b);
        }
        let nb = self.node(b).clone();
        if nb.op == Op::Ite && nb.args[0] == c {
            return self.ite(c, a, nb.args[2]);
        }
        self.intern(Op::Ite, vec![c, a, b], sort)
    }

    pub fn eq(&mut self, a: TermId, b: TermId) -> TermId {
        if a == b {
            return self.tru();
        }
        let sort = self.sort(a);
        debug_assert_eq!(sort, self.sort(b), "eq sort mismatch");
        if sort == Sort::Bool {
            match (self.as_bool(a), self.as_bool(b)) {
                (Some(x), Some(y)) => return self.bool(x == y),
                (Some(true), _) => return b,
                (_, Some(true)) => return a,
                (Some(false), _) => return self.not(b),
                (_, Some(false)) => return self.not(a),
                _ => {}
            }
            let x = self.xor(a, b);
            return self.not(x);
        }
        if let (Some(x), Some(y)) = (self.as_bv(a), self.as_bv(b)) {
            return self.bool(x == y);
        }
        if let Some(d) = self.linear_binop(&Op::Sub, a, b) {
            if d.terms.is_empty() {
                return self.bool(d.k == 0);
            }
        }
        let (na, nb) = (self.node(a).clone(), self.node(b).clone());
        // split equalities over concatenations
        if na.op == Op::Concat && (nb.op == Op::Concat || self.is_const(b)) {
            let lw = self.width(na.args[1]);
            let (bh, bl) = self.split(b, lw);
            let h = self.eq(na.args[0], bh);
            let l = self.eq(na.args[1], bl);
            return self.and(h, l);
        }
        if nb.op == Op::Concat && self.is_const(a) {
            return self.eq(b, a);
        }
        // push comparisons with constants through selections
        for (x, nx, k) in [(a, &na, b), (b, &nb, a)] {
            let _ = x;
            if nx.op == Op::Ite && self.is_const(k) {
                let (c, t, e) = (nx.args[0], nx.args[1], nx.args[2]);
                if self.is_const(t) || self.is_const(e) || self.node(t).op == Op::Ite || self.node(e).op == Op::Ite {
                    let et = self.eq(t, k);
                    let ee = self.eq(e, k);
                    return self.ite(c, et, ee);
                }
            }
        }
        self.intern(Op::Eq, vec![a, b], Sort::Bool)
    }

    fn split(&mut self, t: TermId, lw: u32) -> (TermId, TermId) {
        let w = self.width(t);
        let n = self.node(t).clone();
        if n.op == Op::Concat && self.width(n.args[1]) == lw {
            return (n.args[0], n.args[1]);
        }
        let h = self.extract(t, w - 1, lw);
        let l = self.extract(t, lw - 1, 0);
        (h, l)
    }

    fn bv_binop(&mut self, op: Op, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        debug_assert_eq!(w, self.width(b), "{op:?} width mismatch");
        let m = mask(w);
        if let (Some(x), Some(y)) = (self.as_bv(a), self.as_bv(b)) {
            let v = match op {
                Op::Add => x.wrapping_add(y),
                Op::Sub => x.wrapping_sub(y),
                Op::Mul => x.wrapping_mul(y),
                Op::BvAnd => x & y,
                Op::BvOr => x | y,
                Op::BvXor => x ^ y,
                Op::Shl => {
                    if y >= w as u64 {
                        0
                    } else {
                        x << y
                    }
                }
                Op::Lshr => {
                    if y >= w as u64 {
                        0
                    } else {
                        x >> y
                    }
                }
                Op::Ashr => {
                    let sh = y.min(w as u64 - 1) as u32;
                    (to_signed(x, w) >> sh) as u64
                }
                _ => unreachable!(),
            };
            return self.bv(w, v & m);
        }
        if let Some(lin) = self.linear_binop(&op, a, b) {
            return self.build_linear(lin, w);
        }
        let ca = self.as_bv(a);
        let cb = self.as_bv(b);
        match op {
            Op::Add => {
                if ca == Some(0) {
                    return b;
                }
                if cb == Some(0) {
                    return a;
                }
                // fold constant chains: (x + k1) + k2
                if let Some(k2) = cb {
                    let n = self.node(a).clone();
                    if n.op == Op::Add {
                        if let Some(k1) = self.as_bv(n.args[0]) {
                            let k = self.bv(w, k1.wrapping_add(k2));
                            return self.add(n.args[1], k);
                        }
                        if let Some(k1) = self.as_bv(n.args[1]) {
                            let k = self.bv(w, k1.wrapping_add(k2));
                            return self.add(n.args[0], k);
                        }
                    }
                }
                if ca.is_some() {
                    return self.bv_binop(Op::Add, b, a);
                }
            }
            Op::Sub => {
                if cb == Some(0) {
                    return a;
                }
                if a == b {
                    return self.bv(w, 0);
                }
                if let Some(k) = cb {
                    let nk = self.bv(w, k.wrapping_neg());
                    return self.add(a, nk);
                }
            }
            Op::Mul => {
                if ca == Some(0) || cb == Some(0) {
                    return self.bv(w, 0);
                }
                if ca == Some(1) {
                    return b;
                }
                if cb == Some(1) {
                    return a;
                }
            }
            Op::BvAnd => {
                if ca == Some(0) || cb == Some(0) {
                    return self.bv(w, 0);
                }
                if ca == Some(m) {
                    return b;
                }
                if cb == Some(m) || a == b {
                    return a;
                }
            }
            Op::BvOr => {
                if ca == Some(0) {
                    return b;
                }
                if cb == Some(0) || a == b {
                    return a;
                }
            }
            Op::BvXor => {
                if ca == Some(0) {
                    return b;
                }
                if cb == Some(0) {
                    return a;
                }
                if a == b {
                    return self.bv(w, 0);
                }
            }
            Op::Shl | Op::Lshr | Op::Ashr if cb == Some(0) => {
                return a;
            }
            _ => {}
        }
        self.intern(op, vec![a, b], Sort::Bv(w))
    }

    pub fn add(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::Add, a, b)
    }
    pub fn sub(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::Sub, a, b)
    }
    pub fn mul(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::Mul, a, b)
    }
    pub fn bvand(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::BvAnd, a, b)
    }
    pub fn bvor(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::BvOr, a, b)
    }
    pub fn bvxor(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::BvXor, a, b)
    }
    pub fn shl(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::Shl, a, b)
    }
    pub fn lshr(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::Lshr, a, b)
    }
    pub fn ashr(&mut self, a: TermId, b: TermId) -> TermId {
        self.bv_binop(Op::Ashr, a, b)
    }

    pub fn neg(&mut self, a: TermId) -> TermId {
        let w = self.width(a);
        if let Some(x) = self.as_bv(a) {
            return self.bv(w, x.wrapping_neg());
        }
        if let Some(lin) = self.linear(a, mask(w)) {
            return self.build_linear(lin, w);
        }
        let n = self.node(a);
        if n.op == Op::Neg {
            return n.args[0];
        }
        self.intern(Op::Neg, vec![a], Sort::Bv(w))
    }

    pub fn bvnot(&mut self, a: TermId) -> TermId {
        let w = self.width(a);
        if let Some(x) = self.as_bv(a) {
            return self.bv(w, !x);
        }
        let n = self.node(a);
        if n.op == Op::BvNot {
            return n.args[0];
        }
        self.intern(Op::BvNot, vec![a], Sort::Bv(w))
    }

    fn cmp(&mut self, op: Op, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        debug_assert_eq!(w, self.width(b), "{op:?} width mismatch");
        if let (Some(x), Some(y)) = (self.as_bv(a), self.as_bv(b)) {
            let (sx, sy) = (to_signed(x, w), to_signed(y, w));
            let r = match op {
                Op::Ult => x < y,
                Op::Ule => x <= y,
                Op::Slt => sx < sy,
                Op::Sle => sx <= sy,
                _ => unreachable!(),
            };
            return self.bool(r);
        }
        if a == b {
            return self.bool(matches!(op, Op::Ule | Op::Sle));
        }
        self.intern(op, vec![a, b], Sort::Bool)
    }

    pub fn ult(&mut self, a: TermId, b: TermId) -> TermId {
        self.cmp(Op::Ult, a, b)
    }
    pub fn ule(&mut self, a: TermId, b: TermId) -> TermId {
        self.cmp(Op::Ule, a, b)
    }
    pub fn slt(&mut self, a: TermId, b: TermId) -> TermId {
        self.cmp(Op::Slt, a, b)
    }
    pub fn sle(&mut self, a: TermId, b: TermId) -> TermId {
        self.cmp(Op::Sle, a, b)
    }

    pub fn extract(&mut self, a: TermId, hi: u32, lo: u32) -> TermId {
        let w = self.width(a);
        assert!(hi < w && lo <= hi, "bad extract [{hi}:{lo}] of width {w}");
        if lo == 0 && hi == w - 1 {
            return a;
        }
        let nw = hi - lo + 1;
        if let Some(x) = self.as_bv(a) {
            return self.bv(nw, x >> lo);
        }
        let n = self.node(a).clone();
        match n.op {
            Op::Concat => {
                let lw = self.width(n.args[1]);
                if hi < lw {
                    return self.extract(n.args[1], hi, lo);
                }
                if lo >= lw {
                    return self.extract(n.args[0], hi - lw, lo - lw);
                }
            }
            Op::Extract(_, l2) => return self.extract(n.args[0], hi + l2, lo + l2),
            Op::Ite => {
                let t = self.extract(n.args[1], hi, lo);
                let e = self.extract(n.args[2], hi, lo);
                return self.ite(n.args[0], t, e);
            }
            Op::ZeroExt(_) | Op::SignExt(_) => {
                let iw = self.width(n.args[0]);
                if hi < iw {
                    return self.extract(n.args[0], hi, lo);
                }
            }
            _ => {}
        }
        self.intern(Op::Extract(hi, lo), vec![a], Sort::Bv(nw))
    }

    pub fn zext(&mut self, a: TermId, by: u32) -> TermId {
        if by == 0 {
            return a;
        }
        let w = self.width(a);
        if let Some(x) = self.as_bv(a) {
            return self.bv(w + by, x);
        }
        self.intern(Op::ZeroExt(by), vec![a], Sort::Bv(w + by))
    }

    pub fn sext(&mut self, a: TermId, by: u32) -> TermId {
        if by == 0 {
            return a;
        }
        let w = self.width(a);
        if let Some(x) = self.as_bv(a) {
            return self.bv_signed(w + by, to_signed(x, w));
        }
        self.intern(Op::SignExt(by), vec![a], Sort::Bv(w + by))
    }

    /// Resize to `w` bits, sign-extending or truncating.
    pub fn resize_signed(&mut self, a: TermId, w: u32) -> TermId {
        let aw = self.width(a);
        if aw == w {
            a
        } else if aw < w {
            self.sext(a, w - aw)
        } else {
            self.extract(a, w - 1, 0)
        }
    }

    pub fn concat(&mut self, hi: TermId, lo: TermId) -> TermId {
        let (hw, lw) = (self.width(hi), self.width(lo));
        if let (Some(x), Some(y)) = (self.as_bv(hi), self.as_bv(lo)) {
            if hw + lw <= 64 {
                return self.bv(hw + lw, (x << lw) | y);
            }
        }
        self.intern(Op::Concat, vec![hi, lo], Sort::Bv(hw + lw))
    }

    /// Every variable reachable from `roots`, in id order.
    pub fn vars_of(&self, roots: &[TermId]) -> Vec<TermId> {
        self.cone(roots).into_iter().filter(|t| matches!(self.node(*t).op, Op::Var(_))).collect()
    }

    /// All terms reachable from `roots`, sorted by id (children before parents).
    pub fn cone(&self, roots: &[TermId]) -> Vec<TermId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<TermId> = roots.to_vec();
        let mut out = Vec::new();
        while let Some(t) = stack.pop() {
            if seen[t.index()] {
                continue;
            }
            seen[t.index()] = true;
            out.push(t);
            stack.extend(self.node(t).args.iter().copied());
        }
        out.sort();
        out
    }

    /// Evaluate terms under an assignment; unknown variables read as zero.
    pub fn eval_many(&self, roots: &[TermId], env: &dyn Fn(&str) -> Option<u64>) -> HashMap<TermId, u64> {
        let mut val = HashMap::new();
        self.eval_cached(roots, env, &mut val);
        val
    }

    /// Like [`TermStore::eval_many`], reusing and extending `val`.
    pub fn eval_cached(&self, roots: &[TermId], env: &dyn Fn(&str) -> Option<u64>, val: &mut HashMap<TermId, u64>) {
        let mut todo = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack: Vec<TermId> = roots.to_vec();
        while let Some(t) = stack.pop() {
            if val.contains_key(&t) || !seen.insert(t) {
                continue;
            }
            todo.push(t);
            stack.extend(self.node(t).args.iter().copied());
        }
        todo.sort();
        for t in todo {
            let n = self.node(t);
            let a = |i: usize| val[&n.args[i]];
            let w = n.sort.width();
            let aw = |i: usize| self.width(n.args[i]);
            let v = match &n.op {
                Op::BoolConst(b) => *b as u64,
                Op::BvConst(v) => *v,
                Op::Var(name) => env(name).unwrap_or(0) & mask(w),
                Op::Not => 1 - a(0),
                Op::And => a(0) & a(1),
                Op::Or => a(0) | a(1),
                Op::Xor => a(0) ^ a(1),
                Op::Ite => {
                    if a(0) == 1 {
                        a(1)
                    } else {
                        a(2)
                    }
                }
                Op::Eq => (a(0) == a(1)) as u64,
                Op::Neg => a(0).wrapping_neg() & mask(w),
                Op::BvNot => !a(0) & mask(w),
                Op::Add => a(0).wrapping_add(a(1)) & mask(w),
                Op::Sub => a(0).wrapping_sub(a(1)) & mask(w),
                Op::Mul => a(0).wrapping_mul(a(1)) & mask(w),
                Op::BvAnd => a(0) & a(1),
                Op::BvOr => a(0) | a(1),
                Op::BvXor => a(0) ^ a(1),
                Op::Shl => {
                    if a(1) >= w as u64 {
                        0
                    } else {
                        (a(0) << a(1)) & mask(w)
                    }
                }
                Op::Lshr => {
                    if a(1) >= w as u64 {
                        0
                    } else {
                        a(0) >> a(1)
                    }
                }
                Op::Ashr => {
                    let s = to_signed(a(0), w);
                    let sh = a(1).min(w as u64 - 1) as u32;
                    (s >> sh) as u64 & mask(w)
                }
                Op::Ult => (a(0) < a(1)) as u64,
                Op::Ule => (a(0) <= a(1)) as u64,
                Op::Slt => (to_signed(a(0), aw(0)) < to_signed(a(1), aw(1))) as u64,
                Op::Sle => (to_signed(a(0), aw(0)) <= to_signed(a(1), aw(1))) as u64,
                Op::Extract(_, lo) => (a(0) >> lo) & mask(w),
                Op::ZeroExt(_) => a(0),
                Op::SignExt(_) => to_signed(a(0), aw(0)) as u64 & mask(w),
                Op::Concat => ((a(0) << aw(1)) | a(1)) & mask(w),
            };
            val.insert(t, v);
        }
    }

    pub fn eval(&self, t: TermId, env: &dyn Fn(&str) -> Option<u64>) -> u64 {
        self.eval_many(&[t], env)[&t]
    }

    /// Render as an SMT-LIB s-expression (shared subterms are repeated).
    pub fn render(&self, t: TermId) -> String {
        let mut s = String::new();
        self.render_into(t, &mut s, 0);
        s
    }

    fn render_into(&self, t: TermId, out: &mut String, depth: usize) {
        let n = self.node(t);
        if depth > 64 || out.len() > 4096 {
            let _ = write!(out, "#{}", t.0);
            return;
        }
        let name = match &n.op {
            Op::BoolConst(b) => {
                out.push_str(if *b { "true" } else { "false" });
                return;
            }
            Op::BvConst(v) => {
                let _ = write!(out, "(_ bv{} {})", v, n.sort.width());
                return;
            }
            Op::Var(v) => {
                out.push_str(&quote_symbol(v));
                return;
            }
            op => op_symbol(op),
        };
        out.push('(');
        out.push_str(&name);
        for a in n.args.iter() {
            out.push(' ');
            self.render_into(*a, out, depth + 1);
        }
        out.push(')');
    }
}

/// Quote an SMT-LIB symbol when it is not a simple symbol.
pub fn quote_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        let cleaned: String = name.chars().map(|c| if c == '|' || c == '\\' { '_' } else { c }).collect();
        format!("|{cleaned}|")
    }
}

/// SMT-LIB spelling of an operator with arguments.
pub fn op_symbol(op: &Op) -> String {
    match op {
        Op::BoolConst(_) | Op::BvConst(_) | Op::Var(_) => String::new(),
        Op::Not => "not".into(),
        Op::And => "and".into(),
        Op::Or => "or".into(),
        Op::Xor => "xor".into(),
        Op::Ite => "ite".into(),
        Op::Eq => "=".into(),
        Op::Neg => "bvneg".into(),
        Op::BvNot => "bvnot".into(),
        Op::Add => "bvadd".into(),
        Op::Sub => "bvsub".into(),
        Op::Mul => "bvmul".into(),
        Op::BvAnd => "bvand".into(),
        Op::BvOr => "bvor".into(),
        Op::BvXor => "bvxor".into(),
        Op::Shl => "bvshl".into(),
        Op::Lshr => "bvlshr".into(),
        Op::Ashr => "bvashr".into(),
        Op::Ult => "bvult".into(),
        Op::Ule => "bvule".into(),
        Op::Slt => "bvslt".into(),
        Op::Sle => "bvsle".into(),
        Op::Extract(h, l) => format!("(_ extract {h} {l})"),
        Op::ZeroExt(k) => format!("(_ zero_extend {k})"),
        Op::SignExt(k) => format!("(_ sign_extend {k})"),
        Op::Concat => "concat".into(),
    }
}
