//! Object models: cell layout, vptrs, vtables and thunks.
//!
//! Objects are flat sequences of scalar cells. A class starts with its own
//! vptr when it introduces virtual methods without inheriting any, then holds
//! its base subobjects in declaration order, then its fields. A class with
//! no cells at all gets one padding cell so distinct objects stay distinct.

use std::collections::HashMap;
use std::fmt::{self, Write};

use crate::frontend::ast::FunctionKind;
use crate::frontend::typed::{FuncId, MethodInfo, TypedProgram};
use crate::frontend::TypeRepr;

/// Kind of one flattened storage cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scalar {
    Bool,
    /// Two's-complement integer (`char` is 8 bits).
    Bits(u32),
    Ptr,
    /// Vtable identifier.
    Vptr,
    /// Values of a floating type: copied around, never computed with.
    Opaque(u32),
    /// Filler for empty classes.
    Pad,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelMember {
    Vptr { offset: usize },
    Base { class: String, offset: usize },
    Field { name: String, ty: TypeRepr, offset: usize },
    Pad { offset: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectModel {
    pub class: String,
    pub members: Vec<ModelMember>,
    /// Size in cells.
    pub size: usize,
    /// Offsets of every vptr in a complete object of this class.
    pub vptrs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThunkRef {
    /// `thunk::Penguin::doit(Bird*)`
    pub name: String,
    /// Class whose pointer the thunk receives.
    pub receiver: String,
    /// The overriding method the thunk forwards to.
    pub target: FuncId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotTarget {
    Direct(FuncId),
    /// Index into [`Layouts::thunks`].
    Thunk(usize),
    /// The final overrider is pure virtual.
    Pure(FuncId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VTableSlot {
    /// Method name as written (`doit`, `~Bird`).
    pub name: String,
    /// Class that introduced this slot; receivers arrive as pointers to it.
    pub introduced_by: String,
    pub target: SlotTarget,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VTable {
    pub id: u32,
    pub owner: String,
    /// The subobject class whose primary vptr points here.
    pub view: String,
    /// Cell offset of that vptr inside an `owner` object.
    pub vptr_offset: usize,
    pub slots: Vec<VTableSlot>,
}

/// A virtual call's dispatch: read the vptr at `vptr_offset` from the
/// receiver and call the target registered for its value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DispatchPlan {
    pub slot: usize,
    /// Offset of the receiver class's primary vptr within the receiver.
    pub vptr_offset: usize,
    pub targets: Vec<(u32, SlotTarget)>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("no vtable slot for '{method}' in class '{class}'")]
pub struct LayoutError {
    pub class: String,
    pub method: String,
}

#[derive(Clone, Debug, Default)]
pub struct Layouts {
    pub models: Vec<ObjectModel>,
    pub vtables: Vec<VTable>,
    pub thunks: Vec<ThunkRef>,
    model_idx: HashMap<String, usize>,
    /// Slots of each polymorphic class's primary table: (key, name, introducer).
    primary_slots: HashMap<String, Vec<(String, String, String)>>,
    primary_base: HashMap<String, Option<String>>,
    int_width: u32,
}

/// Identifies a virtual method across overrides.
fn slot_key(m: &MethodInfo) -> String {
    match m.kind {
        FunctionKind::Destructor => "~".to_string(),
        _ => {
            let ps: Vec<String> = m.sig.params.iter().map(|p| p.source_name()).collect();
            format!("{}({}){}", m.name, ps.join(","), if m.is_const { " const" } else { "" })
        }
    }
}

/// Builds object models and vtables for every class.
pub fn build_object_models(tp: &TypedProgram) -> Layouts {
    let mut l = Layouts { int_width: tp.int_width, ..Layouts::default() };
    // classes are stored bases-first
    for c in &tp.classes {
        let pb = c.bases.iter().find(|b| tp.class(b).is_some_and(|b| b.polymorphic)).cloned();
        l.primary_base.insert(c.name.clone(), pb.clone());
        let mut members = Vec::new();
        let mut off = 0;
        let mut vptrs = Vec::new();
        if c.polymorphic && pb.is_none() {
            members.push(ModelMember::Vptr { offset: 0 });
            vptrs.push(0);
            off = 1;
        }
        for b in &c.bases {
            let bm = &l.models[l.model_idx[b]];
            vptrs.extend(bm.vptrs.iter().map(|v| v + off));
            members.push(ModelMember::Base { class: b.clone(), offset: off });
            off += bm.size;
        }
        for f in &c.fields {
            members.push(ModelMember::Field { name: f.name.clone(), ty: f.ty.clone(), offset: off });
            off += l.size_of(&f.ty);
        }
        if off == 0 {
            members.push(ModelMember::Pad { offset: 0 });
            off = 1;
        }
        l.model_idx.insert(c.name.clone(), l.models.len());
        l.models.push(ObjectModel { class: c.name.clone(), members, size: off, vptrs });
        if c.polymorphic {
            let mut slots = match &pb {
                Some(b) => l.primary_slots[b].clone(),
                None => Vec::new(),
            };
            for m in &c.methods {
                let mi = tp.func(*m);
                if mi.is_virtual {
                    let k = slot_key(mi);
                    if !slots.iter().any(|s| s.0 == k) {
                        slots.push((k, mi.name.clone(), c.name.clone()));
                    }
                }
            }
            l.primary_slots.insert(c.name.clone(), slots);
        }
    }
    let mut next_id = 1;
    let mut thunk_idx: HashMap<String, usize> = HashMap::new();
    for c in &tp.classes {
        if !c.polymorphic {
            continue;
        }
        for (view, path) in l.views(tp, &c.name) {
            let base_off = l.path_offset(tp, &path);
            let vptr_offset = base_off + l.primary_vptr_offset(&view);
            let mut slots = Vec::new();
            for (key, name, intro) in &l.primary_slots[&view] {
                let mut full = path.clone();
                full.extend(tp.base_path(&view, intro).expect("introducer on primary chain").into_iter().skip(1));
                let over = full
                    .iter()
                    .find_map(|cls| {
                        tp.class(cls)?.methods.iter().copied().find(|m| {
                            let mi = tp.func(*m);
                            mi.is_virtual && slot_key(mi) == *key
                        })
                    })
                    .expect("slot has an overrider");
                let om = tp.func(over);
                let target = if om.is_pure {
                    SlotTarget::Pure(over)
                } else if om.class.as_deref() == Some(intro.as_str()) {
                    SlotTarget::Direct(over)
                } else {
                    let oc = om.class.clone().expect("method has a class");
                    let tname = format!("thunk::{oc}::{}({intro}*)", om.name);
                    let idx = *thunk_idx.entry(tname.clone()).or_insert_with(|| {
                        l.thunks.push(ThunkRef { name: tname, receiver: intro.clone(), target: over });
                        l.thunks.len() - 1
                    });
                    SlotTarget::Thunk(idx)
                };
                slots.push(VTableSlot { name: name.clone(), introduced_by: intro.clone(), target });
            }
            l.vtables.push(VTable { id: next_id, owner: c.name.clone(), view, vptr_offset, slots });
            next_id += 1;
        }
    }
    l
}

impl Layouts {
    pub fn model(&self, class: &str) -> Option<&ObjectModel> {
        self.model_idx.get(class).map(|i| &self.models[*i])
    }

    pub fn int_width(&self) -> u32 {
        self.int_width
    }

    /// Size of a value of type `ty` in cells.
    pub fn size_of(&self, ty: &TypeRepr) -> usize {
        match ty.strip_cv() {
            TypeRepr::Class(c) => self.models[self.model_idx[c]].size,
            TypeRepr::Array(e, n) => self.size_of(e) * n.unwrap_or(0) as usize,
            _ => 1,
        }
    }

    /// Kinds of the cells of a value of type `ty`, in order.
    pub fn cells(&self, ty: &TypeRepr) -> Vec<Scalar> {
        let mut out = Vec::new();
        self.push_cells(ty, &mut out);
        out
    }

    fn push_cells(&self, ty: &TypeRepr, out: &mut Vec<Scalar>) {
        match ty.strip_cv() {
            TypeRepr::Bool => out.push(Scalar::Bool),
            TypeRepr::Char => out.push(Scalar::Bits(8)),
            TypeRepr::Int(w) => out.push(Scalar::Bits(*w)),
            TypeRepr::Float(n) => out.push(Scalar::Opaque(if n == "float" { 32 } else { 64 })),
            TypeRepr::Pointer(_) | TypeRepr::NullPtr | TypeRepr::LRef(_) | TypeRepr::RRef(_) | TypeRepr::Function(_) => out.push(Scalar::Ptr),
            TypeRepr::Array(e, n) => {
                for _ in 0..n.unwrap_or(0) {
                    self.push_cells(e, out);
                }
            }
            TypeRepr::Class(c) => {
                let m = &self.models[self.model_idx[c]];
                for mem in &m.members {
                    match mem {
                        ModelMember::Vptr { .. } => out.push(Scalar::Vptr),
                        ModelMember::Pad { .. } => out.push(Scalar::Pad),
                        ModelMember::Base { class, .. } => self.push_cells(&TypeRepr::Class(class.clone()), out),
                        ModelMember::Field { ty, .. } => self.push_cells(ty, out),
                    }
                }
            }
            TypeRepr::Void | TypeRepr::Qualified(..) => {}
        }
    }

    pub fn field_offset(&self, class: &str, field: &str) -> usize {
        self.model(class)
            .and_then(|m| {
                m.members.iter().find_map(|x| match x {
                    ModelMember::Field { name, offset, .. } if name == field => Some(*offset),
                    _ => None,
                })
            })
            .unwrap_or_else(|| panic!("no field '{field}' in '{class}'"))
    }

    pub fn base_offset(&self, class: &str, base: &str) -> usize {
        self.model(class)
            .and_then(|m| {
                m.members.iter().find_map(|x| match x {
                    ModelMember::Base { class, offset } if class == base => Some(*offset),
                    _ => None,
                })
            })
            .unwrap_or_else(|| panic!("'{base}' is not a direct base of '{class}'"))
    }

    /// Offset of the last class of `path` inside the first (derived first).
    pub fn path_offset(&self, _tp: &TypedProgram, path: &[String]) -> usize {
        path.windows(2).map(|w| self.base_offset(&w[0], &w[1])).sum()
    }

    /// Offset of the `base` subobject inside a `derived` object, searching
    /// bases transitively. `Some(0)` when the classes are equal.
    pub fn find_base_offset(&self, derived: &str, base: &str) -> Option<usize> {
        if derived == base {
            return Some(0);
        }
        self.model(derived)?.members.iter().find_map(|m| match m {
            ModelMember::Base { class, offset } => self.find_base_offset(class, base).map(|k| offset + k),
            _ => None,
        })
    }

    /// Offset of the vptr shared by `class` and its primary bases.
    pub fn primary_vptr_offset(&self, class: &str) -> usize {
        let mut off = 0;
        let mut cur = class.to_string();
        while let Some(Some(b)) = self.primary_base.get(&cur) {
            off += self.base_offset(&cur, b);
            cur = b.clone();
        }
        off
    }

    /// `class` followed by its primary base, its primary base, and so on.
    pub fn primary_chain(&self, class: &str) -> Vec<String> {
        let mut out = vec![class.to_string()];
        while let Some(Some(b)) = self.primary_base.get(out.last().expect("nonempty")) {
            out.push(b.clone());
        }
        out
    }

    /// Polymorphic subobject views of `class`: each view class with its path
    /// from `class` (derived first). One per vptr.
    fn views(&self, tp: &TypedProgram, class: &str) -> Vec<(String, Vec<String>)> {
        let mut out = vec![(class.to_string(), vec![class.to_string()])];
        let pb = self.primary_base.get(class).cloned().flatten();
        for b in &tp.class(class).expect("class").bases {
            if !tp.class(b).is_some_and(|c| c.polymorphic) {
                continue;
            }
            for (i, (v, p)) in self.views(tp, b).into_iter().enumerate() {
                if i == 0 && Some(b) == pb.as_ref() {
                    continue;
                }
                let mut path = vec![class.to_string()];
                path.extend(p);
                out.push((v, path));
            }
        }
        out
    }

    pub fn vtables_of<'a>(&'a self, owner: &'a str) -> impl Iterator<Item = &'a VTable> + 'a {
        self.vtables.iter().filter(move |t| t.owner == owner)
    }

    /// Dispatch through the receiver's primary vptr for a virtual method
    /// declared in (or inherited along the primary chain of) `class`.
    pub fn resolve_virtual_call(&self, tp: &TypedProgram, class: &str, method: FuncId) -> Result<DispatchPlan, LayoutError> {
        let err = || LayoutError { class: class.to_string(), method: tp.func(method).name.clone() };
        let key = slot_key(tp.func(method));
        let slots = self.primary_slots.get(class).ok_or_else(err)?;
        let slot = slots.iter().position(|s| s.0 == key).ok_or_else(err)?;
        let targets =
            self.vtables.iter().filter(|t| self.primary_chain(&t.view).iter().any(|c| c == class)).map(|t| (t.id, t.slots[slot].target.clone())).collect();
        Ok(DispatchPlan { slot, vptr_offset: self.primary_vptr_offset(class), targets })
    }

    /// Stable text rendering for `--show-layout`.
    pub fn render(&self, tp: &TypedProgram) -> String {
        let mut s = String::new();
        for m in &self.models {
            let _ = writeln!(s, "class {} ({} cell{}, {} vptr{})", m.class, m.size, plural(m.size), m.vptrs.len(), plural(m.vptrs.len()));
            for mem in &m.members {
                let _ = match mem {
                    ModelMember::Vptr { offset } => writeln!(s, "  @{offset} vptr"),
                    ModelMember::Pad { offset } => writeln!(s, "  @{offset} padding"),
                    ModelMember::Base { class, offset } => writeln!(s, "  @{offset} base {class}"),
                    ModelMember::Field { name, ty, offset } => writeln!(s, "  @{offset} {} {name}", ty.goto_name()),
                };
            }
        }
        for t in &self.vtables {
            let _ = writeln!(s, "vtable {} {} (view {}, vptr @{})", t.id, t.owner, t.view, t.vptr_offset);
            for (i, slot) in t.slots.iter().enumerate() {
                let _ = writeln!(s, "  [{i}] {} -> {}", slot.name, self.target_name(tp, &slot.target));
            }
        }
        s
    }

    pub fn target_name(&self, tp: &TypedProgram, t: &SlotTarget) -> String {
        match t {
            SlotTarget::Direct(f) => tp.func(*f).id.clone(),
            SlotTarget::Thunk(i) => self.thunks[*i].name.clone(),
            SlotTarget::Pure(f) => format!("pure {}", tp.func(*f).id),
        }
    }
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool => f.write_str("bool"),
            Scalar::Bits(w) => write!(f, "bv{w}"),
            Scalar::Ptr => f.write_str("ptr"),
            Scalar::Vptr => f.write_str("vptr"),
            Scalar::Opaque(w) => write!(f, "opaque{w}"),
            Scalar::Pad => f.write_str("pad"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::frontend::typecheck::typecheck;
    use crate::templates::{monomorphize, DEFAULT_MAX_DEPTH};

    fn program(src: &str) -> TypedProgram {
        let tu = parse_source(src, "t.cpp").unwrap();
        let m = monomorphize(&tu, DEFAULT_MAX_DEPTH).unwrap();
        typecheck(&m.unit, 32, &m.instances).unwrap()
    }

    const POLYMORPHISM: &str = "class Bird { public: virtual int doit(void) { return 21; } };
        class Penguin: public Bird { public: int doit(void) override { return 42; } };
        int main() { Bird *p = new Penguin(); assert(p->doit() == 42); delete p; return 0; }";

    #[test]
    fn bird_and_penguin_tables() {
        let tp = program(POLYMORPHISM);
        let l = build_object_models(&tp);
        assert_eq!(l.model("Bird").unwrap().vptrs, vec![0]);
        assert_eq!(l.model("Penguin").unwrap().vptrs, vec![0]);
        let bird: Vec<_> = l.vtables_of("Bird").collect();
        assert_eq!(bird.len(), 1);
        assert_eq!(l.target_name(&tp, &bird[0].slots[0].target), "Bird::doit(Bird*)");
        let peng: Vec<_> = l.vtables_of("Penguin").collect();
        assert_eq!(peng.len(), 1);
        assert_eq!(l.target_name(&tp, &peng[0].slots[0].target), "thunk::Penguin::doit(Bird*)");
        assert_eq!(l.thunks.len(), 1);
    }

    #[test]
    fn dispatch_through_base_reaches_override() {
        let tp = program(POLYMORPHISM);
        let l = build_object_models(&tp);
        let doit = tp.functions.iter().position(|f| f.id == "Bird::doit(Bird*)").unwrap();
        let plan = l.resolve_virtual_call(&tp, "Bird", FuncId(doit)).unwrap();
        assert_eq!(plan.slot, 0);
        let names: Vec<_> = plan.targets.iter().map(|(id, t)| (*id, l.target_name(&tp, t))).collect();
        assert_eq!(names, vec![(1, "Bird::doit(Bird*)".to_string()), (2, "thunk::Penguin::doit(Bird*)".to_string())]);
    }

    #[test]
    fn plain_class_has_no_vptr() {
        let tp = program("struct P { int x; char c; }; int main() { return 0; }");
        let l = build_object_models(&tp);
        let m = l.model("P").unwrap();
        assert!(m.vptrs.is_empty());
        assert_eq!(m.size, 2);
        assert!(l.vtables.is_empty());
        assert_eq!(l.cells(&TypeRepr::Class("P".into())), vec![Scalar::Bits(32), Scalar::Bits(8)]);
    }

    #[test]
    fn two_polymorphic_bases_give_two_vptrs() {
        let tp = program(
            "struct A { int a; virtual int f() { return 1; } };
             struct B { int b; virtual int g() { return 2; } };
             struct C : A, B { int c; int g() override { return 3; } };
             int main() { return 0; }",
        );
        let l = build_object_models(&tp);
        let c = l.model("C").unwrap();
        assert_eq!(c.vptrs, vec![0, 2]);
        let tabs: Vec<_> = l.vtables_of("C").collect();
        assert_eq!(tabs.len(), 2);
        assert_eq!(tabs[1].view, "B");
        assert_eq!(tabs[1].vptr_offset, 2);
        assert_eq!(l.target_name(&tp, &tabs[1].slots[0].target), "thunk::C::g(B*)");
        // C's primary table: A's slots then C's new virtual g
        assert_eq!(tabs[0].slots.len(), 2);
        assert_eq!(l.target_name(&tp, &tabs[0].slots[1].target), "C::g(C*)");
        assert_eq!(l.field_offset("C", "c"), 4);
    }

    #[test]
    fn derived_tables_keep_base_slots() {
        let tp = program(
            "struct A { virtual int f() { return 1; } virtual int h() { return 0; } };
             struct B : A { virtual int g() { return 2; } int f() override { return 5; } };
             struct C : B { int h() override { return 9; } };
             int main() { return 0; }",
        );
        let l = build_object_models(&tp);
        for t in &l.vtables {
            for base in tp.all_bases(&t.owner) {
                for bt in l.vtables_of(&base).filter(|bt| l.primary_chain(&t.view).contains(&bt.view)) {
                    assert!(t.slots.len() >= bt.slots.len(), "{} vs {}", t.owner, base);
                    for (x, y) in t.slots.iter().zip(&bt.slots) {
                        assert_eq!(x.name, y.name);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_class_is_padded() {
        let tp = program("struct Base {}; struct Derived : Base {}; int main() { return 0; }");
        let l = build_object_models(&tp);
        assert_eq!(l.model("Base").unwrap().size, 1);
        assert_eq!(l.model("Derived").unwrap().size, 1);
    }
}
