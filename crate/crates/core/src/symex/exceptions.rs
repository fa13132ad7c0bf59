//! Static matching of thrown types against handlers.

use crate::frontend::{TypeRepr, TypeTag};
use crate::layout::Layouts;

/// How a caught value is obtained from the exception object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Adjust {
    /// Copy or address the object at this cell offset (class handlers).
    Object(usize),
    /// Read the thrown pointer and move it by this many cells when non-null.
    Pointer(i64),
    /// Take the address of the thrown array's first element.
    Decay,
    /// Nothing to bind.
    None,
}

fn strip_ref(t: &TypeRepr) -> &TypeRepr {
    match t {
        TypeRepr::LRef(x) | TypeRepr::RRef(x) => x,
        x => x,
    }
}

/// `from` pointee converts to `to` pointee by adding cv-qualifiers only.
fn qualification_convertible(from: &TypeRepr, to: &TypeRepr) -> bool {
    if !from.cv().is_subset_of(to.cv()) {
        return false;
    }
    match (from.strip_cv(), to.strip_cv()) {
        (TypeRepr::Pointer(a), TypeRepr::Pointer(b)) => {
            // deeper levels may only gain qualifiers when every level above is const
            (a.strip_cv() == b.strip_cv() && a.cv() == b.cv()) || (to.is_const() && qualification_convertible(a, b))
        }
        (a, b) => a == b,
    }
}

fn same_function(a: &crate::frontend::types::FunctionType, b: &crate::frontend::types::FunctionType) -> bool {
    a.ret == b.ret && a.params == b.params
}

/// Decide whether one handler accepts a thrown type, and how to bind it.
pub fn handler_accepts(thrown: &TypeRepr, handler: Option<&TypeRepr>, layouts: &Layouts) -> Option<Adjust> {
    let Some(h) = handler else {
        return Some(Adjust::None);
    };
    let h = strip_ref(h);
    let t = thrown.strip_cv();
    let hv = h.strip_cv();
    // same type up to cv
    if TypeTag::of(t) == TypeTag::of(hv) {
        return Some(match t {
            TypeRepr::Class(_) => Adjust::Object(0),
            TypeRepr::Pointer(_) => Adjust::Pointer(0),
            _ => Adjust::Object(0),
        });
    }
    match (t, hv) {
        (TypeRepr::Array(e, _), TypeRepr::Pointer(p)) if e.strip_cv() == p.strip_cv() && e.cv().is_subset_of(p.cv()) => Some(Adjust::Decay),
        (TypeRepr::Function(f), TypeRepr::Pointer(p)) => match p.strip_cv() {
            TypeRepr::Function(g) if same_function(f, g) => Some(Adjust::Pointer(0)),
            _ => None,
        },
        (TypeRepr::Class(d), TypeRepr::Class(b)) => layouts.find_base_offset(d, b).map(Adjust::Object),
        (TypeRepr::Pointer(from), TypeRepr::Pointer(to)) => {
            if qualification_convertible(from, to) {
                return Some(Adjust::Pointer(0));
            }
            if let (TypeRepr::Class(d), TypeRepr::Class(b)) = (from.strip_cv(), to.strip_cv()) {
                if from.cv().is_subset_of(to.cv()) {
                    if let Some(off) = layouts.find_base_offset(d, b) {
                        return Some(Adjust::Pointer(off as i64));
                    }
                }
            }
            if to.strip_cv().is_void() && from.cv().is_subset_of(to.cv()) {
                return Some(Adjust::Pointer(0));
            }
            None
        }
        (TypeRepr::NullPtr, TypeRepr::Pointer(_)) => Some(Adjust::Pointer(0)),
        _ => None,
    }
}

/// Index of the first handler, in source order, that accepts `thrown`.
pub fn match_exception(thrown: &TypeRepr, handlers: &[Option<TypeRepr>], layouts: &Layouts) -> Option<usize> {
    handlers.iter().position(|h| handler_accepts(thrown, h.as_ref(), layouts).is_some())
}

/// Whether a dynamic exception specification admits `thrown`.
pub fn spec_allows(spec: &crate::frontend::ThrowSpec, thrown: &TypeRepr, layouts: &Layouts) -> bool {
    use crate::frontend::ThrowSpec;
    match spec {
        ThrowSpec::Unspecified => true,
        ThrowSpec::Noexcept => false,
        ThrowSpec::Dynamic(list) => list.iter().any(|h| handler_accepts(thrown, Some(h), layouts).is_some()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::types::Cv;

    fn ptr(t: TypeRepr) -> TypeRepr {
        TypeRepr::pointer(t)
    }

    fn cnst(t: TypeRepr) -> TypeRepr {
        TypeRepr::qualified(Cv::CONST, t)
    }

    fn int() -> TypeRepr {
        TypeRepr::Int(32)
    }

    #[test]
    fn ellipsis_catches_anything() {
        let l = Layouts::default();
        assert_eq!(match_exception(&int(), &[None], &l), Some(0));
        assert_eq!(match_exception(&ptr(TypeRepr::Char), &[Some(TypeRepr::Bool), None], &l), Some(1));
    }

    #[test]
    fn qualification_table_over_four_pointer_types() {
        let l = Layouts::default();
        let types = [ptr(int()), ptr(cnst(int())), ptr(TypeRepr::Void), ptr(TypeRepr::Char)];
        // rows: thrown, columns: handler. Hand-built from ISO handler matching.
        let expected = [[true, true, true, false], [false, true, false, false], [false, false, true, false], [false, false, true, true]];
        for (i, t) in types.iter().enumerate() {
            for (j, h) in types.iter().enumerate() {
                let got = match_exception(t, &[Some(h.clone())], &l).is_some();
                assert_eq!(got, expected[i][j], "thrown {} handler {}", t.source_name(), h.source_name());
            }
        }
    }

    #[test]
    fn arithmetic_conversions_do_not_catch() {
        let l = Layouts::default();
        assert_eq!(match_exception(&int(), &[Some(TypeRepr::Float("double".into()))], &l), None);
        assert_eq!(match_exception(&TypeRepr::Char, &[Some(int())], &l), None);
    }

    #[test]
    fn cv_is_ignored_for_values_and_references() {
        let l = Layouts::default();
        let h = TypeRepr::lvalue_ref(cnst(int())).unwrap();
        assert_eq!(match_exception(&int(), &[Some(h)], &l), Some(0));
    }

    #[test]
    fn arrays_are_caught_by_element_pointers() {
        let l = Layouts::default();
        let arr = TypeRepr::Array(Box::new(int()), Some(3));
        assert_eq!(handler_accepts(&arr, Some(&ptr(int())), &l), Some(Adjust::Decay));
        assert_eq!(handler_accepts(&arr, Some(&ptr(TypeRepr::Char)), &l), None);
    }
}
