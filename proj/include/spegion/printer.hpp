#pragma once

// Pretty-printers for terms, values, types, sizes and effects. Term printing
// round-trips through the parser; effect printing uses the calculus notation
// with region names normalized to r1, r2, ... in order of first appearance.

#include <map>
#include <sstream>
#include <string>

#include "spegion/effect_algebra.hpp"
#include "spegion/syntax.hpp"

namespace spegion {

// ---------------------------------------------------------------------------
// Sizes and surface annotations
// ---------------------------------------------------------------------------

inline std::string print_size(const Size &s) { return s.str(); }

inline std::string print_surface_region(const SurfaceRegion &r) {
    switch (r.kind) {
        case SurfaceRegion::Kind::Glob: return "glob";
        case SurfaceRegion::Kind::Ident: return r.name;
        case SurfaceRegion::Kind::RegionOf: return "regionOf(" + r.name + ")";
    }
    return "?";
}

inline std::string print_surface_type(const SurfaceTypeRef &t) {
    switch (t->kind) {
        case SurfaceType::Kind::Int: return "Int";
        case SurfaceType::Kind::Unit: return "Unit";
        case SurfaceType::Kind::Bool: return "Bool";
        case SurfaceType::Kind::Ref: return "Ref " + print_surface_type(t->pointee);
        case SurfaceType::Kind::Var: return t->name;
    }
    return "?";
}

inline std::string print_surface_annot(const SurfaceTypeWithPlace &a) {
    return "(" + print_surface_type(a.ty) + ", " + print_surface_region(a.place) + ")";
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

namespace detail {

// Precedence levels, loosest to tightest:
//   1 seq; 2 let/if/fun bodies; 3 assign; 4 comparison; 5 additive;
//   6 allocation / copy; 7 prefix (! ref freergn split); 8 application; 9 atoms
inline std::string print_term_prec(const TermRef &e, int min_level);

inline std::string print_value_inner(const Value &v) {
    struct V {
        std::string operator()(const IntV &n) const { return std::to_string(n.n); }
        std::string operator()(const TrueV &) const { return "true"; }
        std::string operator()(const FalseV &) const { return "false"; }
        std::string operator()(const UnitV &) const { return "()"; }
        std::string operator()(const LamV &n) const {
            std::string head = "fun " + n.var;
            if (n.ann) head += " : " + print_surface_annot(*n.ann);
            return head + " -> " + print_term_prec(n.body, 2);
        }
        std::string operator()(const BigLamV &n) const {
            return "Fun {" + n.tyvar + ", " + n.regionvar + ", " + n.effvar + "} " + n.var +
                   " -> " + print_term_prec(n.body, 2);
        }
        std::string operator()(const LocV &n) const {
            if (n.loc == Location::global_unit()) return "glob";
            return "<" + n.loc.str() + ">";
        }
    };
    return std::visit(V{}, v.node);
}

inline bool value_needs_parens(const Value &v) {
    return std::holds_alternative<LamV>(v.node) || std::holds_alternative<BigLamV>(v.node);
}

inline std::string wrap(bool cond, const std::string &s) { return cond ? "(" + s + ")" : s; }

inline std::string print_term_prec(const TermRef &e, int min_level) {
    struct V {
        int min;
        std::string operator()(const VarT &n) const { return n.name; }
        std::string operator()(const LocT &n) const {
            if (n.loc == Location::global_unit()) return "glob";
            return "<" + n.loc.str() + ">";
        }
        std::string operator()(const AllocT &n) const {
            std::string v = wrap(value_needs_parens(n.value), print_value_inner(n.value));
            std::string s = v + " [" + print_size(n.size) + "] at " + print_term_prec(n.into, 8);
            return wrap(min > 6, s);
        }
        std::string operator()(const AppT &n) const {
            std::string s = print_term_prec(n.fn, 8) + " " + print_term_prec(n.arg, 9);
            return wrap(min > 8, s);
        }
        std::string operator()(const RefMkT &n) const {
            std::string s = "ref " + print_term_prec(n.init, 9);
            return wrap(min > 7, s);
        }
        std::string operator()(const DerefT &n) const {
            std::string s = "!" + print_term_prec(n.ref, 9);
            return wrap(min > 7, s);
        }
        std::string operator()(const AssignT &n) const {
            std::string s = print_term_prec(n.target, 4) + " := " + print_term_prec(n.value, 4);
            return wrap(min > 3, s);
        }
        std::string operator()(const SeqT &n) const {
            // the head must not be a form whose body would swallow the ';'
            std::string s = print_term_prec(n.first, 3) + "; " + print_term_prec(n.rest, 1);
            return wrap(min > 1, s);
        }
        std::string operator()(const IfT &n) const {
            std::string s = "if " + print_term_prec(n.cond, 3) + " then " +
                            print_term_prec(n.then_branch, 2) + " else " +
                            print_term_prec(n.else_branch, 2);
            return wrap(min > 2, s);
        }
        std::string operator()(const LetT &n) const {
            std::string s = "let " + n.var + " = " + print_term_prec(n.bound, 2) + " in " +
                            print_term_prec(n.body, 1);
            return wrap(min > 2, s);
        }
        std::string operator()(const TyAppT &n) const {
            std::string s = print_term_prec(n.fn, 8) + " @ " + print_surface_annot(n.annot);
            return wrap(min > 8, s);
        }
        std::string operator()(const FixT &n) const {
            const auto &alloc = std::get<AllocT>(n.alloc->node);
            const auto &bl = std::get<BigLamV>(alloc.value.node);
            std::string s = "letrec " + n.f + " {" + bl.tyvar + ", " + bl.regionvar + ", " +
                            bl.effvar + "} " + bl.var + " = " + print_term_prec(bl.body, 2) +
                            " [" + print_size(alloc.size) + "] at " +
                            print_term_prec(alloc.into, 8) + " in " + print_term_prec(n.body, 1);
            return wrap(min > 2, s);
        }
        std::string operator()(const NewRgnT &n) const {
            return "newrgn [" + print_size(n.size) + "]";
        }
        std::string operator()(const FreeRgnT &n) const {
            std::string s = "freergn " + print_term_prec(n.handle, 9);
            return wrap(min > 7, s);
        }
        std::string operator()(const SplitT &n) const {
            std::string s = "split [" + print_size(n.size) + "] " + print_term_prec(n.parent, 9);
            return wrap(min > 7, s);
        }
        std::string operator()(const CopyT &n) const {
            std::string s =
                "copy " + print_term_prec(n.src, 9) + " into " + print_term_prec(n.dst, 9);
            return wrap(min > 6, s);
        }
        std::string operator()(const BinOpT &n) const {
            bool additive = n.op == BinOp::Add || n.op == BinOp::Sub;
            std::string s;
            if (additive)
                s = print_term_prec(n.lhs, 5) + " " + binop_str(n.op) + " " +
                    print_term_prec(n.rhs, 6);
            else
                s = print_term_prec(n.lhs, 5) + " " + binop_str(n.op) + " " +
                    print_term_prec(n.rhs, 5);
            return wrap(min > (additive ? 5 : 4), s);
        }
    };
    return std::visit(V{min_level}, e->node);
}

}  // namespace detail

inline std::string print_term(const TermRef &e) { return detail::print_term_prec(e, 1); }
inline std::string print_value(const Value &v) {
    return detail::wrap(detail::value_needs_parens(v), detail::print_value_inner(v));
}

// ---------------------------------------------------------------------------
// Effects, with fresh region names normalized in order of first appearance.
// ---------------------------------------------------------------------------

class RegionNamer {
  public:
    std::string name(const Region &r) {
        if (r.is_global()) return "glob";
        if (r.is_var()) return r.name;
        auto [it, inserted] = names_.emplace(r, "");
        if (inserted) it->second = "r" + std::to_string(++counter_);
        return it->second;
    }

  private:
    std::map<Region, std::string> names_;
    int counter_ = 0;
};

namespace detail {

inline std::string print_effect_named(const EffectRef &phi, RegionNamer &names) {
    struct V {
        RegionNamer &names;
        std::string operator()(const BotE &) const { return "{bot}"; }
        std::string operator()(const FreshE &n) const {
            return "{fresh " + names.name(n.region) + " " + print_size(n.size) + "}";
        }
        std::string operator()(const FreeE &n) const {
            return "{free " + names.name(n.region) + "}";
        }
        std::string operator()(const SplitE &n) const {
            std::string parent = names.name(n.parent);  // name in appearance order
            std::string child = names.name(n.child);
            return "{split " + parent + " " + print_size(n.size) + " " + child + "}";
        }
        std::string operator()(const AllocE &n) const {
            return "{alloc " + print_size(n.size) + " " + names.name(n.region) + "}";
        }
        std::string operator()(const EffVarE &n) const { return "{" + n.name + "}"; }
        std::string operator()(const RecE &n) const {
            return "{rec " + n.var + " " + print_effect_named(n.body, names) + "}";
        }
        std::string operator()(const SeqE &n) const {
            std::string lhs = print_effect_named(n.lhs, names);
            std::string rhs = print_effect_named(n.rhs, names);
            return lhs + " x " + rhs;
        }
        std::string operator()(const JoinE &n) const {
            std::string lhs = print_effect_named(n.lhs, names);
            std::string rhs = print_effect_named(n.rhs, names);
            return "(" + lhs + " u " + rhs + ")";
        }
    };
    return std::visit(V{names}, phi->node);
}

}  // namespace detail

inline std::string print_effect(const EffectRef &phi) {
    RegionNamer names;
    return detail::print_effect_named(normalize(phi), names);
}

inline std::string print_effect_with(const EffectRef &phi, RegionNamer &names) {
    return detail::print_effect_named(normalize(phi), names);
}

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

inline std::string print_type(const TypeRef &t, RegionNamer &names);

inline std::string print_place(const TypeWithPlace &mu, RegionNamer &names) {
    std::string ty = print_type(mu.ty, names);
    std::string place = names.name(mu.place);
    return "(" + ty + ", " + place + ")";
}

inline std::string print_type(const TypeRef &t, RegionNamer &names) {
    struct V {
        RegionNamer &names;
        std::string operator()(const TyVarT &n) const { return n.name; }
        std::string operator()(const IntT &) const { return "Int"; }
        std::string operator()(const UnitT &) const { return "Unit"; }
        std::string operator()(const BoolT &) const { return "Bool"; }
        std::string operator()(const PendingT &) const { return "?rec"; }
        std::string operator()(const RefT &n) const {
            return "Ref " + print_type(n.pointee, names);
        }
        std::string operator()(const FnT &n) const {
            std::string dom = print_place(n.domain, names);
            std::string latent = detail::print_effect_named(normalize(n.latent), names);
            std::string cod = print_place(n.codomain, names);
            return dom + " -{" + latent + "}-> " + cod;
        }
        std::string operator()(const SchemeT &n) const {
            return "forall {" + n.tyvar + ", " + n.regionvar + ", " + n.effvar + "}. " +
                   print_type(n.fn, names);
        }
    };
    return std::visit(V{names}, t->node);
}

inline std::string print_type(const TypeRef &t) {
    RegionNamer names;
    return print_type(t, names);
}

inline std::string print_place(const TypeWithPlace &mu) {
    RegionNamer names;
    return print_place(mu, names);
}

}  // namespace spegion
