#pragma once

// Core abstract syntax: regions, locations, sizes, kinds, effects, types,
// terms, values and the typing contexts, plus capture-avoiding substitution.
// Everything here is an immutable value type; nodes are shared_ptr<const T>.

#include <cassert>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace spegion {

// ---------------------------------------------------------------------------
// Regions and locations
// ---------------------------------------------------------------------------

struct Region {
    enum class Tag : std::uint8_t { Global, Fresh, Var };

    Tag tag = Tag::Global;
    std::uint32_t id = 0;   // Fresh
    std::string name;       // Var

    static Region global() { return Region{}; }
    static Region fresh(std::uint32_t id) { return Region{Tag::Fresh, id, {}}; }
    static Region var(std::string n) { return Region{Tag::Var, 0, std::move(n)}; }

    bool is_global() const { return tag == Tag::Global; }
    bool is_var() const { return tag == Tag::Var; }

    friend bool operator==(const Region &a, const Region &b) {
        return a.tag == b.tag && a.id == b.id && a.name == b.name;
    }
    friend bool operator!=(const Region &a, const Region &b) { return !(a == b); }
    friend bool operator<(const Region &a, const Region &b) {
        if (a.tag != b.tag) return a.tag < b.tag;
        if (a.id != b.id) return a.id < b.id;
        return a.name < b.name;
    }

    std::string str() const {
        switch (tag) {
            case Tag::Global: return "glob";
            case Tag::Fresh: return "r" + std::to_string(id);
            case Tag::Var: return name;
        }
        return "?";
    }
};

struct Location {
    Region region;
    std::uint32_t index = 0;

    static Location global_unit() { return Location{Region::global(), 1}; }

    friend bool operator==(const Location &a, const Location &b) {
        return a.region == b.region && a.index == b.index;
    }
    friend bool operator!=(const Location &a, const Location &b) { return !(a == b); }
    friend bool operator<(const Location &a, const Location &b) {
        if (a.region != b.region) return a.region < b.region;
        return a.index < b.index;
    }

    std::string str() const { return "l" + std::to_string(index) + "@" + region.str(); }
};

// ---------------------------------------------------------------------------
// Sizes: extended naturals (n | w), plus a symbolic leaf used only when
// echoing appendix-style fixtures. The checker rejects symbolic sizes.
// ---------------------------------------------------------------------------

struct Size {
    enum class Tag : std::uint8_t { Finite, Omega, Symbolic };

    Tag tag = Tag::Finite;
    std::uint64_t n = 0;
    std::string sym;  // symbolic: a variable name or a rendered "s op s" text

    static Size of(std::uint64_t v) { return Size{Tag::Finite, v, {}}; }
    static Size omega() { return Size{Tag::Omega, 0, {}}; }
    static Size symbolic(std::string s) { return Size{Tag::Symbolic, 0, std::move(s)}; }

    bool is_finite() const { return tag == Tag::Finite; }
    bool is_omega() const { return tag == Tag::Omega; }
    bool is_symbolic() const { return tag == Tag::Symbolic; }

    friend bool operator==(const Size &a, const Size &b) {
        return a.tag == b.tag && a.n == b.n && a.sym == b.sym;
    }
    friend bool operator!=(const Size &a, const Size &b) { return !(a == b); }
    friend bool operator<(const Size &a, const Size &b) {
        if (a.tag != b.tag) return a.tag < b.tag;
        if (a.n != b.n) return a.n < b.n;
        return a.sym < b.sym;
    }

    std::string str() const {
        switch (tag) {
            case Tag::Finite: return std::to_string(n);
            case Tag::Omega: return "w";
            case Tag::Symbolic: return sym;
        }
        return "?";
    }
};

// ---------------------------------------------------------------------------
// Kinds
// ---------------------------------------------------------------------------

struct Kind;
using KindRef = std::shared_ptr<const Kind>;

struct Kind {
    enum class Tag : std::uint8_t { Type, Region, Effect, Size, Arrow };

    Tag tag = Tag::Type;
    KindRef from, to;  // Arrow

    static Kind type() { return Kind{Tag::Type, nullptr, nullptr}; }
    static Kind region() { return Kind{Tag::Region, nullptr, nullptr}; }
    static Kind effect() { return Kind{Tag::Effect, nullptr, nullptr}; }
    static Kind size() { return Kind{Tag::Size, nullptr, nullptr}; }
    static Kind arrow(Kind a, Kind b) {
        return Kind{Tag::Arrow, std::make_shared<const Kind>(std::move(a)),
                    std::make_shared<const Kind>(std::move(b))};
    }

    friend bool operator==(const Kind &a, const Kind &b) {
        if (a.tag != b.tag) return false;
        if (a.tag != Tag::Arrow) return true;
        return *a.from == *b.from && *a.to == *b.to;
    }
    friend bool operator!=(const Kind &a, const Kind &b) { return !(a == b); }

    std::string str() const {
        switch (tag) {
            case Tag::Type: return "Type";
            case Tag::Region: return "Region";
            case Tag::Effect: return "Effect";
            case Tag::Size: return "Size";
            case Tag::Arrow: return "(" + from->str() + " -> " + to->str() + ")";
        }
        return "?";
    }
};

// ---------------------------------------------------------------------------
// Effects
// ---------------------------------------------------------------------------

struct Effect;
using EffectRef = std::shared_ptr<const Effect>;

struct BotE {};
struct FreshE { Region region; Size size; };
struct FreeE { Region region; };
struct SplitE { Region parent; Size size; Region child; };
struct AllocE { Size size; Region region; };
struct EffVarE { std::string name; };
struct RecE { std::string var; EffectRef body; };
struct SeqE { EffectRef lhs, rhs; };   // sequential composition (x)
struct JoinE { EffectRef lhs, rhs; };  // branch join (|_|)

struct Effect {
    std::variant<BotE, FreshE, FreeE, SplitE, AllocE, EffVarE, RecE, SeqE, JoinE> node;
};

namespace eff {
inline EffectRef mk(Effect e) { return std::make_shared<const Effect>(std::move(e)); }
inline EffectRef bot() { return mk({BotE{}}); }
inline EffectRef fresh(Region r, Size s) { return mk({FreshE{std::move(r), std::move(s)}}); }
inline EffectRef free_(Region r) { return mk({FreeE{std::move(r)}}); }
inline EffectRef split(Region parent, Size s, Region child) {
    return mk({SplitE{std::move(parent), std::move(s), std::move(child)}});
}
inline EffectRef alloc(Size s, Region r) { return mk({AllocE{std::move(s), std::move(r)}}); }
inline EffectRef var(std::string name) { return mk({EffVarE{std::move(name)}}); }
inline EffectRef rec(std::string v, EffectRef body) { return mk({RecE{std::move(v), std::move(body)}}); }
inline EffectRef seq(EffectRef a, EffectRef b) { return mk({SeqE{std::move(a), std::move(b)}}); }
inline EffectRef join(EffectRef a, EffectRef b) { return mk({JoinE{std::move(a), std::move(b)}}); }
}  // namespace eff

// ---------------------------------------------------------------------------
// Types. A type-with-place pairs a type with the region holding the value.
// ---------------------------------------------------------------------------

struct Type;
using TypeRef = std::shared_ptr<const Type>;

struct TypeWithPlace {
    TypeRef ty;
    Region place;
};

struct TyVarT { std::string name; };
struct IntT {};
struct UnitT {};
struct BoolT {};
struct RefT { TypeRef pointee; };
struct FnT {
    TypeWithPlace domain;
    EffectRef latent;
    TypeWithPlace codomain;
};
// forall {alpha, rho, eps}. fn
struct SchemeT {
    std::string tyvar;
    std::string regionvar;
    std::string effvar;
    TypeRef fn;  // always an FnT
};
// Internal placeholder for a recursive definition's not-yet-fixed result type.
struct PendingT {};

struct Type {
    std::variant<TyVarT, IntT, UnitT, BoolT, RefT, FnT, SchemeT, PendingT> node;
};

namespace ty {
inline TypeRef mk(Type t) { return std::make_shared<const Type>(std::move(t)); }
inline TypeRef var(std::string n) { return mk({TyVarT{std::move(n)}}); }
inline TypeRef int_() { return mk({IntT{}}); }
inline TypeRef unit() { return mk({UnitT{}}); }
inline TypeRef bool_() { return mk({BoolT{}}); }
inline TypeRef ref(TypeRef t) { return mk({RefT{std::move(t)}}); }
inline TypeRef fn(TypeWithPlace dom, EffectRef latent, TypeWithPlace cod) {
    return mk({FnT{std::move(dom), std::move(latent), std::move(cod)}});
}
inline TypeRef scheme(std::string a, std::string r, std::string e, TypeRef f) {
    return mk({SchemeT{std::move(a), std::move(r), std::move(e), std::move(f)}});
}
inline TypeRef pending() { return mk({PendingT{}}); }
}  // namespace ty

inline bool is_pending(const TypeRef &t) { return std::holds_alternative<PendingT>(t->node); }

// ---------------------------------------------------------------------------
// Surface annotations carried in terms (type applications, lambda arguments).
// They are resolved to core types/regions by the checker.
// ---------------------------------------------------------------------------

struct SurfaceRegion {
    enum class Kind : std::uint8_t { Glob, Ident, RegionOf };
    Kind kind = Kind::Glob;
    std::string name;  // Ident: a bound region variable; RegionOf: a term variable

    friend bool operator==(const SurfaceRegion &a, const SurfaceRegion &b) {
        return a.kind == b.kind && a.name == b.name;
    }
};

struct SurfaceType;
using SurfaceTypeRef = std::shared_ptr<const SurfaceType>;

struct SurfaceType {
    enum class Kind : std::uint8_t { Int, Unit, Bool, Ref, Var };
    Kind kind = Kind::Unit;
    std::string name;        // Var
    SurfaceTypeRef pointee;  // Ref

    friend bool operator==(const SurfaceType &a, const SurfaceType &b) {
        if (a.kind != b.kind || a.name != b.name) return false;
        if (a.kind != Kind::Ref) return true;
        return *a.pointee == *b.pointee;
    }
};

struct SurfaceTypeWithPlace {
    SurfaceTypeRef ty;
    SurfaceRegion place;

    friend bool operator==(const SurfaceTypeWithPlace &a, const SurfaceTypeWithPlace &b) {
        return *a.ty == *b.ty && a.place == b.place;
    }
};

namespace sty {
inline SurfaceTypeRef mk(SurfaceType t) { return std::make_shared<const SurfaceType>(std::move(t)); }
inline SurfaceTypeRef int_() { return mk({SurfaceType::Kind::Int, "", nullptr}); }
inline SurfaceTypeRef unit() { return mk({SurfaceType::Kind::Unit, "", nullptr}); }
inline SurfaceTypeRef bool_() { return mk({SurfaceType::Kind::Bool, "", nullptr}); }
inline SurfaceTypeRef ref(SurfaceTypeRef p) { return mk({SurfaceType::Kind::Ref, "", std::move(p)}); }
inline SurfaceTypeRef var(std::string n) { return mk({SurfaceType::Kind::Var, std::move(n), nullptr}); }
}  // namespace sty

// ---------------------------------------------------------------------------
// Terms and values
// ---------------------------------------------------------------------------

struct Term;
using TermRef = std::shared_ptr<const Term>;

struct Span {
    int line = 0, col = 0, len = 0;
};

struct Value;

struct IntV { long long n = 0; };
struct TrueV {};
struct FalseV {};
struct UnitV {};
struct LamV {
    std::string var;
    std::optional<SurfaceTypeWithPlace> ann;  // optional argument annotation
    TermRef body;
};
struct BigLamV {
    std::string tyvar, regionvar, effvar;
    std::string var;
    TermRef body;
};
struct LocV { Location loc; };

struct Value {
    std::variant<IntV, TrueV, FalseV, UnitV, LamV, BigLamV, LocV> node;
};

enum class BinOp : std::uint8_t { Add, Sub, Eq, Gt };

inline const char *binop_str(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Eq: return "==";
        case BinOp::Gt: return ">";
    }
    return "?";
}

struct VarT { std::string name; };
struct LocT { Location loc; };
struct AllocT { Value value; Size size; TermRef into; };  // v [s] at e
struct AppT { TermRef fn, arg; };
struct RefMkT { TermRef init; };
struct DerefT { TermRef ref; };
struct AssignT { TermRef target, value; };
struct SeqT { TermRef first, rest; };
struct IfT { TermRef cond, then_branch, else_branch; };
struct LetT { std::string var; TermRef bound, body; };
struct TyAppT { TermRef fn; SurfaceTypeWithPlace annot; };  // e @ (ty, r)
struct FixT { std::string f; TermRef alloc; TermRef body; };  // alloc: AllocT with BigLamV payload
struct NewRgnT { Size size; };
struct FreeRgnT { TermRef handle; };
struct SplitT { Size size; TermRef parent; };
struct CopyT { TermRef src, dst; };
struct BinOpT { BinOp op; TermRef lhs, rhs; };

struct Term {
    std::variant<VarT, LocT, AllocT, AppT, RefMkT, DerefT, AssignT, SeqT, IfT, LetT,
                 TyAppT, FixT, NewRgnT, FreeRgnT, SplitT, CopyT, BinOpT>
        node;
    Span span;
};

namespace tm {
inline TermRef mk(Term t) { return std::make_shared<const Term>(std::move(t)); }
template <typename Node>
inline TermRef mk(Node n, Span sp = {}) { return mk(Term{std::move(n), sp}); }

inline TermRef var(std::string n) { return mk(VarT{std::move(n)}); }
inline TermRef loc(Location l) { return mk(LocT{std::move(l)}); }
inline TermRef alloc(Value v, Size s, TermRef into) {
    return mk(AllocT{std::move(v), std::move(s), std::move(into)});
}
inline TermRef app(TermRef f, TermRef a) { return mk(AppT{std::move(f), std::move(a)}); }
inline TermRef ref(TermRef e) { return mk(RefMkT{std::move(e)}); }
inline TermRef deref(TermRef e) { return mk(DerefT{std::move(e)}); }
inline TermRef assign(TermRef t, TermRef v) { return mk(AssignT{std::move(t), std::move(v)}); }
inline TermRef seq(TermRef a, TermRef b) { return mk(SeqT{std::move(a), std::move(b)}); }
inline TermRef if_(TermRef c, TermRef t, TermRef e) {
    return mk(IfT{std::move(c), std::move(t), std::move(e)});
}
inline TermRef let(std::string x, TermRef bound, TermRef body) {
    return mk(LetT{std::move(x), std::move(bound), std::move(body)});
}
inline TermRef tyapp(TermRef f, SurfaceTypeWithPlace a) {
    return mk(TyAppT{std::move(f), std::move(a)});
}
inline TermRef fix(std::string f, TermRef alloc_part, TermRef body) {
    return mk(FixT{std::move(f), std::move(alloc_part), std::move(body)});
}
inline TermRef newrgn(Size s) { return mk(NewRgnT{std::move(s)}); }
inline TermRef freergn(TermRef h) { return mk(FreeRgnT{std::move(h)}); }
inline TermRef split(Size s, TermRef p) { return mk(SplitT{std::move(s), std::move(p)}); }
inline TermRef copy(TermRef src, TermRef dst) { return mk(CopyT{std::move(src), std::move(dst)}); }
inline TermRef binop(BinOp op, TermRef l, TermRef r) {
    return mk(BinOpT{op, std::move(l), std::move(r)});
}
}  // namespace tm

namespace val {
inline Value int_(long long n) { return Value{IntV{n}}; }
inline Value true_() { return Value{TrueV{}}; }
inline Value false_() { return Value{FalseV{}}; }
inline Value unit() { return Value{UnitV{}}; }
inline Value lam(std::string x, TermRef body, std::optional<SurfaceTypeWithPlace> ann = {}) {
    return Value{LamV{std::move(x), std::move(ann), std::move(body)}};
}
inline Value biglam(std::string a, std::string r, std::string e, std::string x, TermRef body) {
    return Value{BigLamV{std::move(a), std::move(r), std::move(e), std::move(x), std::move(body)}};
}
inline Value loc(Location l) { return Value{LocV{std::move(l)}}; }
}  // namespace val

inline bool term_is_location(const TermRef &t) { return std::holds_alternative<LocT>(t->node); }

// ---------------------------------------------------------------------------
// Contexts: K (kinding), Gamma (term vars), Sigma (store typing)
// ---------------------------------------------------------------------------

struct KindContext {
    std::map<std::string, Kind> vars;  // type, region and effect variables

    std::optional<Kind> lookup(const std::string &n) const {
        auto it = vars.find(n);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    }
    KindContext with(const std::string &n, Kind k) const {
        KindContext out = *this;
        out.vars[n] = std::move(k);
        return out;
    }
};

struct TermContext {
    std::map<std::string, TypeWithPlace> vars;

    const TypeWithPlace *lookup(const std::string &n) const {
        auto it = vars.find(n);
        return it == vars.end() ? nullptr : &it->second;
    }
    TermContext with(const std::string &n, TypeWithPlace t) const {
        TermContext out = *this;
        out.vars.insert_or_assign(n, std::move(t));
        return out;
    }
};

struct StoreTyping {
    std::map<Location, TypeRef> locs;

    StoreTyping() { locs.emplace(Location::global_unit(), ty::unit()); }

    const TypeRef *lookup(const Location &l) const {
        auto it = locs.find(l);
        return it == locs.end() ? nullptr : &it->second;
    }
    void bind(const Location &l, TypeRef t) { locs.insert_or_assign(l, std::move(t)); }
};

// ---------------------------------------------------------------------------
// Substitution and location collection
// ---------------------------------------------------------------------------

TermRef substitute_term(const TermRef &e, const std::string &x, const Value &v);

inline Value substitute_value(const Value &w, const std::string &x, const Value &v) {
    if (const auto *lam = std::get_if<LamV>(&w.node)) {
        if (lam->var == x) return w;  // shadowed
        return val::lam(lam->var, substitute_term(lam->body, x, v), lam->ann);
    }
    if (const auto *bl = std::get_if<BigLamV>(&w.node)) {
        if (bl->var == x) return w;
        return val::biglam(bl->tyvar, bl->regionvar, bl->effvar, bl->var,
                           substitute_term(bl->body, x, v));
    }
    return w;
}

// Every free occurrence of x in e replaced by value v; binders shadow.
inline TermRef substitute_term(const TermRef &e, const std::string &x, const Value &v) {
    struct Visitor {
        const std::string &x;
        const Value &v;
        const TermRef &orig;

        TermRef operator()(const VarT &n) const {
            if (n.name != x) return orig;
            if (const auto *lv = std::get_if<LocV>(&v.node)) return tm::mk(LocT{lv->loc}, orig->span);
            // Non-location values only occur in tests; wrap as an identity allocation-free
            // term is impossible, so keep the variable for anything unrepresentable.
            return orig;
        }
        TermRef operator()(const LocT &) const { return orig; }
        TermRef operator()(const AllocT &n) const {
            return tm::mk(AllocT{substitute_value(n.value, x, v), n.size,
                                 substitute_term(n.into, x, v)},
                          orig->span);
        }
        TermRef operator()(const AppT &n) const {
            return tm::mk(AppT{substitute_term(n.fn, x, v), substitute_term(n.arg, x, v)},
                          orig->span);
        }
        TermRef operator()(const RefMkT &n) const {
            return tm::mk(RefMkT{substitute_term(n.init, x, v)}, orig->span);
        }
        TermRef operator()(const DerefT &n) const {
            return tm::mk(DerefT{substitute_term(n.ref, x, v)}, orig->span);
        }
        TermRef operator()(const AssignT &n) const {
            return tm::mk(AssignT{substitute_term(n.target, x, v), substitute_term(n.value, x, v)},
                          orig->span);
        }
        TermRef operator()(const SeqT &n) const {
            return tm::mk(SeqT{substitute_term(n.first, x, v), substitute_term(n.rest, x, v)},
                          orig->span);
        }
        TermRef operator()(const IfT &n) const {
            return tm::mk(IfT{substitute_term(n.cond, x, v), substitute_term(n.then_branch, x, v),
                              substitute_term(n.else_branch, x, v)},
                          orig->span);
        }
        TermRef operator()(const LetT &n) const {
            TermRef bound = substitute_term(n.bound, x, v);
            TermRef body = n.var == x ? n.body : substitute_term(n.body, x, v);
            return tm::mk(LetT{n.var, std::move(bound), std::move(body)}, orig->span);
        }
        TermRef operator()(const TyAppT &n) const {
            return tm::mk(TyAppT{substitute_term(n.fn, x, v), n.annot}, orig->span);
        }
        TermRef operator()(const FixT &n) const {
            TermRef alloc_part = substitute_term(n.alloc, x, v);
            TermRef body = n.f == x ? n.body : substitute_term(n.body, x, v);
            return tm::mk(FixT{n.f, std::move(alloc_part), std::move(body)}, orig->span);
        }
        TermRef operator()(const NewRgnT &) const { return orig; }
        TermRef operator()(const FreeRgnT &n) const {
            return tm::mk(FreeRgnT{substitute_term(n.handle, x, v)}, orig->span);
        }
        TermRef operator()(const SplitT &n) const {
            return tm::mk(SplitT{n.size, substitute_term(n.parent, x, v)}, orig->span);
        }
        TermRef operator()(const CopyT &n) const {
            return tm::mk(CopyT{substitute_term(n.src, x, v), substitute_term(n.dst, x, v)},
                          orig->span);
        }
        TermRef operator()(const BinOpT &n) const {
            return tm::mk(BinOpT{n.op, substitute_term(n.lhs, x, v), substitute_term(n.rhs, x, v)},
                          orig->span);
        }
    };
    return std::visit(Visitor{x, v, e}, e->node);
}

// All location occurrences, left to right, duplicates preserved.
inline void collect_locations(const TermRef &e, std::vector<Location> &out);

inline void collect_locations_value(const Value &v, std::vector<Location> &out) {
    if (const auto *lv = std::get_if<LocV>(&v.node)) {
        out.push_back(lv->loc);
    } else if (const auto *lam = std::get_if<LamV>(&v.node)) {
        collect_locations(lam->body, out);
    } else if (const auto *bl = std::get_if<BigLamV>(&v.node)) {
        collect_locations(bl->body, out);
    }
}

inline void collect_locations(const TermRef &e, std::vector<Location> &out) {
    struct Visitor {
        std::vector<Location> &out;
        void operator()(const VarT &) const {}
        void operator()(const LocT &n) const { out.push_back(n.loc); }
        void operator()(const AllocT &n) const {
            collect_locations_value(n.value, out);
            collect_locations(n.into, out);
        }
        void operator()(const AppT &n) const {
            collect_locations(n.fn, out);
            collect_locations(n.arg, out);
        }
        void operator()(const RefMkT &n) const { collect_locations(n.init, out); }
        void operator()(const DerefT &n) const { collect_locations(n.ref, out); }
        void operator()(const AssignT &n) const {
            collect_locations(n.target, out);
            collect_locations(n.value, out);
        }
        void operator()(const SeqT &n) const {
            collect_locations(n.first, out);
            collect_locations(n.rest, out);
        }
        void operator()(const IfT &n) const {
            collect_locations(n.cond, out);
            collect_locations(n.then_branch, out);
            collect_locations(n.else_branch, out);
        }
        void operator()(const LetT &n) const {
            collect_locations(n.bound, out);
            collect_locations(n.body, out);
        }
        void operator()(const TyAppT &n) const { collect_locations(n.fn, out); }
        void operator()(const FixT &n) const {
            collect_locations(n.alloc, out);
            collect_locations(n.body, out);
        }
        void operator()(const NewRgnT &) const {}
        void operator()(const FreeRgnT &n) const { collect_locations(n.handle, out); }
        void operator()(const SplitT &n) const { collect_locations(n.parent, out); }
        void operator()(const CopyT &n) const {
            collect_locations(n.src, out);
            collect_locations(n.dst, out);
        }
        void operator()(const BinOpT &n) const {
            collect_locations(n.lhs, out);
            collect_locations(n.rhs, out);
        }
    };
    std::visit(Visitor{out}, e->node);
}

inline std::vector<Location> free_locations(const TermRef &e) {
    std::vector<Location> out;
    collect_locations(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Effect variable substitution: every {eps} leaf replaced, rec binders shadow.
// ---------------------------------------------------------------------------

inline EffectRef substitute_effect_var(const EffectRef &phi, const std::string &eps,
                                       const EffectRef &replacement) {
    struct Visitor {
        const std::string &eps;
        const EffectRef &rep;
        const EffectRef &orig;

        EffectRef operator()(const BotE &) const { return orig; }
        EffectRef operator()(const FreshE &) const { return orig; }
        EffectRef operator()(const FreeE &) const { return orig; }
        EffectRef operator()(const SplitE &) const { return orig; }
        EffectRef operator()(const AllocE &) const { return orig; }
        EffectRef operator()(const EffVarE &n) const { return n.name == eps ? rep : orig; }
        EffectRef operator()(const RecE &n) const {
            if (n.var == eps) return orig;  // binder shadows
            return eff::rec(n.var, substitute_effect_var(n.body, eps, rep));
        }
        EffectRef operator()(const SeqE &n) const {
            return eff::seq(substitute_effect_var(n.lhs, eps, rep),
                            substitute_effect_var(n.rhs, eps, rep));
        }
        EffectRef operator()(const JoinE &n) const {
            return eff::join(substitute_effect_var(n.lhs, eps, rep),
                             substitute_effect_var(n.rhs, eps, rep));
        }
    };
    return std::visit(Visitor{eps, replacement, phi}, phi->node);
}

// ---------------------------------------------------------------------------
// Region substitution inside effects and types (used by scheme instantiation).
// ---------------------------------------------------------------------------

inline Region substitute_region(const Region &r, const std::string &var, const Region &to) {
    if (r.is_var() && r.name == var) return to;
    return r;
}

inline EffectRef substitute_effect_region(const EffectRef &phi, const std::string &var,
                                          const Region &to) {
    struct Visitor {
        const std::string &var;
        const Region &to;
        const EffectRef &orig;

        EffectRef operator()(const BotE &) const { return orig; }
        EffectRef operator()(const FreshE &n) const {
            return eff::fresh(substitute_region(n.region, var, to), n.size);
        }
        EffectRef operator()(const FreeE &n) const {
            return eff::free_(substitute_region(n.region, var, to));
        }
        EffectRef operator()(const SplitE &n) const {
            return eff::split(substitute_region(n.parent, var, to), n.size,
                              substitute_region(n.child, var, to));
        }
        EffectRef operator()(const AllocE &n) const {
            return eff::alloc(n.size, substitute_region(n.region, var, to));
        }
        EffectRef operator()(const EffVarE &) const { return orig; }
        EffectRef operator()(const RecE &n) const {
            return eff::rec(n.var, substitute_effect_region(n.body, var, to));
        }
        EffectRef operator()(const SeqE &n) const {
            return eff::seq(substitute_effect_region(n.lhs, var, to),
                            substitute_effect_region(n.rhs, var, to));
        }
        EffectRef operator()(const JoinE &n) const {
            return eff::join(substitute_effect_region(n.lhs, var, to),
                             substitute_effect_region(n.rhs, var, to));
        }
    };
    return std::visit(Visitor{var, to, phi}, phi->node);
}

// Substitutes a bound type variable and a bound region variable throughout a
// type, including the regions mentioned by latent effects. Effect variables
// are left untouched. Nested schemes that rebind the same names shadow.
inline TypeRef substitute_type_vars(const TypeRef &t, const std::string &alpha, const TypeRef &to_ty,
                                    const std::string &rvar, const Region &to_region) {
    struct Visitor {
        const std::string &alpha;
        const TypeRef &to_ty;
        const std::string &rvar;
        const Region &to_region;
        const TypeRef &orig;

        TypeWithPlace place(const TypeWithPlace &p) const {
            return TypeWithPlace{substitute_type_vars(p.ty, alpha, to_ty, rvar, to_region),
                                 substitute_region(p.place, rvar, to_region)};
        }

        TypeRef operator()(const TyVarT &n) const { return n.name == alpha ? to_ty : orig; }
        TypeRef operator()(const IntT &) const { return orig; }
        TypeRef operator()(const UnitT &) const { return orig; }
        TypeRef operator()(const BoolT &) const { return orig; }
        TypeRef operator()(const PendingT &) const { return orig; }
        TypeRef operator()(const RefT &n) const {
            return ty::ref(substitute_type_vars(n.pointee, alpha, to_ty, rvar, to_region));
        }
        TypeRef operator()(const FnT &n) const {
            return ty::fn(place(n.domain), substitute_effect_region(n.latent, rvar, to_region),
                          place(n.codomain));
        }
        TypeRef operator()(const SchemeT &n) const {
            if (n.tyvar == alpha || n.regionvar == rvar) return orig;  // shadowing
            return ty::scheme(n.tyvar, n.regionvar, n.effvar,
                              substitute_type_vars(n.fn, alpha, to_ty, rvar, to_region));
        }
    };
    return std::visit(Visitor{alpha, to_ty, rvar, to_region, t}, t->node);
}

// ---------------------------------------------------------------------------
// Alpha-normalizing term equality (tests compare terms up to renaming).
// ---------------------------------------------------------------------------

namespace detail {

struct AlphaEnv {
    std::map<std::string, std::string> left_to_right;
};

inline bool alpha_eq(const TermRef &a, const TermRef &b, AlphaEnv env);

inline bool alpha_eq_value(const Value &a, const Value &b, AlphaEnv env) {
    if (a.node.index() != b.node.index()) return false;
    if (const auto *ia = std::get_if<IntV>(&a.node))
        return ia->n == std::get<IntV>(b.node).n;
    if (std::holds_alternative<TrueV>(a.node) || std::holds_alternative<FalseV>(a.node) ||
        std::holds_alternative<UnitV>(a.node))
        return true;
    if (const auto *la = std::get_if<LocV>(&a.node))
        return la->loc == std::get<LocV>(b.node).loc;
    if (const auto *ma = std::get_if<LamV>(&a.node)) {
        const auto &mb = std::get<LamV>(b.node);
        if (ma->ann.has_value() != mb.ann.has_value()) return false;
        if (ma->ann && !(*ma->ann == *mb.ann)) return false;
        env.left_to_right[ma->var] = mb.var;
        return alpha_eq(ma->body, mb.body, std::move(env));
    }
    const auto &ba = std::get<BigLamV>(a.node);
    const auto &bb = std::get<BigLamV>(b.node);
    env.left_to_right[ba.tyvar] = bb.tyvar;
    env.left_to_right[ba.regionvar] = bb.regionvar;
    env.left_to_right[ba.effvar] = bb.effvar;
    env.left_to_right[ba.var] = bb.var;
    return alpha_eq(ba.body, bb.body, std::move(env));
}

inline bool alpha_surface_eq(const SurfaceTypeWithPlace &a, const SurfaceTypeWithPlace &b,
                             const AlphaEnv &env) {
    // Surface annotations may mention alpha-renamed identifiers.
    std::function<bool(const SurfaceTypeRef &, const SurfaceTypeRef &)> go =
        [&](const SurfaceTypeRef &x, const SurfaceTypeRef &y) -> bool {
        if (x->kind != y->kind) return false;
        if (x->kind == SurfaceType::Kind::Ref) return go(x->pointee, y->pointee);
        if (x->kind == SurfaceType::Kind::Var) {
            auto it = env.left_to_right.find(x->name);
            return it != env.left_to_right.end() ? it->second == y->name : x->name == y->name;
        }
        return true;
    };
    if (!go(a.ty, b.ty)) return false;
    if (a.place.kind != b.place.kind) return false;
    auto it = env.left_to_right.find(a.place.name);
    return it != env.left_to_right.end() ? it->second == b.place.name
                                         : a.place.name == b.place.name;
}

inline bool alpha_eq(const TermRef &a, const TermRef &b, AlphaEnv env) {
    if (a->node.index() != b->node.index()) return false;
    if (const auto *va = std::get_if<VarT>(&a->node)) {
        const auto &vb = std::get<VarT>(b->node);
        auto it = env.left_to_right.find(va->name);
        return it != env.left_to_right.end() ? it->second == vb.name : va->name == vb.name;
    }
    if (const auto *la = std::get_if<LocT>(&a->node))
        return la->loc == std::get<LocT>(b->node).loc;
    if (const auto *na = std::get_if<AllocT>(&a->node)) {
        const auto &nb = std::get<AllocT>(b->node);
        return na->size == nb.size && alpha_eq_value(na->value, nb.value, env) &&
               alpha_eq(na->into, nb.into, env);
    }
    if (const auto *na = std::get_if<AppT>(&a->node)) {
        const auto &nb = std::get<AppT>(b->node);
        return alpha_eq(na->fn, nb.fn, env) && alpha_eq(na->arg, nb.arg, env);
    }
    if (const auto *na = std::get_if<RefMkT>(&a->node))
        return alpha_eq(na->init, std::get<RefMkT>(b->node).init, env);
    if (const auto *na = std::get_if<DerefT>(&a->node))
        return alpha_eq(na->ref, std::get<DerefT>(b->node).ref, env);
    if (const auto *na = std::get_if<AssignT>(&a->node)) {
        const auto &nb = std::get<AssignT>(b->node);
        return alpha_eq(na->target, nb.target, env) && alpha_eq(na->value, nb.value, env);
    }
    if (const auto *na = std::get_if<SeqT>(&a->node)) {
        const auto &nb = std::get<SeqT>(b->node);
        return alpha_eq(na->first, nb.first, env) && alpha_eq(na->rest, nb.rest, env);
    }
    if (const auto *na = std::get_if<IfT>(&a->node)) {
        const auto &nb = std::get<IfT>(b->node);
        return alpha_eq(na->cond, nb.cond, env) && alpha_eq(na->then_branch, nb.then_branch, env) &&
               alpha_eq(na->else_branch, nb.else_branch, env);
    }
    if (const auto *na = std::get_if<LetT>(&a->node)) {
        const auto &nb = std::get<LetT>(b->node);
        if (!alpha_eq(na->bound, nb.bound, env)) return false;
        env.left_to_right[na->var] = nb.var;
        return alpha_eq(na->body, nb.body, std::move(env));
    }
    if (const auto *na = std::get_if<TyAppT>(&a->node)) {
        const auto &nb = std::get<TyAppT>(b->node);
        return alpha_eq(na->fn, nb.fn, env) && alpha_surface_eq(na->annot, nb.annot, env);
    }
    if (const auto *na = std::get_if<FixT>(&a->node)) {
        const auto &nb = std::get<FixT>(b->node);
        env.left_to_right[na->f] = nb.f;
        return alpha_eq(na->alloc, nb.alloc, env) && alpha_eq(na->body, nb.body, env);
    }
    if (const auto *na = std::get_if<NewRgnT>(&a->node))
        return na->size == std::get<NewRgnT>(b->node).size;
    if (const auto *na = std::get_if<FreeRgnT>(&a->node))
        return alpha_eq(na->handle, std::get<FreeRgnT>(b->node).handle, env);
    if (const auto *na = std::get_if<SplitT>(&a->node)) {
        const auto &nb = std::get<SplitT>(b->node);
        return na->size == nb.size && alpha_eq(na->parent, nb.parent, env);
    }
    if (const auto *na = std::get_if<CopyT>(&a->node)) {
        const auto &nb = std::get<CopyT>(b->node);
        return alpha_eq(na->src, nb.src, env) && alpha_eq(na->dst, nb.dst, env);
    }
    const auto &oa = std::get<BinOpT>(a->node);
    const auto &ob = std::get<BinOpT>(b->node);
    return oa.op == ob.op && alpha_eq(oa.lhs, ob.lhs, env) && alpha_eq(oa.rhs, ob.rhs, env);
}

}  // namespace detail

inline bool term_alpha_eq(const TermRef &a, const TermRef &b) {
    return detail::alpha_eq(a, b, {});
}

}  // namespace spegion
