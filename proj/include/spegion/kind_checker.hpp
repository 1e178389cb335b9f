#pragma once

// The kinding judgement K |- _ : kappa for types, types-with-place, regions,
// sizes and effects.

#include <optional>
#include <string>
#include <variant>

#include "spegion/syntax.hpp"

namespace spegion {

struct KindError {
    std::string message;
};

template <typename T>
using KindResult = std::variant<T, KindError>;

inline bool kind_ok(const KindResult<Kind> &r) { return std::holds_alternative<Kind>(r); }

struct KindChecker {
    // Compound and symbolic sizes are only admitted when echoing fixtures.
    bool fixture_mode = false;

    KindResult<Kind> kind_of_region(const KindContext &K, const Region &r) const {
        if (r.is_var()) {
            auto k = K.lookup(r.name);
            if (!k) return KindError{"unbound region variable " + r.name};
            if (!(*k == Kind::region()))
                return KindError{"variable " + r.name + " has kind " + k->str() + ", not Region"};
        }
        return Kind::region();
    }

    KindResult<Kind> kind_of_size(const KindContext &K, const Size &s) const {
        if (s.is_symbolic()) {
            if (fixture_mode) return Kind::size();
            auto k = K.lookup(s.sym);
            if (k && *k == Kind::size()) return Kind::size();
            return KindError{"symbolic size " + s.sym + " is not admitted here"};
        }
        return Kind::size();
    }

    KindResult<Kind> kind_of_effect(const KindContext &K, const EffectRef &phi) const {
        struct V {
            const KindChecker &self;
            const KindContext &K;

            KindResult<Kind> operator()(const BotE &) const { return Kind::effect(); }
            KindResult<Kind> operator()(const FreshE &n) const {
                auto r = self.kind_of_region(K, n.region);
                if (!kind_ok(r)) return r;
                auto s = self.kind_of_size(K, n.size);
                if (!kind_ok(s)) return s;
                return Kind::effect();
            }
            KindResult<Kind> operator()(const FreeE &n) const {
                auto r = self.kind_of_region(K, n.region);
                if (!kind_ok(r)) return r;
                return Kind::effect();
            }
            KindResult<Kind> operator()(const SplitE &n) const {
                auto p = self.kind_of_region(K, n.parent);
                if (!kind_ok(p)) return p;
                auto c = self.kind_of_region(K, n.child);
                if (!kind_ok(c)) return c;
                auto s = self.kind_of_size(K, n.size);
                if (!kind_ok(s)) return s;
                return Kind::effect();
            }
            KindResult<Kind> operator()(const AllocE &n) const {
                auto r = self.kind_of_region(K, n.region);
                if (!kind_ok(r)) return r;
                auto s = self.kind_of_size(K, n.size);
                if (!kind_ok(s)) return s;
                return Kind::effect();
            }
            KindResult<Kind> operator()(const EffVarE &n) const {
                auto k = K.lookup(n.name);
                if (!k) return KindError{"unbound effect variable " + n.name};
                if (!(*k == Kind::effect()))
                    return KindError{"variable " + n.name + " has kind " + k->str() +
                                     ", not Effect"};
                return Kind::effect();
            }
            KindResult<Kind> operator()(const RecE &n) const {
                return self.kind_of_effect(K.with(n.var, Kind::effect()), n.body);
            }
            KindResult<Kind> operator()(const SeqE &n) const {
                auto a = self.kind_of_effect(K, n.lhs);
                if (!kind_ok(a)) return a;
                return self.kind_of_effect(K, n.rhs);
            }
            KindResult<Kind> operator()(const JoinE &n) const {
                auto a = self.kind_of_effect(K, n.lhs);
                if (!kind_ok(a)) return a;
                return self.kind_of_effect(K, n.rhs);
            }
        };
        return std::visit(V{*this, K}, phi->node);
    }

    KindResult<Kind> kind_of_type(const KindContext &K, const TypeRef &t) const {
        struct V {
            const KindChecker &self;
            const KindContext &K;

            KindResult<Kind> operator()(const TyVarT &n) const {
                auto k = K.lookup(n.name);
                if (!k) return KindError{"unbound type variable " + n.name};
                return *k;
            }
            KindResult<Kind> operator()(const IntT &) const { return Kind::type(); }
            KindResult<Kind> operator()(const UnitT &) const { return Kind::type(); }
            KindResult<Kind> operator()(const BoolT &) const { return Kind::type(); }
            KindResult<Kind> operator()(const PendingT &) const {
                return KindError{"recursive result type is not yet fixed"};
            }
            KindResult<Kind> operator()(const RefT &n) const {
                auto p = self.kind_of_type(K, n.pointee);
                if (!kind_ok(p)) return p;
                if (!(std::get<Kind>(p) == Kind::type()))
                    return KindError{"Ref expects a Type, got " + std::get<Kind>(p).str()};
                return Kind::type();
            }
            KindResult<Kind> operator()(const FnT &n) const {
                auto d = self.kind_of_place(K, n.domain);
                if (!kind_ok(d)) return d;
                auto e = self.kind_of_effect(K, n.latent);
                if (!kind_ok(e)) return e;
                auto c = self.kind_of_place(K, n.codomain);
                if (!kind_ok(c)) return c;
                return Kind::type();
            }
            KindResult<Kind> operator()(const SchemeT &n) const {
                KindContext K2 = K.with(n.tyvar, Kind::type())
                                     .with(n.regionvar, Kind::region())
                                     .with(n.effvar, Kind::effect());
                auto b = self.kind_of_type(K2, n.fn);
                if (!kind_ok(b)) return b;
                if (!(std::get<Kind>(b) == Kind::type()))
                    return KindError{"scheme body must kind to Type"};
                return Kind::type();
            }
        };
        return std::visit(V{*this, K}, t->node);
    }

    KindResult<Kind> kind_of_place(const KindContext &K, const TypeWithPlace &mu) const {
        auto t = kind_of_type(K, mu.ty);
        if (!kind_ok(t)) return t;
        if (!(std::get<Kind>(t) == Kind::type()))
            return KindError{"type component kinds to " + std::get<Kind>(t).str() + ", not Type"};
        auto r = kind_of_region(K, mu.place);
        if (!kind_ok(r)) return r;
        return Kind::type();
    }
};

// Kind-level application; unreachable from the term language but kept for the
// kinding figure's arrow kinds.
inline KindResult<Kind> apply_kind(const Kind &fn, const Kind &arg) {
    if (fn.tag != Kind::Tag::Arrow) return KindError{"cannot apply non-arrow kind " + fn.str()};
    if (!(*fn.from == arg))
        return KindError{"kind mismatch: expected " + fn.from->str() + ", got " + arg.str()};
    return *fn.to;
}

}  // namespace spegion
