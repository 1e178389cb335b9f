#pragma once

// Value and expression typing. The judgement threads a region-liveness
// environment alongside the usual contexts, mirroring the way freeing a
// region must make later accesses ill-typed.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "spegion/effect_algebra.hpp"
#include "spegion/fresh.hpp"
#include "spegion/kind_checker.hpp"
#include "spegion/printer.hpp"
#include "spegion/store.hpp"
#include "spegion/syntax.hpp"

namespace spegion {

// ---------------------------------------------------------------------------
// Liveness environment: the regions currently live, with their declared sizes.
// ---------------------------------------------------------------------------

struct LivenessEnv {
    std::map<Region, Size> live;

    static LivenessEnv initial() {
        LivenessEnv env;
        env.live.emplace(Region::global(), Size::omega());
        return env;
    }

    bool is_live(const Region &r) const { return live.count(r) > 0; }

    void add(const Region &r, Size declared) { live.insert_or_assign(r, std::move(declared)); }

    void remove(const Region &r) {
        auto it = live.find(r);
        if (it == live.end()) throw std::logic_error("liveness: removing absent region " + r.str());
        live.erase(it);
    }

    void remove_if_present(const Region &r) { live.erase(r); }

    LivenessEnv intersect(const LivenessEnv &other) const {
        LivenessEnv out;
        for (const auto &[r, s] : live)
            if (other.live.count(r)) out.live.emplace(r, s);
        return out;
    }
};

struct TypeJudgement {
    TypeWithPlace type;
    EffectRef effect;
    LivenessEnv live_out;
};

struct TypeError {
    enum class Kind : std::uint8_t {
        Unbound,
        Mismatch,
        NotAFunction,
        NotARef,
        NotBool,
        NotUnitSeq,
        RegionNotLive,
        EffectComposition,
        AllocTooSmall,
        SchemeExpected,
    };

    Kind kind = Kind::Mismatch;
    Span span;
    std::string rule;  // the rule that rejected, e.g. "t-val"
    std::string message;
    std::optional<CompositionError> composition;

    const char *kind_name() const {
        switch (kind) {
            case Kind::Unbound: return "Unbound";
            case Kind::Mismatch: return "Mismatch";
            case Kind::NotAFunction: return "NotAFunction";
            case Kind::NotARef: return "NotARef";
            case Kind::NotBool: return "NotBool";
            case Kind::NotUnitSeq: return "NotUnitSeq";
            case Kind::RegionNotLive: return "RegionNotLive";
            case Kind::EffectComposition: return "EffectComposition";
            case Kind::AllocTooSmall: return "AllocTooSmall";
            case Kind::SchemeExpected: return "SchemeExpected";
        }
        return "?";
    }
};

using CheckResult = std::variant<TypeJudgement, TypeError>;
using ValueResult = std::variant<TypeRef, TypeError>;

inline bool check_ok(const CheckResult &r) { return std::holds_alternative<TypeJudgement>(r); }
inline const TypeJudgement &check_judgement(const CheckResult &r) {
    return std::get<TypeJudgement>(r);
}
inline const TypeError &check_error(const CheckResult &r) { return std::get<TypeError>(r); }

// ---------------------------------------------------------------------------
// Region-alpha matching over types and effects. Fresh regions may be renamed
// bijectively; the global region and region variables are rigid (variables
// only match under binder renamings introduced by schemes).
// ---------------------------------------------------------------------------

namespace detail {

struct TypeMatcher {
    std::map<Region, Region> rfwd, rbwd;
    std::map<std::string, std::string> tyvars, regvars, effvars;  // binder renamings

    bool region(const Region &a, const Region &b) {
        if (a.is_var() || b.is_var()) {
            if (!a.is_var() || !b.is_var()) return false;
            auto it = regvars.find(a.name);
            return it != regvars.end() ? it->second == b.name : a.name == b.name;
        }
        if (a.is_global() || b.is_global()) return a == b;
        auto f = rfwd.find(a);
        if (f != rfwd.end()) return f->second == b;
        auto g = rbwd.find(b);
        if (g != rbwd.end()) return false;
        rfwd.emplace(a, b);
        rbwd.emplace(b, a);
        return true;
    }

    bool effvar(const std::string &a, const std::string &b) const {
        auto it = effvars.find(a);
        return it != effvars.end() ? it->second == b : a == b;
    }

    bool tyvar(const std::string &a, const std::string &b) const {
        auto it = tyvars.find(a);
        return it != tyvars.end() ? it->second == b : a == b;
    }

    bool effect(const EffectRef &ea, const EffectRef &eb) {
        EffectRef a = normalize(ea), b = normalize(eb);
        return effect_raw(a, b);
    }

    bool effect_raw(const EffectRef &a, const EffectRef &b) {
        if (a->node.index() != b->node.index()) return false;
        if (std::holds_alternative<BotE>(a->node)) return true;
        if (const auto *fa = std::get_if<FreshE>(&a->node)) {
            const auto &fb = std::get<FreshE>(b->node);
            return fa->size == fb.size && region(fa->region, fb.region);
        }
        if (const auto *fa = std::get_if<FreeE>(&a->node))
            return region(fa->region, std::get<FreeE>(b->node).region);
        if (const auto *sa = std::get_if<SplitE>(&a->node)) {
            const auto &sb = std::get<SplitE>(b->node);
            return sa->size == sb.size && region(sa->parent, sb.parent) &&
                   region(sa->child, sb.child);
        }
        if (const auto *aa = std::get_if<AllocE>(&a->node)) {
            const auto &ab = std::get<AllocE>(b->node);
            return aa->size == ab.size && region(aa->region, ab.region);
        }
        if (const auto *va = std::get_if<EffVarE>(&a->node))
            return effvar(va->name, std::get<EffVarE>(b->node).name);
        if (const auto *ra = std::get_if<RecE>(&a->node)) {
            const auto &rb = std::get<RecE>(b->node);
            auto saved = effvars;
            effvars[ra->var] = rb.var;
            bool ok = effect_raw(ra->body, rb.body);
            effvars = std::move(saved);
            return ok;
        }
        if (const auto *qa = std::get_if<SeqE>(&a->node)) {
            const auto &qb = std::get<SeqE>(b->node);
            return effect_raw(qa->lhs, qb.lhs) && effect_raw(qa->rhs, qb.rhs);
        }
        const auto &ja = std::get<JoinE>(a->node);
        const auto &jb = std::get<JoinE>(b->node);
        return effect_raw(ja.lhs, jb.lhs) && effect_raw(ja.rhs, jb.rhs);
    }

    bool type(const TypeRef &a, const TypeRef &b) {
        if (a->node.index() != b->node.index()) return false;
        if (const auto *va = std::get_if<TyVarT>(&a->node))
            return tyvar(va->name, std::get<TyVarT>(b->node).name);
        if (std::holds_alternative<IntT>(a->node) || std::holds_alternative<UnitT>(a->node) ||
            std::holds_alternative<BoolT>(a->node))
            return true;
        if (std::holds_alternative<PendingT>(a->node)) return false;  // never equal
        if (const auto *ra = std::get_if<RefT>(&a->node))
            return type(ra->pointee, std::get<RefT>(b->node).pointee);
        if (const auto *fa = std::get_if<FnT>(&a->node)) {
            const auto &fb = std::get<FnT>(b->node);
            return place(fa->domain, fb.domain) && effect(fa->latent, fb.latent) &&
                   place(fa->codomain, fb.codomain);
        }
        const auto &sa = std::get<SchemeT>(a->node);
        const auto &sb = std::get<SchemeT>(b->node);
        auto saved_ty = tyvars;
        auto saved_reg = regvars;
        auto saved_eff = effvars;
        tyvars[sa.tyvar] = sb.tyvar;
        regvars[sa.regionvar] = sb.regionvar;
        effvars[sa.effvar] = sb.effvar;
        bool ok = type(sa.fn, sb.fn);
        tyvars = std::move(saved_ty);
        regvars = std::move(saved_reg);
        effvars = std::move(saved_eff);
        return ok;
    }

    bool place(const TypeWithPlace &a, const TypeWithPlace &b) {
        return type(a.ty, b.ty) && region(a.place, b.place);
    }
};

inline TypeRef rename_type_regions(const TypeRef &t, const std::map<Region, Region> &m) {
    struct V {
        const std::map<Region, Region> &m;
        const TypeRef &orig;
        TypeWithPlace place(const TypeWithPlace &p) const {
            return TypeWithPlace{rename_type_regions(p.ty, m), rename_region_by(p.place, m)};
        }
        TypeRef operator()(const TyVarT &) const { return orig; }
        TypeRef operator()(const IntT &) const { return orig; }
        TypeRef operator()(const UnitT &) const { return orig; }
        TypeRef operator()(const BoolT &) const { return orig; }
        TypeRef operator()(const PendingT &) const { return orig; }
        TypeRef operator()(const RefT &n) const { return ty::ref(rename_type_regions(n.pointee, m)); }
        TypeRef operator()(const FnT &n) const {
            return ty::fn(place(n.domain), rename_effect_regions(n.latent, m), place(n.codomain));
        }
        TypeRef operator()(const SchemeT &n) const {
            return ty::scheme(n.tyvar, n.regionvar, n.effvar, rename_type_regions(n.fn, m));
        }
    };
    return std::visit(V{m, t}, t->node);
}

}  // namespace detail

inline bool type_alpha_eq(const TypeWithPlace &a, const TypeWithPlace &b) {
    detail::TypeMatcher m;
    return m.place(a, b);
}

inline bool type_alpha_eq(const TypeRef &a, const TypeRef &b) {
    detail::TypeMatcher m;
    return m.type(a, b);
}

// ---------------------------------------------------------------------------
// Store typing: every region within its declared bound, every cell coherent
// with the store typing.
// ---------------------------------------------------------------------------

struct StoreTypeError {
    Region region;
    std::string reason;
};

// ---------------------------------------------------------------------------
// The checker
// ---------------------------------------------------------------------------

struct Checker {
    StoreTyping sigma;
    FreshSource *fresh = nullptr;
    ComposeOptions compose_opts;
    KindChecker kinds;

    explicit Checker(FreshSource &fs) : fresh(&fs) { compose_opts.defer_rec_check = true; }

    // --- helpers ---------------------------------------------------------

    static TypeError err(TypeError::Kind kind, Span span, std::string rule, std::string msg) {
        return TypeError{kind, span, std::move(rule), std::move(msg), std::nullopt};
    }

    std::variant<EffectRef, TypeError> seq_effects(const EffectRef &a, const EffectRef &b,
                                                   Span span, const std::string &rule) const {
        ComposeResult r = compose(a, b, compose_opts);
        if (compose_ok(r)) return compose_effect(r);
        const CompositionError &ce = compose_error(r);
        TypeError te = err(TypeError::Kind::EffectComposition, span, rule, ce.str());
        te.composition = ce;
        return te;
    }

    std::optional<TypeError> require_concrete_size(const Size &s, Span span,
                                                   const std::string &rule) const {
        if (s.is_symbolic())
            return err(TypeError::Kind::Mismatch, span, rule,
                       "symbolic size " + s.str() + " is not accepted outside fixtures");
        return std::nullopt;
    }

    // Applies an effect's region lifecycle to a liveness environment: fresh
    // regions become live, split children become live, freed regions die.
    // Join branches contribute their intersection; rec bodies are skipped
    // (per-iteration regions do not survive the call).
    static void apply_effect_liveness(LivenessEnv &env, const EffectRef &phi) {
        for (const EffectRef &atom : effect_spine(phi)) {
            if (const auto *f = std::get_if<FreshE>(&atom->node)) {
                env.add(f->region, f->size);
            } else if (const auto *s = std::get_if<SplitE>(&atom->node)) {
                env.add(s->child, s->size);
            } else if (const auto *fr = std::get_if<FreeE>(&atom->node)) {
                env.remove_if_present(fr->region);
            } else if (const auto *j = std::get_if<JoinE>(&atom->node)) {
                LivenessEnv a = env, b = env;
                apply_effect_liveness(a, j->lhs);
                apply_effect_liveness(b, j->rhs);
                env = a.intersect(b);
            }
        }
    }

    // --- surface annotation resolution ------------------------------------

    std::variant<Region, TypeError> resolve_region(const KindContext &K, const TermContext &G,
                                                   const SurfaceRegion &r, Span span,
                                                   const std::string &rule) const {
        switch (r.kind) {
            case SurfaceRegion::Kind::Glob:
                return Region::global();
            case SurfaceRegion::Kind::Ident: {
                auto k = K.lookup(r.name);
                if (!k || !(*k == Kind::region()))
                    return err(TypeError::Kind::Unbound, span, rule,
                               "unbound region variable " + r.name);
                return Region::var(r.name);
            }
            case SurfaceRegion::Kind::RegionOf: {
                const TypeWithPlace *mu = G.lookup(r.name);
                if (!mu)
                    return err(TypeError::Kind::Unbound, span, rule,
                               "regionOf: unbound variable " + r.name);
                return mu->place;
            }
        }
        return err(TypeError::Kind::Unbound, span, rule, "bad region expression");
    }

    std::variant<TypeRef, TypeError> resolve_type(const KindContext &K, const SurfaceTypeRef &t,
                                                  Span span, const std::string &rule) const {
        switch (t->kind) {
            case SurfaceType::Kind::Int: return ty::int_();
            case SurfaceType::Kind::Unit: return ty::unit();
            case SurfaceType::Kind::Bool: return ty::bool_();
            case SurfaceType::Kind::Ref: {
                auto p = resolve_type(K, t->pointee, span, rule);
                if (std::holds_alternative<TypeError>(p)) return p;
                return ty::ref(std::get<TypeRef>(p));
            }
            case SurfaceType::Kind::Var: {
                auto k = K.lookup(t->name);
                if (!k || !(*k == Kind::type()))
                    return err(TypeError::Kind::Unbound, span, rule,
                               "unbound type variable " + t->name);
                return ty::var(t->name);
            }
        }
        return err(TypeError::Kind::Unbound, span, rule, "bad type annotation");
    }

    std::variant<TypeWithPlace, TypeError> resolve_annot(const KindContext &K,
                                                         const TermContext &G,
                                                         const SurfaceTypeWithPlace &a, Span span,
                                                         const std::string &rule) const {
        auto tr = resolve_type(K, a.ty, span, rule);
        if (std::holds_alternative<TypeError>(tr)) return std::get<TypeError>(tr);
        auto rr = resolve_region(K, G, a.place, span, rule);
        if (std::holds_alternative<TypeError>(rr)) return std::get<TypeError>(rr);
        return TypeWithPlace{std::get<TypeRef>(tr), std::get<Region>(rr)};
    }

    // --- scheme instantiation ----------------------------------------------

    std::variant<TypeRef, TypeError> instantiate_scheme(const TypeRef &scheme, const TypeRef &tau,
                                                        const Region &rho, Span span) const {
        const auto *s = std::get_if<SchemeT>(&scheme->node);
        if (!s)
            return err(TypeError::Kind::SchemeExpected, span, "t-tyApp",
                       "type application expects a polymorphic value, got " + print_type(scheme));
        return substitute_type_vars(s->fn, s->tyvar, tau, s->regionvar, rho);
    }

    // --- value typing ------------------------------------------------------

    ValueResult type_of_value(const KindContext &K, const TermContext &G, const Value &v,
                              const LivenessEnv &live, Span span) {
        if (std::holds_alternative<IntV>(v.node)) return ty::int_();
        if (std::holds_alternative<TrueV>(v.node) || std::holds_alternative<FalseV>(v.node))
            return ty::bool_();
        if (std::holds_alternative<UnitV>(v.node)) return ty::unit();
        if (const auto *lv = std::get_if<LocV>(&v.node)) {
            const TypeRef *t = sigma.lookup(lv->loc);
            if (!t)
                return err(TypeError::Kind::Unbound, span, "t-loc",
                           "location " + lv->loc.str() + " is not in the store typing");
            return *t;
        }
        if (const auto *lam = std::get_if<LamV>(&v.node)) {
            TypeWithPlace dom{ty::unit(), Region::global()};  // default argument type
            if (lam->ann) {
                auto r = resolve_annot(K, G, *lam->ann, span, "t-lam");
                if (std::holds_alternative<TypeError>(r)) return std::get<TypeError>(r);
                dom = std::get<TypeWithPlace>(r);
            }
            CheckResult body = type_of_expr(K, G.with(lam->var, dom), lam->body, live);
            if (!check_ok(body)) return check_error(body);
            const TypeJudgement &j = check_judgement(body);
            return ty::fn(dom, j.effect, j.type);
        }
        const auto &bl = std::get<BigLamV>(v.node);
        KindContext K2 = K.with(bl.tyvar, Kind::type())
                             .with(bl.regionvar, Kind::region())
                             .with(bl.effvar, Kind::effect());
        TypeWithPlace dom{ty::var(bl.tyvar), Region::var(bl.regionvar)};
        LivenessEnv live2 = live;
        live2.add(Region::var(bl.regionvar), Size::omega());
        CheckResult body = type_of_expr(K2, G.with(bl.var, dom), bl.body, live2);
        if (!check_ok(body)) return check_error(body);
        const TypeJudgement &j = check_judgement(body);
        return ty::scheme(bl.tyvar, bl.regionvar, bl.effvar, ty::fn(dom, j.effect, j.type));
    }

    // --- expression typing --------------------------------------------------

    CheckResult type_of_expr(const KindContext &K, const TermContext &G, const TermRef &e,
                             const LivenessEnv &live) {
        struct V {
            Checker &self;
            const KindContext &K;
            const TermContext &G;
            const LivenessEnv &live;
            const TermRef &e;

            Span span() const { return e->span; }

            CheckResult sub(const TermRef &inner, const LivenessEnv &env) const {
                return self.type_of_expr(K, G, inner, env);
            }

            CheckResult operator()(const VarT &n) const {
                const TypeWithPlace *mu = G.lookup(n.name);
                if (!mu)
                    return err(TypeError::Kind::Unbound, span(), "t-var",
                               "unbound variable " + n.name);
                return TypeJudgement{*mu, eff::bot(), live};
            }

            CheckResult operator()(const LocT &n) const {
                const TypeRef *t = self.sigma.lookup(n.loc);
                if (!t)
                    return err(TypeError::Kind::Unbound, span(), "t-use-val",
                               "location " + n.loc.str() + " is not in the store typing");
                return TypeJudgement{TypeWithPlace{*t, n.loc.region}, eff::bot(), live};
            }

            CheckResult operator()(const NewRgnT &n) const {
                if (auto bad = self.require_concrete_size(n.size, span(), "t-newrgn")) return *bad;
                if (!size_geq(n.size, Size::of(1)))
                    return err(TypeError::Kind::AllocTooSmall, span(), "t-newrgn",
                               "a region must be able to hold at least 1 unit, got " +
                                   n.size.str());
                Region rho = self.fresh->fresh_region();
                EffectRef phi =
                    eff::seq(eff::fresh(rho, n.size), eff::alloc(Size::of(1), rho));
                LivenessEnv out = live;
                out.add(rho, n.size);
                return TypeJudgement{TypeWithPlace{ty::unit(), rho}, normalize(phi), out};
            }

            CheckResult operator()(const FreeRgnT &n) const {
                CheckResult h = sub(n.handle, live);
                if (!check_ok(h)) return h;
                const TypeJudgement &j = check_judgement(h);
                const Region &rho = j.type.place;
                if (rho.is_global())
                    return err(TypeError::Kind::Mismatch, span(), "t-freergn",
                               "the global region cannot be freed");
                if (!j.live_out.is_live(rho))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-freergn",
                               "region " + rho.str() + " is not live");
                auto phi = self.seq_effects(j.effect, eff::free_(rho), span(), "t-freergn");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                LivenessEnv out = j.live_out;
                out.remove(rho);
                return TypeJudgement{TypeWithPlace{ty::unit(), Region::global()},
                                     std::get<EffectRef>(phi), out};
            }

            CheckResult operator()(const SplitT &n) const {
                if (auto bad = self.require_concrete_size(n.size, span(), "t-split")) return *bad;
                if (!size_geq(n.size, Size::of(1)))
                    return err(TypeError::Kind::AllocTooSmall, span(), "t-split",
                               "a sub-region must be able to hold at least 1 unit, got " +
                                   n.size.str());
                CheckResult p = sub(n.parent, live);
                if (!check_ok(p)) return p;
                const TypeJudgement &j = check_judgement(p);
                const Region &rho = j.type.place;
                if (!j.live_out.is_live(rho))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-split",
                               "region " + rho.str() + " is not live");
                Region child = self.fresh->fresh_region();
                EffectRef tail = eff::seq(eff::split(rho, n.size, child),
                                          eff::alloc(Size::of(1), child));
                auto phi = self.seq_effects(j.effect, tail, span(), "t-split");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                LivenessEnv out = j.live_out;
                out.add(child, n.size);
                return TypeJudgement{TypeWithPlace{ty::unit(), child}, std::get<EffectRef>(phi),
                                     out};
            }

            CheckResult operator()(const AllocT &n) const {
                if (auto bad = self.require_concrete_size(n.size, span(), "t-val")) return *bad;
                CheckResult into = sub(n.into, live);
                if (!check_ok(into)) return into;
                const TypeJudgement &j = check_judgement(into);
                if (is_pending(j.type.ty))
                    return err(TypeError::Kind::Mismatch, span(), "t-val",
                               "allocation target's type is not fixed yet (recursive result)");
                const Region &rho = j.type.place;
                if (!j.live_out.is_live(rho))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-val",
                               "region " + rho.str() + " is not live");
                ValueResult vt = self.type_of_value(K, G, n.value, j.live_out, span());
                if (std::holds_alternative<TypeError>(vt)) return std::get<TypeError>(vt);
                Size actual = size_of_value(n.value);
                if (!size_leq(actual, n.size))
                    return err(TypeError::Kind::AllocTooSmall, span(), "t-val",
                               "value of size " + actual.str() + " does not fit annotation [" +
                                   n.size.str() + "]");
                auto phi = self.seq_effects(j.effect, eff::alloc(n.size, rho), span(), "t-val");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                return TypeJudgement{TypeWithPlace{std::get<TypeRef>(vt), rho},
                                     std::get<EffectRef>(phi), j.live_out};
            }

            CheckResult operator()(const CopyT &n) const {
                CheckResult s = sub(n.src, live);
                if (!check_ok(s)) return s;
                const TypeJudgement &js = check_judgement(s);
                CheckResult d = self.type_of_expr(K, G, n.dst, js.live_out);
                if (!check_ok(d)) return d;
                const TypeJudgement &jd = check_judgement(d);
                if (is_pending(js.type.ty) || is_pending(jd.type.ty))
                    return err(TypeError::Kind::Mismatch, span(), "t-copy",
                               "copy operand's type is not fixed yet (recursive result)");
                if (std::holds_alternative<RefT>(js.type.ty->node))
                    return err(TypeError::Kind::Mismatch, span(), "t-copy",
                               "copying a reference cell is not supported");
                if (!jd.live_out.is_live(js.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-copy",
                               "source region " + js.type.place.str() + " is not live");
                if (!jd.live_out.is_live(jd.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-copy",
                               "destination region " + jd.type.place.str() + " is not live");
                auto phi1 = self.seq_effects(js.effect, jd.effect, span(), "t-copy");
                if (std::holds_alternative<TypeError>(phi1)) return std::get<TypeError>(phi1);
                auto phi = self.seq_effects(std::get<EffectRef>(phi1),
                                            eff::alloc(Size::of(1), jd.type.place), span(),
                                            "t-copy");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                return TypeJudgement{TypeWithPlace{js.type.ty, jd.type.place},
                                     std::get<EffectRef>(phi), jd.live_out};
            }

            CheckResult operator()(const RefMkT &n) const {
                CheckResult r = sub(n.init, live);
                if (!check_ok(r)) return r;
                const TypeJudgement &j = check_judgement(r);
                if (is_pending(j.type.ty))
                    return err(TypeError::Kind::Mismatch, span(), "t-ref",
                               "ref operand's type is not fixed yet (recursive result)");
                if (!j.live_out.is_live(j.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-ref",
                               "region " + j.type.place.str() + " is not live");
                auto phi = self.seq_effects(j.effect, eff::alloc(Size::of(1), j.type.place),
                                            span(), "t-ref");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                return TypeJudgement{TypeWithPlace{ty::ref(j.type.ty), j.type.place},
                                     std::get<EffectRef>(phi), j.live_out};
            }

            CheckResult operator()(const DerefT &n) const {
                CheckResult r = sub(n.ref, live);
                if (!check_ok(r)) return r;
                const TypeJudgement &j = check_judgement(r);
                const auto *ref = std::get_if<RefT>(&j.type.ty->node);
                if (!ref)
                    return err(TypeError::Kind::NotARef, span(), "t-deref",
                               "dereference of a non-reference: " + print_type(j.type.ty));
                if (!j.live_out.is_live(j.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-deref",
                               "region " + j.type.place.str() + " is not live");
                return TypeJudgement{TypeWithPlace{ref->pointee, j.type.place}, j.effect,
                                     j.live_out};
            }

            CheckResult operator()(const AssignT &n) const {
                CheckResult t = sub(n.target, live);
                if (!check_ok(t)) return t;
                const TypeJudgement &jt = check_judgement(t);
                const auto *ref = std::get_if<RefT>(&jt.type.ty->node);
                if (!ref)
                    return err(TypeError::Kind::NotARef, span(), "t-assign",
                               "assignment to a non-reference: " + print_type(jt.type.ty));
                if (!jt.live_out.is_live(jt.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-assign",
                               "region " + jt.type.place.str() + " is not live");
                CheckResult v = self.type_of_expr(K, G, n.value, jt.live_out);
                if (!check_ok(v)) return v;
                const TypeJudgement &jv = check_judgement(v);
                if (!type_alpha_eq(jv.type.ty, ref->pointee))
                    return err(TypeError::Kind::Mismatch, span(), "t-assign",
                               "cannot assign " + print_type(jv.type.ty) + " into Ref " +
                                   print_type(ref->pointee));
                if (!(jv.type.place == jt.type.place))
                    return err(TypeError::Kind::Mismatch, span(), "t-assign",
                               "assigned value lives in " + jv.type.place.str() +
                                   " but the cell is in " + jt.type.place.str());
                auto phi = self.seq_effects(jt.effect, jv.effect, span(), "t-assign");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                return TypeJudgement{TypeWithPlace{ty::unit(), Region::global()},
                                     std::get<EffectRef>(phi), jv.live_out};
            }

            CheckResult operator()(const SeqT &n) const {
                CheckResult a = sub(n.first, live);
                if (!check_ok(a)) return a;
                const TypeJudgement &ja = check_judgement(a);
                if (!std::holds_alternative<UnitT>(ja.type.ty->node))
                    return err(TypeError::Kind::NotUnitSeq, span(), "t-seq",
                               "the left side of ';' must have type Unit, got " +
                                   print_type(ja.type.ty));
                CheckResult b = self.type_of_expr(K, G, n.rest, ja.live_out);
                if (!check_ok(b)) return b;
                const TypeJudgement &jb = check_judgement(b);
                auto phi = self.seq_effects(ja.effect, jb.effect, span(), "t-seq");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                return TypeJudgement{jb.type, std::get<EffectRef>(phi), jb.live_out};
            }

            CheckResult operator()(const LetT &n) const {
                CheckResult a = sub(n.bound, live);
                if (!check_ok(a)) return a;
                const TypeJudgement &ja = check_judgement(a);
                CheckResult b =
                    self.type_of_expr(K, G.with(n.var, ja.type), n.body, ja.live_out);
                if (!check_ok(b)) return b;
                const TypeJudgement &jb = check_judgement(b);
                auto phi = self.seq_effects(ja.effect, jb.effect, span(), "t-let");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                return TypeJudgement{jb.type, std::get<EffectRef>(phi), jb.live_out};
            }

            CheckResult operator()(const IfT &n) const {
                CheckResult c = sub(n.cond, live);
                if (!check_ok(c)) return c;
                const TypeJudgement &jc = check_judgement(c);
                if (!std::holds_alternative<BoolT>(jc.type.ty->node))
                    return err(TypeError::Kind::NotBool, span(), "t-if",
                               "if-condition must be Bool, got " + print_type(jc.type.ty));
                if (!jc.live_out.is_live(jc.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-if",
                               "region " + jc.type.place.str() + " is not live");
                CheckResult t = self.type_of_expr(K, G, n.then_branch, jc.live_out);
                if (!check_ok(t)) return t;
                CheckResult f = self.type_of_expr(K, G, n.else_branch, jc.live_out);
                if (!check_ok(f)) return f;
                const TypeJudgement &jt = check_judgement(t);
                const TypeJudgement &jf = check_judgement(f);
                // A pending branch (recursive call result) adopts the other branch's type.
                TypeWithPlace result = jt.type;
                if (is_pending(jt.type.ty)) {
                    result = jf.type;
                } else if (!is_pending(jf.type.ty)) {
                    if (!type_alpha_eq(jt.type, jf.type))
                        return err(TypeError::Kind::Mismatch, span(), "t-if",
                                   "branch types differ: " + print_place(jt.type) + " vs " +
                                       print_place(jf.type));
                }
                auto phi = self.seq_effects(jc.effect, eff::join(jt.effect, jf.effect), span(),
                                            "t-if");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                return TypeJudgement{result, std::get<EffectRef>(phi),
                                     jt.live_out.intersect(jf.live_out)};
            }

            CheckResult operator()(const AppT &n) const {
                CheckResult f = sub(n.fn, live);
                if (!check_ok(f)) return f;
                const TypeJudgement &jf = check_judgement(f);
                if (is_pending(jf.type.ty))
                    return err(TypeError::Kind::NotAFunction, span(), "t-app",
                               "recursive value applied before its type is fixed");
                if (!jf.live_out.is_live(jf.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-app",
                               "region " + jf.type.place.str() + " is not live");
                CheckResult a = self.type_of_expr(K, G, n.arg, jf.live_out);
                if (!check_ok(a)) return a;
                const TypeJudgement &ja = check_judgement(a);
                TypeRef fn_ty = jf.type.ty;
                // A fully-flexible scheme (domain exactly its bound pair) is
                // instantiated by the argument itself; this is the shape
                // recursive definitions produce, and the erased type
                // application is recovered this way after e-bigApp steps.
                if (const auto *sch = std::get_if<SchemeT>(&fn_ty->node)) {
                    const auto *body = std::get_if<FnT>(&sch->fn->node);
                    bool flexible =
                        body && std::holds_alternative<TyVarT>(body->domain.ty->node) &&
                        std::get<TyVarT>(body->domain.ty->node).name == sch->tyvar &&
                        body->domain.place.is_var() &&
                        body->domain.place.name == sch->regionvar;
                    if (flexible)
                        fn_ty = substitute_type_vars(sch->fn, sch->tyvar, ja.type.ty,
                                                     sch->regionvar, ja.type.place);
                }
                const auto *fn = std::get_if<FnT>(&fn_ty->node);
                if (!fn) {
                    if (std::holds_alternative<SchemeT>(fn_ty->node))
                        return err(TypeError::Kind::NotAFunction, span(), "t-app",
                                   "polymorphic value must be instantiated with @ before "
                                   "application");
                    return err(TypeError::Kind::NotAFunction, span(), "t-app",
                               "application of a non-function: " + print_type(fn_ty));
                }
                detail::TypeMatcher m;
                if (!m.place(fn->domain, ja.type))
                    return err(TypeError::Kind::Mismatch, span(), "t-app",
                               "argument type " + print_place(ja.type) +
                                   " does not match the domain " + print_place(fn->domain));
                EffectRef latent = rename_effect_regions(fn->latent, m.rfwd);
                TypeWithPlace cod{detail::rename_type_regions(fn->codomain.ty, m.rfwd),
                                  rename_region_by(fn->codomain.place, m.rfwd)};
                // Freshen the regions the latent effect introduces; every
                // application creates its own instances.
                std::set<Region> intro;
                detail::introduced_regions(latent, intro);
                std::map<Region, Region> freshmap;
                for (const Region &r : intro)
                    if (!r.is_global()) freshmap.emplace(r, self.fresh->fresh_region());
                latent = rename_effect_regions(latent, freshmap);
                cod = TypeWithPlace{detail::rename_type_regions(cod.ty, freshmap),
                                    rename_region_by(cod.place, freshmap)};
                auto phi1 = self.seq_effects(jf.effect, ja.effect, span(), "t-app");
                if (std::holds_alternative<TypeError>(phi1)) return std::get<TypeError>(phi1);
                auto phi = self.seq_effects(std::get<EffectRef>(phi1), latent, span(), "t-app");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                LivenessEnv out = ja.live_out;
                apply_effect_liveness(out, latent);
                return TypeJudgement{cod, std::get<EffectRef>(phi), out};
            }

            CheckResult operator()(const TyAppT &n) const {
                CheckResult f = sub(n.fn, live);
                if (!check_ok(f)) return f;
                const TypeJudgement &jf = check_judgement(f);
                auto annot = self.resolve_annot(K, G, n.annot, span(), "t-tyApp");
                if (std::holds_alternative<TypeError>(annot)) return std::get<TypeError>(annot);
                const TypeWithPlace &at = std::get<TypeWithPlace>(annot);
                auto inst = self.instantiate_scheme(jf.type.ty, at.ty, at.place, span());
                if (std::holds_alternative<TypeError>(inst)) return std::get<TypeError>(inst);
                return TypeJudgement{TypeWithPlace{std::get<TypeRef>(inst), jf.type.place},
                                     jf.effect, jf.live_out};
            }

            // Operands must be integers; a type-variable operand is admitted
            // the way the appendix derivations use the recursive argument in
            // arithmetic (it is an integer at every instantiation the
            // arithmetic survives).
            static bool int_like(const TypeRef &t) {
                return std::holds_alternative<IntT>(t->node) ||
                       std::holds_alternative<TyVarT>(t->node);
            }

            CheckResult operator()(const BinOpT &n) const {
                CheckResult a = sub(n.lhs, live);
                if (!check_ok(a)) return a;
                const TypeJudgement &ja = check_judgement(a);
                if (!int_like(ja.type.ty))
                    return err(TypeError::Kind::Mismatch, span(), "t-binop",
                               "left operand of " + std::string(binop_str(n.op)) +
                                   " must be Int, got " + print_type(ja.type.ty));
                CheckResult b = self.type_of_expr(K, G, n.rhs, ja.live_out);
                if (!check_ok(b)) return b;
                const TypeJudgement &jb = check_judgement(b);
                if (!int_like(jb.type.ty))
                    return err(TypeError::Kind::Mismatch, span(), "t-binop",
                               "right operand of " + std::string(binop_str(n.op)) +
                                   " must be Int, got " + print_type(jb.type.ty));
                if (!jb.live_out.is_live(ja.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-binop",
                               "region " + ja.type.place.str() + " is not live");
                if (!jb.live_out.is_live(jb.type.place))
                    return err(TypeError::Kind::RegionNotLive, span(), "t-binop",
                               "region " + jb.type.place.str() + " is not live");
                auto phi1 = self.seq_effects(ja.effect, jb.effect, span(), "t-binop");
                if (std::holds_alternative<TypeError>(phi1)) return std::get<TypeError>(phi1);
                // the result lives in the global region, whose capacity is
                // unbounded; anything else would charge a caller's region on
                // every recursive call
                auto phi = self.seq_effects(std::get<EffectRef>(phi1),
                                            eff::alloc(Size::of(1), Region::global()), span(),
                                            "t-binop");
                if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
                bool boolean = n.op == BinOp::Eq || n.op == BinOp::Gt;
                return TypeJudgement{
                    TypeWithPlace{boolean ? ty::bool_() : ty::int_(), Region::global()},
                    std::get<EffectRef>(phi), jb.live_out};
            }

            CheckResult operator()(const FixT &) const { return self.type_fix(K, G, e, live); }
        };
        return std::visit(V{*this, K, G, live, e}, e->node);
    }

    // t-fix. The body is typed twice: once with the recursive result type
    // pending to discover it, then again with it fixed, which also yields the
    // definitive latent effect.
    CheckResult type_fix(const KindContext &K, const TermContext &G, const TermRef &e,
                         const LivenessEnv &live) {
        const auto &fx = std::get<FixT>(e->node);
        const auto *alloc = std::get_if<AllocT>(&fx.alloc->node);
        if (!alloc)
            return err(TypeError::Kind::Mismatch, e->span, "t-fix",
                       "letrec expects an allocated polymorphic function");
        const auto *bl = std::get_if<BigLamV>(&alloc->value.node);
        if (!bl)
            return err(TypeError::Kind::Mismatch, e->span, "t-fix",
                       "letrec expects a polymorphic function value");
        if (auto bad = require_concrete_size(alloc->size, e->span, "t-fix")) return *bad;

        CheckResult at = type_of_expr(K, G, alloc->into, live);
        if (!check_ok(at)) return at;
        const TypeJudgement &jat = check_judgement(at);
        const Region &rho_f = jat.type.place;
        if (!jat.live_out.is_live(rho_f))
            return err(TypeError::Kind::RegionNotLive, e->span, "t-fix",
                       "region " + rho_f.str() + " is not live");
        Size actual = size_of_value(alloc->value);
        if (!size_leq(actual, alloc->size))
            return err(TypeError::Kind::AllocTooSmall, e->span, "t-fix",
                       "function of size " + actual.str() + " does not fit annotation [" +
                           alloc->size.str() + "]");

        KindContext K2 = K.with(bl->tyvar, Kind::type())
                             .with(bl->regionvar, Kind::region())
                             .with(bl->effvar, Kind::effect());
        TypeWithPlace dom{ty::var(bl->tyvar), Region::var(bl->regionvar)};
        LivenessEnv body_live = jat.live_out;
        body_live.add(Region::var(bl->regionvar), Size::omega());

        // pass 1: discover the result type
        TypeRef scheme1 = ty::scheme(
            bl->tyvar, bl->regionvar, bl->effvar,
            ty::fn(dom, eff::var(bl->effvar), TypeWithPlace{ty::pending(), Region::var("?rec")}));
        TermContext G1 = G.with(fx.f, TypeWithPlace{scheme1, rho_f}).with(bl->var, dom);
        CheckResult pass1 = type_of_expr(K2, G1, bl->body, body_live);
        if (!check_ok(pass1)) return pass1;
        if (is_pending(check_judgement(pass1).type.ty))
            return err(TypeError::Kind::Mismatch, e->span, "t-fix",
                       "the recursive function never returns a concrete value (no base case)");
        TypeWithPlace mu1 = check_judgement(pass1).type;

        // pass 2: re-type with the result fixed; the latent effect comes out
        TypeRef scheme2 = ty::scheme(bl->tyvar, bl->regionvar, bl->effvar,
                                     ty::fn(dom, eff::var(bl->effvar), mu1));
        TermContext G2 = G.with(fx.f, TypeWithPlace{scheme2, rho_f}).with(bl->var, dom);
        CheckResult pass2 = type_of_expr(K2, G2, bl->body, body_live);
        if (!check_ok(pass2)) return pass2;
        const TypeJudgement &jbody = check_judgement(pass2);
        if (!is_pending(jbody.type.ty) && !type_alpha_eq(jbody.type, mu1))
            return err(TypeError::Kind::Mismatch, e->span, "t-fix",
                       "recursive result type is unstable: " + print_place(mu1) + " vs " +
                           print_place(jbody.type));
        TypeWithPlace mu_final = is_pending(jbody.type.ty) ? mu1 : jbody.type;
        EffectRef phi_body = jbody.effect;

        // the body's effect is now complete: settle the recursion constraint
        if (auto ce = validate_recursive_effect(phi_body)) {
            TypeError te = err(TypeError::Kind::EffectComposition, e->span, "t-fix", ce->str());
            te.composition = *ce;
            return te;
        }

        // latent with the recursion variable replaced by its rec-wrapper
        EffectRef phi_rec =
            substitute_effect_var(phi_body, bl->effvar, eff::rec(bl->effvar, phi_body));
        TypeRef f_scheme = ty::scheme(bl->tyvar, bl->regionvar, bl->effvar,
                                      ty::fn(dom, phi_rec, mu_final));

        auto phi1 = seq_effects(jat.effect, eff::alloc(alloc->size, rho_f), e->span, "t-fix");
        if (std::holds_alternative<TypeError>(phi1)) return std::get<TypeError>(phi1);

        CheckResult rest = type_of_expr(K, G.with(fx.f, TypeWithPlace{f_scheme, rho_f}), fx.body,
                                        jat.live_out);
        if (!check_ok(rest)) return rest;
        const TypeJudgement &j3 = check_judgement(rest);
        auto phi = seq_effects(std::get<EffectRef>(phi1), j3.effect, e->span, "t-fix");
        if (std::holds_alternative<TypeError>(phi)) return std::get<TypeError>(phi);
        return TypeJudgement{j3.type, std::get<EffectRef>(phi), j3.live_out};
    }

    static TermRef untie_self(const TermRef &e, const Location &target) {
        if (const auto *l = std::get_if<LocT>(&e->node)) {
            if (l->loc == target) return tm::mk(VarT{"#self"}, e->span);
            return e;
        }
        if (const auto *n = std::get_if<AllocT>(&e->node)) {
            Value v = n->value;
            if (const auto *lam = std::get_if<LamV>(&v.node))
                v = val::lam(lam->var, untie_self(lam->body, target), lam->ann);
            else if (const auto *bl = std::get_if<BigLamV>(&v.node))
                v = val::biglam(bl->tyvar, bl->regionvar, bl->effvar, bl->var,
                                untie_self(bl->body, target));
            else if (const auto *lv = std::get_if<LocV>(&v.node); lv && lv->loc == target)
                return e;  // a self-location payload cannot be untied
            return tm::mk(AllocT{std::move(v), n->size, untie_self(n->into, target)}, e->span);
        }
        if (const auto *n = std::get_if<AppT>(&e->node))
            return tm::mk(AppT{untie_self(n->fn, target), untie_self(n->arg, target)}, e->span);
        if (const auto *n = std::get_if<RefMkT>(&e->node))
            return tm::mk(RefMkT{untie_self(n->init, target)}, e->span);
        if (const auto *n = std::get_if<DerefT>(&e->node))
            return tm::mk(DerefT{untie_self(n->ref, target)}, e->span);
        if (const auto *n = std::get_if<AssignT>(&e->node))
            return tm::mk(AssignT{untie_self(n->target, target), untie_self(n->value, target)},
                          e->span);
        if (const auto *n = std::get_if<SeqT>(&e->node))
            return tm::mk(SeqT{untie_self(n->first, target), untie_self(n->rest, target)},
                          e->span);
        if (const auto *n = std::get_if<IfT>(&e->node))
            return tm::mk(IfT{untie_self(n->cond, target), untie_self(n->then_branch, target),
                              untie_self(n->else_branch, target)},
                          e->span);
        if (const auto *n = std::get_if<LetT>(&e->node))
            return tm::mk(LetT{n->var, untie_self(n->bound, target), untie_self(n->body, target)},
                          e->span);
        if (const auto *n = std::get_if<TyAppT>(&e->node))
            return tm::mk(TyAppT{untie_self(n->fn, target), n->annot}, e->span);
        if (const auto *n = std::get_if<FixT>(&e->node))
            return tm::mk(FixT{n->f, untie_self(n->alloc, target), untie_self(n->body, target)},
                          e->span);
        if (const auto *n = std::get_if<FreeRgnT>(&e->node))
            return tm::mk(FreeRgnT{untie_self(n->handle, target)}, e->span);
        if (const auto *n = std::get_if<SplitT>(&e->node))
            return tm::mk(SplitT{n->size, untie_self(n->parent, target)}, e->span);
        if (const auto *n = std::get_if<CopyT>(&e->node))
            return tm::mk(CopyT{untie_self(n->src, target), untie_self(n->dst, target)}, e->span);
        if (const auto *n = std::get_if<BinOpT>(&e->node))
            return tm::mk(BinOpT{n->op, untie_self(n->lhs, target), untie_self(n->rhs, target)},
                          e->span);
        return e;
    }

    // Checks a whole program under the initial contexts.
    CheckResult check_program(const TermRef &e) {
        return type_of_expr(KindContext{}, TermContext{}, e, LivenessEnv::initial());
    }

    // --- stored values ------------------------------------------------------

    // Recursive closures hold their own location; they are typed by untying
    // the knot (self-locations become a variable again) and re-running the
    // recursive-definition typing on a synthetic wrapper.
    ValueResult type_of_stored(const Location &at, const Value &v, const LivenessEnv &live) {
        const BigLamV *bl = std::get_if<BigLamV>(&v.node);
        bool self_referential = false;
        if (bl) {
            for (const Location &l : free_locations(bl->body))
                if (l == at) self_referential = true;
        }
        if (!self_referential) return type_of_value(KindContext{}, TermContext{}, v, live, Span{});
        TermRef untied = untie_self(bl->body, at);
        Value value = val::biglam(bl->tyvar, bl->regionvar, bl->effvar, bl->var, untied);
        TermRef synth =
            tm::fix("#self", tm::alloc(value, Size::omega(), tm::loc(Location::global_unit())),
                    tm::var("#self"));
        CheckResult cr = type_of_expr(KindContext{}, TermContext{}, synth, live);
        if (!check_ok(cr)) return check_error(cr);
        return check_judgement(cr).type.ty;
    }

    // --- store typing -------------------------------------------------------

    std::optional<StoreTypeError> check_store(const Store &store) {
        for (const auto &[rho, inner] : store.regions) {
            Size current = current_size(inner);
            if (!size_leq(current, inner.max_size))
                return StoreTypeError{rho, "currentSize " + current.str() +
                                               " exceeds declared max " + inner.max_size.str()};
            LivenessEnv live;
            for (const auto &[r2, inner2] : store.regions) live.add(r2, inner2.max_size);
            for (const auto &[loc, v] : inner.cells) {
                const TypeRef *expect = sigma.lookup(loc);
                if (!expect)
                    return StoreTypeError{rho, "location " + loc.str() +
                                                   " has no store typing entry"};
                ValueResult vt = type_of_stored(loc, v, live);
                if (std::holds_alternative<TypeError>(vt))
                    return StoreTypeError{rho, "value at " + loc.str() +
                                                   " does not type: " +
                                                   std::get<TypeError>(vt).message};
                bool coherent = type_alpha_eq(std::get<TypeRef>(vt), *expect);
                if (!coherent && std::holds_alternative<LocV>(v.node)) {
                    // a stored location may also stand for a reference cell
                    if (const auto *ref = std::get_if<RefT>(&(*expect)->node))
                        coherent = type_alpha_eq(std::get<TypeRef>(vt), ref->pointee);
                }
                if (!coherent)
                    return StoreTypeError{rho,
                                          "value at " + loc.str() + " has type " +
                                              print_type(std::get<TypeRef>(vt)) +
                                              " but the store typing expects " +
                                              print_type(*expect)};
            }
        }
        return std::nullopt;
    }
};

}  // namespace spegion
