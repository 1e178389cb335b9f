#pragma once

// Small-step evaluation over the dual-layer store, with congruence steps
// reducing the leftmost non-value subterm. Every step is named after the rule
// that fired; stuck configurations carry a classified reason.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spegion/fresh.hpp"
#include "spegion/store.hpp"
#include "spegion/syntax.hpp"

namespace spegion {

struct StuckInfo {
    enum class Reason : std::uint8_t {
        MissingRegion,
        MissingLocation,
        AnnotationTooSmall,
        NotAFunctionValue,
        NotABool,
        FreeVariable,
    };

    Reason reason = Reason::MissingRegion;
    std::string detail;
    Size actual;     // AnnotationTooSmall
    Size annotated;  // AnnotationTooSmall

    const char *reason_name() const {
        switch (reason) {
            case Reason::MissingRegion: return "MissingRegion";
            case Reason::MissingLocation: return "MissingLocation";
            case Reason::AnnotationTooSmall: return "AnnotationTooSmall";
            case Reason::NotAFunctionValue: return "NotAFunctionValue";
            case Reason::NotABool: return "NotABool";
            case Reason::FreeVariable: return "FreeVariable";
        }
        return "?";
    }
};

struct Stepped {
    TermRef term;
    Store store;
    std::string rule;
};
struct Done {
    Location loc;
};
struct Stuck {
    StuckInfo info;
    TermRef term;
};

using StepOutcome = std::variant<Stepped, Done, Stuck>;

class Evaluator {
  public:
    explicit Evaluator(FreshSource &fresh) : fresh_(&fresh) {}

    // Reads a cell, following location-forwarding chains (copy cells store
    // bare locations). Bounded by the store's cell count.
    static std::optional<Value> read_value(const Store &store, Location l) {
        std::size_t budget = 1;
        for (const auto &[r, inner] : store.regions) budget += inner.cells.size();
        while (budget-- > 0) {
            const Value *v = store.find_cell(l);
            if (!v) return std::nullopt;
            if (const auto *lv = std::get_if<LocV>(&v->node)) {
                l = lv->loc;
                continue;
            }
            return *v;
        }
        return std::nullopt;
    }

    StepOutcome step(const TermRef &e, const Store &store) {
        if (const auto *loc = std::get_if<LocT>(&e->node)) return Done{loc->loc};
        if (const auto *var = std::get_if<VarT>(&e->node))
            return Stuck{{StuckInfo::Reason::FreeVariable, "free variable " + var->name,
                          Size::of(0), Size::of(0)},
                         e};
        return dispatch(e, store);
    }

    // Iterates step up to the fuel budget.
    struct EvalResult {
        enum class Tag : std::uint8_t { Done, Stuck, OutOfFuel };
        Tag tag = Tag::Done;
        std::optional<Location> loc;
        Store store;
        std::optional<StuckInfo> stuck;
        TermRef final_term;
        std::size_t steps = 0;
    };

    EvalResult evaluate(TermRef e, Store store, std::size_t fuel) {
        EvalResult out;
        for (std::size_t i = 0; i < fuel; ++i) {
            StepOutcome so = step(e, store);
            if (const auto *done = std::get_if<Done>(&so)) {
                out.tag = EvalResult::Tag::Done;
                out.loc = done->loc;
                out.store = std::move(store);
                out.final_term = e;
                out.steps = i;
                return out;
            }
            if (const auto *stuck = std::get_if<Stuck>(&so)) {
                out.tag = EvalResult::Tag::Stuck;
                out.stuck = stuck->info;
                out.store = std::move(store);
                out.final_term = e;
                out.steps = i;
                return out;
            }
            auto &st = std::get<Stepped>(so);
            e = st.term;
            store = std::move(st.store);
        }
        out.tag = EvalResult::Tag::OutOfFuel;
        out.store = std::move(store);
        out.final_term = e;
        out.steps = fuel;
        return out;
    }

    struct Snapshot {
        TermRef term;
        Store store;
        std::string rule;  // the rule that produced this configuration
    };

    // Every configuration, starting with the initial one (rule "init").
    struct TraceResult {
        std::vector<Snapshot> snapshots;
        EvalResult result;
    };

    TraceResult trace(TermRef e, Store store, std::size_t fuel) {
        TraceResult out;
        out.snapshots.push_back({e, store, "init"});
        for (std::size_t i = 0; i < fuel; ++i) {
            StepOutcome so = step(e, store);
            if (const auto *done = std::get_if<Done>(&so)) {
                out.result.tag = EvalResult::Tag::Done;
                out.result.loc = done->loc;
                out.result.store = std::move(store);
                out.result.final_term = e;
                out.result.steps = i;
                return out;
            }
            if (const auto *stuck = std::get_if<Stuck>(&so)) {
                out.result.tag = EvalResult::Tag::Stuck;
                out.result.stuck = stuck->info;
                out.result.store = std::move(store);
                out.result.final_term = e;
                out.result.steps = i;
                return out;
            }
            auto &st = std::get<Stepped>(so);
            e = st.term;
            store = std::move(st.store);
            out.snapshots.push_back({e, store, st.rule});
        }
        out.result.tag = EvalResult::Tag::OutOfFuel;
        out.result.store = std::move(store);
        out.result.final_term = e;
        out.result.steps = fuel;
        return out;
    }

  private:
    FreshSource *fresh_;

    static Stuck stuck(StuckInfo::Reason r, std::string detail, const TermRef &e) {
        return Stuck{{r, std::move(detail), Size::of(0), Size::of(0)}, e};
    }

    // Congruence: reduce `inner` one step and rebuild via `rebuild`.
    template <typename Rebuild>
    std::optional<StepOutcome> congruence(const TermRef &inner, const Store &store,
                                          const TermRef &whole, Rebuild rebuild) {
        if (term_is_location(inner)) return std::nullopt;  // already a value
        StepOutcome so = step(inner, store);
        if (const auto *st = std::get_if<Stepped>(&so))
            return StepOutcome{Stepped{rebuild(st->term), st->store, st->rule}};
        if (const auto *sk = std::get_if<Stuck>(&so)) return StepOutcome{Stuck{sk->info, whole}};
        // Done cannot happen: inner was not a location
        return StepOutcome{stuck(StuckInfo::Reason::FreeVariable, "inner value unreachable", whole)};
    }

    StepOutcome dispatch(const TermRef &e, const Store &store) {
        struct V {
            Evaluator &self;
            const TermRef &e;
            const Store &store;

            StepOutcome operator()(const VarT &n) const {
                return stuck(StuckInfo::Reason::FreeVariable, "free variable " + n.name, e);
            }
            StepOutcome operator()(const LocT &n) const { return Done{n.loc}; }

            StepOutcome operator()(const NewRgnT &n) const {
                Region rho = self.fresh_->fresh_region();
                Location l = self.fresh_->fresh_loc(rho);
                Store out = store;
                InnerStore inner;
                inner.max_size = n.size;
                inner.cells.emplace(l, val::unit());
                out.regions.emplace(rho, std::move(inner));
                return Stepped{tm::mk(LocT{l}, e->span), std::move(out), "e-newrgn"};
            }

            StepOutcome operator()(const FreeRgnT &n) const {
                if (auto c = self.congruence(n.handle, store, e, [&](TermRef t) {
                        return tm::mk(FreeRgnT{std::move(t)}, e->span);
                    }))
                    return *c;
                Location l = std::get<LocT>(n.handle->node).loc;
                if (l.region.is_global())
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "the global region cannot be freed", e);
                if (!store.find_region(l.region))
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "region " + l.region.str() + " is not in the store", e);
                Store out = store;
                out.regions.erase(l.region);
                return Stepped{tm::mk(LocT{Location::global_unit()}, e->span), std::move(out),
                               "e-freergnL"};
            }

            StepOutcome operator()(const SplitT &n) const {
                if (auto c = self.congruence(n.parent, store, e, [&](TermRef t) {
                        return tm::mk(SplitT{n.size, std::move(t)}, e->span);
                    }))
                    return *c;
                Location l = std::get<LocT>(n.parent->node).loc;
                const InnerStore *parent = store.find_region(l.region);
                if (!parent)
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "region " + l.region.str() + " is not in the store", e);
                Region child = self.fresh_->fresh_region();
                Location lc = self.fresh_->fresh_loc(child);
                Store out = store;
                out.find_region(l.region)->max_size = monus(parent->max_size, n.size);
                InnerStore inner;
                inner.max_size = n.size;
                inner.cells.emplace(lc, val::unit());
                out.regions.emplace(child, std::move(inner));
                return Stepped{tm::mk(LocT{lc}, e->span), std::move(out), "e-splitL"};
            }

            StepOutcome operator()(const CopyT &n) const {
                if (auto c = self.congruence(n.src, store, e, [&](TermRef t) {
                        return tm::mk(CopyT{std::move(t), n.dst}, e->span);
                    }))
                    return *c;
                if (auto c = self.congruence(n.dst, store, e, [&](TermRef t) {
                        return tm::mk(CopyT{n.src, std::move(t)}, e->span);
                    }))
                    return *c;
                Location src = std::get<LocT>(n.src->node).loc;
                Location dst = std::get<LocT>(n.dst->node).loc;
                if (!store.find_region(src.region))
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "source region " + src.region.str() + " is not in the store", e);
                if (!store.find_cell(src))
                    return stuck(StuckInfo::Reason::MissingLocation,
                                 "source location " + src.str() + " is not in the store", e);
                InnerStore *dinner = nullptr;
                Store out = store;
                dinner = out.find_region(dst.region);
                if (!dinner)
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "destination region " + dst.region.str() + " is not in the store",
                                 e);
                Location fresh_l = self.fresh_->fresh_loc(dst.region);
                dinner->cells.emplace(fresh_l, val::loc(src));
                return Stepped{tm::mk(LocT{fresh_l}, e->span), std::move(out), "e-copyL"};
            }

            StepOutcome operator()(const AllocT &n) const {
                if (auto c = self.congruence(n.into, store, e, [&](TermRef t) {
                        return tm::mk(AllocT{n.value, n.size, std::move(t)}, e->span);
                    }))
                    return *c;
                Location l = std::get<LocT>(n.into->node).loc;
                if (!store.find_region(l.region))
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "region " + l.region.str() + " is not in the store", e);
                Size actual = size_of_value(n.value);
                if (!size_leq(actual, n.size))
                    return Stuck{{StuckInfo::Reason::AnnotationTooSmall,
                                  "value of size " + actual.str() + " annotated [" +
                                      n.size.str() + "]",
                                  actual, n.size},
                                 e};
                Store out = store;
                Location fresh_l = self.fresh_->fresh_loc(l.region);
                out.find_region(l.region)->cells.emplace(fresh_l, n.value);
                return Stepped{tm::mk(LocT{fresh_l}, e->span), std::move(out), "e-valL"};
            }

            StepOutcome operator()(const AppT &n) const {
                if (auto c = self.congruence(n.fn, store, e, [&](TermRef t) {
                        return tm::mk(AppT{std::move(t), n.arg}, e->span);
                    }))
                    return *c;
                if (auto c = self.congruence(n.arg, store, e, [&](TermRef t) {
                        return tm::mk(AppT{n.fn, std::move(t)}, e->span);
                    }))
                    return *c;
                Location lf = std::get<LocT>(n.fn->node).loc;
                Location la = std::get<LocT>(n.arg->node).loc;
                auto v = read_value(store, lf);
                if (!v)
                    return stuck(StuckInfo::Reason::MissingLocation,
                                 "function location " + lf.str() + " is unreadable", e);
                if (const auto *lam = std::get_if<LamV>(&v->node)) {
                    TermRef body = substitute_term(lam->body, lam->var, val::loc(la));
                    return Stepped{body, store, "e-appL"};
                }
                // a polymorphic function: its type/region/effect binders are
                // static-only, application enters the inner lambda directly
                if (const auto *bl = std::get_if<BigLamV>(&v->node)) {
                    TermRef body = substitute_term(bl->body, bl->var, val::loc(la));
                    return Stepped{body, store, "e-appL"};
                }
                return stuck(StuckInfo::Reason::NotAFunctionValue,
                             "application of a non-function value", e);
            }

            StepOutcome operator()(const RefMkT &n) const {
                if (auto c = self.congruence(n.init, store, e, [&](TermRef t) {
                        return tm::mk(RefMkT{std::move(t)}, e->span);
                    }))
                    return *c;
                Location l = std::get<LocT>(n.init->node).loc;
                Store out = store;
                InnerStore *inner = out.find_region(l.region);
                if (!inner)
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "region " + l.region.str() + " is not in the store", e);
                Location fresh_l = self.fresh_->fresh_loc(l.region);
                inner->cells.emplace(fresh_l, val::loc(l));
                return Stepped{tm::mk(LocT{fresh_l}, e->span), std::move(out), "e-refL"};
            }

            StepOutcome operator()(const DerefT &n) const {
                if (auto c = self.congruence(n.ref, store, e, [&](TermRef t) {
                        return tm::mk(DerefT{std::move(t)}, e->span);
                    }))
                    return *c;
                Location l = std::get<LocT>(n.ref->node).loc;
                if (!store.find_region(l.region))
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "region " + l.region.str() + " is not in the store", e);
                const Value *cell = store.find_cell(l);
                if (!cell)
                    return stuck(StuckInfo::Reason::MissingLocation,
                                 "location " + l.str() + " is not in the store", e);
                const auto *lv = std::get_if<LocV>(&cell->node);
                if (!lv)
                    return stuck(StuckInfo::Reason::MissingLocation,
                                 "cell " + l.str() + " does not hold a location", e);
                return Stepped{tm::mk(LocT{lv->loc}, e->span), store, "e-derefL"};
            }

            StepOutcome operator()(const AssignT &n) const {
                if (auto c = self.congruence(n.target, store, e, [&](TermRef t) {
                        return tm::mk(AssignT{std::move(t), n.value}, e->span);
                    }))
                    return *c;
                if (auto c = self.congruence(n.value, store, e, [&](TermRef t) {
                        return tm::mk(AssignT{n.target, std::move(t)}, e->span);
                    }))
                    return *c;
                Location lt = std::get<LocT>(n.target->node).loc;
                Location lv = std::get<LocT>(n.value->node).loc;
                Store out = store;
                InnerStore *inner = out.find_region(lt.region);
                if (!inner)
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "region " + lt.region.str() + " is not in the store", e);
                auto it = inner->cells.find(lt);
                if (it == inner->cells.end())
                    return stuck(StuckInfo::Reason::MissingLocation,
                                 "location " + lt.str() + " is not in the store", e);
                it->second = val::loc(lv);
                return Stepped{tm::mk(LocT{Location::global_unit()}, e->span), std::move(out),
                               "e-assignL"};
            }

            StepOutcome operator()(const SeqT &n) const {
                if (auto c = self.congruence(n.first, store, e, [&](TermRef t) {
                        return tm::mk(SeqT{std::move(t), n.rest}, e->span);
                    }))
                    return *c;
                return Stepped{n.rest, store, "e-seqNext"};
            }

            StepOutcome operator()(const IfT &n) const {
                if (auto c = self.congruence(n.cond, store, e, [&](TermRef t) {
                        return tm::mk(IfT{std::move(t), n.then_branch, n.else_branch}, e->span);
                    }))
                    return *c;
                Location l = std::get<LocT>(n.cond->node).loc;
                auto v = read_value(store, l);
                if (!v)
                    return stuck(StuckInfo::Reason::MissingLocation,
                                 "condition location " + l.str() + " is unreadable", e);
                if (std::holds_alternative<TrueV>(v->node))
                    return Stepped{n.then_branch, store, "e-ifTrue"};
                if (std::holds_alternative<FalseV>(v->node))
                    return Stepped{n.else_branch, store, "e-ifFalse"};
                return stuck(StuckInfo::Reason::NotABool, "condition is not a boolean", e);
            }

            StepOutcome operator()(const LetT &n) const {
                if (auto c = self.congruence(n.bound, store, e, [&](TermRef t) {
                        return tm::mk(LetT{n.var, std::move(t), n.body}, e->span);
                    }))
                    return *c;
                Location l = std::get<LocT>(n.bound->node).loc;
                TermRef body = substitute_term(n.body, n.var, val::loc(l));
                return Stepped{body, store, "e-letL"};
            }

            StepOutcome operator()(const TyAppT &n) const {
                // purely static construct
                return Stepped{n.fn, store, "e-bigApp"};
            }

            StepOutcome operator()(const FixT &n) const {
                const auto *alloc = std::get_if<AllocT>(&n.alloc->node);
                if (!alloc)
                    return stuck(StuckInfo::Reason::NotAFunctionValue,
                                 "malformed recursive definition", e);
                if (auto c = self.congruence(alloc->into, store, e, [&](TermRef t) {
                        TermRef inner =
                            tm::mk(AllocT{alloc->value, alloc->size, std::move(t)}, n.alloc->span);
                        return tm::mk(FixT{n.f, std::move(inner), n.body}, e->span);
                    }))
                    return *c;
                Location target = std::get<LocT>(alloc->into->node).loc;
                if (!store.find_region(target.region))
                    return stuck(StuckInfo::Reason::MissingRegion,
                                 "region " + target.region.str() + " is not in the store", e);
                const auto *bl = std::get_if<BigLamV>(&alloc->value.node);
                if (!bl)
                    return stuck(StuckInfo::Reason::NotAFunctionValue,
                                 "recursive definition is not a polymorphic function", e);
                // allocate the function and tie the recursive knot through
                // its own cell
                Location self_loc = self.fresh_->fresh_loc(target.region);
                TermRef tied_body = substitute_term(bl->body, n.f, val::loc(self_loc));
                Value tied =
                    val::biglam(bl->tyvar, bl->regionvar, bl->effvar, bl->var, tied_body);
                Size actual = size_of_stored(self_loc, tied);
                if (!size_leq(actual, alloc->size))
                    return Stuck{{StuckInfo::Reason::AnnotationTooSmall,
                                  "function of size " + actual.str() + " annotated [" +
                                      alloc->size.str() + "]",
                                  actual, alloc->size},
                                 e};
                Store out = store;
                out.find_region(target.region)->cells.emplace(self_loc, std::move(tied));
                TermRef rest = substitute_term(n.body, n.f, val::loc(self_loc));
                return Stepped{rest, std::move(out), "e-fixL"};
            }

            StepOutcome operator()(const BinOpT &n) const {
                if (auto c = self.congruence(n.lhs, store, e, [&](TermRef t) {
                        return tm::mk(BinOpT{n.op, std::move(t), n.rhs}, e->span);
                    }))
                    return *c;
                if (auto c = self.congruence(n.rhs, store, e, [&](TermRef t) {
                        return tm::mk(BinOpT{n.op, n.lhs, std::move(t)}, e->span);
                    }))
                    return *c;
                Location ll = std::get<LocT>(n.lhs->node).loc;
                Location lr = std::get<LocT>(n.rhs->node).loc;
                auto lv = read_value(store, ll);
                auto rv = read_value(store, lr);
                if (!lv || !rv)
                    return stuck(StuckInfo::Reason::MissingLocation,
                                 "binop operand is unreadable", e);
                const auto *li = std::get_if<IntV>(&lv->node);
                const auto *ri = std::get_if<IntV>(&rv->node);
                if (!li || !ri)
                    return stuck(StuckInfo::Reason::NotABool, "binop operand is not an integer",
                                 e);
                Value result;
                switch (n.op) {
                    case BinOp::Add: result = val::int_(li->n + ri->n); break;
                    case BinOp::Sub: result = val::int_(li->n - ri->n); break;
                    case BinOp::Eq: result = li->n == ri->n ? val::true_() : val::false_(); break;
                    case BinOp::Gt: result = li->n > ri->n ? val::true_() : val::false_(); break;
                }
                Store out = store;
                InnerStore *inner = out.find_region(Region::global());
                Location fresh_l = self.fresh_->fresh_loc(Region::global());
                inner->cells.emplace(fresh_l, std::move(result));
                return Stepped{tm::mk(LocT{fresh_l}, e->span), std::move(out), "e-binopL"};
            }
        };
        return std::visit(V{*this, e, store}, e->node);
    }
};

}  // namespace spegion
