#pragma once

// Desk-scale metatheory: progress and preservation run as oracles over
// enumerated and generated programs, plus the store-size audit over traces.

#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "spegion/evaluator.hpp"
#include "spegion/parser.hpp"
#include "spegion/printer.hpp"
#include "spegion/type_checker.hpp"

namespace spegion {

// ---------------------------------------------------------------------------
// Free term variables (used to keep enumerated/shrunk terms closed).
// ---------------------------------------------------------------------------

namespace harness_detail {

inline void free_vars(const TermRef &e, std::set<std::string> &bound, std::set<std::string> &out);

inline void free_vars_value(const Value &v, std::set<std::string> &bound,
                            std::set<std::string> &out) {
    if (const auto *lam = std::get_if<LamV>(&v.node)) {
        std::set<std::string> b = bound;
        b.insert(lam->var);
        free_vars(lam->body, b, out);
    } else if (const auto *bl = std::get_if<BigLamV>(&v.node)) {
        std::set<std::string> b = bound;
        b.insert(bl->var);
        free_vars(bl->body, b, out);
    }
}

inline void free_vars(const TermRef &e, std::set<std::string> &bound, std::set<std::string> &out) {
    if (const auto *v = std::get_if<VarT>(&e->node)) {
        if (!bound.count(v->name)) out.insert(v->name);
        return;
    }
    if (const auto *n = std::get_if<AllocT>(&e->node)) {
        free_vars_value(n->value, bound, out);
        free_vars(n->into, bound, out);
        return;
    }
    if (const auto *n = std::get_if<AppT>(&e->node)) {
        free_vars(n->fn, bound, out);
        free_vars(n->arg, bound, out);
        return;
    }
    if (const auto *n = std::get_if<RefMkT>(&e->node)) return free_vars(n->init, bound, out);
    if (const auto *n = std::get_if<DerefT>(&e->node)) return free_vars(n->ref, bound, out);
    if (const auto *n = std::get_if<AssignT>(&e->node)) {
        free_vars(n->target, bound, out);
        free_vars(n->value, bound, out);
        return;
    }
    if (const auto *n = std::get_if<SeqT>(&e->node)) {
        free_vars(n->first, bound, out);
        free_vars(n->rest, bound, out);
        return;
    }
    if (const auto *n = std::get_if<IfT>(&e->node)) {
        free_vars(n->cond, bound, out);
        free_vars(n->then_branch, bound, out);
        free_vars(n->else_branch, bound, out);
        return;
    }
    if (const auto *n = std::get_if<LetT>(&e->node)) {
        free_vars(n->bound, bound, out);
        std::set<std::string> b = bound;
        b.insert(n->var);
        free_vars(n->body, b, out);
        return;
    }
    if (const auto *n = std::get_if<TyAppT>(&e->node)) return free_vars(n->fn, bound, out);
    if (const auto *n = std::get_if<FixT>(&e->node)) {
        std::set<std::string> b = bound;
        b.insert(n->f);
        free_vars(n->alloc, b, out);
        free_vars(n->body, b, out);
        return;
    }
    if (const auto *n = std::get_if<FreeRgnT>(&e->node)) return free_vars(n->handle, bound, out);
    if (const auto *n = std::get_if<SplitT>(&e->node)) return free_vars(n->parent, bound, out);
    if (const auto *n = std::get_if<CopyT>(&e->node)) {
        free_vars(n->src, bound, out);
        free_vars(n->dst, bound, out);
        return;
    }
    if (const auto *n = std::get_if<BinOpT>(&e->node)) {
        free_vars(n->lhs, bound, out);
        free_vars(n->rhs, bound, out);
        return;
    }
}

inline bool is_closed(const TermRef &e) {
    std::set<std::string> bound, out;
    free_vars(e, bound, out);
    return out.empty();
}

}  // namespace harness_detail

// ---------------------------------------------------------------------------
// Trace checking: progress, preservation and the store audit in one sweep.
// ---------------------------------------------------------------------------

struct Counterexample {
    std::string phase;   // progress | preservation-retype | preservation-type |
                         // preservation-effect | store | store-typing
    std::string term;    // the configuration that failed
    std::string detail;
    long long seed = -1;
};

struct TraceVerdict {
    bool typed = false;           // the initial program was accepted
    bool completed = false;       // ran to a value within the budget
    std::size_t steps = 0;
    std::optional<Counterexample> counterexample;
};

class SoundnessHarness {
  public:
    std::size_t fuel = 3000;

    // Runs the whole pipeline on one closed program: type it, then step it to
    // the end, re-typing and re-checking the store after every step.
    TraceVerdict check_term(const TermRef &program) { return check_term_bounded(program, fuel); }

    TraceVerdict check_term_bounded(const TermRef &program, std::size_t budget) {
        TraceVerdict verdict;
        FreshSource fresh;
        Checker checker(fresh);
        CheckResult cr = checker.check_program(program);
        if (!check_ok(cr)) return verdict;  // no obligations for rejected programs
        verdict.typed = true;

        Evaluator ev(fresh);
        Store store = Store::initial();
        StoreTyping sigma;  // starts with the global unit
        TermRef cur = program;
        TypeWithPlace cur_type = check_judgement(cr).type;
        EffectRef cur_effect = check_judgement(cr).effect;

        for (std::size_t i = 0; i < budget; ++i) {
            // the store invariant must hold at every observable configuration
            {
                Checker store_checker(fresh);
                store_checker.sigma = sigma;
                if (auto err = store_checker.check_store(store)) {
                    verdict.counterexample = Counterexample{
                        "store", print_term(cur),
                        "region " + err->region.str() + ": " + err->reason};
                    return verdict;
                }
            }

            if (term_is_location(cur)) {
                verdict.completed = true;
                verdict.steps = i;
                return verdict;
            }

            StepOutcome so = ev.step(cur, store);
            if (const auto *stuck = std::get_if<Stuck>(&so)) {
                verdict.counterexample =
                    Counterexample{"progress", print_term(cur),
                                   std::string(stuck->info.reason_name()) + ": " +
                                       stuck->info.detail};
                return verdict;
            }
            if (std::holds_alternative<Done>(so)) {
                verdict.completed = true;
                verdict.steps = i;
                return verdict;
            }
            const auto &st = std::get<Stepped>(so);

            // extend the store typing with the newly allocated locations
            if (!extend_sigma(sigma, st.store, fresh, st.rule)) {
                verdict.counterexample = Counterexample{
                    "store-typing", print_term(st.term),
                    "could not reconstruct types for freshly allocated locations"};
                return verdict;
            }

            // re-type the result under the extended store typing
            Checker re(fresh);
            re.sigma = sigma;
            LivenessEnv live;
            for (const auto &[rho, inner] : st.store.regions) live.add(rho, inner.max_size);
            CheckResult cr2 = re.type_of_expr(KindContext{}, TermContext{}, st.term, live);
            if (!check_ok(cr2)) {
                verdict.counterexample = Counterexample{
                    "preservation-retype", print_term(st.term),
                    "[" + check_error(cr2).rule + "] " + check_error(cr2).message};
                return verdict;
            }
            const TypeJudgement &j2 = check_judgement(cr2);
            if (!type_alpha_eq(j2.type, cur_type)) {
                verdict.counterexample = Counterexample{
                    "preservation-type", print_term(st.term),
                    print_place(j2.type) + " after the step vs " + print_place(cur_type)};
                return verdict;
            }
            if (!subsumes_upto_minting(j2.effect, cur_effect)) {
                verdict.counterexample = Counterexample{
                    "preservation-effect", print_term(st.term),
                    print_effect(j2.effect) + " does not subsume into " +
                        print_effect(cur_effect)};
                return verdict;
            }

            cur = st.term;
            store = st.store;
            cur_type = j2.type;
            cur_effect = j2.effect;
        }
        verdict.steps = budget;
        return verdict;  // out of fuel: no counterexample, just incomplete
    }

    // Single-step progress: a well-typed closed configuration is a value or
    // can step; a stuck outcome is a counterexample.
    std::optional<Counterexample> check_progress(const TermRef &e, const Store &store,
                                                 FreshSource &fresh) {
        if (term_is_location(e)) return std::nullopt;  // a value
        Evaluator ev(fresh);
        StepOutcome so = ev.step(e, store);
        if (const auto *stuck = std::get_if<Stuck>(&so))
            return Counterexample{"progress", print_term(e),
                                  std::string(stuck->info.reason_name()) + ": " +
                                      stuck->info.detail};
        return std::nullopt;
    }

    // Single-step preservation: after one step the term re-types at the same
    // type-with-place (up to minted-region renaming), its effect subsumes
    // into the pre-step effect, and the store stays well-typed.
    std::optional<Counterexample> check_preservation(const TermRef &e) {
        TraceVerdict v = check_term_bounded(e, 1);
        return v.counterexample;
    }

    // The store audit alone (criterion: every snapshot within bounds, split
    // conservation on split steps).
    std::optional<Counterexample> audit_store_invariant(const Evaluator::TraceResult &trace) {
        for (std::size_t i = 0; i < trace.snapshots.size(); ++i) {
            const auto &snap = trace.snapshots[i];
            const InnerStore *glob = snap.store.find_region(Region::global());
            if (!glob || !glob->cells.count(Location::global_unit()))
                return Counterexample{"store", print_term(snap.term),
                                      "the global region or its unit vanished at snapshot " +
                                          std::to_string(i)};
            for (const auto &[rho, inner] : snap.store.regions) {
                if (!size_leq(current_size(inner), inner.max_size))
                    return Counterexample{
                        "store", print_term(snap.term),
                        "region " + rho.str() + " holds " + current_size(inner).str() +
                            " of " + inner.max_size.str() + " at snapshot " + std::to_string(i)};
            }
            if (i == 0 || snap.rule != "e-splitL") continue;
            const Store &before = trace.snapshots[i - 1].store;
            const Store &after = snap.store;
            // find the minted child and the shrunk parent
            for (const auto &[rho, inner] : after.regions) {
                if (before.regions.count(rho)) continue;
                const Size &child_max = inner.max_size;
                for (const auto &[p, pin] : after.regions) {
                    auto it = before.regions.find(p);
                    if (it == before.regions.end()) continue;
                    if (it->second.max_size == pin.max_size) continue;
                    if (it->second.max_size.is_omega()) {
                        if (!pin.max_size.is_omega())
                            return Counterexample{"store", print_term(snap.term),
                                                  "unbounded parent shrank on split"};
                        continue;
                    }
                    if (!(size_add(pin.max_size, child_max) == it->second.max_size))
                        return Counterexample{
                            "store", print_term(snap.term),
                            "split conservation broken at snapshot " + std::to_string(i)};
                }
            }
        }
        return std::nullopt;
    }

  private:
    // Types every location the evaluation allocated since the last step.
    // Self-referential closures (recursive definitions) are untied and typed
    // through the recursive-definition machinery.
    bool extend_sigma(StoreTyping &sigma, const Store &store, FreshSource &fresh,
                      const std::string &rule) {
        LivenessEnv live;
        for (const auto &[r2, in2] : store.regions) live.add(r2, in2.max_size);
        // a reference cell stores the location of its content but is typed at
        // Ref of the content's type
        if (rule == "e-refL") {
            for (const auto &[rho, inner] : store.regions) {
                for (const auto &[l, v] : inner.cells) {
                    if (sigma.lookup(l)) continue;
                    const auto *lv = std::get_if<LocV>(&v.node);
                    if (!lv) continue;
                    const TypeRef *pointee = sigma.lookup(lv->loc);
                    if (pointee) sigma.bind(l, ty::ref(*pointee));
                }
            }
        }
        bool progress = true;
        while (progress) {
            progress = false;
            for (const auto &[rho, inner] : store.regions) {
                for (const auto &[l, v] : inner.cells) {
                    if (sigma.lookup(l)) continue;
                    Checker c(fresh);
                    c.sigma = sigma;
                    ValueResult vr = c.type_of_stored(l, v, live);
                    if (std::holds_alternative<TypeRef>(vr)) {
                        sigma.bind(l, std::get<TypeRef>(vr));
                        progress = true;
                    }
                }
            }
        }
        for (const auto &[rho, inner] : store.regions)
            for (const auto &[l, v] : inner.cells)
                if (!sigma.lookup(l)) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Exhaustive enumeration of closed terms to a height bound, over a fixed
// small vocabulary (sizes {1, 2, w}, two variables, every constructor). A
// syntactic prefilter skips only terms a cheap type-shape analysis proves
// ill-typed; its soundness is asserted by sampling in the tests.
// ---------------------------------------------------------------------------

class TermEnumerator {
  public:
    // type shapes for the prefilter
    enum Shape : unsigned {
        S_INT = 1u << 0,
        S_UNIT = 1u << 1,
        S_BOOL = 1u << 2,
        S_REF = 1u << 3,
        S_FN = 1u << 4,
        S_ANY = 0x1F,
    };

    static unsigned value_shape(const Value &v) {
        if (std::holds_alternative<IntV>(v.node)) return S_INT;
        if (std::holds_alternative<TrueV>(v.node) || std::holds_alternative<FalseV>(v.node))
            return S_BOOL;
        if (std::holds_alternative<UnitV>(v.node)) return S_UNIT;
        if (std::holds_alternative<LamV>(v.node)) return S_FN;
        if (std::holds_alternative<BigLamV>(v.node)) return S_FN;
        return S_ANY;
    }

    static unsigned shape(const TermRef &e) {
        if (std::holds_alternative<VarT>(e->node)) return S_ANY;
        if (std::holds_alternative<LocT>(e->node)) return S_UNIT;  // only the global unit occurs
        if (const auto *n = std::get_if<AllocT>(&e->node)) return value_shape(n->value);
        if (std::holds_alternative<AppT>(e->node)) return S_ANY;
        if (std::holds_alternative<RefMkT>(e->node)) return S_REF;
        if (std::holds_alternative<DerefT>(e->node)) return S_ANY;
        if (std::holds_alternative<AssignT>(e->node)) return S_UNIT;
        if (const auto *n = std::get_if<SeqT>(&e->node)) return shape(n->rest);
        if (const auto *n = std::get_if<IfT>(&e->node))
            return shape(n->then_branch) | shape(n->else_branch);
        if (const auto *n = std::get_if<LetT>(&e->node)) return shape(n->body);
        if (std::holds_alternative<TyAppT>(e->node)) return S_FN;
        if (const auto *n = std::get_if<FixT>(&e->node)) return shape(n->body);
        if (std::holds_alternative<NewRgnT>(e->node)) return S_UNIT;
        if (std::holds_alternative<FreeRgnT>(e->node)) return S_UNIT;
        if (std::holds_alternative<SplitT>(e->node)) return S_UNIT;
        if (const auto *n = std::get_if<CopyT>(&e->node)) return shape(n->src);
        if (const auto *n = std::get_if<BinOpT>(&e->node))
            return (n->op == BinOp::Eq || n->op == BinOp::Gt) ? S_BOOL : S_INT;
        return S_ANY;
    }

    // closed terms of height <= depth, deduplicated up to alpha
    std::vector<TermRef> enumerate(int depth) {
        std::vector<TermRef> layer = atoms();
        if (depth <= 1) return layer;
        for (int d = 2; d <= depth; ++d) layer = extend(layer);
        return layer;
    }

  private:
    std::vector<Size> sizes_ = {Size::of(1), Size::of(2), Size::omega()};

    std::vector<TermRef> atoms() const {
        return {tm::loc(Location::global_unit()), tm::newrgn(Size::of(1)),
                tm::newrgn(Size::of(2)), tm::newrgn(Size::omega())};
    }

    std::vector<Value> payloads(const std::vector<TermRef> &smaller) const {
        std::vector<Value> out = {val::unit(), val::int_(0), val::true_()};
        // lambdas over the previous layer, plus the identity
        out.push_back(val::lam("x", tm::var("x")));
        for (const auto &body : smaller)
            if (harness_detail::is_closed(body)) out.push_back(val::lam("x", body));
        return out;
    }

    std::vector<TermRef> extend(const std::vector<TermRef> &prev) const {
        std::vector<TermRef> out;
        std::set<std::string> seen;
        auto push = [&](const TermRef &t) {
            std::string key = print_term(t);
            if (seen.insert(key).second) out.push_back(t);
        };
        for (const auto &t : prev) push(t);

        for (const auto &a : prev) {
            push(tm::freergn(a));
            push(tm::ref(a));
            push(tm::deref(a));
            for (const auto &s : sizes_) push(tm::split(s, a));
        }
        for (const auto &v : payloads(prev))
            for (const auto &s : sizes_)
                for (const auto &a : prev) push(tm::alloc(v, s, a));
        for (const auto &a : prev) {
            for (const auto &b : prev) {
                if ((shape(a) & (S_FN)) != 0) push(tm::app(a, b));
                if ((shape(a) & S_UNIT) != 0) push(tm::seq(a, b));
                if ((shape(a) & S_REF) != 0) push(tm::assign(a, b));
                push(tm::copy(a, b));
                if ((shape(a) & S_INT) && (shape(b) & S_INT)) {
                    push(tm::binop(BinOp::Add, a, b));
                    push(tm::binop(BinOp::Gt, a, b));
                }
            }
        }
        for (const auto &c : prev) {
            if ((shape(c) & S_BOOL) == 0) continue;
            for (const auto &t : prev)
                for (const auto &f : prev)
                    if (shape(t) & shape(f)) push(tm::if_(c, t, f));
        }
        for (const auto &bound : prev) {
            push(tm::let("x", bound, tm::var("x")));
            for (const auto &body : prev) push(tm::let("x", bound, body));
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Seeded generator of region-heavy programs (region constructs weighted up).
// Programs are built against a simple capacity model, so most are accepted;
// regenerating with the same seed is bit-identical.
// ---------------------------------------------------------------------------

struct GeneratedProgram {
    TermRef term;
    unsigned seed = 0;
};

class ProgramGenerator {
  public:
    GeneratedProgram generate(unsigned seed) {
        rng_.seed(seed);
        vars_.clear();
        next_ = 0;
        TermRef t = gen_block(5 + static_cast<int>(rng_() % 4));
        return GeneratedProgram{t, seed};
    }

  private:
    struct VarInfo {
        std::string name;
        enum Kind { RegionHandle, IntCell, RefCell } kind;
        std::uint64_t remaining = 0;  // RegionHandle: capacity still free
        bool unbounded = false;
        bool live = true;
    };

    std::mt19937 rng_;
    std::vector<VarInfo> vars_;
    int next_ = 0;

    std::string fresh_name() { return "g" + std::to_string(next_++); }

    // index into vars_; pointers would dangle across push_back
    std::optional<std::size_t> pick_live_region(std::uint64_t need) {
        std::vector<std::size_t> options;
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            const VarInfo &v = vars_[i];
            if (v.kind == VarInfo::RegionHandle && v.live &&
                (v.unbounded || v.remaining >= need))
                options.push_back(i);
        }
        if (options.empty()) return std::nullopt;
        return options[rng_() % options.size()];
    }

    void charge(std::size_t idx, std::uint64_t amount) {
        if (!vars_[idx].unbounded) vars_[idx].remaining -= amount;
    }

    // one let-bound statement; returns nullopt when no statement applies
    std::optional<std::pair<std::string, TermRef>> gen_stmt() {
        // region constructs weighted three-to-one over pure terms
        int roll = static_cast<int>(rng_() % 12);
        switch (roll) {
            case 0:
            case 1:
            case 2: {  // newrgn
                bool unbounded = rng_() % 4 == 0;
                std::uint64_t cap = 2 + rng_() % 5;
                std::string x = fresh_name();
                VarInfo info{x, VarInfo::RegionHandle, unbounded ? 0 : cap - 1, unbounded, true};
                vars_.push_back(info);
                return std::make_pair(x, tm::newrgn(unbounded ? Size::omega() : Size::of(cap)));
            }
            case 3:
            case 4: {  // allocate an integer into a live region
                auto r = pick_live_region(1);
                if (!r) return std::nullopt;
                charge(*r, 1);
                std::string rname = vars_[*r].name;
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::IntCell, 0, false, true});
                return std::make_pair(
                    x, tm::alloc(val::int_(static_cast<long long>(rng_() % 50)), Size::of(1),
                                 tm::var(rname)));
            }
            case 5: {  // a reference to a freshly allocated integer
                auto r = pick_live_region(2);
                if (!r) return std::nullopt;
                charge(*r, 2);
                std::string rname = vars_[*r].name;
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::RefCell, 0, false, true});
                return std::make_pair(
                    x, tm::ref(tm::alloc(val::int_(1), Size::of(1), tm::var(rname))));
            }
            case 6: {  // split a sub-region off a bounded live region
                auto r = pick_live_region(2);
                if (!r || vars_[*r].unbounded) return std::nullopt;
                std::uint64_t rem = vars_[*r].remaining;
                std::uint64_t part = 1 + rng_() % std::max<std::uint64_t>(1, rem - 1);
                if (part >= rem) return std::nullopt;
                charge(*r, part);
                std::string rname = vars_[*r].name;
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::RegionHandle, part - 1, false, true});
                return std::make_pair(x, tm::split(Size::of(part), tm::var(rname)));
            }
            case 7: {  // free a region (and retire everything in it)
                std::vector<std::size_t> regions;
                for (std::size_t i = 0; i < vars_.size(); ++i)
                    if (vars_[i].kind == VarInfo::RegionHandle && vars_[i].live)
                        regions.push_back(i);
                if (regions.empty()) return std::nullopt;
                std::size_t r = regions[rng_() % regions.size()];
                vars_[r].live = false;
                std::string rname = vars_[r].name;
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::IntCell, 0, false, false});  // unit, unusable
                return std::make_pair(x, tm::freergn(tm::var(rname)));
            }
            case 8: {  // copy the global unit into a region
                auto r = pick_live_region(1);
                if (!r) return std::nullopt;
                charge(*r, 1);
                std::string rname = vars_[*r].name;
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::IntCell, 0, false, false});
                return std::make_pair(
                    x, tm::copy(tm::loc(Location::global_unit()), tm::var(rname)));
            }
            case 9: {  // arithmetic on a fresh global integer
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::IntCell, 0, false, true});
                TermRef lhs = tm::alloc(val::int_(static_cast<long long>(rng_() % 9)),
                                        Size::of(1), tm::loc(Location::global_unit()));
                TermRef rhs = tm::alloc(val::int_(1), Size::of(1),
                                        tm::loc(Location::global_unit()));
                return std::make_pair(x, tm::binop(rng_() % 2 ? BinOp::Add : BinOp::Sub,
                                                   lhs, rhs));
            }
            case 10: {  // a conditional allocating in either branch
                auto r = pick_live_region(1);
                if (!r) return std::nullopt;
                charge(*r, 1);
                std::string rname = vars_[*r].name;
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::IntCell, 0, false, true});
                TermRef cond = tm::alloc(rng_() % 2 ? val::true_() : val::false_(), Size::of(1),
                                         tm::loc(Location::global_unit()));
                TermRef a = tm::alloc(val::int_(1), Size::of(1), tm::var(rname));
                TermRef b = tm::alloc(val::int_(2), Size::of(1), tm::var(rname));
                return std::make_pair(x, tm::if_(cond, a, b));
            }
            default: {  // a small recursive countdown through the global region
                std::string f = fresh_name();
                std::string n = fresh_name();
                std::string a = fresh_name(), rv = fresh_name(), ev = fresh_name();
                TermRef glob = tm::loc(Location::global_unit());
                TermRef base = tm::alloc(val::int_(0), Size::of(1), glob);
                TermRef cond = tm::binop(BinOp::Eq, tm::var(n),
                                         tm::alloc(val::int_(0), Size::of(1), glob));
                SurfaceTypeWithPlace annot{sty::int_(),
                                           SurfaceRegion{SurfaceRegion::Kind::Glob, ""}};
                TermRef recur = tm::app(
                    tm::tyapp(tm::var(f), annot),
                    tm::binop(BinOp::Sub, tm::var(n),
                              tm::alloc(val::int_(1), Size::of(1), glob)));
                TermRef body = tm::if_(cond, base, recur);
                TermRef alloc = tm::alloc(val::biglam(a, rv, ev, n, body), Size::of(1), glob);
                long long start = static_cast<long long>(rng_() % 4);
                TermRef call = tm::app(tm::tyapp(tm::var(f), annot),
                                       tm::alloc(val::int_(start), Size::of(1), glob));
                std::string x = fresh_name();
                vars_.push_back({x, VarInfo::IntCell, 0, false, true});
                return std::make_pair(x, tm::fix(f, alloc, call));
            }
        }
    }

    TermRef gen_block(int statements) {
        std::vector<std::pair<std::string, TermRef>> stmts;
        for (int i = 0; i < statements; ++i) {
            auto s = gen_stmt();
            if (s) stmts.push_back(*s);
        }
        // final expression: an integer in the global region
        TermRef tail = tm::alloc(val::int_(0), Size::of(1), tm::loc(Location::global_unit()));
        for (auto it = stmts.rbegin(); it != stmts.rend(); ++it)
            tail = tm::let(it->first, it->second, tail);
        return tail;
    }
};

// ---------------------------------------------------------------------------
// Greedy counterexample shrinking: replace the failing program by any closed
// proper subterm that still fails, repeatedly.
// ---------------------------------------------------------------------------

namespace harness_detail {

inline void proper_subterms(const TermRef &e, std::vector<TermRef> &out) {
    auto add = [&](const TermRef &t) {
        out.push_back(t);
        proper_subterms(t, out);
    };
    if (const auto *n = std::get_if<AllocT>(&e->node)) add(n->into);
    if (const auto *n = std::get_if<AppT>(&e->node)) {
        add(n->fn);
        add(n->arg);
    }
    if (const auto *n = std::get_if<RefMkT>(&e->node)) add(n->init);
    if (const auto *n = std::get_if<DerefT>(&e->node)) add(n->ref);
    if (const auto *n = std::get_if<AssignT>(&e->node)) {
        add(n->target);
        add(n->value);
    }
    if (const auto *n = std::get_if<SeqT>(&e->node)) {
        add(n->first);
        add(n->rest);
    }
    if (const auto *n = std::get_if<IfT>(&e->node)) {
        add(n->cond);
        add(n->then_branch);
        add(n->else_branch);
    }
    if (const auto *n = std::get_if<LetT>(&e->node)) {
        add(n->bound);
        add(n->body);
    }
    if (const auto *n = std::get_if<TyAppT>(&e->node)) add(n->fn);
    if (const auto *n = std::get_if<FixT>(&e->node)) {
        add(n->alloc);
        add(n->body);
    }
    if (const auto *n = std::get_if<FreeRgnT>(&e->node)) add(n->handle);
    if (const auto *n = std::get_if<SplitT>(&e->node)) add(n->parent);
    if (const auto *n = std::get_if<CopyT>(&e->node)) {
        add(n->src);
        add(n->dst);
    }
    if (const auto *n = std::get_if<BinOpT>(&e->node)) {
        add(n->lhs);
        add(n->rhs);
    }
}

}  // namespace harness_detail

inline TermRef shrink_counterexample(SoundnessHarness &harness, TermRef failing) {
    bool shrunk = true;
    while (shrunk) {
        shrunk = false;
        std::vector<TermRef> subs;
        harness_detail::proper_subterms(failing, subs);
        for (const auto &sub : subs) {
            if (!harness_detail::is_closed(sub)) continue;
            TraceVerdict v = harness.check_term(sub);
            if (v.typed && v.counterexample) {
                failing = sub;
                shrunk = true;
                break;
            }
        }
    }
    return failing;
}

}  // namespace spegion
