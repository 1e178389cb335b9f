#pragma once

// Effect language machinery: normalization to right-nested sequential spines,
// the derived functions sumAllocs and freeAllocs, the partial composition
// operator (x), effect equivalence (up to reassociation and renaming of
// regions introduced within the effect), and effect subsumption.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "spegion/size_algebra.hpp"
#include "spegion/syntax.hpp"

namespace spegion {

// ---------------------------------------------------------------------------
// Composition errors
// ---------------------------------------------------------------------------

struct CompositionError {
    enum class Kind : std::uint8_t {
        DoubleFree,
        OverAllocation,
        OverSplit,
        UseAfterFree,
        UnboundedRecursionViolation,
    };

    Kind kind = Kind::OverAllocation;
    Region region;
    Size requested;  // size the failing atom asked for
    Size declared;   // region's declared capacity, when applicable
    Size sum;        // sumAllocs at the failure point, when applicable
    EffectRef prefix;  // the composed effect up to the failure, when applicable

    std::string str() const {
        std::ostringstream os;
        switch (kind) {
            case Kind::DoubleFree:
                os << "double free of region " << region.str();
                break;
            case Kind::OverAllocation:
                os << "over-allocation in region " << region.str() << ": requested "
                   << requested.str() << " with " << sum.str() << " already charged against "
                   << declared.str();
                break;
            case Kind::OverSplit:
                os << "over-split of region " << region.str() << ": requested " << requested.str()
                   << " with " << sum.str() << " already charged against " << declared.str();
                break;
            case Kind::UseAfterFree:
                os << "allocation into region " << region.str() << " after it was freed";
                break;
            case Kind::UnboundedRecursionViolation:
                os << "region " << region.str()
                   << " is used under recursion but its allocation size " << requested.str()
                   << " is not unbounded";
                break;
        }
        return os.str();
    }

    const char *kind_name() const {
        switch (kind) {
            case Kind::DoubleFree: return "DoubleFree";
            case Kind::OverAllocation: return "OverAllocation";
            case Kind::OverSplit: return "OverSplit";
            case Kind::UseAfterFree: return "UseAfterFree";
            case Kind::UnboundedRecursionViolation: return "UnboundedRecursionViolation";
        }
        return "?";
    }
};

// ---------------------------------------------------------------------------
// Normalization: right-nested Seq spine, Bot units dropped (a sole Bot stays),
// Join spines right-nested with children normalized, Rec bodies normalized.
// ---------------------------------------------------------------------------

inline EffectRef normalize(const EffectRef &phi);

namespace detail {

inline void flatten_seq(const EffectRef &phi, std::vector<EffectRef> &atoms) {
    if (const auto *s = std::get_if<SeqE>(&phi->node)) {
        flatten_seq(s->lhs, atoms);
        flatten_seq(s->rhs, atoms);
        return;
    }
    if (std::holds_alternative<BotE>(phi->node)) return;  // unit
    if (const auto *j = std::get_if<JoinE>(&phi->node)) {
        // normalize join spine right-nested with normalized children
        std::vector<EffectRef> items;
        std::function<void(const EffectRef &)> collect = [&](const EffectRef &e) {
            if (const auto *jj = std::get_if<JoinE>(&e->node)) {
                collect(jj->lhs);
                collect(jj->rhs);
            } else {
                items.push_back(normalize(e));
            }
        };
        collect(j->lhs);
        collect(j->rhs);
        EffectRef out = items.back();
        for (auto it = items.rbegin() + 1; it != items.rend(); ++it) out = eff::join(*it, out);
        atoms.push_back(out);
        return;
    }
    if (const auto *r = std::get_if<RecE>(&phi->node)) {
        atoms.push_back(eff::rec(r->var, normalize(r->body)));
        return;
    }
    atoms.push_back(phi);
}

}  // namespace detail

// Flattens a normalized-or-not effect into its sequential atom spine.
inline std::vector<EffectRef> effect_spine(const EffectRef &phi) {
    std::vector<EffectRef> atoms;
    detail::flatten_seq(phi, atoms);
    return atoms;
}

inline EffectRef spine_to_effect(const std::vector<EffectRef> &atoms) {
    if (atoms.empty()) return eff::bot();
    EffectRef out = atoms.back();
    for (auto it = atoms.rbegin() + 1; it != atoms.rend(); ++it) out = eff::seq(*it, out);
    return out;
}

inline EffectRef normalize(const EffectRef &phi) {
    return spine_to_effect(effect_spine(phi));
}

// Raw deterministic rendering used for memo keys and debugging.
inline std::string effect_key(const EffectRef &phi) {
    struct V {
        std::string operator()(const BotE &) const { return "{bot}"; }
        std::string operator()(const FreshE &n) const {
            return "{fresh " + n.region.str() + " " + n.size.str() + "}";
        }
        std::string operator()(const FreeE &n) const { return "{free " + n.region.str() + "}"; }
        std::string operator()(const SplitE &n) const {
            return "{split " + n.parent.str() + " " + n.size.str() + " " + n.child.str() + "}";
        }
        std::string operator()(const AllocE &n) const {
            return "{alloc " + n.size.str() + " " + n.region.str() + "}";
        }
        std::string operator()(const EffVarE &n) const { return "{" + n.name + "}"; }
        std::string operator()(const RecE &n) const {
            return "{rec " + n.var + " " + effect_key(n.body) + "}";
        }
        std::string operator()(const SeqE &n) const {
            return effect_key(n.lhs) + " x " + effect_key(n.rhs);
        }
        std::string operator()(const JoinE &n) const {
            return "(" + effect_key(n.lhs) + " u " + effect_key(n.rhs) + ")";
        }
    };
    return std::visit(V{}, phi->node);
}

// ---------------------------------------------------------------------------
// sumAllocs: total size charged against a region by an effect.
//   alloc s rho and split rho s rho' charge s; x sums; |_| takes max;
//   everything else (including rec bodies) charges 0.
// ---------------------------------------------------------------------------

inline Size sum_allocs(const Region &rho, const EffectRef &phi) {
    struct V {
        const Region &rho;
        Size operator()(const BotE &) const { return Size::of(0); }
        Size operator()(const FreshE &) const { return Size::of(0); }
        Size operator()(const FreeE &) const { return Size::of(0); }
        Size operator()(const SplitE &n) const {
            return n.parent == rho ? n.size : Size::of(0);
        }
        Size operator()(const AllocE &n) const {
            return n.region == rho ? n.size : Size::of(0);
        }
        Size operator()(const EffVarE &) const { return Size::of(0); }
        Size operator()(const RecE &) const { return Size::of(0); }
        Size operator()(const SeqE &n) const {
            return size_add(sum_allocs(rho, n.lhs), sum_allocs(rho, n.rhs));
        }
        Size operator()(const JoinE &n) const {
            Size a = sum_allocs(rho, n.lhs);
            Size b = sum_allocs(rho, n.rhs);
            return size_leq(a, b) ? b : a;
        }
    };
    return std::visit(V{rho}, phi->node);
}

// ---------------------------------------------------------------------------
// freeAllocs: the (region, size) footprint of regions an effect uses without
// creating. An alloc/split/free atom contributes unless a {fresh rho _}
// precedes it in the same sequential spine; free contributes (rho, 0);
// rec bodies and join branches are scanned from scratch.
// ---------------------------------------------------------------------------

using RegionSizeSet = std::set<std::pair<Region, Size>>;

inline RegionSizeSet free_allocs(const EffectRef &phi) {
    RegionSizeSet out;
    std::set<Region> freshed;
    for (const EffectRef &atom : effect_spine(phi)) {
        if (const auto *f = std::get_if<FreshE>(&atom->node)) {
            freshed.insert(f->region);
        } else if (const auto *a = std::get_if<AllocE>(&atom->node)) {
            if (!freshed.count(a->region)) out.emplace(a->region, a->size);
        } else if (const auto *s = std::get_if<SplitE>(&atom->node)) {
            if (!freshed.count(s->parent)) out.emplace(s->parent, s->size);
        } else if (const auto *fr = std::get_if<FreeE>(&atom->node)) {
            if (!freshed.count(fr->region)) out.emplace(fr->region, Size::of(0));
        } else if (const auto *r = std::get_if<RecE>(&atom->node)) {
            auto inner = free_allocs(r->body);
            out.insert(inner.begin(), inner.end());
        } else if (const auto *j = std::get_if<JoinE>(&atom->node)) {
            auto a1 = free_allocs(j->lhs);
            auto a2 = free_allocs(j->rhs);
            out.insert(a1.begin(), a1.end());
            out.insert(a2.begin(), a2.end());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Region renaming over effects (by explicit map).
// ---------------------------------------------------------------------------

inline Region rename_region_by(const Region &r, const std::map<Region, Region> &m) {
    auto it = m.find(r);
    return it == m.end() ? r : it->second;
}

inline EffectRef rename_effect_regions(const EffectRef &phi, const std::map<Region, Region> &m) {
    struct V {
        const std::map<Region, Region> &m;
        const EffectRef &orig;
        EffectRef operator()(const BotE &) const { return orig; }
        EffectRef operator()(const FreshE &n) const {
            return eff::fresh(rename_region_by(n.region, m), n.size);
        }
        EffectRef operator()(const FreeE &n) const {
            return eff::free_(rename_region_by(n.region, m));
        }
        EffectRef operator()(const SplitE &n) const {
            return eff::split(rename_region_by(n.parent, m), n.size,
                              rename_region_by(n.child, m));
        }
        EffectRef operator()(const AllocE &n) const {
            return eff::alloc(n.size, rename_region_by(n.region, m));
        }
        EffectRef operator()(const EffVarE &) const { return orig; }
        EffectRef operator()(const RecE &n) const {
            return eff::rec(n.var, rename_effect_regions(n.body, m));
        }
        EffectRef operator()(const SeqE &n) const {
            return eff::seq(rename_effect_regions(n.lhs, m), rename_effect_regions(n.rhs, m));
        }
        EffectRef operator()(const JoinE &n) const {
            return eff::join(rename_effect_regions(n.lhs, m), rename_effect_regions(n.rhs, m));
        }
    };
    return std::visit(V{m, phi}, phi->node);
}

// ---------------------------------------------------------------------------
// Effect equivalence: equal normalized structure up to a bijective renaming of
// regions introduced by fresh/split atoms within each side, and of rec-bound
// effect variables.
// ---------------------------------------------------------------------------

namespace detail {

inline void introduced_regions(const EffectRef &phi, std::set<Region> &out) {
    struct V {
        std::set<Region> &out;
        void operator()(const BotE &) const {}
        void operator()(const FreshE &n) const { out.insert(n.region); }
        void operator()(const FreeE &) const {}
        void operator()(const SplitE &n) const { out.insert(n.child); }
        void operator()(const AllocE &) const {}
        void operator()(const EffVarE &) const {}
        void operator()(const RecE &n) const { introduced_regions(n.body, out); }
        void operator()(const SeqE &n) const {
            introduced_regions(n.lhs, out);
            introduced_regions(n.rhs, out);
        }
        void operator()(const JoinE &n) const {
            introduced_regions(n.lhs, out);
            introduced_regions(n.rhs, out);
        }
    };
    std::visit(V{out}, phi->node);
}

struct EquivState {
    const std::set<Region> *intro_l = nullptr;
    const std::set<Region> *intro_r = nullptr;
    std::map<Region, Region> fwd;
    std::map<Region, Region> bwd;
    std::map<std::string, std::string> eff_fwd;

    bool regions(const Region &a, const Region &b) {
        auto fit = fwd.find(a);
        if (fit != fwd.end()) return fit->second == b;
        auto bit = bwd.find(b);
        if (bit != bwd.end()) return false;  // b already matched to another a
        if (a == b) {
            fwd.emplace(a, b);
            bwd.emplace(b, a);
            return true;
        }
        if (intro_l->count(a) && intro_r->count(b)) {
            fwd.emplace(a, b);
            bwd.emplace(b, a);
            return true;
        }
        return false;
    }

    bool effvars(const std::string &a, const std::string &b) {
        auto it = eff_fwd.find(a);
        if (it != eff_fwd.end()) return it->second == b;
        return a == b;  // only rec binders introduce mappings
    }
};

inline bool equiv_walk(const EffectRef &a, const EffectRef &b, EquivState &st) {
    if (a->node.index() != b->node.index()) return false;
    if (std::holds_alternative<BotE>(a->node)) return true;
    if (const auto *fa = std::get_if<FreshE>(&a->node)) {
        const auto &fb = std::get<FreshE>(b->node);
        return fa->size == fb.size && st.regions(fa->region, fb.region);
    }
    if (const auto *fa = std::get_if<FreeE>(&a->node)) {
        return st.regions(fa->region, std::get<FreeE>(b->node).region);
    }
    if (const auto *sa = std::get_if<SplitE>(&a->node)) {
        const auto &sb = std::get<SplitE>(b->node);
        return sa->size == sb.size && st.regions(sa->parent, sb.parent) &&
               st.regions(sa->child, sb.child);
    }
    if (const auto *aa = std::get_if<AllocE>(&a->node)) {
        const auto &ab = std::get<AllocE>(b->node);
        return aa->size == ab.size && st.regions(aa->region, ab.region);
    }
    if (const auto *va = std::get_if<EffVarE>(&a->node)) {
        return st.effvars(va->name, std::get<EffVarE>(b->node).name);
    }
    if (const auto *ra = std::get_if<RecE>(&a->node)) {
        const auto &rb = std::get<RecE>(b->node);
        auto saved = st.eff_fwd;
        st.eff_fwd[ra->var] = rb.var;
        bool ok = equiv_walk(ra->body, rb.body, st);
        st.eff_fwd = std::move(saved);
        return ok;
    }
    if (const auto *qa = std::get_if<SeqE>(&a->node)) {
        const auto &qb = std::get<SeqE>(b->node);
        return equiv_walk(qa->lhs, qb.lhs, st) && equiv_walk(qa->rhs, qb.rhs, st);
    }
    const auto &ja = std::get<JoinE>(a->node);
    const auto &jb = std::get<JoinE>(b->node);
    return equiv_walk(ja.lhs, jb.lhs, st) && equiv_walk(ja.rhs, jb.rhs, st);
}

}  // namespace detail

namespace detail {
inline void occurring_fresh_regions(const EffectRef &phi, std::set<Region> &out) {
    struct V {
        std::set<Region> &out;
        void reg(const Region &r) const {
            if (r.tag == Region::Tag::Fresh) out.insert(r);
        }
        void operator()(const BotE &) const {}
        void operator()(const FreshE &n) const { reg(n.region); }
        void operator()(const FreeE &n) const { reg(n.region); }
        void operator()(const SplitE &n) const {
            reg(n.parent);
            reg(n.child);
        }
        void operator()(const AllocE &n) const { reg(n.region); }
        void operator()(const EffVarE &) const {}
        void operator()(const RecE &n) const { occurring_fresh_regions(n.body, out); }
        void operator()(const SeqE &n) const {
            occurring_fresh_regions(n.lhs, out);
            occurring_fresh_regions(n.rhs, out);
        }
        void operator()(const JoinE &n) const {
            occurring_fresh_regions(n.lhs, out);
            occurring_fresh_regions(n.rhs, out);
        }
    };
    std::visit(V{out}, phi->node);
}
}  // namespace detail

inline bool effect_equiv_upto(const EffectRef &a, const EffectRef &b, bool all_fresh_flexible) {
    EffectRef na = normalize(a), nb = normalize(b);
    std::set<Region> il, ir;
    if (all_fresh_flexible) {
        detail::occurring_fresh_regions(na, il);
        detail::occurring_fresh_regions(nb, ir);
    } else {
        detail::introduced_regions(na, il);
        detail::introduced_regions(nb, ir);
    }
    detail::EquivState st;
    st.intro_l = &il;
    st.intro_r = &ir;
    return detail::equiv_walk(na, nb, st);
}

inline bool effect_equiv(const EffectRef &a, const EffectRef &b) {
    return effect_equiv_upto(a, b, false);
}

// ---------------------------------------------------------------------------
// Composition. Valid compositions build normalize(phi1 x phi2); invalid ones
// report why. Options mirror the CLI: strict_figures disables the
// use-after-free rejection that goes beyond the composition figure.
// ---------------------------------------------------------------------------

struct ComposeOptions {
    bool use_after_free_check = true;
    // The checker defers recursion-variable constraints while composing
    // sub-effects (the creating fresh may live in an enclosing effect) and
    // settles them once the function body's effect is complete.
    bool defer_rec_check = false;
};

using ComposeResult = std::variant<EffectRef, CompositionError>;

inline bool compose_ok(const ComposeResult &r) { return std::holds_alternative<EffectRef>(r); }
inline const EffectRef &compose_effect(const ComposeResult &r) { return std::get<EffectRef>(r); }
inline const CompositionError &compose_error(const ComposeResult &r) {
    return std::get<CompositionError>(r);
}

namespace detail {

struct ComposeState {
    std::vector<EffectRef> acc;  // normalized spine so far
    ComposeOptions opts;

    bool has_var_atom = false;

    bool region_created(const Region &rho) const {
        for (const auto &atom : acc) {
            if (const auto *f = std::get_if<FreshE>(&atom->node)) {
                if (f->region == rho) return true;
            } else if (const auto *s = std::get_if<SplitE>(&atom->node)) {
                if (s->child == rho) return true;
            }
        }
        return false;
    }
    bool region_freed(const Region &rho) const {
        for (const auto &atom : acc) {
            if (const auto *f = std::get_if<FreeE>(&atom->node))
                if (f->region == rho) return true;
        }
        return false;
    }
    // creation followed later by a free of the same region
    bool created_then_freed(const Region &rho) const {
        bool created = false;
        for (const auto &atom : acc) {
            if (const auto *f = std::get_if<FreshE>(&atom->node)) {
                if (f->region == rho) created = true;
            } else if (const auto *s = std::get_if<SplitE>(&atom->node)) {
                if (s->child == rho) created = true;
            } else if (const auto *fr = std::get_if<FreeE>(&atom->node)) {
                if (fr->region == rho && created) return true;
            }
        }
        return false;
    }
    std::optional<Size> creation_capacity(const Region &rho) const {
        // latest fresh/split creating rho wins
        std::optional<Size> cap;
        for (const auto &atom : acc) {
            if (const auto *f = std::get_if<FreshE>(&atom->node)) {
                if (f->region == rho) cap = f->size;
            } else if (const auto *s = std::get_if<SplitE>(&atom->node)) {
                if (s->child == rho) cap = s->size;
            }
        }
        return cap;
    }

    EffectRef as_effect() const { return spine_to_effect(acc); }
};

inline std::optional<CompositionError> append_atom(ComposeState &st, const EffectRef &atom);

inline void max_fresh_id(const EffectRef &phi, std::uint32_t &out) {
    struct V {
        std::uint32_t &out;
        void reg(const Region &r) const {
            if (r.tag == Region::Tag::Fresh && r.id >= out) out = r.id + 1;
        }
        void operator()(const BotE &) const {}
        void operator()(const FreshE &n) const { reg(n.region); }
        void operator()(const FreeE &n) const { reg(n.region); }
        void operator()(const SplitE &n) const {
            reg(n.parent);
            reg(n.child);
        }
        void operator()(const AllocE &n) const { reg(n.region); }
        void operator()(const EffVarE &) const {}
        void operator()(const RecE &n) const { max_fresh_id(n.body, out); }
        void operator()(const SeqE &n) const {
            max_fresh_id(n.lhs, out);
            max_fresh_id(n.rhs, out);
        }
        void operator()(const JoinE &n) const {
            max_fresh_id(n.lhs, out);
            max_fresh_id(n.rhs, out);
        }
    };
    std::visit(V{out}, phi->node);
}

// The recursion-variable constraint shared by VarR (checking the accumulated
// left side) and VarL (checking atoms sequenced after a variable): each
// free-region pair must carry an unbounded size. The global region is exempt;
// it is created with size w by the calculus itself.
inline std::optional<CompositionError> check_rec_pairs(const ComposeState &st,
                                                       const RegionSizeSet &pairs) {
    if (st.opts.defer_rec_check) return std::nullopt;
    for (const auto &[rho, s] : pairs) {
        if (rho.is_global()) continue;
        if (st.region_created(rho)) continue;
        if (!s.is_symbolic() && size_geq(s, Size::omega())) continue;
        return CompositionError{CompositionError::Kind::UnboundedRecursionViolation, rho, s,
                                Size::omega(), Size::of(0), st.as_effect()};
    }
    return std::nullopt;
}

inline std::optional<CompositionError> append_alloc_like(ComposeState &st, const Region &rho,
                                                         const Size &requested, bool is_split,
                                                         const EffectRef &atom) {
    if (st.opts.use_after_free_check && st.created_then_freed(rho)) {
        return CompositionError{CompositionError::Kind::UseAfterFree, rho, requested,
                                Size::omega(), Size::of(0), st.as_effect()};
    }
    if (auto cap = st.creation_capacity(rho)) {
        Size sum = sum_allocs(rho, st.as_effect());
        if (!size_leq(size_add(sum, requested), *cap)) {
            auto kind = is_split ? CompositionError::Kind::OverSplit
                                 : CompositionError::Kind::OverAllocation;
            return CompositionError{kind, rho, requested, *cap, sum, st.as_effect()};
        }
    }
    // region not created here: accepted, validated by an enclosing composition
    if (st.has_var_atom) {
        RegionSizeSet pairs{{rho, requested}};
        if (auto err = check_rec_pairs(st, pairs)) return err;
    }
    st.acc.push_back(atom);
    return std::nullopt;
}

inline std::optional<CompositionError> append_atom(ComposeState &st, const EffectRef &atom) {
    if (std::holds_alternative<BotE>(atom->node)) return std::nullopt;
    if (std::holds_alternative<FreshE>(atom->node)) {
        st.acc.push_back(atom);
        return std::nullopt;
    }
    if (const auto *f = std::get_if<FreeE>(&atom->node)) {
        if (st.region_freed(f->region))
            return CompositionError{CompositionError::Kind::DoubleFree, f->region, Size::of(0),
                                    Size::omega(), Size::of(0), st.as_effect()};
        if (st.has_var_atom) {
            RegionSizeSet pairs{{f->region, Size::of(0)}};
            if (auto err = check_rec_pairs(st, pairs)) return err;
        }
        st.acc.push_back(atom);
        return std::nullopt;
    }
    if (const auto *a = std::get_if<AllocE>(&atom->node))
        return append_alloc_like(st, a->region, a->size, false, atom);
    if (const auto *s = std::get_if<SplitE>(&atom->node))
        return append_alloc_like(st, s->parent, s->size, true, atom);
    if (std::holds_alternative<EffVarE>(atom->node)) {
        if (auto err = check_rec_pairs(st, free_allocs(st.as_effect()))) return err;
        st.has_var_atom = true;
        st.acc.push_back(atom);
        return std::nullopt;
    }
    if (const auto *r = std::get_if<RecE>(&atom->node)) {
        // Validate the body with its recursion variable blanked out. The
        // regions the body creates are per-iteration instances, so they are
        // renamed apart from the surrounding spine first.
        ComposeState probe = st;
        EffectRef unrolled = substitute_effect_var(r->body, r->var, eff::bot());
        std::uint32_t next_id = 1;
        max_fresh_id(unrolled, next_id);
        for (const auto &prior : st.acc) max_fresh_id(prior, next_id);
        std::set<Region> intro;
        introduced_regions(unrolled, intro);
        std::map<Region, Region> apart;
        for (const Region &reg : intro)
            if (!reg.is_global()) apart.emplace(reg, Region::fresh(next_id++));
        unrolled = rename_effect_regions(unrolled, apart);
        for (const auto &inner : effect_spine(unrolled))
            if (auto err = append_atom(probe, inner)) return err;
        if (st.has_var_atom) {
            if (auto err = check_rec_pairs(st, free_allocs(atom))) return err;
        }
        st.acc.push_back(atom);
        return std::nullopt;
    }
    const auto &j = std::get<JoinE>(atom->node);
    {
        ComposeState probe = st;
        for (const auto &inner : effect_spine(j.lhs))
            if (auto err = append_atom(probe, inner)) return err;
    }
    {
        ComposeState probe = st;
        for (const auto &inner : effect_spine(j.rhs))
            if (auto err = append_atom(probe, inner)) return err;
    }
    if (st.has_var_atom) {
        if (auto err = check_rec_pairs(st, free_allocs(atom))) return err;
    }
    st.acc.push_back(atom);
    return std::nullopt;
}

}  // namespace detail

inline ComposeResult compose(const EffectRef &phi1, const EffectRef &phi2,
                             ComposeOptions opts = {}) {
    detail::ComposeState st;
    st.opts = opts;
    st.acc = effect_spine(phi1);
    for (const auto &atom : st.acc)
        if (std::holds_alternative<EffVarE>(atom->node)) st.has_var_atom = true;
    for (const auto &atom : effect_spine(phi2)) {
        if (auto err = detail::append_atom(st, atom)) return *err;
    }
    return st.as_effect();
}

inline EffectRef join(const EffectRef &a, const EffectRef &b) {
    return normalize(eff::join(a, b));
}

inline bool effect_contains_var(const EffectRef &phi) {
    struct V {
        bool operator()(const BotE &) const { return false; }
        bool operator()(const FreshE &) const { return false; }
        bool operator()(const FreeE &) const { return false; }
        bool operator()(const SplitE &) const { return false; }
        bool operator()(const AllocE &) const { return false; }
        bool operator()(const EffVarE &) const { return true; }
        bool operator()(const RecE &n) const { return effect_contains_var(n.body); }
        bool operator()(const SeqE &n) const {
            return effect_contains_var(n.lhs) || effect_contains_var(n.rhs);
        }
        bool operator()(const JoinE &n) const {
            return effect_contains_var(n.lhs) || effect_contains_var(n.rhs);
        }
    };
    return std::visit(V{}, phi->node);
}

// The whole-body recursion constraint: when an effect recurses (mentions an
// effect variable), every region it uses without creating must do so at the
// unbounded size. The global region is exempt.
inline std::optional<CompositionError> validate_recursive_effect(const EffectRef &phi) {
    if (!effect_contains_var(phi)) return std::nullopt;
    for (const auto &[rho, s] : free_allocs(phi)) {
        if (rho.is_global()) continue;
        if (!s.is_symbolic() && size_geq(s, Size::omega())) continue;
        return CompositionError{CompositionError::Kind::UnboundedRecursionViolation, rho, s,
                                Size::omega(), Size::of(0), phi};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Subsumption K |- phi1 <= phi2, decided by memoized search over the rules
//   sb-equiv, sb-bot, sb-x-above, sb-x-below-1/2, sb-join-above,
//   sb-join-below-1/2
// on normalized forms. Each recursion strictly shrinks one side.
// ---------------------------------------------------------------------------

namespace detail {

struct SubsumeCtx {
    std::map<std::string, bool> memo;
    bool all_fresh_flexible = false;
};

inline bool subsumes_go(const EffectRef &l, const EffectRef &r, SubsumeCtx &ctx) {
    std::string key = effect_key(l) + " <= " + effect_key(r);
    auto it = ctx.memo.find(key);
    if (it != ctx.memo.end()) return it->second;
    ctx.memo.emplace(key, false);  // blocks unproductive cycles

    bool ok = false;
    if (effect_equiv_upto(l, r, ctx.all_fresh_flexible)) ok = true;  // sb-equiv
    if (!ok && std::holds_alternative<BotE>(l->node)) ok = true;    // sb-bot
    if (!ok) {
        if (const auto *s = std::get_if<SeqE>(&l->node))            // sb-x-above
            ok = subsumes_go(s->lhs, r, ctx) && subsumes_go(s->rhs, r, ctx);
    }
    if (!ok) {
        if (const auto *j = std::get_if<JoinE>(&l->node))           // sb-join-above
            ok = subsumes_go(j->lhs, r, ctx) && subsumes_go(j->rhs, r, ctx);
    }
    if (!ok) {
        if (const auto *s = std::get_if<SeqE>(&r->node))            // sb-x-below-1/2
            ok = subsumes_go(l, s->lhs, ctx) || subsumes_go(l, s->rhs, ctx);
    }
    if (!ok) {
        if (const auto *j = std::get_if<JoinE>(&r->node))           // sb-join-below-1/2
            ok = subsumes_go(l, j->lhs, ctx) || subsumes_go(l, j->rhs, ctx);
    }
    ctx.memo[key] = ok;
    return ok;
}

}  // namespace detail

// The kinding side conditions of the rules are the caller's obligation (the
// checker only produces well-kinded effects); the harness re-checks them.
inline bool subsumes(const EffectRef &phi1, const EffectRef &phi2) {
    detail::SubsumeCtx ctx;
    return detail::subsumes_go(normalize(phi1), normalize(phi2), ctx);
}

// Subsumption up to renaming of every minted region. Static checking and the
// evaluation mint names from one monotone supply in different orders, so the
// metatheory harness compares effects through this looser lens.
inline bool subsumes_upto_minting(const EffectRef &phi1, const EffectRef &phi2) {
    detail::SubsumeCtx ctx;
    ctx.all_fresh_flexible = true;
    return detail::subsumes_go(normalize(phi1), normalize(phi2), ctx);
}

}  // namespace spegion
