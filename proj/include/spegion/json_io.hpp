#pragma once

// JSON renderings of effects, judgements, diagnostics and store snapshots.

#include <json.hpp>

#include "spegion/evaluator.hpp"
#include "spegion/printer.hpp"
#include "spegion/type_checker.hpp"

namespace spegion {

using json = nlohmann::json;

inline json size_to_json(const Size &s) {
    if (s.is_omega()) return "w";
    if (s.is_symbolic()) return s.sym;
    return s.n;
}

inline json effect_to_json(const EffectRef &phi, RegionNamer &names) {
    struct V {
        RegionNamer &names;
        json operator()(const BotE &) const { return json{{"op", "bot"}}; }
        json operator()(const FreshE &n) const {
            return json{{"op", "fresh"},
                        {"region", names.name(n.region)},
                        {"size", size_to_json(n.size)}};
        }
        json operator()(const FreeE &n) const {
            return json{{"op", "free"}, {"region", names.name(n.region)}};
        }
        json operator()(const SplitE &n) const {
            return json{{"op", "split"},
                        {"parent", names.name(n.parent)},
                        {"size", size_to_json(n.size)},
                        {"child", names.name(n.child)}};
        }
        json operator()(const AllocE &n) const {
            return json{{"op", "alloc"},
                        {"size", size_to_json(n.size)},
                        {"region", names.name(n.region)}};
        }
        json operator()(const EffVarE &n) const { return json{{"op", "var"}, {"name", n.name}}; }
        json operator()(const RecE &n) const {
            return json{{"op", "rec"}, {"var", n.var}, {"body", effect_to_json(n.body, names)}};
        }
        json operator()(const SeqE &n) const {
            return json{{"op", "seq"},
                        {"lhs", effect_to_json(n.lhs, names)},
                        {"rhs", effect_to_json(n.rhs, names)}};
        }
        json operator()(const JoinE &n) const {
            return json{{"op", "join"},
                        {"lhs", effect_to_json(n.lhs, names)},
                        {"rhs", effect_to_json(n.rhs, names)}};
        }
    };
    return std::visit(V{names}, phi->node);
}

inline json effect_to_json(const EffectRef &phi) {
    RegionNamer names;
    return effect_to_json(normalize(phi), names);
}

inline json judgement_to_json(const TypeJudgement &j) {
    RegionNamer names;
    json out;
    out["type"] = print_type(j.type.ty, names);
    out["place"] = names.name(j.type.place);
    out["effect"] = print_effect_with(j.effect, names);
    out["effect_tree"] = effect_to_json(normalize(j.effect), names);
    json live = json::array();
    for (const auto &[r, s] : j.live_out.live)
        live.push_back(json{{"region", names.name(r)}, {"declared", size_to_json(s)}});
    out["live"] = live;
    return out;
}

inline json span_to_json(const Span &sp) {
    return json{{"line", sp.line}, {"col", sp.col}, {"len", sp.len}};
}

inline json diagnostic_to_json(const TypeError &e) {
    json out;
    out["rule"] = e.rule;
    out["span"] = span_to_json(e.span);
    out["kind"] = e.kind_name();
    out["message"] = e.message;
    if (e.composition) {
        RegionNamer names;
        json effect{{"kind", e.composition->kind_name()},
                    {"region", names.name(e.composition->region)},
                    {"requested", size_to_json(e.composition->requested)},
                    {"declared", size_to_json(e.composition->declared)}};
        if (e.composition->prefix)
            effect["prefix"] = print_effect_with(e.composition->prefix, names);
        out["effect"] = effect;
    }
    return out;
}

inline json store_to_json(const Store &store) {
    json regions = json::object();
    for (const auto &[rho, inner] : store.regions) {
        json cells = json::object();
        for (const auto &[l, v] : inner.cells) cells[l.str()] = print_value(v);
        regions[rho.str()] = json{{"max", size_to_json(inner.max_size)},
                                  {"size", size_to_json(current_size(inner))},
                                  {"cells", cells}};
    }
    return regions;
}

inline json snapshot_to_json(const Evaluator::Snapshot &snap) {
    return json{{"term", print_term(snap.term)},
                {"store", store_to_json(snap.store)},
                {"rule", snap.rule}};
}

}  // namespace spegion
