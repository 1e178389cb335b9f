// The spegion command line: check (kinds + types + effects), run, trace and
// the desk-scale soundness sweep.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "spegion/harness.hpp"
#include "spegion/json_io.hpp"

using namespace spegion;

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitError = 2;

std::optional<std::string> read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t fuel_budget(std::size_t cli_fuel, bool cli_fuel_set) {
    if (cli_fuel_set) return cli_fuel;
    if (const char *env = std::getenv("SPEGION_FUEL")) {
        char *end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return 100000;
}

struct LoadResult {
    TermRef term;
};

std::variant<LoadResult, int> load(const std::string &path, bool as_json) {
    auto text = read_file(path);
    if (!text) {
        std::cerr << "error: cannot read " << path << "\n";
        return kExitError;
    }
    ParseResult pr = parse(*text);
    if (!parse_ok(pr)) {
        const ParseError &err = std::get<ParseError>(pr);
        if (as_json) {
            json j{{"kind", "ParseError"},
                   {"span", span_to_json(err.span)},
                   {"message", err.message}};
            std::cout << j.dump(2) << "\n";
        } else {
            std::cerr << path << ":" << err.span.line << ":" << err.span.col
                      << ": parse error: " << err.message << "\n";
        }
        return kExitError;
    }
    return LoadResult{std::get<TermRef>(pr)};
}

int cmd_check(const std::string &path, bool as_json, bool strict_figures) {
    auto loaded = load(path, as_json);
    if (std::holds_alternative<int>(loaded)) return std::get<int>(loaded);
    TermRef term = std::get<LoadResult>(loaded).term;

    FreshSource fresh;
    Checker checker(fresh);
    checker.compose_opts.use_after_free_check = !strict_figures;
    CheckResult cr = checker.check_program(term);
    if (!check_ok(cr)) {
        const TypeError &err = check_error(cr);
        if (as_json) {
            std::cout << diagnostic_to_json(err).dump(2) << "\n";
        } else {
            std::cerr << path << ":" << err.span.line << ":" << err.span.col << ": ["
                      << err.rule << "] " << err.kind_name();
            if (err.composition) std::cerr << "/" << err.composition->kind_name();
            std::cerr << ": " << err.message << "\n";
        }
        return kExitReject;
    }
    const TypeJudgement &j = check_judgement(cr);
    if (as_json) {
        std::cout << judgement_to_json(j).dump(2) << "\n";
    } else {
        RegionNamer names;
        std::cout << "accepted\n";
        std::cout << "  type:   (" << print_type(j.type.ty, names) << ", "
                  << names.name(j.type.place) << ")\n";
        std::cout << "  effect: " << print_effect_with(j.effect, names) << "\n";
    }
    return kExitAccept;
}

void print_store_summary(const Store &store) {
    std::cout << "store:\n";
    for (const auto &[rho, inner] : store.regions) {
        std::cout << "  " << rho.str() << ": max " << inner.max_size.str() << ", size "
                  << current_size(inner).str() << ", cells " << inner.cells.size() << "\n";
    }
}

int cmd_run(const std::string &path, bool unsafe, std::size_t fuel) {
    auto loaded = load(path, false);
    if (std::holds_alternative<int>(loaded)) return std::get<int>(loaded);
    TermRef term = std::get<LoadResult>(loaded).term;

    FreshSource fresh;
    if (!unsafe) {
        Checker checker(fresh);
        CheckResult cr = checker.check_program(term);
        if (!check_ok(cr)) {
            const TypeError &err = check_error(cr);
            std::cerr << path << ":" << err.span.line << ":" << err.span.col << ": ["
                      << err.rule << "] " << err.kind_name() << ": " << err.message << "\n";
            return kExitReject;
        }
    }

    Evaluator ev(fresh);
    Evaluator::EvalResult r = ev.evaluate(term, Store::initial(), fuel);
    switch (r.tag) {
        case Evaluator::EvalResult::Tag::Done: {
            std::string shown = "<opaque>";
            if (auto v = Evaluator::read_value(r.store, *r.loc)) shown = print_value(*v);
            std::cout << "result: " << r.loc->str() << " = " << shown << "\n";
            print_store_summary(r.store);
            return kExitAccept;
        }
        case Evaluator::EvalResult::Tag::Stuck:
            std::cerr << "stuck after " << r.steps << " steps: " << r.stuck->reason_name()
                      << ": " << r.stuck->detail << "\n";
            return kExitReject;
        case Evaluator::EvalResult::Tag::OutOfFuel:
            std::cerr << "out of fuel after " << r.steps << " steps\n";
            return kExitReject;
    }
    return kExitError;
}

int cmd_trace(const std::string &path, bool unsafe, std::size_t fuel) {
    auto loaded = load(path, false);
    if (std::holds_alternative<int>(loaded)) return std::get<int>(loaded);
    TermRef term = std::get<LoadResult>(loaded).term;

    FreshSource fresh;
    if (!unsafe) {
        Checker checker(fresh);
        CheckResult cr = checker.check_program(term);
        if (!check_ok(cr)) {
            const TypeError &err = check_error(cr);
            std::cerr << path << ": [" << err.rule << "] " << err.message << "\n";
            return kExitReject;
        }
    }

    Evaluator ev(fresh);
    Evaluator::TraceResult tr = ev.trace(term, Store::initial(), fuel);
    for (const auto &snap : tr.snapshots) std::cout << snapshot_to_json(snap).dump() << "\n";
    json tail;
    switch (tr.result.tag) {
        case Evaluator::EvalResult::Tag::Done:
            tail = json{{"outcome", "done"},
                        {"steps", tr.result.steps},
                        {"result", tr.result.loc->str()}};
            std::cout << tail.dump() << "\n";
            return kExitAccept;
        case Evaluator::EvalResult::Tag::Stuck:
            tail = json{{"outcome", "stuck"},
                        {"steps", tr.result.steps},
                        {"reason", tr.result.stuck->reason_name()},
                        {"detail", tr.result.stuck->detail}};
            std::cout << tail.dump() << "\n";
            return kExitReject;
        case Evaluator::EvalResult::Tag::OutOfFuel:
            tail = json{{"outcome", "out-of-fuel"}, {"steps", tr.result.steps}};
            std::cout << tail.dump() << "\n";
            return kExitReject;
    }
    return kExitError;
}

int cmd_soundness(int depth, unsigned seeds, const std::string &report_path) {
    SoundnessHarness harness;
    json counterexamples = json::array();
    std::size_t checked = 0, passed = 0;

    TermEnumerator enumerator;
    for (const TermRef &t : enumerator.enumerate(depth)) {
        TraceVerdict v = harness.check_term(t);
        if (!v.typed) continue;
        ++checked;
        if (!v.counterexample) {
            ++passed;
            continue;
        }
        TermRef small = shrink_counterexample(harness, t);
        TraceVerdict sv = harness.check_term(small);
        const Counterexample &cx = sv.counterexample ? *sv.counterexample : *v.counterexample;
        counterexamples.push_back(json{{"seed", nullptr},
                                       {"term", print_term(small)},
                                       {"phase", cx.phase},
                                       {"detail", cx.detail}});
    }

    ProgramGenerator generator;
    for (unsigned seed = 0; seed < seeds; ++seed) {
        GeneratedProgram p = generator.generate(seed);
        TraceVerdict v = harness.check_term(p.term);
        if (!v.typed) continue;
        ++checked;
        if (!v.counterexample) {
            ++passed;
            continue;
        }
        TermRef small = shrink_counterexample(harness, p.term);
        TraceVerdict sv = harness.check_term(small);
        const Counterexample &cx = sv.counterexample ? *sv.counterexample : *v.counterexample;
        counterexamples.push_back(json{{"seed", seed},
                                       {"term", print_term(small)},
                                       {"phase", cx.phase},
                                       {"detail", cx.detail}});
    }

    json report{{"checked", checked}, {"passed", passed}, {"counterexamples", counterexamples}};
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        out << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return counterexamples.empty() ? kExitAccept : kExitReject;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"spegion: a region-based memory calculus checker and interpreter"};
    app.require_subcommand(1);

    std::string path;
    bool as_json = false, strict_figures = false, unsafe = false;
    std::size_t fuel = 0;
    bool fuel_set = false;
    int depth = 3;
    unsigned seeds = 500;
    std::string report_path;

    CLI::App *check = app.add_subcommand("check", "parse, kind-check and type-check a program");
    check->add_option("path", path)->required();
    check->add_flag("--json", as_json, "emit the judgement or diagnostic as JSON");
    check->add_flag("--strict-figures", strict_figures,
                    "disable the use-after-free composition extension");

    CLI::App *run = app.add_subcommand("run", "evaluate a program to a value");
    run->add_option("path", path)->required();
    run->add_flag("--unsafe", unsafe, "skip the checker (demonstrates stuck states)");
    run->add_option("--fuel", fuel, "step budget (also: SPEGION_FUEL)")
        ->each([&fuel_set](const std::string &) { fuel_set = true; });

    CLI::App *trace = app.add_subcommand("trace", "evaluate, streaming JSON snapshots");
    trace->add_option("path", path)->required();
    trace->add_flag("--unsafe", unsafe, "skip the checker");
    trace->add_option("--fuel", fuel, "step budget (also: SPEGION_FUEL)")
        ->each([&fuel_set](const std::string &) { fuel_set = true; });

    CLI::App *soundness =
        app.add_subcommand("soundness", "progress/preservation sweep over many programs");
    soundness->add_option("--depth", depth, "exhaustive enumeration height bound");
    soundness->add_option("--seeds", seeds, "number of generated programs");
    soundness->add_option("--report", report_path, "write the JSON report here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (check->parsed()) return cmd_check(path, as_json, strict_figures);
        if (run->parsed()) return cmd_run(path, unsafe, fuel_budget(fuel, fuel_set));
        if (trace->parsed()) return cmd_trace(path, unsafe, fuel_budget(fuel, fuel_set));
        if (soundness->parsed()) return cmd_soundness(depth, seeds, report_path);
    } catch (const std::exception &e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
