// Acceptance suite: one pass/fail line per criterion, timings included.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "spegion/harness.hpp"
#include "spegion/json_io.hpp"
#include "subsumption_oracle.hpp"

using namespace spegion;

namespace {

struct Criterion {
    int number;
    std::string title;
    bool passed = true;
    std::vector<std::string> notes;
    double seconds = 0.0;

    void require(bool cond, const std::string &what) {
        if (!cond) {
            passed = false;
            notes.push_back("FAILED: " + what);
        }
    }
    void note(const std::string &what) { notes.push_back(what); }
};

std::string corpus_path(const std::string &name) {
    return std::string(SPEGION_CORPUS_DIR) + "/" + name;
}

std::string slurp(const std::string &path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TermRef parse_file(const std::string &name) {
    ParseResult r = parse(slurp(corpus_path(name)));
    if (!parse_ok(r)) {
        std::cerr << "corpus parse failure in " << name << ": "
                  << std::get<ParseError>(r).message << "\n";
        std::exit(99);
    }
    return std::get<TermRef>(r);
}

CheckResult check_file(const std::string &name, FreshSource &fresh) {
    Checker checker(fresh);
    return checker.check_program(parse_file(name));
}

struct RunOutcome {
    bool accepted = false;
    Evaluator::EvalResult result;
};

RunOutcome run_file(const std::string &name) {
    FreshSource fresh;
    Checker checker(fresh);
    TermRef t = parse_file(name);
    CheckResult cr = checker.check_program(t);
    RunOutcome out;
    if (!check_ok(cr)) return out;
    out.accepted = true;
    Evaluator ev(fresh);
    out.result = ev.evaluate(t, Store::initial(), 100000);
    return out;
}

long long stored_int(const Evaluator::EvalResult &r) {
    if (r.tag != Evaluator::EvalResult::Tag::Done) return -999;
    auto v = Evaluator::read_value(r.store, *r.loc);
    if (!v || !std::holds_alternative<IntV>(v->node)) return -998;
    return std::get<IntV>(v->node).n;
}

// --- criterion bodies -------------------------------------------------------

void criterion1(Criterion &c) {
    FreshSource fresh;
    CheckResult cr = check_file("creation.spg", fresh);
    c.require(check_ok(cr), "the creation program must be accepted");
    if (!check_ok(cr)) return;
    const TypeJudgement &j = check_judgement(cr);
    Region r = j.type.place;
    EffectRef expect = normalize(
        eff::seq(eff::fresh(r, Size::of(3)),
                 eff::seq(eff::alloc(Size::of(1), r), eff::alloc(Size::of(2), r))));
    c.require(effect_equiv(j.effect, expect),
              "effect must be {fresh r 3} x {alloc 1 r} x {alloc 2 r}, got " +
                  print_effect(j.effect));
    c.note("effect: " + print_effect(j.effect));
}

void criterion2(Criterion &c) {
    FreshSource fresh;
    CheckResult rejected = check_file("intro_reject.spg", fresh);
    c.require(!check_ok(rejected), "the 10+5 program must be rejected");
    if (!check_ok(rejected)) {
        c.require(check_error(rejected).composition.has_value() &&
                      check_error(rejected).composition->kind ==
                          CompositionError::Kind::OverAllocation,
                  "the rejection must classify as OverAllocation");
        c.note("rejected: " + check_error(rejected).message);
    }
    FreshSource fresh2;
    CheckResult accepted = check_file("intro_accept.spg", fresh2);
    c.require(check_ok(accepted), "the 10/5 variant must be accepted");
}

void criterion3(Criterion &c) {
    FreshSource fresh;
    CheckResult cr = check_file("two_regions_fn.spg", fresh);
    c.require(check_ok(cr), "the two-region function must be accepted");
    if (!check_ok(cr)) return;
    const TypeJudgement &j = check_judgement(cr);
    const auto *fn = std::get_if<FnT>(&j.type.ty->node);
    c.require(fn != nullptr, "the program's type must be a function type");
    if (!fn) return;

    // the latent effect's creation skeleton is {fresh r1 5} x {fresh r2 5}
    std::vector<EffectRef> freshes;
    for (const auto &atom : effect_spine(fn->latent))
        if (std::holds_alternative<FreshE>(atom->node)) freshes.push_back(atom);
    c.require(freshes.size() == 2, "the function must create exactly two regions");
    if (freshes.size() == 2) {
        EffectRef skeleton = normalize(eff::seq(freshes[0], freshes[1]));
        Region a = Region::fresh(900001), b = Region::fresh(900002);
        EffectRef display =
            normalize(eff::seq(eff::fresh(a, Size::of(5)), eff::fresh(b, Size::of(5))));
        c.require(effect_equiv(skeleton, display),
                  "creation skeleton must be {fresh r1 5} x {fresh r2 5}");
        c.require(fn->codomain.place == std::get<FreshE>(freshes[1]->node).region,
                  "the result place must be the second fresh region");
    }
    // the full composed latent keeps the unit-pointer allocations
    Region a = Region::fresh(900003), b = Region::fresh(900004);
    EffectRef full = normalize(
        eff::seq(eff::fresh(a, Size::of(5)),
                 eff::seq(eff::alloc(Size::of(1), a),
                          eff::seq(eff::fresh(b, Size::of(5)), eff::alloc(Size::of(1), b)))));
    c.require(effect_equiv(fn->latent, full),
              "the composed latent must also carry the two unit-pointer allocations");
    c.note("composed latent: " + print_effect(fn->latent));
    c.note("displayed form:  {fresh r1 5} x {fresh r2 5} (creation skeleton)");
    c.note("our top-level effect: " + print_effect(j.effect) +
           "  (the compact display would be {alloc 1 r})");
}

void criterion4(Criterion &c) {
    FreshSource f1;
    CheckResult uaf = check_file("use_after_free.spg", f1);
    c.require(!check_ok(uaf), "use-after-free must be rejected");
    if (!check_ok(uaf))
        c.require(check_error(uaf).kind == TypeError::Kind::RegionNotLive,
                  "use-after-free must reject with RegionNotLive, got " +
                      std::string(check_error(uaf).kind_name()));

    RunOutcome rec = run_file("recursion.spg");
    c.require(rec.accepted && rec.result.tag == Evaluator::EvalResult::Tag::Done,
              "the recursion program must be accepted and run to completion");
    c.require(stored_int(rec.result) == 0, "the recursion program must evaluate to 0");

    FreshSource f2;
    c.require(check_ok(check_file("loop.spg", f2)), "the loop translation must be accepted");

    RunOutcome ll = run_file("linked_list.spg");
    c.require(ll.accepted && ll.result.tag == Evaluator::EvalResult::Tag::Done,
              "the linked-list program must run to completion");
    c.require(stored_int(ll.result) == 1,
              "the final read of the last task must succeed (value 1)");
    if (ll.result.tag == Evaluator::EvalResult::Tag::Done) {
        // four regions existed; the first two tasks were freed
        c.require(ll.result.store.regions.size() == 3,
                  "the sentinel, the last task and the global region remain");
    }

    RunOutcome sp = run_file("splitting.spg");
    c.require(sp.accepted && sp.result.tag == Evaluator::EvalResult::Tag::Done,
              "the splitting program must run to completion");
    c.require(stored_int(sp.result) == 1, "the kept part must still be readable (value 1)");
    if (sp.result.tag == Evaluator::EvalResult::Tag::Done) {
        c.require(sp.result.store.regions.size() == 2,
                  "the freed sub-region must be absent while the kept part remains");
        bool kept_nonglobal = false;
        for (const auto &[rho, inner] : sp.result.store.regions)
            if (!rho.is_global() && !inner.cells.empty()) kept_nonglobal = true;
        c.require(kept_nonglobal, "the kept part must remain populated");
    }
}

void criterion5(Criterion &c) {
    FreshSource f1;
    CheckResult finite = check_file("rec_finite_free.spg", f1);
    c.require(!check_ok(finite), "finite allocation into a free region must be rejected");
    if (!check_ok(finite)) {
        bool classified = check_error(finite).composition.has_value() &&
                          check_error(finite).composition->kind ==
                              CompositionError::Kind::UnboundedRecursionViolation;
        c.require(classified, "the rejection must classify as UnboundedRecursionViolation");
    }
    FreshSource f2;
    c.require(check_ok(check_file("rec_omega.spg", f2)),
              "the unbounded-allocation variant must be accepted");
    FreshSource f3;
    c.require(check_ok(check_file("rec_inside.spg", f3)),
              "the region-created-inside variant must be accepted");
    FreshSource f4;
    c.require(!check_ok(check_file("neg1.spg", f4)), "negative example 1 must be rejected");
    FreshSource f5;
    c.require(!check_ok(check_file("neg2.spg", f5)), "negative example 2 must be rejected");
    FreshSource f6;
    c.require(check_ok(check_file("pos1.spg", f6)), "positive example 1 must be accepted");
    FreshSource f7;
    c.require(check_ok(check_file("pos2.spg", f7)), "positive example 2 must be accepted");
}

void criterion6(Criterion &c) {
    SoundnessHarness harness;
    std::size_t progress_cx = 0, preservation_cx = 0;

    TermEnumerator enumerator;
    std::vector<TermRef> terms = enumerator.enumerate(3);
    std::size_t enumerated_typed = 0;
    for (const TermRef &t : terms) {
        TraceVerdict v = harness.check_term(t);
        if (!v.typed) continue;
        ++enumerated_typed;
        if (v.counterexample) {
            if (v.counterexample->phase == "progress")
                ++progress_cx;
            else
                ++preservation_cx;
            if (progress_cx + preservation_cx <= 3)
                c.note("counterexample (" + v.counterexample->phase + "): " +
                       v.counterexample->term + " -- " + v.counterexample->detail);
        }
    }

    ProgramGenerator generator;
    std::size_t generated_typed = 0;
    for (unsigned seed = 0; seed < 500; ++seed) {
        GeneratedProgram p = generator.generate(seed);
        TraceVerdict v = harness.check_term(p.term);
        if (!v.typed) continue;
        ++generated_typed;
        if (v.counterexample) {
            if (v.counterexample->phase == "progress")
                ++progress_cx;
            else
                ++preservation_cx;
            if (progress_cx + preservation_cx <= 3)
                c.note("seed " + std::to_string(seed) + " (" + v.counterexample->phase +
                       "): " + v.counterexample->detail);
        }
    }

    c.note("enumerated terms: " + std::to_string(terms.size()) + " (height <= 3), " +
           std::to_string(enumerated_typed) + " accepted; generated accepted: " +
           std::to_string(generated_typed) + "/500");
    c.require(progress_cx == 0,
              std::to_string(progress_cx) + " progress counterexamples (must be 0)");
    c.require(preservation_cx == 0,
              std::to_string(preservation_cx) + " preservation counterexamples (must be 0)");
    c.require(enumerated_typed > 1000, "the enumeration must exercise >1000 accepted programs");
    c.require(generated_typed >= 400, "most generated programs must be accepted");
}

void criterion7(Criterion &c) {
    auto universe = oracle::oracle_universe();
    std::size_t pairs = 0, disagreements = 0;
    for (const auto &l : universe) {
        for (const auto &r : universe) {
            ++pairs;
            int depth = oracle::effect_size(l) + oracle::effect_size(r) + 2;
            bool expect = oracle::oracle_subsumes(l, r, depth);
            bool got = subsumes(l, r);
            if (expect != got) {
                ++disagreements;
                if (disagreements <= 3)
                    c.note("disagreement: " + effect_key(l) + " <= " + effect_key(r) +
                           " oracle=" + std::to_string(expect) + " impl=" +
                           std::to_string(got));
            }
        }
    }
    c.note(std::to_string(pairs) + " pairs compared");
    c.require(disagreements == 0, std::to_string(disagreements) + " disagreements (must be 0)");
}

void criterion8(Criterion &c) {
    std::vector<Size> u;
    for (std::uint64_t i = 0; i <= 8; ++i) u.push_back(Size::of(i));
    u.push_back(Size::omega());
    std::size_t failures = 0;
    auto expect = [&](bool cond) {
        if (!cond) ++failures;
    };
    Size zero = Size::of(0), one = Size::of(1);
    for (const Size &a : u) {
        expect(size_add(a, zero) == a);
        expect(size_mul(a, one) == a);
        expect(size_mul(a, zero) == zero);
        for (const Size &b : u) {
            expect(size_add(a, b) == size_add(b, a));
            expect(size_leq(monus(a, b), a));
            for (const Size &d : u) {
                expect(size_add(size_add(a, b), d) == size_add(a, size_add(b, d)));
                expect(size_mul(size_mul(a, b), d) == size_mul(a, size_mul(b, d)));
                expect(size_mul(a, size_add(b, d)) ==
                       size_add(size_mul(a, b), size_mul(a, d)));
                if (size_leq(a, b)) {
                    expect(size_leq(size_add(a, d), size_add(b, d)));
                    expect(size_leq(size_mul(a, d), size_mul(b, d)));
                }
            }
        }
    }
    // the five defining cases of truncated subtraction
    expect(monus(Size::of(5), Size::of(3)) == Size::of(2));
    expect(monus(Size::of(3), Size::of(5)) == Size::of(0));
    expect(monus(Size::of(7), Size::of(0)) == Size::of(7));
    expect(monus(Size::of(7), Size::omega()) == Size::of(0));
    expect(monus(Size::omega(), Size::of(100)) == Size::omega());

    std::mt19937 rng(1);
    std::uniform_int_distribution<std::uint64_t> d(0, 1u << 16);
    for (int i = 0; i < 10000; ++i) {
        Size a = (rng() % 10 == 0) ? Size::omega() : Size::of(d(rng));
        Size b = (rng() % 10 == 0) ? Size::omega() : Size::of(d(rng));
        Size e = Size::of(d(rng));
        expect(size_add(a, b) == size_add(b, a));
        expect(size_mul(a, size_add(b, e)) == size_add(size_mul(a, b), size_mul(a, e)));
        expect(size_leq(monus(a, b), a));
        if (size_leq(b, a) && a.is_finite()) expect(size_geq(size_add(monus(a, b), b), a));
    }
    c.require(failures == 0, std::to_string(failures) + " law violations (must be 0)");
}

void criterion9(Criterion &c) {
    const char *accepted[] = {"creation.spg",  "intro_accept.spg", "two_regions_fn.spg",
                              "recursion.spg", "loop.spg",         "linked_list.spg",
                              "splitting.spg", "rec_omega.spg",    "rec_inside.spg",
                              "pos1.spg",      "pos2.spg"};
    SoundnessHarness harness;
    std::size_t audited = 0, split_steps = 0;
    for (const char *name : accepted) {
        FreshSource fresh;
        Checker checker(fresh);
        TermRef t = parse_file(name);
        CheckResult cr = checker.check_program(t);
        c.require(check_ok(cr), std::string(name) + " must be accepted");
        if (!check_ok(cr)) continue;
        Evaluator ev(fresh);
        Evaluator::TraceResult trace = ev.trace(t, Store::initial(), 100000);
        auto cx = harness.audit_store_invariant(trace);
        if (cx) c.require(false, std::string(name) + ": " + cx->detail);
        audited += trace.snapshots.size();
        for (const auto &snap : trace.snapshots)
            if (snap.rule == "e-splitL") ++split_steps;
        // full-trace preservation over the same corpus
        TraceVerdict v = harness.check_term(t);
        if (v.counterexample)
            c.require(false, std::string(name) + " preservation: " + v.counterexample->phase +
                                 ": " + v.counterexample->detail);
    }
    c.note(std::to_string(audited) + " snapshots audited, " + std::to_string(split_steps) +
           " split steps checked for conservation");
    c.require(split_steps >= 1, "the corpus must exercise at least one split step");
}

void criterion10(Criterion &c) {
    const char *files[] = {"creation.spg",        "intro_accept.spg", "intro_reject.spg",
                           "two_regions_fn.spg",  "use_after_free.spg", "recursion.spg",
                           "loop.spg",            "linked_list.spg",  "splitting.spg",
                           "rec_finite_free.spg", "rec_omega.spg",    "rec_inside.spg",
                           "neg1.spg",            "neg2.spg",         "pos1.spg",
                           "pos2.spg"};
    for (const char *name : files) {
        TermRef t = parse_file(name);
        ParseResult again = parse(print_term(t));
        bool ok = parse_ok(again) && term_alpha_eq(t, std::get<TermRef>(again));
        c.require(ok, std::string(name) + " must round-trip through the printer");
    }

    ProgramGenerator gen;
    std::size_t failures = 0;
    for (unsigned seed = 0; seed < 1000; ++seed) {
        TermRef t = gen.generate(seed).term;
        ParseResult again = parse(print_term(t));
        if (!parse_ok(again) || !term_alpha_eq(t, std::get<TermRef>(again))) ++failures;
    }
    c.require(failures == 0,
              std::to_string(failures) + " generated terms failed the round-trip (must be 0)");

    // deterministic replay: two traces of the same program are identical
    for (const char *name : {"recursion.spg", "splitting.spg"}) {
        TermRef t = parse_file(name);
        FreshSource fa, fb;
        Evaluator ea(fa), eb(fb);
        auto ta = ea.trace(t, Store::initial(), 100000);
        auto tb = eb.trace(t, Store::initial(), 100000);
        bool same = ta.snapshots.size() == tb.snapshots.size();
        if (same) {
            for (std::size_t i = 0; i < ta.snapshots.size(); ++i)
                same = same && ta.snapshots[i].rule == tb.snapshots[i].rule &&
                       print_term(ta.snapshots[i].term) == print_term(tb.snapshots[i].term) &&
                       store_to_json(ta.snapshots[i].store) ==
                           store_to_json(tb.snapshots[i].store);
        }
        c.require(same, std::string(name) + ": double-run traces must be identical");
    }
}

}  // namespace

int main() {
    struct Entry {
        int number;
        const char *title;
        void (*body)(Criterion &);
    };
    Entry entries[] = {
        {1, "region-creation example reproduces its displayed effect", criterion1},
        {2, "over-allocation rejected, in-bounds variant accepted", criterion2},
        {3, "two-fresh-regions function: latent effect and result place", criterion3},
        {4, "systems-code corpus verdicts and runs", criterion4},
        {5, "recursion sizing rule", criterion5},
        {6, "metatheory at desk scale (progress + preservation)", criterion6},
        {7, "subsumption agrees with the derivation enumerator", criterion7},
        {8, "size semiring laws", criterion8},
        {9, "store invariant audit and split conservation", criterion9},
        {10, "round-trip printing and deterministic replay", criterion10},
    };

    int failed = 0;
    for (Entry &entry : entries) {
        Criterion c;
        c.number = entry.number;
        c.title = entry.title;
        auto start = std::chrono::steady_clock::now();
        entry.body(c);
        auto end = std::chrono::steady_clock::now();
        c.seconds = std::chrono::duration<double>(end - start).count();
        std::printf("%s criterion %2d: %s (%.2fs)\n", c.passed ? "PASS" : "FAIL", c.number,
                    c.title.c_str(), c.seconds);
        for (const auto &note : c.notes) std::printf("        %s\n", note.c_str());
        if (!c.passed) ++failed;
    }
    if (failed == 0)
        std::printf("all %zu criteria passed\n", std::size(entries));
    else
        std::printf("%d criteria FAILED\n", failed);
    return failed;
}
