#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end command line behavior: exit codes, JSON output, fuel handling.
// SPEGION_CLI_PATH and SPEGION_CORPUS_DIR come from the build.

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string &path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string &args, const std::string &env = "") {
    std::string out_path = std::string(SPEGION_CLI_PATH) + ".out.tmp";
    std::string err_path = std::string(SPEGION_CLI_PATH) + ".err.tmp";
    std::string cmd = env + " " + std::string(SPEGION_CLI_PATH) + " " + args + " > " + out_path +
                      " 2> " + err_path;
    int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

std::string corpus(const std::string &name) {
    return std::string(SPEGION_CORPUS_DIR) + "/" + name;
}

std::string write_temp(const std::string &contents) {
    static int counter = 0;
    std::string path = std::string(SPEGION_CLI_PATH) + ".fixture" + std::to_string(counter++) +
                       ".spg";
    std::ofstream out(path);
    out << contents;
    return path;
}

}  // namespace

TEST_CASE("check exit codes: accept, reject, parse error") {
    CHECK(run_cli("check " + corpus("intro_accept.spg")).exit_code == 0);

    CliResult rejected = run_cli("check " + corpus("intro_reject.spg"));
    CHECK(rejected.exit_code == 1);
    CHECK(rejected.err.find("OverAllocation") != std::string::npos);

    std::string empty = write_temp("");
    CHECK(run_cli("check " + empty).exit_code == 2);
    std::remove(empty.c_str());

    std::string broken = write_temp("let x = in");
    CHECK(run_cli("check " + broken).exit_code == 2);
    std::remove(broken.c_str());

    CHECK(run_cli("check /nonexistent.spg").exit_code == 2);
}

TEST_CASE("check --json emits a judgement or a diagnostic") {
    CliResult ok = run_cli("check --json " + corpus("creation.spg"));
    REQUIRE(ok.exit_code == 0);
    auto j = nlohmann::json::parse(ok.out);
    CHECK(j["type"] == "Unit");
    CHECK(j["effect"] == "{fresh r1 3} x {alloc 1 r1} x {alloc 2 r1}");

    CliResult bad = run_cli("check --json " + corpus("intro_reject.spg"));
    REQUIRE(bad.exit_code == 1);
    auto d = nlohmann::json::parse(bad.out);
    CHECK(d["kind"] == "EffectComposition");
    CHECK(d["effect"]["kind"] == "OverAllocation");
    CHECK(d["span"]["line"].get<int>() >= 1);
    CHECK(d.contains("rule"));
}

TEST_CASE("corpus verdicts") {
    const char *accepted[] = {"creation.spg",  "intro_accept.spg", "two_regions_fn.spg",
                              "recursion.spg", "loop.spg",         "linked_list.spg",
                              "splitting.spg", "rec_omega.spg",    "rec_inside.spg",
                              "pos1.spg",      "pos2.spg"};
    for (const char *name : accepted) {
        CliResult r = run_cli("check " + corpus(name));
        INFO(name << ": " << r.err);
        CHECK(r.exit_code == 0);
    }
    const char *rejected[] = {"intro_reject.spg", "use_after_free.spg", "rec_finite_free.spg",
                              "neg1.spg", "neg2.spg"};
    for (const char *name : rejected) {
        CliResult r = run_cli("check " + corpus(name));
        INFO(name << ": " << r.err);
        CHECK(r.exit_code == 1);
    }
}

TEST_CASE("run prints the final value and a store summary") {
    CliResult r = run_cli("run " + corpus("recursion.spg"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("= 0") != std::string::npos);
    CHECK(r.out.find("store:") != std::string::npos);

    CliResult ll = run_cli("run " + corpus("linked_list.spg"));
    REQUIRE(ll.exit_code == 0);
    CHECK(ll.out.find("= 1") != std::string::npos);

    CliResult sp = run_cli("run " + corpus("splitting.spg"));
    REQUIRE(sp.exit_code == 0);
    CHECK(sp.out.find("= 1") != std::string::npos);

    // rejected programs do not run
    CHECK(run_cli("run " + corpus("use_after_free.spg")).exit_code == 1);
}

TEST_CASE("run --unsafe demonstrates stuck states") {
    std::string prog = write_temp("let x = newrgn [3] in (freergn x; () [1] at x)");
    CliResult checked = run_cli("run " + prog);
    CHECK(checked.exit_code == 1);  // rejected by the checker

    CliResult unsafe = run_cli("run --unsafe " + prog);
    CHECK(unsafe.exit_code == 1);
    CHECK(unsafe.err.find("MissingRegion") != std::string::npos);
    std::remove(prog.c_str());

    // a too-small annotation sticks with a size report
    std::string fat = write_temp(
        "let y = newrgn [5] in "
        "((fun x : (Unit, regionOf(y)) -> (fun z -> x) [1] at glob) [1] at glob) y");
    CliResult r = run_cli("run --unsafe " + fat);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("AnnotationTooSmall") != std::string::npos);
    std::remove(fat.c_str());
}

TEST_CASE("trace streams one snapshot per rule") {
    std::string prog = write_temp("newrgn [4]");
    CliResult r = run_cli("trace " + prog);
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::vector<nlohmann::json> snaps;
    while (std::getline(lines, line)) snaps.push_back(nlohmann::json::parse(line));
    REQUIRE(snaps.size() == 3);  // init, e-newrgn, footer
    CHECK(snaps[0]["rule"] == "init");
    CHECK(snaps[1]["rule"] == "e-newrgn");
    CHECK(snaps[1]["store"].contains("r2"));
    CHECK(snaps[2]["outcome"] == "done");
    std::remove(prog.c_str());
}

TEST_CASE("fuel limits evaluation, from the flag and the environment") {
    std::string spin = write_temp(
        "letrec f {a, r, eff} n = "
        "(if n == 0 [1] at glob then 0 [1] at glob else (f @ (Int, glob)) (n - 0 [1] at glob)) [1] at glob in "
        "(f @ (Int, glob)) (1 [1] at glob)");
    CliResult flag = run_cli("run --fuel 40 " + spin);
    CHECK(flag.exit_code == 1);
    CHECK(flag.err.find("out of fuel") != std::string::npos);

    CliResult env = run_cli("run " + spin, "SPEGION_FUEL=40");
    CHECK(env.exit_code == 1);
    CHECK(env.err.find("out of fuel") != std::string::npos);
    std::remove(spin.c_str());
}

TEST_CASE("strict-figure mode drops the use-after-free extension") {
    // this rejection relies on the composition-level use-after-free check
    CliResult checked = run_cli("check " + corpus("neg2.spg"));
    CHECK(checked.exit_code == 1);
    CliResult strict = run_cli("check --strict-figures " + corpus("neg2.spg"));
    CHECK(strict.exit_code == 0);
}

TEST_CASE("the soundness subcommand writes a clean report") {
    std::string report = std::string(SPEGION_CLI_PATH) + ".report.json";
    CliResult r = run_cli("soundness --depth 2 --seeds 25 --report " + report);
    REQUIRE(r.exit_code == 0);
    auto j = nlohmann::json::parse(slurp(report));
    CHECK(j["checked"].get<int>() > 25);
    CHECK(j["checked"] == j["passed"]);
    CHECK(j["counterexamples"].empty());
    std::remove(report.c_str());
}
