// Acceptance suite: one criterion per check, one PASS/FAIL line each.
// Exit code = number of failed criteria.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "spikegram/equiv_suite.hpp"
#include "spikegram/manifest.hpp"
#include "spikegram/tasks.hpp"

using namespace spikegram;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSuiteSeed = 20250810;

struct Outcome {
    bool ok = false;
    std::string detail;
};

// ---- 1. pass-through ------------------------------------------------------

Outcome pass_through() {
    int passed = 0;
    const int cases = 200;
    for (int i = 0; i < cases; ++i) {
        const std::uint64_t seed = derive_seed(kSuiteSeed, "pass-through", i);
        Rng rng(seed);
        const int n = static_cast<int>(rng.next_int(2, 8));
        Alphabet ab = make_alphabet(n, 8, 50, 4, derive_seed(seed, "alphabet"));
        const int L = static_cast<int>(rng.next_int(2, 5));
        ChainSpec spec = ChainSpec::fitted(ab, L, 8);
        Sentence s;
        const int len = static_cast<int>(rng.next_int(0, 8));
        for (int k = 0; k < len; ++k)
            s.push_back(static_cast<SymbolId>(rng.next_below(ab.size())));
        Network net;
        Chain chain(net, spec, ab);
        chain.write_sentence(net, ab, s, 100);
        net.run_until(chain.horizon(100));
        auto read = chain.read_sentence(net, ab, spec.L - 1, 100).to_sentence();
        if (read && *read == s) ++passed;
    }
    return {passed == cases,
            std::to_string(passed) + "/" + std::to_string(cases) + " sentences read back exactly"};
}

// ---- 2 & 3. oracle equivalence and suppression ----------------------------

EquivalenceSuiteResult& equivalence_result() {
    static EquivalenceSuiteResult result = [] {
        EquivParams params; // 100 cases, <= 8 rules, alphabet <= 6, sentences <= 4, 6 steps
        return run_equivalence_suite(params, derive_seed(kSuiteSeed, "equiv"));
    }();
    return result;
}

Outcome oracle_equivalence() {
    auto& r = equivalence_result();
    std::string detail = std::to_string(r.passed) + "/" + std::to_string(r.cases) +
                         " cases step-for-step equal, " + std::to_string(r.rewrites) +
                         " rewrites";
    if (!r.failures.empty())
        detail += "; first divergence: " + r.failures.front().divergence.kind + " (" +
                  r.failures.front().divergence.detail + ")";
    return {r.all_passed() && r.rewrites > 0, detail};
}

Outcome suppression() {
    auto& r = equivalence_result();
    int suppression_failures = 0;
    for (const auto& f : r.failures)
        if (f.divergence.kind == "suppression") ++suppression_failures;
    std::string detail = std::to_string(r.rewrites) +
                         " rewrites raster-audited downstream of the tap, " +
                         std::to_string(suppression_failures) + " stray-spike findings";
    return {suppression_failures == 0 && r.rewrites > 0, detail};
}

// ---- 4. context gating -----------------------------------------------------

Outcome gating() {
    int passed = 0, positives = 0, negatives = 0;
    const int cases = 50;
    for (int i = 0; i < cases; ++i) {
        const std::uint64_t seed = derive_seed(kSuiteSeed, "gating", i);
        Rng rng(seed);
        Alphabet ab =
            make_alphabet(static_cast<int>(rng.next_int(4, 6)), 8, 50, 4,
                          derive_seed(seed, "alphabet"));
        RuleSet rs;
        rs.start = 0;
        AbstractRule rule;
        rule.condition = static_cast<SymbolId>(rng.next_below(ab.size()));
        rule.action = {static_cast<SymbolId>(rng.next_below(ab.size()))};
        rule.probability = 1.0;
        rule.context = RuleContext{static_cast<SymbolId>(rng.next_below(ab.size())),
                                   i % 2 == 0 ? ContextRelation::left_adjacent
                                              : ContextRelation::anywhere_before};
        rs.rules = {rule};
        ChainSpec spec = ChainSpec::fitted(ab, 3, 8);
        SpikingEngine engine(ab, spec, rs);
        // half the cases embed the context; half avoid the context symbol
        Sentence s;
        const int len = static_cast<int>(rng.next_int(2, 6));
        const bool with_context = i % 4 < 2;
        for (int k = 0; k < len; ++k) {
            SymbolId sym = static_cast<SymbolId>(rng.next_below(ab.size()));
            if (!with_context)
                while (sym == rule.context->symbol)
                    sym = static_cast<SymbolId>(rng.next_below(ab.size()));
            s.push_back(sym);
        }
        if (with_context) {
            s[0] = rule.context->symbol;
            s[static_cast<std::size_t>(len / 2)] = rule.condition;
        }
        auto expected = eligible_sites(rs, s);
        auto probed = engine.probe(s);
        if (probed.clean && probed.sites == expected) ++passed;
        if (!expected.empty())
            ++positives;
        else
            ++negatives;
    }
    return {passed == cases && positives >= 10 && negatives >= 10,
            std::to_string(passed) + "/" + std::to_string(cases) + " cases fire iff satisfied (" +
                std::to_string(positives) + " firing, " + std::to_string(negatives) +
                " vetoed)"};
}

// ---- 5. grammar soundness ---------------------------------------------------

RuleSet anbn_rules() {
    RuleSet rs;
    rs.start = 0;
    rs.terminals = {1, 2};
    AbstractRule grow;
    grow.condition = 0;
    grow.action = {1, 0, 2};
    grow.probability = 0.5;
    AbstractRule stop;
    stop.condition = 0;
    stop.action = {1, 2};
    stop.probability = 0.5;
    rs.rules = {grow, stop};
    return rs;
}

Outcome grammar_soundness() {
    RuleSet rs = anbn_rules();
    LanguageSpec spec;
    spec.kind = LanguageKind::a_n_b_n;
    spec.a = 1;
    spec.b = 2;
    const double validity =
        generation_validity(rs, spec, 1000, derive_seed(kSuiteSeed, "anbn"), 8);
    auto lang = enumerate_language(rs, 8, 4);
    const std::set<Sentence> expected = {{1, 2},
                                         {1, 1, 2, 2},
                                         {1, 1, 1, 2, 2, 2},
                                         {1, 1, 1, 1, 2, 2, 2, 2}};
    const bool lang_ok = !lang.truncated && lang.sentences == expected;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "validity %.4f over 1000 derivations; depth-4 language %s (%zu sentences)",
                  validity, lang_ok ? "exact" : "WRONG", lang.sentences.size());
    return {validity == 1.0 && lang_ok, buf};
}

// ---- 6. Marcus training independence ---------------------------------------

Outcome marcus_training_independence() {
    MarcusParams params; // 40 sentences/split, noise {0, eps, 3eps, 6eps}, 5 seeds
    MarcusReport r = run_marcus(params, derive_seed(kSuiteSeed, "marcus"));
    const bool zero_ok = r.train_accuracy == 1.0 && r.test_accuracy == 1.0 &&
                         r.test_accuracy == r.train_accuracy;
    double acc_eps = 0, acc_3eps = 0, acc_6eps = 0, train_eps = 0;
    for (const auto& p : r.by_noise) {
        if (p.jitter_max == 3) {
            acc_eps = p.test_accuracy;
            train_eps = p.train_accuracy;
        }
        if (p.jitter_max == 9) acc_3eps = p.test_accuracy;
        if (p.jitter_max == 18) acc_6eps = p.test_accuracy;
    }
    const bool eps_ok = acc_eps >= 0.99 && train_eps >= 0.99;
    const bool monotone = acc_eps >= acc_3eps && acc_3eps >= acc_6eps && acc_6eps <= 0.75;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "zero-noise train=%.3f held-out=%.3f; held-out at eps/3eps/6eps = "
                  "%.3f/%.3f/%.3f",
                  r.train_accuracy, r.test_accuracy, acc_eps, acc_3eps, acc_6eps);
    return {zero_ok && eps_ok && monotone, buf};
}

// ---- 7. Price identity -------------------------------------------------------

Outcome price_identity() {
    Rng rng(derive_seed(kSuiteSeed, "price"));
    int passed = 0;
    const int cases = 1000;
    for (int i = 0; i < cases; ++i) {
        GenerationRecord rec;
        const int n = static_cast<int>(rng.next_int(2, 60));
        double w_sum = 0.0;
        for (int k = 0; k < n; ++k) {
            IndividualRecord row;
            row.id = static_cast<std::uint64_t>(k);
            row.w = static_cast<double>(rng.next_int(0, 6));
            row.z = rng.next_unit() * 20.0 - 10.0;
            row.z_prime = row.z + rng.next_unit() * 4.0 - 2.0;
            w_sum += row.w;
            rec.rows.push_back(row);
        }
        if (w_sum == 0.0) rec.rows[0].w = 1.0;
        auto terms = price_terms(rec);
        const double residual = std::abs(terms.dz - (terms.selection + terms.transmission));
        if (residual / std::max(1.0, std::abs(terms.dz)) < 1e-9) ++passed;
    }
    return {passed == cases,
            std::to_string(passed) + "/" + std::to_string(cases) +
                " synthetic records with relative residual < 1e-9"};
}

// ---- 8. error catastrophe -----------------------------------------------------

Outcome error_catastrophe() {
    QuasispeciesConfig cfg;
    cfg.L = 10;
    cfg.sigma = 10.0;
    cfg.pop_size = 1000;
    cfg.generations = 500;
    const double mu_star = quasispecies_threshold(cfg.L, cfg.sigma);
    auto late_mean_over_seeds = [&](double mu) {
        double total = 0.0;
        for (int s = 0; s < 5; ++s) {
            cfg.mu = mu;
            Rng rng(derive_seed(kSuiteSeed, "quasispecies",
                                (static_cast<std::uint64_t>(mu * 1e6) << 8) |
                                    static_cast<std::uint64_t>(s)));
            auto traj = quasispecies_run(cfg, rng);
            double acc = 0.0;
            const std::size_t half = traj.size() / 2;
            for (std::size_t i = traj.size() - half; i < traj.size(); ++i) acc += traj[i];
            total += acc / static_cast<double>(half);
        }
        return total / 5.0;
    };
    const double below = late_mean_over_seeds(0.5 * mu_star);
    const double above = late_mean_over_seeds(1.5 * mu_star);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "mu* = %.4f; late-run master frequency %.4f at 0.5 mu* (need > 0.1), "
                  "%.5f at 1.5 mu* (need < 0.02), 5 seeds each",
                  mu_star, below, above);
    return {below > 0.1 && above < 0.02, buf};
}

// ---- 9. evolution smoke --------------------------------------------------------

Outcome evolution_smoke() {
    int reached = 0;
    std::string gens;
    for (int s = 0; s < 5; ++s) {
        GrammarEvolutionParams params; // pop 50, 50 generations, target {[a,b]}
        auto report =
            run_grammar_evolution(params, derive_seed(kSuiteSeed, "evolution-smoke", s));
        if (report.target_reached_generation && *report.target_reached_generation <= 50) {
            ++reached;
            gens += (gens.empty() ? "" : ",") + std::to_string(*report.target_reached_generation);
        } else {
            gens += (gens.empty() ? "" : ",") + std::string("-");
        }
    }
    return {reached >= 4, std::to_string(reached) +
                              "/5 seeds reached full validity within 50 generations (at gens " +
                              gens + ")"};
}

// ---- 10. reproducibility --------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json manifest_outputs(const fs::path& dir) {
    std::ifstream in(dir / "run_manifest.json");
    nlohmann::json j;
    in >> j;
    return j.at("outputs");
}

Outcome reproducibility() {
    const fs::path work = fs::temp_directory_path() / "spikegram_acceptance_repro";
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cfg_path = work / "config.json";
    {
        nlohmann::json rules{{"start", 0},
                             {"terminals", {1, 2}},
                             {"rules",
                              {{{"cond", 0}, {"action", {1, 0, 2}}, {"p", 0.5}},
                               {{"cond", 0}, {"action", {1, 2}}, {"p", 0.5}}}}};
        nlohmann::json cfg{{"seed", 99},
                           {"alphabet", {{"n", 4}}},
                           {"rules", rules},
                           {"equiv", {{"cases", 8}}}};
        std::ofstream out(cfg_path);
        out << cfg.dump(2);
    }
    const std::string cli = SPIKEGRAM_CLI_PATH;
    auto run = [&](const std::string& sub, const std::string& extra, const fs::path& dir) {
        const std::string cmd = cli + " " + sub + " --config " + cfg_path.string() +
                                " --out-dir " + dir.string() + extra + " > " +
                                (dir.string() + ".log") + " 2>&1";
        return std::system(cmd.c_str());
    };
    std::vector<std::pair<std::string, std::string>> runs = {
        {"derive", " --engine oracle"}, {"derive", " --engine spiking"}, {"equiv", ""}};
    int checked_files = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const fs::path d1 = work / ("run" + std::to_string(i) + "a");
        const fs::path d2 = work / ("run" + std::to_string(i) + "b");
        if (run(runs[i].first, runs[i].second, d1) != 0) return {false, runs[i].first + " failed"};
        if (run(runs[i].first, runs[i].second, d2) != 0) return {false, runs[i].first + " failed"};
        for (const auto& entry : fs::directory_iterator(d1)) {
            const std::string name = entry.path().filename().string();
            if (name == "run_manifest.json") continue; // timestamps live here
            if (slurp(entry.path()) != slurp(d2 / name))
                return {false, runs[i].first + ": " + name + " differs between runs"};
            ++checked_files;
        }
        if (manifest_outputs(d1) != manifest_outputs(d2))
            return {false, runs[i].first + ": manifest inventory hashes differ"};
    }
    fs::remove_all(work);
    return {true, std::to_string(checked_files) +
                      " data files byte-identical across repeated runs; manifest hashes equal"};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"pass-through", pass_through},
        {"oracle equivalence", oracle_equivalence},
        {"write-back suppression", suppression},
        {"context gating", gating},
        {"grammar soundness", grammar_soundness},
        {"marcus training independence", marcus_training_independence},
        {"price identity", price_identity},
        {"error catastrophe", error_catastrophe},
        {"evolution smoke", evolution_smoke},
        {"reproducibility", reproducibility},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2zu. %-30s %s\n", outcome.ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].name, outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.ok) ++failures;
    }
    return failures;
}
