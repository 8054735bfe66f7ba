// spikegram command-line driver: chains, rewrite circuits, grammars,
// evolution experiments and the oracle-equivalence suite.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spikegram/config.hpp"
#include "spikegram/equiv_suite.hpp"
#include "spikegram/manifest.hpp"

namespace fs = std::filesystem;
using namespace spikegram;

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

struct RunContext {
    ExperimentConfig cfg;
    fs::path out_dir;
    RunManifest manifest;

    RunContext(ExperimentConfig c, fs::path dir)
        : cfg(std::move(c)), out_dir(std::move(dir)),
          manifest(cfg.to_json(), cfg.seed, now_iso8601()) {
        fs::create_directories(out_dir);
    }

    void write_text(const std::string& name, const std::string& content) {
        const fs::path path = out_dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << content;
        out.close();
        manifest.add_output(path);
    }

    void write_json(const std::string& name, const nlohmann::json& j) {
        write_text(name, j.dump(2) + "\n");
    }

    void finish() { manifest.write(out_dir, now_iso8601()); }
};

int cmd_alphabet(RunContext& ctx) {
    Alphabet ab = ctx.cfg.alphabet.build(derive_seed(ctx.cfg.seed, "alphabet-cmd"));
    ctx.write_json("alphabet.json", alphabet_to_json(ab));
    int min_d = ab.W + 1;
    for (SymbolId i = 0; i < ab.size(); ++i)
        for (SymbolId j = i + 1; j < ab.size(); ++j)
            min_d = std::min(min_d, distance(ab.templates[static_cast<std::size_t>(i)],
                                             ab.templates[static_cast<std::size_t>(j)], ab.eps));
    std::printf("alphabet: %d symbols, W=%d D=%lld eps=%lld, min pairwise distance %d\n",
                ab.size(), ab.W, static_cast<long long>(ab.D),
                static_cast<long long>(ab.eps), ab.size() > 1 ? min_d : 0);
    ctx.finish();
    return 0;
}

int cmd_simulate(RunContext& ctx) {
    Alphabet ab = ctx.cfg.alphabet.build(derive_seed(ctx.cfg.seed, "alphabet-cmd"));
    ChainSpec spec = ctx.cfg.chain_spec(ab);
    Network net;
    Chain chain(net, spec, ab);
    Rng noise_rng(derive_seed(ctx.cfg.seed, "simulate-noise"));
    const TimeTick t0 = 100;
    chain.write_sentence(net, ab, ctx.cfg.sentence, t0,
                         ctx.cfg.noise.silent() ? nullptr : &ctx.cfg.noise, &noise_rng);
    net.run_until(chain.horizon(t0));
    auto read = chain.read_sentence(net, ab, spec.L - 1, t0);

    std::ostringstream trace;
    net.write_trace_csv(trace);
    ctx.write_text("trace.csv", trace.str());
    ctx.write_json("chain_layout.json", chain.layout_json());
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& slot : read.slots) {
        switch (slot.kind) {
            case SlotRead::Kind::empty: slots.push_back(nullptr); break;
            case SlotRead::Kind::garbled: slots.push_back("garbled"); break;
            case SlotRead::Kind::matched:
                slots.push_back({{"symbol", slot.decoded.symbol},
                                 {"mismatch", slot.decoded.mismatch},
                                 {"shift", slot.decoded.shift}});
                break;
        }
    }
    auto sentence = read.to_sentence();
    nlohmann::json result{{"written", ctx.cfg.sentence}, {"slots", slots}};
    result["read"] = sentence ? nlohmann::json(*sentence) : nlohmann::json(nullptr);
    ctx.write_json("read.json", result);
    std::printf("simulate: wrote %zu tokens, read %s\n", ctx.cfg.sentence.size(),
                sentence ? sentence_to_string(*sentence).c_str() : "(garbled)");
    ctx.finish();
    return sentence && *sentence == ctx.cfg.sentence ? 0 : 1;
}

int cmd_derive(RunContext& ctx) {
    if (!ctx.cfg.rules) throw ConfigError("derive requires a 'rules' section in the config");
    const RuleSet& rules = *ctx.cfg.rules;
    rules.validate(ctx.cfg.alphabet.n);
    RngDecisionStream stream(derive_seed(ctx.cfg.seed, "derive-stream"));
    DerivationTrace trace;
    if (ctx.cfg.derive.engine == "spiking") {
        Alphabet ab = ctx.cfg.alphabet.build(derive_seed(ctx.cfg.seed, "alphabet-cmd"));
        ChainSpec spec = ctx.cfg.chain_spec(ab, /*L=*/3);
        EngineConfig engine_cfg;
        engine_cfg.tap_stage = ctx.cfg.derive.tap_stage;
        SpikingEngine engine(ab, spec, rules, engine_cfg);
        trace = derive(rules, ctx.cfg.derive.max_steps, stream, engine.engine());
    } else {
        const int capacity = ctx.cfg.chain ? ctx.cfg.chain->capacity : 8;
        trace = derive(rules, capacity, ctx.cfg.derive.max_steps, stream);
    }
    ctx.write_text("derivation.jsonl", trace.to_jsonl());
    ctx.write_json("decisions.json", stream.to_json());
    std::printf("derive[%s]: %zu steps, terminated_by=%s, final %s\n",
                ctx.cfg.derive.engine.c_str(), trace.steps.size(),
                to_string(trace.terminated_by).c_str(),
                sentence_to_string(trace.final_sentence).c_str());
    ctx.finish();
    return 0;
}

int cmd_equiv(RunContext& ctx) {
    EquivalenceSuiteResult result =
        run_equivalence_suite(ctx.cfg.equiv, derive_seed(ctx.cfg.seed, "equiv-suite"));
    ctx.write_json("equiv_report.json", result.to_json());
    std::printf("equiv: %d/%d cases equal (%d rewrites audited)\n", result.passed,
                result.cases, result.rewrites);
    for (const auto& f : result.failures)
        std::fprintf(stderr, "  case %d step %d: %s (%s)\n", f.case_index, f.divergence.step,
                     f.divergence.kind.c_str(), f.divergence.detail.c_str());
    ctx.finish();
    return result.all_passed() ? 0 : 4;
}

int cmd_evolve(RunContext& ctx) {
    GrammarEvolutionReport report =
        run_grammar_evolution(ctx.cfg.evolution, derive_seed(ctx.cfg.seed, "evolve-cmd"));
    std::ostringstream history;
    write_history_csv(history, report.history);
    ctx.write_text("history.csv", history.str());
    ctx.write_json("best_rules.json", ruleset_to_json(report.best.rules));
    ctx.write_json("report.json", report.to_json());
    std::string reached = report.target_reached_generation
                              ? ", target at gen " + std::to_string(*report.target_reached_generation)
                              : "";
    std::printf("evolve: best fitness %.4f (%zu rules), oracle validity %.3f, "
                "spiking validity %.3f%s\n",
                report.best.fitness, report.best.rules.rules.size(),
                report.best_validity_oracle, report.best_validity_spiking, reached.c_str());
    ctx.finish();
    return 0;
}

int cmd_marcus(RunContext& ctx) {
    MarcusReport report = run_marcus(ctx.cfg.marcus, derive_seed(ctx.cfg.seed, "marcus-cmd"));
    std::ostringstream csv;
    report.write_accuracy_csv(csv);
    ctx.write_text("accuracy_by_noise.csv", csv.str());
    ctx.write_json("report.json", report.to_json());
    std::printf("marcus: train %.3f, held-out %.3f at zero noise\n", report.train_accuracy,
                report.test_accuracy);
    ctx.finish();
    return 0;
}

int cmd_eigen_sweep(RunContext& ctx) {
    const auto& q = ctx.cfg.quasispecies;
    const double mu_star = quasispecies_threshold(q.length, q.sigma);
    std::ostringstream csv;
    csv << "mu,mean_master_freq\n";
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t fi = 0; fi < q.mu_factors.size(); ++fi) {
        QuasispeciesConfig run_cfg;
        run_cfg.L = q.length;
        run_cfg.sigma = q.sigma;
        run_cfg.pop_size = q.pop_size;
        run_cfg.generations = q.generations;
        run_cfg.mu = q.mu_factors[fi] * mu_star;
        double mean = 0.0;
        for (int s = 0; s < q.seeds; ++s) {
            Rng rng(derive_seed(ctx.cfg.seed, "eigen-sweep",
                                (static_cast<std::uint64_t>(fi) << 20) |
                                    static_cast<std::uint64_t>(s)));
            auto traj = quasispecies_run(run_cfg, rng);
            double late = 0.0;
            const std::size_t half = traj.size() / 2;
            for (std::size_t i = traj.size() - half; i < traj.size(); ++i) late += traj[i];
            mean += late / static_cast<double>(half);
        }
        mean /= static_cast<double>(q.seeds);
        char line[96];
        std::snprintf(line, sizeof(line), "%.17g,%.17g\n", run_cfg.mu, mean);
        csv << line;
        points.push_back(
            {{"mu", run_cfg.mu}, {"factor", q.mu_factors[fi]}, {"mean_master_freq", mean}});
    }
    ctx.write_text("eigen_sweep.csv", csv.str());
    ctx.write_json("report.json", {{"mu_star", mu_star},
                                   {"L", q.length},
                                   {"sigma", q.sigma},
                                   {"points", points}});
    std::printf("eigen-sweep: mu* = %.6f, %zu points\n", mu_star, q.mu_factors.size());
    ctx.finish();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spikegram: spike-pattern symbol chains, rewrite circuits and evolution"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out-dir", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config)");

    auto* sub_alphabet = app.add_subcommand("alphabet", "generate and inspect an alphabet");
    auto* sub_simulate = app.add_subcommand("simulate", "write/read a sentence through a chain");
    auto* sub_derive = app.add_subcommand("derive", "grammar derivation from the start symbol");
    std::string engine_flag;
    sub_derive->add_option("--engine", engine_flag, "oracle | spiking");
    auto* sub_equiv = app.add_subcommand("equiv", "randomized oracle-equivalence suite");
    int cases_flag = 0;
    sub_equiv->add_option("--cases", cases_flag, "number of random cases");
    auto* sub_evolve = app.add_subcommand("evolve", "evolve rule sets toward a language target");
    auto* sub_marcus = app.add_subcommand("marcus", "ABA/ABB discrimination experiment");
    auto* sub_eigen = app.add_subcommand("eigen-sweep", "quasispecies copy-error sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (!engine_flag.empty()) {
            if (engine_flag != "oracle" && engine_flag != "spiking")
                throw ConfigError("--engine must be 'oracle' or 'spiking'");
            cfg.derive.engine = engine_flag;
        }
        if (cases_flag > 0) cfg.equiv.cases = cases_flag;

        RunContext ctx(std::move(cfg), out_dir);
        if (sub_alphabet->parsed()) return cmd_alphabet(ctx);
        if (sub_simulate->parsed()) return cmd_simulate(ctx);
        if (sub_derive->parsed()) return cmd_derive(ctx);
        if (sub_equiv->parsed()) return cmd_equiv(ctx);
        if (sub_evolve->parsed()) return cmd_evolve(ctx);
        if (sub_marcus->parsed()) return cmd_marcus(ctx);
        if (sub_eigen->parsed()) return cmd_eigen_sweep(ctx);
        std::fprintf(stderr, "no subcommand selected\n");
        return 2;
    } catch (const EquivalenceError& e) {
        std::fprintf(stderr, "equivalence failure: %s\n", e.what());
        return 4;
    } catch (const InfeasibleAlphabetError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
