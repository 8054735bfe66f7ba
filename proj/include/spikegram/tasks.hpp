#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikegram/engine.hpp"
#include "spikegram/evolution.hpp"

namespace spikegram {

struct LabeledSentence {
    Sentence tokens;
    bool same = false; // true iff tokens[0] == tokens[2]
};

/// ABA/ABB discrimination data: balanced labeled triples over a train token
/// set, plus a held-out split over tokens that never appear in training.
struct MarcusDataset {
    std::vector<SymbolId> train_tokens;
    std::vector<SymbolId> test_tokens;
    std::vector<LabeledSentence> train;
    std::vector<LabeledSentence> test;
};

/// Content tokens are ids [0, n_train + n_test); the SAME/DIFF output
/// symbols live above them, so the splits stay disjoint by construction.
inline MarcusDataset make_marcus_dataset(int n_train_tokens, int n_test_tokens,
                                         int n_sentences_per_split, std::uint64_t seed,
                                         int alphabet_size) {
    if (n_train_tokens < 2) throw ConfigError("marcus dataset needs >= 2 train tokens");
    if (n_test_tokens < 2)
        throw ConfigError("marcus dataset needs >= 2 held-out tokens "
                          "(the generalization test is impossible without them)");
    if (n_sentences_per_split < 2) throw ConfigError("marcus dataset needs >= 2 sentences");
    if (alphabet_size < n_train_tokens + n_test_tokens + 2)
        throw ConfigError("alphabet too small: need " +
                          std::to_string(n_train_tokens + n_test_tokens + 2) + " symbols, got " +
                          std::to_string(alphabet_size));
    MarcusDataset ds;
    std::vector<SymbolId> pool;
    for (SymbolId s = 0; s < n_train_tokens + n_test_tokens; ++s) pool.push_back(s);
    Rng rng(derive_seed(seed, "marcus-dataset"));
    for (std::size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[rng.next_below(i)]);
    ds.train_tokens.assign(pool.begin(), pool.begin() + n_train_tokens);
    ds.test_tokens.assign(pool.begin() + n_train_tokens, pool.end());
    std::sort(ds.train_tokens.begin(), ds.train_tokens.end());
    std::sort(ds.test_tokens.begin(), ds.test_tokens.end());

    auto fill = [&](const std::vector<SymbolId>& tokens, std::vector<LabeledSentence>& out) {
        for (int i = 0; i < n_sentences_per_split; ++i) {
            SymbolId x = tokens[rng.next_below(tokens.size())];
            SymbolId y = x;
            while (y == x) y = tokens[rng.next_below(tokens.size())];
            const bool aba = i % 2 == 0; // balanced within one
            LabeledSentence ls;
            ls.tokens = aba ? Sentence{x, y, x} : Sentence{x, y, y};
            ls.same = aba;
            out.push_back(std::move(ls));
        }
    };
    fill(ds.train_tokens, ds.train);
    fill(ds.test_tokens, ds.test);
    return ds;
}

/// Which slots the comparator wires and which symbols it writes.
struct EqualityWiring {
    int slot_i = 0;
    int slot_j = 2;
    SymbolId out_same = kNoSymbol;
    SymbolId out_diff = kNoSymbol;
};

/// Fraction of sentences whose produced SAME/DIFF token matches the label.
/// Each sentence runs on a fresh chain; unreadable answers count as wrong.
inline double fitness_discrimination(const EqualityWiring& wiring, const Alphabet& alphabet,
                                     const ChainSpec& spec,
                                     const std::vector<LabeledSentence>& dataset,
                                     const NoiseModel& noise, std::uint64_t noise_seed,
                                     TimeTick jitter_budget = 0) {
    if (dataset.empty()) throw ConfigError("fitness_discrimination: empty dataset");
    Rng rng(derive_seed(noise_seed, "marcus-noise"));
    const TimeTick t0 = 100;
    const TimeTick max_lead = spec.write_lead + alphabet.D + jitter_budget + 4;
    const TimeTick late_slack = jitter_budget + 4;
    int correct = 0;
    for (const auto& ls : dataset) {
        Network net;
        Chain chain(net, spec, alphabet);
        EqualityCircuit eq =
            build_equality_rule(net, chain, alphabet, wiring.slot_i, wiring.slot_j,
                                wiring.out_same, wiring.out_diff, 0, 2,
                                jitter_budget > 0 ? jitter_budget : 6 * alphabet.eps);
        chain.write_sentence(net, alphabet, ls.tokens, t0, noise.silent() ? nullptr : &noise,
                             &rng);
        net.run_until(chain.horizon(t0));
        auto read = chain.read_sentence(net, alphabet, spec.L - 1, t0, 0, max_lead, late_slack);
        const auto& slot = read.slots[static_cast<std::size_t>(eq.slot_j + 1)];
        const SymbolId want = ls.same ? wiring.out_same : wiring.out_diff;
        if (slot.kind == SlotRead::Kind::matched && slot.decoded.symbol == want) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

struct MarcusParams {
    int n_train_tokens = 4;
    int n_test_tokens = 4;
    int n_sentences = 40; // per split
    int w = 8;
    TimeTick token_duration = 400;
    TimeTick eps = 3;
    int d_min = 4;
    TimeTick strong_gap = 13; // > 4*eps: DIFF stays DIFF under jitter <= eps
    std::vector<TimeTick> noise_levels = {0, 3, 9, 18};
    int n_noise_seeds = 5;
    bool evolve_wiring = false; // discover the comparator slots by search
    int evolve_population = 12;
    int evolve_generations = 12;
};

struct MarcusReport {
    MarcusDataset dataset;
    EqualityWiring wiring;
    double train_accuracy = 0.0; // zero noise
    double test_accuracy = 0.0;  // zero noise, held-out tokens
    struct NoisePoint {
        TimeTick jitter_max = 0;
        double train_accuracy = 0.0;
        double test_accuracy = 0.0;
    };
    std::vector<NoisePoint> by_noise;
    std::optional<int> wiring_found_at_generation;

    nlohmann::json to_json() const {
        nlohmann::json noise = nlohmann::json::array();
        for (const auto& p : by_noise)
            noise.push_back({{"jitter_max", p.jitter_max},
                             {"train_accuracy", p.train_accuracy},
                             {"test_accuracy", p.test_accuracy}});
        nlohmann::json j{{"train_accuracy", train_accuracy},
                         {"test_accuracy", test_accuracy},
                         {"wiring",
                          {{"slot_i", wiring.slot_i},
                           {"slot_j", wiring.slot_j},
                           {"out_same", wiring.out_same},
                           {"out_diff", wiring.out_diff}}},
                         {"train_tokens", dataset.train_tokens},
                         {"test_tokens", dataset.test_tokens},
                         {"accuracy_by_noise", noise}};
        if (wiring_found_at_generation) j["wiring_found_at_generation"] = *wiring_found_at_generation;
        return j;
    }

    void write_accuracy_csv(std::ostream& os) const {
        os << "jitter_max,train_accuracy,test_accuracy\n";
        for (const auto& p : by_noise) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n",
                          static_cast<long long>(p.jitter_max), p.train_accuracy,
                          p.test_accuracy);
            os << buf;
        }
    }
};

inline ChainSpec marcus_chain_spec(const Alphabet& alphabet, TimeTick max_jitter) {
    ChainSpec spec = ChainSpec::fitted(alphabet, /*L=*/3, /*capacity=*/6);
    // room for the comparator's trigger timing and write wobble
    const TimeTick clearance =
        spec.relay_refractory + spec.write_lead + 2 * alphabet.D + max_jitter + 10;
    spec.slot_pitch = std::max(spec.slot_pitch, clearance);
    return spec;
}

inline MarcusReport run_marcus(const MarcusParams& params, std::uint64_t master_seed) {
    const int n_content = params.n_train_tokens + params.n_test_tokens;
    Alphabet alphabet =
        make_alphabet(n_content + 2, params.w, params.token_duration, params.d_min,
                      derive_seed(master_seed, "marcus-alphabet"), params.eps,
                      params.strong_gap);
    TimeTick max_jitter = 0;
    for (TimeTick j : params.noise_levels) max_jitter = std::max(max_jitter, j);
    const TimeTick budget = std::max<TimeTick>(max_jitter, 6 * params.eps);
    ChainSpec spec = marcus_chain_spec(alphabet, budget);

    MarcusReport report;
    report.dataset = make_marcus_dataset(params.n_train_tokens, params.n_test_tokens,
                                         params.n_sentences, master_seed, alphabet.size());
    report.wiring =
        EqualityWiring{0, 2, static_cast<SymbolId>(n_content), static_cast<SymbolId>(n_content + 1)};

    if (params.evolve_wiring) {
        // Small stochastic search over comparator wirings: slots and output
        // assignment must be discovered from train accuracy alone.
        Rng rng(derive_seed(master_seed, "marcus-wiring-search"));
        auto random_wiring = [&] {
            EqualityWiring w;
            w.slot_i = static_cast<int>(rng.next_int(0, 1));
            w.slot_j = static_cast<int>(rng.next_int(w.slot_i + 1, 2));
            const bool flip = rng.bernoulli(0.5);
            w.out_same = static_cast<SymbolId>(flip ? n_content + 1 : n_content);
            w.out_diff = static_cast<SymbolId>(flip ? n_content : n_content + 1);
            return w;
        };
        auto score = [&](const EqualityWiring& w) {
            return fitness_discrimination(w, alphabet, spec, report.dataset.train, NoiseModel{},
                                          0, budget);
        };
        EqualityWiring best = random_wiring();
        double best_score = score(best);
        for (int gen = 0; gen < params.evolve_generations && best_score < 1.0; ++gen) {
            for (int i = 0; i < params.evolve_population; ++i) {
                EqualityWiring cand = random_wiring();
                double s = score(cand);
                if (s > best_score) {
                    best = cand;
                    best_score = s;
                    report.wiring_found_at_generation = gen;
                }
            }
        }
        report.wiring = best;
    }

    report.train_accuracy = fitness_discrimination(report.wiring, alphabet, spec,
                                                   report.dataset.train, NoiseModel{}, 0, budget);
    report.test_accuracy = fitness_discrimination(report.wiring, alphabet, spec,
                                                  report.dataset.test, NoiseModel{}, 0, budget);
    for (TimeTick jitter : params.noise_levels) {
        MarcusReport::NoisePoint point;
        point.jitter_max = jitter;
        NoiseModel noise;
        noise.jitter_max = jitter;
        double train_sum = 0.0, test_sum = 0.0;
        for (int s = 0; s < params.n_noise_seeds; ++s) {
            const std::uint64_t ns =
                derive_seed(master_seed, "marcus-noise-seed",
                            (static_cast<std::uint64_t>(jitter) << 16) |
                                static_cast<std::uint64_t>(s));
            train_sum += fitness_discrimination(report.wiring, alphabet, spec,
                                                report.dataset.train, noise, ns, budget);
            test_sum += fitness_discrimination(report.wiring, alphabet, spec,
                                               report.dataset.test, noise, ns + 1, budget);
        }
        point.train_accuracy = train_sum / params.n_noise_seeds;
        point.test_accuracy = test_sum / params.n_noise_seeds;
        report.by_noise.push_back(point);
    }
    return report;
}

struct GrammarEvolutionParams {
    LanguageSpec target;           // defaults to the enumerated set {[a, b]}
    int alphabet_symbols = 3;      // 0 = start, 1.. = terminals/spares
    std::vector<SymbolId> terminals = {1, 2};
    int population = 50;
    int generations = 50;
    SelectionConfig selection{};
    ErrorModel errors{};
    double parsimony = 0.01;
    int validity_samples = 64;
    int max_rules = 8;
    int capacity = 8;
    int max_steps = 32;
    int init_rules_max = 3;
    int spiking_validation_samples = 20;

    GrammarEvolutionParams() {
        target.kind = LanguageKind::enumerated_set;
        target.sentences = {{1, 2}};
        errors.mu_sub = 0.08;
        errors.mu_del = 0.05;
        errors.mu_dup = 0.05;
        errors.mu_p = 0.05;
    }
};

struct GrammarEvolutionReport {
    std::vector<HistoryRow> history;
    Genome best;
    double best_validity_oracle = 0.0;
    double best_validity_spiking = 0.0;
    double cross_engine_agreement = 0.0; // identical finals on shared streams
    std::optional<int> target_reached_generation; // first gen with validity 1

    nlohmann::json to_json() const {
        nlohmann::json j{{"best_fitness", best.fitness},
                         {"best_rule_count", best.rules.rules.size()},
                         {"best_validity_oracle", best_validity_oracle},
                         {"best_validity_spiking", best_validity_spiking},
                         {"cross_engine_agreement", cross_engine_agreement},
                         {"generations_run", history.empty() ? 0 : history.back().generation + 1}};
        if (target_reached_generation) j["target_reached_generation"] = *target_reached_generation;
        return j;
    }
};

/// Evolve rule sets against a language target, then validate the winner on
/// the spiking engine: rules found by the oracle must also run in tissue.
inline GrammarEvolutionReport run_grammar_evolution(const GrammarEvolutionParams& params,
                                                    std::uint64_t master_seed) {
    if (params.population < 1) throw ConfigError("population must be >= 1");
    MutationContext ctx;
    ctx.alphabet_size = params.alphabet_symbols;
    ctx.max_rules = params.max_rules;

    std::uint64_t next_id = 0;
    Rng init_rng(derive_seed(master_seed, "evolution-init"));
    auto random_symbol = [&](Rng& rng) {
        return static_cast<SymbolId>(rng.next_below(params.alphabet_symbols));
    };
    std::vector<Genome> pop;
    for (int i = 0; i < params.population; ++i) {
        Genome g;
        g.id = next_id++;
        g.rules.start = 0;
        g.rules.terminals = params.terminals;
        g.rules.normalize();
        const int n_rules = static_cast<int>(init_rng.next_int(1, params.init_rules_max));
        for (int r = 0; r < n_rules; ++r) {
            AbstractRule rule;
            rule.condition = random_symbol(init_rng);
            const int alen = static_cast<int>(init_rng.next_int(1, 3));
            for (int k = 0; k < alen; ++k) rule.action.push_back(random_symbol(init_rng));
            rule.probability = 0.25 * static_cast<double>(init_rng.next_int(1, 4));
            g.rules.rules.push_back(rule);
        }
        pop.push_back(std::move(g));
    }

    FitnessFn fn = [&](const Genome& g, std::uint64_t seed) {
        return fitness_language(g, params.target, params.validity_samples, params.parsimony,
                                seed, params.capacity, params.max_steps);
    };

    GrammarEvolutionReport report;
    GenerationRecord last_record;
    auto summarize = [&](int gen) {
        HistoryRow row;
        row.generation = gen;
        row.best = -1e300;
        for (const auto& g : pop) {
            row.best = std::max(row.best, g.fitness);
            row.mean += g.fitness;
            row.rule_count_mean += genome_trait(g);
        }
        row.mean /= static_cast<double>(pop.size());
        row.rule_count_mean /= static_cast<double>(pop.size());
        if (!last_record.rows.empty()) {
            auto terms = price_terms(last_record);
            row.price_cov = terms.selection;
            row.price_trans = terms.transmission;
        }
        report.history.push_back(row);
    };

    for (int gen = 0; gen <= params.generations; ++gen) {
        evaluate_population(pop, fn, master_seed, gen);
        summarize(gen);
        const Genome* best = &pop.front();
        for (const auto& g : pop)
            if (g.fitness > best->fitness || (g.fitness == best->fitness && g.id < best->id))
                best = &g;
        const double validity = best->fitness + params.parsimony * genome_trait(*best);
        if (!report.target_reached_generation && validity >= 1.0 - 1e-9)
            report.target_reached_generation = gen;
        if (gen == params.generations) {
            report.best = *best;
            break;
        }
        Rng gen_rng(derive_seed(master_seed, "evolution-gen", static_cast<std::uint64_t>(gen)));
        auto [next, rec] =
            step_generation(pop, params.selection, params.errors, ctx, gen_rng, next_id);
        pop = std::move(next);
        last_record = std::move(rec);
    }

    report.best_validity_oracle =
        generation_validity(report.best.rules, params.target, params.validity_samples,
                            derive_seed(master_seed, "final-validity"), params.capacity,
                            params.max_steps);

    // Cross-engine agreement: replay the same decision streams through the
    // oracle and through the chain; at zero noise the traces must coincide.
    Alphabet alphabet = make_alphabet(params.alphabet_symbols, 8, 50, 4,
                                      derive_seed(master_seed, "evolution-alphabet"));
    ChainSpec spec = ChainSpec::fitted(alphabet, 3, params.capacity);
    SpikingEngine engine(alphabet, spec, report.best.rules);
    int hits = 0, agree = 0;
    for (int i = 0; i < params.spiking_validation_samples; ++i) {
        const std::uint64_t stream_seed =
            derive_seed(master_seed, "spiking-validity", static_cast<std::uint64_t>(i));
        RngDecisionStream spiking_stream(stream_seed);
        DerivationTrace spiking_trace =
            derive(report.best.rules, params.max_steps, spiking_stream, engine.engine());
        RngDecisionStream oracle_stream(stream_seed);
        DerivationTrace oracle_trace =
            derive(report.best.rules, params.capacity, params.max_steps, oracle_stream);
        if (is_member(spiking_trace.final_sentence, params.target)) ++hits;
        if (spiking_trace.final_sentence == oracle_trace.final_sentence) ++agree;
    }
    report.best_validity_spiking =
        static_cast<double>(hits) / static_cast<double>(params.spiking_validation_samples);
    report.cross_engine_agreement =
        static_cast<double>(agree) / static_cast<double>(params.spiking_validation_samples);
    return report;
}

} // namespace spikegram
