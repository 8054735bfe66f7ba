#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "spikegram/chain.hpp"
#include "spikegram/evolution.hpp"
#include "spikegram/tasks.hpp"

namespace spikegram {

namespace detail {

/// Strict object reader: every key must be consumed, every access is typed,
/// and error messages carry the JSON-pointer-style path of the offender.
class StrictObject {
  public:
    StrictObject(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_->contains(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_->contains(key)) return fallback;
        return typed<T>(key);
    }

    template <typename T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!j_->contains(key)) throw ConfigError(path_ + "/" + key + ": missing required key");
        return typed<T>(key);
    }

    const nlohmann::json& raw(const std::string& key) {
        seen_.insert(key);
        return j_->at(key);
    }

    /// Call after reading every supported key.
    void reject_unknown() const {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(path_ + "/" + it.key() + ": unknown key");
    }

    const std::string& path() const { return path_; }

  private:
    template <typename T>
    T typed(const std::string& key) {
        try {
            return j_->at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(path_ + "/" + key + ": wrong type");
        }
    }

    const nlohmann::json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace detail

struct AlphabetParams {
    int n = 6;
    int w = 8;
    TimeTick token_duration = 50;
    int d_min = 4;
    TimeTick eps = 3;
    TimeTick strong_gap = 0;
    int max_attempts = 10000;

    Alphabet build(std::uint64_t seed) const {
        return make_alphabet(n, w, token_duration, d_min, seed, eps, strong_gap, max_attempts);
    }

    nlohmann::json to_json() const {
        return {{"n", n},          {"W", w},
                {"D", token_duration}, {"d_min", d_min},
                {"eps", eps},      {"strong_gap", strong_gap},
                {"max_attempts", max_attempts}};
    }
};

struct DeriveParams {
    int max_steps = 32;
    std::string engine = "oracle"; // oracle | spiking
    int tap_stage = 1;

    nlohmann::json to_json() const {
        return {{"max_steps", max_steps}, {"engine", engine}, {"tap_stage", tap_stage}};
    }
};

struct EquivParams {
    int cases = 100;
    int max_rules = 8;
    int alphabet_n = 6;
    int max_sentence = 4;
    int steps = 6;

    nlohmann::json to_json() const {
        return {{"cases", cases},
                {"max_rules", max_rules},
                {"alphabet_n", alphabet_n},
                {"max_sentence", max_sentence},
                {"steps", steps}};
    }
};

struct QuasispeciesSweepParams {
    int length = 10;
    double sigma = 10.0;
    int pop_size = 1000;
    int generations = 500;
    std::vector<double> mu_factors = {0.5, 1.5}; // multiples of the threshold
    int seeds = 5;

    nlohmann::json to_json() const {
        return {{"L", length},           {"sigma", sigma}, {"pop_size", pop_size},
                {"generations", generations}, {"mu_factors", mu_factors}, {"seeds", seeds}};
    }
};

/// The full experiment configuration with every default materialized.
struct ExperimentConfig {
    int version = 1;
    std::uint64_t seed = 0;
    AlphabetParams alphabet;
    std::optional<ChainSpec> chain; // fitted from the alphabet when absent
    NoiseModel noise;
    std::optional<RuleSet> rules;
    Sentence sentence;
    DeriveParams derive;
    EquivParams equiv;
    LanguageSpec language;
    GrammarEvolutionParams evolution;
    MarcusParams marcus;
    QuasispeciesSweepParams quasispecies;

    ChainSpec chain_spec(const Alphabet& ab, int L = 6, int capacity = 8) const {
        ChainSpec spec = chain ? *chain : ChainSpec::fitted(ab, L, capacity);
        spec.validate(ab);
        return spec;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = version;
        j["seed"] = seed;
        j["alphabet"] = alphabet.to_json();
        if (chain)
            j["chain"] = {{"W", chain->W},
                          {"L", chain->L},
                          {"capacity", chain->capacity},
                          {"stage_delay", chain->stage_delay},
                          {"slot_pitch", chain->slot_pitch},
                          {"relay_refractory", chain->relay_refractory},
                          {"relay_window", chain->relay_window},
                          {"relay_threshold", chain->relay_threshold},
                          {"write_lead", chain->write_lead}};
        j["noise"] = {{"jitter_max", noise.jitter_max},
                      {"p_delete", noise.p_delete},
                      {"p_insert", noise.p_insert}};
        if (rules) j["rules"] = ruleset_to_json(*rules);
        j["sentence"] = sentence;
        j["derive"] = derive.to_json();
        j["equiv"] = equiv.to_json();
        j["language"] = {{"kind", to_string(language.kind)},
                         {"sentences", language.sentences},
                         {"a", language.a},
                         {"b", language.b},
                         {"max_n", language.max_n},
                         {"custom_id", language.custom_id}};
        j["evolution"] = {{"population", evolution.population},
                          {"generations", evolution.generations},
                          {"tournament_k", evolution.selection.tournament_k},
                          {"elite", evolution.selection.elite},
                          {"parsimony", evolution.parsimony},
                          {"validity_samples", evolution.validity_samples},
                          {"max_rules", evolution.max_rules},
                          {"capacity", evolution.capacity},
                          {"max_steps", evolution.max_steps},
                          {"alphabet_symbols", evolution.alphabet_symbols},
                          {"terminals", evolution.terminals},
                          {"init_rules_max", evolution.init_rules_max},
                          {"spiking_validation_samples", evolution.spiking_validation_samples},
                          {"errors",
                           {{"mu_sub", evolution.errors.mu_sub},
                            {"mu_del", evolution.errors.mu_del},
                            {"mu_dup", evolution.errors.mu_dup},
                            {"mu_p", evolution.errors.mu_p},
                            {"mu_spike", evolution.errors.mu_spike},
                            {"spike_jitter_max", evolution.errors.spike_jitter_max}}}};
        j["marcus"] = {{"n_train_tokens", marcus.n_train_tokens},
                       {"n_test_tokens", marcus.n_test_tokens},
                       {"n_sentences", marcus.n_sentences},
                       {"W", marcus.w},
                       {"D", marcus.token_duration},
                       {"eps", marcus.eps},
                       {"d_min", marcus.d_min},
                       {"strong_gap", marcus.strong_gap},
                       {"noise_levels", marcus.noise_levels},
                       {"n_noise_seeds", marcus.n_noise_seeds},
                       {"evolve_wiring", marcus.evolve_wiring}};
        j["quasispecies"] = quasispecies.to_json();
        return j;
    }
};

inline LanguageSpec language_from_config(detail::StrictObject& obj) {
    LanguageSpec spec;
    spec.kind = language_kind_from_string(obj.get<std::string>("kind", "enumerated_set"));
    if (obj.has("sentences")) spec.sentences = obj.raw("sentences").get<std::vector<Sentence>>();
    spec.a = obj.get<SymbolId>("a", 1);
    spec.b = obj.get<SymbolId>("b", 2);
    spec.max_n = obj.get<int>("max_n", 0);
    spec.custom_id = obj.get<std::string>("custom_id", "");
    obj.reject_unknown();
    return spec;
}

inline ExperimentConfig config_from_json(const nlohmann::json& root) {
    ExperimentConfig cfg;
    detail::StrictObject top(root, "");
    cfg.version = top.get<int>("version", 1);
    if (cfg.version != 1) throw ConfigError("/version: unsupported config version");
    cfg.seed = top.get<std::uint64_t>("seed", 0);

    if (top.has("alphabet")) {
        detail::StrictObject obj(top.raw("alphabet"), "/alphabet");
        cfg.alphabet.n = obj.get<int>("n", cfg.alphabet.n);
        cfg.alphabet.w = obj.get<int>("W", cfg.alphabet.w);
        cfg.alphabet.token_duration = obj.get<TimeTick>("D", cfg.alphabet.token_duration);
        cfg.alphabet.d_min = obj.get<int>("d_min", cfg.alphabet.d_min);
        cfg.alphabet.eps = obj.get<TimeTick>("eps", cfg.alphabet.eps);
        cfg.alphabet.strong_gap = obj.get<TimeTick>("strong_gap", cfg.alphabet.strong_gap);
        cfg.alphabet.max_attempts = obj.get<int>("max_attempts", cfg.alphabet.max_attempts);
        obj.reject_unknown();
    }
    if (top.has("chain")) {
        detail::StrictObject obj(top.raw("chain"), "/chain");
        ChainSpec spec;
        spec.W = obj.get<int>("W", cfg.alphabet.w);
        spec.L = obj.get<int>("L", spec.L);
        spec.capacity = obj.get<int>("capacity", spec.capacity);
        ChainSpec fitted;
        {
            Alphabet sketch; // dimensions only; no sampling needed here
            sketch.W = cfg.alphabet.w;
            sketch.D = cfg.alphabet.token_duration;
            sketch.eps = cfg.alphabet.eps;
            sketch.d_min = cfg.alphabet.d_min;
            fitted = ChainSpec::fitted(sketch, spec.L, spec.capacity);
        }
        spec.stage_delay = obj.get<TimeTick>("stage_delay", fitted.stage_delay);
        spec.slot_pitch = obj.get<TimeTick>("slot_pitch", fitted.slot_pitch);
        spec.relay_refractory = obj.get<TimeTick>("relay_refractory", fitted.relay_refractory);
        spec.relay_window = obj.get<TimeTick>("relay_window", fitted.relay_window);
        spec.relay_threshold = obj.get<std::uint32_t>("relay_threshold", fitted.relay_threshold);
        spec.write_lead = obj.get<TimeTick>("write_lead", fitted.write_lead);
        obj.reject_unknown();
        {
            Alphabet sketch;
            sketch.W = cfg.alphabet.w;
            sketch.D = cfg.alphabet.token_duration;
            sketch.eps = cfg.alphabet.eps;
            sketch.d_min = cfg.alphabet.d_min;
            try {
                spec.validate(sketch);
            } catch (const ConfigError& e) {
                throw ConfigError("/chain: " + std::string(e.what()));
            }
        }
        cfg.chain = spec;
    }
    if (top.has("noise")) {
        detail::StrictObject obj(top.raw("noise"), "/noise");
        cfg.noise.jitter_max = obj.get<TimeTick>("jitter_max", 0);
        cfg.noise.p_delete = obj.get<double>("p_delete", 0.0);
        cfg.noise.p_insert = obj.get<double>("p_insert", 0.0);
        obj.reject_unknown();
        try {
            cfg.noise.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("/noise: " + std::string(e.what()));
        }
    }
    if (top.has("rules")) {
        try {
            cfg.rules = ruleset_from_json(top.raw("rules"));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("/rules: " + std::string(e.what()));
        }
    }
    if (top.has("sentence")) cfg.sentence = top.raw("sentence").get<Sentence>();
    if (top.has("derive")) {
        detail::StrictObject obj(top.raw("derive"), "/derive");
        cfg.derive.max_steps = obj.get<int>("max_steps", cfg.derive.max_steps);
        cfg.derive.engine = obj.get<std::string>("engine", cfg.derive.engine);
        cfg.derive.tap_stage = obj.get<int>("tap_stage", cfg.derive.tap_stage);
        obj.reject_unknown();
        if (cfg.derive.engine != "oracle" && cfg.derive.engine != "spiking")
            throw ConfigError("/derive/engine: must be 'oracle' or 'spiking'");
    }
    if (top.has("equiv")) {
        detail::StrictObject obj(top.raw("equiv"), "/equiv");
        cfg.equiv.cases = obj.get<int>("cases", cfg.equiv.cases);
        cfg.equiv.max_rules = obj.get<int>("max_rules", cfg.equiv.max_rules);
        cfg.equiv.alphabet_n = obj.get<int>("alphabet_n", cfg.equiv.alphabet_n);
        cfg.equiv.max_sentence = obj.get<int>("max_sentence", cfg.equiv.max_sentence);
        cfg.equiv.steps = obj.get<int>("steps", cfg.equiv.steps);
        obj.reject_unknown();
    }
    if (top.has("language")) {
        detail::StrictObject obj(top.raw("language"), "/language");
        cfg.language = language_from_config(obj);
        cfg.evolution.target = cfg.language;
    }
    if (top.has("evolution")) {
        detail::StrictObject obj(top.raw("evolution"), "/evolution");
        auto& evo = cfg.evolution;
        evo.population = obj.get<int>("population", evo.population);
        evo.generations = obj.get<int>("generations", evo.generations);
        evo.selection.tournament_k = obj.get<int>("tournament_k", evo.selection.tournament_k);
        evo.selection.elite = obj.get<int>("elite", evo.selection.elite);
        evo.parsimony = obj.get<double>("parsimony", evo.parsimony);
        evo.validity_samples = obj.get<int>("validity_samples", evo.validity_samples);
        evo.max_rules = obj.get<int>("max_rules", evo.max_rules);
        evo.capacity = obj.get<int>("capacity", evo.capacity);
        evo.max_steps = obj.get<int>("max_steps", evo.max_steps);
        evo.alphabet_symbols = obj.get<int>("alphabet_symbols", evo.alphabet_symbols);
        if (obj.has("terminals"))
            evo.terminals = obj.raw("terminals").get<std::vector<SymbolId>>();
        evo.init_rules_max = obj.get<int>("init_rules_max", evo.init_rules_max);
        evo.spiking_validation_samples =
            obj.get<int>("spiking_validation_samples", evo.spiking_validation_samples);
        if (obj.has("errors")) {
            detail::StrictObject em(obj.raw("errors"), "/evolution/errors");
            evo.errors.mu_sub = em.get<double>("mu_sub", evo.errors.mu_sub);
            evo.errors.mu_del = em.get<double>("mu_del", evo.errors.mu_del);
            evo.errors.mu_dup = em.get<double>("mu_dup", evo.errors.mu_dup);
            evo.errors.mu_p = em.get<double>("mu_p", evo.errors.mu_p);
            evo.errors.mu_spike = em.get<double>("mu_spike", evo.errors.mu_spike);
            evo.errors.spike_jitter_max =
                em.get<TimeTick>("spike_jitter_max", evo.errors.spike_jitter_max);
            em.reject_unknown();
            try {
                evo.errors.validate();
            } catch (const ConfigError& e) {
                throw ConfigError("/evolution/errors: " + std::string(e.what()));
            }
        }
        obj.reject_unknown();
    }
    if (top.has("marcus")) {
        detail::StrictObject obj(top.raw("marcus"), "/marcus");
        auto& m = cfg.marcus;
        m.n_train_tokens = obj.get<int>("n_train_tokens", m.n_train_tokens);
        m.n_test_tokens = obj.get<int>("n_test_tokens", m.n_test_tokens);
        m.n_sentences = obj.get<int>("n_sentences", m.n_sentences);
        m.w = obj.get<int>("W", m.w);
        m.token_duration = obj.get<TimeTick>("D", m.token_duration);
        m.eps = obj.get<TimeTick>("eps", m.eps);
        m.d_min = obj.get<int>("d_min", m.d_min);
        m.strong_gap = obj.get<TimeTick>("strong_gap", m.strong_gap);
        if (obj.has("noise_levels"))
            m.noise_levels = obj.raw("noise_levels").get<std::vector<TimeTick>>();
        m.n_noise_seeds = obj.get<int>("n_noise_seeds", m.n_noise_seeds);
        m.evolve_wiring = obj.get<bool>("evolve_wiring", m.evolve_wiring);
        obj.reject_unknown();
    }
    if (top.has("quasispecies")) {
        detail::StrictObject obj(top.raw("quasispecies"), "/quasispecies");
        auto& q = cfg.quasispecies;
        q.length = obj.get<int>("L", q.length);
        q.sigma = obj.get<double>("sigma", q.sigma);
        q.pop_size = obj.get<int>("pop_size", q.pop_size);
        q.generations = obj.get<int>("generations", q.generations);
        if (obj.has("mu_factors"))
            q.mu_factors = obj.raw("mu_factors").get<std::vector<double>>();
        q.seeds = obj.get<int>("seeds", q.seeds);
        obj.reject_unknown();
    }
    top.reject_unknown();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace spikegram
