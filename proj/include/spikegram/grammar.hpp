#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "spikegram/rules.hpp"

namespace spikegram {

enum class Termination { no_rule, all_terminal, max_steps };

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::no_rule: return "no_rule";
        case Termination::all_terminal: return "all_terminal";
        case Termination::max_steps: return "max_steps";
    }
    return "?";
}

struct DerivationStep {
    int index = 0;
    Sentence before;
    RewriteSite site;
    Sentence after;
};

struct DerivationTrace {
    std::vector<DerivationStep> steps;
    Termination terminated_by = Termination::no_rule;
    Sentence final_sentence;

    /// JSON-lines export, one step per line plus a closing summary line.
    std::string to_jsonl() const {
        std::string out;
        for (const auto& s : steps) {
            nlohmann::json j{{"step", s.index},
                             {"before", s.before},
                             {"rule", s.site.rule},
                             {"position", s.site.position},
                             {"after", s.after}};
            out += j.dump();
            out += '\n';
        }
        nlohmann::json tail{{"terminated_by", to_string(terminated_by)},
                            {"final", final_sentence}};
        out += tail.dump();
        out += '\n';
        return out;
    }
};

/// One rewrite step: returns the rewritten sentence and the applied site,
/// or the sentence unchanged with nullopt. The oracle is the default; the
/// spiking engine plugs in here.
using RewriteEngine =
    std::function<std::pair<Sentence, std::optional<RewriteSite>>(const Sentence&,
                                                                  DecisionStream&)>;

inline RewriteEngine oracle_engine(const RuleSet& rules, int capacity) {
    return [&rules, capacity](const Sentence& s, DecisionStream& stream) {
        return apply_oracle(rules, s, capacity, stream);
    };
}

/// Repeated stochastic rewriting from [start] until no rule applies, the
/// sentence is all-terminal, or max_steps is reached.
inline DerivationTrace derive(const RuleSet& rules, int max_steps, DecisionStream& stream,
                              const RewriteEngine& engine) {
    DerivationTrace trace;
    Sentence current = {rules.start};
    for (int step = 0; step < max_steps; ++step) {
        if (rules.all_terminal(current)) {
            trace.terminated_by = Termination::all_terminal;
            trace.final_sentence = current;
            return trace;
        }
        auto [next, site] = engine(current, stream);
        if (!site) {
            trace.terminated_by = Termination::no_rule;
            trace.final_sentence = current;
            return trace;
        }
        trace.steps.push_back({step, current, *site, next});
        current = std::move(next);
    }
    trace.terminated_by =
        rules.all_terminal(current) ? Termination::all_terminal : Termination::max_steps;
    trace.final_sentence = current;
    return trace;
}

inline DerivationTrace derive(const RuleSet& rules, int capacity, int max_steps,
                              DecisionStream& stream) {
    return derive(rules, max_steps, stream, oracle_engine(rules, capacity));
}

enum class LanguageKind { enumerated_set, pattern_aba, pattern_abb, a_n_b_n, custom };

inline std::string to_string(LanguageKind k) {
    switch (k) {
        case LanguageKind::enumerated_set: return "enumerated_set";
        case LanguageKind::pattern_aba: return "pattern_ABA";
        case LanguageKind::pattern_abb: return "pattern_ABB";
        case LanguageKind::a_n_b_n: return "a_n_b_n";
        case LanguageKind::custom: return "custom";
    }
    return "?";
}

inline LanguageKind language_kind_from_string(const std::string& s) {
    if (s == "enumerated_set") return LanguageKind::enumerated_set;
    if (s == "pattern_ABA") return LanguageKind::pattern_aba;
    if (s == "pattern_ABB") return LanguageKind::pattern_abb;
    if (s == "a_n_b_n") return LanguageKind::a_n_b_n;
    if (s == "custom") return LanguageKind::custom;
    throw ConfigError("unknown language kind '" + s + "'");
}

/// Registry of named membership predicates for LanguageKind::custom.
inline std::map<std::string, std::function<bool(const Sentence&)>>& custom_languages() {
    static std::map<std::string, std::function<bool(const Sentence&)>> registry;
    return registry;
}

/// A decidable language over symbol ids; membership is checked
/// structurally, independent of any rule set.
struct LanguageSpec {
    LanguageKind kind = LanguageKind::enumerated_set;
    std::vector<Sentence> sentences; // enumerated_set
    SymbolId a = kNoSymbol;          // a_n_b_n
    SymbolId b = kNoSymbol;
    int max_n = 0;                   // a_n_b_n bound; 0 = unbounded
    std::string custom_id;
};

inline bool is_member(const Sentence& s, const LanguageSpec& spec) {
    switch (spec.kind) {
        case LanguageKind::enumerated_set:
            return std::find(spec.sentences.begin(), spec.sentences.end(), s) !=
                   spec.sentences.end();
        case LanguageKind::pattern_aba:
            return s.size() == 3 && s[0] == s[2] && s[0] != s[1];
        case LanguageKind::pattern_abb:
            return s.size() == 3 && s[1] == s[2] && s[0] != s[1];
        case LanguageKind::a_n_b_n: {
            if (s.empty() || s.size() % 2 != 0) return false;
            const std::size_t n = s.size() / 2;
            if (spec.max_n > 0 && n > static_cast<std::size_t>(spec.max_n)) return false;
            for (std::size_t i = 0; i < n; ++i)
                if (s[i] != spec.a) return false;
            for (std::size_t i = n; i < s.size(); ++i)
                if (s[i] != spec.b) return false;
            return true;
        }
        case LanguageKind::custom: {
            auto it = custom_languages().find(spec.custom_id);
            if (it == custom_languages().end())
                throw ConfigError("unknown custom language '" + spec.custom_id + "'");
            return it->second(s);
        }
    }
    return false;
}

struct EnumeratedLanguage {
    std::set<Sentence> sentences;
    bool truncated = false;
};

/// Breadth-first closure over all rule applications from [start]; collects
/// the all-terminal sentences of length <= max_len reachable within
/// max_depth steps. Exact and deterministic. Mirrors derive: all-terminal
/// sentences are collected, not expanded; expansion enforces max_len as the
/// capacity bound.
inline EnumeratedLanguage enumerate_language(const RuleSet& rules, int max_len, int max_depth,
                                             std::size_t node_cap = 200000) {
    EnumeratedLanguage out;
    std::set<Sentence> seen;
    std::deque<std::pair<Sentence, int>> frontier;
    frontier.push_back({{rules.start}, 0});
    seen.insert({rules.start});
    std::size_t nodes = 0;
    while (!frontier.empty()) {
        auto [sentence, depth] = frontier.front();
        frontier.pop_front();
        if (++nodes > node_cap) {
            out.truncated = true;
            break;
        }
        if (rules.all_terminal(sentence)) {
            if (static_cast<int>(sentence.size()) <= max_len) out.sentences.insert(sentence);
            continue;
        }
        if (depth >= max_depth) continue;
        for (const auto& site : eligible_sites(rules, sentence)) {
            const auto& rule = rules.rules[static_cast<std::size_t>(site.rule)];
            if (sentence.size() + rule.action.size() - 1 > static_cast<std::size_t>(max_len))
                continue;
            Sentence next = apply_rewrite(sentence, rule, site.position);
            if (seen.insert(next).second) frontier.push_back({std::move(next), depth + 1});
        }
    }
    return out;
}

/// Fraction of N independent derivations whose final sentence satisfies
/// the language spec. Deterministic given seed.
inline double generation_validity(const RuleSet& rules, const LanguageSpec& spec, int n_samples,
                                  std::uint64_t seed, int capacity, int max_steps = 64) {
    if (n_samples < 1) throw ConfigError("generation_validity requires N >= 1");
    int hits = 0;
    for (int i = 0; i < n_samples; ++i) {
        RngDecisionStream stream(derive_seed(seed, "derivation", static_cast<std::uint64_t>(i)));
        DerivationTrace trace = derive(rules, capacity, max_steps, stream);
        if (is_member(trace.final_sentence, spec)) ++hits;
    }
    return static_cast<double>(hits) / n_samples;
}

} // namespace spikegram
