#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikegram/chain.hpp"
#include "spikegram/error.hpp"
#include "spikegram/rng.hpp"

namespace spikegram {

enum class ContextRelation { left_adjacent, anywhere_before };

inline std::string to_string(ContextRelation r) {
    return r == ContextRelation::left_adjacent ? "left_adjacent" : "anywhere_before";
}

inline ContextRelation context_relation_from_string(const std::string& s) {
    if (s == "left_adjacent") return ContextRelation::left_adjacent;
    if (s == "anywhere_before") return ContextRelation::anywhere_before;
    throw ConfigError("unknown context relation '" + s + "'");
}

struct RuleContext {
    SymbolId symbol = kNoSymbol;
    ContextRelation relation = ContextRelation::left_adjacent;

    friend bool operator==(const RuleContext&, const RuleContext&) = default;
};

/// A single-token rewrite rule: condition X, optional contextual symbol T
/// with its relation, an action of 1-3 tokens, and a firing weight p.
struct AbstractRule {
    SymbolId condition = kNoSymbol;
    std::optional<RuleContext> context;
    std::vector<SymbolId> action;
    double probability = 1.0;

    friend bool operator==(const AbstractRule&, const AbstractRule&) = default;
};

inline constexpr std::size_t kMaxActionLength = 3;

/// An ordered rule list plus the symbol roles a grammar needs: the start
/// symbol, the terminal set, and reserved control symbols (e.g. SAME/DIFF)
/// that rules must not touch.
struct RuleSet {
    std::vector<AbstractRule> rules;
    SymbolId start = 0;
    std::vector<SymbolId> terminals; // kept sorted
    std::vector<SymbolId> reserved;  // kept sorted

    bool is_terminal(SymbolId s) const {
        return std::binary_search(terminals.begin(), terminals.end(), s);
    }
    bool is_reserved(SymbolId s) const {
        return std::binary_search(reserved.begin(), reserved.end(), s);
    }
    bool all_terminal(const Sentence& sentence) const {
        return std::all_of(sentence.begin(), sentence.end(),
                           [&](SymbolId s) { return is_terminal(s); });
    }

    void normalize() {
        std::sort(terminals.begin(), terminals.end());
        terminals.erase(std::unique(terminals.begin(), terminals.end()), terminals.end());
        std::sort(reserved.begin(), reserved.end());
        reserved.erase(std::unique(reserved.begin(), reserved.end()), reserved.end());
    }

    void validate(int alphabet_size) const {
        auto check_symbol = [&](SymbolId s, const std::string& where) {
            if (s < 0 || s >= alphabet_size)
                throw ConfigError("rule " + where + " symbol " + std::to_string(s) +
                                  " outside alphabet of size " + std::to_string(alphabet_size));
        };
        check_symbol(start, "start");
        if (is_terminal(start)) throw ConfigError("start symbol must not be terminal");
        for (std::size_t i = 0; i < rules.size(); ++i) {
            const auto& r = rules[i];
            const std::string where = "#" + std::to_string(i);
            check_symbol(r.condition, where + " condition");
            if (is_reserved(r.condition))
                throw ConfigError("rule " + where + " condition is a reserved control symbol");
            if (r.context) {
                check_symbol(r.context->symbol, where + " context");
                if (is_reserved(r.context->symbol))
                    throw ConfigError("rule " + where + " context is a reserved control symbol");
            }
            if (r.action.empty() || r.action.size() > kMaxActionLength)
                throw ConfigError("rule " + where + " action length must be 1.." +
                                  std::to_string(kMaxActionLength));
            for (SymbolId s : r.action) {
                check_symbol(s, where + " action");
                if (is_reserved(s))
                    throw ConfigError("rule " + where + " action uses a reserved control symbol");
            }
            if (!(r.probability > 0.0 && r.probability <= 1.0))
                throw ConfigError("rule " + where + " probability must be in (0, 1]");
        }
    }
};

/// One candidate rewrite: apply rules[rule] at sentence position.
struct RewriteSite {
    int position = 0;
    int rule = 0;

    friend bool operator==(const RewriteSite&, const RewriteSite&) = default;
};

inline bool context_satisfied(const AbstractRule& rule, const Sentence& sentence, int position) {
    if (!rule.context) return true;
    const SymbolId t = rule.context->symbol;
    switch (rule.context->relation) {
        case ContextRelation::left_adjacent:
            return position >= 1 && sentence[static_cast<std::size_t>(position - 1)] == t;
        case ContextRelation::anywhere_before:
            for (int q = 0; q < position; ++q)
                if (sentence[static_cast<std::size_t>(q)] == t) return true;
            return false;
    }
    return false;
}

/// All (position, rule) pairs whose condition matches the token at that
/// position with the context satisfied, ordered by (position, rule index).
inline std::vector<RewriteSite> eligible_sites(const RuleSet& rules, const Sentence& sentence) {
    std::vector<RewriteSite> sites;
    for (int pos = 0; pos < static_cast<int>(sentence.size()); ++pos)
        for (int ri = 0; ri < static_cast<int>(rules.rules.size()); ++ri) {
            const auto& r = rules.rules[static_cast<std::size_t>(ri)];
            if (r.condition != sentence[static_cast<std::size_t>(pos)]) continue;
            if (!context_satisfied(r, sentence, pos)) continue;
            sites.push_back({pos, ri});
        }
    return sites;
}

/// Replace the token at `position` with the rule's action sequence; later
/// tokens shift right by whole slots.
inline Sentence apply_rewrite(const Sentence& sentence, const AbstractRule& rule, int position) {
    Sentence out;
    out.reserve(sentence.size() + rule.action.size() - 1);
    out.insert(out.end(), sentence.begin(), sentence.begin() + position);
    out.insert(out.end(), rule.action.begin(), rule.action.end());
    out.insert(out.end(), sentence.begin() + position + 1, sentence.end());
    return out;
}

/// A replayable source of stochastic rewrite choices, shared between the
/// oracle and the spiking engine so that their traces are comparable
/// draw-for-draw.
class DecisionStream {
  public:
    virtual ~DecisionStream() = default;
    /// Pick an index with probability weights[i] / sum(weights).
    virtual std::size_t choose(std::span<const double> weights) = 0;
};

class RngDecisionStream final : public DecisionStream {
  public:
    explicit RngDecisionStream(std::uint64_t seed) : rng_(seed) {}

    std::size_t choose(std::span<const double> weights) override {
        std::size_t pick = rng_.weighted_choice(weights);
        log_.push_back(pick);
        return pick;
    }

    const std::vector<std::size_t>& log() const { return log_; }

    nlohmann::json to_json() const { return log_; }

  private:
    Rng rng_;
    std::vector<std::size_t> log_;
};

/// Replays a recorded choice sequence; used for replay files and for
/// forcing specific derivations in tests.
class ScriptedDecisionStream final : public DecisionStream {
  public:
    explicit ScriptedDecisionStream(std::vector<std::size_t> script)
        : script_(std::move(script)) {}

    static ScriptedDecisionStream from_json(const nlohmann::json& j) {
        return ScriptedDecisionStream(j.get<std::vector<std::size_t>>());
    }

    std::size_t choose(std::span<const double> weights) override {
        if (next_ >= script_.size())
            throw ConfigError("decision stream exhausted after " + std::to_string(next_) +
                              " choices");
        std::size_t pick = script_[next_++];
        if (pick >= weights.size())
            throw ConfigError("scripted choice " + std::to_string(pick) +
                              " out of range for " + std::to_string(weights.size()) +
                              " candidates");
        return pick;
    }

  private:
    std::vector<std::size_t> script_;
    std::size_t next_ = 0;
};

/// The shared arbitration policy: draw one site from the candidate list,
/// weighted by rule probability; candidates whose rewrite would overflow
/// `capacity` are skipped and the draw repeats over the remainder. Returns
/// nullopt when no candidate survives. Both engines route every stochastic
/// choice through here (the oracle with symbolically eligible sites, the
/// spiking engine with the sites its detectors reported), so the stream
/// consumption is identical on both sides.
inline std::optional<RewriteSite> choose_from_sites(const RuleSet& rules,
                                                    std::vector<RewriteSite> candidates,
                                                    std::size_t sentence_len, int capacity,
                                                    DecisionStream& stream) {
    while (!candidates.empty()) {
        std::vector<double> weights;
        weights.reserve(candidates.size());
        for (const auto& site : candidates)
            weights.push_back(rules.rules[static_cast<std::size_t>(site.rule)].probability);
        const std::size_t pick = stream.choose(weights);
        const RewriteSite site = candidates[pick];
        const auto& rule = rules.rules[static_cast<std::size_t>(site.rule)];
        const std::size_t new_len = sentence_len + rule.action.size() - 1;
        if (new_len <= static_cast<std::size_t>(capacity)) return site;
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return std::nullopt;
}

inline std::optional<RewriteSite> choose_rewrite(const RuleSet& rules, const Sentence& sentence,
                                                 int capacity, DecisionStream& stream) {
    return choose_from_sites(rules, eligible_sites(rules, sentence), sentence.size(), capacity,
                             stream);
}

/// Reference rewrite semantics: one stochastic rule application.
inline std::pair<Sentence, std::optional<RewriteSite>> apply_oracle(const RuleSet& rules,
                                                                    const Sentence& sentence,
                                                                    int capacity,
                                                                    DecisionStream& stream) {
    auto site = choose_rewrite(rules, sentence, capacity, stream);
    if (!site) return {sentence, std::nullopt};
    const auto& rule = rules.rules[static_cast<std::size_t>(site->rule)];
    return {apply_rewrite(sentence, rule, site->position), site};
}

inline nlohmann::json rule_to_json(const AbstractRule& r) {
    nlohmann::json j{{"cond", r.condition}, {"action", r.action}, {"p", r.probability}};
    if (r.context)
        j["ctx"] = {{"sym", r.context->symbol}, {"rel", to_string(r.context->relation)}};
    return j;
}

inline AbstractRule rule_from_json(const nlohmann::json& j) {
    AbstractRule r;
    r.condition = j.at("cond").get<SymbolId>();
    r.action = j.at("action").get<std::vector<SymbolId>>();
    r.probability = j.at("p").get<double>();
    if (j.contains("ctx")) {
        RuleContext ctx;
        ctx.symbol = j.at("ctx").at("sym").get<SymbolId>();
        ctx.relation = context_relation_from_string(j.at("ctx").at("rel").get<std::string>());
        r.context = ctx;
    }
    return r;
}

inline nlohmann::json ruleset_to_json(const RuleSet& rs) {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : rs.rules) rules.push_back(rule_to_json(r));
    return nlohmann::json{{"start", rs.start},
                          {"terminals", rs.terminals},
                          {"reserved", rs.reserved},
                          {"rules", rules}};
}

inline RuleSet ruleset_from_json(const nlohmann::json& j) {
    RuleSet rs;
    rs.start = j.at("start").get<SymbolId>();
    rs.terminals = j.at("terminals").get<std::vector<SymbolId>>();
    rs.reserved = j.value("reserved", std::vector<SymbolId>{});
    for (const auto& rj : j.at("rules")) rs.rules.push_back(rule_from_json(rj));
    rs.normalize();
    return rs;
}

} // namespace spikegram
