#pragma once

#include "spikegram/config.hpp"
#include "spikegram/engine.hpp"

namespace spikegram {

struct EquivalenceCase {
    Alphabet alphabet;
    RuleSet rules;
    Sentence start;
    ChainSpec chain;
};

/// Deterministic random case: small alphabet, up to max_rules rules with
/// optional contexts and 1-3 token actions, and a short start sentence.
inline EquivalenceCase make_equivalence_case(const EquivParams& params, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "equiv-case"));
    EquivalenceCase out;
    const int n_symbols =
        static_cast<int>(rng.next_int(3, std::max(3, params.alphabet_n)));
    out.alphabet = make_alphabet(n_symbols, 8, 50, 4, derive_seed(seed, "equiv-alphabet"));
    out.chain = ChainSpec::fitted(out.alphabet, /*L=*/3, /*capacity=*/8);
    out.rules.start = 0;
    const int n_rules = static_cast<int>(rng.next_int(1, std::max(1, params.max_rules)));
    for (int i = 0; i < n_rules; ++i) {
        AbstractRule r;
        r.condition = static_cast<SymbolId>(rng.next_below(out.alphabet.size()));
        const int alen = static_cast<int>(rng.next_int(1, 3));
        for (int k = 0; k < alen; ++k)
            r.action.push_back(static_cast<SymbolId>(rng.next_below(out.alphabet.size())));
        r.probability = 0.25 * static_cast<double>(rng.next_int(1, 4));
        if (rng.bernoulli(0.4))
            r.context = RuleContext{static_cast<SymbolId>(rng.next_below(out.alphabet.size())),
                                    rng.bernoulli(0.5) ? ContextRelation::left_adjacent
                                                       : ContextRelation::anywhere_before};
        out.rules.rules.push_back(std::move(r));
    }
    const int len = static_cast<int>(rng.next_int(1, std::max(1, params.max_sentence)));
    for (int i = 0; i < len; ++i)
        out.start.push_back(static_cast<SymbolId>(rng.next_below(out.alphabet.size())));
    return out;
}

struct EquivalenceSuiteResult {
    int cases = 0;
    int passed = 0;
    int rewrites = 0;
    struct Failure {
        int case_index = 0;
        EquivalenceDivergence divergence;
    };
    std::vector<Failure> failures;

    bool all_passed() const { return passed == cases; }

    nlohmann::json to_json() const {
        nlohmann::json fails = nlohmann::json::array();
        for (const auto& f : failures)
            fails.push_back({{"case", f.case_index},
                             {"step", f.divergence.step},
                             {"kind", f.divergence.kind},
                             {"detail", f.divergence.detail}});
        return nlohmann::json{{"cases", cases},
                              {"passed", passed},
                              {"rewrites", rewrites},
                              {"failures", fails}};
    }
};

/// The randomized oracle-equivalence suite: every case drives both engines
/// from one decision stream; any divergence (eligibility, decoding,
/// suppression, or final sentence) is recorded.
inline EquivalenceSuiteResult run_equivalence_suite(const EquivParams& params,
                                                    std::uint64_t master_seed) {
    EquivalenceSuiteResult result;
    result.cases = params.cases;
    for (int i = 0; i < params.cases; ++i) {
        const std::uint64_t case_seed =
            derive_seed(master_seed, "equiv", static_cast<std::uint64_t>(i));
        EquivalenceCase c = make_equivalence_case(params, case_seed);
        EquivalenceReport report = check_equivalence(c.rules, c.start, c.alphabet, c.chain,
                                                     case_seed, params.steps);
        result.rewrites += report.rewrites;
        if (report.equal) {
            ++result.passed;
        } else {
            result.failures.push_back({i, *report.divergence});
        }
    }
    return result;
}

} // namespace spikegram
