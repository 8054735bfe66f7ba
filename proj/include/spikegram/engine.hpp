#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikegram/circuits.hpp"
#include "spikegram/grammar.hpp"

namespace spikegram {

/// Expected relay raster after a rewrite: stages up to the tap carry the
/// original sentence on the grid; stages past it carry the rewritten
/// sentence, with the freshly written slots leading by delta_lead.
/// Comparing the full relay raster against this is the suppression audit:
/// any surviving spike of the replaced token would show up as an
/// unexpected firing.
struct RasterAudit {
    bool ok = true;
    std::string detail;
};

inline RasterAudit audit_rewrite_raster(const Network& net, const Chain& chain,
                                        const Alphabet& alphabet, TimeTick t0,
                                        const Sentence& before, const Sentence& after,
                                        const RewriteSite& site, int action_len,
                                        int tap_stage) {
    const ChainSpec& spec = chain.spec();
    std::vector<std::pair<TimeTick, NeuronId>> expected;
    auto add_token = [&](int stage, int slot, SymbolId sym, TimeTick fire_lead) {
        const SpikeTemplate& t = alphabet.tmpl(sym);
        for (int c = 0; c < spec.W; ++c)
            expected.push_back({chain.slot_base(t0, stage, slot) +
                                    t.offsets[static_cast<std::size_t>(c)] - fire_lead,
                                chain.relay(stage, c)});
    };
    for (int stage = 0; stage < spec.L; ++stage) {
        const Sentence& s = stage <= tap_stage ? before : after;
        for (int slot = 0; slot < static_cast<int>(s.size()); ++slot) {
            const bool rewritten = stage > tap_stage && slot >= site.position &&
                                   slot < site.position + action_len;
            add_token(stage, slot, s[static_cast<std::size_t>(slot)],
                      rewritten ? spec.write_lead : 0);
        }
    }
    std::sort(expected.begin(), expected.end());

    std::vector<std::pair<TimeTick, NeuronId>> actual;
    for (const auto& e : net.trace())
        for (int stage = 0; stage < spec.L; ++stage)
            for (int c = 0; c < spec.W; ++c)
                if (e.neuron == chain.relay(stage, c)) actual.push_back({e.time, e.neuron});
    std::sort(actual.begin(), actual.end());

    if (expected == actual) return {};
    RasterAudit audit;
    audit.ok = false;
    for (const auto& spike : actual)
        if (!std::binary_search(expected.begin(), expected.end(), spike)) {
            audit.detail = "unexpected relay spike at t=" + std::to_string(spike.first) +
                           " neuron=" + std::to_string(spike.second);
            return audit;
        }
    for (const auto& spike : expected)
        if (!std::binary_search(actual.begin(), actual.end(), spike)) {
            audit.detail = "missing relay spike at t=" + std::to_string(spike.first) +
                           " neuron=" + std::to_string(spike.second);
            return audit;
        }
    audit.detail = "relay raster multiplicity mismatch";
    return audit;
}

struct ProbeResult {
    std::vector<RewriteSite> sites;
    bool clean = true; // false when a detector fired off the slot grid
};

struct ApplyResult {
    std::optional<Sentence> sentence; // nullopt: some slot failed to decode
    RasterAudit audit;
    std::string read_detail;
};

struct EngineConfig {
    int tap_stage = 1;
    TimeTick t0 = 100;
    NoiseModel noise{};
    std::uint64_t noise_seed = 0;
    bool audit = true;
};

/// Runs rewrite steps on the physical substrate. Each step is one chain
/// traversal (probe) to collect detector firings, the shared arbitration
/// draw, and a second traversal with exactly one write gate permitted.
/// Re-circulation: the read-back sentence is re-encoded cleanly for the
/// next step, so leads never accumulate across steps.
class SpikingEngine {
  public:
    using Config = EngineConfig;

    SpikingEngine(const Alphabet& alphabet, const ChainSpec& chain_spec, const RuleSet& rules,
                  Config cfg = Config())
        : alphabet_(&alphabet), chain_spec_(chain_spec), rules_(&rules), cfg_(cfg),
          noise_rng_(derive_seed(cfg.noise_seed, "traversal-noise")) {
        chain_spec_.validate(alphabet);
        if (cfg_.tap_stage < 0 || cfg_.tap_stage >= chain_spec_.L - 1)
            throw ConfigError("tap stage must be in [0, L-2]");
    }

    ProbeResult probe(const Sentence& sentence) {
        Traversal tr(*this, sentence, std::nullopt);
        ProbeResult out;
        for (const auto& cr : tr.circuits->compiled())
            for (const auto& e : tr.net.trace())
                if (e.neuron == cr.detector) {
                    auto pos = tr.circuits->position_of_fire(cfg_.t0, e.time);
                    if (!pos || *pos >= static_cast<int>(sentence.size())) {
                        out.clean = false;
                        continue;
                    }
                    out.sites.push_back({*pos, cr.rule_index});
                }
        std::sort(out.sites.begin(), out.sites.end(),
                  [](const RewriteSite& a, const RewriteSite& b) {
                      return std::tie(a.position, a.rule) < std::tie(b.position, b.rule);
                  });
        return out;
    }

    ApplyResult apply(const Sentence& sentence, const std::optional<RewriteSite>& site) {
        Traversal tr(*this, sentence, site);
        ApplyResult out;
        const int read_stage = chain_spec_.L - 1;
        auto read = tr.chain->read_sentence(tr.net, *alphabet_, read_stage, cfg_.t0);
        out.sentence = read.to_sentence();
        if (!out.sentence) {
            for (std::size_t j = 0; j < read.slots.size(); ++j)
                if (read.slots[j].kind == SlotRead::Kind::garbled)
                    out.read_detail += "slot " + std::to_string(j) + " garbled; ";
            if (out.read_detail.empty()) out.read_detail = "hole in decoded sentence";
            return out;
        }
        if (site && cfg_.audit && cfg_.noise.silent()) {
            const auto& rule = rules_->rules[static_cast<std::size_t>(site->rule)];
            Sentence after = apply_rewrite(sentence, rule, site->position);
            out.audit = audit_rewrite_raster(tr.net, *tr.chain, *alphabet_, cfg_.t0, sentence,
                                             after, *site, static_cast<int>(rule.action.size()),
                                             cfg_.tap_stage);
        }
        return out;
    }

    /// One rewrite step with physical eligibility: detectors report the
    /// candidate sites, the shared policy draws, the write gate applies.
    std::pair<Sentence, std::optional<RewriteSite>> step(const Sentence& sentence,
                                                         DecisionStream& stream) {
        ProbeResult probed = probe(sentence);
        auto site = choose_from_sites(*rules_, probed.sites, sentence.size(),
                                      chain_spec_.capacity, stream);
        if (!site) return {sentence, std::nullopt};
        ApplyResult applied = apply(sentence, site);
        if (!applied.sentence)
            throw EquivalenceError("spiking read failed after rewrite: " + applied.read_detail);
        if (!applied.audit.ok)
            throw EquivalenceError("suppression audit failed: " + applied.audit.detail);
        return {*applied.sentence, site};
    }

    RewriteEngine engine() {
        return [this](const Sentence& s, DecisionStream& stream) { return step(s, stream); };
    }

    const ChainSpec& chain_spec() const { return chain_spec_; }
    const Alphabet& alphabet() const { return *alphabet_; }

  private:
    struct Traversal {
        Network net;
        std::optional<Chain> chain;
        std::optional<RuleCircuits> circuits;

        Traversal(SpikingEngine& eng, const Sentence& sentence,
                  const std::optional<RewriteSite>& permit_site) {
            chain.emplace(net, eng.chain_spec_, *eng.alphabet_);
            circuits.emplace(net, *chain, *eng.alphabet_, *eng.rules_, eng.cfg_.tap_stage);
            if (eng.cfg_.noise.silent()) {
                chain->write_sentence(net, *eng.alphabet_, sentence, eng.cfg_.t0);
            } else {
                chain->write_sentence(net, *eng.alphabet_, sentence, eng.cfg_.t0,
                                      &eng.cfg_.noise, &eng.noise_rng_);
            }
            if (permit_site) circuits->inject_permit(net, eng.cfg_.t0, *permit_site);
            net.run_until(chain->horizon(eng.cfg_.t0));
        }
    };

    const Alphabet* alphabet_;
    ChainSpec chain_spec_;
    const RuleSet* rules_;
    Config cfg_;
    Rng noise_rng_;
};

struct EquivalenceDivergence {
    int step = 0;
    std::string kind; // "eligibility" | "no_match" | "sentence" | "suppression"
    std::string detail;
};

struct EquivalenceStep {
    int index = 0;
    Sentence before;
    std::vector<RewriteSite> oracle_sites;
    std::vector<RewriteSite> spiking_sites;
    std::optional<RewriteSite> chosen;
    Sentence oracle_after;
    std::optional<Sentence> spiking_after;
};

struct EquivalenceReport {
    bool equal = true;
    int steps_run = 0;
    int rewrites = 0;
    std::optional<EquivalenceDivergence> divergence;
    std::vector<EquivalenceStep> steps;
    Sentence final_sentence;
};

/// Drive the oracle and the spiking engine through the same derivation,
/// feeding both from one decision stream, and report the first divergence.
/// The oracle is the ground truth; at zero noise the spiking side must
/// reproduce it step for step, including the suppression audit.
inline EquivalenceReport check_equivalence(const RuleSet& rules, const Sentence& start,
                                           const Alphabet& alphabet, const ChainSpec& chain_spec,
                                           std::uint64_t seed, int max_steps,
                                           SpikingEngine::Config engine_cfg = SpikingEngine::Config()) {
    SpikingEngine engine(alphabet, chain_spec, rules, engine_cfg);
    RngDecisionStream stream(derive_seed(seed, "equivalence-stream"));
    EquivalenceReport report;
    Sentence current = start;

    auto diverge = [&](int step, std::string kind, std::string detail) {
        report.equal = false;
        report.divergence = EquivalenceDivergence{step, std::move(kind), std::move(detail)};
    };

    for (int step = 0; step < max_steps; ++step) {
        if (rules.all_terminal(current)) break;
        EquivalenceStep rec;
        rec.index = step;
        rec.before = current;
        rec.oracle_sites = eligible_sites(rules, current);
        ProbeResult probed = engine.probe(current);
        rec.spiking_sites = probed.sites;
        if (rec.oracle_sites != rec.spiking_sites || !probed.clean) {
            diverge(step, "eligibility",
                    "oracle saw " + std::to_string(rec.oracle_sites.size()) +
                        " sites, spiking saw " + std::to_string(rec.spiking_sites.size()) +
                        (probed.clean ? "" : " (off-grid detector firing)"));
            report.steps.push_back(std::move(rec));
            break;
        }
        rec.chosen = choose_from_sites(rules, rec.oracle_sites, current.size(),
                                       chain_spec.capacity, stream);
        if (!rec.chosen) {
            report.steps.push_back(std::move(rec));
            break; // both sides leave the sentence unchanged
        }
        const auto& rule = rules.rules[static_cast<std::size_t>(rec.chosen->rule)];
        rec.oracle_after = apply_rewrite(current, rule, rec.chosen->position);
        ApplyResult applied = engine.apply(current, rec.chosen);
        rec.spiking_after = applied.sentence;
        ++report.rewrites;
        if (!applied.sentence) {
            diverge(step, "no_match", applied.read_detail);
            report.steps.push_back(std::move(rec));
            break;
        }
        if (!applied.audit.ok) {
            diverge(step, "suppression", applied.audit.detail);
            report.steps.push_back(std::move(rec));
            break;
        }
        if (*applied.sentence != rec.oracle_after) {
            diverge(step, "sentence",
                    "oracle " + sentence_to_string(rec.oracle_after) + " vs spiking " +
                        sentence_to_string(*applied.sentence));
            report.steps.push_back(std::move(rec));
            break;
        }
        current = rec.oracle_after;
        report.steps.push_back(std::move(rec));
        ++report.steps_run;
    }
    report.final_sentence = current;
    return report;
}

} // namespace spikegram
