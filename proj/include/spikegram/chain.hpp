#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikegram/codec.hpp"
#include "spikegram/error.hpp"
#include "spikegram/substrate.hpp"

namespace spikegram {

using Sentence = std::vector<SymbolId>;

inline std::string sentence_to_string(const Sentence& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Timing layout of a chain register.
///
/// A sentence occupies slots 0..C-1, one token per slot, slot pitch lambda.
/// Each stage repeats its input delta ticks later. A rewrite at tap stage k
/// writes its replacement token into stage k+1 leading the nominal grid by
/// delta_lead ticks; the relay refractory period then swallows every spike
/// of the original token, which requires
///     delta_lead >= D   (the new token fully precedes the old on every
///                        channel, whatever the two templates are) and
///     rho >= D + delta_lead   (the original's latest spike still lands
///                        inside the refractory window opened by the new
///                        token's earliest spike).
struct ChainSpec {
    int W = 8;             // channels
    int L = 6;             // stages
    int capacity = 8;      // C, max tokens per sentence
    TimeTick stage_delay = 110;    // delta, inter-stage relay delay
    TimeTick slot_pitch = 160;     // lambda, time between consecutive slots
    TimeTick relay_refractory = 101; // rho for every chain relay neuron
    TimeTick relay_window = 0;     // tau_c (relays fire on any single arrival)
    std::uint32_t relay_threshold = 1;
    TimeTick write_lead = 50;      // delta_lead

    /// Alignment constant for detector delay lines: inputs from channel c
    /// are delayed by align(D) - offset[c], so a matching token's spikes
    /// converge on the detector exactly align(D) after the slot base.
    static TimeTick align(TimeTick D) { return D; }

    void validate(const Alphabet& alphabet) const {
        auto fail = [](const std::string& what) { throw ConfigError("chain spec: " + what); };
        if (W != alphabet.W) fail("W must equal alphabet W");
        if (L < 2) fail("L must be >= 2");
        if (capacity < 1) fail("capacity must be >= 1");
        if (stage_delay < 1) fail("stage delay must be >= 1");
        if (relay_threshold != 1) fail("relay threshold must be 1 (chains relay, rules compute)");
        const TimeTick D = alphabet.D;
        const TimeTick eps = alphabet.eps;
        if (slot_pitch < D + relay_refractory + eps)
            fail("slot isolation violated: lambda >= D + rho + eps requires lambda >= " +
                 std::to_string(D + relay_refractory + eps) + ", got " +
                 std::to_string(slot_pitch));
        if (write_lead < D)
            fail("write-back precedence violated: delta_lead >= D requires delta_lead >= " +
                 std::to_string(D) + ", got " + std::to_string(write_lead));
        if (relay_refractory < D + write_lead)
            fail("write-back suppression violated: rho >= D + delta_lead requires rho >= " +
                 std::to_string(D + write_lead) + ", got " + std::to_string(relay_refractory));
        if (slot_pitch < relay_refractory + write_lead + D)
            fail("write-back clearance violated: lambda >= rho + delta_lead + D requires "
                 "lambda >= " +
                 std::to_string(relay_refractory + write_lead + D) + ", got " +
                 std::to_string(slot_pitch));
        if (stage_delay < align(D) + write_lead + 2)
            fail("stage delay too short for write-back wiring: delta >= A + delta_lead + 2 "
                 "requires delta >= " +
                 std::to_string(align(D) + write_lead + 2) + ", got " +
                 std::to_string(stage_delay));
    }

    /// A spec whose inequalities hold with margin for the given alphabet.
    static ChainSpec fitted(const Alphabet& alphabet, int L = 6, int capacity = 8) {
        ChainSpec spec;
        spec.W = alphabet.W;
        spec.L = L;
        spec.capacity = capacity;
        const TimeTick D = alphabet.D;
        spec.write_lead = D;
        spec.relay_refractory = D + spec.write_lead + 1;
        spec.slot_pitch = spec.relay_refractory + spec.write_lead + D + alphabet.eps + 6;
        spec.stage_delay = align(D) + spec.write_lead + 10;
        return spec;
    }
};

/// What one chain slot decoded to.
struct SlotRead {
    enum class Kind { empty, matched, garbled };
    Kind kind = Kind::empty;
    Decoded decoded; // valid when matched
};

struct ReadResult {
    std::vector<SlotRead> slots;

    /// The slots as a sentence, if they form matched tokens followed only
    /// by empty slots. Garbled slots or holes yield nullopt.
    std::optional<Sentence> to_sentence() const {
        Sentence s;
        bool ended = false;
        for (const auto& slot : slots) {
            switch (slot.kind) {
                case SlotRead::Kind::matched:
                    if (ended) return std::nullopt;
                    s.push_back(slot.decoded.symbol);
                    break;
                case SlotRead::Kind::empty: ended = true; break;
                case SlotRead::Kind::garbled: return std::nullopt;
            }
        }
        return s;
    }
};

/// A chain register realized as an L x W grid of relay neurons. A Chain is
/// bound to the Network it was built in and shares its ownership contract.
class Chain {
  public:
    Chain(Network& net, const ChainSpec& spec, const Alphabet& alphabet)
        : spec_(spec), D_(alphabet.D), eps_(alphabet.eps) {
        spec.validate(alphabet);
        grid_.resize(static_cast<std::size_t>(spec.L));
        for (int k = 0; k < spec.L; ++k) {
            grid_[static_cast<std::size_t>(k)].reserve(static_cast<std::size_t>(spec.W));
            for (int c = 0; c < spec.W; ++c) {
                NeuronSpec n;
                n.threshold = spec.relay_threshold;
                n.window = spec.relay_window;
                n.refractory = spec.relay_refractory;
                n.label = "relay[" + std::to_string(k) + "][" + std::to_string(c) + "]";
                grid_[static_cast<std::size_t>(k)].push_back(net.add_neuron(n));
            }
        }
        for (int k = 0; k + 1 < spec.L; ++k)
            for (int c = 0; c < spec.W; ++c)
                net.add_synapse({relay(k, c), relay(k + 1, c), spec.stage_delay,
                                 SynapseSign::excitatory});
    }

    const ChainSpec& spec() const { return spec_; }
    TimeTick token_duration() const { return D_; }

    NeuronId relay(int stage, int channel) const {
        return grid_.at(static_cast<std::size_t>(stage)).at(static_cast<std::size_t>(channel));
    }

    const std::vector<NeuronId>& stage(int k) const {
        return grid_.at(static_cast<std::size_t>(k));
    }

    TimeTick slot_base(TimeTick t0, int stage, int slot) const {
        return t0 + slot * spec_.slot_pitch + stage * spec_.stage_delay;
    }

    /// Encode the sentence onto stage 0, token j based at t0 + j*lambda.
    /// Noise, when provided, is applied per token slot.
    void write_sentence(Network& net, const Alphabet& alphabet, const Sentence& sentence,
                        TimeTick t0, const NoiseModel* noise = nullptr,
                        Rng* rng = nullptr) const {
        if (static_cast<int>(sentence.size()) > spec_.capacity)
            throw ConfigError("sentence length " + std::to_string(sentence.size()) +
                              " exceeds chain capacity " + std::to_string(spec_.capacity));
        std::span<const NeuronId> chans(stage(0));
        for (std::size_t j = 0; j < sentence.size(); ++j) {
            const TimeTick base = slot_base(t0, 0, static_cast<int>(j));
            auto events = encode(alphabet, sentence[j], base, chans);
            if (noise && !noise->silent()) {
                if (!rng) throw ConfigError("write_sentence: noise requires an rng");
                events = perturb(events, chans, base, D_, *noise, *rng);
            }
            net.inject_spikes(events);
        }
    }

    /// Simulation horizon comfortably past the last slot's arrival at the
    /// last stage, including write-back and suffix-shift paths.
    TimeTick horizon(TimeTick t0) const {
        return t0 + (spec_.capacity + 3) * spec_.slot_pitch + (spec_.L + 1) * spec_.stage_delay +
               4 * D_;
    }

    /// Decode every slot at one stage from the firing trace. Rewritten
    /// tokens lead the slot grid by up to max_lead ticks (and may lag by up
    /// to late_slack), so matching searches shifts in [-max_lead, late_slack].
    ReadResult read_sentence(const Network& net, const Alphabet& alphabet, int stage_k,
                             TimeTick t0, int m_max = 0,
                             std::optional<TimeTick> max_lead = std::nullopt,
                             TimeTick late_slack = 0) const {
        const TimeTick lead = max_lead.value_or(spec_.write_lead + D_);
        ReadResult result;
        result.slots.resize(static_cast<std::size_t>(spec_.capacity));
        const auto& chans = stage(stage_k);
        for (int j = 0; j < spec_.capacity; ++j) {
            const TimeTick base = slot_base(t0, stage_k, j);
            const TimeTick lo = base - lead - eps_;
            const TimeTick hi = base + D_ + eps_ + late_slack;
            std::vector<std::vector<TimeTick>> per_channel(
                static_cast<std::size_t>(spec_.W));
            bool any = false;
            for (const auto& e : net.trace()) {
                if (e.time < lo || e.time >= hi) continue;
                for (int c = 0; c < spec_.W; ++c)
                    if (e.neuron == chans[static_cast<std::size_t>(c)]) {
                        per_channel[static_cast<std::size_t>(c)].push_back(e.time - base);
                        any = true;
                    }
            }
            auto& slot = result.slots[static_cast<std::size_t>(j)];
            if (!any) {
                slot.kind = SlotRead::Kind::empty;
                continue;
            }
            auto dec = match_token(per_channel, alphabet, eps_, m_max, -lead, late_slack);
            if (dec) {
                slot.kind = SlotRead::Kind::matched;
                slot.decoded = *dec;
            } else {
                slot.kind = SlotRead::Kind::garbled;
            }
        }
        return result;
    }

    nlohmann::json layout_json() const {
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& row : grid_) stages.push_back(row);
        return nlohmann::json{{"W", spec_.W}, {"L", spec_.L}, {"stages", stages}};
    }

  private:
    ChainSpec spec_;
    TimeTick D_;
    TimeTick eps_;
    std::vector<std::vector<NeuronId>> grid_;
};

} // namespace spikegram
