#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikegram/error.hpp"
#include "spikegram/rng.hpp"
#include "spikegram/substrate.hpp"

namespace spikegram {

/// Index into an Alphabet. Symbol roles (start symbol, SAME, DIFF) are
/// assigned by the rule layer; the codec treats all symbols alike.
using SymbolId = std::int32_t;

inline constexpr SymbolId kNoSymbol = -1;

/// One symbol token: a W-channel vector of spike-time offsets, exactly one
/// spike per channel, each offset in [0, D).
struct SpikeTemplate {
    std::vector<TimeTick> offsets;

    int width() const { return static_cast<int>(offsets.size()); }

    friend bool operator==(const SpikeTemplate&, const SpikeTemplate&) = default;
};

/// Number of channels where the offsets differ by more than eps.
/// Symmetric; distance(a, a, eps) == 0.
inline int distance(const SpikeTemplate& a, const SpikeTemplate& b, TimeTick eps) {
    if (a.width() != b.width())
        throw ConfigError("template width mismatch: " + std::to_string(a.width()) + " vs " +
                          std::to_string(b.width()));
    int d = 0;
    for (int c = 0; c < a.width(); ++c) {
        TimeTick diff = a.offsets[c] - b.offsets[c];
        if (diff < 0) diff = -diff;
        if (diff > eps) ++d;
    }
    return d;
}

/// Maximum, over all relative time shifts, of the number of channels whose
/// offsets land within `tol` of each other. A coincidence detector tuned to
/// one template sees at most this many aligned arrivals from the other, at
/// its best-matching latency, so alphabet separation must bound it.
inline int shifted_coincidence(const SpikeTemplate& a, const SpikeTemplate& b, TimeTick tol) {
    if (a.width() != b.width()) throw ConfigError("template width mismatch");
    std::vector<TimeTick> diffs(a.offsets.size());
    for (std::size_t c = 0; c < diffs.size(); ++c) diffs[c] = a.offsets[c] - b.offsets[c];
    std::sort(diffs.begin(), diffs.end());
    // Largest set of diffs coverable by one window of total width 2*tol.
    int best = 0;
    std::size_t lo = 0;
    for (std::size_t hi = 0; hi < diffs.size(); ++hi) {
        while (diffs[hi] - diffs[lo] > 2 * tol) ++lo;
        best = std::max(best, static_cast<int>(hi - lo + 1));
    }
    return best;
}

/// A fixed set of symbol templates sharing channel count W, token duration D
/// and coincidence tolerance eps. Immutable after construction.
///
/// Separation contract (enforced by make_alphabet, checked by validate):
/// for every pair of distinct templates,
///   shifted_coincidence(a, b, 2*eps) <= W - d_min,
/// i.e. no detector window of width 2*eps captures more than W - d_min
/// channels of a foreign token at any latency. When strong_gap > 0, every
/// channel pair additionally differs by at least strong_gap ticks.
struct Alphabet {
    int W = 8;
    TimeTick D = 50;
    TimeTick eps = 3;
    int d_min = 4;
    TimeTick strong_gap = 0;
    std::vector<SpikeTemplate> templates;

    int size() const { return static_cast<int>(templates.size()); }

    const SpikeTemplate& tmpl(SymbolId s) const {
        if (s < 0 || s >= size())
            throw ConfigError("unknown symbol id " + std::to_string(s));
        return templates[static_cast<std::size_t>(s)];
    }

    bool separated(const SpikeTemplate& a, const SpikeTemplate& b) const {
        if (shifted_coincidence(a, b, 2 * eps) > W - d_min) return false;
        if (strong_gap > 0) {
            for (int c = 0; c < W; ++c) {
                TimeTick diff = a.offsets[c] - b.offsets[c];
                if (diff < 0) diff = -diff;
                if (diff < strong_gap) return false;
            }
        }
        return true;
    }

    void validate() const {
        if (W < 1) throw ConfigError("alphabet W must be >= 1");
        if (D < 2) throw ConfigError("alphabet D must be >= 2");
        if (eps < 0) throw ConfigError("alphabet eps must be >= 0");
        if (d_min < 1 || d_min > W) throw ConfigError("alphabet d_min must be in [1, W]");
        for (const auto& t : templates) {
            if (t.width() != W) throw ConfigError("template width != W");
            for (TimeTick off : t.offsets)
                if (off < 0 || off >= D) throw ConfigError("template offset out of [0, D)");
        }
        for (int i = 0; i < size(); ++i)
            for (int j = i + 1; j < size(); ++j)
                if (!separated(templates[i], templates[j]))
                    throw ConfigError("alphabet separation violated for symbols " +
                                      std::to_string(i) + "," + std::to_string(j));
    }
};

/// Rejection-sample an alphabet of n templates. Deterministic given seed.
/// Throws InfeasibleAlphabetError if any template exceeds max_attempts.
inline Alphabet make_alphabet(int n, int W, TimeTick D, int d_min, std::uint64_t seed,
                              TimeTick eps = 3, TimeTick strong_gap = 0,
                              int max_attempts = 10000) {
    if (n < 1) throw ConfigError("alphabet size must be >= 1");
    if (W < 1) throw ConfigError("alphabet W must be >= 1");
    if (D < 2) throw ConfigError("alphabet D must be >= 2");
    if (d_min < 1 || d_min > W) throw ConfigError("alphabet d_min must be in [1, W]");
    Alphabet ab;
    ab.W = W;
    ab.D = D;
    ab.eps = eps;
    ab.d_min = d_min;
    ab.strong_gap = strong_gap;
    Rng rng(derive_seed(seed, "alphabet"));
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            SpikeTemplate t;
            t.offsets.reserve(W);
            for (int c = 0; c < W; ++c)
                t.offsets.push_back(rng.next_int(0, D - 1));
            bool ok = true;
            for (const auto& u : ab.templates)
                if (!ab.separated(u, t)) {
                    ok = false;
                    break;
                }
            if (ok) {
                ab.templates.push_back(std::move(t));
                placed = true;
                break;
            }
        }
        if (!placed)
            throw InfeasibleAlphabetError(
                "alphabet infeasible: no separated template found for symbol " +
                std::to_string(i) + " after " + std::to_string(max_attempts) + " attempts");
    }
    return ab;
}

/// Per-spike transmission noise. jitter is uniform in [-jitter_max,
/// +jitter_max]; deletions and insertions are independent Bernoulli draws.
struct NoiseModel {
    TimeTick jitter_max = 0;
    double p_delete = 0.0;
    double p_insert = 0.0;

    bool silent() const { return jitter_max == 0 && p_delete == 0.0 && p_insert == 0.0; }

    void validate() const {
        if (jitter_max < 0) throw ConfigError("jitter_max must be >= 0");
        if (p_delete < 0 || p_delete > 1) throw ConfigError("p_delete must be in [0,1]");
        if (p_insert < 0 || p_insert > 1) throw ConfigError("p_insert must be in [0,1]");
    }
};

/// One spike per channel at base_time + offset[c], on the given neurons.
inline std::vector<SpikeEvent> encode(const Alphabet& alphabet, SymbolId symbol,
                                      TimeTick base_time,
                                      std::span<const NeuronId> channel_neurons) {
    const SpikeTemplate& t = alphabet.tmpl(symbol);
    if (static_cast<int>(channel_neurons.size()) != alphabet.W)
        throw ConfigError("encode: expected " + std::to_string(alphabet.W) +
                          " channel neurons, got " + std::to_string(channel_neurons.size()));
    std::vector<SpikeEvent> events;
    events.reserve(channel_neurons.size());
    for (int c = 0; c < alphabet.W; ++c)
        events.push_back({base_time + t.offsets[c], channel_neurons[c], 0});
    return events;
}

struct Decoded {
    SymbolId symbol = kNoSymbol;
    int mismatch = 0;
    TimeTick shift = 0; // best alignment relative to the nominal slot base
};

/// Match spike times (grouped per channel, relative to the slot base)
/// against every template at every shift in [shift_min, shift_max].
/// A channel matches when some spike lies within eps of shift + offset[c].
/// Returns the template with the unique strictly smallest mismatch, if that
/// mismatch is <= m_max; ties and no-candidates yield nullopt.
inline std::optional<Decoded> match_token(const std::vector<std::vector<TimeTick>>& channel_times,
                                          const Alphabet& alphabet, TimeTick eps, int m_max,
                                          TimeTick shift_min = 0, TimeTick shift_max = 0) {
    if (static_cast<int>(channel_times.size()) != alphabet.W)
        throw ConfigError("match_token: channel count mismatch");
    std::optional<Decoded> best;
    bool tie = false;
    for (SymbolId s = 0; s < alphabet.size(); ++s) {
        const auto& offs = alphabet.templates[static_cast<std::size_t>(s)].offsets;
        int sym_best = alphabet.W + 1;
        TimeTick sym_shift = 0;
        for (TimeTick shift = shift_min; shift <= shift_max; ++shift) {
            int mismatch = 0;
            for (int c = 0; c < alphabet.W; ++c) {
                bool hit = false;
                for (TimeTick t : channel_times[static_cast<std::size_t>(c)]) {
                    TimeTick diff = t - (shift + offs[static_cast<std::size_t>(c)]);
                    if (diff < 0) diff = -diff;
                    if (diff <= eps) {
                        hit = true;
                        break;
                    }
                }
                if (!hit) ++mismatch;
            }
            if (mismatch < sym_best) {
                sym_best = mismatch;
                sym_shift = shift;
            }
        }
        if (sym_best > m_max) continue;
        if (!best || sym_best < best->mismatch) {
            best = Decoded{s, sym_best, sym_shift};
            tie = false;
        } else if (sym_best == best->mismatch) {
            tie = true;
        }
    }
    if (tie) return std::nullopt;
    return best;
}

/// Convenience: group raw events into channels by neuron id and match.
inline std::optional<Decoded> match_token(std::span<const SpikeEvent> events,
                                          std::span<const NeuronId> channel_neurons,
                                          TimeTick base_time, const Alphabet& alphabet,
                                          TimeTick eps, int m_max, TimeTick shift_min = 0,
                                          TimeTick shift_max = 0) {
    std::vector<std::vector<TimeTick>> per_channel(channel_neurons.size());
    for (const auto& e : events)
        for (std::size_t c = 0; c < channel_neurons.size(); ++c)
            if (e.neuron == channel_neurons[c]) per_channel[c].push_back(e.time - base_time);
    return match_token(per_channel, alphabet, eps, m_max, shift_min, shift_max);
}

/// Apply channel noise to the events of one token slot. Each spike is
/// jittered uniformly and clipped into [window_start, window_start +
/// window_len), then deleted with p_delete; each channel gains a spurious
/// spike at a uniform window time with p_insert. Deterministic given rng.
inline std::vector<SpikeEvent> perturb(std::span<const SpikeEvent> events,
                                       std::span<const NeuronId> channel_neurons,
                                       TimeTick window_start, TimeTick window_len,
                                       const NoiseModel& noise, Rng& rng) {
    noise.validate();
    std::vector<SpikeEvent> out;
    out.reserve(events.size());
    for (const auto& e : events) {
        TimeTick t = e.time;
        if (noise.jitter_max > 0)
            t += rng.next_int(-noise.jitter_max, noise.jitter_max);
        t = std::clamp(t, window_start, window_start + window_len - 1);
        const bool drop = noise.p_delete > 0 && rng.bernoulli(noise.p_delete);
        if (!drop) out.push_back({t, e.neuron, e.seq});
    }
    if (noise.p_insert > 0)
        for (NeuronId id : channel_neurons)
            if (rng.bernoulli(noise.p_insert))
                out.push_back({window_start + rng.next_int(0, window_len - 1), id, 0});
    return out;
}

inline nlohmann::json alphabet_to_json(const Alphabet& ab) {
    nlohmann::json templates = nlohmann::json::object();
    for (SymbolId s = 0; s < ab.size(); ++s)
        templates[std::to_string(s)] = ab.templates[static_cast<std::size_t>(s)].offsets;
    return nlohmann::json{{"W", ab.W},
                          {"D", ab.D},
                          {"eps", ab.eps},
                          {"d_min", ab.d_min},
                          {"strong_gap", ab.strong_gap},
                          {"templates", templates}};
}

inline Alphabet alphabet_from_json(const nlohmann::json& j) {
    Alphabet ab;
    ab.W = j.at("W").get<int>();
    ab.D = j.at("D").get<TimeTick>();
    ab.eps = j.at("eps").get<TimeTick>();
    ab.d_min = j.value("d_min", 1);
    ab.strong_gap = j.value("strong_gap", TimeTick{0});
    const auto& templates = j.at("templates");
    ab.templates.resize(templates.size());
    for (auto it = templates.begin(); it != templates.end(); ++it) {
        std::size_t s = std::stoul(it.key());
        if (s >= ab.templates.size()) throw ConfigError("non-contiguous symbol ids in alphabet");
        ab.templates[s].offsets = it.value().get<std::vector<TimeTick>>();
    }
    ab.validate();
    return ab;
}

} // namespace spikegram
