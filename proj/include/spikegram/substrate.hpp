#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spikegram/error.hpp"

namespace spikegram {

/// Simulation time in integer ticks; 1 tick = 0.1 ms by convention.
/// Integer time makes every comparison exact, so traces are reproducible.
using TimeTick = std::int64_t;

using NeuronId = std::uint32_t;

inline constexpr NeuronId kAutoId = std::numeric_limits<NeuronId>::max();

enum class SynapseSign : std::uint8_t { excitatory, inhibitory };

/// Coincidence-detector neuron: fires when `threshold` excitatory arrivals
/// land within a sliding window of `window` ticks, outside its refractory
/// period and while not vetoed by inhibition.
struct NeuronSpec {
    NeuronId id = kAutoId;     // kAutoId = assign next sequential id
    std::uint32_t threshold = 1;
    TimeTick window = 0;       // coincidence window tau_c
    TimeTick refractory = 1;   // rho; successive firings differ by > rho
    TimeTick inhibit_hold = 0; // h; inhibitory arrival vetoes [t, t+h]
    std::string label;         // raster debugging only, no semantics
};

struct SynapseSpec {
    NeuronId pre = 0;
    NeuronId post = 0;
    TimeTick delay = 1; // must be >= 1
    SynapseSign sign = SynapseSign::excitatory;
};

struct SpikeEvent {
    TimeTick time = 0;
    NeuronId neuron = 0;
    std::uint64_t seq = 0; // insertion sequence; total order = (time, neuron, seq)

    friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

/// Deterministic event-driven network of coincidence detectors. The core
/// is single-threaded and a Network is exclusively owned by one run;
/// independent Networks may run concurrently since nothing is shared.
///
/// Semantics, evaluated per (tick, neuron) batch in (time, id, seq) order:
///   - inhibitory arrivals first extend inhibited_until to max(., t + h);
///   - a neuron fires at t iff it has >= threshold excitatory arrivals in
///     [t - window, t], t - last_fire > refractory, and t > inhibited_until;
///   - injected events are forced firings, subject to the same refractory
///     and inhibition veto.
/// Outgoing synapses are propagated in a canonical order, so the firing
/// trace is independent of synapse insertion order.
class Network {
  public:
    NeuronId add_neuron(NeuronSpec spec) {
        if (spec.threshold < 1) throw ConfigError("neuron threshold must be >= 1");
        if (spec.window < 0) throw ConfigError("neuron window must be >= 0");
        if (spec.refractory < 1) throw ConfigError("neuron refractory must be >= 1");
        if (spec.inhibit_hold < 0) throw ConfigError("neuron inhibit_hold must be >= 0");
        if (spec.id == kAutoId) spec.id = next_auto_id_;
        if (index_of_.count(spec.id))
            throw ConfigError("duplicate neuron id " + std::to_string(spec.id));
        next_auto_id_ = std::max(next_auto_id_, spec.id + 1);
        index_of_.emplace(spec.id, neurons_.size());
        neurons_.push_back(Neuron{spec, {}, {}, kNeverFired, -1});
        return spec.id;
    }

    void add_synapse(const SynapseSpec& spec) {
        if (!index_of_.count(spec.pre))
            throw ConfigError("synapse pre neuron " + std::to_string(spec.pre) + " does not exist");
        if (!index_of_.count(spec.post))
            throw ConfigError("synapse post neuron " + std::to_string(spec.post) + " does not exist");
        if (spec.delay < 1) throw ConfigError("synapse delay must be >= 1");
        neurons_[index_of_.at(spec.pre)].out.push_back(spec);
        out_dirty_ = true;
    }

    /// Remove every synapse pre -> post (used when splicing relay taps).
    void remove_synapses(NeuronId pre, NeuronId post) {
        auto& out = neurons_[checked_index(pre)].out;
        std::erase_if(out, [&](const SynapseSpec& s) { return s.post == post; });
    }

    bool has_neuron(NeuronId id) const { return index_of_.count(id) != 0; }
    std::size_t size() const { return neurons_.size(); }

    std::size_t synapse_count() const {
        std::size_t n = 0;
        for (const auto& neuron : neurons_) n += neuron.out.size();
        return n;
    }

    const NeuronSpec& neuron(NeuronId id) const { return neurons_[checked_index(id)].spec; }

    TimeTick now() const { return now_; }

    /// Enqueue externally forced firings. Times must not be in the past.
    void inject_spikes(std::span<const SpikeEvent> events) {
        for (const auto& e : events) {
            if (e.time < now_)
                throw ConfigError("injected spike at t=" + std::to_string(e.time) +
                                  " is in the past (now=" + std::to_string(now_) + ")");
            checked_index(e.neuron);
            push(e.time, e.neuron, Kind::forced);
        }
    }

    void inject_spike(TimeTick t, NeuronId id) {
        SpikeEvent e{t, id, 0};
        inject_spikes(std::span<const SpikeEvent>(&e, 1));
    }

    /// Process all queued events with time <= t_end; returns the firings
    /// emitted by this call in (time, id, seq) order.
    std::vector<SpikeEvent> run_until(TimeTick t_end) {
        if (t_end < now_) throw ConfigError("run_until target is in the past");
        if (out_dirty_) canonicalize();
        std::vector<SpikeEvent> fired;
        while (!queue_.empty() && queue_.top().time <= t_end) {
            const TimeTick t = queue_.top().time;
            const NeuronId id = queue_.top().neuron;
            now_ = t;
            bool forced = false;
            std::uint32_t excitatory = 0;
            bool inhibited = false;
            while (!queue_.empty() && queue_.top().time == t && queue_.top().neuron == id) {
                switch (queue_.top().kind) {
                    case Kind::forced: forced = true; break;
                    case Kind::excitatory: ++excitatory; break;
                    case Kind::inhibitory: inhibited = true; break;
                }
                queue_.pop();
            }
            Neuron& n = neurons_[index_of_.at(id)];
            if (inhibited)
                n.inhibited_until = std::max(n.inhibited_until, t + n.spec.inhibit_hold);
            for (std::uint32_t i = 0; i < excitatory; ++i) n.arrivals.push_back(t);
            while (!n.arrivals.empty() && n.arrivals.front() < t - n.spec.window)
                n.arrivals.pop_front();
            const bool open = (n.last_fire == kNeverFired || t - n.last_fire > n.spec.refractory) &&
                              t > n.inhibited_until;
            const bool triggered = n.arrivals.size() >= n.spec.threshold;
            if (open && (forced || triggered)) {
                n.last_fire = t;
                SpikeEvent e{t, id, fire_seq_++};
                fired.push_back(e);
                trace_.push_back(e);
                for (const auto& s : n.out)
                    push(t + s.delay, s.post,
                         s.sign == SynapseSign::excitatory ? Kind::excitatory : Kind::inhibitory);
            }
        }
        now_ = t_end;
        return fired;
    }

    /// Every firing since construction, in (time, id, seq) order.
    const std::vector<SpikeEvent>& trace() const { return trace_; }

    /// CSV rows `time_tick,neuron_id`, one per firing.
    void write_trace_csv(std::ostream& os) const {
        os << "time_tick,neuron_id\n";
        for (const auto& e : trace_) os << e.time << ',' << e.neuron << '\n';
    }

  private:
    enum class Kind : std::uint8_t { excitatory, inhibitory, forced };

    struct Pending {
        TimeTick time;
        NeuronId neuron;
        std::uint64_t seq;
        Kind kind;
    };
    struct PendingLater {
        bool operator()(const Pending& a, const Pending& b) const {
            if (a.time != b.time) return a.time > b.time;
            if (a.neuron != b.neuron) return a.neuron > b.neuron;
            return a.seq > b.seq;
        }
    };

    static constexpr TimeTick kNeverFired = std::numeric_limits<TimeTick>::min();

    struct Neuron {
        NeuronSpec spec;
        std::vector<SynapseSpec> out;
        std::deque<TimeTick> arrivals; // excitatory arrivals within the window
        TimeTick last_fire = kNeverFired;
        TimeTick inhibited_until = -1;
    };

    std::size_t checked_index(NeuronId id) const {
        auto it = index_of_.find(id);
        if (it == index_of_.end())
            throw ConfigError("unknown neuron id " + std::to_string(id));
        return it->second;
    }

    void push(TimeTick t, NeuronId post, Kind kind) {
        queue_.push(Pending{t, post, push_seq_++, kind});
    }

    void canonicalize() {
        for (auto& n : neurons_)
            std::sort(n.out.begin(), n.out.end(), [](const SynapseSpec& a, const SynapseSpec& b) {
                return std::tie(a.post, a.delay, a.sign) < std::tie(b.post, b.delay, b.sign);
            });
        out_dirty_ = false;
    }

    std::vector<Neuron> neurons_;
    std::unordered_map<NeuronId, std::size_t> index_of_;
    std::priority_queue<Pending, std::vector<Pending>, PendingLater> queue_;
    std::vector<SpikeEvent> trace_;
    TimeTick now_ = 0;
    std::uint64_t push_seq_ = 0;
    std::uint64_t fire_seq_ = 0;
    NeuronId next_auto_id_ = 0;
    bool out_dirty_ = false;
};

} // namespace spikegram
