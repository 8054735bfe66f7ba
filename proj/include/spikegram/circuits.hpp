#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikegram/chain.hpp"
#include "spikegram/rules.hpp"

namespace spikegram {

/// A rewrite rule lowered onto a chain: a detector tuned to the condition
/// template, an optional context gate, and write-back delay lines that
/// inject the action tokens into the next stage with lead delta_lead.
///
/// The write gate sits between detector and write-back: it fires only when
/// the detector's spike coincides with an externally injected permit. The
/// stochastic part of rule application (the decision-stream draw) is thus
/// realized as the presence or absence of one permit spike per traversal.
struct CompiledRule {
    int rule_index = 0;
    int tap_stage = 0;
    int action_len = 1;
    NeuronId detector = 0;
    std::optional<NeuronId> gate;      // context gating interneuron
    std::optional<NeuronId> t_detector; // context symbol detector
    NeuronId write_gate = 0;
    NeuronId permit = 0;
    std::optional<NeuronId> ring;      // slot clock for suffix shifting
    std::vector<NeuronId> shift_relays;
    std::vector<TimeTick> input_delays; // per channel: A - offset_X[c]
};

/// All compiled rules of one rule set, attached at one tap stage of one
/// chain inside one network. The tap splices a gateable relay into every
/// stage k -> k+1 link so that a multi-token rewrite can reroute the
/// sentence suffix through a one-slot-longer path.
class RuleCircuits {
  public:
    RuleCircuits(Network& net, const Chain& chain, const Alphabet& alphabet,
                 const RuleSet& rules, int tap_stage)
        : chain_(&chain), alphabet_(&alphabet), tap_(tap_stage) {
        const ChainSpec& spec = chain.spec();
        if (tap_stage < 0 || tap_stage >= spec.L - 1)
            throw ConfigError("tap stage must be in [0, L-2], got " +
                              std::to_string(tap_stage));
        rules.validate(alphabet.size());
        for (const auto& r : rules.rules)
            if (static_cast<int>(r.action.size()) > spec.capacity)
                throw ConfigError("action overflow: rule action longer than chain capacity");
        splice_tap(net);
        for (int i = 0; i < static_cast<int>(rules.rules.size()); ++i)
            compiled_.push_back(compile(net, rules.rules[static_cast<std::size_t>(i)], i));
    }

    const std::vector<CompiledRule>& compiled() const { return compiled_; }
    int tap_stage() const { return tap_; }
    const std::vector<NeuronId>& tap_relays() const { return direct_; }

    /// When token X sits in slot `position`, its detector fires here.
    TimeTick detector_fire_time(TimeTick t0, int position) const {
        return chain_->slot_base(t0, tap_, position) + ChainSpec::align(alphabet_->D);
    }

    /// Open one rule's write gate for one slot of this traversal.
    void inject_permit(Network& net, TimeTick t0, const RewriteSite& site) const {
        net.inject_spike(detector_fire_time(t0, site.position),
                         compiled_[static_cast<std::size_t>(site.rule)].permit);
    }

    /// Map a detector firing back to a slot index; nullopt when the firing
    /// is off the slot grid (e.g. under noise).
    std::optional<int> position_of_fire(TimeTick t0, TimeTick fire_time) const {
        const TimeTick rel = fire_time - detector_fire_time(t0, 0);
        if (rel < 0) return std::nullopt;
        const TimeTick pitch = chain_->spec().slot_pitch;
        if (rel % pitch != 0) return std::nullopt;
        const TimeTick slot = rel / pitch;
        if (slot >= chain_->spec().capacity) return std::nullopt;
        return static_cast<int>(slot);
    }

  private:
    // Replace each direct relay synapse (k,c) -> (k+1,c) with a two-hop
    // path through a gateable relay, preserving the total delay.
    void splice_tap(Network& net) {
        const ChainSpec& spec = chain_->spec();
        for (int c = 0; c < spec.W; ++c) {
            const NeuronId pre = chain_->relay(tap_, c);
            const NeuronId post = chain_->relay(tap_ + 1, c);
            net.remove_synapses(pre, post);
            NeuronSpec gate;
            gate.threshold = 1;
            gate.window = 0;
            gate.refractory = spec.relay_refractory;
            gate.inhibit_hold = (spec.capacity + 3) * spec.slot_pitch;
            gate.label = "tap_relay[" + std::to_string(tap_) + "][" + std::to_string(c) + "]";
            NeuronId id = net.add_neuron(gate);
            net.add_synapse({pre, id, 1, SynapseSign::excitatory});
            net.add_synapse({id, post, spec.stage_delay - 1, SynapseSign::excitatory});
            direct_.push_back(id);
        }
    }

    NeuronId add_detector(Network& net, SymbolId symbol, std::uint32_t extra_inputs,
                          const std::string& label, std::vector<TimeTick>* delays_out) {
        const ChainSpec& spec = chain_->spec();
        const TimeTick A = ChainSpec::align(alphabet_->D);
        const SpikeTemplate& t = alphabet_->tmpl(symbol);
        NeuronSpec det;
        det.threshold = static_cast<std::uint32_t>(spec.W) + extra_inputs;
        det.window = 2 * alphabet_->eps;
        det.refractory = alphabet_->D + 2 * alphabet_->eps + 2;
        det.label = label;
        NeuronId id = net.add_neuron(det);
        for (int c = 0; c < spec.W; ++c) {
            const TimeTick delay = A - t.offsets[static_cast<std::size_t>(c)];
            net.add_synapse({chain_->relay(tap_, c), id, delay, SynapseSign::excitatory});
            if (delays_out) delays_out->push_back(delay);
        }
        return id;
    }

    CompiledRule compile(Network& net, const AbstractRule& rule, int index) {
        const ChainSpec& spec = chain_->spec();
        const TimeTick A = ChainSpec::align(alphabet_->D);
        const TimeTick lambda = spec.slot_pitch;
        const TimeTick delta = spec.stage_delay;
        const TimeTick lead = spec.write_lead;
        const int m = static_cast<int>(rule.action.size());
        const std::string tag = "rule" + std::to_string(index);

        CompiledRule out;
        out.rule_index = index;
        out.tap_stage = tap_;
        out.action_len = m;

        // Condition detector; context rules need one extra coincident input
        // (the gate's enable spike).
        out.detector = add_detector(net, rule.condition, rule.context ? 1 : 0,
                                    tag + ".detector", &out.input_delays);

        if (rule.context) {
            out.t_detector =
                add_detector(net, rule.context->symbol, 0, tag + ".context_detector", nullptr);
            NeuronSpec g;
            g.threshold = 1;
            g.window = 0;
            g.refractory = alphabet_->D + 2 * alphabet_->eps + 2;
            g.label = tag + ".gate";
            out.gate = net.add_neuron(g);
            net.add_synapse({*out.t_detector, *out.gate, 1, SynapseSign::excitatory});
            // Enable lands exactly one slot after the context detection,
            // aligned with the condition volley of the following slot.
            net.add_synapse({*out.gate, out.detector, lambda - 1, SynapseSign::excitatory});
            if (rule.context->relation == ContextRelation::anywhere_before)
                // Latch: re-arm every slot until the traversal ends.
                net.add_synapse({*out.gate, *out.gate, lambda, SynapseSign::excitatory});
        }

        // Write gate: detector spike AND permit spike on the same tick.
        NeuronSpec wg;
        wg.threshold = 2;
        wg.window = 0;
        wg.refractory = 1;
        wg.label = tag + ".write_gate";
        out.write_gate = net.add_neuron(wg);
        net.add_synapse({out.detector, out.write_gate, 1, SynapseSign::excitatory});
        NeuronSpec pm;
        pm.threshold = 1;
        pm.window = 0;
        pm.refractory = 1;
        pm.label = tag + ".permit";
        out.permit = net.add_neuron(pm);
        net.add_synapse({out.permit, out.write_gate, 1, SynapseSign::excitatory});

        // Write-back delay lines: action token i lands in slot j+i of the
        // next stage, leading the grid by delta_lead. The write gate fires
        // at slot_base(tap, j) + A + 1.
        for (int i = 0; i < m; ++i) {
            const SpikeTemplate& t = alphabet_->tmpl(rule.action[static_cast<std::size_t>(i)]);
            for (int c = 0; c < spec.W; ++c) {
                const TimeTick d =
                    delta + i * lambda + t.offsets[static_cast<std::size_t>(c)] - lead - A - 1;
                if (d < 1)
                    throw ConfigError("write-back delay must be >= 1 (stage delay too short)");
                net.add_synapse({out.write_gate, chain_->relay(tap_ + 1, c), d,
                                 SynapseSign::excitatory});
            }
        }

        if (m >= 2) {
            // Insertion: veto the spliced relays for the rest of the
            // sentence and reroute the suffix through shift relays that add
            // (m-1) slot pitches, so every later token lands m-1 slots
            // further right, on the grid.
            for (int c = 0; c < spec.W; ++c)
                net.add_synapse({out.write_gate, direct_[static_cast<std::size_t>(c)], 1,
                                 SynapseSign::inhibitory});

            NeuronSpec ring;
            ring.threshold = 1;
            ring.window = 0;
            ring.refractory = lambda - 1;
            ring.label = tag + ".ring";
            out.ring = net.add_neuron(ring);
            const TimeTick d_ring = lambda - A - 4; // first pulse: next slot base - 3
            if (d_ring < 1) throw ConfigError("slot pitch too short for the shift ring");
            net.add_synapse({out.write_gate, *out.ring, d_ring, SynapseSign::excitatory});
            net.add_synapse({*out.ring, *out.ring, lambda, SynapseSign::excitatory});

            for (int c = 0; c < spec.W; ++c) {
                NeuronSpec s;
                s.threshold = 2; // channel spike AND ring pulse
                s.window = alphabet_->D + 2;
                s.refractory = 1;
                s.label = tag + ".shift[" + std::to_string(c) + "]";
                NeuronId sid = net.add_neuron(s);
                net.add_synapse({chain_->relay(tap_, c), sid, 1, SynapseSign::excitatory});
                net.add_synapse({*out.ring, sid, 2, SynapseSign::excitatory});
                net.add_synapse({sid, chain_->relay(tap_ + 1, c),
                                 delta + (m - 1) * lambda - 1, SynapseSign::excitatory});
                out.shift_relays.push_back(sid);
            }
        }
        return out;
    }

    const Chain* chain_;
    const Alphabet* alphabet_;
    int tap_;
    std::vector<NeuronId> direct_;
    std::vector<CompiledRule> compiled_;
};

/// The Marcus variable rule: compare the tokens in slot_i and slot_j and
/// write out_same into slot_j+1 when they are eps-equal on (almost) every
/// channel, out_diff otherwise. The comparison is purely relational:
/// nothing in the circuit references a symbol identity, so it generalizes
/// to tokens never seen before.
struct EqualityCircuit {
    int slot_i = 0;
    int slot_j = 2;
    SymbolId out_same = kNoSymbol;
    SymbolId out_diff = kNoSymbol;
    int tap_stage = 0;
    std::vector<NeuronId> eq_layer; // per-channel coincidence detectors
    NeuronId and_detector = 0;
    NeuronId diff_trigger = 0;
};

/// Build the equality circuit on a chain. m_eq is the number of channels
/// the AND detector may miss and still report SAME (noise margin; exact at
/// zero noise whenever the alphabet's d_min exceeds it). jitter_budget is
/// the largest per-spike jitter the internal timing margins absorb.
inline EqualityCircuit build_equality_rule(Network& net, const Chain& chain,
                                           const Alphabet& alphabet, int slot_i, int slot_j,
                                           SymbolId out_same, SymbolId out_diff,
                                           int tap_stage = 0, int m_eq = 2,
                                           TimeTick jitter_budget = 0) {
    const ChainSpec& spec = chain.spec();
    const TimeTick D = alphabet.D;
    const TimeTick eps = alphabet.eps;
    const TimeTick J = jitter_budget > 0 ? jitter_budget : 6 * eps;
    const TimeTick lambda = spec.slot_pitch;
    const TimeTick lead = spec.write_lead;

    auto fail = [](const std::string& what) { throw ConfigError("equality circuit: " + what); };
    if (slot_i >= slot_j) fail("slot_i must be < slot_j");
    if (slot_j + 1 >= spec.capacity) fail("slot_j+1 must be within capacity");
    if (tap_stage < 0 || tap_stage >= spec.L - 1) fail("tap stage must be in [0, L-2]");
    if (m_eq >= alphabet.d_min)
        fail("m_eq must be below the alphabet's d_min for exact zero-noise decisions");

    const TimeTick delta = spec.stage_delay;
    const TimeTick gap = (slot_j - slot_i) * lambda;
    const TimeTick d_tr = D + 2 * J + 5;           // trigger lag behind the volley
    const TimeTick hold_tr = d_tr + D + 2 * J + 6; // veto covers the whole trigger volley
    if (lambda + delta < lead + D + 3) fail("slot pitch too short for the SAME write-back");
    if (lambda + delta < lead + d_tr + 1) fail("slot pitch too short for the DIFF write-back");
    if (3 * D + 5 * J + 9 + 6 >= lambda + d_tr - J)
        fail("trigger hold must expire before the next volley (increase lambda)");
    if (lambda < spec.relay_refractory + lead + 2 * D + J)
        fail("equality write clearance: lambda >= rho + delta_lead + 2D + J (timing wobble)");

    EqualityCircuit out;
    out.slot_i = slot_i;
    out.slot_j = slot_j;
    out.out_same = out_same;
    out.out_diff = out_diff;
    out.tap_stage = tap_stage;

    // Per-channel coincidence layer: slot_i's output delayed by the slot
    // gap meets slot_j's output undelayed.
    for (int c = 0; c < spec.W; ++c) {
        NeuronSpec e;
        e.threshold = 2;
        e.window = 2 * eps;
        e.refractory = 1;
        e.label = "eq[" + std::to_string(c) + "]";
        NeuronId eid = net.add_neuron(e);
        net.add_synapse({chain.relay(tap_stage, c), eid, gap + 2, SynapseSign::excitatory});
        net.add_synapse({chain.relay(tap_stage, c), eid, 2, SynapseSign::excitatory});
        out.eq_layer.push_back(eid);
    }

    NeuronSpec v;
    v.threshold = static_cast<std::uint32_t>(spec.W - m_eq);
    v.window = D + 2 + 2 * J;
    v.refractory = (spec.capacity + 3) * lambda;
    v.label = "eq.and";
    out.and_detector = net.add_neuron(v);
    for (NeuronId eid : out.eq_layer)
        net.add_synapse({eid, out.and_detector, 1, SynapseSign::excitatory});

    NeuronSpec tr;
    tr.threshold = 1;
    tr.window = 0;
    tr.refractory = D + 2 * J + 20;
    tr.inhibit_hold = hold_tr;
    tr.label = "eq.diff_trigger";
    out.diff_trigger = net.add_neuron(tr);
    for (int c = 0; c < spec.W; ++c)
        net.add_synapse({chain.relay(tap_stage, c), out.diff_trigger, gap + d_tr,
                         SynapseSign::excitatory});
    net.add_synapse({out.and_detector, out.diff_trigger, 1, SynapseSign::inhibitory});

    // Write-back lines. Reference firing times at zero noise:
    // AND detector <= volley base + D + 2, trigger >= volley base + d_tr.
    const SpikeTemplate& same_t = alphabet.tmpl(out_same);
    const SpikeTemplate& diff_t = alphabet.tmpl(out_diff);
    for (int c = 0; c < spec.W; ++c) {
        const TimeTick same_d =
            delta + lambda + same_t.offsets[static_cast<std::size_t>(c)] - lead - D - 2;
        const TimeTick diff_d =
            delta + lambda + diff_t.offsets[static_cast<std::size_t>(c)] - lead - d_tr;
        if (same_d < 1 || diff_d < 1) fail("write-back delay must be >= 1");
        net.add_synapse({out.and_detector, chain.relay(tap_stage + 1, c), same_d,
                         SynapseSign::excitatory});
        net.add_synapse({out.diff_trigger, chain.relay(tap_stage + 1, c), diff_d,
                         SynapseSign::excitatory});
    }
    return out;
}

} // namespace spikegram
