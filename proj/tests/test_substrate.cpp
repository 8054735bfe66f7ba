#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "spikegram/rng.hpp"
#include "spikegram/substrate.hpp"

using namespace spikegram;

TEST_CASE("add_neuron assigns and checks ids") {
    Network net;
    NeuronId a = net.add_neuron({});
    CHECK(net.size() == 1);
    CHECK(net.has_neuron(a));

    NeuronSpec dup;
    dup.id = a;
    CHECK_THROWS_AS(net.add_neuron(dup), ConfigError);

    for (int i = 0; i < 10000; ++i) net.add_neuron({});
    CHECK(net.size() == 10001);
    for (NeuronId id = 0; id <= 10000; ++id) REQUIRE(net.has_neuron(id));
}

TEST_CASE("add_synapse validates endpoints and delay") {
    Network net;
    NeuronId a = net.add_neuron({});
    NeuronId b = net.add_neuron({});
    CHECK_THROWS_AS(net.add_synapse({a, 999, 1, SynapseSign::excitatory}), ConfigError);
    CHECK_THROWS_AS(net.add_synapse({a, b, 0, SynapseSign::excitatory}), ConfigError);
    net.add_synapse({a, b, 5, SynapseSign::excitatory});
}

TEST_CASE("synaptic delay schedules arrival") {
    Network net;
    NeuronId a = net.add_neuron({});
    NeuronSpec post_spec;
    post_spec.threshold = 1;
    NeuronId b = net.add_neuron(post_spec);
    net.add_synapse({a, b, 5, SynapseSign::excitatory});
    net.inject_spike(10, a);
    auto fired = net.run_until(100);
    REQUIRE(fired.size() == 2);
    CHECK(fired[0].neuron == a);
    CHECK(fired[0].time == 10);
    CHECK(fired[1].neuron == b);
    CHECK(fired[1].time == 15);
}

TEST_CASE("two parallel synapses deliver two arrivals") {
    Network net;
    NeuronId a = net.add_neuron({});
    NeuronId b = net.add_neuron({});
    net.add_synapse({a, b, 3, SynapseSign::excitatory});
    net.add_synapse({a, b, 7, SynapseSign::excitatory});
    net.inject_spike(0, a);
    auto fired = net.run_until(50);
    std::vector<TimeTick> b_times;
    for (auto& e : fired)
        if (e.neuron == b) b_times.push_back(e.time);
    CHECK(b_times == std::vector<TimeTick>{3, 7});
}

TEST_CASE("inject_spikes rejects the past, accepts the present") {
    Network net;
    NeuronId a = net.add_neuron({});
    NeuronId b = net.add_neuron({});
    net.run_until(10);
    SpikeEvent past{9, a, 0};
    CHECK_THROWS_AS(net.inject_spikes(std::span<const SpikeEvent>(&past, 1)), ConfigError);
    std::vector<SpikeEvent> now = {{10, a, 0}, {10, b, 0}};
    net.inject_spikes(now);
    auto fired = net.run_until(10);
    REQUIRE(fired.size() == 2);
    CHECK(fired[0].neuron == a);
    CHECK(fired[1].neuron == b);
    CHECK(fired[0].time == 10);
}

TEST_CASE("coincidence threshold semantics") {
    auto build = [](std::vector<TimeTick> arrivals, std::uint32_t theta, TimeTick window,
                    TimeTick rho) {
        Network net;
        NeuronId src = net.add_neuron({});
        NeuronSpec det;
        det.threshold = theta;
        det.window = window;
        det.refractory = rho;
        NeuronId d = net.add_neuron(det);
        // Distinct delays so one source spike can produce arbitrary arrivals.
        for (TimeTick t : arrivals) net.add_synapse({src, d, t, SynapseSign::excitatory});
        net.inject_spike(0, src);
        auto fired = net.run_until(1000);
        std::vector<TimeTick> times;
        for (auto& e : fired)
            if (e.neuron == d) times.push_back(e.time);
        return times;
    };

    SECTION("theta=2 window=3, arrivals at 10 and 11 fire at 11") {
        CHECK(build({10, 11}, 2, 3, 1) == std::vector<TimeTick>{11});
    }
    SECTION("theta=2 window=3, arrivals at 10 and 20 never fire") {
        CHECK(build({10, 20}, 2, 3, 1).empty());
    }
    SECTION("theta=1 rho=5, arrivals at 10 and 12 fire only at 10") {
        CHECK(build({10, 12}, 1, 0, 5) == std::vector<TimeTick>{10});
    }
}

TEST_CASE("inhibition vetoes firing for the hold duration") {
    Network net;
    NeuronId exc = net.add_neuron({});
    NeuronId inh = net.add_neuron({});
    NeuronSpec tgt_spec;
    tgt_spec.threshold = 1;
    tgt_spec.inhibit_hold = 10;
    NeuronId tgt = net.add_neuron(tgt_spec);
    net.add_synapse({inh, tgt, 1, SynapseSign::inhibitory});
    for (TimeTick d = 1; d <= 15; ++d) net.add_synapse({exc, tgt, d, SynapseSign::excitatory});
    net.inject_spike(0, inh); // inhibitory arrival at t=1, veto through t=11
    net.inject_spike(0, exc); // excitatory arrivals at t=1..15
    auto fired = net.run_until(100);
    std::vector<TimeTick> times;
    for (auto& e : fired)
        if (e.neuron == tgt) times.push_back(e.time);
    REQUIRE(!times.empty());
    CHECK(times.front() == 12);
}

TEST_CASE("inhibitory and excitatory arrival on the same tick: veto wins") {
    Network net;
    NeuronId exc = net.add_neuron({});
    NeuronId inh = net.add_neuron({});
    NeuronSpec tgt_spec;
    tgt_spec.inhibit_hold = 0; // even zero hold vetoes its own tick
    NeuronId tgt = net.add_neuron(tgt_spec);
    net.add_synapse({exc, tgt, 4, SynapseSign::excitatory});
    net.add_synapse({inh, tgt, 4, SynapseSign::inhibitory});
    net.inject_spike(0, exc);
    net.inject_spike(0, inh);
    auto fired = net.run_until(50);
    for (auto& e : fired) CHECK(e.neuron != tgt);
}

TEST_CASE("forced injections respect refractoriness") {
    Network net;
    NeuronSpec spec;
    spec.refractory = 5;
    NeuronId a = net.add_neuron(spec);
    net.inject_spike(10, a);
    net.inject_spike(12, a);
    net.inject_spike(16, a);
    auto fired = net.run_until(100);
    std::vector<TimeTick> times;
    for (auto& e : fired) times.push_back(e.time);
    CHECK(times == std::vector<TimeTick>{10, 16});
}

namespace {

struct RandomNet {
    std::vector<NeuronSpec> neurons;
    std::vector<SynapseSpec> synapses;
    std::vector<SpikeEvent> inputs;
};

RandomNet make_random_net(std::uint64_t seed) {
    Rng rng(seed);
    RandomNet r;
    const int n = static_cast<int>(rng.next_int(3, 12));
    for (int i = 0; i < n; ++i) {
        NeuronSpec s;
        s.id = static_cast<NeuronId>(i);
        s.threshold = static_cast<std::uint32_t>(rng.next_int(1, 3));
        s.window = rng.next_int(0, 6);
        s.refractory = rng.next_int(1, 8);
        s.inhibit_hold = rng.next_int(0, 6);
        r.neurons.push_back(s);
    }
    const int m = static_cast<int>(rng.next_int(n, 4 * n));
    for (int i = 0; i < m; ++i) {
        SynapseSpec s;
        s.pre = static_cast<NeuronId>(rng.next_int(0, n - 1));
        s.post = static_cast<NeuronId>(rng.next_int(0, n - 1));
        s.delay = rng.next_int(1, 12);
        s.sign = rng.bernoulli(0.2) ? SynapseSign::inhibitory : SynapseSign::excitatory;
        r.synapses.push_back(s);
    }
    const int k = static_cast<int>(rng.next_int(2, 10));
    for (int i = 0; i < k; ++i)
        r.inputs.push_back({rng.next_int(0, 30), static_cast<NeuronId>(rng.next_int(0, n - 1)), 0});
    return r;
}

std::vector<SpikeEvent> run_net(const RandomNet& r, std::span<const std::size_t> synapse_order) {
    Network net;
    for (const auto& s : r.neurons) net.add_neuron(s);
    for (std::size_t i : synapse_order) net.add_synapse(r.synapses[i]);
    net.inject_spikes(r.inputs);
    return net.run_until(400);
}

} // namespace

TEST_CASE("property: refractoriness and determinism over random networks") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        RandomNet r = make_random_net(derive_seed(99, "random-net", seed));
        std::vector<std::size_t> order(r.synapses.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto trace = run_net(r, order);

        // successive firings of one neuron differ by more than rho
        std::map<NeuronId, TimeTick> last;
        for (const auto& e : trace) {
            auto it = last.find(e.neuron);
            if (it != last.end())
                REQUIRE(e.time - it->second > r.neurons[e.neuron].refractory);
            last[e.neuron] = e.time;
        }

        // causality: nothing happens before the earliest injection
        TimeTick first_input = 1000;
        for (auto& e : r.inputs) first_input = std::min(first_input, e.time);
        for (auto& e : trace) REQUIRE(e.time >= first_input);

        // identical trace regardless of synapse insertion order
        Rng shuffle_rng(derive_seed(99, "shuffle", seed));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        auto trace2 = run_net(r, order);
        REQUIRE(trace == trace2);
    }
}

TEST_CASE("empty network yields empty trace") {
    Network net;
    CHECK(net.run_until(1000).empty());
}

TEST_CASE("trace CSV format") {
    Network net;
    NeuronId a = net.add_neuron({});
    net.inject_spike(3, a);
    net.run_until(10);
    std::ostringstream os;
    net.write_trace_csv(os);
    CHECK(os.str() == "time_tick,neuron_id\n3,0\n");
}
