#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

#include "spikegram/grammar.hpp"

namespace spikegram {

/// Copying-error channel for rule inheritance. Rates apply independently:
/// each symbol field substitutes with mu_sub, each rule deletes/duplicates
/// with mu_del/mu_dup, each probability jitters by up to mu_p, and (in
/// template-level mode) each stored spike offset jitters with mu_spike.
struct ErrorModel {
    double mu_sub = 0.0;
    double mu_del = 0.0;
    double mu_dup = 0.0;
    double mu_p = 0.0;
    double mu_spike = 0.0;
    TimeTick spike_jitter_max = 2;

    void validate() const {
        for (double p : {mu_sub, mu_del, mu_dup, mu_spike})
            if (p < 0.0 || p > 1.0) throw ConfigError("error model rates must be in [0,1]");
        if (mu_p < 0.0) throw ConfigError("mu_p must be >= 0");
        if (spike_jitter_max < 0) throw ConfigError("spike_jitter_max must be >= 0");
    }
};

/// One heritable rule set, with optional evolved templates.
struct Genome {
    std::uint64_t id = 0;
    std::optional<std::uint64_t> parent;
    RuleSet rules;
    std::optional<Alphabet> templates; // template-level evolution mode
    double fitness = 0.0;
};

struct MutationContext {
    int alphabet_size = 0;
    std::vector<SymbolId> reserved; // excluded as substitution targets
    int max_rules = 16;
};

/// Copy a genome through the error channel. Draw order is fixed (per rule:
/// condition, context, action symbols, probability; then deletions, then
/// duplications, then template offsets) so a given rng state always yields
/// the same child.
inline Genome copy_with_mutation(const Genome& parent, const ErrorModel& em,
                                 const MutationContext& ctx, Rng& rng, std::uint64_t child_id) {
    em.validate();
    Genome child;
    child.id = child_id;
    child.parent = parent.id;
    child.rules = parent.rules;
    child.templates = parent.templates;

    auto substitute = [&](SymbolId current) -> SymbolId {
        // uniform over the alphabet excluding reserved ids and the current
        // value, so a substitution always changes the symbol
        std::vector<SymbolId> pool;
        pool.reserve(static_cast<std::size_t>(ctx.alphabet_size));
        for (SymbolId s = 0; s < ctx.alphabet_size; ++s)
            if (s != current && !std::binary_search(ctx.reserved.begin(), ctx.reserved.end(), s))
                pool.push_back(s);
        if (pool.empty()) return current;
        return pool[rng.next_below(pool.size())];
    };

    for (auto& rule : child.rules.rules) {
        if (em.mu_sub > 0 && rng.bernoulli(em.mu_sub)) rule.condition = substitute(rule.condition);
        if (rule.context && em.mu_sub > 0 && rng.bernoulli(em.mu_sub))
            rule.context->symbol = substitute(rule.context->symbol);
        for (auto& s : rule.action)
            if (em.mu_sub > 0 && rng.bernoulli(em.mu_sub)) s = substitute(s);
        if (em.mu_p > 0) {
            rule.probability += rng.next_unit() * 2.0 * em.mu_p - em.mu_p;
            rule.probability = std::clamp(rule.probability, 0.01, 1.0);
        }
    }

    if (em.mu_del > 0 && !child.rules.rules.empty()) {
        std::vector<AbstractRule> kept;
        for (const auto& r : child.rules.rules)
            if (!rng.bernoulli(em.mu_del)) kept.push_back(r);
        if (kept.empty()) kept.push_back(child.rules.rules.front()); // floor of one rule
        child.rules.rules = std::move(kept);
    }

    if (em.mu_dup > 0) {
        std::vector<AbstractRule> grown;
        for (const auto& r : child.rules.rules) {
            grown.push_back(r);
            if (static_cast<int>(grown.size()) < ctx.max_rules && rng.bernoulli(em.mu_dup))
                grown.push_back(r);
        }
        child.rules.rules = std::move(grown);
    }

    if (child.templates && em.mu_spike > 0 && em.spike_jitter_max > 0) {
        Alphabet& ab = *child.templates;
        for (auto& t : ab.templates)
            for (auto& off : t.offsets)
                if (rng.bernoulli(em.mu_spike)) {
                    TimeTick mag = rng.next_int(1, em.spike_jitter_max);
                    off += rng.bernoulli(0.5) ? mag : -mag;
                    off = std::clamp<TimeTick>(off, 0, ab.D - 1);
                }
    }
    return child;
}

/// Language fitness: generative validity minus a parsimony penalty per rule.
inline double fitness_language(const Genome& g, const LanguageSpec& spec, int n_samples,
                               double parsimony, std::uint64_t seed, int capacity,
                               int max_steps = 64) {
    return generation_validity(g.rules, spec, n_samples, seed, capacity, max_steps) -
           parsimony * static_cast<double>(g.rules.rules.size());
}

/// Per-parent bookkeeping for one generation transition. w is the realized
/// offspring count, z the parent's trait, z_prime the mean offspring trait
/// (defined as z for the childless, where the w weight zeroes the term).
struct IndividualRecord {
    std::uint64_t id = 0;
    std::optional<std::uint64_t> parent;
    double w = 0.0;
    double z = 0.0;
    double z_prime = 0.0;
};

struct GenerationRecord {
    std::vector<IndividualRecord> rows;
};

struct PriceTerms {
    double dz = 0.0;           // offspring-weighted trait change
    double selection = 0.0;    // cov(w, z) / mean(w)
    double transmission = 0.0; // E[w (z' - z)] / mean(w)
};

/// Exact Price decomposition: dz == selection + transmission up to
/// floating-point rounding, for any record with mean fitness > 0.
inline PriceTerms price_terms(const GenerationRecord& rec) {
    const std::size_t n = rec.rows.size();
    if (n == 0) throw ConfigError("price_terms: empty record");
    double w_sum = 0.0, z_sum = 0.0;
    for (const auto& r : rec.rows) {
        w_sum += r.w;
        z_sum += r.z;
    }
    const double w_bar = w_sum / static_cast<double>(n);
    if (w_bar <= 0.0) throw ConfigError("price_terms: mean fitness must be > 0");
    const double z_bar = z_sum / static_cast<double>(n);
    double cov = 0.0, trans = 0.0, wz_prime = 0.0;
    for (const auto& r : rec.rows) {
        cov += (r.w - w_bar) * (r.z - z_bar);
        trans += r.w * (r.z_prime - r.z);
        wz_prime += r.w * r.z_prime;
    }
    cov /= static_cast<double>(n);
    trans /= static_cast<double>(n);
    PriceTerms out;
    out.selection = cov / w_bar;
    out.transmission = trans / w_bar;
    out.dz = wz_prime / w_sum - z_bar;
    return out;
}

/// The tracked trait for evolution bookkeeping: rule count.
inline double genome_trait(const Genome& g) {
    return static_cast<double>(g.rules.rules.size());
}

using FitnessFn = std::function<double(const Genome&, std::uint64_t seed)>;

/// Evaluate fitness for every genome from per-genome sub-streams derived
/// from (master seed, generation, index); order-independent by design.
inline void evaluate_population(std::vector<Genome>& pop, const FitnessFn& fn,
                                std::uint64_t master_seed, int generation) {
    for (std::size_t i = 0; i < pop.size(); ++i)
        pop[i].fitness = fn(pop[i], derive_seed(master_seed, "fitness",
                                                (static_cast<std::uint64_t>(generation) << 32) |
                                                    static_cast<std::uint64_t>(i)));
}

struct SelectionConfig {
    int tournament_k = 3;
    int elite = 1;
};

/// One generation: elites copied verbatim, the rest tournament-selected and
/// passed through the error channel. Returns the new population and the
/// Price bookkeeping for the transition.
inline std::pair<std::vector<Genome>, GenerationRecord> step_generation(
    const std::vector<Genome>& pop, const SelectionConfig& sel, const ErrorModel& em,
    const MutationContext& ctx, Rng& rng, std::uint64_t& next_id) {
    if (pop.empty()) throw ConfigError("step_generation: empty population");
    if (sel.elite < 0 || sel.elite >= static_cast<int>(pop.size()))
        throw ConfigError("elite count must be in [0, pop size)");
    if (sel.tournament_k < 1) throw ConfigError("tournament size must be >= 1");

    // rank by fitness, ties broken by id for determinism
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pop[a].fitness != pop[b].fitness) return pop[a].fitness > pop[b].fitness;
        return pop[a].id < pop[b].id;
    });

    std::vector<Genome> next;
    next.reserve(pop.size());
    std::vector<int> offspring_count(pop.size(), 0);
    std::vector<double> offspring_trait_sum(pop.size(), 0.0);

    for (int e = 0; e < sel.elite; ++e) {
        const std::size_t src = order[static_cast<std::size_t>(e)];
        Genome copy = pop[src];
        copy.id = next_id++;
        copy.parent = pop[src].id;
        next.push_back(copy);
        ++offspring_count[src];
        offspring_trait_sum[src] += genome_trait(copy);
    }
    while (next.size() < pop.size()) {
        std::size_t best = rng.next_below(pop.size());
        for (int t = 1; t < sel.tournament_k; ++t) {
            std::size_t challenger = rng.next_below(pop.size());
            if (pop[challenger].fitness > pop[best].fitness ||
                (pop[challenger].fitness == pop[best].fitness &&
                 pop[challenger].id < pop[best].id))
                best = challenger;
        }
        Genome child = copy_with_mutation(pop[best], em, ctx, rng, next_id++);
        ++offspring_count[best];
        offspring_trait_sum[best] += genome_trait(child);
        next.push_back(std::move(child));
    }

    GenerationRecord rec;
    rec.rows.reserve(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        IndividualRecord row;
        row.id = pop[i].id;
        row.parent = pop[i].parent;
        row.w = static_cast<double>(offspring_count[i]);
        row.z = genome_trait(pop[i]);
        row.z_prime = offspring_count[i] > 0
                          ? offspring_trait_sum[i] / static_cast<double>(offspring_count[i])
                          : row.z;
        rec.rows.push_back(row);
    }
    return {std::move(next), std::move(rec)};
}

/// Analytic single-peak quasispecies threshold: the master survives while
/// sigma * (1 - mu)^L > 1, i.e. mu below 1 - sigma^(-1/L).
inline double quasispecies_threshold(int L, double sigma) {
    if (sigma <= 1.0) throw ConfigError("quasispecies threshold requires sigma > 1");
    if (L < 1) throw ConfigError("quasispecies threshold requires L >= 1");
    return 1.0 - std::pow(sigma, -1.0 / static_cast<double>(L));
}

struct QuasispeciesConfig {
    int L = 10;
    double sigma = 10.0;
    double mu = 0.1;
    int pop_size = 1000;
    int generations = 500;

    void validate() const {
        if (sigma <= 1.0) throw ConfigError("quasispecies sigma must be > 1");
        if (mu < 0.0 || mu > 1.0) throw ConfigError("quasispecies mu must be in [0,1]");
        if (L < 1 || L > 32) throw ConfigError("quasispecies L must be in [1,32]");
        if (pop_size < 1) throw ConfigError("quasispecies pop_size must be >= 1");
        if (generations < 0) throw ConfigError("quasispecies generations must be >= 0");
    }
};

/// Wright-Fisher resampling of binary sequences with per-symbol copy error.
/// Fitness sigma for the exact master (all-zero) sequence, 1 otherwise.
/// Returns the master frequency after each generation, starting from a
/// master-fixated population.
inline std::vector<double> quasispecies_run(const QuasispeciesConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::uint32_t mask =
        cfg.L == 32 ? ~std::uint32_t{0} : ((std::uint32_t{1} << cfg.L) - 1);
    std::vector<std::uint32_t> pop(static_cast<std::size_t>(cfg.pop_size), 0u);
    std::vector<std::uint32_t> next(pop.size());
    std::vector<double> cumulative(pop.size());
    std::vector<double> trajectory;
    trajectory.reserve(static_cast<std::size_t>(cfg.generations) + 1);
    auto master_freq = [&] {
        std::size_t m = 0;
        for (auto g : pop)
            if (g == 0u) ++m;
        return static_cast<double>(m) / static_cast<double>(pop.size());
    };
    trajectory.push_back(master_freq());
    for (int gen = 0; gen < cfg.generations; ++gen) {
        double acc = 0.0;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            acc += pop[i] == 0u ? cfg.sigma : 1.0;
            cumulative[i] = acc;
        }
        for (std::size_t i = 0; i < pop.size(); ++i) {
            const double x = rng.next_unit() * acc;
            const std::size_t parent = static_cast<std::size_t>(
                std::lower_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin());
            std::uint32_t child = pop[std::min(parent, pop.size() - 1)];
            for (int bit = 0; bit < cfg.L; ++bit)
                if (rng.bernoulli(cfg.mu)) child ^= (std::uint32_t{1} << bit);
            next[i] = child & mask;
        }
        pop.swap(next);
        trajectory.push_back(master_freq());
    }
    return trajectory;
}

/// Per-generation summary row for the evolution history CSV.
struct HistoryRow {
    int generation = 0;
    double best = 0.0;
    double mean = 0.0;
    double rule_count_mean = 0.0;
    double price_cov = 0.0;
    double price_trans = 0.0;
};

inline void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows) {
    os << "gen,best,mean,rule_count_mean,price_cov,price_trans\n";
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.generation,
                      r.best, r.mean, r.rule_count_mean, r.price_cov, r.price_trans);
        os << buf;
    }
}

} // namespace spikegram
