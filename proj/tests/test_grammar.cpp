#include <catch2/catch_amalgamated.hpp>

#include "spikegram/grammar.hpp"

using namespace spikegram;

namespace {

// Symbols: 0=S, 1=a, 2=b
RuleSet anbn_rules() {
    RuleSet rs;
    rs.start = 0;
    rs.terminals = {1, 2};
    AbstractRule grow;
    grow.condition = 0;
    grow.action = {1, 0, 2};
    grow.probability = 0.5;
    AbstractRule stop;
    stop.condition = 0;
    stop.action = {1, 2};
    stop.probability = 0.5;
    rs.rules = {grow, stop};
    return rs;
}

LanguageSpec anbn_spec(int max_n = 0) {
    LanguageSpec spec;
    spec.kind = LanguageKind::a_n_b_n;
    spec.a = 1;
    spec.b = 2;
    spec.max_n = max_n;
    return spec;
}

} // namespace

TEST_CASE("derive examples") {
    SECTION("single rule derives in one step") {
        RuleSet rs;
        rs.start = 0;
        rs.terminals = {1, 2};
        AbstractRule r;
        r.condition = 0;
        r.action = {1, 2};
        rs.rules = {r};
        RngDecisionStream stream(1);
        auto trace = derive(rs, 8, 10, stream);
        REQUIRE(trace.steps.size() == 1);
        CHECK(trace.final_sentence == Sentence{1, 2});
        CHECK(trace.terminated_by == Termination::all_terminal);
    }
    SECTION("no rules terminates immediately with no_rule") {
        RuleSet rs;
        rs.start = 0;
        rs.terminals = {1};
        RngDecisionStream stream(1);
        auto trace = derive(rs, 8, 10, stream);
        CHECK(trace.steps.empty());
        CHECK(trace.terminated_by == Termination::no_rule);
        CHECK(trace.final_sentence == Sentence{0});
    }
    SECTION("scripted stream forces aaabbb") {
        RuleSet rs = anbn_rules();
        // grow, grow, stop: candidate list always has the two S rules
        ScriptedDecisionStream stream({0, 0, 1});
        auto trace = derive(rs, 8, 10, stream);
        CHECK(trace.final_sentence == Sentence{1, 1, 1, 2, 2, 2}); // a a a b b b
        CHECK(trace.terminated_by == Termination::all_terminal);
        REQUIRE(trace.steps.size() == 3);
        CHECK(trace.steps[0].before == Sentence{0});
        CHECK(trace.steps[0].after == Sentence{1, 0, 2});
    }
    SECTION("max_steps cuts an unbounded derivation") {
        RuleSet rs = anbn_rules();
        rs.rules[0].probability = 1.0;
        rs.rules.pop_back(); // only S -> aSb, never terminates within capacity
        RngDecisionStream stream(3);
        auto trace = derive(rs, 1000, 5, stream);
        CHECK(trace.terminated_by == Termination::max_steps);
        CHECK(trace.steps.size() == 5);
    }
}

TEST_CASE("derivation trace is replayable and exports JSONL") {
    RuleSet rs = anbn_rules();
    RngDecisionStream s1(derive_seed(9, "replay"));
    auto t1 = derive(rs, 8, 32, s1);
    ScriptedDecisionStream s2(s1.log());
    auto t2 = derive(rs, 8, 32, s2);
    CHECK(t1.final_sentence == t2.final_sentence);
    REQUIRE(t1.steps.size() == t2.steps.size());
    for (std::size_t i = 0; i < t1.steps.size(); ++i) {
        CHECK(t1.steps[i].site == t2.steps[i].site);
        CHECK(t1.steps[i].after == t2.steps[i].after);
    }
    auto jsonl = t1.to_jsonl();
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') ==
          static_cast<long>(t1.steps.size()) + 1);
}

TEST_CASE("is_member structural checks") {
    LanguageSpec aba;
    aba.kind = LanguageKind::pattern_aba;
    CHECK(is_member({5, 9, 5}, aba));
    CHECK(!is_member({5, 9, 9}, aba));
    CHECK(!is_member({5, 5, 5}, aba)); // A != B required
    CHECK(!is_member({5, 9}, aba));

    LanguageSpec abb;
    abb.kind = LanguageKind::pattern_abb;
    CHECK(is_member({5, 9, 9}, abb));
    CHECK(!is_member({5, 9, 5}, abb));

    auto anbn = anbn_spec();
    CHECK(is_member({1, 1, 2, 2}, anbn));
    CHECK(!is_member({1, 2, 1, 2}, anbn));
    CHECK(is_member({1, 2}, anbn));
    CHECK(!is_member({}, anbn));
    CHECK(!is_member({1, 1, 2}, anbn));

    auto bounded = anbn_spec(2);
    CHECK(is_member({1, 1, 2, 2}, bounded));
    CHECK(!is_member({1, 1, 1, 2, 2, 2}, bounded));

    LanguageSpec en;
    en.kind = LanguageKind::enumerated_set;
    en.sentences = {{1, 2}};
    CHECK(is_member({1, 2}, en));
    CHECK(!is_member({2, 1}, en));

    LanguageSpec custom;
    custom.kind = LanguageKind::custom;
    custom.custom_id = "even-length";
    custom_languages()["even-length"] = [](const Sentence& s) { return s.size() % 2 == 0; };
    CHECK(is_member({1, 2}, custom));
    CHECK(!is_member({1}, custom));
    custom.custom_id = "missing";
    CHECK_THROWS_AS(is_member({1}, custom), ConfigError);
}

TEST_CASE("enumerate_language") {
    SECTION("single production") {
        RuleSet rs;
        rs.start = 0;
        rs.terminals = {1, 2};
        AbstractRule r;
        r.condition = 0;
        r.action = {1, 2};
        rs.rules = {r};
        auto lang = enumerate_language(rs, 8, 4);
        CHECK(!lang.truncated);
        CHECK(lang.sentences == std::set<Sentence>{{1, 2}});
    }
    SECTION("a^n b^n to depth 3") {
        auto lang = enumerate_language(anbn_rules(), 8, 3);
        CHECK(!lang.truncated);
        std::set<Sentence> expect = {{1, 2}, {1, 1, 2, 2}, {1, 1, 1, 2, 2, 2}};
        CHECK(lang.sentences == expect);
    }
    SECTION("node cap sets the truncation flag") {
        // Explosive grammar: S -> SS | a
        RuleSet rs;
        rs.start = 0;
        rs.terminals = {1};
        AbstractRule dup;
        dup.condition = 0;
        dup.action = {0, 0};
        AbstractRule leaf;
        leaf.condition = 0;
        leaf.action = {1};
        rs.rules = {dup, leaf};
        auto lang = enumerate_language(rs, 8, 8, /*node_cap=*/10);
        CHECK(lang.truncated);
    }
}

TEST_CASE("generation_validity") {
    SECTION("hand-built a^n b^n grammar is perfectly valid") {
        double v = generation_validity(anbn_rules(), anbn_spec(), 500, 42, 8);
        CHECK(v == 1.0);
    }
    SECTION("empty ruleset never produces pattern_ABA") {
        RuleSet rs;
        rs.start = 0;
        rs.terminals = {1, 2};
        LanguageSpec aba;
        aba.kind = LanguageKind::pattern_aba;
        CHECK(generation_validity(rs, aba, 100, 42, 8) == 0.0);
    }
    SECTION("one corrupt rule drags validity below 1") {
        RuleSet rs = anbn_rules();
        AbstractRule bad;
        bad.condition = 0;
        bad.action = {2, 1}; // S -> ba, yields invalid sentences sometimes
        bad.probability = 0.5;
        rs.rules.push_back(bad);
        double v = generation_validity(rs, anbn_spec(), 500, 42, 8);
        CHECK(v < 1.0);
        CHECK(v > 0.0);
    }
}

TEST_CASE("soundness: every derived sentence appears in the enumeration") {
    RuleSet rs = anbn_rules();
    auto lang = enumerate_language(rs, 8, 8);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        RngDecisionStream stream(derive_seed(17, "sound", seed));
        auto trace = derive(rs, 8, 32, stream);
        if (trace.terminated_by == Termination::all_terminal)
            REQUIRE(lang.sentences.count(trace.final_sentence) == 1);
    }
}
