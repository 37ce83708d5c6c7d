#include "aspl/active_query.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <set>

using namespace aspl;

namespace {

// Three clusters on a line, last one unknown to the bank at first.
struct World {
    FeatureStore store;
    ClassifierBank bank;
    LabelState labels;
    WeightMatrix weights;

    World() : bank(1, {"a", "b"}, 0.2), labels(9, 2), weights(9, 2) {
        RowMatrix<double> x(9, 1);
        x << -3, -3.1, -2.9, 0, 0.1, -0.1, 3, 3.1, 2.9;
        store = FeatureStore(x, aspl::test::ids(9), std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2}, {"a", "b", "c"});
        bank.weights << -1, 1;
        bank.biases << -1, -1;
    }
};

class ScriptedOracle final : public Oracle {
public:
    std::vector<OracleAnswer> answer(std::span<const Query> queries, std::span<const std::string>) override {
        std::vector<OracleAnswer> out;
        for (const auto& q : queries) {
            ++asked;
            if (drop.contains(q.sample)) continue;
            out.push_back({q.sample, q.sample_id, reply(q.sample), false});
        }
        return out;
    }
    std::function<OracleLabel(Index)> reply;
    std::set<Index> drop;
    int asked = 0;
};

}  // namespace

TEST_CASE("oracle label text round trip") {
    const std::vector<std::string> cats{"a", "b"};
    CHECK(parse_oracle_label("b", cats) == OracleLabel{KnownCategory{1}});
    CHECK(parse_oracle_label("new:c", cats) == OracleLabel{NewCategory{"c"}});
    CHECK(parse_oracle_label("new:a", cats) == OracleLabel{KnownCategory{0}});
    CHECK(parse_oracle_label("unknown", cats) == OracleLabel{UnknownCategory{}});
    CHECK_THROWS_AS(parse_oracle_label("c", cats), DomainError);
    CHECK_THROWS_AS(parse_oracle_label("new:", cats), DomainError);
    for (const OracleLabel& l : {OracleLabel{KnownCategory{0}}, OracleLabel{NewCategory{"z"}}, OracleLabel{UnknownCategory{}}})
        CHECK(parse_oracle_label(to_string(l, cats), cats) == l);
}

TEST_CASE("simulated oracle answers truth without noise and flips with noise") {
    World w;
    const std::vector<std::string> cats{"a", "b"};
    SimulatedOracle clean(w.store, 1);
    for (Index i = 0; i < 9; ++i) {
        const auto a = clean.label(make_query(w.bank, w.store, i, QueryKind::label), cats);
        REQUIRE(a);
        CHECK(a->category == clean.truth_label(i, cats));
    }
    CHECK(clean.truth_label(6, cats) == OracleLabel{NewCategory{"c"}});

    SimulatedOracle noisy(w.store, 2, 1.0);
    for (Index i = 0; i < 6; ++i)
        CHECK(noisy.label(make_query(w.bank, w.store, i, QueryKind::label), cats)->category !=
              clean.truth_label(i, cats));

    SimulatedOracle half(w.store, 3, 0.5);
    const auto state = half.save_state();
    const auto first = half.label(make_query(w.bank, w.store, 0, QueryKind::label), cats)->category;
    half.load_state(state);
    CHECK(half.label(make_query(w.bank, w.store, 0, QueryKind::label), cats)->category == first);
    CHECK_THROWS_AS(half.load_state("garbage"), DomainError);
}

TEST_CASE("low-confidence selection prefers ambiguous samples") {
    World w;
    // Samples 3..5 score positive for both a and b.
    w.bank.biases << 0.5, 0.5;
    const auto picked = select_low_confidence(w.bank, w.store, w.labels, 3);
    CHECK(std::set<Index>(picked.begin(), picked.end()) == std::set<Index>{3, 4, 5});
    CHECK(picked.front() == 3);  // smallest gap between the two top scores
    CHECK(select_low_confidence(w.bank, w.store, w.labels, 0).empty());

    w.labels.assign(3, Index(1), Provenance::annotated);
    const auto refill = select_low_confidence(w.bank, w.store, w.labels, 4);
    CHECK(refill.size() == 4);
    CHECK(std::find(refill.begin(), refill.end(), 3) == refill.end());
}

TEST_CASE("uncertainty and random baselines skip annotated samples") {
    World w;
    w.labels.assign(4, Index(1), Provenance::annotated);
    const auto u = select_least_confident(w.bank, w.store, w.labels, 3);
    CHECK(u.size() == 3);
    CHECK(std::find(u.begin(), u.end(), 4) == u.end());
    std::mt19937_64 rng(1);
    const auto r = select_random(w.labels, 20, rng);
    CHECK(r.size() == 8);
    CHECK(std::set<Index>(r.begin(), r.end()).size() == 8);
}

TEST_CASE("annotate batch pins answered rows and defers new classes") {
    World w;
    SimulatedOracle oracle(w.store, 1);
    const auto out = annotate_batch({0, 3, 6}, oracle, w.bank, w.store, w.labels, w.weights, PinScope::row);
    CHECK(out.requested == 3);
    CHECK(out.answered == 3);
    CHECK(out.annotated == std::vector<Index>{0, 3});
    REQUIRE(out.new_class_requests.size() == 1);
    CHECK(out.new_class_requests[0].name == "c");
    CHECK(w.labels.positive_category(0) == Index(0));
    CHECK(w.weights.is_pinned(3));
    CHECK(w.weights.v.row(3).isOnes());
    CHECK_FALSE(w.labels.is_assigned(6));

    CHECK_THROWS_AS(annotate_batch({1, 1}, oracle, w.bank, w.store, w.labels, w.weights, PinScope::row), DomainError);
    CHECK_THROWS_AS(annotate_batch({0}, oracle, w.bank, w.store, w.labels, w.weights, PinScope::row), DomainError);
    CHECK(annotate_batch({}, oracle, w.bank, w.store, w.labels, w.weights, PinScope::row).requested == 0);
}

TEST_CASE("unanswered queries leave samples unannotated") {
    World w;
    ScriptedOracle oracle;
    oracle.reply = [](Index) { return OracleLabel{KnownCategory{0}}; };
    oracle.drop = {1};
    const auto out = annotate_batch({0, 1}, oracle, w.bank, w.store, w.labels, w.weights, PinScope::row);
    CHECK(out.answered == 1);
    CHECK_FALSE(w.labels.is_annotated(1));
}

TEST_CASE("verification rewrites only corrected rows") {
    World w;
    w.labels.assign(0, Index(1), Provenance::annotated);  // wrong: truth is a
    w.labels.assign(3, Index(1), Provenance::annotated);
    w.weights.pinned[0] = w.weights.pinned[3] = true;
    SimulatedOracle oracle(w.store, 1);
    const auto before = w.labels;
    const auto none = verify_annotations(w.bank, w.store, w.labels, w.weights, oracle, 0, PinScope::row);
    CHECK(none.queried == 0);
    const auto report = verify_annotations(w.bank, w.store, w.labels, w.weights, oracle, 5, PinScope::row);
    CHECK(report.queried == 2);
    REQUIRE(report.corrections.size() == 1);
    CHECK(report.corrections[0] == Correction{0, Index(1), "a"});
    CHECK(w.labels.positive_category(0) == Index(0));
    CHECK(w.labels.positive_category(3) == before.positive_category(3));

    // A second pass with a truthful oracle has nothing to fix.
    const auto again = w.labels;
    verify_annotations(w.bank, w.store, w.labels, w.weights, oracle, 5, PinScope::row);
    CHECK(w.labels == again);
}

TEST_CASE("new class is created from a seed and its neighbours") {
    World w;
    EngineConfig config;
    config.neighbors = 2;
    for (Index i : {6, 7, 8, 4}) w.labels.assign(i, std::nullopt, Provenance::pseudo);  // part of U
    SimulatedOracle oracle(w.store, 1);
    const auto before = w.bank.weights.topRows(2).eval();
    const auto report =
        handle_new_classes({{6, "c"}}, w.store, w.labels, w.weights, w.bank, oracle, config);
    CHECK(report.created == std::vector<std::string>{"c"});
    CHECK(report.queries == 2);
    REQUIRE(w.bank.find("c"));
    const Index c = *w.bank.find("c");
    CHECK(w.bank.pace(c) == config.lambda0);
    CHECK(w.bank.weights.topRows(2) == before);
    CHECK(w.labels.annotated_set(c) == std::vector<Index>{6, 7, 8});
    CHECK(w.bank.scores(w.store.features())(7, c) > 0);
    w.labels.audit();
}
