#include "aspl/core.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>

using namespace aspl;
using aspl::test::store_from;

namespace {

// Independent term-by-term re-summation of the joint objective.
double resum(const ClassifierBank& bank, const FeatureStore& store, const LabelState& labels, const WeightMatrix& w,
             double C) {
    double total = 0;
    for (Index j = 0; j < bank.num_categories(); ++j) {
        total += 0.5 * bank.weights.row(j).squaredNorm();
        for (Index i = 0; i < store.size(); ++i) {
            if (!labels.is_assigned(i)) continue;
            double s = bank.biases(j);
            for (Index c = 0; c < store.dim(); ++c) s += bank.weights(j, c) * store.features()(i, c);
            const double margin = 1 - labels.label(i, j) * s;
            const double v = w.v(i, j);
            total += C * v * (margin > 0 ? margin : 0) + bank.pace(j) * (0.5 * v * v - v);
        }
    }
    return total;
}

}  // namespace

TEST_CASE("decision value examples") {
    RowMatrix<double> x(2, 2);
    x << 0.5, 9.9, 1, 1;
    const auto store = store_from(x);
    ClassifierBank bank(2, {"a", "b"}, 0.2);
    CHECK(decision_value(bank, store, 0, 0) == 0.0);
    bank.weights.row(0) << 1, 0;
    bank.weights.row(1) << 2, -1;
    bank.biases(1) = 0.3;
    CHECK(decision_value(bank, store, 0, 0) == doctest::Approx(0.5));
    CHECK(decision_value(bank, store, 1, 1) == doctest::Approx(1.3));
    CHECK_THROWS_AS(decision_value(bank, store, 2, 0), DomainError);
    CHECK_THROWS_AS(decision_value(bank, store, 0, 2), DomainError);
    CHECK_THROWS_AS(decision_value(bank, store, -1, 0), DomainError);
}

TEST_CASE("hinge loss examples and properties") {
    CHECK(hinge_loss(0.5, 1) == doctest::Approx(0.5));
    CHECK(hinge_loss(2.0, 1) == 0.0);
    CHECK(hinge_loss(0.5, -1) == doctest::Approx(1.5));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> s(-5, 5);
    for (int k = 0; k < 1000; ++k) {
        const double a = s(rng), b = s(rng);
        for (int y : {-1, 1}) {
            CHECK(hinge_loss(a, y) >= 0);
            CHECK(std::abs(hinge_loss(a, y) - hinge_loss(b, y)) <= std::abs(a - b) + 1e-15);
        }
    }
}

TEST_CASE("objective examples") {
    RowMatrix<double> x(1, 1);
    x << 3.0;
    const auto store = store_from(x);
    ClassifierBank bank(1, {"a"}, 0.2);
    LabelState labels(1, 1);
    WeightMatrix w(1, 1);
    EngineConfig config;

    SUBCASE("zero weights") {
        labels.assign(0, Index(0), Provenance::annotated);
        CHECK(aspl_objective(bank, store, labels, w, config) == 0.0);
    }
    SUBCASE("single sample by hand") {
        labels.assign(0, Index(0), Provenance::annotated);
        w.v(0, 0) = 1;
        CHECK(aspl_objective(bank, store, labels, w, config) == doctest::Approx(0.9).epsilon(1e-15));
    }
    SUBCASE("unassigned rows contribute nothing") {
        w.v(0, 0) = 1;
        CHECK(aspl_objective(bank, store, labels, w, config) == 0.0);
    }
    SUBCASE("mismatched dimensions") {
        WeightMatrix bad(2, 1);
        CHECK_THROWS_AS(aspl_objective(bank, store, labels, bad, config), DomainError);
    }
}

TEST_CASE("objective matches re-summation and is permutation invariant") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 30, d = 4, m = 3;
        const auto x = aspl::test::gaussian(n, d, rng);
        const auto store = store_from(x);
        ClassifierBank bank(d, {"a", "b", "c"}, 0.2);
        bank.weights = aspl::test::gaussian(m, d, rng);
        for (Index j = 0; j < m; ++j) bank.biases(j) = unit(rng) - 0.5, bank.pace(j) = 0.1 + unit(rng);
        LabelState labels(n, m);
        WeightMatrix w(n, m);
        for (Index i = 0; i < n; ++i) {
            const double u = unit(rng);
            if (u < 0.3) continue;
            const std::optional<Index> cat = u < 0.4 ? std::nullopt : std::optional<Index>(i % m);
            labels.assign(i, cat, u < 0.7 ? Provenance::annotated : Provenance::pseudo);
            for (Index j = 0; j < m; ++j) w.v(i, j) = unit(rng);
        }
        EngineConfig config;
        config.C = 0.5 + unit(rng);
        const double got = aspl_objective(bank, store, labels, w, config);
        CHECK(got == doctest::Approx(resum(bank, store, labels, w, config.C)).epsilon(1e-12));

        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index(0));
        std::shuffle(perm.begin(), perm.end(), rng);
        LabelState pl(n, m);
        WeightMatrix pw(n, m);
        for (Index k = 0; k < n; ++k) {
            const Index i = perm[static_cast<std::size_t>(k)];
            if (labels.is_assigned(i)) pl.assign(k, labels.positive_category(i), labels.provenance(i));
            pw.v.row(k) = w.v.row(i);
        }
        CHECK(aspl_objective(bank, store.subset(perm), pl, pw, config) == doctest::Approx(got).epsilon(1e-12));
    }
}

TEST_CASE("feature store validation") {
    RowMatrix<double> x(2, 3);
    x << 1, 2, 3, 4, std::numeric_limits<double>::quiet_NaN(), 6;
    try {
        store_from(x);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("row 1, column 1") != std::string::npos);
    }
    RowMatrix<double> ok(2, 1);
    ok << 1, 2;
    CHECK_THROWS_AS(FeatureStore(ok, {"only-one"}), DomainError);
    CHECK_THROWS_AS(FeatureStore(ok, {"a", "b"}, std::vector<int>{0, 3}, {"x"}), DomainError);
    const FeatureStore s(ok, {"a", "b"}, std::vector<int>{0, kUnknownCategory}, {"x"});
    CHECK(s.truth_name(0) == "x");
    CHECK_FALSE(s.truth_name(1).has_value());
    CHECK(s.subset({1, 0}).sample_id(0) == "b");
    CHECK_THROWS_AS(FeatureStore(ok, {"a", "b"}).truth(), DomainError);
}

TEST_CASE("label state keeps at most one positive") {
    LabelState labels(3, 3);
    labels.assign(0, Index(1), Provenance::annotated);
    labels.assign(1, std::nullopt, Provenance::pseudo);
    CHECK(labels.positive_category(0) == Index(1));
    CHECK(labels.unknown_set() == std::vector<Index>{1});
    CHECK(labels.annotated_set(1) == std::vector<Index>{0});
    CHECK(labels.unannotated() == std::vector<Index>{1, 2});
    labels.audit();

    Eigen::VectorXi two(3);
    two << 1, 1, -1;
    CHECK_THROWS_AS(labels.assign_row(2, two, Provenance::pseudo), DomainError);
    Eigen::VectorXi zero(3);
    zero << 1, 0, -1;
    CHECK_THROWS_AS(labels.assign_row(2, zero, Provenance::pseudo), DomainError);
    CHECK_THROWS_AS(labels.assign(2, Index(3), Provenance::pseudo), DomainError);
    CHECK_THROWS_AS(labels.assign(2, Index(0), Provenance::none), DomainError);
    CHECK_THROWS_AS(labels.assign(5, Index(0), Provenance::pseudo), DomainError);

    const Index j = labels.add_category();
    CHECK(j == 3);
    CHECK(labels.label(0, 3) == -1);
    CHECK(labels.label(2, 3) == 0);
    labels.clear(0);
    CHECK_FALSE(labels.is_assigned(0));
    labels.audit();
}

TEST_CASE("classifier bank grows with a zero hyperplane at lambda0") {
    ClassifierBank bank(2, {"a"}, 0.2);
    bank.weights.row(0) << 1, 2;
    bank.pace(0) = 0.7;
    CHECK(bank.add_category("b", 0.2) == 1);
    CHECK(bank.weights.row(1).isZero());
    CHECK(bank.pace(1) == 0.2);
    CHECK(bank.pace(0) == 0.7);
    CHECK(bank.find("b") == Index(1));
    CHECK_FALSE(bank.find("c").has_value());
}

TEST_CASE("engine config validation") {
    EngineConfig c;
    c.validate();
    for (auto mutate : std::initializer_list<void (*)(EngineConfig&)>{
             [](EngineConfig& x) { x.C = 0; }, [](EngineConfig& x) { x.lambda0 = -1; },
             [](EngineConfig& x) { x.tau = 0; }, [](EngineConfig& x) { x.batch_size = -1; },
             [](EngineConfig& x) { x.solver_tol = 0; }, [](EngineConfig& x) { x.max_iters = 0; },
             [](EngineConfig& x) { x.pseudo_cap = -2; }}) {
        EngineConfig bad;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), DomainError);
    }
}
