#include "aspl/experiment.hpp"
#include "aspl/io_service.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

using namespace aspl;

TEST_CASE("synthetic generator is deterministic and shaped as asked") {
    SyntheticSpec s;
    s.clusters = 3;
    s.per_cluster = 7;
    s.dim = 5;
    s.seed = 4;
    const auto a = generate_synthetic(s);
    const auto b = generate_synthetic(s);
    CHECK(a.size() == 21);
    CHECK(a.dim() == 5);
    CHECK(a.features() == b.features());
    CHECK(a.category_names() == std::vector<std::string>{"c0", "c1", "c2"});
    std::map<int, int> counts;
    for (int t : a.truth()) ++counts[t];
    CHECK(counts == std::map<int, int>{{0, 7}, {1, 7}, {2, 7}});
    s.seed = 5;
    CHECK(generate_synthetic(s).features() != a.features());
    s.spread = -1;
    CHECK_THROWS_AS(generate_synthetic(s), DomainError);
}

TEST_CASE("zero spread collapses every class onto its center") {
    SyntheticSpec s;
    s.clusters = 3;
    s.per_cluster = 5;
    s.spread = 0;
    const auto a = generate_synthetic(s);
    for (Index i = 0; i < a.size(); ++i) CHECK(a.row(i) == a.row((i / 5) * 5));
}

TEST_CASE("stratified split keeps class proportions") {
    SyntheticSpec s;
    s.clusters = 4;
    s.per_cluster = 10;
    const auto data = generate_synthetic(s);
    const auto split = stratified_split(data, 0.8, 3);
    CHECK(split.train.size() == 32);
    CHECK(split.test.size() == 8);
    std::map<int, int> train, test;
    for (int t : split.train.truth()) ++train[t];
    for (int t : split.test.truth()) ++test[t];
    for (int k = 0; k < 4; ++k) {
        CHECK(train[k] == 8);
        CHECK(test[k] == 2);
    }
    std::set<std::string> ids(split.train.sample_ids().begin(), split.train.sample_ids().end());
    for (const auto& id : split.test.sample_ids()) CHECK_FALSE(ids.contains(id));
}

TEST_CASE("reach fraction and curves") {
    RunLedger l;
    for (int t = 1; t <= 4; ++t) {
        IterationRecord r;
        r.t = t;
        r.annotation_fraction = 0.1 * t;
        r.accuracy = 0.5 + 0.1 * t;
        if (t > 1) r.pseudo_error = 0.1 / t;
        l.records.push_back(r);
    }
    CHECK(reach_fraction(l, 0.75) == doctest::Approx(0.3));
    CHECK_FALSE(reach_fraction(l, 0.95).has_value());

    RunLedger shorter = l;
    shorter.records.resize(2);
    const auto curve = summarize({&l, &shorter});
    REQUIRE(curve.size() == 4);
    CHECK(curve[0].runs == 2);
    CHECK(curve[3].runs == 1);
    CHECK(curve[1].accuracy == doctest::Approx(0.7));
    CHECK(curve[1].pseudo_error == doctest::Approx(0.05));

    std::ostringstream out;
    write_curves({{Strategy::aspl, curve}}, out);
    const auto csv = out.str();
    CHECK(csv.starts_with("strategy,t,runs,annotation_fraction,accuracy,queries,pseudo_error\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("experiment runs every strategy and repeat") {
    ExperimentSpec spec;
    spec.synthetic.clusters = 3;
    spec.synthetic.per_cluster = 20;
    spec.synthetic.dim = 3;
    spec.engine.max_iters = 3;
    spec.engine.batch_size = 2;
    spec.repeats = 2;
    spec.strategies = {Strategy::aspl, Strategy::random};
    const auto result = run_experiment(spec);
    CHECK(result.runs.size() == 4);
    CHECK(result.curves.size() == 2);
    CHECK(result.curves.at(Strategy::random).size() == 3);
    for (const auto& run : result.runs) CHECK(run.final_accuracy.has_value());
}

TEST_CASE("experiment spec validation") {
    ExperimentSpec spec;
    spec.validate();
    for (auto mutate : std::initializer_list<void (*)(ExperimentSpec&)>{
             [](ExperimentSpec& s) { s.split = 1.0; }, [](ExperimentSpec& s) { s.repeats = 0; },
             [](ExperimentSpec& s) { s.strategies.clear(); }, [](ExperimentSpec& s) { s.oracle_noise = 1.5; },
             [](ExperimentSpec& s) { s.initial_per_class = -1; }, [](ExperimentSpec& s) { s.engine.C = -1; }}) {
        ExperimentSpec bad;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), DomainError);
    }
}

TEST_CASE("config text round trip") {
    ExperimentSpec spec;
    std::istringstream in(
        "# benchmark\n"
        "C = 0.5\n"
        "strategies = ASPL, RANDOM\n"
        "pseudo_cap = 40\n"
        "verification = off\n"
        "spread = 0.75   # tighter\n"
        "\n"
        "dataset = data/faces.bin\n");
    parse_config(spec, in, "bench.cfg");
    CHECK(spec.engine.C == 0.5);
    CHECK(spec.strategies == std::vector<Strategy>{Strategy::aspl, Strategy::random});
    CHECK(spec.engine.pseudo_cap == 40);
    CHECK_FALSE(spec.verification);
    CHECK(spec.synthetic.spread == 0.75);
    CHECK(spec.dataset == "data/faces.bin");

    std::ostringstream out;
    write_config(spec, out);
    ExperimentSpec copy;
    std::istringstream back(out.str());
    parse_config(copy, back);
    std::ostringstream again;
    write_config(copy, again);
    CHECK(again.str() == out.str());
}

TEST_CASE("config errors name the source line") {
    ExperimentSpec spec;
    auto fails_with = [&](const std::string& text, const std::string& fragment) {
        std::istringstream in(text);
        try {
            parse_config(spec, in, "x.cfg");
            FAIL("expected an error");
        } catch (const DomainError& e) {
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };
    fails_with("C=1\nnonsense\n", "x.cfg:2");
    fails_with("mystery=1\n", "unknown config key 'mystery'");
    fails_with("tau=twelve\n", "x.cfg:1");
    fails_with("verification=maybe\n", "true/false");
}
