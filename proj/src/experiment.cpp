#include "aspl/experiment.hpp"

#include "aspl/io_service.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace aspl {

FeatureStore generate_synthetic(const SyntheticSpec& spec) {
    if (spec.clusters < 1 || spec.per_cluster < 1) throw DomainError("synthetic spec has no samples");
    if (spec.dim < 1) throw DomainError("synthetic dimension must be positive");
    if (!(spec.spread >= 0) || !std::isfinite(spec.spread)) throw DomainError("spread must be finite and >= 0");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index m = spec.clusters, per = spec.per_cluster, d = spec.dim;
    RowMatrix<double> centers(m, d);
    for (Index k = 0; k < m; ++k)
        for (Index c = 0; c < d; ++c) centers(k, c) = normal(rng);

    RowMatrix<double> x(m * per, d);
    std::vector<int> truth(static_cast<std::size_t>(m * per));
    std::vector<std::string> ids(static_cast<std::size_t>(m * per));
    std::vector<std::string> names;
    for (Index k = 0; k < m; ++k) names.push_back("c" + std::to_string(k));
    for (Index k = 0; k < m; ++k)
        for (Index p = 0; p < per; ++p) {
            const Index i = k * per + p;
            // Stored at float precision so the packed format reproduces the matrix exactly.
            for (Index c = 0; c < d; ++c)
                x(i, c) = static_cast<double>(static_cast<float>(centers(k, c) + spec.spread * normal(rng)));
            truth[static_cast<std::size_t>(i)] = static_cast<int>(k);
            ids[static_cast<std::size_t>(i)] = "s" + std::to_string(i);
        }
    return FeatureStore(std::move(x), std::move(ids), std::move(truth), std::move(names));
}

Split stratified_split(const FeatureStore& store, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0 && train_fraction < 1)) throw DomainError("split fraction must lie in (0, 1)");
    if (!store.has_truth()) throw DomainError("stratified split needs ground truth");
    std::mt19937_64 rng(seed);
    std::map<int, std::vector<Index>> by_class;
    for (Index i = 0; i < store.size(); ++i) by_class[store.truth(i)].push_back(i);
    std::vector<Index> train, test;
    for (auto& [label, members] : by_class) {
        for (std::size_t k = members.size(); k > 1; --k)
            std::swap(members[k - 1], members[static_cast<std::size_t>(rng() % k)]);
        const auto cut = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(members.size())));
        train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
        test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    if (train.empty() || test.empty()) throw DomainError("split leaves an empty side");
    return {store.subset(train), store.subset(test)};
}

void ExperimentSpec::validate() const {
    if (!(split > 0 && split < 1)) throw DomainError("split fraction must lie in (0, 1)");
    if (initial_per_class < 0) throw DomainError("initial annotations per class must be non-negative");
    if (strategies.empty()) throw DomainError("no strategy selected");
    auto fraction = [](double f) { return f >= 0 && f <= 1; };
    if (!fraction(noise.initial) || !fraction(noise.midrun) || !fraction(oracle_noise))
        throw DomainError("noise fractions must lie in [0, 1]");
    if (noise.inject_at < 1) throw DomainError("noise injection iteration must be positive");
    if (repeats < 1) throw DomainError("repeats must be positive");
    if (withheld < 0) throw DomainError("withheld class count must be non-negative");
    engine.validate();
}

RunResult run_single(const ExperimentSpec& spec, Strategy strategy, int repeat) {
    spec.validate();
    const std::uint64_t seed = spec.engine.seed + static_cast<std::uint64_t>(repeat);
    FeatureStore data;
    if (spec.dataset) {
        data = load_dataset(*spec.dataset);
    } else {
        SyntheticSpec s = spec.synthetic;
        s.seed = seed;
        data = generate_synthetic(s);
    }
    auto [train, test] = stratified_split(data, spec.split, seed);

    std::vector<std::string> withheld;
    const auto& names = train.category_names();
    if (spec.withheld > static_cast<int>(names.size())) throw DomainError("cannot withhold more classes than exist");
    for (std::size_t k = names.size() - static_cast<std::size_t>(spec.withheld); k < names.size(); ++k)
        withheld.push_back(names[k]);

    EngineConfig config = spec.engine;
    config.seed = seed;
    const FeatureStore truth_view = train;
    SimulatedOracle oracle(truth_view, seed ^ 0x9e3779b97f4a7c15ull, spec.oracle_noise);
    Engine engine(std::move(train), std::move(test), config, strategy, oracle, spec.noise);
    engine.set_verification(spec.verification);
    engine.initialize(spec.initial_per_class, withheld);
    engine.run();

    RunResult r;
    r.strategy = strategy;
    r.repeat = repeat;
    r.ledger = engine.ledger();
    if (!r.ledger.records.empty()) r.final_accuracy = r.ledger.records.back().accuracy;
    return r;
}

std::vector<CurvePoint> summarize(const std::vector<const RunLedger*>& ledgers) {
    std::size_t longest = 0;
    for (const auto* l : ledgers) longest = std::max(longest, l->records.size());
    std::vector<CurvePoint> out;
    for (std::size_t t = 0; t < longest; ++t) {
        CurvePoint p;
        p.t = static_cast<int>(t) + 1;
        int with_error = 0;
        for (const auto* l : ledgers) {
            if (t >= l->records.size()) continue;
            const auto& r = l->records[t];
            ++p.runs;
            p.annotation_fraction += r.annotation_fraction;
            p.accuracy += r.accuracy.value_or(0.0);
            p.queries += static_cast<double>(r.queries);
            if (r.pseudo_error) {
                p.pseudo_error += *r.pseudo_error;
                ++with_error;
            }
        }
        p.annotation_fraction /= p.runs;
        p.accuracy /= p.runs;
        p.queries /= p.runs;
        if (with_error > 0) p.pseudo_error /= with_error;
        out.push_back(p);
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentResult result;
    for (Strategy s : spec.strategies)
        for (int r = 0; r < spec.repeats; ++r) result.runs.push_back(run_single(spec, s, r));
    for (Strategy s : spec.strategies) {
        std::vector<const RunLedger*> ledgers;
        for (const auto& run : result.runs)
            if (run.strategy == s) ledgers.push_back(&run.ledger);
        result.curves[s] = summarize(ledgers);
    }
    return result;
}

std::optional<double> reach_fraction(const RunLedger& ledger, double target) {
    for (const auto& r : ledger.records)
        if (r.accuracy && *r.accuracy >= target) return r.annotation_fraction;
    return std::nullopt;
}

}  // namespace aspl
