#ifndef ASPL_EXPERIMENT_HPP
#define ASPL_EXPERIMENT_HPP

#include "aspl/engine.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aspl {

/// Isotropic Gaussian clusters; centers are drawn from N(0, I), samples from N(center, spread^2 I).
struct SyntheticSpec {
    int clusters = 10;
    int per_cluster = 200;
    int dim = 16;
    double spread = 1.0;
    std::uint64_t seed = 1;
};

FeatureStore generate_synthetic(const SyntheticSpec& spec);

struct Split {
    FeatureStore train;
    FeatureStore test;
};

/// Stratified split: `train_fraction` of every class (rounded) goes to train, order shuffled by `seed`.
Split stratified_split(const FeatureStore& store, double train_fraction, std::uint64_t seed);

/// Engine defaults with the iteration budget of the synthetic benchmark.
inline EngineConfig benchmark_engine() {
    EngineConfig c;
    c.max_iters = 120;
    return c;
}

struct ExperimentSpec {
    SyntheticSpec synthetic;
    std::optional<std::string> dataset;  // path; overrides the generator when set
    double split = 0.8;
    int initial_per_class = 3;           // n0
    std::vector<Strategy> strategies{Strategy::aspl};
    NoiseSpec noise;
    double oracle_noise = 0.0;           // label-query flip probability
    bool verification = true;
    int repeats = 5;
    int withheld = 0;                    // last classes hidden from the initial bank
    EngineConfig engine = benchmark_engine();

    void validate() const;
};

struct RunResult {
    Strategy strategy = Strategy::aspl;
    int repeat = 0;
    RunLedger ledger;
    std::optional<double> final_accuracy;
};

/// One run; repeat r uses seed engine.seed + r for the generator, the split, the engine and the oracle.
RunResult run_single(const ExperimentSpec& spec, Strategy strategy, int repeat);

/// Per-iteration means over the runs of one strategy (runs shorter than t are left out of row t).
struct CurvePoint {
    int t = 0;
    int runs = 0;
    double annotation_fraction = 0;
    double accuracy = 0;
    double queries = 0;
    double pseudo_error = 0;
};

struct ExperimentResult {
    std::vector<RunResult> runs;
    std::map<Strategy, std::vector<CurvePoint>> curves;
};

std::vector<CurvePoint> summarize(const std::vector<const RunLedger*>& ledgers);

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// First annotation fraction at which accuracy reaches `target`, or nullopt if it never does.
std::optional<double> reach_fraction(const RunLedger& ledger, double target);

}  // namespace aspl

#endif  // ASPL_EXPERIMENT_HPP
