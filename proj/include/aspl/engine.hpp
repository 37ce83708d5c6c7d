#ifndef ASPL_ENGINE_HPP
#define ASPL_ENGINE_HPP

#include "aspl/active_query.hpp"
#include "aspl/core.hpp"
#include "aspl/oracle.hpp"

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace aspl {

enum class Strategy : std::uint8_t { aspl, aspl_no_spl, aspl_no_al, random, uncertainty, all };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);
std::string to_string(PinScope s);
PinScope parse_pin_scope(const std::string& name);

/// Injected annotation noise: `initial` per seen class at start, `midrun` (as a fraction of |Omega|) at `inject_at`.
struct NoiseSpec {
    double initial = 0.0;
    double midrun = 0.0;
    int inject_at = 10;
    bool operator==(const NoiseSpec&) const = default;
};

struct IterationRecord {
    int t = 0;
    Index categories = 0;
    Index annotated_before = 0;      // annotations the bank of this iteration was trained on
    double annotation_fraction = 0;  // annotated_before / n
    Index annotated_after = 0;
    Index queries = 0;  // label queries issued (batch + new-class neighbours)
    Index answered = 0;
    Index verified = 0;
    std::vector<Correction> corrections;
    std::vector<std::string> new_classes;
    Index injected = 0;
    Index high_confidence = 0;  // |S|
    Index pseudo_positive = 0;
    Index unknown = 0;  // |U|
    std::optional<double> pseudo_error;
    std::optional<double> accuracy;
    std::array<double, 4> objective{};  // before/after classifier, weight and label steps
    bool descent_ok = true;
    bool pace_updated = false;
    std::vector<double> eta;
    std::vector<double> lambda;
    std::vector<std::string> warnings;
    double wall_ms = 0;  // excluded from the serialized ledger

    bool operator==(const IterationRecord& o) const;
};

struct RunLedger {
    std::vector<IterationRecord> records;
    bool operator==(const RunLedger&) const = default;
};

/// Pace schedule: lambda0 at t = 0, lambda + alpha * eta for 1 <= t <= tau, unchanged after.
double update_pace(double lambda, int t, double eta, const EngineConfig& config);

/// Fraction of test samples whose top-scoring category matches the truth; unknown-truth samples are skipped.
double rank1_accuracy(const ClassifierBank& bank, const FeatureStore& test);

/// Per-category binary accuracy on the annotated samples (0 for a category with no annotated rows).
std::vector<double> annotated_accuracy(const ClassifierBank& bank, const FeatureStore& store, const LabelState& labels);

/// Replacement feature matrix for the training store, or nullopt to keep it.
using FeatureRefresh = std::function<std::optional<FeatureStore::Matrix>(const FeatureStore&, const LabelState&)>;

/// Everything needed to resume a run.
struct EngineState {
    EngineConfig config;
    Strategy strategy = Strategy::aspl;
    NoiseSpec noise;
    ClassifierBank bank;
    LabelState labels;
    WeightMatrix weights;
    RunLedger ledger;
    std::string rng_state;
    std::string oracle_state;
    bool initialized = false;
    bool exhausted = false;
    std::uint64_t dataset_fingerprint = 0;
};

std::uint64_t fingerprint(const FeatureStore& store);

class Engine {
public:
    Engine(FeatureStore train, std::optional<FeatureStore> test, EngineConfig config, Strategy strategy,
           Oracle& oracle, NoiseSpec noise = {});

    /**
     * Seeds the curriculum. With ground truth, `per_class` random samples of
     * every category not listed in `withheld` are sent to the oracle (all
     * samples for Strategy::all). Without truth, per_class * batch_size random
     * samples are queried and their answers define the categories.
     */
    void initialize(int per_class, const std::vector<std::string>& withheld = {});

    /// One pass of the alternating search; appends and returns its ledger record.
    const IterationRecord& run_iteration();

    /// Iterates until max_iters or the unannotated pool is exhausted.
    void run();
    bool done() const;

    void set_feature_refresh(FeatureRefresh hook) { refresh_ = std::move(hook); }
    void set_verification(bool on) { verification_ = on; }

    const FeatureStore& train() const { return train_; }
    const std::optional<FeatureStore>& test() const { return test_; }
    const ClassifierBank& bank() const { return bank_; }
    const LabelState& labels() const { return labels_; }
    const WeightMatrix& weights() const { return weights_; }
    const RunLedger& ledger() const { return ledger_; }
    const EngineConfig& config() const { return config_; }
    Strategy strategy() const { return strategy_; }
    double objective() const;

    EngineState snapshot() const;
    void restore(const EngineState& state);

private:
    bool uses_spl() const { return strategy_ == Strategy::aspl || strategy_ == Strategy::aspl_no_al; }
    std::vector<Index> select_queries();
    Index inject_noise(Index count, std::optional<Index> forced_category);
    std::optional<Index> truth_in_bank(Index i) const;
    void check_curriculum() const;

    FeatureStore train_;
    std::optional<FeatureStore> test_;
    EngineConfig config_;
    Strategy strategy_;
    NoiseSpec noise_;
    Oracle* oracle_;
    ClassifierBank bank_;
    LabelState labels_;
    WeightMatrix weights_;
    RunLedger ledger_;
    std::mt19937_64 rng_;
    FeatureRefresh refresh_;
    bool verification_ = true;
    bool initialized_ = false;
    bool exhausted_ = false;
};

}  // namespace aspl

#endif  // ASPL_ENGINE_HPP
