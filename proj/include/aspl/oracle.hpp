#ifndef ASPL_ORACLE_HPP
#define ASPL_ORACLE_HPP

#include "aspl/core.hpp"

#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace aspl {

struct KnownCategory {
    Index index;  // into the current classifier bank
    bool operator==(const KnownCategory&) const = default;
};
struct NewCategory {
    std::string name;
    bool operator==(const NewCategory&) const = default;
};
struct UnknownCategory {
    bool operator==(const UnknownCategory&) const = default;
};

using OracleLabel = std::variant<KnownCategory, NewCategory, UnknownCategory>;

/// "name", "new:<name>" or "unknown", resolved against the bank's categories.
std::string to_string(const OracleLabel& label, std::span<const std::string> categories);
OracleLabel parse_oracle_label(const std::string& text, std::span<const std::string> categories);

enum class QueryKind : std::uint8_t { label, verify };

struct Query {
    Index sample = 0;
    std::string sample_id;
    QueryKind kind = QueryKind::label;
    std::optional<Index> claimed;         // verify only
    std::vector<double> scores;           // current score per category
    std::vector<double> feature_summary;  // leading feature coordinates
};

struct OracleAnswer {
    Index sample = 0;
    std::string sample_id;
    OracleLabel category = UnknownCategory{};
    bool is_correction = false;
};

/// Raised by oracles that cannot answer at all (no annotator attached, service down).
class OracleUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Label source for the active-learning steps.
 *
 * `answer` may return fewer answers than queries (timeouts); the caller treats
 * missing answers as deferred.
 */
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual std::vector<OracleAnswer> answer(std::span<const Query> queries,
                                             std::span<const std::string> categories) = 0;

    std::optional<OracleAnswer> label(const Query& q, std::span<const std::string> categories);
    std::optional<OracleAnswer> verify(const Query& q, std::span<const std::string> categories);

    /// Opaque state for checkpointing (RNG streams and the like).
    virtual std::string save_state() const { return {}; }
    virtual void load_state(const std::string&) {}
};

/**
 * Answers from ground truth. Label queries are flipped to a uniformly chosen
 * wrong category with probability `label_noise`; verification queries with
 * probability `verify_noise`.
 */
class SimulatedOracle final : public Oracle {
public:
    SimulatedOracle(const FeatureStore& store, std::uint64_t seed, double label_noise = 0.0, double verify_noise = 0.0);

    std::vector<OracleAnswer> answer(std::span<const Query> queries, std::span<const std::string> categories) override;

    void set_label_noise(double p) { label_noise_ = p; }
    double label_noise() const { return label_noise_; }
    void set_verify_noise(double p) { verify_noise_ = p; }

    /// Truthful answer for sample i, independent of noise.
    OracleLabel truth_label(Index i, std::span<const std::string> categories) const;

    std::string save_state() const override;
    void load_state(const std::string& state) override;

private:
    OracleLabel noisy(Index i, double p, std::span<const std::string> categories);

    const FeatureStore* store_;
    std::mt19937_64 rng_;
    double label_noise_;
    double verify_noise_;
};

}  // namespace aspl

#endif  // ASPL_ORACLE_HPP
