#ifndef ASPL_ACTIVE_QUERY_HPP
#define ASPL_ACTIVE_QUERY_HPP

#include "aspl/core.hpp"
#include "aspl/oracle.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace aspl {

/**
 * Low-confidence samples for annotation.
 *
 * The primary pool holds unannotated samples scored positive by at least
 * `min_positives` classifiers, ordered by positive count (descending) then by
 * the gap between their two highest scores (ascending). If it holds fewer than
 * `batch` samples, the rest come from unannotated samples whose highest score
 * is closest to zero.
 */
std::vector<Index> select_low_confidence(const ClassifierBank& bank, const FeatureStore& store,
                                         const LabelState& labels, int batch, int min_positives = 2);

/// Unannotated samples ordered by |max_j s_j| ascending (uncertainty baseline).
std::vector<Index> select_least_confident(const ClassifierBank& bank, const FeatureStore& store,
                                          const LabelState& labels, int batch);

/// Uniformly random unannotated samples (random baseline).
std::vector<Index> select_random(const LabelState& labels, int batch, std::mt19937_64& rng);

/// Query payload for sample i under the current bank.
Query make_query(const ClassifierBank& bank, const FeatureStore& store, Index i, QueryKind kind,
                 std::optional<Index> claimed = std::nullopt);

/// Writes an oracle answer into the label row and curriculum of an annotated sample.
void apply_annotation(Index i, std::optional<Index> category, LabelState& labels, WeightMatrix& weights,
                      PinScope scope);

struct NewClassRequest {
    Index sample;
    std::string name;
};

struct Correction {
    Index sample;
    std::optional<Index> from;
    std::string to;
    bool operator==(const Correction&) const = default;
};

struct VerificationReport {
    Index queried = 0;
    std::vector<Correction> corrections;
    std::vector<NewClassRequest> new_class_requests;
    std::vector<std::string> warnings;
};

/**
 * Re-checks the L annotated samples with the lowest score under their
 * annotated category and rewrites the rows the oracle corrects.
 */
VerificationReport verify_annotations(const ClassifierBank& bank, const FeatureStore& store, LabelState& labels,
                                      WeightMatrix& weights, Oracle& oracle, int count, PinScope scope);

struct AnnotationOutcome {
    Index requested = 0;
    Index answered = 0;
    std::vector<Index> annotated;
    std::vector<NewClassRequest> new_class_requests;  // rows deferred until their class exists
};

/// Queries the oracle for `selected` and applies the answers (pinning every answered row).
AnnotationOutcome annotate_batch(const std::vector<Index>& selected, Oracle& oracle, const ClassifierBank& bank,
                                 const FeatureStore& store, LabelState& labels, WeightMatrix& weights, PinScope scope);

struct NewClassReport {
    std::vector<std::string> created;
    Index queries = 0;
    Index annotated = 0;
    std::vector<std::string> warnings;
};

/**
 * Creates one category per new name: enriches the seeds with their K nearest
 * neighbours from the unannotated part of U (queried through the oracle),
 * appends the category with pace lambda0, and fits its hyperplane on the
 * annotated samples. Existing hyperplanes are left untouched.
 */
NewClassReport handle_new_classes(const std::vector<NewClassRequest>& requests, const FeatureStore& store,
                                  LabelState& labels, WeightMatrix& weights, ClassifierBank& bank, Oracle& oracle,
                                  const EngineConfig& config);

}  // namespace aspl

#endif  // ASPL_ACTIVE_QUERY_HPP
