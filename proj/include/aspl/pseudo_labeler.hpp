#ifndef ASPL_PSEUDO_LABELER_HPP
#define ASPL_PSEUDO_LABELER_HPP

#include "aspl/core.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

namespace aspl {

template <typename Scalar>
struct Theorem1Input {
    Vector<Scalar> scores;   // w_j . x_i + b_j
    Vector<Scalar> weights;  // v_i^(j)
};

enum class LabelCase : std::uint8_t { all_negative, single_positive, argmin };

template <typename Scalar>
struct Theorem1Result {
    Eigen::VectorXi y;
    Scalar objective = 0;  // sum_j v_j (1 - y_j s_j)_+
    LabelCase which = LabelCase::all_negative;
};

/**
 * Exact minimizer of sum_j v_j (1 - y_j s_j)_+ over label vectors with at most
 * one +1.
 *
 * Entries with v_j = 0 or s_j = 0 are outside M and stay -1. Within M: all
 * scores negative gives all -1; a single positive score takes +1; otherwise +1
 * goes to argmin_j v_j ((1 - s_j)_+ - (1 + s_j)_+), lowest index on ties.
 */
template <typename Scalar>
Theorem1Result<Scalar> solve_theorem1(const Theorem1Input<Scalar>& in) {
    const Index m = in.scores.size();
    if (in.weights.size() != m) throw DomainError("score and weight vectors differ in length");
    if (!in.scores.allFinite() || !in.weights.allFinite()) throw DomainError("non-finite pseudo-label input");

    Theorem1Result<Scalar> out;
    out.y = Eigen::VectorXi::Constant(m, -1);
    Index positives = 0;
    Index last_positive = -1;
    for (Index j = 0; j < m; ++j) {
        if (in.weights(j) > 0 && in.scores(j) > 0) ++positives, last_positive = j;
    }
    if (positives == 1) {
        out.y(last_positive) = 1;
        out.which = LabelCase::single_positive;
    } else if (positives > 1) {
        Index best = -1;
        Scalar best_value = 0;
        for (Index j = 0; j < m; ++j) {
            if (!(in.weights(j) > 0) || in.scores(j) == 0) continue;
            const Scalar s = in.scores(j);
            const Scalar value = in.weights(j) * (hinge_loss(s, 1) - hinge_loss(s, -1));
            if (best < 0 || value < best_value) best = j, best_value = value;
        }
        out.y(best) = 1;
        out.which = LabelCase::argmin;
    }
    for (Index j = 0; j < m; ++j) out.objective += in.weights(j) * hinge_loss(in.scores(j), out.y(j));
    return out;
}

/**
 * High-confidence set S: unannotated samples with positive weight in some
 * category, ordered by their largest weight (descending, index on ties) and
 * truncated to `cap` when given.
 */
template <typename Scalar>
std::vector<Index> select_high_confidence(const BasicWeightMatrix<Scalar>& weights, const LabelState& labels,
                                          std::optional<int> cap) {
    if (weights.size() != labels.size()) throw DomainError("weights and labels differ in sample count");
    std::vector<Index> s;
    Vector<Scalar> best(weights.size());
    for (Index i = 0; i < weights.size(); ++i) {
        best(i) = weights.num_categories() > 0 ? weights.v.row(i).maxCoeff() : Scalar(0);
        if (!labels.is_annotated(i) && best(i) > 0) s.push_back(i);
    }
    std::stable_sort(s.begin(), s.end(), [&](Index a, Index b) { return best(a) > best(b); });
    if (cap && static_cast<std::size_t>(*cap) < s.size()) s.resize(static_cast<std::size_t>(*cap));
    return s;
}

/// Pseudo-labels every sample in S by the exact constrained solver.
template <typename Scalar>
LabelState pseudo_label_batch(const std::vector<Index>& high_confidence, const BasicClassifierBank<Scalar>& bank,
                              const BasicFeatureStore<Scalar>& store, const BasicWeightMatrix<Scalar>& weights,
                              LabelState labels) {
    if (labels.size() != store.size() || weights.size() != store.size() ||
        weights.num_categories() != bank.num_categories() || labels.num_categories() != bank.num_categories())
        throw DomainError("pseudo-label inputs have mismatched dimensions");
    for (Index i : high_confidence) {
        if (i < 0 || i >= store.size()) throw DomainError("sample index out of range: " + std::to_string(i));
        if (labels.is_annotated(i))
            throw DomainError("sample " + std::to_string(i) + " is annotated and cannot be pseudo-labeled");
        Theorem1Input<Scalar> in;
        in.scores = (bank.weights * store.row(i).transpose() + bank.biases);
        in.weights = weights.v.row(i).transpose();
        const auto sol = solve_theorem1(in);
        labels.assign_row(i, sol.y, Provenance::pseudo);
    }
    return labels;
}

/**
 * Drops pseudo labels of rows outside the current high-confidence set, so
 * pseudo rows (and the pseudo part of U) always reflect this round's solve.
 * Returns the resulting unknown set U.
 */
inline std::vector<Index> refresh_unknown_set(const std::vector<Index>& high_confidence, LabelState& labels) {
    std::vector<bool> keep(static_cast<std::size_t>(labels.size()), false);
    for (Index i : high_confidence) keep[static_cast<std::size_t>(i)] = true;
    for (Index i = 0; i < labels.size(); ++i)
        if (labels.is_pseudo(i) && !keep[static_cast<std::size_t>(i)]) labels.clear(i);
    return labels.unknown_set();
}

}  // namespace aspl

#endif  // ASPL_PSEUDO_LABELER_HPP
