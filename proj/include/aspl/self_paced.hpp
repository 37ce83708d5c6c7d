#ifndef ASPL_SELF_PACED_HPP
#define ASPL_SELF_PACED_HPP

#include "aspl/core.hpp"

#include <concepts>

namespace aspl {

/// A self-paced regularizer f(v; lambda) with a closed-form per-entry minimizer.
template <typename R>
concept SelfPacedRegularizer = requires(double loss, double c, double lambda, const Vector<double>& v) {
    { R::weight(loss, c, lambda) } -> std::convertible_to<double>;
    { R::minimum(loss, c, lambda) } -> std::convertible_to<double>;
    { R::value(v, lambda) } -> std::convertible_to<double>;
};

/// f(v; lambda) = lambda (1/2 ||v||^2 - sum v).
struct LinearSoftWeighting {
    /// argmin over v in [0,1] of C v l + lambda (v^2/2 - v).
    template <typename Scalar>
    static Scalar weight(Scalar loss, Scalar c, Scalar lambda) {
        return c * loss < lambda ? Scalar(1) - c * loss / lambda : Scalar(0);
    }

    /// min over v in [0,1] of C v l + lambda (v^2/2 - v).
    template <typename Scalar>
    static Scalar minimum(Scalar loss, Scalar c, Scalar lambda) {
        const Scalar v = weight(loss, c, lambda);
        return -Scalar(0.5) * lambda * v * v;
    }

    template <typename Derived>
    static typename Derived::Scalar value(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar lambda) {
        return linear_soft_regularizer(v, lambda);
    }
};

template <typename Derived>
typename Derived::Scalar regularizer_value(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar lambda) {
    if (!(lambda > 0)) throw DomainError("pace parameter must be positive");
    if ((v.array() < 0).any() || (v.array() > 1).any()) throw DomainError("weights must lie in [0, 1]");
    return LinearSoftWeighting::value(v, lambda);
}

template <typename Scalar>
Scalar spl_weight(Scalar loss, Scalar c, Scalar lambda) {
    return LinearSoftWeighting::weight(loss, c, lambda);
}

template <typename Scalar>
struct WeightUpdate {
    BasicWeightMatrix<Scalar> weights;
    /// Labels the free rows' weights were computed against (zero on pinned rows).
    LabelState::LabelMatrix candidates;
};

namespace detail {

/**
 * Joint (v_i, y_i) minimizer for a free row: the feasible label vector whose
 * per-entry optimal weighted loss sum is smallest. Starting from all-negative,
 * at most one entry flips to +1, chosen by the largest improvement (lowest
 * index on ties).
 */
template <typename Regularizer, typename Scalar, typename Derived>
Index best_candidate_category(const Eigen::MatrixBase<Derived>& scores, const Vector<Scalar>& pace, Scalar c) {
    Index best = -1;
    Scalar best_delta = 0;
    for (Index j = 0; j < scores.size(); ++j) {
        const Scalar s = scores(j);
        const Scalar delta = Regularizer::minimum(hinge_loss(s, 1), c, pace(j)) -
                             Regularizer::minimum(hinge_loss(s, -1), c, pace(j));
        if (delta < best_delta) best_delta = delta, best = j;
    }
    return best;
}

}  // namespace detail

/**
 * Weight step of the alternating search.
 *
 * Pinned rows (curriculum {1}) keep v = 1: across the whole row for
 * PinScope::row, or only on their annotated category for PinScope::annotated
 * (other entries then follow the closed form against the annotated labels).
 * Free rows get a candidate label vector and per-entry closed-form weights
 * against it, which jointly minimize the row's contribution to the objective.
 */
template <typename Scalar, SelfPacedRegularizer Regularizer = LinearSoftWeighting>
WeightUpdate<Scalar> update_weights(const BasicClassifierBank<Scalar>& bank, const BasicFeatureStore<Scalar>& store,
                                    const LabelState& labels, const std::vector<bool>& pinned,
                                    const EngineConfig& config) {
    const Index n = store.size();
    const Index m = bank.num_categories();
    if (labels.size() != n || labels.num_categories() != m || static_cast<Index>(pinned.size()) != n)
        throw DomainError("weight update inputs have mismatched dimensions");
    const Scalar c = static_cast<Scalar>(config.C);

    WeightUpdate<Scalar> out;
    out.weights = BasicWeightMatrix<Scalar>(n, m);
    out.weights.pinned = pinned;
    out.candidates = LabelState::LabelMatrix::Zero(n, m);
    const RowMatrix<Scalar> scores = bank.scores(store.features());

    for (Index i = 0; i < n; ++i) {
        const bool pin = pinned[static_cast<std::size_t>(i)];
        if (pin != labels.is_annotated(i))
            throw DomainError("curriculum marker of sample " + std::to_string(i) + " disagrees with the annotated set");
        if (pin) {
            const auto annotated_to = labels.positive_category(i);
            for (Index j = 0; j < m; ++j) {
                if (config.pin_scope == PinScope::row || (annotated_to && *annotated_to == j))
                    out.weights.v(i, j) = 1;
                else
                    out.weights.v(i, j) =
                        Regularizer::weight(hinge_loss(scores(i, j), labels.label(i, j)), c, bank.pace(j));
            }
            continue;
        }
        const Index positive = detail::best_candidate_category<Regularizer>(scores.row(i), bank.pace, c);
        for (Index j = 0; j < m; ++j) {
            const int y = j == positive ? 1 : -1;
            out.candidates(i, j) = static_cast<std::int8_t>(y);
            out.weights.v(i, j) = Regularizer::weight(hinge_loss(scores(i, j), y), c, bank.pace(j));
        }
    }
    return out;
}

}  // namespace aspl

#endif  // ASPL_SELF_PACED_HPP
