#ifndef ASPL_CORE_HPP
#define ASPL_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aspl {

using Index = Eigen::Index;

/// Thrown on contract violations: bad indices, mismatched dimensions, infeasible label rows.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Truth value for samples that belong to no category (background, unseen person).
inline constexpr int kUnknownCategory = -1;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/**
 * Immutable n x d feature matrix plus optional ground truth.
 *
 * Truth indices refer to category_names(); they are only read by the simulated
 * oracle and by evaluation, never by the learning steps.
 */
template <typename Scalar>
class BasicFeatureStore {
public:
    using Matrix = RowMatrix<Scalar>;

    BasicFeatureStore() = default;

    BasicFeatureStore(Matrix features, std::vector<std::string> sample_ids,
                      std::optional<std::vector<int>> truth = std::nullopt,
                      std::vector<std::string> category_names = {})
        : features_(std::move(features)),
          sample_ids_(std::move(sample_ids)),
          truth_(std::move(truth)),
          category_names_(std::move(category_names)) {
        validate();
    }

    Index size() const { return features_.rows(); }
    Index dim() const { return features_.cols(); }

    const Matrix& features() const { return features_; }
    auto row(Index i) const { return features_.row(i); }

    const std::vector<std::string>& sample_ids() const { return sample_ids_; }
    const std::string& sample_id(Index i) const { return sample_ids_.at(static_cast<std::size_t>(i)); }

    bool has_truth() const { return truth_.has_value(); }
    const std::vector<int>& truth() const {
        if (!truth_) throw DomainError("feature store has no ground truth");
        return *truth_;
    }
    int truth(Index i) const { return truth().at(static_cast<std::size_t>(i)); }

    const std::vector<std::string>& category_names() const { return category_names_; }

    /// Name of the true category of sample i, or nullopt for the unknown sentinel.
    std::optional<std::string> truth_name(Index i) const {
        const int t = truth(i);
        if (t == kUnknownCategory) return std::nullopt;
        return category_names_[static_cast<std::size_t>(t)];
    }

    /// Rows `rows` of this store, in the given order.
    BasicFeatureStore subset(const std::vector<Index>& rows) const {
        Matrix f(static_cast<Index>(rows.size()), dim());
        std::vector<std::string> ids;
        ids.reserve(rows.size());
        std::optional<std::vector<int>> t;
        if (truth_) t.emplace();
        for (std::size_t k = 0; k < rows.size(); ++k) {
            f.row(static_cast<Index>(k)) = features_.row(rows[k]);
            ids.push_back(sample_ids_.at(static_cast<std::size_t>(rows[k])));
            if (t) t->push_back((*truth_)[static_cast<std::size_t>(rows[k])]);
        }
        return BasicFeatureStore(std::move(f), std::move(ids), std::move(t), category_names_);
    }

    /// Same ids and truth, new coordinates (feature-refresh hook).
    BasicFeatureStore with_features(Matrix features) const {
        if (features.rows() != size()) throw DomainError("refreshed feature matrix has wrong row count");
        return BasicFeatureStore(std::move(features), sample_ids_, truth_, category_names_);
    }

private:
    void validate() const {
        if (features_.rows() < 1 || features_.cols() < 1)
            throw DomainError("feature store needs n >= 1 and d >= 1");
        if (static_cast<Index>(sample_ids_.size()) != features_.rows())
            throw DomainError("sample id count does not match feature rows");
        if (!features_.allFinite()) {
            for (Index i = 0; i < features_.rows(); ++i)
                for (Index k = 0; k < features_.cols(); ++k)
                    if (!std::isfinite(features_(i, k)))
                        throw DomainError("non-finite feature at row " + std::to_string(i) + ", column " +
                                          std::to_string(k));
        }
        if (truth_) {
            if (static_cast<Index>(truth_->size()) != features_.rows())
                throw DomainError("truth length does not match feature rows");
            for (int t : *truth_)
                if (t != kUnknownCategory && (t < 0 || t >= static_cast<int>(category_names_.size())))
                    throw DomainError("truth index out of range: " + std::to_string(t));
        }
    }

    Matrix features_;
    std::vector<std::string> sample_ids_;
    std::optional<std::vector<int>> truth_;
    std::vector<std::string> category_names_;
};

using FeatureStore = BasicFeatureStore<double>;

/// m one-vs-all hyperplanes with their pace ages.
template <typename Scalar>
struct BasicClassifierBank {
    RowMatrix<Scalar> weights;  // m x d
    Vector<Scalar> biases;      // m
    Vector<Scalar> pace;        // lambda_j, m
    std::vector<std::string> categories;
    int iteration = 0;

    BasicClassifierBank() = default;
    BasicClassifierBank(Index dim, std::vector<std::string> names, Scalar lambda0)
        : weights(RowMatrix<Scalar>::Zero(static_cast<Index>(names.size()), dim)),
          biases(Vector<Scalar>::Zero(static_cast<Index>(names.size()))),
          pace(Vector<Scalar>::Constant(static_cast<Index>(names.size()), lambda0)),
          categories(std::move(names)) {}

    Index num_categories() const { return weights.rows(); }
    Index dim() const { return weights.cols(); }

    std::optional<Index> find(const std::string& name) const {
        for (std::size_t j = 0; j < categories.size(); ++j)
            if (categories[j] == name) return static_cast<Index>(j);
        return std::nullopt;
    }

    /// Appends a zero hyperplane for a new category and returns its index.
    Index add_category(const std::string& name, Scalar lambda0) {
        const Index m = num_categories();
        weights.conservativeResize(m + 1, Eigen::NoChange);
        weights.row(m).setZero();
        biases.conservativeResize(m + 1);
        biases(m) = 0;
        pace.conservativeResize(m + 1);
        pace(m) = lambda0;
        categories.push_back(name);
        return m;
    }

    /// n x m score matrix X W^T + 1 b^T.
    template <typename Derived>
    RowMatrix<Scalar> scores(const Eigen::MatrixBase<Derived>& x) const {
        RowMatrix<Scalar> s = x * weights.transpose();
        s.rowwise() += biases.transpose();
        return s;
    }
};

using ClassifierBank = BasicClassifierBank<double>;

enum class Provenance : std::uint8_t { none = 0, pseudo = 1, annotated = 2 };

/**
 * Per-sample, per-category labels in {-1, +1, 0}, where 0 marks "not assigned".
 *
 * Provenance is tracked per row: annotated rows come from the oracle and are
 * fully assigned, pseudo rows come from the pseudo-labeler and are fully
 * assigned, none rows are all zero.
 */
class LabelState {
public:
    using LabelMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    LabelState() = default;
    LabelState(Index n, Index m)
        : labels_(LabelMatrix::Zero(n, m)), provenance_(static_cast<std::size_t>(n), Provenance::none) {}

    Index size() const { return labels_.rows(); }
    Index num_categories() const { return labels_.cols(); }

    const LabelMatrix& labels() const { return labels_; }
    std::int8_t label(Index i, Index j) const { return labels_(i, j); }
    Provenance provenance(Index i) const { return provenance_.at(static_cast<std::size_t>(i)); }

    bool is_annotated(Index i) const { return provenance(i) == Provenance::annotated; }
    bool is_pseudo(Index i) const { return provenance(i) == Provenance::pseudo; }
    bool is_assigned(Index i) const { return provenance(i) != Provenance::none; }

    /// Category with y=+1, or nullopt for an all-negative or unassigned row.
    std::optional<Index> positive_category(Index i) const {
        for (Index j = 0; j < num_categories(); ++j)
            if (labels_(i, j) > 0) return j;
        return std::nullopt;
    }

    /// Sets row i to +1 at `category` (or all -1 when nullopt).
    void assign(Index i, std::optional<Index> category, Provenance p) {
        check_row(i);
        if (p == Provenance::none) throw DomainError("assign requires annotated or pseudo provenance");
        if (category && (*category < 0 || *category >= num_categories()))
            throw DomainError("category index out of range");
        labels_.row(i).setConstant(-1);
        if (category) labels_(i, *category) = 1;
        provenance_[static_cast<std::size_t>(i)] = p;
    }

    /// Assigns a full +/-1 row; throws when it carries more than one positive.
    template <typename Derived>
    void assign_row(Index i, const Eigen::MatrixBase<Derived>& y, Provenance p) {
        check_row(i);
        if (y.size() != num_categories()) throw DomainError("label row has wrong length");
        int positives = 0;
        for (Index j = 0; j < y.size(); ++j) {
            if (y(j) != 1 && y(j) != -1) throw DomainError("label values must be +1 or -1");
            positives += y(j) > 0 ? 1 : 0;
        }
        if (positives > 1) throw DomainError("label row has more than one positive category");
        for (Index j = 0; j < y.size(); ++j) labels_(i, j) = static_cast<std::int8_t>(y(j));
        provenance_[static_cast<std::size_t>(i)] = p;
    }

    void clear(Index i) {
        check_row(i);
        labels_.row(i).setZero();
        provenance_[static_cast<std::size_t>(i)] = Provenance::none;
    }

    /// New category column: -1 for every assigned row, 0 otherwise.
    Index add_category() {
        const Index m = num_categories();
        labels_.conservativeResize(Eigen::NoChange, m + 1);
        for (Index i = 0; i < size(); ++i) labels_(i, m) = is_assigned(i) ? -1 : 0;
        return m;
    }

    /// Omega^{lambda_j}: annotated samples positive for category j.
    std::vector<Index> annotated_set(Index j) const {
        std::vector<Index> out;
        for (Index i = 0; i < size(); ++i)
            if (is_annotated(i) && labels_(i, j) > 0) out.push_back(i);
        return out;
    }

    std::vector<Index> annotated() const { return rows_with(Provenance::annotated); }
    std::vector<Index> unannotated() const {
        std::vector<Index> out;
        for (Index i = 0; i < size(); ++i)
            if (!is_annotated(i)) out.push_back(i);
        return out;
    }

    /// U: assigned rows with no positive label.
    std::vector<Index> unknown_set() const {
        std::vector<Index> out;
        for (Index i = 0; i < size(); ++i)
            if (is_assigned(i) && !positive_category(i)) out.push_back(i);
        return out;
    }

    Index count(Provenance p) const { return static_cast<Index>(rows_with(p).size()); }

    /// Throws if any row violates the at-most-one-positive or full-assignment rules.
    void audit() const {
        for (Index i = 0; i < size(); ++i) {
            int positives = 0;
            for (Index j = 0; j < num_categories(); ++j) {
                const auto y = labels_(i, j);
                if (is_assigned(i) ? (y != 1 && y != -1) : (y != 0))
                    throw DomainError("label row " + std::to_string(i) + " is inconsistent with its provenance");
                positives += y > 0 ? 1 : 0;
            }
            if (positives > 1)
                throw DomainError("label row " + std::to_string(i) + " has more than one positive");
        }
    }

    bool operator==(const LabelState&) const = default;

private:
    void check_row(Index i) const {
        if (i < 0 || i >= size()) throw DomainError("sample index out of range: " + std::to_string(i));
    }
    std::vector<Index> rows_with(Provenance p) const {
        std::vector<Index> out;
        for (Index i = 0; i < size(); ++i)
            if (provenance(i) == p) out.push_back(i);
        return out;
    }

    LabelMatrix labels_;
    std::vector<Provenance> provenance_;
};

/// SPL importance weights v (n x m) and the per-sample curriculum marker.
template <typename Scalar>
struct BasicWeightMatrix {
    RowMatrix<Scalar> v;
    std::vector<bool> pinned;  // Psi_i = {1} when true, [0,1] otherwise

    BasicWeightMatrix() = default;
    BasicWeightMatrix(Index n, Index m) : v(RowMatrix<Scalar>::Zero(n, m)), pinned(static_cast<std::size_t>(n), false) {}

    Index size() const { return v.rows(); }
    Index num_categories() const { return v.cols(); }
    bool is_pinned(Index i) const { return pinned.at(static_cast<std::size_t>(i)); }

    Index add_category() {
        const Index m = v.cols();
        v.conservativeResize(Eigen::NoChange, m + 1);
        v.col(m).setZero();
        return m;
    }
};

using WeightMatrix = BasicWeightMatrix<double>;

/// Which entries of an annotated sample's weight row are fixed at 1.
enum class PinScope : std::uint8_t {
    row,       // every category (v_i = 1 across the row)
    annotated  // only the category the sample is annotated to
};

struct EngineConfig {
    double C = 1.0;
    double lambda0 = 0.2;
    double alpha = 0.08;
    int tau = 12;
    int refresh_interval = 5;  // T
    int verify_count = 5;      // L
    int neighbors = 5;         // K
    int batch_size = 8;        // B
    std::optional<int> pseudo_cap;
    std::uint64_t seed = 1;
    double solver_tol = 1e-6;
    int max_iters = 30;
    int ambiguity_min_positives = 2;
    PinScope pin_scope = PinScope::row;

    void validate() const;
};

inline void EngineConfig::validate() const {
    if (!(C > 0)) throw DomainError("C must be positive");
    if (!(lambda0 > 0)) throw DomainError("lambda0 must be positive");
    if (!(alpha > 0)) throw DomainError("alpha must be positive");
    if (tau < 1) throw DomainError("tau must be positive");
    if (refresh_interval < 1) throw DomainError("refresh interval must be positive");
    if (verify_count < 0) throw DomainError("verification count must be non-negative");
    if (neighbors < 0) throw DomainError("neighbor count must be non-negative");
    if (batch_size < 0) throw DomainError("batch size must be non-negative");
    if (pseudo_cap && *pseudo_cap < 0) throw DomainError("pseudo cap must be non-negative");
    if (!(solver_tol > 0)) throw DomainError("solver tolerance must be positive");
    if (max_iters < 1) throw DomainError("max_iters must be positive");
    if (ambiguity_min_positives < 1) throw DomainError("ambiguity threshold must be positive");
}

// ---------------------------------------------------------------------------
// Evaluators

template <typename Scalar>
Scalar decision_value(const BasicClassifierBank<Scalar>& bank, const BasicFeatureStore<Scalar>& store, Index i,
                      Index j) {
    if (i < 0 || i >= store.size()) throw DomainError("sample index out of range: " + std::to_string(i));
    if (j < 0 || j >= bank.num_categories()) throw DomainError("category index out of range: " + std::to_string(j));
    if (bank.dim() != store.dim()) throw DomainError("classifier and feature dimensions differ");
    return bank.weights.row(j).dot(store.row(i)) + bank.biases(j);
}

/// (1 - y s)_+
template <typename Scalar>
constexpr Scalar hinge_loss(Scalar score, int y) {
    const Scalar margin = Scalar(1) - static_cast<Scalar>(y) * score;
    return margin > Scalar(0) ? margin : Scalar(0);
}

/// Elementwise hinge over a score array and a +/-1 label array.
template <typename DerivedS, typename DerivedY>
auto hinge_loss(const Eigen::ArrayBase<DerivedS>& scores, const Eigen::ArrayBase<DerivedY>& y) {
    using Scalar = typename DerivedS::Scalar;
    return (Scalar(1) - y.template cast<Scalar>() * scores).max(Scalar(0));
}

/// lambda (1/2 ||v||^2 - sum v)
template <typename Derived>
typename Derived::Scalar linear_soft_regularizer(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar lambda) {
    if (!(lambda > 0)) throw DomainError("pace parameter must be positive");
    return lambda * (typename Derived::Scalar(0.5) * v.squaredNorm() - v.sum());
}

/**
 * Full joint objective: sum_j 1/2||w_j||^2 + C sum_i v_ij l_ij + f(v_j; lambda_j).
 *
 * Rows without an assigned label contribute neither loss nor regularizer.
 */
template <typename Scalar>
Scalar aspl_objective(const BasicClassifierBank<Scalar>& bank, const BasicFeatureStore<Scalar>& store,
                      const LabelState& labels, const BasicWeightMatrix<Scalar>& weights, const EngineConfig& config) {
    const Index n = store.size();
    const Index m = bank.num_categories();
    if (bank.dim() != store.dim() || labels.size() != n || weights.size() != n || labels.num_categories() != m ||
        weights.num_categories() != m)
        throw DomainError("objective inputs have mismatched dimensions");

    const RowMatrix<Scalar> scores = bank.scores(store.features());
    Scalar total = Scalar(0.5) * bank.weights.squaredNorm();
    for (Index j = 0; j < m; ++j) {
        Scalar loss = 0;
        Scalar sq = 0;
        Scalar lin = 0;
        for (Index i = 0; i < n; ++i) {
            if (!labels.is_assigned(i)) continue;
            const Scalar v = weights.v(i, j);
            loss += v * hinge_loss(scores(i, j), labels.label(i, j));
            sq += v * v;
            lin += v;
        }
        total += static_cast<Scalar>(config.C) * loss + bank.pace(j) * (Scalar(0.5) * sq - lin);
    }
    return total;
}

}  // namespace aspl

#endif  // ASPL_CORE_HPP
