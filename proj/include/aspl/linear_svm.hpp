#ifndef ASPL_LINEAR_SVM_HPP
#define ASPL_LINEAR_SVM_HPP

#include "aspl/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace aspl {

template <typename Scalar>
struct Hyperplane {
    Vector<Scalar> w;
    Scalar b = 0;
};

template <typename Scalar>
struct WeightedRow {
    Index sample;
    int y;         // +1 or -1
    Scalar weight;  // v in [0, 1]
};

/// One category's weighted soft-margin problem.
template <typename Scalar>
struct BinaryProblem {
    std::vector<WeightedRow<Scalar>> rows;
    Scalar C = 1;
    Scalar tol = Scalar(1e-6);
    std::optional<Hyperplane<Scalar>> warm_start;
    long max_steps = 2'000'000;
};

template <typename Scalar>
struct BinaryResult {
    Vector<Scalar> w;
    Scalar b = 0;
    Scalar objective = 0;       // primal value at (w, b)
    Scalar dual_objective = 0;  // lower bound on the optimum
    long steps = 0;
    bool converged = false;
    bool kept_warm_start = false;
};

/// 1/2 ||w||^2 + C sum_i v_i (1 - y_i (w.x_i + b))_+ over the problem rows.
template <typename Scalar>
Scalar weighted_hinge_primal(const BinaryProblem<Scalar>& problem, const BasicFeatureStore<Scalar>& store,
                             const Vector<Scalar>& w, Scalar b) {
    Scalar loss = 0;
    for (const auto& r : problem.rows) {
        if (r.weight == 0) continue;
        loss += r.weight * hinge_loss(Scalar(store.row(r.sample).dot(w) + b), r.y);
    }
    return Scalar(0.5) * w.squaredNorm() + problem.C * loss;
}

namespace detail {

/**
 * Exact minimizer over b of sum_i c_i (1 - y_i (s_i + b))_+.
 *
 * The function is convex piecewise linear with breakpoints y_i - s_i. A flat
 * minimizing segment resolves to its midpoint; a half-infinite flat segment
 * resolves to its finite end.
 */
template <typename Scalar>
Scalar optimal_bias(const Vector<Scalar>& scores, const Eigen::ArrayXi& y, const Vector<Scalar>& cost) {
    const Index k = scores.size();
    if (k == 0) return 0;
    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index(0));
    Vector<Scalar> breaks(k);
    Scalar slope = 0;
    Scalar total = 0;
    for (Index i = 0; i < k; ++i) {
        breaks(i) = static_cast<Scalar>(y(i)) - scores(i);
        if (y(i) > 0) slope -= cost(i);
        total += cost(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index c) { return breaks(a) < breaks(c); });
    const Scalar flat = Scalar(1e-12) * std::max(total, Scalar(1));
    if (slope >= -flat) return breaks(order.front());
    for (std::size_t p = 0; p < order.size(); ++p) {
        slope += cost(order[p]);
        if (slope > flat) return breaks(order[p]);
        if (slope >= -flat) {
            // Zero slope right of this breakpoint: flat until the next one.
            for (std::size_t q = p + 1; q < order.size(); ++q)
                if (cost(order[q]) > 0) return Scalar(0.5) * (breaks(order[p]) + breaks(order[q]));
            return breaks(order[p]);
        }
    }
    return breaks(order.back());
}

}  // namespace detail

/**
 * Trains one weighted soft-margin linear SVM with an unregularized bias.
 *
 * Solves the box- and equality-constrained dual with a primal-dual interior
 * point method, then sets b to the exact primal minimizer for the current w.
 * Iterates until the duality gap is below tol * max(1, |primal|), which
 * bounds the distance to the optimum.
 * Rows with zero weight are dropped before solving.
 */
template <typename Scalar>
BinaryResult<Scalar> train_weighted_binary(const BinaryProblem<Scalar>& problem,
                                           const BasicFeatureStore<Scalar>& store) {
    if (problem.rows.empty()) throw DomainError("weighted SVM problem has no rows");
    if (!(problem.C > 0)) throw DomainError("C must be positive");
    if (!(problem.tol > 0)) throw DomainError("solver tolerance must be positive");
    if (!store.features().allFinite()) throw DomainError("non-finite features in SVM problem");

    std::vector<const WeightedRow<Scalar>*> active;
    for (const auto& r : problem.rows) {
        if (r.sample < 0 || r.sample >= store.size()) throw DomainError("SVM row references an invalid sample");
        if (r.y != 1 && r.y != -1) throw DomainError("SVM labels must be +1 or -1");
        if (!(r.weight >= 0 && r.weight <= 1)) throw DomainError("SVM instance weights must lie in [0, 1]");
        if (r.weight > 0) active.push_back(&r);
    }

    const Index d = store.dim();
    const Index k = static_cast<Index>(active.size());
    BinaryResult<Scalar> result;
    result.w = Vector<Scalar>::Zero(d);

    RowMatrix<Scalar> x(k, d);
    Eigen::ArrayXi y(k);
    Vector<Scalar> upper(k);
    for (Index t = 0; t < k; ++t) {
        x.row(t) = store.row(active[static_cast<std::size_t>(t)]->sample);
        y(t) = active[static_cast<std::size_t>(t)]->y;
        upper(t) = problem.C * active[static_cast<std::size_t>(t)]->weight;
    }
    const Vector<Scalar> yd = y.cast<Scalar>().matrix();
    const RowMatrix<Scalar> vmat = yd.asDiagonal() * x;  // Q = V V^T
    Vector<Scalar>& w = result.w;

    auto primal_at = [&](const Vector<Scalar>& ww, Scalar b) {
        Scalar loss = (Scalar(1) - yd.array() * ((x * ww).array() + b)).max(Scalar(0)).matrix().dot(upper);
        return Scalar(0.5) * ww.squaredNorm() + loss;
    };
    // Lower bound from any box-feasible alpha: first restore y.alpha = 0 by shrinking the heavier side.
    auto dual_bound = [&](Vector<Scalar> a) {
        const Scalar pos = (yd.array() > 0).select(a.array(), Scalar(0)).sum();
        const Scalar neg = (yd.array() < 0).select(a.array(), Scalar(0)).sum();
        if (pos > neg && pos > 0)
            a = (yd.array() > 0).select(a.array() * (neg / pos), a.array()).matrix();
        else if (neg > pos && neg > 0)
            a = (yd.array() < 0).select(a.array() * (pos / neg), a.array()).matrix();
        const Vector<Scalar> ww = vmat.transpose() * a;
        return a.sum() - Scalar(0.5) * ww.squaredNorm();
    };
    auto certify = [&](const Vector<Scalar>& a) {
        w.noalias() = vmat.transpose() * a;
        const Vector<Scalar> s = x * w;
        result.b = detail::optimal_bias<Scalar>(s, y, upper);
        result.objective = primal_at(w, result.b);
        result.dual_objective = dual_bound(a);
        return result.objective - result.dual_objective <=
               problem.tol * std::max(Scalar(1), std::abs(result.objective));
    };

    long steps = 0;
    const bool one_sided = (y > 0).all() || (y < 0).all();
    if (k > 0 && one_sided) {
        // y.alpha = 0 forces alpha = 0, hence w = 0.
        result.converged = certify(Vector<Scalar>::Zero(k));
    } else if (k > 0) {
        // Primal-dual interior point (Mehrotra predictor-corrector) on
        //   min 1/2 a^T Q a - 1^T a  s.t.  y^T a = 0, 0 <= a <= upper.
        // Newton systems use Q = V V^T through the Woodbury identity, O(k d^2) each.
        Vector<Scalar> a = upper / Scalar(2);
        Vector<Scalar> z = Vector<Scalar>::Ones(k);     // multipliers of a >= 0
        Vector<Scalar> zeta = Vector<Scalar>::Ones(k);  // multipliers of a <= upper
        Scalar nu = 0;
        const long max_iterations = std::min<long>(problem.max_steps, 200);

        Vector<Scalar> dinv(k);
        Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> chol;
        auto m_inverse = [&](const Vector<Scalar>& rhs) -> Vector<Scalar> {
            const Vector<Scalar> t = dinv.cwiseProduct(rhs);
            const Vector<Scalar> inner = chol.solve(vmat.transpose() * t);
            return t - dinv.cwiseProduct(vmat * inner);
        };
        auto max_step = [](const Vector<Scalar>& v, const Vector<Scalar>& dv) {
            Scalar t = 1;
            for (Index i = 0; i < v.size(); ++i)
                if (dv(i) < 0) t = std::min(t, -v(i) / dv(i));
            return t;
        };

        while (true) {
            if (certify(a)) {
                result.converged = true;
                break;
            }
            if (steps >= max_iterations) break;
            ++steps;

            const Vector<Scalar> slack = upper - a;
            const Vector<Scalar> qa = vmat * w;
            const Vector<Scalar> rd = qa - Vector<Scalar>::Ones(k) + yd * nu - z + zeta;
            const Scalar rp = yd.dot(a);
            const Scalar mu = (a.dot(z) + slack.dot(zeta)) / static_cast<Scalar>(2 * k);

            dinv = (z.cwiseQuotient(a) + zeta.cwiseQuotient(slack)).cwiseInverse();
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g = vmat.transpose() * dinv.asDiagonal() * vmat;
            g.diagonal().array() += Scalar(1);
            chol.compute(g);
            const Vector<Scalar> my = m_inverse(yd);
            const Scalar ymy = yd.dot(my);

            struct Direction {
                Vector<Scalar> da, dz, dzeta;
                Scalar dnu;
            };
            auto direction = [&](const Vector<Scalar>& rz, const Vector<Scalar>& rzeta) {
                const Vector<Scalar> r = -rd + rz.cwiseQuotient(a) - rzeta.cwiseQuotient(slack);
                const Vector<Scalar> mr = m_inverse(r);
                Direction dir;
                dir.dnu = (yd.dot(mr) + rp) / ymy;
                dir.da = mr - my * dir.dnu;
                dir.dz = (rz - z.cwiseProduct(dir.da)).cwiseQuotient(a);
                dir.dzeta = (rzeta + zeta.cwiseProduct(dir.da)).cwiseQuotient(slack);
                return dir;
            };
            auto step_length = [&](const Direction& dir) {
                return std::min({max_step(a, dir.da), max_step(slack, Vector<Scalar>(-dir.da)), max_step(z, dir.dz),
                                 max_step(zeta, dir.dzeta)});
            };

            const Direction aff = direction(-a.cwiseProduct(z), -slack.cwiseProduct(zeta));
            const Scalar t_aff = step_length(aff);
            const Scalar mu_aff = ((a + t_aff * aff.da).dot(z + t_aff * aff.dz) +
                                   (slack - t_aff * aff.da).dot(zeta + t_aff * aff.dzeta)) /
                                  static_cast<Scalar>(2 * k);
            const Scalar sigma = std::pow(std::max(mu_aff, Scalar(0)) / mu, Scalar(3));
            const Vector<Scalar> target = Vector<Scalar>::Constant(k, sigma * mu);
            const Direction dir = direction(target - a.cwiseProduct(z) - aff.da.cwiseProduct(aff.dz),
                                            target - slack.cwiseProduct(zeta) + aff.da.cwiseProduct(aff.dzeta));
            const Scalar t = std::min(Scalar(1), Scalar(0.995) * step_length(dir));
            if (!(t > 0)) break;
            a += t * dir.da;
            z += t * dir.dz;
            zeta += t * dir.dzeta;
            nu += t * dir.dnu;
        }
    }
    result.steps = steps;
    if (k == 0) {
        result.b = 0;
        result.objective = 0;
        result.dual_objective = 0;
        result.converged = true;
    }

    if (problem.warm_start) {
        const auto& ws = *problem.warm_start;
        if (ws.w.size() != d) throw DomainError("warm start has wrong dimension");
        const Scalar warm = k > 0 ? primal_at(ws.w, ws.b) : Scalar(0.5) * ws.w.squaredNorm();
        if (warm < result.objective) {
            result.w = ws.w;
            result.b = ws.b;
            result.objective = warm;
            result.kept_warm_start = true;
        }
    }
    return result;
}

struct OneVsAllReport {
    std::vector<std::string> warnings;
    Vector<double> objectives;  // per-category primal after training
};

/**
 * Retrains every category independently on its assigned rows with v > 0.
 *
 * A category with no positive-weight positive row keeps its previous
 * hyperplane and produces a warning.
 */
template <typename Scalar>
OneVsAllReport train_one_vs_all(BasicClassifierBank<Scalar>& bank, const LabelState& labels,
                                const BasicWeightMatrix<Scalar>& weights, const BasicFeatureStore<Scalar>& store,
                                const EngineConfig& config) {
    const Index n = store.size();
    const Index m = bank.num_categories();
    if (labels.size() != n || weights.size() != n || labels.num_categories() != m || weights.num_categories() != m ||
        bank.dim() != store.dim())
        throw DomainError("one-vs-all inputs have mismatched dimensions");

    OneVsAllReport report;
    report.objectives = Vector<double>::Zero(m);
    for (Index j = 0; j < m; ++j) {
        BinaryProblem<Scalar> problem;
        problem.C = static_cast<Scalar>(config.C);
        problem.tol = static_cast<Scalar>(config.solver_tol);
        bool has_positive = false;
        for (Index i = 0; i < n; ++i) {
            if (!labels.is_assigned(i)) continue;
            const Scalar v = weights.v(i, j);
            if (v <= 0) continue;
            const int yv = labels.label(i, j);
            has_positive = has_positive || yv > 0;
            problem.rows.push_back({i, yv, v});
        }
        Hyperplane<Scalar> current{bank.weights.row(j).transpose(), bank.biases(j)};
        if (!has_positive) {
            report.warnings.push_back("category '" + bank.categories[static_cast<std::size_t>(j)] +
                                      "' has no weighted positives; hyperplane kept");
            report.objectives(j) = problem.rows.empty()
                                       ? 0.5 * static_cast<double>(current.w.squaredNorm())
                                       : static_cast<double>(weighted_hinge_primal(problem, store, current.w, current.b));
            continue;
        }
        problem.warm_start = current;
        const auto fit = train_weighted_binary(problem, store);
        if (!fit.converged)
            report.warnings.push_back("category '" + bank.categories[static_cast<std::size_t>(j)] +
                                      "' stopped before reaching the duality-gap tolerance");
        bank.weights.row(j) = fit.w.transpose();
        bank.biases(j) = fit.b;
        report.objectives(j) = static_cast<double>(fit.objective);
    }
    return report;
}

}  // namespace aspl

#endif  // ASPL_LINEAR_SVM_HPP
