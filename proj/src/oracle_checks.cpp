#include "aspl/oracle_checks.hpp"

#include "aspl/pseudo_labeler.hpp"
#include "aspl/self_paced.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace aspl {

namespace {

double hinge(double margin) { return margin > 0 ? margin : 0; }

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

double brute_force_label_objective(const Vector<double>& scores, const Vector<double>& weights) {
    const Index m = scores.size();
    double best = 0;
    for (Index k = -1; k < m; ++k) {
        double total = 0;
        for (Index j = 0; j < m; ++j) {
            const double y = j == k ? 1.0 : -1.0;
            total += weights(j) * hinge(1.0 - y * scores(j));
        }
        if (k == -1 || total < best) best = total;
    }
    return best;
}

double grid_weight(double loss, double c, double lambda, double step) {
    const auto steps = static_cast<long>(std::llround(1.0 / step));
    double best_v = 0, best = 0;
    for (long k = 0; k <= steps; ++k) {
        const double v = static_cast<double>(k) / static_cast<double>(steps);
        const double f = c * v * loss + lambda * (0.5 * v * v - v);
        if (k == 0 || f < best) best = f, best_v = v;
    }
    return best_v;
}

OracleSuiteReport check_label_solver(int cases, std::uint64_t seed, double tolerance) {
    OracleSuiteReport r;
    r.name = "pseudo-label solver vs enumeration";
    r.cases = cases;
    Stopwatch clock;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size(1, 6);
    std::uniform_real_distribution<double> score(-3.0, 3.0), weight(0.0, 1.0), coin(0.0, 1.0);
    for (int c = 0; c < cases; ++c) {
        const int m = size(rng);
        Theorem1Input<double> in{Vector<double>(m), Vector<double>(m)};
        for (int j = 0; j < m; ++j) {
            in.scores(j) = coin(rng) < 0.1 ? 0.0 : score(rng);
            in.weights(j) = coin(rng) < 0.2 ? 0.0 : weight(rng);
        }
        const double got = solve_theorem1(in).objective;
        const double want = brute_force_label_objective(in.scores, in.weights);
        const double err = std::abs(got - want);
        r.max_error = std::max(r.max_error, err);
        if (!(err <= tolerance)) {
            if (r.failures++ == 0) {
                std::ostringstream os;
                os.precision(17);
                os << "case " << c << ": solver " << got << " vs enumeration " << want;
                r.first_failure = os.str();
            }
        }
    }
    r.seconds = clock.seconds();
    return r;
}

OracleSuiteReport check_weight_closed_form(int cases, std::uint64_t seed, double tolerance) {
    OracleSuiteReport r;
    r.name = "closed-form weight vs grid search";
    r.cases = cases;
    Stopwatch clock;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> loss(0.0, 3.0), cost(0.1, 5.0), pace(0.05, 3.0);
    for (int c = 0; c < cases; ++c) {
        const double l = loss(rng), C = cost(rng), lambda = pace(rng);
        const double got = spl_weight(l, C, lambda);
        const double want = grid_weight(l, C, lambda);
        const double err = std::abs(got - want);
        r.max_error = std::max(r.max_error, err);
        if (!(err <= tolerance) && r.failures++ == 0) {
            std::ostringstream os;
            os << "case " << c << ": l=" << l << " C=" << C << " lambda=" << lambda << " closed " << got << " grid "
               << want;
            r.first_failure = os.str();
        }
    }
    r.seconds = clock.seconds();
    return r;
}

OracleSuiteReport check_weight_axioms(int cases, std::uint64_t seed) {
    OracleSuiteReport r;
    r.name = "weight axioms";
    r.cases = cases;
    Stopwatch clock;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> loss(0.0, 4.0), cost(0.1, 5.0), pace(0.01, 3.0);
    auto fail = [&](int c, const std::string& what) {
        if (r.failures++ == 0) r.first_failure = "case " + std::to_string(c) + ": " + what;
    };
    for (int c = 0; c < cases; ++c) {
        double l1 = loss(rng), l2 = loss(rng);
        double p1 = pace(rng), p2 = pace(rng);
        if (l1 > l2) std::swap(l1, l2);
        if (p1 > p2) std::swap(p1, p2);
        const double C = cost(rng);
        const double a = spl_weight(l1, C, p1), b = spl_weight(l2, C, p1), d = spl_weight(l1, C, p2);
        if (a < b) fail(c, "weight increased with loss");
        if (d < a) fail(c, "weight decreased with pace");
        for (double v : {a, b, d})
            if (!(v >= 0 && v <= 1)) fail(c, "weight outside [0, 1]");
    }
    r.seconds = clock.seconds();
    return r;
}

}  // namespace aspl
