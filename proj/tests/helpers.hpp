#ifndef ASPL_TEST_HELPERS_HPP
#define ASPL_TEST_HELPERS_HPP

#include "aspl/core.hpp"

#include <random>
#include <string>
#include <vector>

namespace aspl::test {

inline std::vector<std::string> ids(Index n) {
    std::vector<std::string> out;
    for (Index i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
    return out;
}

inline FeatureStore store_from(const RowMatrix<double>& x) { return FeatureStore(x, ids(x.rows())); }

inline RowMatrix<double> gaussian(Index n, Index d, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix<double> x(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < d; ++c) x(i, c) = normal(rng);
    return x;
}

}  // namespace aspl::test

#endif  // ASPL_TEST_HELPERS_HPP
