#include "aspl/active_query.hpp"

#include "aspl/linear_svm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>

namespace aspl {

namespace {

double max_score(const RowMatrix<double>& scores, Index i) {
    return scores.cols() > 0 ? scores.row(i).maxCoeff() : 0.0;
}

std::vector<Index> rank_by_uncertainty(const RowMatrix<double>& scores, std::vector<Index> pool) {
    std::stable_sort(pool.begin(), pool.end(), [&](Index a, Index b) {
        return std::abs(max_score(scores, a)) < std::abs(max_score(scores, b));
    });
    return pool;
}

}  // namespace

std::vector<Index> select_low_confidence(const ClassifierBank& bank, const FeatureStore& store,
                                         const LabelState& labels, int batch, int min_positives) {
    if (batch <= 0) return {};
    const RowMatrix<double> scores = bank.scores(store.features());

    struct Candidate {
        Index sample;
        Index positives;
        double gap;
    };
    std::vector<Candidate> ambiguous;
    std::vector<Index> rest;
    for (Index i : labels.unannotated()) {
        const Index positives = (scores.row(i).array() > 0).count();
        if (positives >= min_positives && positives >= 2) {
            Vector<double> s = scores.row(i).transpose();
            std::partial_sort(s.data(), s.data() + 2, s.data() + s.size(), std::greater<>());
            ambiguous.push_back({i, positives, s(0) - s(1)});
        } else {
            rest.push_back(i);
        }
    }
    std::stable_sort(ambiguous.begin(), ambiguous.end(), [](const Candidate& a, const Candidate& b) {
        if (a.positives != b.positives) return a.positives > b.positives;
        return a.gap < b.gap;
    });

    std::vector<Index> out;
    for (const auto& c : ambiguous) {
        if (static_cast<int>(out.size()) == batch) return out;
        out.push_back(c.sample);
    }
    for (Index i : rank_by_uncertainty(scores, std::move(rest))) {
        if (static_cast<int>(out.size()) == batch) break;
        out.push_back(i);
    }
    return out;
}

std::vector<Index> select_least_confident(const ClassifierBank& bank, const FeatureStore& store,
                                          const LabelState& labels, int batch) {
    if (batch <= 0) return {};
    auto ranked = rank_by_uncertainty(bank.scores(store.features()), labels.unannotated());
    if (static_cast<int>(ranked.size()) > batch) ranked.resize(static_cast<std::size_t>(batch));
    return ranked;
}

std::vector<Index> select_random(const LabelState& labels, int batch, std::mt19937_64& rng) {
    if (batch <= 0) return {};
    auto pool = labels.unannotated();
    // Partial Fisher-Yates with explicit draws keeps the stream identical across standard libraries.
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(batch));
    for (std::size_t k = 0; k < take; ++k) {
        const std::size_t r = k + static_cast<std::size_t>(rng() % (pool.size() - k));
        std::swap(pool[k], pool[r]);
    }
    pool.resize(take);
    return pool;
}

Query make_query(const ClassifierBank& bank, const FeatureStore& store, Index i, QueryKind kind,
                 std::optional<Index> claimed) {
    Query q;
    q.sample = i;
    q.sample_id = store.sample_id(i);
    q.kind = kind;
    q.claimed = claimed;
    const Vector<double> s = bank.weights * store.row(i).transpose() + bank.biases;
    q.scores.assign(s.data(), s.data() + s.size());
    const Index shown = std::min<Index>(store.dim(), 8);
    for (Index k = 0; k < shown; ++k) q.feature_summary.push_back(store.features()(i, k));
    return q;
}

void apply_annotation(Index i, std::optional<Index> category, LabelState& labels, WeightMatrix& weights,
                      PinScope scope) {
    labels.assign(i, category, Provenance::annotated);
    weights.pinned[static_cast<std::size_t>(i)] = true;
    if (scope == PinScope::row)
        weights.v.row(i).setOnes();
    else if (category)
        weights.v(i, *category) = 1;
}

VerificationReport verify_annotations(const ClassifierBank& bank, const FeatureStore& store, LabelState& labels,
                                      WeightMatrix& weights, Oracle& oracle, int count, PinScope scope) {
    VerificationReport report;
    if (count <= 0) return report;

    const RowMatrix<double> scores = bank.scores(store.features());
    std::vector<std::pair<Index, Index>> annotated;  // (sample, category)
    for (Index i : labels.annotated())
        if (auto j = labels.positive_category(i)) annotated.emplace_back(i, *j);
    std::stable_sort(annotated.begin(), annotated.end(),
                     [&](const auto& a, const auto& b) { return scores(a.first, a.second) < scores(b.first, b.second); });
    if (static_cast<int>(annotated.size()) > count) annotated.resize(static_cast<std::size_t>(count));
    if (annotated.empty()) return report;

    std::vector<Query> queries;
    for (const auto& [i, j] : annotated) queries.push_back(make_query(bank, store, i, QueryKind::verify, j));
    std::vector<OracleAnswer> answers;
    try {
        answers = oracle.answer(queries, bank.categories);
    } catch (const OracleUnavailable& e) {
        report.warnings.push_back(std::string("verification skipped: ") + e.what());
        return report;
    }
    report.queried = static_cast<Index>(answers.size());

    std::map<Index, Index> claimed;
    for (const auto& [i, j] : annotated) claimed[i] = j;
    for (const auto& a : answers) {
        const auto it = claimed.find(a.sample);
        if (it == claimed.end()) continue;
        const OracleLabel was = KnownCategory{it->second};
        if (a.category == was) continue;
        Correction c{a.sample, it->second, to_string(a.category, bank.categories)};
        if (const auto* k = std::get_if<KnownCategory>(&a.category)) {
            apply_annotation(a.sample, k->index, labels, weights, scope);
        } else {
            apply_annotation(a.sample, std::nullopt, labels, weights, scope);
            if (const auto* n = std::get_if<NewCategory>(&a.category))
                report.new_class_requests.push_back({a.sample, n->name});
        }
        report.corrections.push_back(std::move(c));
    }
    return report;
}

AnnotationOutcome annotate_batch(const std::vector<Index>& selected, Oracle& oracle, const ClassifierBank& bank,
                                 const FeatureStore& store, LabelState& labels, WeightMatrix& weights,
                                 PinScope scope) {
    AnnotationOutcome out;
    if (selected.empty()) return out;
    std::set<Index> seen;
    for (Index i : selected) {
        if (i < 0 || i >= labels.size()) throw DomainError("sample index out of range: " + std::to_string(i));
        if (!seen.insert(i).second) throw DomainError("sample " + std::to_string(i) + " appears twice in the batch");
        if (labels.is_annotated(i)) throw DomainError("sample " + std::to_string(i) + " is already annotated");
    }
    std::vector<Query> queries;
    for (Index i : selected) queries.push_back(make_query(bank, store, i, QueryKind::label));
    out.requested = static_cast<Index>(queries.size());
    const auto answers = oracle.answer(queries, bank.categories);
    for (const auto& a : answers) {
        if (!seen.contains(a.sample)) continue;
        ++out.answered;
        if (const auto* k = std::get_if<KnownCategory>(&a.category)) {
            apply_annotation(a.sample, k->index, labels, weights, scope);
            out.annotated.push_back(a.sample);
        } else if (std::holds_alternative<UnknownCategory>(a.category)) {
            apply_annotation(a.sample, std::nullopt, labels, weights, scope);
            out.annotated.push_back(a.sample);
        } else {
            out.new_class_requests.push_back({a.sample, std::get<NewCategory>(a.category).name});
        }
    }
    return out;
}

namespace {

/// K nearest candidates to `seed` by Euclidean distance, ties by index.
std::vector<Index> nearest(const FeatureStore& store, Index seed, const std::vector<Index>& candidates, int k) {
    std::vector<std::pair<double, Index>> d;
    d.reserve(candidates.size());
    for (Index c : candidates) d.emplace_back((store.row(c) - store.row(seed)).squaredNorm(), c);
    const std::size_t take = std::min(d.size(), static_cast<std::size_t>(std::max(k, 0)));
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end());
    std::vector<Index> out;
    for (std::size_t p = 0; p < take; ++p) out.push_back(d[p].second);
    return out;
}

}  // namespace

NewClassReport handle_new_classes(const std::vector<NewClassRequest>& requests, const FeatureStore& store,
                                  LabelState& labels, WeightMatrix& weights, ClassifierBank& bank, Oracle& oracle,
                                  const EngineConfig& config) {
    NewClassReport report;
    std::vector<std::string> order;
    std::map<std::string, std::vector<Index>> seeds;
    auto enqueue = [&](const std::string& name, Index sample) {
        if (!seeds.contains(name)) order.push_back(name);
        auto& s = seeds[name];
        if (std::find(s.begin(), s.end(), sample) == s.end()) s.push_back(sample);
    };
    for (const auto& r : requests) enqueue(r.name, r.sample);

    for (std::size_t next = 0; next < order.size(); ++next) {
        const std::string name = order[next];
        const auto& class_seeds = seeds[name];
        if (class_seeds.empty()) throw DomainError("new class '" + name + "' has no seed sample");

        if (const auto existing = bank.find(name)) {
            for (Index i : class_seeds) apply_annotation(i, *existing, labels, weights, config.pin_scope);
            report.annotated += static_cast<Index>(class_seeds.size());
            continue;
        }

        // (1) neighbours of every seed, searched in the unannotated part of U.
        std::vector<Index> pool;
        for (Index i : labels.unknown_set())
            if (!labels.is_annotated(i) && std::find(class_seeds.begin(), class_seeds.end(), i) == class_seeds.end())
                pool.push_back(i);
        if (pool.empty()) report.warnings.push_back("unknown set is empty; class '" + name + "' uses seeds only");
        std::vector<Index> neighbours;
        std::set<Index> taken;
        for (Index seed : class_seeds)
            for (Index c : nearest(store, seed, pool, config.neighbors))
                if (taken.insert(c).second) neighbours.push_back(c);

        // (2) enrich the positives through the oracle.
        std::vector<Index> positives = class_seeds;
        std::vector<std::pair<Index, std::optional<Index>>> others;
        if (!neighbours.empty()) {
            std::vector<Query> queries;
            for (Index i : neighbours) queries.push_back(make_query(bank, store, i, QueryKind::label));
            report.queries += static_cast<Index>(queries.size());
            for (const auto& a : oracle.answer(queries, bank.categories)) {
                if (!taken.contains(a.sample)) continue;
                if (const auto* n = std::get_if<NewCategory>(&a.category)) {
                    if (n->name == name)
                        positives.push_back(a.sample);
                    else
                        enqueue(n->name, a.sample);
                } else if (const auto* k = std::get_if<KnownCategory>(&a.category)) {
                    others.emplace_back(a.sample, k->index);
                } else {
                    others.emplace_back(a.sample, std::nullopt);
                }
            }
        }

        // (3) append the category and fit it; existing rows of the bank are not touched.
        const Index j = bank.add_category(name, config.lambda0);
        labels.add_category();
        weights.add_category();
        if (config.pin_scope == PinScope::row)
            for (Index i = 0; i < weights.size(); ++i)
                if (weights.is_pinned(i)) weights.v(i, j) = 1;
        for (Index i : positives) apply_annotation(i, j, labels, weights, config.pin_scope);
        for (const auto& [i, k] : others) apply_annotation(i, k, labels, weights, config.pin_scope);
        report.annotated += static_cast<Index>(positives.size() + others.size());

        BinaryProblem<double> problem;
        problem.C = config.C;
        problem.tol = config.solver_tol;
        for (Index i : labels.annotated()) problem.rows.push_back({i, labels.label(i, j), 1.0});
        const auto fit = train_weighted_binary(problem, store);
        bank.weights.row(j) = fit.w.transpose();
        bank.biases(j) = fit.b;
        report.created.push_back(name);
    }
    return report;
}

}  // namespace aspl
