#include "aspl/engine.hpp"

#include "aspl/linear_svm.hpp"
#include "aspl/pseudo_labeler.hpp"
#include "aspl/self_paced.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace aspl {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::aspl: return "ASPL";
        case Strategy::aspl_no_spl: return "ASPL_no_SPL";
        case Strategy::aspl_no_al: return "ASPL_no_AL";
        case Strategy::random: return "RANDOM";
        case Strategy::uncertainty: return "UNCERTAINTY";
        case Strategy::all: return "ALL";
    }
    return "ASPL";
}

Strategy parse_strategy(const std::string& name) {
    for (Strategy s : {Strategy::aspl, Strategy::aspl_no_spl, Strategy::aspl_no_al, Strategy::random,
                       Strategy::uncertainty, Strategy::all})
        if (to_string(s) == name) return s;
    throw DomainError("unrecognized strategy '" + name + "'");
}

std::string to_string(PinScope s) { return s == PinScope::row ? "row" : "annotated"; }

PinScope parse_pin_scope(const std::string& name) {
    if (name == "row") return PinScope::row;
    if (name == "annotated") return PinScope::annotated;
    throw DomainError("unrecognized pin scope '" + name + "'");
}

bool IterationRecord::operator==(const IterationRecord& o) const {
    auto tie = [](const IterationRecord& r) {
        return std::tie(r.t, r.categories, r.annotated_before, r.annotation_fraction, r.annotated_after, r.queries,
                        r.answered, r.verified, r.corrections, r.new_classes, r.injected, r.high_confidence,
                        r.pseudo_positive, r.unknown, r.pseudo_error, r.accuracy, r.objective, r.descent_ok,
                        r.pace_updated, r.eta, r.lambda, r.warnings);
    };
    return tie(*this) == tie(o);
}

double update_pace(double lambda, int t, double eta, const EngineConfig& config) {
    if (t <= 0) return config.lambda0;
    if (t <= config.tau) return lambda + config.alpha * eta;
    return lambda;
}

double rank1_accuracy(const ClassifierBank& bank, const FeatureStore& test) {
    if (test.size() == 0) throw DomainError("empty test split");
    const RowMatrix<double> scores = bank.scores(test.features());
    Index counted = 0;
    Index correct = 0;
    for (Index i = 0; i < test.size(); ++i) {
        const auto truth = test.truth_name(i);
        if (!truth) continue;
        ++counted;
        if (bank.num_categories() == 0) continue;
        Index best = 0;
        scores.row(i).maxCoeff(&best);
        if (bank.categories[static_cast<std::size_t>(best)] == *truth) ++correct;
    }
    if (counted == 0) throw DomainError("test split has no samples with known truth");
    return static_cast<double>(correct) / static_cast<double>(counted);
}

std::vector<double> annotated_accuracy(const ClassifierBank& bank, const FeatureStore& store,
                                       const LabelState& labels) {
    const Index m = bank.num_categories();
    std::vector<double> eta(static_cast<std::size_t>(m), 0.0);
    const auto annotated = labels.annotated();
    if (annotated.empty()) return eta;
    const RowMatrix<double> scores = bank.scores(store.features());
    for (Index j = 0; j < m; ++j) {
        Index correct = 0;
        for (Index i : annotated) {
            const int predicted = scores(i, j) > 0 ? 1 : -1;
            correct += predicted == labels.label(i, j) ? 1 : 0;
        }
        eta[static_cast<std::size_t>(j)] = static_cast<double>(correct) / static_cast<double>(annotated.size());
    }
    return eta;
}

std::uint64_t fingerprint(const FeatureStore& store) {
    // FNV-1a over the feature bytes and the shape.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t k = 0; k < len; ++k) h = (h ^ b[k]) * 1099511628211ull;
    };
    const Index n = store.size(), d = store.dim();
    mix(&n, sizeof n);
    mix(&d, sizeof d);
    mix(store.features().data(), static_cast<std::size_t>(n * d) * sizeof(double));
    return h;
}

Engine::Engine(FeatureStore train, std::optional<FeatureStore> test, EngineConfig config, Strategy strategy,
               Oracle& oracle, NoiseSpec noise)
    : train_(std::move(train)),
      test_(std::move(test)),
      config_(config),
      strategy_(strategy),
      noise_(noise),
      oracle_(&oracle),
      rng_(config.seed) {
    config_.validate();
    if (test_ && test_->dim() != train_.dim()) throw DomainError("train and test feature dimensions differ");
}

std::optional<Index> Engine::truth_in_bank(Index i) const {
    const auto name = train_.truth_name(i);
    if (!name) return std::nullopt;
    return bank_.find(*name);
}

namespace {

/// Fisher-Yates driven by raw engine output so runs replay identically everywhere.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[static_cast<std::size_t>(rng() % k)]);
}

}  // namespace

void Engine::initialize(int per_class, const std::vector<std::string>& withheld) {
    if (initialized_) throw DomainError("engine already initialized");
    if (per_class < 0) throw DomainError("initial annotations per class must be non-negative");
    const Index n = train_.size();

    std::vector<std::string> seen;
    if (train_.has_truth())
        for (const auto& name : train_.category_names())
            if (std::find(withheld.begin(), withheld.end(), name) == withheld.end()) seen.push_back(name);
    bank_ = ClassifierBank(train_.dim(), seen, config_.lambda0);
    labels_ = LabelState(n, bank_.num_categories());
    weights_ = WeightMatrix(n, bank_.num_categories());

    std::vector<Index> chosen;
    if (strategy_ == Strategy::all) {
        for (Index i = 0; i < n; ++i) chosen.push_back(i);
    } else if (train_.has_truth()) {
        for (const auto& name : seen) {
            std::vector<Index> members;
            for (Index i = 0; i < n; ++i)
                if (train_.truth_name(i) == name) members.push_back(i);
            shuffle(members, rng_);
            if (static_cast<int>(members.size()) > per_class) members.resize(static_cast<std::size_t>(per_class));
            chosen.insert(chosen.end(), members.begin(), members.end());
        }
    } else {
        std::vector<Index> all(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
        shuffle(all, rng_);
        const auto take = std::min<std::size_t>(all.size(), static_cast<std::size_t>(per_class * config_.batch_size));
        chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take));
    }

    const auto outcome = annotate_batch(chosen, *oracle_, bank_, train_, labels_, weights_, config_.pin_scope);
    if (!outcome.new_class_requests.empty())
        handle_new_classes(outcome.new_class_requests, train_, labels_, weights_, bank_, *oracle_, config_);

    if (noise_.initial > 0 && train_.has_truth() && strategy_ != Strategy::all) {
        const auto extra = static_cast<Index>(std::lround(noise_.initial * per_class));
        for (Index j = 0; j < bank_.num_categories(); ++j) inject_noise(extra, j);
    }
    if (uses_spl() == false)
        for (Index i = 0; i < n; ++i)
            if (weights_.is_pinned(i)) weights_.v.row(i).setOnes();
    initialized_ = true;
}

Index Engine::inject_noise(Index count, std::optional<Index> forced_category) {
    if (count <= 0 || bank_.num_categories() < 1) return 0;
    auto pool = labels_.unannotated();
    shuffle(pool, rng_);
    Index injected = 0;
    for (Index i : pool) {
        if (injected == count) break;
        const auto truth = truth_in_bank(i);
        Index wrong;
        if (forced_category) {
            if (truth == forced_category) continue;
            wrong = *forced_category;
        } else {
            std::vector<Index> options;
            for (Index j = 0; j < bank_.num_categories(); ++j)
                if (truth != j) options.push_back(j);
            if (options.empty()) continue;
            wrong = options[static_cast<std::size_t>(rng_() % options.size())];
        }
        apply_annotation(i, wrong, labels_, weights_, config_.pin_scope);
        ++injected;
    }
    return injected;
}

double Engine::objective() const { return aspl_objective(bank_, train_, labels_, weights_, config_); }

std::vector<Index> Engine::select_queries() {
    switch (strategy_) {
        case Strategy::aspl:
        case Strategy::aspl_no_spl:
            return select_low_confidence(bank_, train_, labels_, config_.batch_size, config_.ambiguity_min_positives);
        case Strategy::random: return select_random(labels_, config_.batch_size, rng_);
        case Strategy::uncertainty: return select_least_confident(bank_, train_, labels_, config_.batch_size);
        case Strategy::aspl_no_al:
        case Strategy::all: return {};
    }
    return {};
}

void Engine::check_curriculum() const {
    labels_.audit();
    for (Index i = 0; i < labels_.size(); ++i) {
        if (weights_.is_pinned(i) != labels_.is_annotated(i))
            throw DomainError("curriculum marker disagrees with the annotated set at sample " + std::to_string(i));
        if (weights_.is_pinned(i))
            if (auto j = labels_.positive_category(i); j && weights_.v(i, *j) != 1.0)
                throw DomainError("annotated sample " + std::to_string(i) + " is not pinned to weight 1");
    }
    if ((weights_.v.array() < 0).any() || (weights_.v.array() > 1).any())
        throw DomainError("weights left [0, 1]");
}

const IterationRecord& Engine::run_iteration() {
    if (!initialized_) throw DomainError("engine not initialized");
    const auto started = std::chrono::steady_clock::now();
    const Index n = train_.size();
    IterationRecord rec;
    rec.t = ++bank_.iteration;
    rec.categories = bank_.num_categories();
    rec.annotated_before = labels_.count(Provenance::annotated);
    rec.annotation_fraction = static_cast<double>(rec.annotated_before) / static_cast<double>(n);
    if (labels_.unannotated().empty()) exhausted_ = true;

    const double slack = config_.solver_tol;
    auto within = [&](double after, double before) { return after <= before + slack * std::max(1.0, std::abs(before)); };

    // (2) classifiers
    rec.objective[0] = objective();
    auto fit = train_one_vs_all(bank_, labels_, weights_, train_, config_);
    rec.warnings = std::move(fit.warnings);
    rec.objective[1] = objective();
    if (test_) rec.accuracy = rank1_accuracy(bank_, *test_);

    if (uses_spl()) {
        // (3) weights, jointly with candidate labels for the free rows
        auto update = update_weights(bank_, train_, labels_, weights_.pinned, config_);
        weights_ = std::move(update.weights);
        LabelState candidate = labels_;
        for (Index i = 0; i < n; ++i)
            if (!weights_.is_pinned(i))
                candidate.assign_row(i, update.candidates.row(i).cast<int>().transpose(), Provenance::pseudo);
        rec.objective[2] = aspl_objective(bank_, train_, candidate, weights_, config_);

        // (4) pseudo-labels for S, (5) U
        const auto high = select_high_confidence(weights_, labels_, config_.pseudo_cap);
        labels_ = pseudo_label_batch(high, bank_, train_, weights_, std::move(labels_));
        rec.unknown = static_cast<Index>(refresh_unknown_set(high, labels_).size());
        rec.objective[3] = objective();
        rec.high_confidence = static_cast<Index>(high.size());

        // Error rate over the positive pseudo-labels; all-negative rows make no category claim.
        Index errors = 0;
        for (Index i : high) {
            const auto got = labels_.positive_category(i);
            if (!got) continue;
            ++rec.pseudo_positive;
            if (train_.has_truth() && got != truth_in_bank(i)) ++errors;
        }
        if (train_.has_truth() && rec.pseudo_positive > 0)
            rec.pseudo_error = static_cast<double>(errors) / static_cast<double>(rec.pseudo_positive);
    } else {
        rec.objective[2] = rec.objective[3] = rec.objective[1];
        rec.unknown = static_cast<Index>(labels_.unknown_set().size());
    }
    rec.descent_ok = within(rec.objective[1], rec.objective[0]) && within(rec.objective[2], rec.objective[1]) &&
                     within(rec.objective[3], rec.objective[2]);

    // (6) verification
    std::vector<NewClassRequest> requests;
    if (verification_ && config_.verify_count > 0) {
        auto report = verify_annotations(bank_, train_, labels_, weights_, *oracle_, config_.verify_count,
                                         config_.pin_scope);
        rec.verified = report.queried;
        rec.corrections = std::move(report.corrections);
        requests = std::move(report.new_class_requests);
        rec.warnings.insert(rec.warnings.end(), report.warnings.begin(), report.warnings.end());
    }

    // (7) low-confidence annotation and new classes
    const auto selected = select_queries();
    const auto outcome = annotate_batch(selected, *oracle_, bank_, train_, labels_, weights_, config_.pin_scope);
    rec.queries = outcome.requested;
    rec.answered = outcome.answered;
    requests.insert(requests.end(), outcome.new_class_requests.begin(), outcome.new_class_requests.end());
    bool loop_back = false;
    if (!requests.empty()) {
        auto created = handle_new_classes(requests, train_, labels_, weights_, bank_, *oracle_, config_);
        rec.queries += created.queries;
        rec.answered += created.queries;
        rec.new_classes = std::move(created.created);
        rec.warnings.insert(rec.warnings.end(), created.warnings.begin(), created.warnings.end());
        loop_back = !rec.new_classes.empty();
    }

    if (noise_.midrun > 0 && rec.t == noise_.inject_at && train_.has_truth())
        rec.injected = inject_noise(
            static_cast<Index>(std::lround(noise_.midrun * static_cast<double>(labels_.count(Provenance::annotated)))),
            std::nullopt);

    if (!uses_spl())
        for (Index i = 0; i < n; ++i)
            if (weights_.is_pinned(i)) weights_.v.row(i).setOnes();

    // (8) feature refresh and pace, every T iterations
    if (!loop_back && rec.t % config_.refresh_interval == 0) {
        if (refresh_)
            if (auto replacement = refresh_(train_, labels_)) train_ = train_.with_features(std::move(*replacement));
        rec.eta = annotated_accuracy(bank_, train_, labels_);
        for (Index j = 0; j < bank_.num_categories(); ++j)
            bank_.pace(j) = update_pace(bank_.pace(j), rec.t, rec.eta[static_cast<std::size_t>(j)], config_);
        rec.pace_updated = true;
    }

    rec.lambda.assign(bank_.pace.data(), bank_.pace.data() + bank_.pace.size());
    rec.annotated_after = labels_.count(Provenance::annotated);
    check_curriculum();
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    ledger_.records.push_back(std::move(rec));
    return ledger_.records.back();
}

bool Engine::done() const {
    return exhausted_ || bank_.iteration >= config_.max_iters;
}

void Engine::run() {
    while (!done()) run_iteration();
}

EngineState Engine::snapshot() const {
    EngineState s;
    s.config = config_;
    s.strategy = strategy_;
    s.noise = noise_;
    s.bank = bank_;
    s.labels = labels_;
    s.weights = weights_;
    s.ledger = ledger_;
    std::ostringstream os;
    os << rng_;
    s.rng_state = os.str();
    s.oracle_state = oracle_->save_state();
    s.initialized = initialized_;
    s.exhausted = exhausted_;
    s.dataset_fingerprint = fingerprint(train_);
    return s;
}

void Engine::restore(const EngineState& s) {
    if (s.dataset_fingerprint != fingerprint(train_))
        throw DomainError("checkpoint was taken on a different dataset");
    if (s.labels.size() != train_.size() || s.weights.size() != train_.size() || s.bank.dim() != train_.dim())
        throw DomainError("checkpoint dimensions do not match the dataset");
    std::mt19937_64 rng;
    std::istringstream is(s.rng_state);
    is >> rng;
    if (!is) throw DomainError("corrupt RNG state in checkpoint");
    oracle_->load_state(s.oracle_state);
    config_ = s.config;
    config_.validate();
    strategy_ = s.strategy;
    noise_ = s.noise;
    bank_ = s.bank;
    labels_ = s.labels;
    weights_ = s.weights;
    ledger_ = s.ledger;
    rng_ = rng;
    initialized_ = s.initialized;
    exhausted_ = s.exhausted;
}

}  // namespace aspl
