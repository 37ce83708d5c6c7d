#include "aspl/oracle.hpp"

#include <sstream>

namespace aspl {

namespace {
constexpr std::string_view kNewPrefix = "new:";
constexpr std::string_view kUnknown = "unknown";
}  // namespace

std::string to_string(const OracleLabel& label, std::span<const std::string> categories) {
    if (const auto* k = std::get_if<KnownCategory>(&label)) {
        if (k->index < 0 || k->index >= static_cast<Index>(categories.size()))
            throw DomainError("oracle category index out of range");
        return categories[static_cast<std::size_t>(k->index)];
    }
    if (const auto* n = std::get_if<NewCategory>(&label)) return std::string(kNewPrefix) + n->name;
    return std::string(kUnknown);
}

OracleLabel parse_oracle_label(const std::string& text, std::span<const std::string> categories) {
    if (text == kUnknown) return UnknownCategory{};
    std::string name = text;
    if (text.starts_with(kNewPrefix)) name = text.substr(kNewPrefix.size());
    if (name.empty()) throw DomainError("empty category name");
    for (std::size_t j = 0; j < categories.size(); ++j)
        if (categories[j] == name) return KnownCategory{static_cast<Index>(j)};
    if (!text.starts_with(kNewPrefix)) throw DomainError("unknown category '" + text + "'");
    return NewCategory{name};
}

std::optional<OracleAnswer> Oracle::label(const Query& q, std::span<const std::string> categories) {
    Query copy = q;
    copy.kind = QueryKind::label;
    auto answers = answer(std::span<const Query>(&copy, 1), categories);
    if (answers.empty()) return std::nullopt;
    return answers.front();
}

std::optional<OracleAnswer> Oracle::verify(const Query& q, std::span<const std::string> categories) {
    Query copy = q;
    copy.kind = QueryKind::verify;
    auto answers = answer(std::span<const Query>(&copy, 1), categories);
    if (answers.empty()) return std::nullopt;
    return answers.front();
}

SimulatedOracle::SimulatedOracle(const FeatureStore& store, std::uint64_t seed, double label_noise,
                                 double verify_noise)
    : store_(&store), rng_(seed), label_noise_(label_noise), verify_noise_(verify_noise) {
    if (!store.has_truth()) throw DomainError("simulated oracle needs ground truth");
}

OracleLabel SimulatedOracle::truth_label(Index i, std::span<const std::string> categories) const {
    const auto name = store_->truth_name(i);
    if (!name) return UnknownCategory{};
    for (std::size_t j = 0; j < categories.size(); ++j)
        if (categories[j] == *name) return KnownCategory{static_cast<Index>(j)};
    return NewCategory{*name};
}

OracleLabel SimulatedOracle::noisy(Index i, double p, std::span<const std::string> categories) {
    OracleLabel truth = truth_label(i, categories);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng_) >= p) return truth;
    std::vector<Index> wrong;
    for (Index j = 0; j < static_cast<Index>(categories.size()); ++j)
        if (truth != OracleLabel{KnownCategory{j}}) wrong.push_back(j);
    if (wrong.empty()) return truth;
    std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
    return KnownCategory{wrong[pick(rng_)]};
}

std::vector<OracleAnswer> SimulatedOracle::answer(std::span<const Query> queries,
                                                  std::span<const std::string> categories) {
    std::vector<OracleAnswer> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        if (q.sample < 0 || q.sample >= store_->size()) throw DomainError("oracle query for unknown sample");
        OracleAnswer a;
        a.sample = q.sample;
        a.sample_id = q.sample_id.empty() ? store_->sample_id(q.sample) : q.sample_id;
        if (q.kind == QueryKind::verify) {
            a.category = noisy(q.sample, verify_noise_, categories);
            a.is_correction = !q.claimed || a.category != OracleLabel{KnownCategory{*q.claimed}};
        } else {
            a.category = noisy(q.sample, label_noise_, categories);
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::string SimulatedOracle::save_state() const {
    std::ostringstream os;
    os << rng_;
    return os.str();
}

void SimulatedOracle::load_state(const std::string& state) {
    std::istringstream is(state);
    is >> rng_;
    if (!is) throw DomainError("corrupt simulated-oracle state");
}

}  // namespace aspl
