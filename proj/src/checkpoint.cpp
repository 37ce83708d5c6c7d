#include "aspl/io_service.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace aspl {

using Json = nlohmann::ordered_json;

namespace {

template <typename T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

Json record_to_json(const IterationRecord& r) {
    Json corrections = Json::array();
    for (const auto& c : r.corrections)
        corrections.push_back({{"sample", c.sample}, {"from", optional_json(c.from)}, {"to", c.to}});
    return Json{{"t", r.t},
                {"categories", r.categories},
                {"annotated_before", r.annotated_before},
                {"annotation_fraction", r.annotation_fraction},
                {"annotated_after", r.annotated_after},
                {"queries", r.queries},
                {"answered", r.answered},
                {"verified", r.verified},
                {"corrections", corrections},
                {"new_classes", r.new_classes},
                {"injected", r.injected},
                {"high_confidence", r.high_confidence},
                {"pseudo_positive", r.pseudo_positive},
                {"unknown", r.unknown},
                {"pseudo_error", optional_json(r.pseudo_error)},
                {"accuracy", optional_json(r.accuracy)},
                {"objective", r.objective},
                {"descent_ok", r.descent_ok},
                {"pace_updated", r.pace_updated},
                {"eta", r.eta},
                {"lambda", r.lambda},
                {"warnings", r.warnings}};
}

IterationRecord record_from_json(const Json& j) {
    IterationRecord r;
    r.t = j.at("t").get<int>();
    r.categories = j.at("categories").get<Index>();
    r.annotated_before = j.at("annotated_before").get<Index>();
    r.annotation_fraction = j.at("annotation_fraction").get<double>();
    r.annotated_after = j.at("annotated_after").get<Index>();
    r.queries = j.at("queries").get<Index>();
    r.answered = j.at("answered").get<Index>();
    r.verified = j.at("verified").get<Index>();
    for (const auto& c : j.at("corrections"))
        r.corrections.push_back({c.at("sample").get<Index>(), optional_from<Index>(c.at("from")), c.at("to").get<std::string>()});
    r.new_classes = j.at("new_classes").get<std::vector<std::string>>();
    r.injected = j.at("injected").get<Index>();
    r.high_confidence = j.at("high_confidence").get<Index>();
    r.pseudo_positive = j.at("pseudo_positive").get<Index>();
    r.unknown = j.at("unknown").get<Index>();
    r.pseudo_error = optional_from<double>(j.at("pseudo_error"));
    r.accuracy = optional_from<double>(j.at("accuracy"));
    r.objective = j.at("objective").get<std::array<double, 4>>();
    r.descent_ok = j.at("descent_ok").get<bool>();
    r.pace_updated = j.at("pace_updated").get<bool>();
    r.eta = j.at("eta").get<std::vector<double>>();
    r.lambda = j.at("lambda").get<std::vector<double>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
}

Json matrix_to_json(const RowMatrix<double>& m) {
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

RowMatrix<double> matrix_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
        throw CheckpointError("matrix payload has the wrong size");
    RowMatrix<double> m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

Json config_to_json(const EngineConfig& c) {
    return Json{{"C", c.C},
                {"lambda0", c.lambda0},
                {"alpha", c.alpha},
                {"tau", c.tau},
                {"refresh_interval", c.refresh_interval},
                {"verify_count", c.verify_count},
                {"neighbors", c.neighbors},
                {"batch_size", c.batch_size},
                {"pseudo_cap", optional_json(c.pseudo_cap)},
                {"seed", c.seed},
                {"solver_tol", c.solver_tol},
                {"max_iters", c.max_iters},
                {"ambiguity_min_positives", c.ambiguity_min_positives},
                {"pin_scope", to_string(c.pin_scope)}};
}

EngineConfig config_from_json(const Json& j) {
    EngineConfig c;
    c.C = j.at("C").get<double>();
    c.lambda0 = j.at("lambda0").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.tau = j.at("tau").get<int>();
    c.refresh_interval = j.at("refresh_interval").get<int>();
    c.verify_count = j.at("verify_count").get<int>();
    c.neighbors = j.at("neighbors").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.pseudo_cap = optional_from<int>(j.at("pseudo_cap"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.solver_tol = j.at("solver_tol").get<double>();
    c.max_iters = j.at("max_iters").get<int>();
    c.ambiguity_min_positives = j.at("ambiguity_min_positives").get<int>();
    c.pin_scope = parse_pin_scope(j.at("pin_scope").get<std::string>());
    return c;
}

Json state_to_json(const EngineState& s) {
    const auto n = s.labels.size(), m = s.labels.num_categories();
    std::vector<int> labels(static_cast<std::size_t>(n * m));
    std::vector<int> provenance(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        provenance[static_cast<std::size_t>(i)] = static_cast<int>(s.labels.provenance(i));
        for (Index j = 0; j < m; ++j) labels[static_cast<std::size_t>(i * m + j)] = s.labels.label(i, j);
    }
    Json ledger = Json::array();
    for (const auto& r : s.ledger.records) ledger.push_back(record_to_json(r));
    return Json{{"version", kCheckpointVersion},
                {"config", config_to_json(s.config)},
                {"strategy", to_string(s.strategy)},
                {"noise", {{"initial", s.noise.initial}, {"midrun", s.noise.midrun}, {"inject_at", s.noise.inject_at}}},
                {"bank",
                 {{"categories", s.bank.categories},
                  {"weights", matrix_to_json(s.bank.weights)},
                  {"biases", std::vector<double>(s.bank.biases.data(), s.bank.biases.data() + s.bank.biases.size())},
                  {"pace", std::vector<double>(s.bank.pace.data(), s.bank.pace.data() + s.bank.pace.size())},
                  {"iteration", s.bank.iteration}}},
                {"labels", {{"rows", n}, {"cols", m}, {"values", labels}, {"provenance", provenance}}},
                {"weights", {{"v", matrix_to_json(s.weights.v)}, {"pinned", s.weights.pinned}}},
                {"ledger", ledger},
                {"rng", s.rng_state},
                {"oracle", s.oracle_state},
                {"initialized", s.initialized},
                {"exhausted", s.exhausted},
                {"dataset_fingerprint", s.dataset_fingerprint}};
}

Vector<double> vector_from(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector<double>>(v.data(), static_cast<Index>(v.size()));
}

EngineState state_from_json(const Json& j) {
    EngineState s;
    s.config = config_from_json(j.at("config"));
    s.strategy = parse_strategy(j.at("strategy").get<std::string>());
    const auto& noise = j.at("noise");
    s.noise = {noise.at("initial").get<double>(), noise.at("midrun").get<double>(), noise.at("inject_at").get<int>()};

    const auto& bank = j.at("bank");
    s.bank.categories = bank.at("categories").get<std::vector<std::string>>();
    s.bank.weights = matrix_from_json(bank.at("weights"));
    s.bank.biases = vector_from(bank.at("biases"));
    s.bank.pace = vector_from(bank.at("pace"));
    s.bank.iteration = bank.at("iteration").get<int>();
    const auto m = static_cast<Index>(s.bank.categories.size());
    if (s.bank.weights.rows() != m || s.bank.biases.size() != m || s.bank.pace.size() != m)
        throw CheckpointError("classifier bank sizes disagree");

    const auto& labels = j.at("labels");
    const auto n = labels.at("rows").get<Index>();
    if (labels.at("cols").get<Index>() != m) throw CheckpointError("label matrix width disagrees with the bank");
    const auto values = labels.at("values").get<std::vector<int>>();
    const auto provenance = labels.at("provenance").get<std::vector<int>>();
    if (static_cast<Index>(values.size()) != n * m || static_cast<Index>(provenance.size()) != n)
        throw CheckpointError("label payload has the wrong size");
    s.labels = LabelState(n, m);
    for (Index i = 0; i < n; ++i) {
        const int p = provenance[static_cast<std::size_t>(i)];
        if (p == static_cast<int>(Provenance::none)) continue;
        if (p != static_cast<int>(Provenance::pseudo) && p != static_cast<int>(Provenance::annotated))
            throw CheckpointError("unknown provenance code");
        Eigen::VectorXi row(m);
        for (Index c = 0; c < m; ++c) row(c) = values[static_cast<std::size_t>(i * m + c)];
        s.labels.assign_row(i, row, static_cast<Provenance>(p));
    }
    s.labels.audit();

    const auto& weights = j.at("weights");
    s.weights.v = matrix_from_json(weights.at("v"));
    s.weights.pinned = weights.at("pinned").get<std::vector<bool>>();
    if (s.weights.v.rows() != n || s.weights.v.cols() != m || static_cast<Index>(s.weights.pinned.size()) != n)
        throw CheckpointError("weight payload has the wrong size");

    for (const auto& r : j.at("ledger")) s.ledger.records.push_back(record_from_json(r));
    s.rng_state = j.at("rng").get<std::string>();
    s.oracle_state = j.at("oracle").get<std::string>();
    s.initialized = j.at("initialized").get<bool>();
    s.exhausted = j.at("exhausted").get<bool>();
    s.dataset_fingerprint = j.at("dataset_fingerprint").get<std::uint64_t>();
    return s;
}

}  // namespace

void save_checkpoint(const EngineState& state, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw CheckpointError("cannot write " + tmp.string());
        out << state_to_json(state).dump() << '\n';
        if (!out.flush()) throw CheckpointError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

EngineState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw CheckpointError(path.string() + ": unreadable checkpoint (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("version")) throw CheckpointError(path.string() + ": not a checkpoint");
    const auto version = j.at("version");
    if (!version.is_number_integer() || version.get<int>() != kCheckpointVersion)
        throw CheckpointError(path.string() + ": incompatible checkpoint version " + version.dump() + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    try {
        return state_from_json(j);
    } catch (const Json::exception& e) {
        throw CheckpointError(path.string() + ": malformed checkpoint (" + e.what() + ")");
    } catch (const DomainError& e) {
        throw CheckpointError(path.string() + ": inconsistent checkpoint (" + e.what() + ")");
    }
}

std::string ledger_record_json(const IterationRecord& record) { return record_to_json(record).dump(); }

void write_ledger(const RunLedger& ledger, std::ostream& out) {
    for (const auto& r : ledger.records) out << ledger_record_json(r) << '\n';
}

RunLedger read_ledger(std::istream& in) {
    RunLedger ledger;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ledger.records.push_back(record_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw LoadError("ledger line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ledger;
}

void write_curves(const std::map<Strategy, std::vector<CurvePoint>>& curves, std::ostream& out) {
    auto num = [](double x) {
        std::array<char, 32> buf{};
        const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
        return std::string(buf.data(), end);
    };
    out << "strategy,t,runs,annotation_fraction,accuracy,queries,pseudo_error\n";
    for (const auto& [strategy, points] : curves)
        for (const auto& p : points)
            out << to_string(strategy) << ',' << p.t << ',' << p.runs << ',' << num(p.annotation_fraction) << ','
                << num(p.accuracy) << ',' << num(p.queries) << ',' << num(p.pseudo_error) << '\n';
}

}  // namespace aspl
