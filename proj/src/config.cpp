#include "aspl/io_service.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace aspl {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

template <typename T>
T parse_number(const std::string& text) {
    T value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || text.empty())
        throw DomainError("cannot parse '" + text + "'");
    return value;
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "on" || text == "1") return true;
    if (text == "false" || text == "off" || text == "0") return false;
    throw DomainError("expected true/false, got '" + text + "'");
}

std::string show(double x) {
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), end);
}
template <typename T>
std::string show_int(T x) {
    return std::to_string(x);
}

template <typename T, typename Access>
ConfigField number(std::string key, std::string help, Access access) {
    return {std::move(key), std::move(help),
            [access](ExperimentSpec& s, const std::string& v) { access(s) = parse_number<T>(v); },
            [access](const ExperimentSpec& s) {
                ExperimentSpec copy = s;
                const T x = access(copy);
                if constexpr (std::is_floating_point_v<T>)
                    return show(x);
                else
                    return show_int(x);
            }};
}

std::vector<ConfigField> build_fields() {
    std::vector<ConfigField> f;
    // EngineConfig
    f.push_back(number<double>("C", "hinge loss weight", [](ExperimentSpec& s) -> double& { return s.engine.C; }));
    f.push_back(number<double>("lambda0", "initial pace", [](ExperimentSpec& s) -> double& { return s.engine.lambda0; }));
    f.push_back(number<double>("alpha", "pace step", [](ExperimentSpec& s) -> double& { return s.engine.alpha; }));
    f.push_back(number<int>("tau", "last iteration that grows the pace", [](ExperimentSpec& s) -> int& { return s.engine.tau; }));
    f.push_back(number<int>("refresh_interval", "iterations between pace updates (T)",
                            [](ExperimentSpec& s) -> int& { return s.engine.refresh_interval; }));
    f.push_back(number<int>("verify_count", "annotations re-checked per iteration (L)",
                            [](ExperimentSpec& s) -> int& { return s.engine.verify_count; }));
    f.push_back(number<int>("neighbors", "neighbours queried per new-class seed (K)",
                            [](ExperimentSpec& s) -> int& { return s.engine.neighbors; }));
    f.push_back(number<int>("batch_size", "label queries per iteration (B)",
                            [](ExperimentSpec& s) -> int& { return s.engine.batch_size; }));
    f.push_back({"pseudo_cap", "max pseudo-labelled samples per iteration (none = unlimited)",
                 [](ExperimentSpec& s, const std::string& v) {
                     if (v == "none")
                         s.engine.pseudo_cap.reset();
                     else
                         s.engine.pseudo_cap = parse_number<int>(v);
                 },
                 [](const ExperimentSpec& s) {
                     return s.engine.pseudo_cap ? std::to_string(*s.engine.pseudo_cap) : std::string("none");
                 }});
    f.push_back(number<std::uint64_t>("seed", "base seed", [](ExperimentSpec& s) -> std::uint64_t& { return s.engine.seed; }));
    f.push_back(number<double>("solver_tol", "SVM duality-gap tolerance",
                               [](ExperimentSpec& s) -> double& { return s.engine.solver_tol; }));
    f.push_back(number<int>("max_iters", "iteration budget", [](ExperimentSpec& s) -> int& { return s.engine.max_iters; }));
    f.push_back(number<int>("ambiguity_min_positives", "positive scores that make a sample ambiguous",
                            [](ExperimentSpec& s) -> int& { return s.engine.ambiguity_min_positives; }));
    f.push_back({"pin_scope", "weights fixed at 1 for annotated samples: row or annotated",
                 [](ExperimentSpec& s, const std::string& v) { s.engine.pin_scope = parse_pin_scope(v); },
                 [](const ExperimentSpec& s) { return to_string(s.engine.pin_scope); }});
    // ExperimentSpec
    f.push_back(number<int>("clusters", "synthetic classes", [](ExperimentSpec& s) -> int& { return s.synthetic.clusters; }));
    f.push_back(number<int>("per_cluster", "synthetic samples per class",
                            [](ExperimentSpec& s) -> int& { return s.synthetic.per_cluster; }));
    f.push_back(number<int>("dim", "synthetic feature dimension", [](ExperimentSpec& s) -> int& { return s.synthetic.dim; }));
    f.push_back(number<double>("spread", "synthetic within-class standard deviation",
                               [](ExperimentSpec& s) -> double& { return s.synthetic.spread; }));
    f.push_back({"dataset", "dataset file (none = synthetic)",
                 [](ExperimentSpec& s, const std::string& v) {
                     if (v == "none" || v.empty())
                         s.dataset.reset();
                     else
                         s.dataset = v;
                 },
                 [](const ExperimentSpec& s) { return s.dataset.value_or("none"); }});
    f.push_back(number<double>("split", "train fraction", [](ExperimentSpec& s) -> double& { return s.split; }));
    f.push_back(number<int>("initial_per_class", "initial annotations per class (n0)",
                            [](ExperimentSpec& s) -> int& { return s.initial_per_class; }));
    f.push_back({"strategies", "comma-separated strategies",
                 [](ExperimentSpec& s, const std::string& v) {
                     s.strategies.clear();
                     std::istringstream in(v);
                     std::string name;
                     while (std::getline(in, name, ','))
                         if (!trim(name).empty()) s.strategies.push_back(parse_strategy(trim(name)));
                 },
                 [](const ExperimentSpec& s) {
                     std::string out;
                     for (Strategy x : s.strategies) out += (out.empty() ? "" : ",") + to_string(x);
                     return out;
                 }});
    f.push_back(number<double>("initial_noise", "wrong initial annotations per class, as a fraction of n0",
                               [](ExperimentSpec& s) -> double& { return s.noise.initial; }));
    f.push_back(number<double>("midrun_noise", "wrong annotations injected mid-run, as a fraction of the annotated set",
                               [](ExperimentSpec& s) -> double& { return s.noise.midrun; }));
    f.push_back(number<int>("inject_at", "iteration of the mid-run injection",
                            [](ExperimentSpec& s) -> int& { return s.noise.inject_at; }));
    f.push_back(number<double>("oracle_noise", "probability a label answer is wrong",
                               [](ExperimentSpec& s) -> double& { return s.oracle_noise; }));
    f.push_back({"verification", "re-check low-scoring annotations: true or false",
                 [](ExperimentSpec& s, const std::string& v) { s.verification = parse_bool(v); },
                 [](const ExperimentSpec& s) { return std::string(s.verification ? "true" : "false"); }});
    f.push_back(number<int>("repeats", "runs per strategy", [](ExperimentSpec& s) -> int& { return s.repeats; }));
    f.push_back(number<int>("withheld", "classes hidden from the initial bank",
                            [](ExperimentSpec& s) -> int& { return s.withheld; }));
    return f;
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = build_fields();
    return fields;
}

void apply_config_value(ExperimentSpec& spec, const std::string& key, const std::string& value) {
    for (const auto& f : config_fields())
        if (f.key == key) {
            try {
                f.set(spec, trim(value));
            } catch (const DomainError& e) {
                throw DomainError("config key '" + key + "': " + e.what());
            }
            return;
        }
    throw DomainError("unknown config key '" + key + "'");
}

void parse_config(ExperimentSpec& spec, std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError(source + ":" + std::to_string(line_no) + ": expected key=value");
        try {
            apply_config_value(spec, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const DomainError& e) {
            throw DomainError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void load_config(ExperimentSpec& spec, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config " + path.string());
    parse_config(spec, in, path.string());
}

void write_config(const ExperimentSpec& spec, std::ostream& out) {
    for (const auto& f : config_fields()) out << f.key << '=' << f.get(spec) << '\n';
}

}  // namespace aspl
