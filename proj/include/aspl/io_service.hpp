#ifndef ASPL_IO_SERVICE_HPP
#define ASPL_IO_SERVICE_HPP

#include "aspl/engine.hpp"
#include "aspl/experiment.hpp"
#include "aspl/oracle.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace aspl {

/// Raised by the file readers; the message carries the line (text) or byte offset (binary).
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Datasets

enum class DatasetFormat : std::uint8_t { text, binary };

/// `.bin` / `.aspl` are packed, anything else is delimited text; sniffs the magic when the file exists.
DatasetFormat detect_format(const std::filesystem::path& path);

/**
 * Delimited text: header `id,f0,...,f{d-1}[,label]`, one sample per line.
 * An empty label or `unknown` marks a sample outside every category.
 *
 * Packed binary: "ASPL1", u32 n, u32 d, u8 has_truth, n*d little-endian
 * float32 row-major, then n u32 truth indices (0xFFFFFFFF = unknown) when
 * flagged. Category k is named c<k>; sample i gets id <i>.
 */
FeatureStore load_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format = std::nullopt);
void save_dataset(const FeatureStore& store, const std::filesystem::path& path,
                  std::optional<DatasetFormat> format = std::nullopt);

// ---------------------------------------------------------------------------
// Checkpoints, ledgers, curves

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const EngineState& state, const std::filesystem::path& path);
/// Parses the whole file before returning; nothing is returned on any error.
EngineState load_checkpoint(const std::filesystem::path& path);

std::string ledger_record_json(const IterationRecord& record);
void write_ledger(const RunLedger& ledger, std::ostream& out);  // one JSON record per line
RunLedger read_ledger(std::istream& in);

void write_curves(const std::map<Strategy, std::vector<CurvePoint>>& curves, std::ostream& out);

// ---------------------------------------------------------------------------
// Flat key=value configuration

struct ConfigField {
    std::string key;
    std::string help;
    std::function<void(ExperimentSpec&, const std::string&)> set;
    std::function<std::string(const ExperimentSpec&)> get;
};

/// Every EngineConfig and ExperimentSpec field, in echo order.
const std::vector<ConfigField>& config_fields();

void apply_config_value(ExperimentSpec& spec, const std::string& key, const std::string& value);
/// `#` starts a comment; blank lines are skipped; unknown keys are errors.
void parse_config(ExperimentSpec& spec, std::istream& in, const std::string& source = "config");
void load_config(ExperimentSpec& spec, const std::filesystem::path& path);
void write_config(const ExperimentSpec& spec, std::ostream& out);

// ---------------------------------------------------------------------------
// Human oracle and annotation service

struct PendingQuery {
    Query query;
    std::vector<std::string> categories;  // bank categories when the query was posted
};

/// Status the engine thread publishes after each iteration.
struct EngineStatus {
    int iteration = 0;
    std::vector<std::string> categories;
    Index annotated = 0;
    Index pseudo = 0;
    Index unknown = 0;
    std::optional<double> accuracy;
    bool running = false;
};

enum class SubmitResult : std::uint8_t { accepted, not_pending, invalid_category };

/**
 * Command channel between the HTTP handlers and the engine thread.
 *
 * The engine posts a batch and blocks until every query has an answer or the
 * timeout passes; handlers only enqueue answers under the lock.
 */
class AnnotationHub {
public:
    explicit AnnotationHub(std::chrono::milliseconds timeout = std::chrono::minutes(10)) : timeout_(timeout) {}

    std::vector<OracleAnswer> exchange(std::span<const Query> queries, std::span<const std::string> categories);

    std::vector<PendingQuery> pending() const;
    std::size_t pending_count() const;
    SubmitResult submit(const std::string& sample_id, const std::string& category, std::string* detail = nullptr);
    /// Announces a class name the next answers may use; false if it already exists.
    bool create_category(const std::string& name);
    std::vector<std::string> announced_categories() const;

    void publish(const Engine& engine);
    EngineStatus status() const;
    RunLedger metrics() const;

    /// Releases a blocked exchange and makes later ones return immediately.
    void shutdown();
    /// Blocks until at least one query is pending or the hub shuts down.
    bool wait_for_pending(std::chrono::milliseconds limit) const;

private:
    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::chrono::milliseconds timeout_;
    std::vector<PendingQuery> pending_;
    std::map<std::string, OracleAnswer> answered_;
    std::vector<std::string> announced_;
    EngineStatus status_;
    RunLedger ledger_;
    bool closed_ = false;
};

class HumanOracle final : public Oracle {
public:
    explicit HumanOracle(AnnotationHub& hub) : hub_(&hub) {}
    std::vector<OracleAnswer> answer(std::span<const Query> queries, std::span<const std::string> categories) override {
        return hub_->exchange(queries, categories);
    }

private:
    AnnotationHub* hub_;
};

/// GET /api/status, /api/queries, /api/metrics; POST /api/labels, /api/categories.
class AnnotationService {
public:
    explicit AnnotationService(AnnotationHub& hub, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port. Returns the bound port.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// "host:port" or ":port" or "port".
std::pair<std::string, int> parse_address(const std::string& address);

}  // namespace aspl

#endif  // ASPL_IO_SERVICE_HPP
