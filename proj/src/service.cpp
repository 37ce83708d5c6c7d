#include "aspl/io_service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <thread>

namespace aspl {

using Json = nlohmann::ordered_json;

std::vector<OracleAnswer> AnnotationHub::exchange(std::span<const Query> queries,
                                                  std::span<const std::string> categories) {
    std::unique_lock lock(mutex_);
    if (closed_ || queries.empty()) return {};
    const std::vector<std::string> names(categories.begin(), categories.end());
    for (const auto& q : queries) pending_.push_back({q, names});
    changed_.notify_all();

    auto complete = [&] {
        if (closed_) return true;
        return std::all_of(queries.begin(), queries.end(),
                           [&](const Query& q) { return answered_.contains(q.sample_id); });
    };
    changed_.wait_for(lock, timeout_, complete);

    // Unanswered queries are dropped; their samples stay unannotated and may be selected again.
    std::vector<OracleAnswer> out;
    for (const auto& q : queries) {
        if (const auto it = answered_.find(q.sample_id); it != answered_.end()) {
            out.push_back(it->second);
            answered_.erase(it);
        }
        std::erase_if(pending_, [&](const PendingQuery& p) { return p.query.sample_id == q.sample_id; });
    }
    changed_.notify_all();
    return out;
}

std::vector<PendingQuery> AnnotationHub::pending() const {
    std::lock_guard lock(mutex_);
    std::vector<PendingQuery> out;
    for (const auto& p : pending_)
        if (!answered_.contains(p.query.sample_id)) out.push_back(p);
    return out;
}

std::size_t AnnotationHub::pending_count() const { return pending().size(); }

SubmitResult AnnotationHub::submit(const std::string& sample_id, const std::string& category, std::string* detail) {
    std::lock_guard lock(mutex_);
    const auto it = std::find_if(pending_.begin(), pending_.end(),
                                 [&](const PendingQuery& p) { return p.query.sample_id == sample_id; });
    if (it == pending_.end() || answered_.contains(sample_id)) {
        if (detail) *detail = "no pending query for sample '" + sample_id + "'";
        return SubmitResult::not_pending;
    }

    OracleLabel label;
    const bool announced = std::find(announced_.begin(), announced_.end(), category) != announced_.end();
    try {
        label = parse_oracle_label(category, it->categories);
    } catch (const DomainError& e) {
        if (!announced) {
            if (detail) *detail = e.what();
            return SubmitResult::invalid_category;
        }
        label = NewCategory{category};
    }

    OracleAnswer a;
    a.sample = it->query.sample;
    a.sample_id = sample_id;
    a.category = std::move(label);
    if (it->query.kind == QueryKind::verify)
        a.is_correction = !it->query.claimed || a.category != OracleLabel{KnownCategory{*it->query.claimed}};
    answered_.emplace(sample_id, std::move(a));
    changed_.notify_all();
    return SubmitResult::accepted;
}

bool AnnotationHub::create_category(const std::string& name) {
    if (name.empty() || name == "unknown" || name.starts_with("new:")) throw DomainError("invalid category name '" + name + "'");
    std::lock_guard lock(mutex_);
    const auto& known = status_.categories;
    if (std::find(known.begin(), known.end(), name) != known.end()) return false;
    if (std::find(announced_.begin(), announced_.end(), name) != announced_.end()) return false;
    for (const auto& p : pending_)
        if (std::find(p.categories.begin(), p.categories.end(), name) != p.categories.end()) return false;
    announced_.push_back(name);
    return true;
}

std::vector<std::string> AnnotationHub::announced_categories() const {
    std::lock_guard lock(mutex_);
    return announced_;
}

void AnnotationHub::publish(const Engine& engine) {
    std::lock_guard lock(mutex_);
    status_.iteration = engine.bank().iteration;
    status_.categories = engine.bank().categories;
    status_.annotated = engine.labels().count(Provenance::annotated);
    status_.pseudo = engine.labels().count(Provenance::pseudo);
    status_.unknown = static_cast<Index>(engine.labels().unknown_set().size());
    status_.accuracy = engine.ledger().records.empty() ? std::nullopt : engine.ledger().records.back().accuracy;
    status_.running = !engine.done();
    ledger_ = engine.ledger();
    std::erase_if(announced_, [&](const std::string& n) {
        return std::find(status_.categories.begin(), status_.categories.end(), n) != status_.categories.end();
    });
    changed_.notify_all();
}

EngineStatus AnnotationHub::status() const {
    std::lock_guard lock(mutex_);
    return status_;
}

RunLedger AnnotationHub::metrics() const {
    std::lock_guard lock(mutex_);
    return ledger_;
}

void AnnotationHub::shutdown() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    changed_.notify_all();
}

bool AnnotationHub::wait_for_pending(std::chrono::milliseconds limit) const {
    std::unique_lock lock(mutex_);
    return changed_.wait_for(lock, limit, [&] {
        return closed_ || std::any_of(pending_.begin(), pending_.end(),
                                      [&](const PendingQuery& p) { return !answered_.contains(p.query.sample_id); });
    }) && !closed_;
}

// ---------------------------------------------------------------------------

struct AnnotationService::Impl {
    AnnotationHub* hub;
    httplib::Server server;
    std::thread worker;
};

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

Json error_body(const std::string& message) { return Json{{"error", message}}; }

}  // namespace

AnnotationService::AnnotationService(AnnotationHub& hub, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
    impl_->hub = &hub;
    auto& server = impl_->server;
    if (static_dir) server.set_mount_point("/", static_dir->string());

    server.Get("/api/status", [&hub](const httplib::Request&, httplib::Response& res) {
        const auto s = hub.status();
        reply(res, 200,
              Json{{"iteration", s.iteration},
                   {"categories", s.categories},
                   {"annotated", s.annotated},
                   {"pseudo", s.pseudo},
                   {"unknown", s.unknown},
                   {"pending", hub.pending_count()},
                   {"accuracy", s.accuracy ? Json(*s.accuracy) : Json(nullptr)},
                   {"running", s.running}});
    });

    server.Get("/api/queries", [&hub](const httplib::Request&, httplib::Response& res) {
        Json queries = Json::array();
        for (const auto& p : hub.pending()) {
            Json candidates = Json::array();
            for (std::size_t j = 0; j < p.categories.size(); ++j)
                candidates.push_back({{"category", p.categories[j]},
                                      {"score", j < p.query.scores.size() ? p.query.scores[j] : 0.0}});
            Json claimed = nullptr;
            if (p.query.claimed && *p.query.claimed < static_cast<Index>(p.categories.size()))
                claimed = p.categories[static_cast<std::size_t>(*p.query.claimed)];
            queries.push_back({{"sample_id", p.query.sample_id},
                               {"kind", p.query.kind == QueryKind::verify ? "verify" : "label"},
                               {"claimed", claimed},
                               {"candidates", candidates},
                               {"feature_summary", p.query.feature_summary}});
        }
        reply(res, 200, Json{{"queries", queries}});
    });

    server.Post("/api/labels", [&hub](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("sample_id") || !body.contains("category") ||
            !body["sample_id"].is_string() || !body["category"].is_string())
            return reply(res, 400, error_body("body must be {\"sample_id\": string, \"category\": string}"));
        std::string detail;
        switch (hub.submit(body["sample_id"].get<std::string>(), body["category"].get<std::string>(), &detail)) {
            case SubmitResult::accepted: return reply(res, 200, Json{{"accepted", true}, {"pending", hub.pending_count()}});
            case SubmitResult::not_pending: return reply(res, 409, error_body(detail));
            case SubmitResult::invalid_category: return reply(res, 422, error_body(detail));
        }
    });

    server.Post("/api/categories", [&hub](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("name") || !body["name"].is_string())
            return reply(res, 400, error_body("body must be {\"name\": string}"));
        const auto name = body["name"].get<std::string>();
        try {
            if (!hub.create_category(name)) return reply(res, 409, error_body("category '" + name + "' already exists"));
        } catch (const DomainError& e) {
            return reply(res, 422, error_body(e.what()));
        }
        reply(res, 201, Json{{"created", name}, {"announced", hub.announced_categories()}});
    });

    server.Get("/api/metrics", [&hub](const httplib::Request&, httplib::Response& res) {
        Json records = Json::array();
        for (const auto& r : hub.metrics().records) records.push_back(Json::parse(ledger_record_json(r)));
        reply(res, 200, Json{{"records", records}});
    });
}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::start(const std::string& host, int port) {
    auto& server = impl_->server;
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->worker = std::thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();
    return bound;
}

void AnnotationService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

std::pair<std::string, int> parse_address(const std::string& address) {
    const auto colon = address.rfind(':');
    std::string host = colon == std::string::npos ? "127.0.0.1" : address.substr(0, colon);
    const std::string port_text = colon == std::string::npos ? address : address.substr(colon + 1);
    if (host.empty()) host = "127.0.0.1";
    int port = 0;
    const auto [end, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || end != port_text.data() + port_text.size() || port < 0 || port > 65535)
        throw DomainError("bad address '" + address + "'");
    return {host, port};
}

}  // namespace aspl
