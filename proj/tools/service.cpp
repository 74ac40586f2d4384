#include "service.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <random>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "promobn/error.hpp"
#include "promobn/inference.hpp"
#include "promobn/parser.hpp"
#include "promobn/weights.hpp"

namespace promobn::service {

using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kHistogramBins = 50;

struct Session {
    std::mutex mu;
    Network original;
    Network current;
    Evidence evidence;
    std::uint64_t seed = 42;
    std::optional<json> weights;
};

class HttpError : public std::runtime_error {
public:
    HttpError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    try {
        json body = json::parse(req.body);
        if (!body.is_object()) {
            throw HttpError(400, "request body must be a JSON object");
        }
        return body;
    } catch (const json::parse_error& e) {
        throw HttpError(400, fmt::format("malformed JSON body: {}", e.what()));
    }
}

json network_summary(const Network& net) {
    json nodes = json::array();
    json states = json::object();
    json kinds = json::object();
    for (const Node& node : net.nodes()) {
        nodes.push_back(node.id);
        kinds[node.id] = std::string(to_string(node.kind));
        if (node.is_discrete()) {
            states[node.id] = node.states;
        }
    }
    return {{"name", net.name()}, {"nodes", nodes}, {"kinds", kinds}, {"states", states}};
}

json evidence_json(const Evidence& ev) {
    json out = json::object();
    for (const auto& [node, state] : ev.discrete) {
        out[node] = {{"state", state}};
    }
    if (ev.continuous) {
        out[ev.continuous->node] = {{"value", ev.continuous->value}, {"bandwidth", ev.continuous->bandwidth}};
    }
    return out;
}

json posterior_json(const PosteriorReport& report) {
    json nodes = json::array();
    for (const NodePosterior& n : report.nodes) {
        nodes.push_back({{"node", n.node}, {"states", n.states}, {"probabilities", n.probabilities}});
    }
    return {{"method", std::string(to_string(report.method))}, {"posteriors", nodes}};
}

template <class T>
T query_number(const httplib::Request& req, const char* key, T fallback) {
    if (!req.has_param(key)) {
        return fallback;
    }
    const std::string raw = req.get_param_value(key);
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(raw, &used);
        if (used != raw.size()) {
            throw std::invalid_argument(raw);
        }
        return static_cast<T>(v);
    } catch (const std::exception&) {
        throw HttpError(400, fmt::format("query parameter '{}' must be a non-negative integer", key));
    }
}

std::string new_session_id() {
    static std::mutex mu;
    static std::mt19937_64 gen{std::random_device{}()};
    std::lock_guard lock(mu);
    return fmt::format("{:016x}", gen());
}

}  // namespace

int resolve_port(std::optional<int> flag) {
    if (flag) {
        return *flag;
    }
    if (const char* env = std::getenv(kPortEnv); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end == '\0' && v >= 0 && v <= 65535) {
            return static_cast<int>(v);
        }
        throw InputError(fmt::format("{}='{}' is not a valid port", kPortEnv, env));
    }
    return kDefaultPort;
}

struct WhatIfService::Impl {
    ServiceOptions options;
    std::mutex sessions_mu;
    std::map<std::string, std::shared_ptr<Session>> sessions;

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard lock(sessions_mu);
        const auto it = sessions.find(id);
        if (it == sessions.end()) {
            throw HttpError(404, fmt::format("unknown session '{}'", id));
        }
        return it->second;
    }

    // Wraps a handler: maps engine and HTTP errors onto JSON error replies.
    template <class Fn>
    httplib::Server::Handler wrap(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const HttpError& e) {
                reply(res, e.status(), {{"error", e.what()}});
            } catch (const ParseError& e) {
                reply(res, 400, {{"error", e.message()}, {"line", e.line()}, {"column", e.column()}});
            } catch (const Error& e) {
                reply(res, 400, {{"error", e.what()}});
            } catch (const json::exception& e) {
                reply(res, 400, {{"error", fmt::format("bad request field: {}", e.what())}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", e.what()}});
            }
        };
    }

    void create(const httplib::Request& req, httplib::Response& res) {
        std::string dsl;
        std::uint64_t seed = options.default_seed;
        const bool is_json = !req.body.empty() && req.body.find_first_not_of(" \t\r\n") != std::string::npos &&
                             req.body[req.body.find_first_not_of(" \t\r\n")] == '{' &&
                             req.get_header_value("Content-Type").find("json") != std::string::npos;
        if (is_json) {
            const json body = parse_body(req);
            if (!body.contains("dsl") || !body["dsl"].is_string()) {
                throw HttpError(400, "body needs a string field 'dsl'");
            }
            dsl = body["dsl"].get<std::string>();
            if (body.contains("seed")) {
                seed = body["seed"].get<std::uint64_t>();
            }
        } else {
            dsl = req.body;
        }
        auto session = std::make_shared<Session>();
        session->original = parse_network(dsl);
        session->current = session->original;
        session->seed = seed;
        std::string id = new_session_id();
        {
            std::lock_guard lock(sessions_mu);
            while (sessions.contains(id)) {
                id = new_session_id();
            }
            sessions[id] = session;
        }
        json body = network_summary(session->current);
        body["session_id"] = id;
        body["seed"] = seed;
        reply(res, 201, body);
    }

    void get_network(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        json body = network_summary(s->current);
        body["dsl"] = serialize_network(s->current);
        body["evidence"] = evidence_json(s->evidence);
        if (s->weights) {
            body["weights"] = *s->weights;
        }
        reply(res, 200, body);
    }

    void post_evidence(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req.matches[1]);
        const json body = parse_body(req);
        if (!body.contains("node") || !body["node"].is_string()) {
            throw HttpError(400, "evidence needs a string field 'node'");
        }
        const std::string node = body["node"].get<std::string>();
        std::lock_guard lock(s->mu);
        Evidence next = s->evidence;
        if (body.contains("state")) {
            if (!body["state"].is_string()) {
                throw HttpError(400, "'state' must be a string");
            }
            next.discrete[node] = body["state"].get<std::string>();
        } else if (body.contains("value")) {
            if (!body["value"].is_number()) {
                throw HttpError(400, "'value' must be a number");
            }
            double bandwidth = kDefaultBandwidth;
            if (body.contains("bandwidth")) {
                if (!body["bandwidth"].is_number()) {
                    throw HttpError(400, "'bandwidth' must be a number");
                }
                bandwidth = body["bandwidth"].get<double>();
            }
            next.continuous = ContinuousEvidence{node, body["value"].get<double>(), bandwidth};
        } else {
            throw HttpError(400, "evidence needs either 'state' or 'value'");
        }
        check_evidence(s->current, next);
        // Reject evidence the model cannot explain so the session never holds it.
        posterior(s->current, next, PosteriorMethod::ConvolutionDensity);
        s->evidence = std::move(next);
        reply(res, 200, {{"evidence", evidence_json(s->evidence)}});
    }

    void delete_evidence(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        s->evidence = Evidence{};
        reply(res, 200, {{"evidence", json::object()}});
    }

    void get_posteriors(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        PosteriorMethod method = PosteriorMethod::ConvolutionDensity;
        if (req.has_param("method")) {
            method = parse_method(req.get_param_value("method"));
        }
        PosteriorOptions options;
        options.seed = query_number<std::uint64_t>(req, "seed", s->seed);
        options.kde_samples = query_number<std::size_t>(req, "n", this->options.kde_samples);
        options.workers = this->options.workers;
        if (options.kde_samples == 0) {
            throw HttpError(400, "n must be >= 1");
        }
        const PosteriorReport report = posterior(s->current, s->evidence, method, options);
        json body = posterior_json(report);
        body["evidence"] = evidence_json(s->evidence);
        reply(res, 200, body);
    }

    void get_forecast(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        const std::size_t n = query_number<std::size_t>(req, "n", options.default_iterations);
        const std::uint64_t seed = query_number<std::uint64_t>(req, "seed", s->seed);
        if (n < 2) {
            throw HttpError(400, "n must be >= 2");
        }
        const SampleSet samples = forward_sample(s->current, n, seed, s->evidence.discrete, options.workers);
        const MeanCI ci = equation_mean_ci(samples);
        const auto [lo_it, hi_it] = std::minmax_element(samples.values.begin(), samples.values.end());
        const double lo = *lo_it;
        const double hi = *hi_it;
        const double width = (hi - lo) / static_cast<double>(kHistogramBins);
        std::vector<std::size_t> counts(kHistogramBins, 0);
        for (double v : samples.values) {
            std::size_t bin = width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
            counts[std::min(bin, kHistogramBins - 1)] += 1;
        }
        json body = {
            {"node", samples.equation_node},
            {"n", n},
            {"seed", seed},
            {"mean", ci.mean},
            {"sd", ci.sd},
            {"ci", {ci.lower, ci.upper}},
            {"analytic_mean", analytic_mean(s->current, s->evidence.discrete)},
            {"histogram", {{"bins", kHistogramBins}, {"lower", lo}, {"upper", hi}, {"width", width}, {"counts", counts}}},
            {"evidence", evidence_json(s->evidence)},
        };
        reply(res, 200, body);
    }

    void post_weights(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req.matches[1]);
        const json body = parse_body(req);
        for (const char* key : {"price", "promotions", "location"}) {
            if (!body.contains(key) || !body[key].is_number()) {
                throw HttpError(400, fmt::format("weights need numeric field '{}'", key));
            }
        }
        const double price = body["price"].get<double>();
        const double promotions = body["promotions"].get<double>();
        const double location = body["location"].get<double>();
        std::lock_guard lock(s->mu);
        Network rebuilt = reweight_equation(s->original, weights_by_role(s->original, price, promotions, location));
        s->current = std::move(rebuilt);
        s->weights = json{{"price", price}, {"promotions", promotions}, {"location", location}};
        reply(res, 200, {{"weights", *s->weights}, {"analytic_mean", analytic_mean(s->current, s->evidence.discrete)}});
    }
};

WhatIfService::WhatIfService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->options = options;
}

WhatIfService::~WhatIfService() = default;

void WhatIfService::register_routes(httplib::Server& server) {
    Impl* impl = impl_.get();
    const std::string sid = R"(/sessions/([0-9a-zA-Z_-]+))";
    server.Post("/sessions", impl->wrap([impl](const auto& req, auto& res) { impl->create(req, res); }));
    server.Get(sid + "/network", impl->wrap([impl](const auto& req, auto& res) { impl->get_network(req, res); }));
    server.Post(sid + "/evidence", impl->wrap([impl](const auto& req, auto& res) { impl->post_evidence(req, res); }));
    server.Delete(sid + "/evidence",
                  impl->wrap([impl](const auto& req, auto& res) { impl->delete_evidence(req, res); }));
    server.Get(sid + "/posteriors", impl->wrap([impl](const auto& req, auto& res) { impl->get_posteriors(req, res); }));
    server.Get(sid + "/forecast", impl->wrap([impl](const auto& req, auto& res) { impl->get_forecast(req, res); }));
    server.Post(sid + "/weights", impl->wrap([impl](const auto& req, auto& res) { impl->post_weights(req, res); }));
}

int serve(int port, const ServiceOptions& options) {
    httplib::Server server;
    WhatIfService service(options);
    service.register_routes(server);
    std::cerr << fmt::format("promobn what-if service listening on 0.0.0.0:{}\n", port);
    if (!server.listen("0.0.0.0", port)) {
        std::cerr << fmt::format("error: cannot listen on port {}\n", port);
        return 1;
    }
    return 0;
}

}  // namespace promobn::service
