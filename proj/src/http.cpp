#include "m3/http.hpp"

#include <httplib.h>
#include <fmt/format.h>

namespace m3::service {

using nlohmann::json;

namespace {

int status_for(std::string_view token) {
    if (token == "input_error" || token == "config_error" || token == "domain_error") return 400;
    if (token == "not_found") return 404;
    if (token == "state_error") return 409;
    if (token == "run_error") return 503;
    return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, std::string_view token, std::string_view message) {
    send_json(res, status_for(token), json{{"error", token}, {"message", message}});
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e.token(), e.what());
        } catch (const json::exception& e) {
            send_error(res, "input_error", e.what());
        } catch (const std::exception& e) {
            send_error(res, "internal_fault", e.what());
        }
    };
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) {
        return json::object();
    }
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw InputError(fmt::format("request body is not JSON: {}", e.what()));
    }
}

}  // namespace

struct HttpServer::Impl {
    SessionManager& sessions;
    HttpOptions options;
    httplib::Server server;

    Impl(SessionManager& s, HttpOptions o) : sessions(s), options(std::move(o)) { routes(); }

    void routes() {
        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const json body = parse_body(req);
                        if (!body.is_object()) {
                            throw InputError("body must be an object");
                        }
                        const std::string participant = body.value("participant", "");
                        if (participant.empty()) {
                            throw InputError("participant label is required");
                        }
                        send_json(res, 201, sessions.create_session(participant, body.value("metadata", json::object())));
                    }));
        server.Get(R"(/sessions/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, sessions.get_state(req.matches[1]));
                   }));
        server.Post(R"(/sessions/([0-9a-f]+)/moves)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const std::string id = req.matches[1];
                        sessions.get_state(id);  // unknown sessions are 404 before the body is judged
                        send_json(res, 200, sessions.submit_move(id, move_from_json(parse_body(req))));
                    }));
        server.Get(R"(/sessions/([0-9a-f]+)/traces)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       json arr = json::array();
                       for (const auto& t : sessions.traces(req.matches[1])) {
                           arr.push_back(trace_to_json(t));
                       }
                       send_json(res, 200, json{{"traces", arr}});
                   }));
        server.Get("/presets", guarded([this](const httplib::Request&, httplib::Response& res) {
                       json arr = json::array();
                       for (const auto& p : sessions.presets()) {
                           arr.push_back({{"id", p.id},
                                          {"width", p.config.width},
                                          {"height", p.config.height},
                                          {"num_colors", p.config.num_colors}});
                       }
                       send_json(res, 200, json{{"presets", arr}});
                   }));
        server.Get("/study/summary", guarded([this](const httplib::Request&, httplib::Response& res) {
                       send_json(res, 200, summarize_study(sessions.store().load_all()).to_json());
                   }));
        server.Get("/study/comparison", guarded([this](const httplib::Request&, httplib::Response& res) {
                       if (!options.genomes_dir) {
                           throw RunError("the server was started without a genome archive");
                       }
                       const auto genomes = exp::load_genome_archives(*options.genomes_dir);
                       const auto report = compare_with_agents(sessions.store().load_all(), sessions.presets(),
                                                               genomes, options.search, options.comparison_repeats,
                                                               options.comparison_seed);
                       send_json(res, 200, report.to_json());
                   }));
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                send_json(res, res.status, json{{"error", res.status == 404 ? "not_found" : "http_error"},
                                                {"message", fmt::format("HTTP {}", res.status)}});
            }
        });
    }
};

HttpServer::HttpServer(SessionManager& sessions, HttpOptions options)
    : impl_(std::make_unique<Impl>(sessions, std::move(options))) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) {
            throw RunError(fmt::format("cannot bind {}", host));
        }
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw RunError(fmt::format("cannot bind {}:{}", host, port));
    }
    return port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace m3::service
