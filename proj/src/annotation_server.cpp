#include "tvcp/annotation_server.hpp"

#include <httplib.h>

#include "tvcp/error.hpp"

namespace tvcp::annotation {

using json = nlohmann::ordered_json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs a handler and maps library errors onto HTTP status codes.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ValidationError& e) {
      reply(res, 400, {{"error", e.what()}, {"details", e.ids()}});
    } catch (const NotFoundError& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const StateError& e) {
      reply(res, 409, {{"error", e.what()}});
    } catch (const ConflictError& e) {
      reply(res, 409, {{"error", e.what()}});
    } catch (const Error& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed request body: ") + e.what()}});
    }
  };
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw ContractError(std::string("missing field '") + key + "'");
  return j.at(key).get<std::string>();
}

}  // namespace

void register_routes(httplib::Server& server, AnnotationService& service) {
  auto& svc = service;

  server.Post("/statements", guarded([&svc](const auto& req, auto& res) {
    const auto body = body_of(req);
    std::size_t n = 0;
    for (const auto& s : body.at("statements")) {
      std::optional<std::int64_t> created;
      if (s.contains("created_at") && !s.at("created_at").is_null()) created = s.at("created_at").template get<std::int64_t>();
      svc.add_statement(required_string(s, "id"), required_string(s, "text"), created);
      ++n;
    }
    reply(res, 200, {{"added", n}});
  }));

  server.Post("/hits", guarded([&svc](const auto& req, auto& res) {
    const auto body = body_of(req);
    const auto hits = svc.create_hit_batches(body.at("statement_ids").template get<std::vector<std::string>>(),
                                             parse_hit_kind(required_string(body, "kind")));
    const auto state = svc.snapshot();
    json out = json::array();
    for (const auto& h : hits) out.push_back(to_json(h, state));
    reply(res, 200, {{"hits", out}});
  }));

  server.Get("/hits/next", guarded([&svc](const auto& req, auto& res) {
    if (!req.has_param("task") || !req.has_param("annotator"))
      throw ContractError("query parameters 'task' and 'annotator' are required");
    const auto hit = svc.next_hit(parse_hit_kind(req.get_param_value("task")), req.get_param_value("annotator"));
    if (!hit) throw NotFoundError("no open HIT available");
    reply(res, 200, to_json(*hit, svc.snapshot()));
  }));

  server.Get(R"(/hits/([^/]+))", guarded([&svc](const auto& req, auto& res) {
    const auto hit = svc.hit(req.matches[1]);
    reply(res, 200, to_json(hit, svc.snapshot()));
  }));

  server.Post(R"(/hits/([^/]+)/votes)", guarded([&svc](const auto& req, auto& res) {
    const auto body = body_of(req);
    std::map<std::string, Vote> votes;
    if (!body.contains("votes") || !body.at("votes").is_object()) throw ContractError("missing field 'votes'");
    for (const auto& [sid, token] : body.at("votes").items()) {
      try {
        votes[sid] = parse_vote(token.template get<std::string>());
      } catch (const SchemaError& e) {
        throw ValidationError(e.what(), {sid});
      }
    }
    svc.submit_duration_votes(req.matches[1], required_string(body, "annotator_id"), votes);
    reply(res, 200, {{"status", "recorded"}, {"hit", to_json(svc.hit(req.matches[1]), svc.snapshot())}});
  }));

  server.Post(R"(/hits/([^/]+)/followups)", guarded([&svc](const auto& req, auto& res) {
    const auto body = body_of(req);
    std::vector<FollowUpEntry> entries;
    if (!body.contains("entries") || !body.at("entries").is_array()) throw ContractError("missing field 'entries'");
    for (const auto& e : body.at("entries")) entries.push_back(entry_from_json(e));
    const auto id = svc.submit_followups(req.matches[1], required_string(body, "annotator_id"), entries);
    const auto state = svc.snapshot();
    reply(res, 200, to_json(state.submissions.at(id)));
  }));

  server.Get("/review/queue", guarded([&svc](const auto&, auto& res) {
    const auto state = svc.snapshot();
    json out = json::array();
    for (const auto& s : svc.review_queue()) {
      auto j = to_json(s);
      j["annotator"] = to_json(state.annotators.at(s.annotator_id));
      out.push_back(j);
    }
    reply(res, 200, {{"queue", out}});
  }));

  server.Post(R"(/review/([^/]+))", guarded([&svc](const auto& req, auto& res) {
    const auto body = body_of(req);
    std::vector<FollowUpEntry> edited;
    if (body.contains("entries"))
      for (const auto& e : body.at("entries")) edited.push_back(entry_from_json(e));
    svc.review_submission(required_string(body, "reviewer_id"), req.matches[1],
                          parse_decision(required_string(body, "decision")), body.value("feedback", std::string()),
                          edited);
    reply(res, 200, to_json(svc.snapshot().submissions.at(req.matches[1])));
  }));

  server.Get(R"(/annotators/([^/]+))", guarded([&svc](const auto& req, auto& res) {
    reply(res, 200, to_json(svc.annotator(req.matches[1])));
  }));

  server.Post(R"(/annotators/([^/]+)/qualify)", guarded([&svc](const auto& req, auto& res) {
    const auto body = body_of(req);
    svc.set_qualified(req.matches[1], body.value("qualified", true));
    reply(res, 200, to_json(svc.annotator(req.matches[1])));
  }));

  server.Post(R"(/annotators/([^/]+)/block)", guarded([&svc](const auto& req, auto& res) {
    const auto body = body_of(req);
    svc.block_annotator(req.matches[1], body.value("reviewer_id", std::string()));
    reply(res, 200, to_json(svc.annotator(req.matches[1])));
  }));

  server.Get("/export", guarded([&svc](const auto&, auto& res) {
    const auto r = svc.export_samples();
    json samples = json::array();
    for (const auto& s : r.samples) samples.push_back(to_json(s));
    reply(res, 200, {{"manifest", r.manifest}, {"samples", samples}});
  }));
}

void serve(AnnotationService& service, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, service);
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace tvcp::annotation
