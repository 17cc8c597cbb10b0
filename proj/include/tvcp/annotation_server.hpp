#pragma once

#include <string>

#include "tvcp/annotation.hpp"

namespace httplib {
class Server;
}

namespace tvcp::annotation {

// Registers the REST routes on an existing server. Status codes: 200 success,
// 400 validation, 404 unknown id, 409 state conflict.
//
//   POST /statements                  {"statements":[{"id","text","created_at"?}]}
//   POST /hits                        {"kind","statement_ids":[...]}
//   GET  /hits/next?task=&annotator=
//   GET  /hits/{id}
//   POST /hits/{id}/votes             {"annotator_id","votes":{statement_id: token}}
//   POST /hits/{id}/followups         {"annotator_id","entries":[{"label","text","updated"}]}
//   GET  /review/queue
//   POST /review/{submission_id}      {"reviewer_id","decision","feedback","entries"?}
//   GET  /annotators/{id}
//   POST /annotators/{id}/qualify     {"qualified":bool}
//   POST /annotators/{id}/block       {"reviewer_id"}
//   GET  /export
void register_routes(httplib::Server& server, AnnotationService& service);

// Blocks until the server stops.
void serve(AnnotationService& service, const std::string& host, int port);

}  // namespace tvcp::annotation
