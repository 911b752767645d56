#include "morseuq/service.hpp"

#include <httplib.h>

#include <json.hpp>
#include <map>
#include <mutex>

#include "morseuq/grid_io.hpp"

namespace morseuq {

namespace {

using nlohmann::json;

json coord_json(const Coord& c) {
  json a = json::array();
  for (int i = 0; i < c.rank; ++i) a.push_back(c[i]);
  return a;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json trace_point_json(const TracePoint& t) {
  return {{"clicks", t.clicks}, {"dice", optional_json(t.dice)}, {"cldice", optional_json(t.cldice)}};
}

template <class G>
std::string grid_b64(const G& g) {
  return httplib::detail::base64_encode(encode_grd1(g));
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& msg) { reply(res, status, {{"error", msg}}); }

}  // namespace

struct ProofreadService::Impl {
  struct Served {
    ScalarGrid image;
    ScalarGrid likelihood;
    Session session;
    std::mutex mutex;
  };

  std::filesystem::path export_dir;
  std::map<std::string, std::unique_ptr<Served>> cases;
  httplib::Server server;

  Served* find(const std::string& id) {
    auto it = cases.find(id);
    return it == cases.end() ? nullptr : it->second.get();
  }

  json case_json(Served& c) {
    const Session& s = c.session;
    json structures = json::array();
    const auto est = s.current_estimates();
    for (const auto& e : est) {
      json path = json::array();
      for (const auto& p : s.skeleton().structures[static_cast<std::size_t>(e.structure_id)].path)
        path.push_back(coord_json(p));
      const auto d = s.decision(e.structure_id);
      structures.push_back({{"id", e.structure_id},
                            {"path", path},
                            {"p_bar", e.p_bar},
                            {"var_bar", e.var_bar},
                            {"u_norm", e.u_norm},
                            {"accepted", e.accepted},
                            {"decision", d ? json(*d ? "accept" : "reject") : json(nullptr)}});
    }
    const BinaryGrid& mask = s.final_mask();
    return {{"id", s.case_id()},
            {"dims", c.image.shape().dims()},
            {"image", grid_b64(c.image)},
            {"likelihood", grid_b64(c.likelihood)},
            {"backbone_seg", grid_b64(s.initial().backbone_seg)},
            {"final_mask", grid_b64(mask)},
            {"final_mask_count", count_foreground(mask)},
            {"heatmap", grid_b64(s.current_heatmap())},
            {"structures", structures},
            {"queue", s.remaining()},
            {"trace_point", trace_point_json(s.trace().back())}};
  }

  void routes() {
    server.Get("/api/cases", [this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& [id, c] : cases) out.push_back({{"id", id}, {"dims", c->image.shape().dims()}});
      reply(res, 200, out);
    });

    server.Get(R"(/api/case/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      Served* c = find(req.matches[1]);
      if (!c) return fail(res, 404, "unknown case");
      std::lock_guard lock(c->mutex);
      reply(res, 200, case_json(*c));
    });

    server.Post(R"(/api/case/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
      Served* c = find(req.matches[1]);
      if (!c) return fail(res, 404, "unknown case");
      int id = 0;
      bool accept = false;
      try {
        const json body = json::parse(req.body);
        id = body.at("structure_id").get<int>();
        accept = body.at("accept").get<bool>();
      } catch (const json::exception& e) {
        return fail(res, 400, std::string("malformed decision: ") + e.what());
      }
      std::lock_guard lock(c->mutex);
      try {
        const TracePoint t = c->session.apply_decision(id, accept);
        reply(res, 200,
              {{"dice", optional_json(t.dice)},
               {"cldice", optional_json(t.cldice)},
               {"clicks", t.clicks},
               {"remaining", c->session.remaining().size()}});
      } catch (const DecisionError& e) {
        fail(res, e.code() == DecisionErrc::unknown_structure ? 404 : 409, e.what());
      }
    });

    server.Get(R"(/api/case/([^/]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
      Served* c = find(req.matches[1]);
      if (!c) return fail(res, 404, "unknown case");
      std::lock_guard lock(c->mutex);
      json out = json::array();
      for (const auto& t : c->session.trace()) out.push_back(trace_point_json(t));
      reply(res, 200, out);
    });

    server.Post(R"(/api/case/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      Served* c = find(req.matches[1]);
      if (!c) return fail(res, 404, "unknown case");
      std::lock_guard lock(c->mutex);
      try {
        std::filesystem::create_directories(export_dir);
        const auto mask_path = export_dir / (c->session.case_id() + "_corrected.grd");
        const auto session_path = export_dir / (c->session.case_id() + "_session.json");
        save_grid(c->session.final_mask(), mask_path);
        std::ofstream(session_path) << c->session.export_json() << '\n';
        reply(res, 200, {{"path", mask_path.string()}, {"session", session_path.string()}});
      } catch (const std::exception& e) {
        fail(res, 500, e.what());
      }
    });
  }
};

ProofreadService::ProofreadService(std::filesystem::path export_dir) : impl_(std::make_unique<Impl>()) {
  impl_->export_dir = std::move(export_dir);
  impl_->routes();
}

ProofreadService::~ProofreadService() { stop(); }

void ProofreadService::add_case(ScalarGrid image, ScalarGrid likelihood, Session session) {
  require(!impl_->cases.count(session.case_id()), "service: duplicate case id " + session.case_id());
  require(image.shape() == session.skeleton().source_shape && likelihood.shape() == image.shape(),
          "service: case grids differ in dims");
  const std::string id = session.case_id();
  impl_->cases.emplace(id, std::unique_ptr<Impl::Served>(
                               new Impl::Served{std::move(image), std::move(likelihood), std::move(session), {}}));
}

int ProofreadService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ProofreadService::listen() { return impl_->server.listen_after_bind(); }

void ProofreadService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool ProofreadService::running() const { return impl_->server.is_running(); }

}  // namespace morseuq
