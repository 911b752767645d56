#include "morseuq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "morseuq/grid_io.hpp"

namespace morseuq {

namespace {

using nlohmann::json;

json coord_json(const Coord& c) {
  json a = json::array();
  for (int i = 0; i < c.rank; ++i) a.push_back(c[i]);
  return a;
}

json path_json(const std::vector<Coord>& path) {
  json a = json::array();
  for (const auto& c : path) a.push_back(coord_json(c));
  return a;
}

Coord coord_from(const json& j) {
  if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxRank))
    throw DataError("bad coordinate " + j.dump());
  Coord c;
  c.rank = static_cast<int>(j.size());
  for (int i = 0; i < c.rank; ++i) c[i] = j[static_cast<std::size_t>(i)].get<int>();
  return c;
}

// -1 when the name is not case_<digits>.
long case_index(const std::string& name) {
  if (name.rfind("case_", 0) != 0 || name.size() == 5) return -1;
  const std::string digits = name.substr(5);
  if (!std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) return -1;
  return std::stol(digits);
}

}  // namespace

std::string case_dir_name(int k) { return "case_" + std::to_string(k); }

void write_case(const std::filesystem::path& dir, const SynthCase& c) {
  std::filesystem::create_directories(dir);
  save_grid(c.image, dir / "image.grd");
  save_grid(c.likelihood, dir / "likelihood.grd");
  save_grid(c.gt, dir / "gt.grd");
}

Case load_case(const std::filesystem::path& dir) {
  Case c;
  c.name = dir.filename().string();
  c.image = load_scalar(dir / "image.grd");
  c.likelihood = load_scalar(dir / "likelihood.grd");
  if (std::filesystem::exists(dir / "gt.grd")) c.gt = load_binary(dir / "gt.grd");
  if (c.image.shape() != c.likelihood.shape() || (c.has_gt() && c.gt.shape() != c.image.shape()))
    throw DataError("case '" + c.name + "': grids differ in dims");
  return c;
}

std::vector<Case> load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("corpus: not a directory: " + dir.string());
  std::vector<std::pair<long, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const long k = case_index(entry.path().filename().string());
    if (k >= 0) found.emplace_back(k, entry.path());
  }
  std::sort(found.begin(), found.end());
  if (found.empty()) throw DataError("corpus: no case_<k> directories in " + dir.string());
  std::vector<Case> out;
  for (const auto& [k, p] : found) out.push_back(load_case(p));
  return out;
}

std::string structure_record(const Structure& s) {
  return json{{"id", s.id},
              {"saddle", coord_json(s.saddle)},
              {"max", coord_json(s.max)},
              {"path", path_json(s.path)},
              {"persistence", s.persistence},
              {"pair_id", s.pair_id},
              {"leg", s.leg == Leg::young ? "young" : "elder"}}
      .dump();
}

std::string sample_record(const SampledSkeleton& s, int run_index) {
  return json{{"run", run_index},
              {"id", s.structure_id},
              {"path", path_json(s.path)},
              {"reached", s.reached},
              {"retained", s.was_retained}}
      .dump();
}

std::string estimate_record(const StructureEstimate& e, const Structure& s) {
  return json{{"id", e.structure_id}, {"p_bar", e.p_bar},       {"var_bar", e.var_bar},
              {"u_norm", e.u_norm},    {"accepted", e.accepted}, {"path", path_json(s.path)}}
      .dump();
}

std::vector<EstimateRecord> read_estimates(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<EstimateRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EstimateRecord r;
      r.estimate.structure_id = j.at("id").get<int>();
      r.estimate.p_bar = j.at("p_bar").get<double>();
      r.estimate.var_bar = j.at("var_bar").get<double>();
      r.estimate.u_norm = j.at("u_norm").get<double>();
      r.estimate.accepted = j.at("accepted").get<bool>();
      for (const auto& c : j.at("path")) r.path.push_back(coord_from(c));
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace morseuq
