#include "morseuq/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <deque>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "morseuq/corpus.hpp"
#include "morseuq/grid_io.hpp"
#include "morseuq/metrics.hpp"
#include "morseuq/proofread.hpp"
#include "morseuq/service.hpp"
#include "morseuq/structgraph.hpp"

namespace morseuq::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Role { param, input, output };

// One subcommand: its CLI11 app plus a record of every option so the
// resolved configuration can be written out and replayed.
struct Command {
  CLI::App* app = nullptr;
  std::vector<std::tuple<std::string, Role, std::function<json()>>> fields;
  std::function<void()> action;
};

template <class T>
CLI::Option* add(Command& c, const std::string& name, T& var, const std::string& help, Role role = Role::param) {
  c.fields.emplace_back(name, role, [&var] { return json(var); });
  return c.app->add_option("--" + name, var, help)->capture_default_str();
}

std::string arg_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + arg_string(v[i]);
    return s;
  }
  return v.dump();
}

json manifest(const Command& c, std::uint64_t seed) {
  json config = json::object(), inputs = json::object(), outputs = json::object();
  json args = json::array({c.app->get_name()});
  for (const auto& [name, role, get] : c.fields) {
    const json v = get();
    if (role == Role::input) inputs[name] = v;
    if (role == Role::output) outputs[name] = v;
    config[name] = v;
    if (v.is_string() && v.get<std::string>().empty()) continue;
    args.push_back("--" + name);
    args.push_back(arg_string(v));
  }
  return {{"tool", kToolName}, {"version", kToolVersion}, {"subcommand", c.app->get_name()},
          {"seed", seed},      {"config", config},        {"inputs", inputs},
          {"outputs", outputs}, {"args", args}};
}

void write_manifest(const fs::path& path, const json& m) {
  write_text(path, m.dump(2) + "\n");
  spdlog::debug("manifest written to {}", path.string());
}

fs::path file_manifest(const std::string& out) { return fs::path(out + ".manifest.json"); }

struct SamplerFlags {
  double u = 0.3, gamma = 0.2, alpha = 2.0, beta = 0.01;
  int max_step = 50;

  void add_to(Command& c) {
    add(c, "u", u, "Probability of keeping the deterministic structure");
    add(c, "gamma", gamma, "Weight of the distance term in the walk");
    add(c, "alpha", alpha, "Inverse-Gamma shape");
    add(c, "beta", beta, "Inverse-Gamma scale");
    add(c, "max-step", max_step, "Walk step limit");
  }
  SamplerConfig config(std::uint64_t seed) const {
    SamplerConfig s;
    s.u = u;
    s.gamma = gamma;
    s.alpha = alpha;
    s.beta = beta;
    s.max_step = max_step;
    s.seed = seed;
    return s;
  }
};

struct InferFlags {
  int runs = 5;
  double dropout = 0.2;
  bool mc_dropout = true;
  int box = kDefaultBox;
  double bg_threshold = kDefaultBackgroundThreshold;

  void add_to(Command& c) {
    add(c, "runs", runs, "Monte Carlo passes T");
    add(c, "dropout", dropout, "Dropout rate at inference");
    add(c, "mc-dropout", mc_dropout, "Keep dropout active at inference");
    add(c, "box", box, "Crop size per axis");
    add(c, "bg-threshold", bg_threshold, "Likelihood below this is background for the skeleton");
  }
};

struct CaseInference {
  MorseSkeleton skel;
  CaseResult result;
};

// Seeds are keyed on the case index, so a case's result does not depend on
// the other cases in the corpus.
CaseInference infer_one(const RegressorParams& params, const Case& c, std::size_t k, const SamplerFlags& sf,
                        const InferFlags& inf, std::uint64_t seed, int jobs) {
  if (params.rank != c.likelihood.shape().rank())
    throw DataError("case '" + c.name + "' is " + std::to_string(c.likelihood.shape().rank()) +
                    "D but the model is " + std::to_string(params.rank) + "D");
  CaseInference out;
  out.skel = skeletonize(c.likelihood, inf.bg_threshold);
  InferConfig cfg;
  cfg.runs = inf.runs;
  cfg.dropout = inf.dropout;
  cfg.mc_dropout = inf.mc_dropout;
  cfg.box = inf.box;
  cfg.jobs = jobs;
  cfg.seed = derive_seed({seed, 0xD0D0, static_cast<std::uint64_t>(k)});
  out.result = infer_case(params, out.skel, c.image, c.likelihood, sf.config(case_sampler_seed(seed, k)), cfg);
  spdlog::info("{}: {} structures, {} accepted", c.name, out.skel.structures.size(),
               std::count_if(out.result.estimates.begin(), out.result.estimates.end(),
                             [](const StructureEstimate& e) { return e.accepted; }));
  return out;
}

void write_inference(const fs::path& dir, const CaseInference& ci) {
  fs::create_directories(dir);
  std::string lines;
  for (const auto& e : ci.result.estimates)
    lines += estimate_record(e, ci.skel.structures[static_cast<std::size_t>(e.structure_id)]) + "\n";
  write_text(dir / "estimates.jsonl", lines);
  save_grid(ci.result.final_mask, dir / "final_mask.grd");
  save_grid(ci.result.heatmap, dir / "heatmap.grd");
  save_grid(ci.result.skeletal_mask, dir / "skeleton.grd");
  save_grid(ci.result.backbone_seg, dir / "backbone.grd");
}

json betti_json(const std::vector<int>& b) { return json(b); }

struct Report {
  json body;
  std::vector<CalSample> samples;
};

Report evaluate(const BinaryGrid& pred, const BinaryGrid& gt, const std::vector<EstimateRecord>* estimates,
                int bins) {
  if (pred.shape() != gt.shape()) throw DataError("eval: prediction and ground truth differ in dims");
  Report r;
  const AriVoi av = ari_voi(pred, gt);
  r.body = {{"dice", dice(pred, gt)},
            {"cldice", cldice(pred, gt)},
            {"ari", av.ari},
            {"voi", av.voi},
            {"betti_pred", betti_json(betti_numbers(pred))},
            {"betti_gt", betti_json(betti_numbers(gt))},
            {"betti_errors", betti_json(betti_errors(pred, gt))}};
  if (estimates && !estimates->empty()) {
    std::vector<StructureEstimate> est;
    std::vector<double> z;
    for (const auto& rec : *estimates) {
      for (const Coord& c : rec.path)
        if (!gt.shape().contains(c)) throw DataError("eval: estimate path leaves the grid");
      est.push_back(rec.estimate);
      z.push_back(soft_label(rec.path, gt));
    }
    r.samples = structure_samples(est, z);
    const Calibration cal = calibration(r.samples, bins);
    r.body["ece"] = cal.ece;
    r.body["structures"] = est.size();
  }
  return r;
}

class Cli {
 public:
  Cli() : app_("Structure-wise uncertainty for curvilinear segmentation", kToolName) {
    app_.require_subcommand(1);
    app_.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    synth();
    skeletonize_cmd();
    sample();
    train_cmd();
    infer();
    eval();
    proofread_sim();
    serve();
    replay();
  }

  int run(std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    try {
      app_.parse(args);
    } catch (const CLI::ParseError& e) {
      const int code = app_.exit(e);
      return code == 0 ? kOk : kUsage;
    }
    for (auto& c : commands_)
      if (c.app->parsed()) {
        try {
          c.action();
        } catch (const CLI::Error& e) {
          spdlog::error("{}: {}", c.app->get_name(), e.what());
          return kUsage;
        } catch (const std::exception& e) {
          spdlog::error("{}: {}", c.app->get_name(), e.what());
          return kFailure;
        }
        return replay_result_;
      }
    return kUsage;
  }

 private:
  Command& command(const std::string& name, const std::string& help) {
    commands_.push_back({});
    Command& c = commands_.back();
    c.app = app_.add_subcommand(name, help);
    add(c, "seed", seed_, "Master seed");
    add(c, "jobs", jobs_, "Worker threads")->check(CLI::PositiveNumber);
    return c;
  }

  void synth() {
    Command& c = command("synth", "Write a synthetic corpus");
    add(c, "out", out_, "Output corpus directory", Role::output)->required();
    add(c, "cases", cases_, "Number of cases")->check(CLI::PositiveNumber);
    add(c, "shape", synth_.shape, "Grid dims, comma separated")->delimiter(',');
    add(c, "n-curves", synth_.n_curves, "Curves per case");
    add(c, "thickness", synth_.thickness, "Curve thickness in voxels");
    add(c, "gap-rate", synth_.gap_rate, "Chance of a gap per curve segment");
    add(c, "spur-rate", synth_.spur_rate, "Chance of a spur per curve segment");
    add(c, "blur", synth_.blur, "Gaussian blur sigma of the likelihood");
    add(c, "noise", synth_.noise, "Additive noise sigma of the likelihood");
    c.action = [this, &c] {
      for (int k = 0; k < cases_; ++k) {
        SynthConfig sc;
        sc.shape = Shape(std::span<const int>(synth_.shape));
        sc.n_curves = synth_.n_curves;
        sc.thickness = synth_.thickness;
        sc.gap_rate = synth_.gap_rate;
        sc.spur_rate = synth_.spur_rate;
        sc.blur_sigma = synth_.blur;
        sc.noise_sigma = synth_.noise;
        sc.seed = derive_seed({seed_, static_cast<std::uint64_t>(k)});
        write_case(fs::path(out_) / case_dir_name(k), generate_case(sc));
      }
      spdlog::info("wrote {} cases to {}", cases_, out_);
      write_manifest(fs::path(out_) / "manifest.json", manifest(c, seed_));
    };
  }

  void skeletonize_cmd() {
    Command& c = command("skeletonize", "Extract ridge structures as JSON Lines");
    add(c, "likelihood", likelihood_, "Likelihood grid", Role::input)->required()->check(CLI::ExistingFile);
    add(c, "out", out_, "Output .jsonl", Role::output)->required();
    add(c, "bg-threshold", infer_.bg_threshold, "Background threshold");
    c.action = [this, &c] {
      const MorseSkeleton skel = skeletonize(load_scalar(likelihood_), infer_.bg_threshold);
      std::string lines;
      for (const auto& s : skel.structures) lines += structure_record(s) + "\n";
      write_text(out_, lines);
      spdlog::info("{} structures", skel.structures.size());
      write_manifest(file_manifest(out_), manifest(c, seed_));
    };
  }

  void sample() {
    Command& c = command("sample", "Draw perturbed skeletons, one JSON Lines file per run");
    add(c, "likelihood", likelihood_, "Likelihood grid", Role::input)->required()->check(CLI::ExistingFile);
    add(c, "out", out_, "Output directory", Role::output)->required();
    add(c, "runs", infer_.runs, "Number of runs")->check(CLI::PositiveNumber);
    add(c, "bg-threshold", infer_.bg_threshold, "Background threshold");
    sampler_.add_to(c);
    c.action = [this, &c] {
      const ScalarGrid f = load_scalar(likelihood_);
      const MorseSkeleton skel = skeletonize(f, infer_.bg_threshold);
      const SamplerConfig sc = sampler_.config(seed_);
      for (int t = 1; t <= infer_.runs; ++t) {
        std::string lines;
        for (const auto& s : sample_skeleton(skel, f, sc, t, jobs_)) lines += sample_record(s, t) + "\n";
        write_text(fs::path(out_) / ("run_" + std::to_string(t) + ".jsonl"), lines);
      }
      write_manifest(fs::path(out_) / "manifest.json", manifest(c, seed_));
    };
  }

  void train_cmd() {
    Command& c = command("train", "Train the structure regressor");
    add(c, "corpus", corpus_, "Corpus directory", Role::input)->required()->check(CLI::ExistingDirectory);
    add(c, "out", out_, "Output checkpoint", Role::output)->required();
    add(c, "epochs", train_.epochs, "Epochs")->check(CLI::NonNegativeNumber);
    add(c, "lr", train_.lr, "Adam learning rate");
    add(c, "weight-decay", train_.weight_decay, "L2 weight decay");
    add(c, "dropout", train_.dropout, "Dropout rate");
    add(c, "box", train_.box, "Crop size per axis");
    add(c, "bg-threshold", train_.bg_threshold, "Background threshold");
    sampler_.add_to(c);
    c.action = [this, &c] {
      const auto corpus = load_corpus(corpus_);
      TrainConfig cfg = train_;
      cfg.seed = seed_;
      cfg.jobs = jobs_;
      std::string trace = "epoch,loss\n";
      const TrainResult r = train(corpus, sampler_.config(seed_), cfg, nullptr, [&](int epoch, double loss) {
        spdlog::info("epoch {} loss {:.6f}", epoch, loss);
        json row = json::array({epoch, loss});
        trace += std::to_string(epoch) + "," + row[1].dump() + "\n";
      });
      save_params(r.params, out_);
      write_text(out_ + ".loss.csv", trace);
      write_manifest(file_manifest(out_), manifest(c, seed_));
    };
  }

  void infer() {
    Command& c = command("infer", "Monte Carlo inference and overlay");
    add(c, "model", model_, "Checkpoint", Role::input)->required()->check(CLI::ExistingFile);
    auto* one = add(c, "case", case_, "Single case directory", Role::input)->check(CLI::ExistingDirectory);
    auto* many = add(c, "corpus", corpus_, "Corpus directory", Role::input)->check(CLI::ExistingDirectory);
    one->excludes(many);
    add(c, "out", out_, "Output directory", Role::output)->required();
    infer_.add_to(c);
    sampler_.add_to(c);
    c.action = [this, &c] {
      if (case_.empty() == corpus_.empty()) throw CLI::RequiredError("--case or --corpus");
      const RegressorParams params = load_params(model_);
      if (!case_.empty()) {
        write_inference(out_, infer_one(params, load_case(case_), 0, sampler_, infer_, seed_, jobs_));
      } else {
        const auto corpus = load_corpus(corpus_);
        for (std::size_t k = 0; k < corpus.size(); ++k)
          write_inference(fs::path(out_) / corpus[k].name,
                          infer_one(params, corpus[k], k, sampler_, infer_, seed_, jobs_));
      }
      write_manifest(fs::path(out_) / "manifest.json", manifest(c, seed_));
    };
  }

  void eval() {
    Command& c = command("eval", "Segmentation, topology and calibration metrics");
    auto* pred = add(c, "pred", pred_, "Predicted mask", Role::input)->check(CLI::ExistingFile);
    auto* gt = add(c, "gt", gt_, "Ground-truth mask", Role::input)->check(CLI::ExistingFile);
    add(c, "estimates", estimates_, "estimates.jsonl for calibration", Role::input)->check(CLI::ExistingFile);
    auto* dir = add(c, "infer-dir", infer_dir_, "Output of infer --corpus", Role::input)
                    ->check(CLI::ExistingDirectory);
    auto* corpus = add(c, "corpus", corpus_, "Corpus with ground truth", Role::input)->check(CLI::ExistingDirectory);
    add(c, "bins", bins_, "Calibration bins")->check(CLI::PositiveNumber);
    add(c, "out", out_, "Report file, or directory in corpus mode", Role::output);
    add(c, "reliability", reliability_, "Reliability CSV (single-case mode)", Role::output);
    pred->needs(gt);
    gt->needs(pred);
    dir->needs(corpus);
    corpus->needs(dir);
    pred->excludes(dir);
    c.action = [this, &c] {
      if (!infer_dir_.empty()) return eval_corpus(c);
      if (pred_.empty()) throw CLI::RequiredError("--pred/--gt or --infer-dir/--corpus");
      std::vector<EstimateRecord> est;
      if (!estimates_.empty()) est = read_estimates(estimates_);
      Report r = evaluate(load_binary(pred_), load_binary(gt_), &est, bins_);
      if (!reliability_.empty()) write_text(reliability_, reliability_csv(calibration(r.samples, bins_).rows));
      const json m = manifest(c, seed_);
      if (out_.empty()) {
        r.body["manifest"] = m;
      } else {
        write_text(out_, r.body.dump(2) + "\n");
        write_manifest(file_manifest(out_), m);
      }
      std::cout << r.body.dump(2) << std::endl;
    };
  }

  void eval_corpus(const Command& c) {
    if (out_.empty()) throw CLI::RequiredError("--out");
    const auto corpus = load_corpus(corpus_);
    std::vector<CalSample> pooled;
    json cases = json::array();
    const char* keys[] = {"dice", "cldice", "ari", "voi"};
    json sums = {{"dice", 0.0}, {"cldice", 0.0}, {"ari", 0.0}, {"voi", 0.0}};
    double ece_sum = 0.0;
    int ece_cases = 0;
    for (const Case& k : corpus) {
      if (!k.has_gt()) throw DataError("eval: case '" + k.name + "' has no ground truth");
      const fs::path d = fs::path(infer_dir_) / k.name;
      const auto est = read_estimates(d / "estimates.jsonl");
      Report r = evaluate(load_binary(d / "final_mask.grd"), k.gt, &est, bins_);
      write_text(fs::path(out_) / (k.name + ".json"), r.body.dump(2) + "\n");
      for (const char* key : keys) sums[key] = sums[key].get<double>() + r.body[key].get<double>();
      if (r.body.contains("ece")) {
        ece_sum += r.body["ece"].get<double>();
        ++ece_cases;
      }
      pooled.insert(pooled.end(), r.samples.begin(), r.samples.end());
      cases.push_back(k.name);
    }
    json agg = {{"cases", cases}};
    for (const char* key : keys) agg[std::string("mean_") + key] = sums[key].get<double>() / corpus.size();
    if (!pooled.empty()) {
      const Calibration cal = calibration(pooled, bins_);
      agg["pooled_ece"] = cal.ece;
      agg["mean_case_ece"] = ece_sum / ece_cases;
      write_text(fs::path(out_) / "reliability.csv", reliability_csv(cal.rows));
    }
    write_text(fs::path(out_) / "aggregate.json", agg.dump(2) + "\n");
    write_manifest(fs::path(out_) / "manifest.json", manifest(c, seed_));
    std::cout << agg.dump(2) << std::endl;
  }

  void proofread_sim() {
    Command& c = command("proofread-sim", "Oracle proofreading curves (clicks vs Dice)");
    add(c, "corpus", corpus_, "Corpus with ground truth", Role::input)->required()->check(CLI::ExistingDirectory);
    add(c, "model", model_, "Checkpoint", Role::input)->required()->check(CLI::ExistingFile);
    add(c, "out", out_, "Output CSV", Role::output)->required();
    infer_.add_to(c);
    sampler_.add_to(c);
    c.action = [this, &c] {
      const auto corpus = load_corpus(corpus_);
      const RegressorParams params = load_params(model_);
      std::vector<std::string> names;
      std::vector<std::vector<CurvePoint>> curves;
      for (std::size_t k = 0; k < corpus.size(); ++k) {
        if (!corpus[k].has_gt()) throw DataError("proofread-sim: case '" + corpus[k].name + "' has no ground truth");
        const CaseInference ci = infer_one(params, corpus[k], k, sampler_, infer_, seed_, jobs_);
        curves.push_back(simulate(ci.skel, ci.result, corpus[k].gt));
        names.push_back(corpus[k].name);
        spdlog::info("{}: {} clicks, dice {:.4f} -> {:.4f}", names.back(), curves.back().size() - 1,
                     curves.back().front().dice, curves.back().back().dice);
      }
      write_text(out_, curves_csv(names, curves));
      write_manifest(file_manifest(out_), manifest(c, seed_));
    };
  }

  void serve() {
    Command& c = command("serve", "Serve proofreading sessions over HTTP");
    add(c, "corpus", corpus_, "Corpus directory", Role::input)->required()->check(CLI::ExistingDirectory);
    add(c, "model", model_, "Checkpoint", Role::input)->required()->check(CLI::ExistingFile);
    add(c, "host", host_, "Bind address");
    add(c, "port", port_, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    add(c, "export-dir", export_dir_, "Where exports are written", Role::output);
    infer_.add_to(c);
    sampler_.add_to(c);
    c.action = [this, &c] {
      const auto corpus = load_corpus(corpus_);
      const RegressorParams params = load_params(model_);
      ProofreadService svc(export_dir_);
      for (std::size_t k = 0; k < corpus.size(); ++k) {
        CaseInference ci = infer_one(params, corpus[k], k, sampler_, infer_, seed_, jobs_);
        std::optional<BinaryGrid> gt;
        if (corpus[k].has_gt()) gt = corpus[k].gt;
        svc.add_case(corpus[k].image, corpus[k].likelihood,
                     Session(corpus[k].name, std::move(ci.skel), std::move(ci.result), std::move(gt)));
      }
      write_manifest(fs::path(export_dir_) / "manifest.json", manifest(c, seed_));
      const int bound = svc.bind(host_, port_);
      if (bound < 0) throw DataError("cannot bind " + host_ + ":" + std::to_string(port_));
      spdlog::info("serving {} cases on http://{}:{}", corpus.size(), host_, bound);
      svc.listen();
    };
  }

  void replay() {
    commands_.push_back({});
    Command& c = commands_.back();
    c.app = app_.add_subcommand("replay", "Re-run the command recorded in a manifest");
    c.app->add_option("--manifest", manifest_path_, "Manifest JSON")->required()->check(CLI::ExistingFile);
    c.action = [this] {
      json m;
      try {
        m = json::parse(read_text(manifest_path_));
      } catch (const json::exception& e) {
        throw DataError("malformed manifest: " + std::string(e.what()));
      }
      if (!m.contains("args") || !m["args"].is_array() || m["args"].empty() || m["args"][0] == "replay")
        throw DataError("manifest has no replayable args");
      const auto args = m["args"].get<std::vector<std::string>>();
      spdlog::info("replaying {}", args.front());
      replay_result_ = Cli().run(args);
    };
  }

  CLI::App app_;
  std::deque<Command> commands_;
  int replay_result_ = kOk;

  std::uint64_t seed_ = 0;
  int jobs_ = 1;
  std::string out_, likelihood_, corpus_, model_, case_, pred_, gt_, estimates_, infer_dir_, reliability_;
  std::string manifest_path_;
  std::string host_ = "127.0.0.1";
  std::string export_dir_ = "exports";
  int port_ = 8080;
  int cases_ = 20;
  int bins_ = kCalibrationBins;
  struct {
    std::vector<int> shape{64, 64};
    int n_curves = 3, thickness = 2;
    double gap_rate = 0.0, spur_rate = 0.0, blur = 1.0, noise = 0.0;
  } synth_;
  SamplerFlags sampler_;
  InferFlags infer_;
  TrainConfig train_;
};

}  // namespace

void configure_logging() {
  auto logger = spdlog::get("morseuq");
  if (!logger) logger = spdlog::stderr_logger_mt("morseuq");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("MORSEUQ_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("MORSEUQ_LOG='{}' not recognised; using info", level);
  }
}

int run(const std::vector<std::string>& args) {
  Cli cli;
  return cli.run(args);
}

}  // namespace morseuq::cli
