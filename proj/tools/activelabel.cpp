// activelabel: command-line entry point. Logs go to stderr; data goes to
// stdout or to the named files.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "activelabel/active_loop.hpp"
#include "activelabel/config.hpp"
#include "activelabel/error.hpp"
#include "activelabel/seqmodel.hpp"
#include "activelabel/service.hpp"
#include "activelabel/synthetic.hpp"

// Keep below Eigen: <resolv.h> defines a `_res` macro.
#include "activelabel/http.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace activelabel;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
};

void log_line(const std::string& line) { std::cerr << "activelabel: " << line << '\n'; }

Config resolve_config(const Globals& g) {
  Config c = g.config_path.empty() ? Config{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

void echo_config(const Config& c) { log_line("config " + config_to_json(c).dump()); }

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json eval = nlohmann::json::object();
  for (const auto& [task, report] : m.eval) eval[std::string(to_string(task))] = report;
  return {{"round", m.round}, {"eval", eval}, {"counts", counts_to_json(m.counts)}};
}

void run_synth(const Globals& g, const std::string& spec_path, const fs::path& out_dir) {
  SynthSpec spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open spec " + spec_path);
    try {
      spec = nlohmann::json::parse(in).get<SynthSpec>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, spec_path + ": " + e.what());
    }
  }
  if (g.seed) spec.seed = *g.seed;
  log_line("spec " + nlohmann::json(spec).dump());
  const auto synth = generate_synthetic_corpus(spec);

  std::ostringstream corpus;
  write_corpus(corpus, synth.documents);
  write_text(out_dir / "corpus.jsonl", corpus.str());
  std::ostringstream vectors;
  write_embedding_text(vectors, synth.embedding_tokens, synth.embedding_vectors);
  write_text(out_dir / "embeddings.txt", vectors.str());
  write_text(out_dir / "taxonomy.json", nlohmann::json(synth.taxonomy).dump(2) + "\n");

  auto config = synthetic_benchmark_config("corpus.jsonl", "embeddings.txt");
  config.taxonomy = synth.taxonomy;
  config.embedding.dim = spec.embedding_dim;
  write_text(out_dir / "config.json", config_to_json(config).dump(2) + "\n");
  log_line("wrote " + std::to_string(synth.documents.size()) + " documents to " + out_dir.string());
}

void run_simulate(const Globals& g, const std::string& out_path) {
  if (g.config_path.empty()) throw Error(ErrorCode::ConfigError, "simulate needs --config");
  const auto config = resolve_config(g);
  echo_config(config);
  const auto data = load_experiment_data(config);
  const auto experiment = experiment_config(config);
  log_line("pool labeled=" + std::to_string(data.pool.labeled.size()) +
           " unlabeled=" + std::to_string(data.pool.unlabeled.size()) +
           " validation=" + std::to_string(data.pool.validation.size()));
  const auto start = std::chrono::steady_clock::now();
  const auto curves = run_experiment(data, experiment);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log_line("simulation finished in " + std::to_string(seconds) + " s");
  if (out_path.empty() || out_path == "-") {
    write_curves_csv(std::cout, curves);
  } else {
    auto out = open_output(out_path);
    write_curves_csv(out, curves);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_path);
  }
}

void run_ingest(const Globals& g, const std::string& corpus_path, const fs::path& store) {
  std::ifstream file(corpus_path);
  if (!file) throw Error(ErrorCode::IoError, "cannot open corpus " + corpus_path);
  const std::string text{std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
  try {
    std::istringstream rows(text);
    read_corpus(rows);
  } catch (const Error& e) {
    throw Error(e.code(), corpus_path + ": " + e.detail(), e.line());
  }
  if (!fs::exists(store / Service::kStateFile)) {
    const auto config = resolve_config(g);
    Service::init_store(store, config);
    log_line("created store " + store.string());
  } else if (!g.config_path.empty() || g.seed) {
    log_line("store exists; --config and --seed are ignored");
  }
  Service service(store);
  echo_config(service.config());
  std::istringstream in(text);
  PoolCounts counts;
  try {
    counts = service.ingest(in);
  } catch (const Error& e) {
    throw Error(e.code(), corpus_path + ": " + e.detail(), e.line());
  }
  std::cout << counts_to_json(counts).dump() << '\n';
}

void run_serve(const fs::path& store, const std::string& host, int port) {
  Service service(store);
  echo_config(service.config());
  httplib::Server server;
  mount_routes(server, service);
  server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    log_line(req.method + " " + req.path + " " + std::to_string(res.status));
  });
  if (!server.bind_to_port(host, port)) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  log_line("listening on " + host + ":" + std::to_string(port));
  server.listen_after_bind();
}

void run_retrain(const fs::path& store) {
  Service service(store);
  echo_config(service.config());
  const auto job = service.trigger_retrain();
  log_line("training job " + std::to_string(job));
  service.wait_for_training();
  const auto status = service.train_status();
  if (status.state == JobState::Failed) throw Error(ErrorCode::NumericError, "training failed: " + status.error);
  std::cout << metrics_json(service.get_metrics()).dump() << '\n';
}

void run_eval(const fs::path& store) {
  Service service(store);
  echo_config(service.config());
  std::cout << metrics_json(service.get_metrics()).dump() << '\n';
}

void run_export_curve(const fs::path& store, const std::string& format, const std::string& out_path) {
  Service service(store);
  std::string text;
  if (format == "csv") {
    text = service.curve_csv();
  } else {
    const auto curve = service.get_curve();
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : curve.points) {
      nlohmann::json eval = nlohmann::json::object();
      for (const auto& [task, report] : p.eval) eval[std::string(to_string(task))] = report;
      points.push_back({{"round", p.round}, {"labeled_count", p.labeled_count}, {"eval", eval}});
    }
    text = nlohmann::json{{"setting", curve.setting}, {"points", points}}.dump(2) + "\n";
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

int run_gradcheck(const Globals& g, std::size_t models) {
  const auto checks = check_tiny_models(models, g.seed.value_or(1));
  double worst = 0;
  for (const auto& c : checks) {
    log_line("T=" + std::to_string(c.steps) + " D=" + std::to_string(c.input_dim) + " H=" + std::to_string(c.hidden) +
             " C=" + std::to_string(c.classes) + " max_rel=" + std::to_string(c.report.max_relative_error) + " (" +
             c.report.worst_parameter + ")");
    worst = std::max(worst, c.report.max_relative_error);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", worst);
  std::cout << "max_relative_error " << buf << '\n';
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning engine for multi-label review classification"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);

  std::string spec_path, out_dir, out_path, corpus_path, store, host = "127.0.0.1", format = "csv";
  int port = 8080;
  std::size_t models = 5;

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus, embeddings and benchmark config");
  synth->add_option("--spec", spec_path, "Generator spec JSON")->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* simulate = app.add_subcommand("simulate", "Run a simulated active-learning experiment");
  simulate->add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  simulate->add_option("--out", out_path, "Curve CSV path (- for stdout)");

  auto* ingest = app.add_subcommand("ingest", "Add corpus JSONL to a store, creating it if needed");
  ingest->add_option("corpus", corpus_path, "Corpus JSONL")->required();
  ingest->add_option("--store", store, "Store directory")->required();

  auto* serve = app.add_subcommand("serve", "Serve the annotation API");
  serve->add_option("--store", store, "Store directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));

  auto* retrain = app.add_subcommand("retrain", "Train a new round on the store's labels");
  retrain->add_option("--store", store, "Store directory")->required()->check(CLI::ExistingDirectory);

  auto* eval = app.add_subcommand("eval", "Print the latest round's validation metrics");
  eval->add_option("--store", store, "Store directory")->required()->check(CLI::ExistingDirectory);

  auto* export_curve = app.add_subcommand("export-curve", "Write the store's learning curve");
  export_curve->add_option("--store", store, "Store directory")->required()->check(CLI::ExistingDirectory);
  export_curve->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  export_curve->add_option("--out", out_path, "Output path (- for stdout)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  gradcheck->add_option("--models", models, "Number of random tiny models")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*synth) run_synth(g, spec_path, out_dir);
    if (*simulate) run_simulate(g, out_path);
    if (*ingest) run_ingest(g, corpus_path, store);
    if (*serve) run_serve(store, host, port);
    if (*retrain) run_retrain(store);
    if (*eval) run_eval(store);
    if (*export_curve) run_export_curve(store, format, out_path);
    if (*gradcheck) return run_gradcheck(g, models);
  } catch (const std::exception& e) {
    std::string message = e.what();
    for (auto& ch : message)
      if (ch == '\n') ch = ' ';
    std::cerr << "activelabel: error: " << message << '\n';
    return 2;
  }
  return 0;
}
