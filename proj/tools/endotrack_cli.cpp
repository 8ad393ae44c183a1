#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "endotrack/bridge.hpp"
#include "endotrack/error.hpp"
#include "endotrack/sim/corpus.hpp"
#include "endotrack/sim/loop.hpp"
#include "endotrack/sim/metrics.hpp"
#include "endotrack/sim/scenario.hpp"
#include "endotrack/sim/servo_compare.hpp"
#include "endotrack/tiplocate/evaluate.hpp"

namespace fs = std::filesystem;
using namespace endotrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

std::atomic<bool> g_stop{false};

void setup_logging() {
  auto log = spdlog::stderr_color_mt("endotrack");
  spdlog::set_default_logger(log);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("ENDOTRACK_LOG_LEVEL")) {
    const auto parsed = spdlog::level::from_str(lvl);
    if (parsed == spdlog::level::off && std::string(lvl) != "off")
      spdlog::warn("ENDOTRACK_LOG_LEVEL={} not recognised, keeping info", lvl);
    else
      spdlog::set_level(parsed);
  }
}

Exec exec_mode(bool serial) { return serial ? Exec::Serial : Exec::Parallel; }

std::vector<fs::path> scenario_files(const fs::path& p) {
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(Errc::ConfigInvalid, "no scenario files in " + p.string());
  return out;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + p.string());
  out << s;
}

int simulate(const std::string& input, const std::string& out_dir, bool serial) {
  const auto files = scenario_files(input);
  // Validate the whole pack before running anything.
  std::vector<sim::ScenarioConfig> configs;
  for (const auto& f : files) {
    configs.push_back(sim::load_scenario(f.string()));
    const auto& sc = configs.back();
    spdlog::debug("{}: seed {}, servo {}, sensor {} Hz delay {} s, {} instruments", f.string(), sc.seed,
                  servo::to_string(sc.servo.method), sc.sensor.rate, sc.sensor.delay, sc.scene.instruments.size());
  }
  fs::create_directories(out_dir);
  const bool pack = files.size() > 1 || fs::is_directory(input);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& sc = configs[i];
    spdlog::info("running {} ({} s at {} Hz)", sc.name, sc.duration, sc.control_rate);
    const sim::RunLog log = sim::run_closed_loop(sc, exec_mode(serial));
    const auto m = sim::compute_metrics(log);
    const std::string stem = files[i].stem().string();
    const fs::path csv = fs::path(out_dir) / (pack ? stem + ".csv" : "runlog.csv");
    const fs::path summary = fs::path(out_dir) / (pack ? stem + ".metrics.json" : "metrics.json");
    sim::write_runlog_csv(log, csv.string());
    write_text(summary, sim::metrics_json(m, log.name));
    spdlog::info("{}: {} rows, {} tracking episodes, {} hysteresis violations -> {}", sc.name, log.rows.size(),
                 m.tracking_episodes, m.hysteresis_violations, csv.string());
  }
  return kExitOk;
}

int servo_compare(const std::string& out_dir) {
  const auto rep = sim::servo_compare(out_dir);
  sim::ServoCompareOptions opt;
  std::cout << rep.to_json(opt.servo).dump(2) << '\n';
  spdlog::info("servo comparison: {} runs in {:.3f} s -> {}", rep.runs.size(), rep.seconds, out_dir);
  return kExitOk;
}

int eval_corpus(const std::string& manifest, bool serial) {
  const auto m = tiplocate::load_manifest(manifest);
  spdlog::info("evaluating {} frames", m.frames.size());
  spdlog::debug("boxes {} px on a {}x{} image", m.box_side, m.image_width, m.image_height);
  const auto r = tiplocate::evaluate_corpus(m, tiplocate::LocalizerConfig{}, exec_mode(serial));
  nlohmann::json j{{"frames", r.frames},
                   {"frames_with_tips", r.frames_with_tips},
                   {"frames_hit", r.frames_hit},
                   {"tp", r.tp},
                   {"fp", r.fp},
                   {"fn", r.fn},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"at_least_one_rate", r.at_least_one_rate},
                   {"seconds", r.seconds}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int make_corpus(const std::string& out_dir, int frames, unsigned seed, bool intensity) {
  sim::CorpusOptions opt;
  opt.frames = frames;
  opt.seed = seed;
  opt.intensity = intensity;
  const auto m = sim::make_corpus(out_dir, opt);
  spdlog::info("wrote {} frames to {}", m.frames.size(), (fs::path(out_dir) / "manifest.json").string());
  return kExitOk;
}

int serve(const std::string& scenario, int port) {
  const auto sc = sim::load_scenario(scenario);
  bridge::Server server(sc, port);
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  spdlog::info("bridge listening on 127.0.0.1:{} (schema {})", server.port(), bridge::kSchemaVersion);
  server.run(g_stop);
  return kExitOk;
}

int bridge_record(const std::string& scenario, const std::string& script, const std::string& out, double duration) {
  const auto sc = sim::load_scenario(scenario);
  const auto in = bridge::read_transcript(script);
  spdlog::debug("{} scripted entries over {} s", in.size(), duration);
  const auto entries = bridge::replay(sc, in, duration);
  bridge::write_transcript(out, entries);
  spdlog::info("recorded {} messages to {}", entries.size(), out);
  return kExitOk;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::ConfigInvalid:
    case Errc::ManifestInvalid:
    case Errc::InvalidWeight:
      return kExitConfig;
    case Errc::DivergedSimulation:
      return kExitDiverged;
    default:
      return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Autonomous endoscope steering: simulation, servoing comparison, localization evaluation"};
  app.require_subcommand(1);
  bool serial = false;
  app.add_flag("--serial", serial, "Run kernels single-threaded");

  std::string scenario, out_dir, manifest, script;
  int port = 0, frames = 300;
  unsigned seed = 7;
  bool intensity = false;
  double duration = 4.0;

  auto* sim_cmd = app.add_subcommand("simulate", "Run a scenario file or a directory of scenarios");
  sim_cmd->add_option("scenario", scenario, "Scenario file or directory")->required();
  sim_cmd->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* cmp_cmd = app.add_subcommand("servo-compare", "Compare the five servoing laws on the canonical setup");
  cmp_cmd->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval-corpus", "Score the tip detector on a labelled corpus");
  eval_cmd->add_option("manifest", manifest, "Corpus manifest")->required();

  auto* corpus_cmd = app.add_subcommand("make-corpus", "Render a labelled synthetic corpus");
  corpus_cmd->add_option("-o,--out", out_dir, "Output directory")->required();
  corpus_cmd->add_option("--frames", frames, "Number of frames")->check(CLI::PositiveNumber);
  corpus_cmd->add_option("--seed", seed, "Random seed");
  corpus_cmd->add_flag("--intensity", intensity, "Also write the stereo intensity images");

  auto* serve_cmd = app.add_subcommand("serve", "Run a scenario interactively behind the steering bridge");
  serve_cmd->add_option("scenario", scenario, "Scenario file")->required();
  serve_cmd->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks one)")->check(CLI::Range(0, 65535));

  auto* rec_cmd = app.add_subcommand("bridge-record", "Replay client messages against a bridge session and record the transcript");
  rec_cmd->add_option("scenario", scenario, "Scenario file")->required();
  rec_cmd->add_option("script", script, "Transcript whose \"in\" messages are replayed")->required();
  rec_cmd->add_option("-o,--out", out_dir, "Output transcript")->required();
  rec_cmd->add_option("--duration", duration, "Simulated seconds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim_cmd) return simulate(scenario, out_dir, serial);
    if (*cmp_cmd) return servo_compare(out_dir);
    if (*eval_cmd) return eval_corpus(manifest, serial);
    if (*corpus_cmd) return make_corpus(out_dir, frames, seed, intensity);
    if (*serve_cmd) return serve(scenario, port);
    if (*rec_cmd) return bridge_record(scenario, script, out_dir, duration);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
