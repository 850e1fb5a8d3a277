// Copyright 2026 The astg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry point: run, simulate, eval, check.
//
// Exit codes: 0 success (or best effort), 2 grounding failure or unhealthy
// service, 1 usage or input error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "astg/astg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

// Engine flags shared by several commands. Only flags actually given end up
// in the override object, so they win over the config file and nothing else.
struct EngineFlags {
  std::optional<std::string> config_path;
  std::optional<int> stride;
  std::optional<double> dedup_threshold;
  bool no_dedup = false;
  std::optional<double> sample_fps;
  std::optional<double> scene_threshold;
  bool no_scene_filter = false;
  std::optional<int> context_capacity;
  std::optional<int> agent_retries;
  std::optional<std::string> agent_endpoint;
  std::optional<std::string> tracker_endpoint;
  std::optional<int> workers;

  void attach(CLI::App& app, bool with_stride = true) {
    app.add_option("--config", config_path, "JSON config file (falls back to $ASTG_CONFIG)");
    if (with_stride) app.add_option("--stride", stride, "proposal stride")->check(CLI::PositiveNumber);
    app.add_option("--dedup-threshold", dedup_threshold, "candidate memory IoU threshold");
    app.add_flag("--no-dedup", no_dedup, "disable candidate memory deduplication");
    app.add_option("--sample-fps", sample_fps, "sampling rate for frames-dir input");
    app.add_option("--scene-threshold", scene_threshold, "scene cut threshold");
    app.add_flag("--no-scene-filter", no_scene_filter, "keep every detected scene");
    app.add_option("--context-capacity", context_capacity, "dialogue context capacity");
    app.add_option("--agent-retries", agent_retries, "retries per agent call (0-2)");
    app.add_option("--agent-endpoint", agent_endpoint, "agent service base URL");
    app.add_option("--tracker-endpoint", tracker_endpoint, "tracker service base URL");
    app.add_option("--workers", workers, "worker threads");
  }

  json overrides() const {
    json j = json::object();
    if (stride) j["stride"] = *stride;
    if (dedup_threshold) j["dedup_threshold"] = *dedup_threshold;
    if (no_dedup) j["dedup_enabled"] = false;
    if (sample_fps) j["sample_fps"] = *sample_fps;
    if (scene_threshold) j["scene_threshold"] = *scene_threshold;
    if (no_scene_filter) j["scene_filter"] = false;
    if (context_capacity) j["context_capacity"] = *context_capacity;
    if (agent_retries) j["agent_retries"] = *agent_retries;
    if (agent_endpoint) j["agent_endpoint"] = *agent_endpoint;
    if (tracker_endpoint) j["tracker_endpoint"] = *tracker_endpoint;
    if (workers) j["workers"] = *workers;
    return j;
  }

  astg::EngineConfig resolve() const {
    return astg::resolve_config(config_path, astg::env_config_path(), overrides());
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw astg::Error("cannot write " + path.string());
  out << text;
}

template <class Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  write_text(path, os.str());
}

astg::sim::FaultSpec load_faults(const std::optional<std::string>& path) {
  if (!path) return {};
  return astg::sim::faults_from_json(astg::read_json_file(*path));
}

// ---- run -------------------------------------------------------------------

struct RunArgs {
  std::string input;
  std::optional<std::string> query;
  std::string backend = "scripted";
  std::string out = "trace.json";
  std::optional<std::string> pred;
  std::optional<std::string> video_id;
  std::optional<std::string> faults;
  std::optional<std::string> record;
  std::optional<std::string> replay;
  std::uint64_t seed = 0;
  EngineFlags engine;
};

int cmd_run(const RunArgs& a) {
  auto cfg = a.engine.resolve();
  if (a.backend == "remote") astg::validate(cfg, true);

  const fs::path input(a.input);
  if (!fs::exists(input)) throw astg::ConfigError("input does not exist: " + a.input);

  std::shared_ptr<const astg::sim::SimWorld> world;
  astg::FrameClip clip;
  std::string query;
  if (fs::is_directory(input)) {
    clip = astg::load_frames_dir(input, {cfg.sample_fps, cfg.sra_resolution});
    if (!a.query) throw astg::ConfigError("--query is required for frames-dir input");
    query = *a.query;
  } else {
    auto scenario = astg::sim::scenario_from_json(astg::read_json_file(a.input));
    world = std::make_shared<const astg::sim::SimWorld>(astg::sim::rasterize(scenario));
    clip = world->clip;
    query = a.query.value_or(world->scenario.query);
  }

  std::unique_ptr<astg::AgentBackend> agent;
  std::unique_ptr<astg::TrackerBackend> tracker;
  std::unique_ptr<std::ifstream> replay_in;
  std::unique_ptr<astg::ReplayLog> replay_log;
  if (a.backend == "scripted") {
    if (!world) throw astg::ConfigError("the scripted backend needs a scenario.json input");
    auto pair = astg::sim::oracle_backends(world, load_faults(a.faults), a.seed);
    agent = std::move(pair.agent);
    tracker = std::move(pair.tracker);
  } else if (a.backend == "remote") {
    agent = std::make_unique<astg::RemoteAgentBackend>(astg::parse_endpoint(cfg.agent_endpoint),
                                                       cfg.agent_timeout_ms);
    tracker = std::make_unique<astg::RemoteTrackerBackend>(
        astg::parse_endpoint(cfg.tracker_endpoint), cfg.tracker_timeout_ms);
  } else if (a.backend == "replay") {
    if (!a.replay) throw astg::ConfigError("--backend replay needs --replay <log.jsonl>");
    replay_in = std::make_unique<std::ifstream>(*a.replay);
    if (!*replay_in) throw astg::ConfigError("cannot open replay log " + *a.replay);
    replay_log = std::make_unique<astg::ReplayLog>(*replay_in);
    agent = std::make_unique<astg::ReplayAgentBackend>(*replay_log);
    tracker = std::make_unique<astg::ReplayTrackerBackend>(*replay_log);
  } else {
    throw astg::ConfigError("unknown backend '" + a.backend + "'");
  }

  std::unique_ptr<std::ofstream> record_out;
  std::unique_ptr<astg::ExchangeLog> record_log;
  std::unique_ptr<astg::RecordingAgentBackend> rec_agent;
  std::unique_ptr<astg::RecordingTrackerBackend> rec_tracker;
  astg::AgentBackend* agent_ptr = agent.get();
  astg::TrackerBackend* tracker_ptr = tracker.get();
  if (a.record) {
    record_out = std::make_unique<std::ofstream>(*a.record, std::ios::binary);
    if (!*record_out) throw astg::ConfigError("cannot write record log " + *a.record);
    record_log = std::make_unique<astg::ExchangeLog>(*record_out);
    rec_agent = std::make_unique<astg::RecordingAgentBackend>(*agent, *record_log);
    rec_tracker = std::make_unique<astg::RecordingTrackerBackend>(*tracker, *record_log);
    agent_ptr = rec_agent.get();
    tracker_ptr = rec_tracker.get();
  }

  const auto result = astg::ground(clip, query, {*agent_ptr, *agent_ptr, *tracker_ptr}, cfg);
  write_text(a.out, astg::grounding_to_json(result, cfg).dump(2) + "\n");

  const std::string vid = a.video_id.value_or(input.stem().string());
  const fs::path pred_path = a.pred ? fs::path(*a.pred) : fs::path(a.out).replace_extension(".pred.jsonl");
  std::vector<astg::Prediction> rows;
  if (auto p = astg::to_prediction(result, vid)) rows.push_back(*p);
  write_stream(pred_path, [&](std::ostream& os) { astg::write_jsonl(os, rows); });

  std::cout << "status: " << astg::to_string(result.status);
  if (result.span) std::cout << " span: [" << result.span->st << ", " << result.span->ed << "]";
  std::cout << "\ntrace: " << a.out << "\nprediction: " << pred_path.string() << "\n";
  return result.status == astg::EpisodeStatus::failure ? kExitFailure : kExitOk;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  int episodes = 200;
  std::uint64_t seed = 0;
  std::optional<std::string> faults;
  std::vector<int> strides;
  std::string out = "sim_out";
  int frames = 30;
  int entities = 3;
  int max_cuts = 2;
  bool traces = false;
  bool scenarios = false;
  EngineFlags engine;
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.episodes < 0) throw astg::ConfigError("--episodes must be >= 0");
  const auto base = a.engine.resolve();
  std::vector<int> strides = a.strides.empty() ? std::vector<int>{base.stride} : a.strides;
  for (int s : strides)
    if (s < 1) throw astg::ConfigError("strides must be >= 1");

  astg::sim::SweepSpec spec;
  spec.episodes = a.episodes;
  spec.seed = a.seed;
  spec.faults = load_faults(a.faults);
  spec.params.frames = a.frames;
  spec.params.entities = a.entities;
  spec.params.max_cuts = a.max_cuts;

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ostringstream episodes_csv, timing_csv, aggregate_csv;
  bool first = true;
  std::vector<double> thresholds = astg::default_thresholds();
  aggregate_csv << "stride,samples,m_tIoU,m_vIoU";
  for (double r : thresholds) aggregate_csv << ",vIoU@" << astg::format_threshold(r);
  aggregate_csv << ",propose_calls,verify_calls,success,best_effort,failure\n";

  for (int stride : strides) {
    spec.config = base;
    spec.config.stride = stride;
    const auto results = astg::sim::run_sweep(spec);
    const auto report = astg::sim::sweep_report(results, thresholds);

    std::ostringstream ep, tm;
    astg::sim::write_episodes_csv(ep, results, stride);
    astg::sim::write_timing_csv(tm, results, stride);
    // Headers once; later strides append rows only.
    const auto strip_header = [&](const std::string& s) {
      return first ? s : s.substr(s.find('\n') + 1);
    };
    episodes_csv << strip_header(ep.str());
    timing_csv << strip_header(tm.str());

    int propose = 0, verify = 0;
    std::map<astg::EpisodeStatus, int> statuses;
    std::vector<astg::Prediction> preds;
    for (const auto& r : results) {
      propose += r.grounding.counters.count("Propose") ? r.grounding.counters.at("Propose") : 0;
      verify += r.grounding.counters.count("Verify") ? r.grounding.counters.at("Verify") : 0;
      ++statuses[r.grounding.status];
      if (r.prediction) preds.push_back(*r.prediction);
      if (a.traces) {
        write_text(out / ("traces_stride" + std::to_string(stride)) /
                       (astg::sim::video_id(r.index) + ".json"),
                   astg::grounding_to_json(r.grounding, spec.config).dump(2) + "\n");
      }
    }
    char buf[64];
    aggregate_csv << stride << ',' << report.count;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f", report.m_tiou, report.m_viou);
    aggregate_csv << buf;
    for (const auto& [r, v] : report.viou_at) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      aggregate_csv << buf;
    }
    aggregate_csv << ',' << propose << ',' << verify << ','
                  << statuses[astg::EpisodeStatus::success] << ','
                  << statuses[astg::EpisodeStatus::best_effort] << ','
                  << statuses[astg::EpisodeStatus::failure] << '\n';

    write_stream(out / ("predictions_stride" + std::to_string(stride) + ".jsonl"),
                 [&](std::ostream& os) { astg::write_jsonl(os, preds); });
    if (first && a.scenarios) {
      for (const auto& r : results)
        write_text(out / "scenarios" / (astg::sim::video_id(r.index) + ".json"),
                   astg::sim::scenario_to_json(astg::sim::generate(r.scenario_seed, spec.params))
                           .dump(2) +
                       "\n");
    }
    if (first) {
      std::vector<astg::GroundTruth> gts;
      for (const auto& r : results)
        if (r.gt) gts.push_back(*r.gt);
      write_stream(out / "gt.jsonl", [&](std::ostream& os) { astg::write_jsonl(os, gts); });
    }

    std::cout << "stride " << stride << ": " << a.episodes << " episodes, " << propose
              << " propose calls\n";
    astg::write_report_table(std::cout, report);
    first = false;
  }
  write_text(out / "episodes.csv", episodes_csv.str());
  write_text(out / "timing.csv", timing_csv.str());
  write_text(out / "aggregate.csv", aggregate_csv.str());
  std::cout << "outputs: " << out.string() << "\n";
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string gt;
  std::string pred;
  std::string r = "0.3,0.5";
  std::string out = ".";
};

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw astg::ConfigError("bad threshold '" + item + "'");
    }
    if (used != item.size()) throw astg::ConfigError("bad threshold '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw astg::ConfigError("--r needs at least one threshold");
  return out;
}

int cmd_eval(const EvalArgs& a) {
  const auto thresholds = parse_thresholds(a.r);
  std::ifstream gt_in(a.gt), pred_in(a.pred);
  if (!gt_in) throw astg::EvalError("cannot open " + a.gt);
  if (!pred_in) throw astg::EvalError("cannot open " + a.pred);
  const auto report =
      astg::aggregate(astg::read_ground_truth(gt_in), astg::read_predictions(pred_in), thresholds);
  astg::write_report_table(std::cout, report);
  const fs::path out(a.out);
  write_stream(out / "per_sample.csv", [&](std::ostream& os) { astg::write_per_sample_csv(os, report); });
  write_stream(out / "aggregate.csv", [&](std::ostream& os) { astg::write_aggregate_csv(os, report); });
  return kExitOk;
}

// ---- check -----------------------------------------------------------------

int cmd_check(const EngineFlags& flags) {
  auto cfg = flags.resolve();
  astg::validate(cfg, true);
  bool healthy = true;
  for (const auto& c : astg::check_services(cfg)) {
    std::cout << (c.ok ? "ok   " : "FAIL ") << c.name << " " << c.url << ": " << c.detail << "\n";
    healthy = healthy && c.ok;
  }
  return healthy ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agentic spatio-temporal video grounding engine"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "ground a query in a frames directory or scenario");
  run_cmd->add_option("--input", run.input, "frames directory or scenario.json")->required();
  run_cmd->add_option("--query", run.query, "query text (defaults to the scenario's query)");
  run_cmd->add_option("--backend", run.backend, "scripted | remote | replay")
      ->check(CLI::IsMember({"scripted", "remote", "replay"}));
  run_cmd->add_option("--out", run.out, "trace JSON path");
  run_cmd->add_option("--pred", run.pred, "prediction JSONL path (default: <out>.pred.jsonl)");
  run_cmd->add_option("--video-id", run.video_id, "video id for the prediction row");
  run_cmd->add_option("--faults", run.faults, "fault spec JSON for the scripted backend");
  run_cmd->add_option("--seed", run.seed, "seed for scripted backend fault draws");
  run_cmd->add_option("--record", run.record, "append every backend exchange to this JSONL log");
  run_cmd->add_option("--replay", run.replay, "exchange log served by --backend replay");
  run.engine.attach(*run_cmd);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "sweep synthetic episodes with oracle backends");
  sim_cmd->add_option("--episodes", sim.episodes, "episodes per stride");
  sim_cmd->add_option("--seed", sim.seed, "sweep seed");
  sim_cmd->add_option("--faults", sim.faults, "fault spec JSON");
  sim_cmd->add_option("--stride", sim.strides, "stride or comma-separated strides")->delimiter(',');
  sim_cmd->add_option("--out", sim.out, "output directory");
  sim_cmd->add_option("--frames", sim.frames, "frames per scenario");
  sim_cmd->add_option("--entities", sim.entities, "entities per scenario");
  sim_cmd->add_option("--max-cuts", sim.max_cuts, "maximum scene cuts per scenario");
  sim_cmd->add_flag("--traces", sim.traces, "also write one trace JSON per episode");
  sim_cmd->add_flag("--scenarios", sim.scenarios, "also write each scenario JSON");
  sim.engine.attach(*sim_cmd, false);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  eval_cmd->add_option("--gt", ev.gt, "ground-truth JSONL")->required();
  eval_cmd->add_option("--pred", ev.pred, "prediction JSONL")->required();
  eval_cmd->add_option("--r", ev.r, "comma-separated vIoU thresholds");
  eval_cmd->add_option("--out", ev.out, "directory for per_sample.csv and aggregate.csv");

  EngineFlags check;
  auto* check_cmd = app.add_subcommand("check", "probe the remote agent and tracker services");
  check.attach(*check_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*sim_cmd) return cmd_simulate(sim);
    if (*eval_cmd) return cmd_eval(ev);
    if (*check_cmd) return cmd_check(check);
  } catch (const astg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
