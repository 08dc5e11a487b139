// facihub command line: one subcommand per engine operation.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>

#include "facihub/api.hpp"
#include "facihub/config.hpp"
#include "facihub/engine.hpp"
#include "facihub/http_client.hpp"
#include "facihub/server.hpp"

using namespace facihub;

namespace {

Timestamp now() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

Timestamp timestamp_arg(const std::string& flag, const std::string& value) {
  const auto t = parse_timestamp(value);
  if (!t) throw ValidationError(flag + " is not an ISO-8601 timestamp with zone", {{flag, value}});
  return *t;
}

Date date_arg(const std::string& flag, const std::string& value) {
  const auto d = parse_date(value);
  if (!d) throw ValidationError(flag + " is not a YYYY-MM-DD date", {{flag, value}});
  return *d;
}

void write_or_print(const std::optional<std::string>& out, const std::string& content) {
  if (!out) {
    std::cout << content;
    return;
  }
  std::ofstream f(*out, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot write '" + *out + "'");
  f << content;
  if (!f.flush()) fail(ErrorCode::io, "write to '" + *out + "' failed");
}

std::string read_arg_or_file(const std::string& value) {
  if (!value.empty() && value.front() == '@') return read_text_file(value.substr(1));
  return value;
}

std::unique_ptr<Engine> make_engine(EngineConfig config, bool force_stub) {
  if (force_stub) config.llm.client = "deterministic";
  std::shared_ptr<GenerationClient> generator, coder;
  if (config.llm.client == "http") {
    generator = std::make_shared<HttpGenerationClient>(config.llm.endpoint, config.llm.api_key, config.llm.timeout_seconds);
    coder = generator;
  } else {
    const RoleFramework fw = config.framework == "full" ? RoleFramework::full() : RoleFramework::refined();
    generator = std::make_shared<DeterministicReplyClient>(std::vector<Role>(fw.enabled.begin(), fw.enabled.end()));
    coder = std::make_shared<DeterministicCoderClient>();
  }
  return std::make_unique<Engine>(std::move(config), generator, coder);
}

int print_error(const std::string& code, const std::string& message, const std::vector<FieldError>& fields = {}) {
  std::cerr << error_body(code, message, fields).dump() << '\n';
  return 1;
}

int serve(Engine& engine) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  httplib::Server server;
  ApiRouter router(engine);
  bind_router(server, router);
  const auto& cfg = engine.config().server;
  if (!server.bind_to_port(cfg.host, cfg.port))
    fail(ErrorCode::io, "startup: cannot bind " + cfg.host + ":" + std::to_string(cfg.port));

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();  // in-flight handlers finish before listen returns
  });
  std::cerr << "listening on " << cfg.host << ":" << cfg.port << '\n';
  const bool ok = server.listen_after_bind();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facihub: forum facilitation engine"};
  app.require_subcommand(1);
  std::string config_path, data_dir;
  bool stub = false;
  app.add_option("--config", config_path, "JSON config file (default: $FACIHUB_CONFIG)");
  app.add_option("--data-dir", data_dir, "Override storage.data_dir");
  app.add_flag("--stub", stub, "Use the deterministic generation and coding clients");

  auto* ingest = app.add_subcommand("ingest", "Ingest a line-delimited JSON action log");
  std::string ingest_file;
  ingest->add_option("file", ingest_file, "Log file (- for stdin)")->required();

  auto* run = app.add_subcommand("run", "Daily targeting, generation and enqueue");
  std::string as_of;
  run->add_option("--as-of", as_of, "Run timestamp, e.g. 2025-12-01T00:00:00Z")->required();

  auto* queue = app.add_subcommand("queue", "List pending candidates");

  auto* decide = app.add_subcommand("decide", "Record a review decision");
  std::string decide_id, payload, decided_at;
  decide->add_option("candidate_id", decide_id)->required();
  decide->add_option("--payload", payload, "Decision JSON, or @file")->required();
  decide->add_option("--at", decided_at, "Decision timestamp (default: now)");

  auto* publish = app.add_subcommand("publish", "Publish accepted candidates");
  std::string published_at, since;
  publish->add_option("--at", published_at, "Publication timestamp (default: now)");
  publish->add_option("--since", since, "Only candidates decided at or after this timestamp");

  auto* metrics = app.add_subcommand("metrics", "Daily acceptance and role composition");
  std::string from, to;
  std::optional<std::string> metrics_out;
  metrics->add_option("--from", from, "First day (YYYY-MM-DD)")->required();
  metrics->add_option("--to", to, "Last day (YYYY-MM-DD)")->required();
  metrics->add_option("--out", metrics_out, "Write TSV here instead of stdout");
  bool metrics_json = false;
  metrics->add_flag("--json", metrics_json, "Print JSON instead of TSV");

  auto* code = app.add_subcommand("code", "Code learner records for social and cognitive presence");
  std::string import_file;
  code->add_option("--import", import_file, "Import coded units (NDJSON) instead of calling the coder");

  auto* analyze = app.add_subcommand("analyze", "Goal reports, permutation sensitivity, balance");
  std::string goal;
  std::optional<std::string> analyze_out, means_file;
  std::optional<std::size_t> perm_n;
  std::optional<std::uint64_t> perm_seed;
  analyze->add_option("--goal", goal, "1, 2, permutation or balance")
      ->required()
      ->check(CLI::IsMember({"1", "2", "permutation", "balance"}));
  analyze->add_option("--out", analyze_out, "Write the table here (metadata goes to <out>.meta.json)");
  analyze->add_option("--means", means_file, "Learner-means TSV to analyze instead of the data directory");
  analyze->add_option("--n", perm_n, "Permutations (default from config)");
  analyze->add_option("--seed", perm_seed, "Permutation seed (default from config)");

  auto* graph = app.add_subcommand("centrality", "Export hyperedges and s-closeness for a window");
  std::string graph_as_of;
  std::optional<std::string> graph_out;
  graph->add_option("--as-of", graph_as_of, "Window end")->required();
  graph->add_option("--out", graph_out, "Write NDJSON here");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  std::optional<std::string> host;
  std::optional<int> port;
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    EngineConfig config = load_config(config_path);
    if (!data_dir.empty()) config.data_dir = data_dir;
    if (host) config.server.host = *host;
    if (port) config.server.port = *port;
    auto engine = make_engine(config, stub);

    if (*ingest) {
      IngestReport report;
      if (ingest_file == "-") {
        report = engine->ingest(std::cin);
      } else {
        report = engine->ingest_file(ingest_file);
      }
      std::cout << to_json(report).dump(2) << '\n';
    } else if (*run) {
      std::cout << to_json(engine->run(timestamp_arg("--as-of", as_of))).dump(2) << '\n';
    } else if (*queue) {
      Json items = Json::array();
      for (const auto& e : engine->board().queue()) items.push_back(to_json(e.candidate));
      std::cout << items.dump(2) << '\n';
    } else if (*decide) {
      const Json j = Json::parse(read_arg_or_file(payload), nullptr, false);
      if (j.is_discarded()) throw ValidationError("--payload is not JSON", {{"--payload", "not JSON"}});
      const Timestamp at = decided_at.empty() ? now() : timestamp_arg("--at", decided_at);
      std::cout << to_json(engine->decide(decide_id, parse_decision_payload(j), at)).dump(2) << '\n';
    } else if (*publish) {
      const Timestamp at = published_at.empty() ? now() : timestamp_arg("--at", published_at);
      const Timestamp from_ts = since.empty() ? Timestamp{} : timestamp_arg("--since", since);
      Json events = Json::array();
      for (const auto& e : engine->publish(at, from_ts)) events.push_back(to_json(e));
      std::cout << events.dump(2) << '\n';
    } else if (*metrics) {
      const auto m = engine->metrics(date_arg("--from", from), date_arg("--to", to));
      if (metrics_json) {
        write_or_print(metrics_out, to_json(m).dump(2) + "\n");
      } else {
        std::ostringstream tsv;
        write_metrics_tsv(tsv, m);
        write_or_print(metrics_out, tsv.str());
      }
    } else if (*code) {
      if (!import_file.empty()) {
        std::ifstream in(import_file);
        if (!in) fail(ErrorCode::io, "cannot open '" + import_file + "'");
        const auto units = read_coded_units(in);
        std::cout << Json{{"imported_records", engine->import_codes(units)}}.dump(2) << '\n';
      } else {
        std::cout << to_json(engine->code()).dump(2) << '\n';
      }
    } else if (*analyze) {
      std::ostringstream table;
      Json meta;
      if (goal == "1" || goal == "2") {
        stats::GoalReport report;
        const auto options = engine->goal_options();
        if (means_file) {
          const auto rows = stats::read_learner_means_file(*means_file);
          report = goal == "1" ? stats::run_goal1(rows, options) : stats::run_goal2(rows);
        } else {
          report = goal == "1" ? engine->goal1() : engine->goal2();
        }
        stats::write_report_tsv(table, report);
        meta = stats::report_metadata(report, options);
      } else if (goal == "permutation") {
        const auto results = engine->permutation(perm_n, perm_seed);
        stats::write_permutation_tsv(table, results);
        meta = Json::array();
        for (const auto& r : results) meta.push_back(stats::to_json(r));
      } else {
        const auto t = engine->balance();
        stats::write_balance_tsv(table, t);
        meta = stats::to_json(t);
      }
      write_or_print(analyze_out, table.str());
      if (analyze_out) write_or_print(*analyze_out + ".meta.json", meta.dump(2) + "\n");
    } else if (*graph) {
      const Timestamp end = timestamp_arg("--as-of", graph_as_of);
      const auto snap = engine->snapshot();
      const TimeWindow window{end - std::chrono::hours{engine->config().targeting.window_hours}, end};
      const Hypergraph h = build_hypergraph(snap->records(), window);
      std::ostringstream out;
      export_centrality(out, h, s_closeness(h, engine->config().targeting.s));
      export_hyperedges(out, h);
      write_or_print(graph_out, out.str());
    } else if (*serve_cmd) {
      return serve(*engine);
    }
    return 0;
  } catch (const ValidationError& e) {
    return print_error(to_string(e.code()), e.what(), e.fields());
  } catch (const Error& e) {
    return print_error(to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return print_error("internal", e.what());
  }
}
