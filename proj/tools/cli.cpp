#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "agentguard/dsl/parser.hpp"
#include "agentguard/llm/backend.hpp"
#include "agentguard/replay/replay.hpp"
#include "agentguard/server/http_server.hpp"

namespace agentguard::cli {

namespace {

constexpr int kOk = 0;
constexpr int kMismatch = 1;
constexpr int kBadInput = 2;
constexpr int kFailure = 3;

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct CheckArgs {
  std::string policies;
  std::string known_tools;
  bool json = false;
};

int check_policies(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  auto text = slurp(a.policies);
  if (!text) {
    err << "cannot read " << a.policies << "\n";
    return kBadInput;
  }
  auto parsed = dsl::parse_policy_set(*text);
  auto diags = parsed.diagnostics;
  if (parsed.ok()) {
    std::optional<std::vector<ToolDescriptor>> tools;
    if (!a.known_tools.empty()) {
      tools.emplace();
      for (const auto& name : split_csv(a.known_tools)) tools->push_back({name, std::nullopt, {}});
    }
    for (auto& d : dsl::validate(*parsed.policy, tools)) diags.push_back(std::move(d));
  }
  std::size_t errors = 0;
  std::size_t warnings = 0;
  for (const auto& d : diags) {
    if (d.severity == dsl::Severity::error) ++errors;
    if (d.severity == dsl::Severity::warning) ++warnings;
  }
  if (a.json) {
    Value list = Value::array();
    for (const auto& d : diags) list.push_back(d);
    Value j = {{"ok", errors == 0}, {"diagnostics", list}};
    if (parsed.ok()) j["rules"] = parsed.policy->rules.size();
    out << j.dump(2) << "\n";
  } else {
    for (const auto& d : diags) out << d.format(a.policies) << "\n";
    if (parsed.ok()) {
      out << a.policies << ": " << parsed.policy->rules.size() << " rules, " << errors
          << " errors, " << warnings << " warnings\n";
    } else {
      out << a.policies << ": " << errors << " errors\n";
    }
  }
  return errors == 0 ? kOk : kBadInput;
}

struct ReplayArgs {
  std::string policies;
  std::string trace;
  std::string review_as = "deny";
  bool json = false;
  std::string server;
  std::string admin_token;
  std::string llm = "mock";
  std::vector<std::string> mock_keywords{"DROP TABLE"};
  std::string mock_mode = "keywords";
};

int replay_cmd(const ReplayArgs& a, std::ostream& out, std::ostream& err) {
  const auto review_as = replay::parse_review_as(a.review_as);
  if (!review_as) {
    err << "--review-as must be deny, allow or pending\n";
    return kBadInput;
  }
  std::optional<std::string> policy_text;
  if (!a.policies.empty()) {
    policy_text = slurp(a.policies);
    if (!policy_text) {
      err << "cannot read " << a.policies << "\n";
      return kBadInput;
    }
    auto parsed = dsl::parse_policy_set(*policy_text);
    if (!parsed.ok()) {
      for (const auto& d : parsed.diagnostics) err << d.format(a.policies) << "\n";
      return kBadInput;
    }
  } else if (a.server.empty()) {
    err << "--policies is required without --server\n";
    return kBadInput;
  }
  const auto trace_text = slurp(a.trace);
  if (!trace_text) {
    err << "cannot read " << a.trace << "\n";
    return kBadInput;
  }
  std::vector<replay::TraceRecord> trace;
  try {
    trace = replay::parse_trace(*trace_text);
  } catch (const replay::TraceError& e) {
    err << a.trace << ": " << e.what() << "\n";
    return kBadInput;
  }

  std::unique_ptr<replay::Target> target;
  try {
    if (a.server.empty()) {
      std::shared_ptr<llm::Backend> backend;
      if (a.llm == "mock") {
        auto mode = llm::MockBackend::Mode::keywords;
        if (a.mock_mode == "garbage") mode = llm::MockBackend::Mode::garbage;
        else if (a.mock_mode == "unreachable") mode = llm::MockBackend::Mode::unreachable;
        else if (a.mock_mode != "keywords") {
          err << "--mock-mode must be keywords, garbage or unreachable\n";
          return kBadInput;
        }
        backend = std::make_shared<llm::MockBackend>(a.mock_keywords, mode);
      } else if (a.llm != "none") {
        err << "--llm must be mock or none\n";
        return kBadInput;
      }
      target = std::make_unique<replay::EmbeddedTarget>(*policy_text, backend);
    } else {
      std::string token = a.admin_token;
      if (token.empty()) {
        if (const char* env = std::getenv("AGENTGUARD_ADMIN_TOKEN")) token = env;
      }
      auto http = std::make_unique<replay::HttpTarget>(a.server, token);
      if (policy_text) http->install_policy(*policy_text);
      target = std::move(http);
    }
  } catch (const Error& e) {
    err << "replay setup failed: " << e.what() << "\n";
    return e.code() == "PolicyRejected" ? kBadInput : kFailure;
  }

  const auto report = replay::replay(trace, *target, {*review_as});
  if (a.json) {
    out << report.json().dump(2) << "\n";
  } else {
    out << report.text();
  }
  return report.ok() ? kOk : kMismatch;
}

struct ServeArgs {
  std::string config;
  std::string listen;
  std::string policies;
  std::string audit;
  std::string log_level = "info";
};

int serve(const ServeArgs& a, std::ostream& err) {
  if (auto lvl = spdlog::level::from_str(a.log_level); lvl != spdlog::level::off || a.log_level == "off") {
    spdlog::set_level(lvl);
  }
  server::ServerConfig cfg;
  try {
    if (!a.config.empty()) cfg = server::ServerConfig::load(a.config);
    cfg.apply_env([](const char* name) { return std::getenv(name); });
    if (!a.listen.empty()) cfg.set("", "listen", a.listen);
    if (!a.policies.empty()) cfg.policy_path = a.policies;
    if (!a.audit.empty()) cfg.audit_path = a.audit;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kBadInput;
  }
  if (!cfg.policy_path.empty() && !slurp(cfg.policy_path)) {
    err << "cannot read policy file " << cfg.policy_path << "\n";
    return kBadInput;
  }

  // Signals are taken synchronously by this thread; workers inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    server::Service service(cfg);
    service.start_background();
    server::HttpServer http(service);
    const int port = http.start(cfg.host, cfg.port);
    spdlog::info("listening on {}:{} (policy version {}, audit {})", cfg.host, port,
                 service.policy().policy->version,
                 cfg.audit_path.empty() ? std::string("in memory") : cfg.audit_path);
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    http.stop();
    service.stop_background();
  } catch (const server::PolicyRejected& e) {
    for (const auto& d : e.diagnostics()) err << d.format(cfg.policy_path) << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    err << "startup failed: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"AgentGuard policy decision server and tools", "agentguard"};
  app.require_subcommand(1);

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the control server");
  serve_cmd->add_option("--config", serve_args.config, "Config file (key = value)");
  serve_cmd->add_option("--listen", serve_args.listen, "host:port, overrides the config");
  serve_cmd->add_option("--policies", serve_args.policies, "Policy file, overrides the config");
  serve_cmd->add_option("--audit", serve_args.audit, "Audit log path, overrides the config");
  serve_cmd->add_option("--log-level", serve_args.log_level, "trace|debug|info|warn|error|off");

  ReplayArgs replay_args;
  auto* replay_cmd_ = app.add_subcommand("replay", "Replay a trace and check expected decisions");
  replay_cmd_->add_option("--policies", replay_args.policies, "Policy file");
  replay_cmd_->add_option("--trace", replay_args.trace, "NDJSON trace file")->required();
  replay_cmd_->add_option("--review-as", replay_args.review_as, "deny|allow|pending")
      ->capture_default_str();
  replay_cmd_->add_flag("--json", replay_args.json, "Machine-readable report");
  replay_cmd_->add_option("--server", replay_args.server, "Replay against a live server URL");
  replay_cmd_->add_option("--admin-token", replay_args.admin_token,
                          "Admin token for --server (default: $AGENTGUARD_ADMIN_TOKEN)");
  replay_cmd_->add_option("--llm", replay_args.llm, "Embedded LLM backend: mock|none")
      ->capture_default_str();
  replay_cmd_->add_option("--mock-keyword", replay_args.mock_keywords, "Keyword the mock flags");
  replay_cmd_->add_option("--mock-mode", replay_args.mock_mode, "keywords|garbage|unreachable")
      ->capture_default_str();

  CheckArgs check_args;
  auto* check_cmd = app.add_subcommand("check-policies", "Parse and validate a policy file");
  check_cmd->add_option("policies,--policies", check_args.policies, "Policy file")->required();
  check_cmd->add_option("--known-tools", check_args.known_tools, "Comma-separated tool names");
  check_cmd->add_flag("--json", check_args.json, "Machine-readable diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*serve_cmd) return serve(serve_args, err);
    if (*replay_cmd_) return replay_cmd(replay_args, out, err);
    if (*check_cmd) return check_policies(check_args, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kBadInput;
}

}  // namespace agentguard::cli
