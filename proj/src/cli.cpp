#include "episodic/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "episodic/exact_solvers.hpp"
#include "episodic/game_model.hpp"
#include "episodic/io.hpp"
#include "episodic/simulation.hpp"

namespace episodic {

namespace {

using nlohmann::json;

// Input that cannot be read or parsed; maps to the usage exit code.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

StochasticGame read_game(const std::string& path) {
  try {
    return load_game_file(path);
  } catch (const ParseError& e) {
    throw InputError(e.what());
  }
}

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    out << text << "\n";
  else
    write_text_file(path, text + (text.ends_with('\n') ? "" : "\n"));
}

// out.csv with seed 7 -> out.seed7.csv; only used when several seeds run.
std::string per_seed_path(const std::string& path, std::uint64_t seed) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  std::filesystem::path named = p.parent_path() /
                                (p.stem().string() + ".seed" + std::to_string(seed) +
                                 p.extension().string());
  return named.string();
}

std::string fixed(double x) {
  if (std::isnan(x)) return "n/a";
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

struct LearnArgs {
  std::string game_path;
  int episode_length = 1;
  std::vector<double> tau{0.05};
  std::vector<double> rho{0.7};
  std::vector<double> alpha0{1.0};
  double q_init = 0.0;
  std::uint64_t stages = 100000;
  std::vector<std::uint64_t> seeds{0};
  int initial_state = 0;
  std::uint64_t snapshot_every = 1000;
  std::uint64_t exploit_every = 100000;
  std::string oracle_path;
  bool solve_oracle = false;
  std::string metrics_path;
  std::string tables_path;
};

double per_agent(const std::vector<double>& values, int agent, const char* name) {
  if (values.size() == 1) return values[0];
  if (values.size() == kNumAgents) return values[agent];
  throw CLI::ValidationError(std::string("--") + name, "expects one value or one per agent");
}

int cmd_validate(const std::string& game_path, std::ostream& out, std::ostream& err) {
  try {
    const StochasticGame game = load_game_file(game_path);
    out << classification_to_json(game, classify(game)).dump(2) << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    out << json{{"valid", false}, {"error", e.what()}}.dump(2) << "\n";
    err << "invalid game: " << e.what() << "\n";
    return kExitDomainFailure;
  }
}

int cmd_check_graph(const std::string& game_path, int episode_length, std::ostream& out) {
  const StochasticGame game = read_game(game_path);
  out << graph_report_to_json(game, episode_length).dump(2) << "\n";
  return kExitOk;
}

int cmd_solve(const std::string& game_path, int episode_length, const std::string& method,
              std::optional<double> tau, const std::string& out_path, std::ostream& out,
              std::ostream& err) {
  const StochasticGame game = read_game(game_path);
  SolutionTables tables;
  try {
    if (method == "logit") {
      if (!tau) {
        err << "solve: --tau is required for --method logit\n";
        return kExitUsage;
      }
      tables = backward_induction_logit(game, episode_length, *tau);
    } else {
      tables = backward_induction_minimax(game, episode_length);
    }
  } catch (const SolverError& e) {
    err << "solve failed: " << e.what() << "\n";
    return kExitDomainFailure;
  } catch (const std::invalid_argument& e) {
    err << "solve failed: " << e.what() << "\n";
    return kExitDomainFailure;
  }
  emit(out, out_path, tables_to_json(tables).dump(2));
  if (!out_path.empty() && out_path != "-")
    out << json{{"out", out_path}, {"method", method}, {"max_residual", tables.max_residual}}.dump()
        << "\n";
  return kExitOk;
}

int cmd_learn(const LearnArgs& a, std::ostream& out, std::ostream& err) {
  const StochasticGame game = read_game(a.game_path);
  std::array<LearningConfig, kNumAgents> configs;
  for (int i = 0; i < kNumAgents; ++i) {
    configs[i].tau = per_agent(a.tau, i, "tau");
    configs[i].rho = per_agent(a.rho, i, "rho");
    configs[i].alpha0 = per_agent(a.alpha0, i, "alpha0");
    configs[i].q_init = a.q_init;
    configs[i].validate();
  }
  if (a.initial_state < 0 || a.initial_state >= game.num_states())
    throw CLI::ValidationError("--initial-state", "out of range");

  std::optional<SolutionTables> oracle;
  if (!a.oracle_path.empty()) {
    try {
      oracle = tables_from_json(read_json_file(a.oracle_path));
    } catch (const InputError&) {
      throw;
    } catch (const std::runtime_error& e) {
      throw InputError(e.what());
    }
  } else if (a.solve_oracle) {
    if (configs[0].tau != configs[1].tau) {
      err << "learn: --solve-oracle needs a common tau\n";
      return kExitUsage;
    }
    try {
      oracle = backward_induction_logit(game, a.episode_length, configs[0].tau);
    } catch (const SolverError& e) {
      err << "learn: oracle solve failed: " << e.what() << "\n";
      return kExitDomainFailure;
    }
  }

  std::vector<std::future<LearningRun>> jobs;
  for (std::uint64_t seed : a.seeds) {
    RunOptions options;
    options.episode_length = a.episode_length;
    options.stages = a.stages;
    options.seed = seed;
    options.initial_state = a.initial_state;
    options.snapshot_every = a.snapshot_every;
    options.exploit_every = a.exploit_every;
    jobs.push_back(std::async(std::launch::async, [&game, configs, options, &oracle] {
      return run_learning(game, configs, options, oracle);
    }));
  }

  const bool many = a.seeds.size() > 1;
  json summary = json::array();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const std::uint64_t seed = a.seeds[j];
    const LearningRun run = jobs[j].get();
    const std::string metrics_path = many ? per_seed_path(a.metrics_path, seed) : a.metrics_path;
    const std::string tables_path = many ? per_seed_path(a.tables_path, seed) : a.tables_path;
    if (!metrics_path.empty()) write_text_file(metrics_path, metrics_to_csv(run.metrics));
    if (!tables_path.empty())
      write_text_file(tables_path, tables_to_json(tables_from_learners(run.agents)).dump(2) + "\n");
    json entry = {{"seed", seed}, {"stages", a.stages}, {"wall_seconds", run.metrics.wall_seconds}};
    const auto& rows = run.metrics.rows;
    for (auto it = rows.rbegin(); it != rows.rend() && it->stage == rows.back().stage; ++it) {
      const std::string key = "agent" + std::to_string(it->agent + 1);
      auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
      entry[key] = {{"sup_q_err", num(it->sup_q_err)},
                    {"sup_v_err", num(it->sup_v_err)},
                    {"exploit_bound", num(it->exploit_bound)},
                    {"exploit_exact", num(it->exploit_exact)}};
    }
    entry["warnings"] = run.metrics.warnings;
    for (const std::string& w : run.metrics.warnings) err << "seed " << seed << ": " << w << "\n";
    if (!metrics_path.empty()) entry["metrics"] = metrics_path;
    if (!tables_path.empty()) entry["tables"] = tables_path;
    summary.push_back(std::move(entry));
  }
  out << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_bound(const std::string& game_path, int episode_length, const std::string& profile_path,
              std::optional<double> tau, const std::string& out_path, std::ostream& out,
              std::ostream& err) {
  const StochasticGame game = read_game(game_path);
  const json doc = read_json_file(profile_path);
  EpisodicProfile profile;
  try {
    profile = profile_from_json(doc);
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
  if (profile[0].episode_length() != episode_length) {
    err << "bound: profile has M=" << profile[0].episode_length() << " but --M is "
        << episode_length << "\n";
    return kExitUsage;
  }
  try {
    check_profile(game, profile);
  } catch (const std::invalid_argument& e) {
    err << "bound: " << e.what() << "\n";
    return kExitUsage;
  }
  if (!tau && doc.contains("tau") && doc.at("tau").is_number()) tau = doc.at("tau").get<double>();
  const BoundReport report = bound_report(game, profile, tau);
  emit(out, out_path, bound_report_to_json(report).dump(2));
  if (!out_path.empty() && out_path != "-") out << json{{"out", out_path}}.dump() << "\n";
  return kExitOk;
}

int cmd_report(const std::string& metrics_path, const std::string& bound_path, double tol,
               double slack, std::ostream& out) {
  std::vector<MetricsRow> rows;
  try {
    rows = parse_metrics_csv(read_text_file(metrics_path));
  } catch (const std::runtime_error& e) {
    throw InputError(metrics_path + ": " + e.what());
  }
  BoundReport bound;
  try {
    bound = bound_report_from_json(read_json_file(bound_path));
  } catch (const InputError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw InputError(bound_path + ": " + e.what());
  }

  bool failed = false;
  std::map<int, MetricsRow> last;
  for (const MetricsRow& r : rows)
    if (!last.count(r.agent) || r.stage >= last[r.agent].stage) last[r.agent] = r;

  out << "M = " << bound.episode_length << "\n";
  for (const auto& [agent, r] : last)
    out << "agent " << agent + 1 << " at stage " << r.stage << ": sup_q_err = " << fixed(r.sup_q_err)
        << ", sup_v_err = " << fixed(r.sup_v_err) << ", visits in [" << r.visits_min << ", "
        << r.visits_max << "]\n";

  for (int i = 0; i < kNumAgents; ++i) {
    out << "agent " << i + 1 << ": delta = " << fixed(bound.delta[i])
        << ", eps_hat = " << fixed(bound.eps_hat[i]) << ", epsilon = " << fixed(bound.epsilon[i]);
    if (bound.epsilon_learning[i]) out << ", epsilon_learning = " << fixed(*bound.epsilon_learning[i]);
    out << "\n";
  }

  for (int i = 0; i < kNumAgents; ++i) {
    const std::string name = "bound agent " + std::to_string(i + 1);
    if (!bound.exploit_infinite[i]) {
      out << "SKIP " << name << ": exact exploitability unavailable";
      if (!bound.notes[i].empty()) out << " (" << bound.notes[i] << ")";
      out << "\n";
      continue;
    }
    const double exact = *bound.exploit_infinite[i];
    const bool pass = exact <= bound.epsilon[i] + tol;
    failed = failed || !pass;
    out << (pass ? "PASS " : "FAIL ") << name << ": exploit_exact = " << fixed(exact)
        << (pass ? " <= " : " > ") << "epsilon = " << fixed(bound.epsilon[i]) << "\n";
  }

  for (const auto& [agent, r] : last) {
    const std::string name = "learned agent " + std::to_string(agent + 1);
    if (std::isnan(r.exploit_exact) || std::isnan(r.exploit_bound)) {
      out << "SKIP " << name << ": final snapshot has no exploitability\n";
      continue;
    }
    const bool pass = r.exploit_exact <= r.exploit_bound + slack;
    failed = failed || !pass;
    out << (pass ? "PASS " : "FAIL ") << name << ": exploit_exact = " << fixed(r.exploit_exact)
        << (pass ? " <= " : " > ") << "exploit_bound + " << slack << " = "
        << fixed(r.exploit_bound + slack) << "\n";
  }
  return failed ? kExitDomainFailure : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Episodic learning in two-agent stochastic games"};
  app.require_subcommand(1);

  std::string game_path, out_path, profile_path, method = "logit", metrics_path, bound_path;
  int episode_length = 1;
  double tau_value = 0.0;
  double tol = 1e-6, slack = 0.02;

  auto* validate = app.add_subcommand("validate", "Check a game file and classify it");
  validate->add_option("--game", game_path, "Game JSON")->required();

  auto* check_graph = app.add_subcommand("check-graph", "Connectivity of the state graph");
  check_graph->add_option("--game", game_path, "Game JSON")->required();
  check_graph->add_option("--M", episode_length, "Episode length")->required()->check(CLI::PositiveNumber);

  auto* solve = app.add_subcommand("solve", "Backward induction over one episode");
  solve->add_option("--game", game_path, "Game JSON")->required();
  solve->add_option("--M", episode_length, "Episode length")->required()->check(CLI::PositiveNumber);
  solve->add_option("--method", method, "logit or minimax")
      ->check(CLI::IsMember({"logit", "minimax"}));
  auto* solve_tau = solve->add_option("--tau", tau_value, "Temperature")->check(CLI::PositiveNumber);
  solve->add_option("--out", out_path, "Output tables JSON (default stdout)");

  LearnArgs learn_args;
  auto* learn = app.add_subcommand("learn", "Run episodic individual Q-learning");
  learn->add_option("--game", learn_args.game_path, "Game JSON")->required();
  learn->add_option("--M", learn_args.episode_length, "Episode length")
      ->required()
      ->check(CLI::PositiveNumber);
  learn->add_option("--tau", learn_args.tau, "Temperature, one value or one per agent");
  learn->add_option("--rho", learn_args.rho, "Step-size exponent, one value or one per agent");
  learn->add_option("--alpha0", learn_args.alpha0, "Initial step size, one value or one per agent");
  learn->add_option("--q-init", learn_args.q_init, "Initial q and v");
  learn->add_option("--K", learn_args.stages, "Number of stages");
  learn->add_option("--seeds", learn_args.seeds, "Seeds; each runs concurrently");
  learn->add_option("--initial-state", learn_args.initial_state, "Start state index");
  learn->add_option("--snapshot-every", learn_args.snapshot_every, "Metrics cadence in stages");
  learn->add_option("--exploit-every", learn_args.exploit_every,
                    "Exploitability cadence in stages (0 = final only)");
  learn->add_option("--oracle", learn_args.oracle_path, "Tables JSON to measure errors against");
  learn->add_flag("--solve-oracle", learn_args.solve_oracle,
                  "Compute the logit tables as the oracle");
  learn->add_option("--metrics", learn_args.metrics_path, "Metrics CSV output");
  learn->add_option("--tables", learn_args.tables_path, "Learned tables JSON output");

  auto* bound = app.add_subcommand("bound", "Exploitability bounds for an episodic profile");
  bound->add_option("--game", game_path, "Game JSON")->required();
  bound->add_option("--M", episode_length, "Episode length")->required()->check(CLI::PositiveNumber);
  bound->add_option("--profile", profile_path, "Tables or profile JSON")->required();
  auto* bound_tau = bound->add_option("--tau", tau_value, "Temperature (default: from profile)")
                        ->check(CLI::PositiveNumber);
  bound->add_option("--out", out_path, "Output report JSON (default stdout)");

  auto* report = app.add_subcommand("report", "Summarize metrics and bounds with verdicts");
  report->add_option("--metrics", metrics_path, "Metrics CSV")->required();
  report->add_option("--bound", bound_path, "Bound report JSON")->required();
  report->add_option("--tol", tol, "Tolerance for the exact bound check");
  report->add_option("--slack", slack, "Slack for the learned-strategy check");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(game_path, out, err);
    if (*check_graph) return cmd_check_graph(game_path, episode_length, out);
    if (*solve)
      return cmd_solve(game_path, episode_length, method,
                       *solve_tau ? std::optional<double>(tau_value) : std::nullopt, out_path, out,
                       err);
    if (*learn) return cmd_learn(learn_args, out, err);
    if (*bound)
      return cmd_bound(game_path, episode_length, profile_path,
                       *bound_tau ? std::optional<double>(tau_value) : std::nullopt, out_path, out,
                       err);
    if (*report) return cmd_report(metrics_path, bound_path, tol, slack, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "invalid game: " << e.what() << "\n";
    return kExitDomainFailure;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainFailure;
  }
  return kExitUsage;
}

}  // namespace episodic
