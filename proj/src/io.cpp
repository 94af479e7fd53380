#include "episodic/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace episodic {

using nlohmann::json;

namespace {

json nested_rows(const Eigen::MatrixXd& table, const ExtendedSpace& space) {
  json out = json::array();
  for (int s = 0; s < space.num_states(); ++s) {
    json per_state = json::array();
    for (int m = 0; m < space.episode_length(); ++m) {
      const int x = space.flat(s, m);
      json row = json::array();
      for (Eigen::Index a = 0; a < table.cols(); ++a) row.push_back(table(x, a));
      per_state.push_back(std::move(row));
    }
    out.push_back(std::move(per_state));
  }
  return out;
}

json nested_values(const Eigen::VectorXd& v, const ExtendedSpace& space) {
  json out = json::array();
  for (int s = 0; s < space.num_states(); ++s) {
    json per_state = json::array();
    for (int m = 0; m < space.episode_length(); ++m) per_state.push_back(v(space.flat(s, m)));
    out.push_back(std::move(per_state));
  }
  return out;
}

// Shape of a [s][m][a] array; throws std::runtime_error if ragged.
std::array<int, 3> shape3(const json& doc, const char* what) {
  if (!doc.is_array() || doc.empty() || !doc[0].is_array() || doc[0].empty() ||
      !doc[0][0].is_array() || doc[0][0].empty())
    throw std::runtime_error(std::string(what) + " must be a non-empty [s][m][a] array");
  const std::array<int, 3> dims{static_cast<int>(doc.size()), static_cast<int>(doc[0].size()),
                                static_cast<int>(doc[0][0].size())};
  for (const json& per_state : doc) {
    if (!per_state.is_array() || static_cast<int>(per_state.size()) != dims[1])
      throw std::runtime_error(std::string(what) + " is ragged");
    for (const json& row : per_state)
      if (!row.is_array() || static_cast<int>(row.size()) != dims[2])
        throw std::runtime_error(std::string(what) + " is ragged");
  }
  return dims;
}

Eigen::MatrixXd flat_rows(const json& doc, const char* what) {
  const auto [n, M, A] = shape3(doc, what);
  Eigen::MatrixXd out(n * M, A);
  for (int s = 0; s < n; ++s)
    for (int m = 0; m < M; ++m)
      for (int a = 0; a < A; ++a) out(s * M + m, a) = doc[s][m][a].get<double>();
  return out;
}

Eigen::VectorXd flat_values(const json& doc, int n, int M, const char* what) {
  if (!doc.is_array() || static_cast<int>(doc.size()) != n)
    throw std::runtime_error(std::string(what) + " has the wrong number of states");
  Eigen::VectorXd out(n * M);
  for (int s = 0; s < n; ++s) {
    if (!doc[s].is_array() || static_cast<int>(doc[s].size()) != M)
      throw std::runtime_error(std::string(what) + " has the wrong number of substages");
    for (int m = 0; m < M; ++m) out(s * M + m) = doc[s][m].get<double>();
  }
  return out;
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

std::optional<double> read_optional(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<double>();
}

template <typename T>
std::array<T, kNumAgents> pair_of(const json& doc, const char* key) {
  const json& arr = doc.at(key);
  if (!arr.is_array() || arr.size() != kNumAgents)
    throw std::runtime_error(std::string("'") + key + "' must hold two entries");
  return {arr[0].get<T>(), arr[1].get<T>()};
}

std::array<std::optional<double>, kNumAgents> optional_pair(const json& doc, const char* key) {
  std::array<std::optional<double>, kNumAgents> out;
  if (!doc.contains(key) || doc.at(key).is_null()) return out;
  const json& arr = doc.at(key);
  if (!arr.is_array() || arr.size() != kNumAgents)
    throw std::runtime_error(std::string("'") + key + "' must hold two entries");
  for (int i = 0; i < kNumAgents; ++i)
    if (!arr[i].is_null()) out[i] = arr[i].get<double>();
  return out;
}

}  // namespace

json tables_to_json(const SolutionTables& tables) {
  const ExtendedSpace space(tables.num_states, tables.episode_length);
  json agents = json::array();
  for (int i = 0; i < kNumAgents; ++i) {
    agents.push_back({{"q", nested_rows(tables.q[i], space)},
                      {"v", nested_values(tables.v[i], space)},
                      {"policy", nested_rows(tables.profile[i].table(), space)}});
  }
  return {{"states", tables.num_states},
          {"M", tables.episode_length},
          {"method", to_string(tables.method)},
          {"tau", optional_number(tables.tau)},
          {"max_residual", tables.max_residual},
          {"agents", std::move(agents)}};
}

SolutionTables tables_from_json(const json& doc) {
  try {
    SolutionTables t;
    t.num_states = doc.at("states").get<int>();
    t.episode_length = doc.at("M").get<int>();
    t.method = solve_method_from_string(doc.at("method").get<std::string>());
    t.tau = read_optional(doc, "tau");
    t.max_residual = doc.value("max_residual", 0.0);
    t.profile = profile_from_json(doc);
    const json& agents = doc.at("agents");
    for (int i = 0; i < kNumAgents; ++i) {
      t.q[i] = flat_rows(agents[i].at("q"), "q");
      if (t.q[i].rows() != t.num_states * t.episode_length ||
          t.q[i].cols() != t.profile[i].num_actions())
        throw std::runtime_error("q table does not match the policy shape");
      t.v[i] = flat_values(agents[i].at("v"), t.num_states, t.episode_length, "v");
    }
    return t;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed tables document: ") + e.what());
  }
}

EpisodicProfile profile_from_json(const json& doc) {
  try {
    const json& agents = doc.at("agents");
    if (!agents.is_array() || agents.size() != kNumAgents)
      throw std::runtime_error("'agents' must hold two entries");
    EpisodicProfile profile;
    for (int i = 0; i < kNumAgents; ++i) {
      const json& policy = agents[i].at("policy");
      const auto dims = shape3(policy, "policy");
      try {
        profile[i] = EpisodicStrategy(dims[0], dims[1], flat_rows(policy, "policy"));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error("agent " + std::to_string(i + 1) + " policy: " + e.what());
      }
    }
    if (profile[0].num_states() != profile[1].num_states() ||
        profile[0].episode_length() != profile[1].episode_length())
      throw std::runtime_error("agent policies disagree on |S| or M");
    return profile;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed profile document: ") + e.what());
  }
}

json bound_report_to_json(const BoundReport& r) {
  auto opt_pair = [](const std::array<std::optional<double>, kNumAgents>& x) {
    return json::array({optional_number(x[0]), optional_number(x[1])});
  };
  return {{"M", r.episode_length},
          {"gamma", r.gamma},
          {"delta", r.delta},
          {"eps_hat", r.eps_hat},
          {"tau", optional_number(r.tau)},
          {"xi", r.xi},
          {"epsilon", r.epsilon},
          {"epsilon_learning", opt_pair(r.epsilon_learning)},
          {"exploit_finite", r.exploit_finite},
          {"exploit_infinite", opt_pair(r.exploit_infinite)},
          {"notes", r.notes}};
}

BoundReport bound_report_from_json(const json& doc) {
  try {
    BoundReport r;
    r.episode_length = doc.at("M").get<int>();
    r.gamma = pair_of<double>(doc, "gamma");
    r.delta = pair_of<double>(doc, "delta");
    r.eps_hat = pair_of<double>(doc, "eps_hat");
    r.tau = read_optional(doc, "tau");
    r.xi = pair_of<double>(doc, "xi");
    r.epsilon = pair_of<double>(doc, "epsilon");
    r.epsilon_learning = optional_pair(doc, "epsilon_learning");
    r.exploit_finite = pair_of<double>(doc, "exploit_finite");
    r.exploit_infinite = optional_pair(doc, "exploit_infinite");
    if (doc.contains("notes")) r.notes = pair_of<std::string>(doc, "notes");
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed bound report: ") + e.what());
  }
}

json classification_to_json(const StochasticGame& game, const StageClassification& c) {
  json states = json::array();
  json controllers = json::object();
  for (int s = 0; s < game.num_states(); ++s) {
    const StateClassification& sc = c.states[s];
    json entry = {{"state", game.state_names()[s]}, {"label", to_string(sc.label)}};
    entry["controller"] = sc.controller ? json(*sc.controller + 1) : json(nullptr);
    if (sc.potential) {
      json rows = json::array();
      for (Eigen::Index a = 0; a < sc.potential->rows(); ++a) {
        json row = json::array();
        for (Eigen::Index b = 0; b < sc.potential->cols(); ++b) row.push_back((*sc.potential)(a, b));
        rows.push_back(std::move(row));
      }
      entry["potential"] = std::move(rows);
    } else {
      entry["potential"] = nullptr;
    }
    if (sc.controller) controllers[game.state_names()[s]] = *sc.controller + 1;
    states.push_back(std::move(entry));
  }
  json out = {{"valid", true}, {"class", to_string(c.overall)}, {"states", std::move(states)}};
  if (c.overall == GameCase::kSwitchingController) out["controllers"] = std::move(controllers);
  return out;
}

json graph_report_to_json(const StochasticGame& game, int episode_length) {
  const DirectedGraph g = build_graph(game);
  const auto witness = find_coprime_cycle(g, episode_length);
  json w = nullptr;
  if (witness)
    w = {{"state", witness->vertex},
         {"state_name", game.state_names()[witness->vertex]},
         {"residue", witness->residue}};
  return {{"strongly_connected", strongly_connected(g)},
          {"coprime_cycle", witness.has_value()},
          {"extended_strongly_connected", extended_strongly_connected(g, episode_length)},
          {"witness", std::move(w)}};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace episodic
