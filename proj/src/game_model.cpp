#include "episodic/game_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "episodic/stage_games.hpp"

namespace episodic {

using nlohmann::json;

namespace {

constexpr double kRowSumTolerance = 1e-9;

std::string joint_label(int s, int a1, int a2) {
  std::ostringstream os;
  os << "(s=" << s << ",a1=" << a1 << ",a2=" << a2 << ")";
  return os.str();
}

void validate(const StochasticGame::Spec& spec) {
  const std::size_t ns = spec.state_names.size();
  if (ns == 0) throw ValidationError("game must have at least one state");
  for (int i = 0; i < kNumAgents; ++i) {
    if (spec.action_names[i].empty())
      throw ValidationError("agent " + std::to_string(i + 1) + " has no actions");
    const double g = spec.gammas[i];
    if (!(g > 0.0 && g <= 1.0))
      throw ValidationError("gamma of agent " + std::to_string(i + 1) + " must lie in (0,1], got " +
                            std::to_string(g));
  }
  const std::size_t n1 = spec.action_names[0].size();
  const std::size_t n2 = spec.action_names[1].size();
  const std::size_t joint = ns * n1 * n2;
  for (int i = 0; i < kNumAgents; ++i) {
    if (spec.rewards[i].size() != joint)
      throw ValidationError("reward tensor of agent " + std::to_string(i + 1) + " has " +
                            std::to_string(spec.rewards[i].size()) + " entries, expected " +
                            std::to_string(joint));
    for (double r : spec.rewards[i])
      if (!std::isfinite(r))
        throw ValidationError("reward tensor of agent " + std::to_string(i + 1) +
                              " has a non-finite entry");
  }
  if (spec.transitions.size() != joint * ns)
    throw ValidationError("transition tensor has " + std::to_string(spec.transitions.size()) +
                          " entries, expected " + std::to_string(joint * ns));

  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a1 = 0; a1 < n1; ++a1)
      for (std::size_t a2 = 0; a2 < n2; ++a2) {
        const std::size_t row = ((s * n1 + a1) * n2 + a2) * ns;
        double sum = 0.0;
        for (std::size_t t = 0; t < ns; ++t) {
          const double p = spec.transitions[row + t];
          if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("transition probability p(" + std::to_string(t) + "|" +
                                  joint_label(s, a1, a2) + ") = " + std::to_string(p) +
                                  " is outside [0,1]");
          sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          std::ostringstream os;
          os << "transition row " << joint_label(s, a1, a2) << " sums to " << sum;
          throw ValidationError(os.str());
        }
      }
}

// Reads a JSON array of exactly `expected` elements.
const json& expect_array(const json& j, std::size_t expected, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array");
  if (j.size() != expected)
    throw ValidationError(what + " has " + std::to_string(j.size()) + " entries, expected " +
                          std::to_string(expected));
  return j;
}

double expect_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + " must be a number");
  return j.get<double>();
}

std::vector<std::string> read_names(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ParseError(what + " must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

Eigen::MatrixXd StochasticGame::reward_matrix(int agent, int s) const {
  Eigen::MatrixXd m(num_actions(0), num_actions(1));
  for (int a1 = 0; a1 < num_actions(0); ++a1)
    for (int a2 = 0; a2 < num_actions(1); ++a2) m(a1, a2) = reward(agent, s, a1, a2);
  return m;
}

StochasticGame make_game(StochasticGame::Spec spec) {
  validate(spec);
  return StochasticGame(std::move(spec));
}

StochasticGame load_game(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed game document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("game document must be a JSON object");
  for (const char* key : {"states", "actions", "gammas", "rewards", "transitions"})
    if (!doc.contains(key)) throw ParseError(std::string("game document lacks \"") + key + "\"");

  StochasticGame::Spec spec;
  spec.state_names = read_names(doc["states"], "states");
  const json& actions = expect_array(doc["actions"], kNumAgents, "actions");
  for (int i = 0; i < kNumAgents; ++i)
    spec.action_names[i] = read_names(actions[i], "actions[" + std::to_string(i) + "]");
  const json& gammas = expect_array(doc["gammas"], kNumAgents, "gammas");
  for (int i = 0; i < kNumAgents; ++i)
    spec.gammas[i] = expect_number(gammas[i], "gammas[" + std::to_string(i) + "]");

  const std::size_t ns = spec.state_names.size();
  const std::size_t n1 = spec.action_names[0].size();
  const std::size_t n2 = spec.action_names[1].size();

  const json& rewards = expect_array(doc["rewards"], kNumAgents, "rewards");
  for (int i = 0; i < kNumAgents; ++i) {
    const std::string base = "rewards[" + std::to_string(i) + "]";
    const json& per_state = expect_array(rewards[i], ns, base);
    for (std::size_t s = 0; s < ns; ++s) {
      const std::string sname = base + "[" + std::to_string(s) + "]";
      const json& rows = expect_array(per_state[s], n1, sname);
      for (std::size_t a1 = 0; a1 < n1; ++a1) {
        const std::string rname = sname + "[" + std::to_string(a1) + "]";
        const json& cols = expect_array(rows[a1], n2, rname);
        for (std::size_t a2 = 0; a2 < n2; ++a2) spec.rewards[i].push_back(expect_number(cols[a2], rname));
      }
    }
  }

  const json& trans = expect_array(doc["transitions"], ns, "transitions");
  for (std::size_t s = 0; s < ns; ++s) {
    const std::string sname = "transitions[" + std::to_string(s) + "]";
    const json& rows = expect_array(trans[s], n1, sname);
    for (std::size_t a1 = 0; a1 < n1; ++a1) {
      const std::string rname = sname + "[" + std::to_string(a1) + "]";
      const json& cols = expect_array(rows[a1], n2, rname);
      for (std::size_t a2 = 0; a2 < n2; ++a2) {
        const std::string cname = rname + "[" + std::to_string(a2) + "]";
        const json& next = expect_array(cols[a2], ns, cname);
        for (std::size_t t = 0; t < ns; ++t) spec.transitions.push_back(expect_number(next[t], cname));
      }
    }
  }
  return make_game(std::move(spec));
}

StochasticGame load_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open game file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_game(buffer.str());
}

std::string game_to_json(const StochasticGame& game) {
  const int ns = game.num_states();
  const int n1 = game.num_actions(0);
  const int n2 = game.num_actions(1);
  json doc;
  doc["states"] = game.state_names();
  doc["actions"] = {game.action_names(0), game.action_names(1)};
  doc["gammas"] = {game.gamma(0), game.gamma(1)};
  json rewards = json::array();
  for (int i = 0; i < kNumAgents; ++i) {
    json per_state = json::array();
    for (int s = 0; s < ns; ++s) {
      json rows = json::array();
      for (int a1 = 0; a1 < n1; ++a1) {
        json cols = json::array();
        for (int a2 = 0; a2 < n2; ++a2) cols.push_back(game.reward(i, s, a1, a2));
        rows.push_back(cols);
      }
      per_state.push_back(rows);
    }
    rewards.push_back(per_state);
  }
  doc["rewards"] = rewards;
  json trans = json::array();
  for (int s = 0; s < ns; ++s) {
    json rows = json::array();
    for (int a1 = 0; a1 < n1; ++a1) {
      json cols = json::array();
      for (int a2 = 0; a2 < n2; ++a2) {
        const auto row = game.transition_row(s, a1, a2);
        cols.push_back(std::vector<double>(row.begin(), row.end()));
      }
      rows.push_back(cols);
    }
    trans.push_back(rows);
  }
  doc["transitions"] = trans;
  return doc.dump(2);
}

std::string to_string(StageLabel label) {
  switch (label) {
    case StageLabel::kZeroSum: return "zero-sum";
    case StageLabel::kIdenticalInterest: return "identical-interest";
    case StageLabel::kPotential: return "potential";
    case StageLabel::kNeither: return "neither";
  }
  return "neither";
}

std::string to_string(GameCase game_case) {
  switch (game_case) {
    case GameCase::kZeroSumSG: return "zero-sum-SG";
    case GameCase::kIdenticalInterestSG: return "identical-interest-SG";
    case GameCase::kSwitchingController: return "switching-controller";
    case GameCase::kUnsupported: return "unsupported";
  }
  return "unsupported";
}

std::optional<int> state_controller(const StochasticGame& game, int s) {
  const int n1 = game.num_actions(0);
  const int n2 = game.num_actions(1);
  const int ns = game.num_states();
  // Agent `who` controls s if every row equals the row where the other agent
  // plays action 0.
  auto controls = [&](int who) {
    for (int a1 = 0; a1 < n1; ++a1)
      for (int a2 = 0; a2 < n2; ++a2)
        for (int t = 0; t < ns; ++t) {
          const double ref = who == 0 ? game.transition(s, a1, 0, t) : game.transition(s, 0, a2, t);
          if (game.transition(s, a1, a2, t) != ref) return false;
        }
    return true;
  };
  if (controls(0)) return 0;
  if (controls(1)) return 1;
  return std::nullopt;
}

StageClassification classify(const StochasticGame& game) {
  StageClassification out;
  bool all_zero_sum = true;
  bool all_identical = true;
  bool all_supported = true;
  bool all_controlled = true;
  for (int s = 0; s < game.num_states(); ++s) {
    const MatrixGame stage{game.reward_matrix(0, s), game.reward_matrix(1, s)};
    StateClassification sc;
    sc.potential = find_potential(stage);
    if (is_zero_sum(stage)) {
      sc.label = StageLabel::kZeroSum;
    } else if (is_identical_interest(stage)) {
      sc.label = StageLabel::kIdenticalInterest;
    } else if (sc.potential) {
      sc.label = StageLabel::kPotential;
    }
    sc.controller = state_controller(game, s);

    all_zero_sum = all_zero_sum && sc.label == StageLabel::kZeroSum;
    all_identical = all_identical && sc.label == StageLabel::kIdenticalInterest;
    all_supported = all_supported && sc.label != StageLabel::kNeither;
    all_controlled = all_controlled && sc.controller.has_value();
    out.states.push_back(std::move(sc));
  }
  const bool same_gamma = game.gamma(0) == game.gamma(1);
  if (all_zero_sum && same_gamma) {
    out.overall = GameCase::kZeroSumSG;
  } else if (all_identical && same_gamma) {
    out.overall = GameCase::kIdenticalInterestSG;
  } else if (all_supported && all_controlled) {
    out.overall = GameCase::kSwitchingController;
  } else {
    out.overall = GameCase::kUnsupported;
  }
  return out;
}

ExtendedSpace::ExtendedSpace(int num_states, int episode_length)
    : num_states_(num_states), episode_length_(episode_length) {
  if (episode_length < 1) throw std::invalid_argument("episode length M must be at least 1");
  if (num_states < 1) throw std::invalid_argument("state count must be at least 1");
}

ExtendedSpace extend(const StochasticGame& game, int episode_length) {
  return ExtendedSpace(game.num_states(), episode_length);
}

}  // namespace episodic
