#include <gtest/gtest.h>

#include <string>

#include "episodic/game_model.hpp"
#include "episodic/stage_games.hpp"
#include "support/generators.hpp"

using namespace episodic;
using namespace episodic::testing;

namespace {

const std::string kData = EPISODIC_TEST_DATA;
const std::string kGames = EPISODIC_GAME_DATA;

StochasticGame::Spec single_state_spec(const Eigen::MatrixXd& u1, const Eigen::MatrixXd& u2,
                                       double g1 = 0.9, double g2 = 0.9) {
  StochasticGame::Spec spec;
  spec.state_names = {"s"};
  for (int a = 0; a < u1.rows(); ++a) spec.action_names[0].push_back("r" + std::to_string(a));
  for (int b = 0; b < u1.cols(); ++b) spec.action_names[1].push_back("c" + std::to_string(b));
  spec.gammas = {g1, g2};
  for (int a = 0; a < u1.rows(); ++a)
    for (int b = 0; b < u1.cols(); ++b) {
      spec.rewards[0].push_back(u1(a, b));
      spec.rewards[1].push_back(u2(a, b));
      spec.transitions.push_back(1.0);
    }
  return spec;
}

// Brute-force check of the potential identity over every unilateral deviation.
bool is_potential_of(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& u1, const Eigen::MatrixXd& u2) {
  for (int b = 0; b < u1.cols(); ++b)
    for (int a = 0; a < u1.rows(); ++a)
      for (int a_alt = 0; a_alt < u1.rows(); ++a_alt)
        if (std::abs((u1(a, b) - u1(a_alt, b)) - (phi(a, b) - phi(a_alt, b))) > 1e-9) return false;
  for (int a = 0; a < u1.rows(); ++a)
    for (int b = 0; b < u1.cols(); ++b)
      for (int b_alt = 0; b_alt < u1.cols(); ++b_alt)
        if (std::abs((u2(a, b) - u2(a, b_alt)) - (phi(a, b) - phi(a, b_alt))) > 1e-9) return false;
  return true;
}

}  // namespace

TEST(LoadGame, MatchingPennies) {
  const StochasticGame game = load_game_file(kGames + "/matching_pennies.json");
  EXPECT_EQ(game.num_states(), 1);
  EXPECT_EQ(game.num_actions(0), 2);
  EXPECT_EQ(game.num_actions(1), 2);
  EXPECT_EQ(game.gamma(0), 0.9);
  EXPECT_EQ(game.reward(0, 0, 0, 1), -1.0);
  EXPECT_EQ(game.reward(1, 0, 0, 1), 1.0);
  EXPECT_EQ(game.transition(0, 1, 1, 0), 1.0);
  const StageClassification c = classify(game);
  EXPECT_EQ(c.states[0].label, StageLabel::kZeroSum);
  EXPECT_EQ(c.overall, GameCase::kZeroSumSG);
  EXPECT_EQ(to_string(c.overall), "zero-sum-SG");
}

TEST(LoadGame, BrokenRowSumNamesJointIndex) {
  try {
    load_game_file(kData + "/bad_row_sum.json");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(s=1,a1=1,a2=0)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("0.98"), std::string::npos) << msg;
  }
}

TEST(LoadGame, RejectsGammaOutsideUnitInterval) {
  EXPECT_THROW(load_game_file(kData + "/bad_gamma.json"), ValidationError);
  StochasticGame::Spec spec = single_state_spec(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  spec.gammas = {1.0 + 1e-12, 0.5};
  EXPECT_THROW(make_game(spec), ValidationError);
  spec.gammas = {1.0, 1.0};
  EXPECT_NO_THROW(make_game(spec));
}

TEST(LoadGame, ShapeMismatchIsValidationError) {
  EXPECT_THROW(load_game_file(kData + "/bad_shape.json"), ValidationError);
}

TEST(LoadGame, MalformedDocumentIsParseError) {
  EXPECT_THROW(load_game_file(kData + "/malformed.json"), ParseError);
  EXPECT_THROW(load_game_file(kData + "/wrong_type.json"), ParseError);
  EXPECT_THROW(load_game_file(kData + "/does_not_exist.json"), ParseError);
  EXPECT_THROW(load_game("[1, 2]"), ParseError);
}

TEST(LoadGame, RejectsNegativeProbabilities) {
  StochasticGame::Spec spec;
  spec.state_names = {"a", "b"};
  spec.action_names = {std::vector<std::string>{"x"}, std::vector<std::string>{"y"}};
  spec.rewards = {std::vector<double>{0, 0}, std::vector<double>{0, 0}};
  spec.transitions = {1.2, -0.2, 0.5, 0.5};
  EXPECT_THROW(make_game(spec), ValidationError);
}

TEST(LoadGame, JsonRoundTrip) {
  Gen gen(11);
  const StochasticGame game = random_game(gen, {3, 2, 3, 0.7, 1.0});
  const StochasticGame again = load_game(game_to_json(game));
  EXPECT_EQ(again.spec().rewards, game.spec().rewards);
  EXPECT_EQ(again.spec().transitions, game.spec().transitions);
  EXPECT_EQ(again.gammas(), game.gammas());
  EXPECT_EQ(again.state_names(), game.state_names());
}

TEST(Classify, SwitchingControllerFile) {
  const StochasticGame game = load_game_file(kGames + "/switching_controller.json");
  // Oracle: compare transition rows across the non-controller's actions.
  for (int a1 = 0; a1 < 2; ++a1)
    for (int t = 0; t < 2; ++t) EXPECT_EQ(game.transition(0, a1, 0, t), game.transition(0, a1, 1, t));
  for (int a2 = 0; a2 < 2; ++a2)
    for (int t = 0; t < 2; ++t) EXPECT_EQ(game.transition(1, 0, a2, t), game.transition(1, 1, a2, t));
  EXPECT_NE(game.transition(0, 0, 0, 0), game.transition(0, 1, 0, 0));
  EXPECT_NE(game.transition(1, 0, 0, 0), game.transition(1, 0, 1, 0));

  const StageClassification c = classify(game);
  ASSERT_EQ(c.states.size(), 2u);
  EXPECT_EQ(c.states[0].controller, 0);
  EXPECT_EQ(c.states[1].controller, 1);
  EXPECT_EQ(c.overall, GameCase::kSwitchingController);
}

TEST(Classify, ZeroSumAndIdenticalInterest) {
  Gen gen(3);
  const StochasticGame zs = random_game(gen, {2, 2, 3, 0.8, 0.8, true});
  EXPECT_EQ(classify(zs).overall, GameCase::kZeroSumSG);

  StochasticGame::Spec spec = zs.spec();
  spec.rewards[1] = spec.rewards[0];
  const StageClassification ii = classify(make_game(spec));
  EXPECT_EQ(ii.overall, GameCase::kIdenticalInterestSG);
  for (int s = 0; s < 2; ++s) {
    ASSERT_TRUE(ii.states[s].potential.has_value());
    const Eigen::MatrixXd r = make_game(spec).reward_matrix(0, s);
    EXPECT_TRUE(is_potential_of(*ii.states[s].potential, r, r));
  }

  spec.gammas = {0.8, 0.9};
  EXPECT_NE(classify(make_game(spec)).overall, GameCase::kIdenticalInterestSG);
}

TEST(Classify, PotentialExample) {
  const StochasticGame game = load_game_file(kData + "/potential.json");
  const StageClassification c = classify(game);
  ASSERT_EQ(c.states[0].label, StageLabel::kPotential);
  const Eigen::MatrixXd& phi = *c.states[0].potential;
  const Eigen::MatrixXd u1 = game.reward_matrix(0, 0);
  const Eigen::MatrixXd u2 = game.reward_matrix(1, 0);
  EXPECT_TRUE(is_potential_of(phi, u1, u2));
  // Up to a constant the potential is [[1,0],[0,1]].
  Eigen::Matrix2d expected;
  expected << 1, 0, 0, 1;
  const Eigen::MatrixXd shifted = phi.array() - phi(0, 0) + 1.0;
  EXPECT_LT((shifted - expected).cwiseAbs().maxCoeff(), 1e-12);
  // The table u1 itself does not satisfy agent 2's identity.
  EXPECT_FALSE(is_potential_of(u1, u1, u2));
}

TEST(Classify, PerturbationBreaksZeroSum) {
  Gen gen(21);
  for (int trial = 0; trial < 50; ++trial) {
    const StochasticGame zs = random_game(gen, {2, 2, 2, 0.9, 0.9, true});
    StochasticGame::Spec spec = zs.spec();
    const int entry = uniform_int(gen, 0, static_cast<int>(spec.rewards[1].size()) - 1);
    spec.rewards[1][entry] += uniform(gen, 2e-6, 1e-3) * (trial % 2 ? 1 : -1);
    const StochasticGame perturbed = make_game(spec);
    const StageClassification c = classify(perturbed);
    const int s = entry / 4;
    EXPECT_NE(c.states[s].label, StageLabel::kZeroSum);
    EXPECT_NE(c.overall, GameCase::kZeroSumSG);
    if (c.states[s].potential) {
      EXPECT_TRUE(is_potential_of(*c.states[s].potential, perturbed.reward_matrix(0, s),
                                  perturbed.reward_matrix(1, s)));
    }
  }
}

TEST(Classify, RecoveredPotentialsSatisfyIdentity) {
  Gen gen(5);
  int found = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n1 = uniform_int(gen, 1, 4), n2 = uniform_int(gen, 1, 4);
    Eigen::MatrixXd u1, u2;
    if (trial % 2 == 0) {
      // Potential game by construction: u^i = phi + g^i(a^{-i}).
      const Eigen::MatrixXd phi = random_matrix(gen, n1, n2, -2, 2);
      const Eigen::VectorXd g1 = random_vector(gen, n2, -1, 1);
      const Eigen::VectorXd g2 = random_vector(gen, n1, -1, 1);
      u1 = phi.rowwise() + g1.transpose();
      u2 = phi.colwise() + g2;
    } else {
      u1 = random_matrix(gen, n1, n2, -1, 1);
      u2 = random_matrix(gen, n1, n2, -1, 1);
    }
    const StochasticGame game = make_game(single_state_spec(u1, u2));
    const StageClassification c = classify(game);
    if (trial % 2 == 0) EXPECT_TRUE(c.states[0].potential.has_value());
    if (c.states[0].potential) {
      ++found;
      EXPECT_TRUE(is_potential_of(*c.states[0].potential, u1, u2));
    }
  }
  EXPECT_GE(found, 150);
}

TEST(Classify, UnsupportedWithoutController) {
  Gen gen(8);
  const StochasticGame game = random_game(gen, {2, 2, 2, 0.9, 0.8, false});
  const StageClassification c = classify(game);
  EXPECT_EQ(c.overall, GameCase::kUnsupported);
  EXPECT_FALSE(c.states[0].controller.has_value());
}

TEST(Extend, FlatIndexArithmetic) {
  const ExtendedSpace space(3, 4);
  EXPECT_EQ(space.size(), 12);
  EXPECT_EQ(space.flat({2, 3}), 11);
  EXPECT_EQ(space.next_substage(3), 0);
  EXPECT_TRUE(space.is_last_substage(3));
  for (int x = 0; x < space.size(); ++x) EXPECT_EQ(space.flat(space.at(x)), x);
  for (int s = 0; s < 3; ++s)
    for (int m = 0; m < 4; ++m) EXPECT_EQ(space.at(space.flat(s, m)), (ExtendedState{s, m}));
}

TEST(Extend, SingleSubstageAndRejection) {
  const StochasticGame game = load_game_file(kGames + "/matching_pennies.json");
  const ExtendedSpace space = extend(game, 1);
  EXPECT_EQ(space.size(), game.num_states());
  EXPECT_EQ(space.next_substage(0), 0);
  EXPECT_THROW(extend(game, 0), std::invalid_argument);
}
