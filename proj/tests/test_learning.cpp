#include <gtest/gtest.h>

#include <cmath>

#include "episodic/learning.hpp"
#include "episodic/simulation.hpp"
#include "support/generators.hpp"

using namespace episodic;
using namespace episodic::testing;

namespace {

constexpr double kBoltzmannHigh = 0.731058578630004879;

LearningConfig config(double tau, double alpha0 = 1.0, double q_init = 0.0) {
  LearningConfig c;
  c.tau = tau;
  c.alpha0 = alpha0;
  c.q_init = q_init;
  return c;
}

// One full stage at x for a lone learner.
int play(EpisodicQLearner& agent, ExtendedState x, Rng& rng, double reward) {
  agent.begin_stage(x);
  const int a = agent.act(rng);
  agent.update_value();
  agent.end_stage(reward);
  return a;
}

}  // namespace

TEST(LearningConfig, Validation) {
  EXPECT_NO_THROW(LearningConfig{}.validate());
  LearningConfig c;
  c.rho = 0.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.rho = 1.0;
  EXPECT_NO_THROW(c.validate());
  c.alpha0 = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = LearningConfig{};
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(EpisodicQLearner(1, 1, 2, 0.9, c), std::invalid_argument);
}

TEST(StepSize, Formulas) {
  EXPECT_DOUBLE_EQ(normalized_step_size(0.1, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(normalized_step_size(0.5, 0.25), 1.0);
  EXPECT_THROW(normalized_step_size(0.5, 0.0), std::invalid_argument);
  LearningConfig c;
  c.alpha0 = 0.8;
  c.rho = 0.7;
  EXPECT_DOUBLE_EQ(reference_step_size(c, 0), 0.8);
  EXPECT_DOUBLE_EQ(reference_step_size(c, 3), 0.8 / std::pow(4.0, 0.7));
}

TEST(StepSize, OnlyPlayedActionAtVisitedState) {
  EpisodicQLearner agent(2, 2, 3, 0.9, config(0.5, 0.2));
  Rng rng = make_stream(1, 1);
  const int a = play(agent, {1, 0}, rng, 0.0);
  const double br = agent.current_response()(a);
  EXPECT_DOUBLE_EQ(agent.step_size({1, 0}, a), std::min(1.0, 0.2 / br));
  EXPECT_EQ(agent.step_size({1, 0}, (a + 1) % 3), 0.0);
  EXPECT_EQ(agent.step_size({0, 0}, a), 0.0);
}

TEST(Update, ConvexCombination) {
  // Two equal q entries: br = 1/2, alpha0 = 1/4, so the step is 1/2.
  EpisodicQLearner agent(1, 1, 2, 0.9, config(1.0, 0.25, 1.0));
  Rng rng = make_stream(2, 1);
  const int a = play(agent, {0, 0}, rng, 3.0);
  agent.begin_stage({0, 0});
  EXPECT_DOUBLE_EQ(agent.q()(0, a), 2.0);
  EXPECT_DOUBLE_EQ(agent.q()(0, 1 - a), 1.0);
}

TEST(Update, BoundaryTargetIgnoresContinuation) {
  // q_init = 5 so v is 5 everywhere; from the last substage the target is r.
  EpisodicQLearner agent(1, 2, 2, 0.9, config(1.0, 1.0, 5.0));
  Rng rng = make_stream(3, 1);
  const int a0 = play(agent, {0, 0}, rng, 0.0);
  const int a1 = play(agent, {0, 1}, rng, 0.7);
  agent.begin_stage({0, 0});
  // Step is min(1, 1/0.5) = 1 on the first visit.
  EXPECT_DOUBLE_EQ(agent.q()(1, a1), 0.7);
  // The substage-0 update bootstrapped from v(s,1) = 5.
  EXPECT_DOUBLE_EQ(agent.q()(0, a0), 0.0 + 0.9 * 5.0);
}

TEST(Update, LocalityOfQAndV) {
  Gen gen(5);
  EpisodicQLearner agent(3, 2, 3, 0.9, config(0.3, 1.0, 0.1));
  Rng rng = make_stream(4, 1);
  Eigen::MatrixXd q_before = agent.q();
  Eigen::VectorXd v_before = agent.v();
  for (int k = 0; k < 2000; ++k) {
    const ExtendedState x{uniform_int(gen, 0, 2), k % 2};
    agent.begin_stage(x);
    const int changed_q = static_cast<int>((agent.q().array() != q_before.array()).count());
    EXPECT_LE(changed_q, 1);
    q_before = agent.q();
    agent.act(rng);
    agent.update_value();
    const int changed_v = static_cast<int>((agent.v().array() != v_before.array()).count());
    EXPECT_LE(changed_v, 1);
    for (int y = 0; y < 6; ++y)
      if (y != agent.space().flat(x)) EXPECT_EQ(agent.v()(y), v_before(y));
    v_before = agent.v();
    agent.end_stage(uniform(gen, -1, 1));
  }
}

TEST(Update, ValueIsResponseWeightedQ) {
  EpisodicQLearner flat(1, 1, 2, 0.9, config(0.7, 1.0, 2.0));
  Rng rng = make_stream(5, 1);
  flat.begin_stage({0, 0});
  flat.act(rng);
  flat.update_value();
  EXPECT_DOUBLE_EQ(flat.v()(0), 2.0);
  flat.end_stage(2.0);

  // Reward 1 for action 0 and 0 for action 1 drives q to exactly [1, 0].
  EpisodicQLearner target(1, 1, 2, 0.9, config(1.0));
  for (int k = 0; k < 100; ++k) {
    target.begin_stage({0, 0});
    const int a = target.act(rng);
    target.update_value();
    target.end_stage(a == 0 ? 1.0 : 0.0);
  }
  target.begin_stage({0, 0});
  ASSERT_DOUBLE_EQ(target.q()(0, 0), 1.0);
  ASSERT_DOUBLE_EQ(target.q()(0, 1), 0.0);
  target.act(rng);
  target.update_value();
  EXPECT_NEAR(target.v()(0), kBoltzmannHigh, 1e-15);
}

TEST(Phases, OutOfOrderCallsThrow) {
  EpisodicQLearner agent(1, 1, 2, 0.9, LearningConfig{});
  Rng rng = make_stream(6, 1);
  EXPECT_THROW(agent.act(rng), std::logic_error);
  EXPECT_THROW(agent.update_value(), std::logic_error);
  EXPECT_THROW(agent.end_stage(0.0), std::logic_error);
  agent.begin_stage({0, 0});
  EXPECT_THROW(agent.begin_stage({0, 0}), std::logic_error);
  EXPECT_THROW(agent.update_value(), std::logic_error);
  agent.act(rng);
  EXPECT_THROW(agent.end_stage(0.0), std::logic_error);
  agent.update_value();
  agent.end_stage(0.0);
  EXPECT_THROW(agent.begin_stage({1, 0}), std::out_of_range);
}

TEST(Act, EmpiricalFrequencies) {
  // q = [0, 0] stays put under zero rewards with q_init = 0.
  EpisodicQLearner agent(1, 1, 2, 0.9, config(1.0));
  Rng rng = make_stream(7, 1);
  constexpr int kSamples = 100000;
  int zeros = 0;
  for (int k = 0; k < kSamples; ++k) zeros += play(agent, {0, 0}, rng, 0.0) == 0;
  const double freq = static_cast<double>(zeros) / kSamples;
  EXPECT_GE(freq, 0.494);
  EXPECT_LE(freq, 0.506);

  const Eigen::VectorXd br = smoothed_best_response(Eigen::Vector2d(1, 0), 1.0);
  Rng sampler = make_stream(8, 1);
  int hits = 0;
  for (int k = 0; k < kSamples; ++k) hits += sample_index(br, sampler) == 0;
  const double sigma = std::sqrt(kBoltzmannHigh * (1 - kBoltzmannHigh) / kSamples);
  EXPECT_NEAR(static_cast<double>(hits) / kSamples, kBoltzmannHigh, 3 * sigma);
}

TEST(Act, DeterministicForSeed) {
  auto actions = [](std::uint64_t seed) {
    EpisodicQLearner agent(2, 3, 3, 0.9, config(0.2));
    Rng rng = make_stream(seed, 1);
    std::vector<int> out;
    for (int k = 0; k < 500; ++k) out.push_back(play(agent, {k % 2, k % 3}, rng, std::sin(k)));
    return out;
  };
  EXPECT_EQ(actions(42), actions(42));
  EXPECT_NE(actions(42), actions(43));
}

TEST(StepSize, SynchronousInExpectation) {
  Gen gen(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd br = smoothed_best_response(random_vector(gen, 3, -1, 1), 1.0);
    const double alpha = 0.5 * br.minCoeff();
    Rng rng = make_stream(trial, 1);
    Eigen::Vector3d rate = Eigen::Vector3d::Zero();
    constexpr int kStages = 100000;
    for (int k = 0; k < kStages; ++k) {
      const int a = sample_index(br, rng);
      rate(a) += normalized_step_size(alpha, br(a));
    }
    rate /= kStages;
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(rate(a) / alpha, 1.0, 0.05);
  }
}

TEST(Boundedness, EpisodicTablesStayWithinHorizonTimesRange) {
  Gen gen(10);
  for (int trial = 0; trial < 4; ++trial) {
    const double gamma = trial % 2 ? 1.0 : 0.95;
    const StochasticGame game = random_game(gen, {2, 2, 3, gamma, gamma});
    const int M = 3;
    const double q_init = trial < 2 ? 0.0 : 2.0;
    std::array<EpisodicQLearner, 2> agents{
        EpisodicQLearner(2, M, 2, gamma, config(0.05, 1.0, q_init)),
        EpisodicQLearner(2, M, 3, gamma, config(0.05, 1.0, q_init))};
    Environment env(game, M, 0, make_stream(trial, kEnvironmentStream));
    std::array<Rng, 2> rng{make_stream(trial, 1), make_stream(trial, 2)};
    const double bound = M * 1.0 + q_init;
    for (int k = 0; k < 200000; ++k) {
      for (auto& a : agents) a.begin_stage(env.current());
      const int a1 = agents[0].act(rng[0]);
      const int a2 = agents[1].act(rng[1]);
      const auto step = env.step(a1, a2);
      for (int i = 0; i < 2; ++i) {
        agents[i].update_value();
        agents[i].end_stage(step.rewards[i]);
      }
      if (k % 97 == 0)
        for (const auto& a : agents) {
          ASSERT_LE(a.q().cwiseAbs().maxCoeff(), bound + 1e-12);
          ASSERT_LE(a.v().cwiseAbs().maxCoeff(), bound + 1e-12);
        }
    }
  }
}

TEST(IndividualQ, MatchingPenniesConverges) {
  const PayoffSequence mp = [](std::uint64_t, int, int a1, int a2) {
    const double u = a1 == a2 ? 1.0 : -1.0;
    return std::array<double, 2>{u, -u};
  };
  const std::array<double, 1> nature{1.0};
  LearningConfig c = config(0.1);
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const QTrajectory tr = run_individual_q_sequence(mp, nature, {2, 2}, {c, c}, 1000000, seed);
    const double err = std::max(tr.final_q[0].cwiseAbs().maxCoeff(), tr.final_q[1].cwiseAbs().maxCoeff());
    good += err <= 0.05;
  }
  EXPECT_GE(good, 9);
}

TEST(IndividualQ, PotentialGameWithNatureNoise) {
  // Identical interest [[1,0],[0,1]] plus a fair coin adding +-0.02 to both.
  // The residual settles near the coin amplitude: once an action's
  // probability drops below the reference step, every rare play overwrites
  // its q with one noisy sample.
  const PayoffSequence u = [](std::uint64_t, int omega, int a1, int a2) {
    const double base = a1 == a2 ? 1.0 : 0.0;
    const double noise = omega == 0 ? 0.02 : -0.02;
    return std::array<double, 2>{base + noise, base + noise};
  };
  const std::array<double, 2> coin{0.5, 0.5};
  Eigen::Matrix2d r;
  r << 1, 0, 0, 1;
  const MatrixGame expected{r, r};
  LearningConfig c = config(0.1);
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const QTrajectory tr = run_individual_q_sequence(u, coin, {2, 2}, {c, c}, 1000000, seed);
    good += logit_residual(expected, 0.1, tr.final_q) <= 0.05;
  }
  EXPECT_GE(good, 9);
}

TEST(IndividualQ, RecordsTrajectory) {
  const PayoffSequence zero = [](std::uint64_t, int, int, int) { return std::array<double, 2>{0, 0}; };
  const std::array<double, 1> nature{1.0};
  const QTrajectory tr = run_individual_q_sequence(zero, nature, {2, 3}, {LearningConfig{}, LearningConfig{}},
                                                   1000, 1, 100);
  ASSERT_EQ(tr.stages.size(), 10u);
  EXPECT_EQ(tr.stages.front(), 100u);
  EXPECT_EQ(tr.stages.back(), 1000u);
  EXPECT_EQ(tr.q.back()[1].size(), 3);
  EXPECT_THROW(run_individual_q_sequence(zero, {}, {2, 2}, {LearningConfig{}, LearningConfig{}}, 10, 1),
               std::invalid_argument);
}
