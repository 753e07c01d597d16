#include <gtest/gtest.h>

#include "ssmgan/fixture.hpp"
#include "ssmgan/gan.hpp"
#include "test_util.hpp"

using namespace ssmgan;
using ad::Tensor;

namespace {

struct Small {
  BeatDataset train;
  ShapeModelSet set;
  gan::TrainConfig config;
};

Small small_problem(std::uint64_t seed = 3) {
  Small s;
  s.train = fixture::make_beats({12, 12, 0}, seed, 30);
  BuildOptions bo;
  bo.K = 2;
  bo.seed = seed;
  s.set = build_shape_models(s.train, bo);
  s.config.network = nn::NetworkConfig::compact();
  s.config.beat_length = 30;
  s.config.batch_size = 4;
  s.config.n_critic = 2;
  s.config.seed = seed;
  return s;
}

Tensor random_rows(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.normal();
  return Tensor::constant({n, d}, std::move(v));
}

}  // namespace

TEST(GradientPenalty, LinearCriticClosedForm) {
  Rng rng(1);
  const std::size_t d = 5;
  for (double scale : {1.0, 0.3, 2.5}) {
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal();
    double norm = 0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : w) v *= scale / norm;
    Tensor W = Tensor::parameter({d, 1}, w);
    auto critic = [&](const Tensor& x) { return ad::matmul(x, W); };
    const auto real = random_rows(6, d, rng), fake = random_rows(6, d, rng);
    const auto gp = gan::gradient_penalty(critic, real, fake, rng);
    EXPECT_NEAR(gp.item(), (scale - 1) * (scale - 1), 1e-10);
    // d/dw (||w|| - 1)^2 = 2 (||w|| - 1) w / ||w||
    const auto g = ad::grad(gp, {W}, false)[0];
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(g[i], 2 * (scale - 1) * w[i] / scale, 1e-10);
  }
}

TEST(GradientPenalty, ConstantCriticIsOne) {
  Rng rng(2);
  const auto real = random_rows(3, 4, rng), fake = random_rows(3, 4, rng);
  auto constant = [](const Tensor& x) { return ad::scale(ad::sum_axis(x, 1), 0.0); };
  // the norm is smoothed by 1e-12 under the square root
  EXPECT_NEAR(gan::gradient_penalty(constant, real, fake, rng).item(), 1.0, 1e-5);
  auto detached = [](const Tensor&) { return Tensor::constant({3, 1}, {1.0, 2.0, 3.0}); };
  EXPECT_EQ(gan::gradient_penalty(detached, real, fake, rng).item(), 1.0);
}

TEST(GradientPenalty, InterpolationEndpoints) {
  // eps = 1 evaluates at the real row; eps = 0 at the fake row.
  Rng rng(3);
  const auto real = random_rows(2, 3, rng), fake = random_rows(2, 3, rng);
  auto cubic = [](const Tensor& x) { return ad::sum_axis(ad::square(x) * x, 1); };
  auto expected = [](const Tensor& rows) {
    double total = 0;
    for (std::size_t i = 0; i < 2; ++i) {
      double n2 = 0;
      for (std::size_t j = 0; j < 3; ++j) n2 += std::pow(3 * rows[i * 3 + j] * rows[i * 3 + j], 2);
      total += std::pow(std::sqrt(n2) - 1, 2);
    }
    return total / 2;
  };
  const std::vector<double> ones{1.0, 1.0}, zeros{0.0, 0.0};
  EXPECT_NEAR(gan::gradient_penalty(cubic, real, fake, ones).item(), expected(real), 1e-10);
  EXPECT_NEAR(gan::gradient_penalty(cubic, real, fake, zeros).item(), expected(fake), 1e-10);
  EXPECT_SSMGAN_ERROR(gan::gradient_penalty(cubic, real, fake, std::vector<double>{0.5}), ErrorCode::ShapeMismatch);
  EXPECT_SSMGAN_ERROR(gan::gradient_penalty(cubic, real, random_rows(3, 3, rng), ones), ErrorCode::ShapeMismatch);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  nn::Adam opt({0.1, 0.0, 0.9, 1e-8});
  Tensor w = Tensor::parameter({3}, {1.0, 2.0, 3.0});
  std::vector<nn::ParamRef> params{{"w", &w}};
  opt.init(params);
  opt.step(params, {Tensor::constant({3}, {0.5, -2.0, 0.0})});
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(w[1], 2.0 + 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(w[2], 3.0);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  nn::Adam opt({1e-3, 0.9, 0.999, 1e-8});
  Tensor w = Tensor::parameter({2}, {0.25, -4.0});
  std::vector<nn::ParamRef> params{{"w", &w}};
  opt.init(params);
  for (int i = 0; i < 5; ++i) opt.step(params, {Tensor::constant({2}, {0.0, 0.0})});
  EXPECT_EQ(w[0], 0.25);
  EXPECT_EQ(w[1], -4.0);
}

TEST(Adam, JsonRoundTripAndErrors) {
  nn::Adam a({1e-2, 0.5, 0.9, 1e-8});
  Tensor w = Tensor::parameter({2}, {1.0, 1.0});
  std::vector<nn::ParamRef> params{{"w", &w}};
  a.init(params);
  a.step(params, {Tensor::constant({2}, {0.3, -0.7})});
  nn::Adam b({1e-2, 0.5, 0.9, 1e-8});
  b.init(params);
  b.from_json(io::json::parse(a.to_json().dump()));
  EXPECT_EQ(b.steps(), 1);
  EXPECT_EQ(b.first_moments(), a.first_moments());
  EXPECT_EQ(b.second_moments(), a.second_moments());
  EXPECT_SSMGAN_ERROR(b.step(params, {}), ErrorCode::ShapeMismatch);
  Tensor v = Tensor::parameter({3}, {0.0, 0.0, 0.0});
  nn::Adam c;
  c.init({{"v", &v}});
  EXPECT_SSMGAN_ERROR(c.from_json(a.to_json()), ErrorCode::FormatError);
}

TEST(TrainConfig, DefaultsSerializeExactly) {
  const gan::TrainConfig c;
  const auto j = gan::train_config_to_json(c);
  EXPECT_EQ(io::parse_real(j.at("learning_rate")), 1e-5);
  EXPECT_EQ(j.at("batch_size").get<int>(), 64);
  EXPECT_EQ(io::parse_real(j.at("lambda")), 10.0);
  EXPECT_EQ(j.at("z_dim").get<int>(), 100);
  EXPECT_EQ(j.at("beat_length").get<int>(), 270);
  EXPECT_EQ(io::parse_real(j.at("split_ratio")), 0.7);
  EXPECT_EQ(j.at("n_critic").get<int>(), 5);
  EXPECT_EQ(gan::train_config_to_json(gan::train_config_from_json(io::json::parse(j.dump()))), j);
}

TEST(TrainConfig, ValidateRejects) {
  auto bad = [](auto edit) {
    gan::TrainConfig c;
    edit(c);
    return c;
  };
  EXPECT_SSMGAN_ERROR(bad([](auto& c) { c.lambda = -1; }).validate(), ErrorCode::InvalidArgument);
  EXPECT_SSMGAN_ERROR(bad([](auto& c) { c.batch_size = 1; }).validate(), ErrorCode::InvalidArgument);
  EXPECT_SSMGAN_ERROR(bad([](auto& c) { c.learning_rate = 0; }).validate(), ErrorCode::InvalidArgument);
  EXPECT_SSMGAN_ERROR(bad([](auto& c) { c.n_critic = 0; }).validate(), ErrorCode::InvalidArgument);
  EXPECT_SSMGAN_ERROR(bad([](auto& c) { c.total_steps = -1; }).validate(), ErrorCode::InvalidArgument);
  EXPECT_SSMGAN_ERROR(bad([](auto& c) { c.z_dim = 10; }).validate(), ErrorCode::InvalidArgument);
  auto p = small_problem();
  p.config.beat_length = 270;
  EXPECT_SSMGAN_ERROR(gan::init_state(p.config, p.set), ErrorCode::InvalidArgument);
}

TEST(Training, FakeRowsStayInAffineSpan) {
  auto p = small_problem();
  auto s = gan::init_state(p.config, p.set);
  const auto ctx = gan::TrainContext::make(p.set, p.train);
  for (int l = 0; l < 2; ++l) {
    Rng rng(11);
    const auto fake = gan::sample_fake(s, ctx, l, 5, rng);
    EXPECT_EQ(fake.dim(0), 5u * static_cast<std::size_t>(p.set.clusters_in(l)));
    EXPECT_LT(gan::max_span_residual(p.set, fake, l), gan::kSpanTolerance);
  }
  for (int i = 0; i < 3; ++i) gan::train_step(s, ctx);
  const auto g = gan::generate(s, p.set, 1, 7, 5);
  ASSERT_EQ(g.rows.rows(), 7);
  for (Eigen::Index r = 0; r < 7; ++r) {
    EXPECT_LT(affine_span_residual(p.set.model(1, g.cluster[static_cast<std::size_t>(r)]), g.rows.row(r).transpose()), gan::kSpanTolerance);
  }
}

TEST(Training, RealBatchLayoutFollowsClusters) {
  auto p = small_problem();
  const auto ctx = gan::TrainContext::make(p.set, p.train);
  Rng rng(4);
  const auto real = gan::sample_real(ctx, 0, 3, rng);
  const auto K = static_cast<std::size_t>(p.set.clusters_in(0));
  ASSERT_EQ(real.dim(0), 3 * K);
  const auto X = gan::to_matrix(real);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& members = ctx.real_rows[0][k];
    for (std::size_t i = 0; i < 3; ++i) {
      bool found = false;
      for (Eigen::Index r = 0; r < members.rows(); ++r) found |= (members.row(r) - X.row(static_cast<Eigen::Index>(k * 3 + i))).norm() == 0.0;
      EXPECT_TRUE(found);
    }
  }
}

TEST(Training, CriticLossFallsOnFixedBatches) {
  auto p = small_problem();
  p.config.learning_rate = 1e-3;
  auto s = gan::init_state(p.config, p.set);
  const auto ctx = gan::TrainContext::make(p.set, p.train);
  Rng rng(5);
  const auto fake = gan::fake_for_critic(s, ctx, 0, 4, rng);
  const auto real = gan::sample_real(ctx, 0, 4, rng);
  std::vector<double> losses;
  for (int i = 0; i < 60; ++i) {
    Rng mix(100);
    losses.push_back(gan::critic_step(s, real, fake, 0, mix).loss);
  }
  const double first = (losses[0] + losses[1] + losses[2]) / 3;
  const double last = (losses[57] + losses[58] + losses[59]) / 3;
  EXPECT_LT(last, first);
}

TEST(Training, GeneratorClimbsAFrozenCritic) {
  auto p = small_problem();
  p.config.learning_rate = 1e-3;
  auto s = gan::init_state(p.config, p.set);
  const auto ctx = gan::TrainContext::make(p.set, p.train);
  const auto critic_before = nn::params_to_json(s.critic.parameters(), s.critic.buffers());
  std::vector<double> losses;
  for (int i = 0; i < 100; ++i) {
    Rng rng(7);
    losses.push_back(gan::generator_step(s, ctx, 0, rng));
  }
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_EQ(nn::params_to_json(s.critic.parameters(), s.critic.buffers()), critic_before);
}

TEST(Training, CriticStepLeavesGeneratorUntouched) {
  auto p = small_problem();
  auto s = gan::init_state(p.config, p.set);
  const auto ctx = gan::TrainContext::make(p.set, p.train);
  const auto before = nn::params_to_json(s.generator.parameters(), s.generator.buffers());
  Rng rng(8);
  const auto fake = gan::fake_for_critic(s, ctx, 1, 4, rng);
  const auto real = gan::sample_real(ctx, 1, 4, rng);
  gan::critic_step(s, real, fake, 1, rng);
  EXPECT_EQ(nn::params_to_json(s.generator.parameters(), s.generator.buffers()), before);
}

TEST(Training, RoundRobinAndHistory) {
  auto p = small_problem();
  p.config.total_steps = 4;
  p.config.checkpoint_interval = 2;
  std::vector<long long> due;
  auto s = gan::train(p.config, p.train, p.set, [&](gan::TrainState& st, const gan::HistoryEntry& h, bool checkpoint) {
    EXPECT_EQ(st.step, h.step);
    if (checkpoint) due.push_back(h.step);
  });
  EXPECT_EQ(s.step, 4);
  ASSERT_EQ(s.history.size(), 4u);
  EXPECT_EQ(due, (std::vector<long long>{2, 4}));
  const auto ctx = gan::TrainContext::make(p.set, p.train);
  EXPECT_EQ(ctx.class_for_step(0), 0);
  EXPECT_EQ(ctx.class_for_step(1), 1);
  EXPECT_EQ(ctx.class_for_step(2), 0);
  for (const auto& h : s.history) {
    EXPECT_TRUE(std::isfinite(h.critic_loss));
    EXPECT_TRUE(std::isfinite(h.gen_loss));
    EXPECT_GE(h.gp_term, 0.0);
  }
  const auto csv = gan::history_csv(s.history);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,critic_loss,gen_loss,gp_term");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Training, ZeroStepsReturnsInitialState) {
  auto p = small_problem();
  auto s = gan::train(p.config, p.train, p.set);
  EXPECT_EQ(s.step, 0);
  EXPECT_TRUE(s.history.empty());
}

TEST(Training, DeterministicAndResumable) {
  auto p = small_problem();
  p.config.total_steps = 4;
  auto a = gan::train(p.config, p.train, p.set);
  auto b = gan::train(p.config, p.train, p.set);
  EXPECT_EQ(gan::checkpoint_to_json(a).dump(), gan::checkpoint_to_json(b).dump());

  auto half = p.config;
  half.total_steps = 2;
  auto c = gan::train(half, p.train, p.set);
  auto resumed = gan::checkpoint_from_json(io::json::parse(gan::checkpoint_to_json(c).dump()));
  resumed.config.total_steps = 4;
  const auto ctx = gan::TrainContext::make(p.set, p.train);
  while (resumed.step < 4) gan::train_step(resumed, ctx);
  EXPECT_EQ(nn::params_to_json(resumed.generator.parameters(), resumed.generator.buffers()),
            nn::params_to_json(a.generator.parameters(), a.generator.buffers()));
  EXPECT_EQ(nn::params_to_json(resumed.critic.parameters(), resumed.critic.buffers()),
            nn::params_to_json(a.critic.parameters(), a.critic.buffers()));

  const auto g1 = gan::generated_to_json(gan::generate(a, p.set, 0, 6, 9)).dump();
  const auto g2 = gan::generated_to_json(gan::generate(b, p.set, 0, 6, 9)).dump();
  EXPECT_EQ(g1, g2);
}

TEST(Training, DifferentSeedsDiffer) {
  auto p = small_problem();
  p.config.total_steps = 1;
  auto a = gan::train(p.config, p.train, p.set);
  p.config.seed = 99;
  auto b = gan::train(p.config, p.train, p.set);
  EXPECT_NE(gan::checkpoint_to_json(a).at("generator").dump(), gan::checkpoint_to_json(b).at("generator").dump());
}

TEST(Checkpoint, RoundTripAndCompatibility) {
  auto p = small_problem();
  p.config.total_steps = 2;
  auto s = gan::train(p.config, p.train, p.set);
  const auto j = gan::checkpoint_to_json(s);
  auto r = gan::checkpoint_from_json(io::json::parse(j.dump()));
  EXPECT_EQ(gan::checkpoint_to_json(r), j);
  EXPECT_EQ(r.step, 2);
  EXPECT_NO_THROW(gan::check_compatible(r, p.set));

  auto other = fixture::make_beats({12, 12, 0}, 3, 40);
  BuildOptions bo;
  bo.K = 2;
  const auto wrong = build_shape_models(other, bo);
  EXPECT_SSMGAN_ERROR(gan::check_compatible(r, wrong), ErrorCode::ShapeMismatch);
  EXPECT_SSMGAN_ERROR(gan::generate(r, wrong, 0, 3, 1), ErrorCode::ShapeMismatch);

  auto bad = j;
  bad["version"] = 7;
  EXPECT_SSMGAN_ERROR(gan::checkpoint_from_json(bad), ErrorCode::FormatError);
}

TEST(Generate, CountsClustersAndErrors) {
  auto p = small_problem();
  auto s = gan::init_state(p.config, p.set);
  const auto K = p.set.clusters_in(0);
  const auto g = gan::generate(s, p.set, 0, 5, 1);
  ASSERT_EQ(g.cluster.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(g.cluster[i], static_cast<int>(i % static_cast<std::size_t>(K)));
  EXPECT_EQ(gan::generate(s, p.set, 0, 0, 1).rows.rows(), 0);
  EXPECT_SSMGAN_ERROR(gan::generate(s, p.set, 2, 3, 1), ErrorCode::EmptyClass);
  EXPECT_SSMGAN_ERROR(gan::sample_prior(p.set, 2, 3, 1), ErrorCode::EmptyClass);

  const auto back = gan::generated_from_json(io::json::parse(gan::generated_to_json(g).dump()));
  EXPECT_EQ(back.cluster, g.cluster);
  EXPECT_EQ(back.rows, g.rows);
  EXPECT_EQ(back.label, 0);
}

TEST(Generate, PriorSamplesAreInSpan) {
  auto p = small_problem();
  const auto g = gan::sample_prior(p.set, 1, 9, 3);
  for (Eigen::Index r = 0; r < g.rows.rows(); ++r) {
    EXPECT_LT(affine_span_residual(p.set.model(1, g.cluster[static_cast<std::size_t>(r)]), g.rows.row(r).transpose()), gan::kSpanTolerance);
  }
  const auto beats = gan::to_beats(g);
  ASSERT_EQ(beats.beats.size(), 9u);
  EXPECT_EQ(beats.beat_length(), 30u);
  EXPECT_EQ(beats.beats[0].label, 1);
}

TEST(Training, Table2NetworkRunsOneStep) {
  auto p = small_problem();
  p.config.network = nn::NetworkConfig::table2();
  p.config.batch_size = 2;
  p.config.n_critic = 1;
  p.config.total_steps = 1;
  auto s = gan::train(p.config, p.train, p.set);
  EXPECT_EQ(s.step, 1);
  EXPECT_TRUE(std::isfinite(s.history.back().critic_loss));
}
