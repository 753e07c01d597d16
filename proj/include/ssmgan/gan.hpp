#pragma once

// Conditional WGAN-GP over the shape-model synthesis path. The generator
// emits eigenvector weights W; fake signals are M_l + W A_l, so every fake
// row stays in its cluster's affine span. The critic loss uses the
// pre-sigmoid logit.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssmgan/networks.hpp"
#include "ssmgan/optim.hpp"
#include "ssmgan/shape_model.hpp"

namespace ssmgan::gan {

using ad::Tensor;

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t batch_size = 64;
  std::size_t z_dim = 100;
  double lambda = 10.0;
  int n_critic = 5;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  long long total_steps = 0;
  std::uint64_t seed = 0;
  long long checkpoint_interval = 0;  // 0 disables periodic checkpoints
  int beat_length = kBeatLength;
  double split_ratio = 0.7;
  nn::NetworkConfig network = nn::NetworkConfig::table2();

  void validate() const {
    if (!(lambda >= 0)) fail(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (batch_size < 2) fail(ErrorCode::InvalidArgument, "batch_size must be >= 2");
    if (!(learning_rate > 0)) fail(ErrorCode::InvalidArgument, "learning_rate must be > 0");
    if (n_critic < 1) fail(ErrorCode::InvalidArgument, "n_critic must be >= 1");
    if (total_steps < 0) fail(ErrorCode::InvalidArgument, "total_steps must be >= 0");
    if (network.z_dim != z_dim) fail(ErrorCode::InvalidArgument, "network z_dim differs from z_dim");
  }

  nn::AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_eps}; }
};

inline io::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", io::format_real(c.learning_rate)},
          {"batch_size", c.batch_size},
          {"z_dim", c.z_dim},
          {"lambda", io::format_real(c.lambda)},
          {"n_critic", c.n_critic},
          {"beta1", io::format_real(c.beta1)},
          {"beta2", io::format_real(c.beta2)},
          {"adam_eps", io::format_real(c.adam_eps)},
          {"total_steps", c.total_steps},
          {"seed", c.seed},
          {"checkpoint_interval", c.checkpoint_interval},
          {"beat_length", c.beat_length},
          {"split_ratio", io::format_real(c.split_ratio)},
          {"network", nn::network_config_to_json(c.network)}};
}

inline TrainConfig train_config_from_json(const io::json& j) {
  TrainConfig c;
  c.learning_rate = io::parse_real(j.at("learning_rate"));
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.z_dim = j.at("z_dim").get<std::size_t>();
  c.lambda = io::parse_real(j.at("lambda"));
  c.n_critic = j.at("n_critic").get<int>();
  c.beta1 = io::parse_real(j.at("beta1"));
  c.beta2 = io::parse_real(j.at("beta2"));
  c.adam_eps = io::parse_real(j.at("adam_eps"));
  c.total_steps = j.at("total_steps").get<long long>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_interval = j.at("checkpoint_interval").get<long long>();
  c.beat_length = j.at("beat_length").get<int>();
  c.split_ratio = io::parse_real(j.at("split_ratio"));
  c.network = nn::network_config_from_json(j.at("network"));
  return c;
}

// ------------------------------------------------------------ synthesis

/// Constant tensors of the synthesis path for one class.
struct ClassSynthesis {
  std::vector<Tensor> means;  // per cluster, (2T)
  std::vector<Tensor> bases;  // per cluster, (maxB, 2T), zero-padded
};

inline std::vector<ClassSynthesis> synthesis_constants(const ShapeModelSet& set) {
  std::vector<ClassSynthesis> out(set.classes.size());
  const auto D = static_cast<std::size_t>(set.dim());
  const auto maxB = static_cast<std::size_t>(set.max_rank());
  for (int l = 0; l < static_cast<int>(set.classes.size()); ++l) {
    for (int k = 0; k < set.clusters_in(l); ++k) {
      const auto& m = set.model(l, k);
      out[static_cast<std::size_t>(l)].means.push_back(Tensor::constant({D}, std::vector<double>(m.mean.data(), m.mean.data() + D)));
      std::vector<double> a(maxB * D, 0.0);
      for (std::size_t r = 0; r < static_cast<std::size_t>(m.rank()); ++r) {
        for (std::size_t c = 0; c < D; ++c) a[r * D + c] = m.basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
      out[static_cast<std::size_t>(l)].bases.push_back(Tensor::constant({maxB, D}, std::move(a)));
    }
  }
  return out;
}

/// Fake rows for a (b, K * maxB) weight batch: row k * b + i is
/// M_l[k] + W_i[k] A_l[k]. Gradients flow into W only.
inline Tensor synthesize_batch(const ClassSynthesis& cls, const Tensor& W, std::size_t max_rank) {
  const auto K = cls.means.size();
  if (W.rank() != 2 || W.dim(1) < K * max_rank) fail(ErrorCode::ShapeMismatch, "weight batch narrower than K x maxB");
  std::vector<Tensor> rows;
  rows.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    rows.push_back(ad::matmul(ad::slice(W, 1, k * max_rank, max_rank), cls.bases[k]) + cls.means[k]);
  }
  return K == 1 ? rows.front() : ad::concat(rows, 0);
}

inline Eigen::MatrixXd to_matrix(const Tensor& t) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  const auto d = t.data();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = d[static_cast<std::size_t>(i) * t.dim(1) + static_cast<std::size_t>(j)];
  }
  return m;
}

inline Tensor from_matrix(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  }
  return Tensor::constant({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

// ------------------------------------------------------ gradient penalty

/// mean_i (||grad_x D(x_i)|| - 1)^2 at x_i = eps_i real_i + (1 - eps_i) fake_i.
/// `critic` maps an (N, 2T) tensor to (N, 1) logits. The result keeps its
/// graph so it can be differentiated with respect to critic parameters.
template <typename Critic>
Tensor gradient_penalty(Critic&& critic, const Tensor& real, const Tensor& fake, std::span<const double> eps) {
  if (real.shape() != fake.shape() || real.rank() != 2) fail(ErrorCode::ShapeMismatch, "real and fake batches differ in shape");
  const auto n = real.dim(0), d = real.dim(1);
  if (eps.size() != n) fail(ErrorCode::ShapeMismatch, "one interpolation weight per sample");
  std::vector<double> mix(n * d);
  const auto r = real.data(), f = fake.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mix[i * d + j] = eps[i] * r[i * d + j] + (1 - eps[i]) * f[i * d + j];
  }
  Tensor x_hat = Tensor::make({n, d}, std::move(mix), true);
  Tensor score = ad::sum(critic(x_hat));
  if (!score.requires_grad()) return Tensor::scalar(1.0);  // constant critic: zero gradient
  Tensor g = ad::grad_graph(score, {x_hat})[0];
  return ad::mean(ad::square(ad::add_scalar(ad::l2_norm_rows(g, 1e-12), -1.0)));
}

template <typename Critic>
Tensor gradient_penalty(Critic&& critic, const Tensor& real, const Tensor& fake, Rng& rng) {
  std::vector<double> eps(real.dim(0));
  for (auto& e : eps) e = rng.uniform();
  return gradient_penalty(std::forward<Critic>(critic), real, fake, eps);
}

// ---------------------------------------------------------------- state

struct HistoryEntry {
  long long step = 0;
  double critic_loss = 0.0;
  double gen_loss = 0.0;
  double gp_term = 0.0;
};

struct TrainState {
  TrainConfig config;
  nn::Generator generator;
  nn::Discriminator critic;
  nn::Adam gen_opt;
  nn::Adam critic_opt;
  long long step = 0;
  std::vector<HistoryEntry> history;
};

inline TrainState init_state(const TrainConfig& config, const ShapeModelSet& set) {
  config.validate();
  if (config.beat_length != set.T) fail(ErrorCode::InvalidArgument, "config beat length differs from the shape models");
  TrainState s;
  s.config = config;
  Rng g_rng = Rng::keyed(config.seed, 0, 1);
  Rng d_rng = Rng::keyed(config.seed, 0, 2);
  s.generator = nn::Generator::init(config.network, static_cast<std::size_t>(set.K), static_cast<std::size_t>(set.max_rank()), g_rng);
  s.critic = nn::Discriminator::init(config.network, static_cast<std::size_t>(set.T), d_rng);
  s.gen_opt = nn::Adam(config.adam());
  s.gen_opt.init(s.generator.parameters());
  s.critic_opt = nn::Adam(config.adam());
  s.critic_opt.init(s.critic.parameters());
  return s;
}

/// Everything a training step reads besides the state.
struct TrainContext {
  const ShapeModelSet* models = nullptr;
  std::vector<ClassSynthesis> synthesis;
  std::vector<std::vector<Eigen::MatrixXd>> real_rows;  // [class][cluster]: aligned member rows
  std::vector<int> classes;                              // classes with models, round-robin order

  static TrainContext make(const ShapeModelSet& set, const BeatDataset& train) {
    TrainContext ctx;
    ctx.models = &set;
    ctx.synthesis = synthesis_constants(set);
    ctx.real_rows.resize(set.classes.size());
    for (int l = 0; l < static_cast<int>(set.classes.size()); ++l) {
      for (int k = 0; k < set.clusters_in(l); ++k) ctx.real_rows[static_cast<std::size_t>(l)].push_back(member_rows(set, train, l, k));
      if (set.has_class(l)) ctx.classes.push_back(l);
    }
    if (ctx.classes.empty()) fail(ErrorCode::EmptyClass, "shape model set has no classes");
    return ctx;
  }

  int class_for_step(long long step) const { return classes[static_cast<std::size_t>(step % static_cast<long long>(classes.size()))]; }
};

namespace slot {
inline constexpr std::uint64_t kNoise = 0;
inline constexpr std::uint64_t kReal = 1;
inline constexpr std::uint64_t kMix = 2;
inline constexpr std::uint64_t kGenerator = 1000;
inline std::uint64_t critic(int iteration, std::uint64_t what) { return 10 * static_cast<std::uint64_t>(iteration) + what; }
}  // namespace slot

inline Tensor sample_noise(std::size_t batch, std::size_t z_dim, Rng& rng) {
  std::vector<double> z(batch * z_dim);
  for (auto& v : z) v = rng.normal();
  return Tensor::constant({batch, z_dim}, std::move(z));
}

/// Fake batch for class l: b noise draws, each expanded into K_l rows
/// (row k * b + i). Returns the rows as a graph node over G's parameters.
inline Tensor sample_fake(TrainState& s, const TrainContext& ctx, int l, std::size_t b, Rng& rng, bool train = true) {
  Tensor z = sample_noise(b, s.config.z_dim, rng);
  Tensor W = nn::generator_forward(s.generator, z, std::vector<int>(b, l), train);
  return synthesize_batch(ctx.synthesis[static_cast<std::size_t>(l)], W, s.generator.max_rank);
}

/// Real batch matching sample_fake's row layout: row k * b + i is a random
/// aligned member of cluster k.
inline Tensor sample_real(const TrainContext& ctx, int l, std::size_t b, Rng& rng) {
  const auto& rows = ctx.real_rows[static_cast<std::size_t>(l)];
  const auto D = static_cast<std::size_t>(ctx.models->dim());
  std::vector<double> v;
  v.reserve(rows.size() * b * D);
  for (const auto& X : rows) {
    for (std::size_t i = 0; i < b; ++i) {
      const auto r = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(X.rows())));
      for (Eigen::Index c = 0; c < X.cols(); ++c) v.push_back(X(r, c));
    }
  }
  return Tensor::constant({rows.size() * b, D}, std::move(v));
}

/// Row labels for a K_l * b batch of class l.
inline std::vector<int> batch_labels(std::size_t rows, int l) { return std::vector<int>(rows, l); }

namespace detail {

inline std::vector<std::vector<double>> snapshot(const std::vector<nn::BufferRef>& b) {
  std::vector<std::vector<double>> out;
  for (const auto& x : b) out.push_back(*x.values);
  return out;
}

inline void restore(const std::vector<nn::BufferRef>& b, std::vector<std::vector<double>> saved) {
  for (std::size_t i = 0; i < b.size(); ++i) *b[i].values = std::move(saved[i]);
}

inline void require_finite(double v, const char* what, long long step) {
  if (!std::isfinite(v)) fail(ErrorCode::NonFiniteLoss, std::string(what) + " is not finite at step " + std::to_string(step));
}

template <typename F>
auto guard_finite(F&& f, const char* what, long long step) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteValue) fail(ErrorCode::NonFiniteLoss, std::string(what) + " diverged at step " + std::to_string(step) + ": " + e.what());
    throw;
  }
}

}  // namespace detail

struct CriticStepResult {
  double loss = 0.0;
  double gp = 0.0;
};

/// One Adam update of the critic on E[D(fake)] - E[D(real)] + lambda GP.
/// The generator, including its batch-norm statistics, is left untouched.
/// Returns the pre-update loss.
inline CriticStepResult critic_step(TrainState& s, const Tensor& real, const Tensor& fake, int l, Rng& rng) {
  if (real.shape() != fake.shape()) fail(ErrorCode::ShapeMismatch, "real and fake batches differ in shape");
  const auto labels = batch_labels(real.dim(0), l);
  auto critic = [&](const Tensor& x) { return nn::discriminator_logit(s.critic, x, labels, true); };
  return detail::guard_finite(
      [&] {
        Tensor loss = ad::mean(critic(fake)) - ad::mean(critic(real));
        Tensor gp = Tensor::scalar(0.0);
        if (s.config.lambda > 0) {
          gp = gradient_penalty(critic, real, fake, rng);
          loss = loss + gp * s.config.lambda;
        }
        detail::require_finite(loss.item(), "critic loss", s.step);
        const auto params = s.critic.parameters();
        const auto grads = ad::backward(loss, s.critic.tensors());
        s.critic_opt.step(params, grads);
        return CriticStepResult{loss.item(), gp.item()};
      },
      "critic loss", s.step);
}

/// Fake batch for a critic update: drawn without a graph, with the
/// generator's running statistics restored afterwards.
inline Tensor fake_for_critic(TrainState& s, const TrainContext& ctx, int l, std::size_t b, Rng& rng) {
  ad::NoGradGuard no_grad;
  const auto buffers = s.generator.buffers();
  auto saved = detail::snapshot(buffers);
  Tensor fake = sample_fake(s, ctx, l, b, rng, true);
  detail::restore(buffers, std::move(saved));
  return fake;
}

/// Largest affine-span residual of a fake batch of class l.
inline double max_span_residual(const ShapeModelSet& set, const Tensor& fake, int l) {
  const auto K = static_cast<std::size_t>(set.clusters_in(l));
  const auto b = fake.dim(0) / K;
  const Eigen::MatrixXd X = to_matrix(fake);
  double worst = 0.0;
  for (std::size_t r = 0; r < fake.dim(0); ++r) {
    const auto& m = set.model(l, static_cast<int>(r / b));
    worst = std::max(worst, affine_span_residual(m, X.row(static_cast<Eigen::Index>(r)).transpose()));
  }
  return worst;
}

inline constexpr double kSpanTolerance = 1e-9;

/// One Adam update of the generator on -E[D(fake)] with the critic frozen
/// (parameters and running statistics). Returns the pre-update loss.
inline double generator_step(TrainState& s, const TrainContext& ctx, int l, Rng& rng) {
  return detail::guard_finite(
      [&] {
        Tensor fake = sample_fake(s, ctx, l, s.config.batch_size, rng, true);
        const double residual = max_span_residual(*ctx.models, fake, l);
        if (!(residual < kSpanTolerance)) {
          fail(ErrorCode::NonFiniteLoss, "fake sample left its affine span (residual " + io::format_real(residual) + ")");
        }
        const auto buffers = s.critic.buffers();
        auto saved = detail::snapshot(buffers);
        Tensor loss = -ad::mean(nn::discriminator_logit(s.critic, fake, batch_labels(fake.dim(0), l), true));
        detail::restore(buffers, std::move(saved));
        detail::require_finite(loss.item(), "generator loss", s.step);
        const auto params = s.generator.parameters();
        s.gen_opt.step(params, ad::backward(loss, s.generator.tensors()));
        return loss.item();
      },
      "generator loss", s.step);
}

/// One training step: n_critic critic updates then one generator update,
/// all on the class chosen round-robin. Randomness is keyed on
/// (seed, step, slot), so a resumed run draws the same numbers.
inline HistoryEntry train_step(TrainState& s, const TrainContext& ctx) {
  const long long step = s.step + 1;
  const int l = ctx.class_for_step(s.step);
  const auto b = s.config.batch_size;
  const auto seed = s.config.seed;
  HistoryEntry h;
  h.step = step;
  for (int it = 0; it < s.config.n_critic; ++it) {
    Rng noise = Rng::keyed(seed, static_cast<std::uint64_t>(step), slot::critic(it, slot::kNoise));
    Rng pick = Rng::keyed(seed, static_cast<std::uint64_t>(step), slot::critic(it, slot::kReal));
    Rng mix = Rng::keyed(seed, static_cast<std::uint64_t>(step), slot::critic(it, slot::kMix));
    Tensor fake = fake_for_critic(s, ctx, l, b, noise);
    Tensor real = sample_real(ctx, l, b, pick);
    const auto r = critic_step(s, real, fake, l, mix);
    h.critic_loss = r.loss;
    h.gp_term = r.gp;
  }
  Rng g_rng = Rng::keyed(seed, static_cast<std::uint64_t>(step), slot::kGenerator);
  h.gen_loss = generator_step(s, ctx, l, g_rng);
  s.step = step;
  s.history.push_back(h);
  return h;
}

// ---------------------------------------------------------- persistence

inline io::json checkpoint_to_json(TrainState& s) {
  return {{"version", 1},
          {"config", train_config_to_json(s.config)},
          {"generator", nn::params_to_json(s.generator.parameters(), s.generator.buffers())},
          {"generator_shape", {{"clusters", s.generator.clusters}, {"max_rank", s.generator.max_rank}}},
          {"critic", nn::params_to_json(s.critic.parameters(), s.critic.buffers())},
          {"critic_shape", {{"signal_length", s.critic.signal_length}}},
          {"adam_generator", s.gen_opt.to_json()},
          {"adam_critic", s.critic_opt.to_json()},
          {"rng", {{"seed", s.config.seed}, {"counter", s.step}}},
          {"step", s.step}};
}

inline TrainState checkpoint_from_json(const io::json& j) {
  io::require_version(j, 1, "checkpoint");
  TrainState s;
  s.config = train_config_from_json(j.at("config"));
  s.config.validate();
  Rng unused(0);
  s.generator = nn::Generator::init(s.config.network, j.at("generator_shape").at("clusters").get<std::size_t>(),
                                    j.at("generator_shape").at("max_rank").get<std::size_t>(), unused);
  s.critic = nn::Discriminator::init(s.config.network, j.at("critic_shape").at("signal_length").get<std::size_t>(), unused);
  nn::params_from_json(j.at("generator"), s.generator.parameters(), s.generator.buffers());
  nn::params_from_json(j.at("critic"), s.critic.parameters(), s.critic.buffers());
  s.gen_opt = nn::Adam(s.config.adam());
  s.gen_opt.init(s.generator.parameters());
  s.gen_opt.from_json(j.at("adam_generator"));
  s.critic_opt = nn::Adam(s.config.adam());
  s.critic_opt.init(s.critic.parameters());
  s.critic_opt.from_json(j.at("adam_critic"));
  s.step = j.at("step").get<long long>();
  return s;
}

inline void check_compatible(const TrainState& s, const ShapeModelSet& set) {
  if (s.generator.max_rank != static_cast<std::size_t>(set.max_rank()) || s.generator.clusters < static_cast<std::size_t>(set.K) ||
      s.critic.signal_length != static_cast<std::size_t>(set.T)) {
    fail(ErrorCode::ShapeMismatch, "checkpoint does not match the shape model set");
  }
}

inline std::string history_csv(const std::vector<HistoryEntry>& history) {
  std::ostringstream out;
  out << "step,critic_loss,gen_loss,gp_term\n";
  for (const auto& h : history) {
    out << h.step << ',' << io::format_real(h.critic_loss) << ',' << io::format_real(h.gen_loss) << ',' << io::format_real(h.gp_term) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- train

/// Called after every step; `checkpoint_due` is set on the configured
/// interval.
using StepCallback = std::function<void(TrainState&, const HistoryEntry&, bool checkpoint_due)>;

inline TrainState train(const TrainConfig& config, const BeatDataset& train_set, const ShapeModelSet& set, const StepCallback& on_step = {}) {
  TrainState s = init_state(config, set);
  if (config.total_steps == 0) return s;
  const auto ctx = TrainContext::make(set, train_set);
  while (s.step < config.total_steps) {
    const auto h = train_step(s, ctx);
    if (on_step) on_step(s, h, config.checkpoint_interval > 0 && s.step % config.checkpoint_interval == 0);
  }
  return s;
}

// ------------------------------------------------------------- generate

struct GeneratedSet {
  int label = 0;
  Eigen::MatrixXd rows;      // count x 2T, [time | amplitude]
  std::vector<int> cluster;  // cluster index per row
};

/// `count` fake rows of class l from the generator in eval mode. Each
/// noise draw yields one row per cluster; rows are taken draw by draw.
inline GeneratedSet generate(TrainState& s, const ShapeModelSet& set, int l, std::size_t count, std::uint64_t seed) {
  check_compatible(s, set);
  if (!set.has_class(l)) fail(ErrorCode::EmptyClass, std::string("no shape models for class ") + class_symbol(l));
  const auto synthesis = synthesis_constants(set);
  const auto K = static_cast<std::size_t>(set.clusters_in(l));
  const std::size_t draws = (count + K - 1) / K;
  Rng rng = Rng::keyed(seed, 0x47454E, static_cast<std::uint64_t>(l));
  ad::NoGradGuard no_grad;
  GeneratedSet out;
  out.label = l;
  out.rows.resize(static_cast<Eigen::Index>(count), set.dim());
  if (count == 0) return out;
  Tensor z = sample_noise(draws, s.config.z_dim, rng);
  Tensor W = nn::generator_forward(s.generator, z, std::vector<int>(draws, l), false);
  const Eigen::MatrixXd X = to_matrix(synthesize_batch(synthesis[static_cast<std::size_t>(l)], W, s.generator.max_rank));
  std::size_t n = 0;
  for (std::size_t i = 0; i < draws && n < count; ++i) {
    for (std::size_t k = 0; k < K && n < count; ++k, ++n) {
      out.rows.row(static_cast<Eigen::Index>(n)) = X.row(static_cast<Eigen::Index>(k * draws + i));
      out.cluster.push_back(static_cast<int>(k));
    }
  }
  return out;
}

/// Beats sampled from the shape models with W ~ N(0, 1) per coefficient,
/// cycling through clusters like generate().
inline GeneratedSet sample_prior(const ShapeModelSet& set, int l, std::size_t count, std::uint64_t seed) {
  if (!set.has_class(l)) fail(ErrorCode::EmptyClass, std::string("no shape models for class ") + class_symbol(l));
  Rng rng = Rng::keyed(seed, 0x505249, static_cast<std::uint64_t>(l));
  const auto K = set.clusters_in(l);
  GeneratedSet out;
  out.label = l;
  out.rows.resize(static_cast<Eigen::Index>(count), set.dim());
  for (std::size_t n = 0; n < count; ++n) {
    const int k = static_cast<int>(n % static_cast<std::size_t>(K));
    const auto& m = set.model(l, k);
    Eigen::VectorXd w(m.rank());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
    out.rows.row(static_cast<Eigen::Index>(n)) = m.reconstruct(w).transpose();
    out.cluster.push_back(k);
  }
  return out;
}

/// Generated rows as beats on the uniform time grid.
inline BeatDataset to_beats(const GeneratedSet& g) {
  BeatDataset d;
  for (Eigen::Index r = 0; r < g.rows.rows(); ++r) {
    const Eigen::VectorXd row = g.rows.row(r).transpose();
    auto b = regrid_shape(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), g.label);
    b.source_record = "synthetic";
    b.r_peak_index = -1;
    d.beats.push_back(std::move(b));
  }
  return d;
}

/// Beat-dataset JSON of the regridded beats, plus the raw shape rows and
/// their cluster indices.
inline io::json generated_to_json(const GeneratedSet& g) {
  io::json j = dataset_to_json(to_beats(g));
  io::json rows = io::json::array();
  for (Eigen::Index r = 0; r < g.rows.rows(); ++r) {
    const Eigen::VectorXd row = g.rows.row(r).transpose();
    rows.push_back(io::encode_reals(std::vector<double>(row.data(), row.data() + row.size())));
  }
  j["shape_rows"] = std::move(rows);
  j["clusters"] = g.cluster;
  return j;
}

inline GeneratedSet generated_from_json(const io::json& j) {
  GeneratedSet g;
  const auto beats = dataset_from_json(j);
  const auto& rows = j.at("shape_rows");
  g.label = beats.beats.empty() ? 0 : beats.beats.front().label;
  g.cluster = j.at("clusters").get<std::vector<int>>();
  const auto D = static_cast<Eigen::Index>(2 * j.at("T").get<int>());
  g.rows.resize(static_cast<Eigen::Index>(rows.size()), D);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto v = io::decode_reals(rows[r]);
    if (static_cast<Eigen::Index>(v.size()) != D) fail(ErrorCode::FormatError, "shape row length disagrees with T");
    g.rows.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), D);
  }
  return g;
}

}  // namespace ssmgan::gan
