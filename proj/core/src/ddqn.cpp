#include "corridor_gym/ddqn.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "corridor_gym/errors.hpp"

namespace cgym {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void DdqnConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must satisfy 0 < gamma <= 1");
  if (!(eps_end <= eps_start)) throw ConfigError("eps_end must be <= eps_start");
  if (!(eps_end >= 0.0 && eps_start <= 1.0)) throw ConfigError("epsilon values must lie in [0, 1]");
  if (batch_size == 0 || hidden_nodes == 0 || hidden_layers == 0) {
    throw ConfigError("batch_size, hidden_nodes and hidden_layers must be positive");
  }
  if (eps_decay_steps == 0 || replay_capacity == 0 || target_update_freq == 0 || train_every == 0) {
    throw ConfigError("eps_decay_steps, replay_capacity, target_update_freq and train_every must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

double epsilon_at(std::uint64_t step, const DdqnConfig& cfg) {
  if (step >= cfg.eps_decay_steps) return cfg.eps_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.eps_decay_steps);
  return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
}

int argmax_q(std::span<const double> q) {
  int best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

SpeedCommand act_epsilon_greedy(const Mlp& net, std::span<const float> obs, double eps, Rng& rng) {
  if (eps > 0.0 && rng.uniform01() < eps) {
    return command_from_index(static_cast<int>(rng.index(kNumSpeedCommands)));
  }
  const Eigen::VectorXd q = net.forward_one(obs);
  return command_from_index(argmax_q({q.data(), static_cast<std::size_t>(q.size())}));
}

double ddqn_target(double reward, bool done, double gamma, std::span<const double> q_online_next,
                   std::span<const double> q_target_next) {
  if (done) return reward;
  const int a = argmax_q(q_online_next);
  return reward + gamma * q_target_next[static_cast<std::size_t>(a)];
}

double ddqn_target(const Transition& t, const Mlp& online, const Mlp& target, double gamma) {
  if (t.done) return t.reward;
  const Eigen::VectorXd qo = online.forward_one(t.next_obs);
  const Eigen::VectorXd qt = target.forward_one(t.next_obs);
  return ddqn_target(t.reward, false, gamma, {qo.data(), static_cast<std::size_t>(qo.size())},
                     {qt.data(), static_cast<std::size_t>(qt.size())});
}

Mlp make_q_network(std::size_t input_dim, const DdqnConfig& cfg) {
  std::vector<std::size_t> sizes{input_dim};
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) sizes.push_back(cfg.hidden_nodes);
  sizes.push_back(kNumSpeedCommands);
  return Mlp(std::move(sizes), Activation::ReLU);
}

DdqnLearner::DdqnLearner(DdqnConfig cfg, std::size_t input_dim, std::uint64_t seed)
    : cfg_(cfg), optimizer_(cfg.optimizer, cfg.learning_rate), rng_(mix_seed(seed, 0x1ea7)) {
  cfg_.validate();
  online_ = make_q_network(input_dim, cfg_);
  Rng init_rng(seed);
  online_.init(init_rng);
  target_ = online_;
}

void DdqnLearner::set_online(Mlp net) {
  if (net.sizes() != online_.sizes()) throw ContractViolation("replacement network has a different shape");
  online_ = std::move(net);
  target_ = online_;
}

std::optional<double> DdqnLearner::train_step(const ReplayBuffer& buffer) {
  if (buffer.size() < cfg_.batch_size) return std::nullopt;
  const std::vector<Transition> batch = buffer.sample(cfg_.batch_size, rng_);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto dim = static_cast<Eigen::Index>(online_.input_dim());

  Eigen::MatrixXd obs(dim, n);
  Eigen::MatrixXd next(dim, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const Transition& t = batch[static_cast<std::size_t>(b)];
    if (static_cast<Eigen::Index>(t.obs.size()) != dim || static_cast<Eigen::Index>(t.next_obs.size()) != dim) {
      throw ContractViolation("transition observation length does not match the network input");
    }
    for (Eigen::Index i = 0; i < dim; ++i) {
      obs(i, b) = t.obs[static_cast<std::size_t>(i)];
      next(i, b) = t.next_obs[static_cast<std::size_t>(i)];
    }
  }

  const Eigen::MatrixXd q_online_next = online_.forward(next);
  const Eigen::MatrixXd q_target_next = target_.forward(next);
  std::vector<int> actions(batch.size());
  std::vector<double> targets(batch.size());
  for (Eigen::Index b = 0; b < n; ++b) {
    const Transition& t = batch[static_cast<std::size_t>(b)];
    const auto bi = static_cast<std::size_t>(b);
    actions[bi] = t.action;
    const Eigen::VectorXd qo = q_online_next.col(b);
    const Eigen::VectorXd qt = q_target_next.col(b);
    targets[bi] = ddqn_target(t.reward, t.done, cfg_.gamma, {qo.data(), static_cast<std::size_t>(qo.size())},
                              {qt.data(), static_cast<std::size_t>(qt.size())});
  }

  MlpGradients grads;
  const double loss = td_loss(online_, obs, actions, targets, &grads);
  optimizer_.apply(online_, grads);
  ++steps_;
  if (steps_ % cfg_.target_update_freq == 0) sync_target();
  return loss;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'C', 'G', 'Y', 'M', 'P', 'O', 'L', '1'};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_of(const std::vector<std::size_t>& sizes, Activation act) {
  std::string desc = "mlp:";
  for (std::size_t s : sizes) desc += std::to_string(s) + ",";
  desc += act == Activation::ReLU ? "relu" : "linear";
  return fnv1a(desc);
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw LoadError("checkpoint truncated reading " + what);
  return v;
}

}  // namespace

std::uint64_t architecture_hash(const Mlp& net) { return hash_of(net.sizes(), net.activation()); }

void save_policy(const Mlp& net, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, architecture_hash(net));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.activation()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.sizes().size()));
    for (std::size_t s : net.sizes()) put<std::uint64_t>(out, s);
    for (const auto& l : net.layers()) {
      out.write(reinterpret_cast<const char*>(l.weight.data()),
                static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(l.bias.data()),
                static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    }
    if (!out) throw InputError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Mlp load_policy(const std::filesystem::path& path, std::optional<std::size_t> expected_input_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw LoadError(path.string() + " is not a policy checkpoint");
  }
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const auto stored_hash = take<std::uint64_t>(in, "hash");
  const auto act_raw = take<std::uint32_t>(in, "activation");
  if (act_raw > 1) throw LoadError("checkpoint has unknown activation " + std::to_string(act_raw));
  const auto n_sizes = take<std::uint32_t>(in, "layer count");
  if (n_sizes < 2 || n_sizes > 64) throw LoadError("checkpoint has implausible layer count");
  std::vector<std::size_t> sizes;
  for (std::uint32_t i = 0; i < n_sizes; ++i) {
    const auto s = take<std::uint64_t>(in, "layer size");
    if (s == 0 || s > (1u << 24)) throw LoadError("checkpoint has implausible layer size");
    sizes.push_back(static_cast<std::size_t>(s));
  }
  const auto act = static_cast<Activation>(act_raw);
  if (hash_of(sizes, act) != stored_hash) throw LoadError("checkpoint architecture hash mismatch");
  if (expected_input_dim && sizes.front() != *expected_input_dim) {
    throw LoadError("checkpoint input dimension " + std::to_string(sizes.front()) + " does not match expected " +
                    std::to_string(*expected_input_dim));
  }
  Mlp net(sizes, act);
  for (auto& l : net.layers()) {
    const auto wbytes = static_cast<std::streamsize>(l.weight.size() * sizeof(double));
    const auto bbytes = static_cast<std::streamsize>(l.bias.size() * sizeof(double));
    if (!in.read(reinterpret_cast<char*>(l.weight.data()), wbytes) ||
        !in.read(reinterpret_cast<char*>(l.bias.data()), bbytes)) {
      throw LoadError("checkpoint truncated reading parameters");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("checkpoint has trailing bytes");
  return net;
}

}  // namespace cgym
