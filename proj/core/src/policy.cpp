#include "corridor_gym/policy.hpp"

#include "corridor_gym/ddqn.hpp"
#include "corridor_gym/errors.hpp"

namespace cgym {

std::map<AircraftId, SpeedCommand> Policy::act_all(const StepResult& result) {
  std::map<AircraftId, SpeedCommand> out;
  for (const auto& [id, agent] : result.agents) {
    if (!agent.done) out.emplace(id, act(agent.observation));
  }
  return out;
}

QNetworkPolicy::QNetworkPolicy(std::shared_ptr<const Mlp> net, UseCaseParams params, std::uint64_t seed,
                               double epsilon)
    : net_(std::move(net)), params_(params), rng_(seed), epsilon_(epsilon) {
  if (!net_) throw ContractViolation("QNetworkPolicy needs a network");
  if (net_->input_dim() != params_.observation_dim()) {
    throw ConfigError("network input dimension " + std::to_string(net_->input_dim()) +
                      " does not match observation length " + std::to_string(params_.observation_dim()));
  }
}

SpeedCommand QNetworkPolicy::act(const Observation& obs) {
  return act_epsilon_greedy(*net_, scale_observation(obs, params_), epsilon_, rng_);
}

std::map<AircraftId, SpeedCommand> QNetworkPolicy::act_all(const StepResult& result) {
  // Exploration draws happen per aircraft in id order; greedy ones share a
  // single batched forward pass.
  std::map<AircraftId, SpeedCommand> out;
  std::vector<AircraftId> greedy;
  for (const auto& [id, agent] : result.agents) {
    if (agent.done) continue;
    if (epsilon_ > 0.0 && rng_.uniform01() < epsilon_) {
      out.emplace(id, command_from_index(static_cast<int>(rng_.index(kNumSpeedCommands))));
    } else {
      greedy.push_back(id);
    }
  }
  if (greedy.empty()) return out;
  const auto dim = static_cast<Eigen::Index>(net_->input_dim());
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(greedy.size()));
  for (std::size_t k = 0; k < greedy.size(); ++k) {
    const auto scaled = scale_observation(result.agents.at(greedy[k]).observation, params_);
    for (Eigen::Index i = 0; i < dim; ++i) x(i, static_cast<Eigen::Index>(k)) = scaled[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd q = net_->forward(x);
  for (std::size_t k = 0; k < greedy.size(); ++k) {
    const Eigen::VectorXd col = q.col(static_cast<Eigen::Index>(k));
    out.emplace(greedy[k], command_from_index(argmax_q({col.data(), static_cast<std::size_t>(col.size())})));
  }
  return out;
}

}  // namespace cgym
