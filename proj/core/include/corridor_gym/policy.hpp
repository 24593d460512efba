#pragma once

#include <map>
#include <memory>

#include "corridor_gym/env.hpp"
#include "corridor_gym/mlp.hpp"
#include "corridor_gym/random.hpp"

namespace cgym {

// Decision policy shared by every aircraft of an episode (decentralized
// execution, one set of parameters).
class Policy {
 public:
  virtual ~Policy() = default;

  virtual SpeedCommand act(const Observation& obs) = 0;

  // Commands for every agent of `result` that is not done, in id order.
  virtual std::map<AircraftId, SpeedCommand> act_all(const StepResult& result);
};

// No separation logic: keeps the flight-plan speed.
class UnequippedPolicy final : public Policy {
 public:
  SpeedCommand act(const Observation&) override { return SpeedCommand::Hold; }
};

// Epsilon-greedy over a Q-network; epsilon 0 is the deterministic greedy
// policy used for evaluation.
class QNetworkPolicy final : public Policy {
 public:
  QNetworkPolicy(std::shared_ptr<const Mlp> net, UseCaseParams params, std::uint64_t seed, double epsilon = 0.0);

  void set_epsilon(double eps) { epsilon_ = eps; }
  double epsilon() const { return epsilon_; }
  void set_network(std::shared_ptr<const Mlp> net) { net_ = std::move(net); }

  SpeedCommand act(const Observation& obs) override;
  std::map<AircraftId, SpeedCommand> act_all(const StepResult& result) override;

 private:
  std::shared_ptr<const Mlp> net_;
  UseCaseParams params_;
  Rng rng_;
  double epsilon_;
};

}  // namespace cgym
