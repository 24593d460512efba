#include "corridor_gym/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "corridor_gym/errors.hpp"

namespace cgym {

Mlp::Mlp(std::vector<std::size_t> sizes, Activation hidden) : sizes_(std::move(sizes)), hidden_(hidden) {
  if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
  for (std::size_t s : sizes_) {
    if (s == 0) throw ConfigError("MLP layer sizes must be positive");
  }
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(sizes_[l]);
    const auto in = static_cast<Eigen::Index>(sizes_[l - 1]);
    layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
}

void Mlp::init(Rng& rng) {
  for (auto& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    // Column-major fill keeps the draw order tied to flatten() order.
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
    layer.bias.setZero();
  }
}

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::ReLU) z = z.cwiseMax(0.0);
}

}  // namespace

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw ContractViolation("MLP input has " + std::to_string(inputs.rows()) + " rows, expected " +
                            std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) activate(z, hidden_);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd Mlp::forward_one(std::span<const float> input) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = input[i];
  return forward(x).col(0);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

void Mlp::unflatten(std::span<const double> params) {
  if (params.size() != parameter_count()) throw ContractViolation("parameter vector has the wrong length");
  std::size_t k = 0;
  for (auto& l : layers_) {
    std::copy_n(params.data() + k, l.weight.size(), l.weight.data());
    k += static_cast<std::size_t>(l.weight.size());
    std::copy_n(params.data() + k, l.bias.size(), l.bias.data());
    k += static_cast<std::size_t>(l.bias.size());
  }
}

double td_loss(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
               std::span<const double> targets, MlpGradients* grads) {
  const auto batch = inputs.cols();
  if (static_cast<std::size_t>(batch) != actions.size() || actions.size() != targets.size() || batch == 0) {
    throw ContractViolation("td_loss batch sizes disagree");
  }
  const auto& layers = net.layers();
  const std::size_t n_layers = layers.size();

  // Keep pre-activations and activations for the backward pass.
  std::vector<Eigen::MatrixXd> acts;
  std::vector<Eigen::MatrixXd> pre;
  acts.reserve(n_layers + 1);
  pre.reserve(n_layers);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = layers[l].weight * acts.back();
    z.colwise() += layers[l].bias;
    pre.push_back(z);
    if (l + 1 < n_layers) activate(z, net.activation());
    acts.push_back(std::move(z));
  }
  const Eigen::MatrixXd& q = acts.back();

  const double inv_b = 1.0 / static_cast<double>(batch);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), batch);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a = actions[static_cast<std::size_t>(b)];
    if (a < 0 || a >= q.rows()) throw ContractViolation("td_loss action index out of range");
    const double err = q(a, b) - targets[static_cast<std::size_t>(b)];
    loss += err * err;
    delta(a, b) = 2.0 * err * inv_b;
  }
  loss *= inv_b;
  if (!grads) return loss;

  grads->resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    (*grads)[l].weight = delta * acts[l].transpose();
    (*grads)[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
      if (net.activation() == Activation::ReLU) {
        back = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
      }
      delta = std::move(back);
    }
  }
  return loss;
}

std::vector<double> td_loss_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
                                     std::span<const double> targets) {
  MlpGradients g;
  td_loss(net, inputs, actions, targets, &g);
  std::vector<double> out;
  for (const auto& l : g) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::SGD;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd|adam)");
}

void Optimizer::apply(Mlp& net, const MlpGradients& grads) {
  auto& layers = net.layers();
  if (grads.size() != layers.size()) throw ContractViolation("gradient shape does not match network");
  if (kind_ == OptimizerKind::SGD) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weight -= lr_ * grads[l].weight;
      layers[l].bias -= lr_ * grads[l].bias;
    }
    return;
  }
  if (m_.empty()) {
    for (const auto& l : layers) {
      m_.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    v_ = m_;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    m_[l].weight = beta1_ * m_[l].weight + (1.0 - beta1_) * grads[l].weight;
    m_[l].bias = beta1_ * m_[l].bias + (1.0 - beta1_) * grads[l].bias;
    v_[l].weight = beta2_ * v_[l].weight + (1.0 - beta2_) * grads[l].weight.cwiseAbs2();
    v_[l].bias = beta2_ * v_[l].bias + (1.0 - beta2_) * grads[l].bias.cwiseAbs2();
    layers[l].weight.array() -= step * m_[l].weight.array() / (v_[l].weight.array().sqrt() + eps_);
    layers[l].bias.array() -= step * m_[l].bias.array() / (v_[l].bias.array().sqrt() + eps_);
  }
}

double gradient_check(const Mlp& net, const GradientCheckBatch& batch, double h) {
  const std::vector<double> analytic = td_loss_gradient(net, batch.inputs, batch.actions, batch.targets);
  std::vector<double> params = net.flatten();
  Mlp probe = net;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    probe.unflatten(params);
    const double up = td_loss(probe, batch.inputs, batch.actions, batch.targets, nullptr);
    params[i] = saved - h;
    probe.unflatten(params);
    const double down = td_loss(probe, batch.inputs, batch.actions, batch.targets, nullptr);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    if (a == 0.0 && numeric == 0.0) continue;
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace cgym
