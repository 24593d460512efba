#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "corridor_gym/random.hpp"

namespace cgym {

enum class Activation { ReLU = 0, Linear = 1 };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
           a.bias.size() == b.bias.size() && a.weight == b.weight && a.bias == b.bias;
  }
};

// Fully connected network with `hidden` activation between layers and a
// linear output layer. Samples are columns: inputs are (input_dim x batch).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> sizes, Activation hidden = Activation::ReLU);

  // He-uniform weights, zero biases.
  void init(Rng& rng);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Activation activation() const { return hidden_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  Eigen::VectorXd forward_one(std::span<const float> input) const;

  std::size_t parameter_count() const;
  // Parameters in layer order, each layer weight (column-major) then bias.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  Activation hidden_ = Activation::ReLU;
  std::vector<DenseLayer> layers_;
};

using MlpGradients = std::vector<DenseLayer>;

// Mean squared TD error  L = (1/B) sum_b (Q(s_b)[a_b] - y_b)^2  and, when
// `grads` is non-null, its gradient by backpropagation.
double td_loss(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
               std::span<const double> targets, MlpGradients* grads);

// Same loss, flattened gradient in Mlp::flatten() order.
std::vector<double> td_loss_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
                                     std::span<const double> targets);

enum class OptimizerKind { SGD, Adam };

OptimizerKind parse_optimizer(const std::string& name);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  void apply(Mlp& net, const MlpGradients& grads);

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  MlpGradients m_;
  MlpGradients v_;
};

struct GradientCheckBatch {
  Eigen::MatrixXd inputs;
  std::vector<int> actions;
  std::vector<double> targets;
};

// Largest |analytic - numeric| / max(|analytic| + |numeric|, 1e-8) over all
// parameters, with central differences of step h. Pairs where both are
// exactly zero contribute zero.
double gradient_check(const Mlp& net, const GradientCheckBatch& batch, double h = 1e-5);

}  // namespace cgym
