#pragma once

// First-order optimizers over named parameter blocks.
//
// Each optimizer owns one state slot per block (velocity, or first and
// second moments), allocated on the first step and shape-checked on every
// later one. Blocks are updated in the order they are passed.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rnnopt/blocks.hpp"

namespace rnnopt {

class OptimizerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes the gradient of the objective at `theta` into `grad_out`, which has
/// the same block layout. Must be a pure function of `theta`.
using GradFn =
    std::function<void(std::span<const ConstBlockView> theta, std::span<const BlockView> grad_out)>;

enum class OptimizerKind { Adam, Nag, Momentum };

std::string_view to_string(OptimizerKind kind);
/// Accepts "adam", "nag", "momentum"; throws listing the valid names otherwise.
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerHyperparams {
  double learning_rate = 0.001;
  double momentum = 0.9;  // momentum / nag
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;   // adam
  double epsilon = 1e-8;  // adam
};

/// Throws std::invalid_argument naming the offending field and its bound.
void validate(OptimizerKind kind, const OptimizerHyperparams& hp);

class Optimizer {
 public:
  virtual ~Optimizer() = default;

  virtual OptimizerKind kind() const = 0;

  /// One update of `theta` in place. `grad` is the gradient at `theta`;
  /// `grad_fn` is only invoked by optimizers that need the gradient
  /// somewhere else (NAG's look-ahead point).
  virtual void step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad,
                    const GradFn& grad_fn) = 0;

  /// Number of grad_fn calls one step() makes.
  virtual std::size_t extra_gradient_evaluations() const = 0;

  std::uint64_t steps_taken() const { return steps_; }

 protected:
  std::uint64_t steps_ = 0;
};

/// Classical momentum: v <- beta*v + lr*g(theta); theta <- theta - v.
class Momentum final : public Optimizer {
 public:
  explicit Momentum(double learning_rate, double momentum = 0.9);

  OptimizerKind kind() const override { return OptimizerKind::Momentum; }
  void step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad,
            const GradFn& grad_fn) override;
  std::size_t extra_gradient_evaluations() const override { return 0; }

  void step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad);

  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  double lr_;
  double beta_;
  std::vector<std::vector<double>> velocity_;
};

/// Nesterov accelerated gradient with the gradient taken at the look-ahead
/// point: v <- beta*v + lr*g(theta - beta*v); theta <- theta - v.
class Nesterov final : public Optimizer {
 public:
  explicit Nesterov(double learning_rate, double momentum = 0.9);

  OptimizerKind kind() const override { return OptimizerKind::Nag; }
  void step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad,
            const GradFn& grad_fn) override;
  std::size_t extra_gradient_evaluations() const override { return 1; }

  void step(std::span<const BlockView> theta, const GradFn& grad_fn);

  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  double lr_;
  double beta_;
  std::vector<std::vector<double>> velocity_;
  std::vector<std::vector<double>> lookahead_;
  std::vector<std::vector<double>> lookahead_grad_;
};

/// Adam with bias-corrected moments:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
class Adam final : public Optimizer {
 public:
  Adam(double learning_rate = 0.001, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  OptimizerKind kind() const override { return OptimizerKind::Adam; }
  void step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad,
            const GradFn& grad_fn) override;
  std::size_t extra_gradient_evaluations() const override { return 0; }

  void step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad);

  std::uint64_t t() const { return steps_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }
  /// m / (1 - beta1^t) and v / (1 - beta2^t) for the current t (t >= 1).
  std::vector<std::vector<double>> corrected_first_moment() const;
  std::vector<std::vector<double>> corrected_second_moment() const;

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Fresh optimizer with zeroed state.
std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, const OptimizerHyperparams& hp);
std::unique_ptr<Optimizer> make_optimizer(std::string_view name, const OptimizerHyperparams& hp);

}  // namespace rnnopt
