#include "rnnopt/optim.hpp"

#include <algorithm>
#include <cmath>

#include "rnnopt/linalg.hpp"

namespace rnnopt {

namespace {

// Allocates zeroed state on first use, then insists every later call
// presents the same block layout.
void ensure_state(std::vector<std::vector<double>>& state, std::span<const BlockView> theta,
                  const char* who) {
  if (state.empty()) {
    state.reserve(theta.size());
    for (const auto& b : theta) state.emplace_back(b.values.size(), 0.0);
    return;
  }
  if (state.size() != theta.size()) {
    throw DimensionError(std::string(who) + ": expected " + std::to_string(state.size()) +
                         " parameter blocks, got " + std::to_string(theta.size()));
  }
  for (std::size_t b = 0; b < theta.size(); ++b) {
    if (state[b].size() != theta[b].values.size()) {
      throw DimensionError(std::string(who) + ": block " + std::string(theta[b].name) + " has " +
                           std::to_string(theta[b].values.size()) + " entries, state has " +
                           std::to_string(state[b].size()));
    }
  }
}

template <class GradBlock>
void check_gradient(std::span<const BlockView> theta, std::span<const GradBlock> grad,
                    const char* who) {
  if (grad.size() != theta.size()) {
    throw DimensionError(std::string(who) + ": " + std::to_string(theta.size()) +
                         " parameter blocks but " + std::to_string(grad.size()) +
                         " gradient blocks");
  }
  for (std::size_t b = 0; b < theta.size(); ++b) {
    if (grad[b].values.size() != theta[b].values.size()) {
      throw DimensionError(std::string(who) + ": gradient for block " + std::string(theta[b].name) +
                           " has " + std::to_string(grad[b].values.size()) + " entries, expected " +
                           std::to_string(theta[b].values.size()));
    }
    if (!all_finite(grad[b].values)) {
      throw OptimizerError(std::string(who) + ": non-finite gradient in block " +
                           std::string(theta[b].name));
    }
  }
}

void check_learning_rate(double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("learning_rate must be >= 0 and finite");
  }
}

void check_unit_interval(double value, const char* field) {
  if (!(value >= 0.0 && value < 1.0)) {
    throw std::invalid_argument(std::string(field) + " must be in [0, 1), got " +
                                std::to_string(value));
  }
}

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Adam:
      return "adam";
    case OptimizerKind::Nag:
      return "nag";
    case OptimizerKind::Momentum:
      return "momentum";
  }
  return "?";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "nag") return OptimizerKind::Nag;
  if (name == "momentum") return OptimizerKind::Momentum;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "' (expected one of: adam, nag, momentum)");
}

void validate(OptimizerKind kind, const OptimizerHyperparams& hp) {
  check_learning_rate(hp.learning_rate);
  if (kind == OptimizerKind::Adam) {
    check_unit_interval(hp.beta1, "beta1");
    check_unit_interval(hp.beta2, "beta2");
    if (!(hp.epsilon > 0.0)) {
      throw std::invalid_argument("epsilon must be > 0");
    }
  } else {
    check_unit_interval(hp.momentum, "momentum");
  }
}

Momentum::Momentum(double learning_rate, double momentum) : lr_(learning_rate), beta_(momentum) {
  check_learning_rate(lr_);
  check_unit_interval(beta_, "momentum");
}

void Momentum::step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad,
                    const GradFn&) {
  step(theta, grad);
}

void Momentum::step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad) {
  check_gradient(theta, grad, "momentum");
  ensure_state(velocity_, theta, "momentum");
  for (std::size_t b = 0; b < theta.size(); ++b) {
    auto& v = velocity_[b];
    const auto g = grad[b].values;
    const auto p = theta[b].values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = beta_ * v[k] + lr_ * g[k];
      p[k] -= v[k];
    }
  }
  ++steps_;
}

Nesterov::Nesterov(double learning_rate, double momentum) : lr_(learning_rate), beta_(momentum) {
  check_learning_rate(lr_);
  check_unit_interval(beta_, "momentum");
}

void Nesterov::step(std::span<const BlockView> theta, std::span<const ConstBlockView>,
                    const GradFn& grad_fn) {
  step(theta, grad_fn);
}

void Nesterov::step(std::span<const BlockView> theta, const GradFn& grad_fn) {
  ensure_state(velocity_, theta, "nag");
  if (lookahead_.empty()) {
    lookahead_ = velocity_;
    lookahead_grad_ = velocity_;
  }

  std::vector<ConstBlockView> ahead;
  std::vector<BlockView> ahead_grad;
  ahead.reserve(theta.size());
  ahead_grad.reserve(theta.size());
  for (std::size_t b = 0; b < theta.size(); ++b) {
    const auto p = theta[b].values;
    auto& shifted = lookahead_[b];
    for (std::size_t k = 0; k < p.size(); ++k) shifted[k] = p[k] - beta_ * velocity_[b][k];
    std::fill(lookahead_grad_[b].begin(), lookahead_grad_[b].end(), 0.0);
    ahead.push_back({theta[b].name, shifted});
    ahead_grad.push_back({theta[b].name, lookahead_grad_[b]});
  }

  grad_fn(ahead, ahead_grad);
  check_gradient(theta, std::span<const BlockView>(ahead_grad), "nag");

  for (std::size_t b = 0; b < theta.size(); ++b) {
    auto& v = velocity_[b];
    const auto& g = lookahead_grad_[b];
    const auto p = theta[b].values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = beta_ * v[k] + lr_ * g[k];
      p[k] -= v[k];
    }
  }
  ++steps_;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  validate(OptimizerKind::Adam, {.learning_rate = lr_, .beta1 = beta1_, .beta2 = beta2_,
                                 .epsilon = eps_});
}

void Adam::step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad,
                const GradFn&) {
  step(theta, grad);
}

void Adam::step(std::span<const BlockView> theta, std::span<const ConstBlockView> grad) {
  check_gradient(theta, grad, "adam");
  ensure_state(m_, theta, "adam");
  ensure_state(v_, theta, "adam");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t b = 0; b < theta.size(); ++b) {
    auto& m = m_[b];
    auto& v = v_[b];
    const auto g = grad[b].values;
    const auto p = theta[b].values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * (g[k] * g[k]);
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

std::vector<std::vector<double>> Adam::corrected_first_moment() const {
  if (steps_ == 0) throw std::logic_error("corrected_first_moment: no step taken yet");
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  auto out = m_;
  for (auto& block : out) {
    for (double& x : block) x /= c1;
  }
  return out;
}

std::vector<std::vector<double>> Adam::corrected_second_moment() const {
  if (steps_ == 0) throw std::logic_error("corrected_second_moment: no step taken yet");
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto out = v_;
  for (auto& block : out) {
    for (double& x : block) x /= c2;
  }
  return out;
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, const OptimizerHyperparams& hp) {
  validate(kind, hp);
  switch (kind) {
    case OptimizerKind::Adam:
      return std::make_unique<Adam>(hp.learning_rate, hp.beta1, hp.beta2, hp.epsilon);
    case OptimizerKind::Nag:
      return std::make_unique<Nesterov>(hp.learning_rate, hp.momentum);
    case OptimizerKind::Momentum:
      return std::make_unique<Momentum>(hp.learning_rate, hp.momentum);
  }
  throw std::invalid_argument("make_optimizer: unhandled kind");
}

std::unique_ptr<Optimizer> make_optimizer(std::string_view name, const OptimizerHyperparams& hp) {
  return make_optimizer(parse_optimizer_kind(name), hp);
}

}  // namespace rnnopt
