#pragma once

// LSTM and GRU cells, a scalar dense readout, and exact BPTT.
//
// Every gate acts on the concatenation [h_{t-1}, x_t] (hidden state first),
// so each gate matrix has shape hidden x (hidden + input). Parameter blocks
// are always enumerated in declaration order:
//   LSTM: W_i W_f W_o W_c b_i b_f b_o b_c W_out b_out
//   GRU:  W_z W_r W   b_z b_r b             W_out b_out

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rnnopt/blocks.hpp"
#include "rnnopt/linalg.hpp"

namespace rnnopt {

enum class CellKind { Lstm, Gru };

std::string_view to_string(CellKind kind);
/// Accepts "lstm" / "gru"; throws std::invalid_argument listing both otherwise.
CellKind parse_cell_kind(std::string_view name);

struct LstmParams {
  Matrix W_i, W_f, W_o, W_c;
  Vector b_i, b_f, b_o, b_c;
};

struct GruParams {
  Matrix W_z, W_r, W;
  Vector b_z, b_r, b;
};

struct DenseParams {
  Matrix W_out;  // 1 x hidden
  Vector b_out;  // length 1
};

struct LstmState {
  Vector h;
  Vector c;
};

struct GruState {
  Vector h;
};

struct LstmStepCache {
  Vector x, h_prev, c_prev;
  Vector i, f, o, g;  // g is the tanh candidate
  Vector c, tanh_c, h;
};

struct GruStepCache {
  Vector x, h_prev;
  Vector z, r, h_tilde;
  Vector h;
};

/// One recurrent layer plus a linear head producing a scalar.
struct Model {
  std::variant<LstmParams, GruParams> cell;
  DenseParams head;

  CellKind kind() const;
  std::size_t hidden_size() const;
  std::size_t input_size() const;
  std::size_t parameter_count() const;

  static Model zeros(CellKind kind, std::size_t input, std::size_t hidden);
};

/// Gradients share the exact layout of the parameters they differentiate.
using Gradients = Model;

/// Glorot-style uniform init: each gate matrix in +-1/sqrt(hidden + input),
/// the head in +-1/sqrt(hidden), all biases zero. Draw order follows the
/// block order documented above.
Model init_model(CellKind kind, std::size_t input, std::size_t hidden, Rng& rng);

std::vector<BlockView> blocks(Model& model);
std::vector<ConstBlockView> blocks(const Model& model);

std::pair<LstmState, LstmStepCache> lstm_step(const LstmParams& p, const LstmState& s,
                                              const Vector& x);
std::pair<GruState, GruStepCache> gru_step(const GruParams& p, const GruState& s,
                                           const Vector& x);

struct SequenceCache {
  std::variant<std::vector<LstmStepCache>, std::vector<GruStepCache>> steps;
  Vector h_last;

  std::size_t length() const;
};

struct ForwardResult {
  double prediction = 0.0;
  SequenceCache cache;
};

/// Unrolls the cell over the window from h_0 = c_0 = 0 and applies the
/// head to h_T. Throws on an empty window or mismatched input widths.
ForwardResult forward_sequence(const Model& model, const std::vector<Vector>& window);

/// Scalar-feature convenience: each element becomes a length-1 input.
std::vector<Vector> to_inputs(std::span<const double> series);

/// Full BPTT over the cached window. d_prediction is dJ/d(prediction).
Gradients backward_sequence(const Model& model, const SequenceCache& cache, double d_prediction);

struct BlockCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<BlockCheck> blocks;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;

  std::vector<std::string> failed_blocks() const;
};

/// Central-difference step used by the checker.
inline constexpr double kFiniteDifferenceStep = 1e-6;
/// Magnitudes below this are compared absolutely; see relative_error().
inline constexpr double kRelativeErrorFloor = 1e-4;

/// |a - b| / max(|a|, |b|, kRelativeErrorFloor)
double relative_error(double analytic, double numeric);

/// Compares `analytic` against central differences of the model's
/// prediction over `window`, block by block.
GradientCheckReport check_gradients(const Model& model, const std::vector<Vector>& window,
                                    const Gradients& analytic, double tolerance);

/// backward_sequence with d_prediction = 1 checked against central differences.
/// Intended for small models (hidden <= 16).
GradientCheckReport gradient_check(const Model& model, const std::vector<Vector>& window,
                                   double tolerance);

struct GradientCheckInstance {
  Model model;
  std::vector<Vector> window;
};

/// Random small problem for gradient checking: hidden in [1, max_hidden],
/// window length in [1, max_window], input width in [1, 3]. Every
/// parameter, biases included, is drawn from U(-0.5, 0.5) so no block sits
/// at its zero initialization.
GradientCheckInstance random_gradcheck_instance(CellKind kind, Rng& rng, std::size_t max_hidden = 8,
                                                std::size_t max_window = 5);

/// Text snapshot: a header line, a model line, then per block
/// "block <name> <rows> <cols>" followed by row-major values at 17
/// significant digits.
void write_snapshot(const Model& model, std::ostream& out);
Model read_snapshot(std::istream& in);

}  // namespace rnnopt
