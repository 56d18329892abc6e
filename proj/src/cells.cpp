#include "rnnopt/cells.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "rnnopt/format.hpp"

namespace rnnopt {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vector one_minus(const Vector& v) {
  Vector out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = 1.0 - v[k];
  return out;
}

// sigma'(a) expressed through s = sigma(a)
Vector sigmoid_grad(const Vector& upstream, const Vector& s) {
  Vector out(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) out[k] = upstream[k] * s[k] * (1.0 - s[k]);
  return out;
}

// tanh'(a) expressed through t = tanh(a)
Vector tanh_grad(const Vector& upstream, const Vector& t) {
  Vector out(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) out[k] = upstream[k] * (1.0 - t[k] * t[k]);
  return out;
}

Vector affine(const Matrix& w, const Vector& u, const Vector& b) {
  Vector out = matvec(w, u);
  add_inplace(out, b);
  return out;
}

void check_lstm_shapes(const LstmParams& p, const Vector& h, const Vector& c, const Vector& x) {
  const std::size_t hidden = p.b_i.size();
  if (h.size() != hidden || c.size() != hidden) {
    throw DimensionError("lstm_step: state sizes (" + std::to_string(h.size()) + ", " +
                         std::to_string(c.size()) + ") do not match hidden size " +
                         std::to_string(hidden));
  }
  if (p.W_i.cols() != hidden + x.size()) {
    throw DimensionError("lstm_step: weights " + p.W_i.shape_string() +
                         " expect input of length " + std::to_string(p.W_i.cols() - hidden) +
                         ", got " + std::to_string(x.size()));
  }
}

void check_gru_shapes(const GruParams& p, const Vector& h, const Vector& x) {
  const std::size_t hidden = p.b_z.size();
  if (h.size() != hidden) {
    throw DimensionError("gru_step: state size " + std::to_string(h.size()) +
                         " does not match hidden size " + std::to_string(hidden));
  }
  if (p.W_z.cols() != hidden + x.size()) {
    throw DimensionError("gru_step: weights " + p.W_z.shape_string() +
                         " expect input of length " + std::to_string(p.W_z.cols() - hidden) +
                         ", got " + std::to_string(x.size()));
  }
}

template <class M, class Fn>
void visit_blocks(M& m, Fn&& fn) {
  std::visit(
      [&](auto& p) {
        using P = std::remove_cvref_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LstmParams>) {
          fn("W_i", p.W_i.values());
          fn("W_f", p.W_f.values());
          fn("W_o", p.W_o.values());
          fn("W_c", p.W_c.values());
          fn("b_i", p.b_i.values());
          fn("b_f", p.b_f.values());
          fn("b_o", p.b_o.values());
          fn("b_c", p.b_c.values());
        } else {
          fn("W_z", p.W_z.values());
          fn("W_r", p.W_r.values());
          fn("W", p.W.values());
          fn("b_z", p.b_z.values());
          fn("b_r", p.b_r.values());
          fn("b", p.b.values());
        }
      },
      m.cell);
  fn("W_out", m.head.W_out.values());
  fn("b_out", m.head.b_out.values());
}

// Shapes of each block, in block order, as (rows, cols); vectors are (len, 1).
std::vector<std::pair<std::size_t, std::size_t>> block_shapes(const Model& m) {
  const std::size_t h = m.hidden_size();
  const std::size_t u = h + m.input_size();
  const std::size_t gates = m.kind() == CellKind::Lstm ? 4 : 3;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t k = 0; k < gates; ++k) shapes.emplace_back(h, u);
  for (std::size_t k = 0; k < gates; ++k) shapes.emplace_back(h, 1);
  shapes.emplace_back(1, h);
  shapes.emplace_back(1, 1);
  return shapes;
}

}  // namespace

std::string_view to_string(CellKind kind) {
  return kind == CellKind::Lstm ? "lstm" : "gru";
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "lstm") return CellKind::Lstm;
  if (name == "gru") return CellKind::Gru;
  throw std::invalid_argument("unknown cell '" + std::string(name) + "' (expected one of: lstm, gru)");
}

CellKind Model::kind() const {
  return std::holds_alternative<LstmParams>(cell) ? CellKind::Lstm : CellKind::Gru;
}

std::size_t Model::hidden_size() const {
  return head.W_out.cols();
}

std::size_t Model::input_size() const {
  return std::visit(Overloaded{
                        [](const LstmParams& p) { return p.W_i.cols() - p.W_i.rows(); },
                        [](const GruParams& p) { return p.W_z.cols() - p.W_z.rows(); },
                    },
                    cell);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks(*this)) n += b.values.size();
  return n;
}

Model Model::zeros(CellKind kind, std::size_t input, std::size_t hidden) {
  const std::size_t u = hidden + input;
  Model m;
  if (kind == CellKind::Lstm) {
    m.cell = LstmParams{Matrix(hidden, u), Matrix(hidden, u), Matrix(hidden, u), Matrix(hidden, u),
                        Vector(hidden),    Vector(hidden),    Vector(hidden),    Vector(hidden)};
  } else {
    m.cell = GruParams{Matrix(hidden, u), Matrix(hidden, u), Matrix(hidden, u),
                       Vector(hidden),    Vector(hidden),    Vector(hidden)};
  }
  m.head = DenseParams{Matrix(1, hidden), Vector(1)};
  return m;
}

Model init_model(CellKind kind, std::size_t input, std::size_t hidden, Rng& rng) {
  if (input == 0 || hidden == 0) {
    throw std::invalid_argument("init_model: input and hidden sizes must be >= 1");
  }
  Model m = Model::zeros(kind, input, hidden);
  const double gate_scale = 1.0 / std::sqrt(static_cast<double>(hidden + input));
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::visit(Overloaded{
                 [&](LstmParams& p) {
                   for (Matrix* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_c}) {
                     *w = init_uniform(rng, hidden, hidden + input, gate_scale);
                   }
                 },
                 [&](GruParams& p) {
                   for (Matrix* w : {&p.W_z, &p.W_r, &p.W}) {
                     *w = init_uniform(rng, hidden, hidden + input, gate_scale);
                   }
                 },
             },
             m.cell);
  m.head.W_out = init_uniform(rng, 1, hidden, head_scale);
  return m;
}

std::vector<BlockView> blocks(Model& model) {
  std::vector<BlockView> out;
  visit_blocks(model, [&](std::string_view name, std::span<double> v) { out.push_back({name, v}); });
  return out;
}

std::vector<ConstBlockView> blocks(const Model& model) {
  std::vector<ConstBlockView> out;
  visit_blocks(model,
               [&](std::string_view name, std::span<const double> v) { out.push_back({name, v}); });
  return out;
}

std::pair<LstmState, LstmStepCache> lstm_step(const LstmParams& p, const LstmState& s,
                                              const Vector& x) {
  check_lstm_shapes(p, s.h, s.c, x);
  const Vector u = concat(s.h, x);
  LstmStepCache cache;
  cache.x = x;
  cache.h_prev = s.h;
  cache.c_prev = s.c;
  cache.i = sigmoid(affine(p.W_i, u, p.b_i));
  cache.f = sigmoid(affine(p.W_f, u, p.b_f));
  cache.o = sigmoid(affine(p.W_o, u, p.b_o));
  cache.g = tanh_v(affine(p.W_c, u, p.b_c));
  cache.c = hadamard(cache.f, s.c) + hadamard(cache.i, cache.g);
  cache.tanh_c = tanh_v(cache.c);
  cache.h = hadamard(cache.o, cache.tanh_c);
  LstmState next{cache.h, cache.c};
  return {std::move(next), std::move(cache)};
}

std::pair<GruState, GruStepCache> gru_step(const GruParams& p, const GruState& s, const Vector& x) {
  check_gru_shapes(p, s.h, x);
  const Vector u = concat(s.h, x);
  GruStepCache cache;
  cache.x = x;
  cache.h_prev = s.h;
  cache.z = sigmoid(affine(p.W_z, u, p.b_z));
  cache.r = sigmoid(affine(p.W_r, u, p.b_r));
  cache.h_tilde = tanh_v(affine(p.W, concat(hadamard(cache.r, s.h), x), p.b));
  cache.h = hadamard(one_minus(cache.z), s.h) + hadamard(cache.z, cache.h_tilde);
  GruState next{cache.h};
  return {std::move(next), std::move(cache)};
}

std::size_t SequenceCache::length() const {
  return std::visit([](const auto& v) { return v.size(); }, steps);
}

ForwardResult forward_sequence(const Model& model, const std::vector<Vector>& window) {
  if (window.empty()) {
    throw std::invalid_argument("forward_sequence: empty window");
  }
  const std::size_t hidden = model.hidden_size();
  ForwardResult result;
  std::visit(Overloaded{
                 [&](const LstmParams& p) {
                   std::vector<LstmStepCache> steps;
                   steps.reserve(window.size());
                   LstmState state{Vector(hidden), Vector(hidden)};
                   for (const Vector& x : window) {
                     auto [next, cache] = lstm_step(p, state, x);
                     state = std::move(next);
                     steps.push_back(std::move(cache));
                   }
                   result.cache.h_last = state.h;
                   result.cache.steps = std::move(steps);
                 },
                 [&](const GruParams& p) {
                   std::vector<GruStepCache> steps;
                   steps.reserve(window.size());
                   GruState state{Vector(hidden)};
                   for (const Vector& x : window) {
                     auto [next, cache] = gru_step(p, state, x);
                     state = std::move(next);
                     steps.push_back(std::move(cache));
                   }
                   result.cache.h_last = state.h;
                   result.cache.steps = std::move(steps);
                 },
             },
             model.cell);
  result.prediction = matvec(model.head.W_out, result.cache.h_last)[0] + model.head.b_out[0];
  return result;
}

std::vector<Vector> to_inputs(std::span<const double> series) {
  std::vector<Vector> out;
  out.reserve(series.size());
  for (double x : series) out.push_back(Vector{x});
  return out;
}

Gradients backward_sequence(const Model& model, const SequenceCache& cache, double d_prediction) {
  const bool cache_is_lstm = std::holds_alternative<std::vector<LstmStepCache>>(cache.steps);
  if (cache_is_lstm != (model.kind() == CellKind::Lstm)) {
    throw std::invalid_argument("backward_sequence: cache was produced by a different cell type");
  }
  if (cache.length() == 0 || cache.h_last.size() != model.hidden_size()) {
    throw std::invalid_argument("backward_sequence: cache does not match model");
  }

  const std::size_t hidden = model.hidden_size();
  Gradients grads = Model::zeros(model.kind(), model.input_size(), hidden);

  grads.head.b_out[0] = d_prediction;
  add_outer(grads.head.W_out, Vector{d_prediction}, cache.h_last);
  Vector dh = matvec_transposed(model.head.W_out, Vector{d_prediction});

  std::visit(
      Overloaded{
          [&](const std::vector<LstmStepCache>& steps) {
            const auto& p = std::get<LstmParams>(model.cell);
            auto& g = std::get<LstmParams>(grads.cell);
            Vector dc(hidden);
            for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
              const LstmStepCache& s = *it;
              const Vector u = concat(s.h_prev, s.x);

              // h = o * tanh(c)
              const Vector da_o = sigmoid_grad(hadamard(dh, s.tanh_c), s.o);
              add_inplace(dc, tanh_grad(hadamard(dh, s.o), s.tanh_c));
              // c = f * c_prev + i * g
              const Vector da_f = sigmoid_grad(hadamard(dc, s.c_prev), s.f);
              const Vector da_i = sigmoid_grad(hadamard(dc, s.g), s.i);
              const Vector da_c = tanh_grad(hadamard(dc, s.i), s.g);

              add_outer(g.W_i, da_i, u);
              add_outer(g.W_f, da_f, u);
              add_outer(g.W_o, da_o, u);
              add_outer(g.W_c, da_c, u);
              add_inplace(g.b_i, da_i);
              add_inplace(g.b_f, da_f);
              add_inplace(g.b_o, da_o);
              add_inplace(g.b_c, da_c);

              Vector du = matvec_transposed(p.W_i, da_i);
              add_inplace(du, matvec_transposed(p.W_f, da_f));
              add_inplace(du, matvec_transposed(p.W_o, da_o));
              add_inplace(du, matvec_transposed(p.W_c, da_c));
              dh = slice(du, 0, hidden);
              dc = hadamard(dc, s.f);
            }
          },
          [&](const std::vector<GruStepCache>& steps) {
            const auto& p = std::get<GruParams>(model.cell);
            auto& g = std::get<GruParams>(grads.cell);
            for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
              const GruStepCache& s = *it;
              const Vector u = concat(s.h_prev, s.x);
              const Vector rh = hadamard(s.r, s.h_prev);

              // h = (1 - z) * h_prev + z * h_tilde
              Vector dh_prev = hadamard(dh, one_minus(s.z));
              const Vector da_z = sigmoid_grad(hadamard(dh, s.h_tilde - s.h_prev), s.z);
              const Vector da = tanh_grad(hadamard(dh, s.z), s.h_tilde);

              add_outer(g.W, da, concat(rh, s.x));
              add_inplace(g.b, da);
              const Vector d_rh = slice(matvec_transposed(p.W, da), 0, hidden);
              add_inplace(dh_prev, hadamard(d_rh, s.r));
              const Vector da_r = sigmoid_grad(hadamard(d_rh, s.h_prev), s.r);

              add_outer(g.W_z, da_z, u);
              add_outer(g.W_r, da_r, u);
              add_inplace(g.b_z, da_z);
              add_inplace(g.b_r, da_r);

              Vector du = matvec_transposed(p.W_z, da_z);
              add_inplace(du, matvec_transposed(p.W_r, da_r));
              add_inplace(dh_prev, slice(du, 0, hidden));
              dh = std::move(dh_prev);
            }
          },
      },
      cache.steps);
  return grads;
}

std::vector<std::string> GradientCheckReport::failed_blocks() const {
  std::vector<std::string> out;
  for (const auto& b : blocks) {
    if (!b.passed) out.push_back(b.name);
  }
  return out;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradientCheckReport check_gradients(const Model& model, const std::vector<Vector>& window,
                                    const Gradients& analytic, double tolerance) {
  GradientCheckReport report;
  report.tolerance = tolerance;
  Model probe = model;
  auto probe_blocks = blocks(probe);
  const auto analytic_blocks = blocks(analytic);
  if (analytic_blocks.size() != probe_blocks.size()) {
    throw std::invalid_argument("check_gradients: gradient layout does not match model");
  }
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    auto values = probe_blocks[b].values;
    const auto expected = analytic_blocks[b].values;
    if (expected.size() != values.size()) {
      throw std::invalid_argument("check_gradients: block " + std::string(probe_blocks[b].name) +
                                  " has mismatched size");
    }
    BlockCheck check{std::string(probe_blocks[b].name)};
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double original = values[k];
      values[k] = original + kFiniteDifferenceStep;
      const double plus = forward_sequence(probe, window).prediction;
      values[k] = original - kFiniteDifferenceStep;
      const double minus = forward_sequence(probe, window).prediction;
      values[k] = original;
      const double numeric = (plus - minus) / (2.0 * kFiniteDifferenceStep);
      const double err = relative_error(expected[k], numeric);
      if (err > check.max_rel_error || !std::isfinite(err)) {
        check.max_rel_error = err;
        check.worst_index = k;
      }
    }
    check.passed = check.max_rel_error <= tolerance;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.passed = report.passed && check.passed;
    report.blocks.push_back(std::move(check));
  }
  return report;
}

GradientCheckReport gradient_check(const Model& model, const std::vector<Vector>& window,
                                   double tolerance) {
  if (model.hidden_size() > 16) {
    throw std::invalid_argument("gradient_check: hidden size " +
                                std::to_string(model.hidden_size()) + " exceeds 16");
  }
  const ForwardResult fwd = forward_sequence(model, window);
  const Gradients analytic = backward_sequence(model, fwd.cache, 1.0);
  return check_gradients(model, window, analytic, tolerance);
}

GradientCheckInstance random_gradcheck_instance(CellKind kind, Rng& rng, std::size_t max_hidden,
                                                std::size_t max_window) {
  const std::size_t hidden = 1 + rng.below(max_hidden);
  const std::size_t steps = 1 + rng.below(max_window);
  const std::size_t input = 1 + rng.below(3);
  GradientCheckInstance inst{init_model(kind, input, hidden, rng), {}};
  for (auto& b : blocks(inst.model)) {
    for (double& v : b.values) v = rng.uniform(-0.5, 0.5);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    Vector x(input);
    for (std::size_t k = 0; k < input; ++k) x[k] = rng.uniform(-1.0, 1.0);
    inst.window.push_back(std::move(x));
  }
  return inst;
}

namespace {
constexpr std::string_view kSnapshotMagic = "rnnopt-params 1";
}

void write_snapshot(const Model& model, std::ostream& out) {
  out << kSnapshotMagic << '\n';
  out << "model " << to_string(model.kind()) << " input " << model.input_size() << " hidden "
      << model.hidden_size() << '\n';
  const auto shapes = block_shapes(model);
  const auto bs = blocks(model);
  for (std::size_t b = 0; b < bs.size(); ++b) {
    out << "block " << bs[b].name << ' ' << shapes[b].first << ' ' << shapes[b].second << '\n';
    for (std::size_t r = 0; r < shapes[b].first; ++r) {
      for (std::size_t c = 0; c < shapes[b].second; ++c) {
        if (c != 0) out << ' ';
        out << format_double(bs[b].values[r * shapes[b].second + c]);
      }
      out << '\n';
    }
  }
}

Model read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSnapshotMagic) {
    throw std::runtime_error("read_snapshot: missing '" + std::string(kSnapshotMagic) + "' header");
  }
  std::string tag, cell, input_tag, hidden_tag;
  std::size_t input = 0, hidden = 0;
  if (!std::getline(in, line)) throw std::runtime_error("read_snapshot: missing model line");
  std::istringstream header(line);
  header >> tag >> cell >> input_tag >> input >> hidden_tag >> hidden;
  if (!header || tag != "model" || input_tag != "input" || hidden_tag != "hidden") {
    throw std::runtime_error("read_snapshot: malformed model line '" + line + "'");
  }
  Model model = Model::zeros(parse_cell_kind(cell), input, hidden);
  const auto shapes = block_shapes(model);
  auto bs = blocks(model);
  for (std::size_t b = 0; b < bs.size(); ++b) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    in >> tag >> name >> rows >> cols;
    if (!in || tag != "block" || name != bs[b].name || rows != shapes[b].first ||
        cols != shapes[b].second) {
      throw std::runtime_error("read_snapshot: expected block " + std::string(bs[b].name) + " " +
                               std::to_string(shapes[b].first) + "x" +
                               std::to_string(shapes[b].second));
    }
    for (double& v : bs[b].values) {
      std::string token;
      in >> token;
      v = parse_double(token);
    }
    if (!in) throw std::runtime_error("read_snapshot: truncated block " + name);
  }
  return model;
}

}  // namespace rnnopt
