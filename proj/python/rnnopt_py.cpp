#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rnnopt/cells.hpp"
#include "rnnopt/data.hpp"
#include "rnnopt/eval.hpp"
#include "rnnopt/train.hpp"

namespace py = pybind11;
using namespace rnnopt;

namespace {

PreparedData load(const std::string& path, std::size_t lookback, const std::string& split,
                  const std::string& scaler_mode) {
  PrepareOptions opt;
  opt.lookback = lookback;
  opt.split = parse_split(split);
  opt.scaler_mode = parse_scaler_mode(scaler_mode);
  return prepare(repair_missing(read_csv_file(path)), opt);
}

py::dict gradcheck(const std::string& cell, std::uint64_t seed, std::size_t instances, double tolerance) {
  const CellKind kind = parse_cell_kind(cell);
  Rng rng(seed);
  double worst = 0.0;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = random_gradcheck_instance(kind, rng);
    const auto report = gradient_check(inst.model, inst.window, tolerance);
    worst = std::max(worst, report.max_rel_error);
    if (!report.passed) ++failed;
  }
  py::dict out;
  out["cell"] = cell;
  out["instances"] = instances;
  out["max_rel_error"] = worst;
  out["failed"] = failed;
  out["passed"] = failed == 0;
  return out;
}

py::dict prepare_summary(const std::string& path, std::size_t lookback, const std::string& split,
                         const std::string& scaler_mode) {
  const PreparedData d = load(path, lookback, split, scaler_mode);
  py::dict out;
  out["points"] = std::vector<std::size_t>{d.partitions.train.size(), d.partitions.val.size(),
                                           d.partitions.test.size()};
  out["windows"] = std::vector<std::size_t>{d.train.size(), d.val.size(), d.test.size()};
  out["scaler"] = std::make_pair(d.scaler.min_x, d.scaler.max_x);
  return out;
}

py::dict train(const std::string& path, const std::string& cell, const std::string& optimizer, std::size_t epochs,
               std::size_t hidden, std::size_t lookback, double lr, std::uint64_t seed) {
  const PreparedData d = load(path, lookback, "0.7,0.15,0.15", "train-only");
  TrainConfig c;
  c.cell = parse_cell_kind(cell);
  c.optimizer = parse_optimizer_kind(optimizer);
  c.epochs = epochs;
  c.hidden = hidden;
  c.hyper.learning_rate = lr;
  c.seed = seed;
  RunResult run;
  {
    py::gil_scoped_release release;
    run = fit(c, d.train, d.val, {}, false);
  }
  std::vector<double> train_loss, val_loss;
  for (const auto& e : run.epochs) {
    train_loss.push_back(e.train_loss);
    val_loss.push_back(e.val_loss);
  }
  const TestMetrics test = test_metrics(run.model, d.scaler, d.test);
  py::dict out;
  out["train_loss"] = train_loss;
  out["val_loss"] = val_loss;
  out["rmse"] = test.rmse_price;
  out["rmse_normalized"] = test.rmse_normalized;
  out["gradient_evaluations"] = run.gradient_evaluations;
  return out;
}

}  // namespace

PYBIND11_MODULE(_rnnopt, m) {
  m.doc() = "LSTM/GRU forecasters trained with Adam or Nesterov momentum";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  m.def("rmse", [](const std::vector<double>& p, const std::vector<double>& t) { return rmse(p, t); },
        py::arg("predictions"), py::arg("targets"));
  m.def(
      "scale",
      [](const std::vector<double>& xs, double lo, double hi) { return transform(ScalerParams{lo, hi}, xs); },
      py::arg("values"), py::arg("min"), py::arg("max"));
  m.def(
      "unscale",
      [](const std::vector<double>& xs, double lo, double hi) {
        return inverse_transform(ScalerParams{lo, hi}, xs);
      },
      py::arg("values"), py::arg("min"), py::arg("max"));
  m.def("synthetic_series", [](std::size_t n, std::uint64_t seed) { return make_sine_trend_series(n, seed).close; },
        py::arg("points") = 500, py::arg("seed") = 7);
  m.def("gradcheck", &gradcheck, py::arg("cell"), py::arg("seed") = 1, py::arg("instances") = 50,
        py::arg("tolerance") = 1e-5);
  m.def("prepare", &prepare_summary, py::arg("path"), py::arg("lookback") = 60,
        py::arg("split") = "0.7,0.15,0.15", py::arg("scaler_mode") = "train-only");
  m.def("train", &train, py::arg("path"), py::arg("cell") = "gru", py::arg("optimizer") = "adam",
        py::arg("epochs") = 10, py::arg("hidden") = 50, py::arg("lookback") = 60, py::arg("lr") = 0.001,
        py::arg("seed") = 1);
}
