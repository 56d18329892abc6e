#include "rnnopt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "rnnopt/format.hpp"
#include "rnnopt/json_io.hpp"

namespace rnnopt {

namespace {

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) throw std::invalid_argument("median of empty set");
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

int cell_rank(CellKind c) {
  return c == CellKind::Lstm ? 0 : 1;
}

int optimizer_rank(OptimizerKind o) {
  switch (o) {
    case OptimizerKind::Adam:
      return 0;
    case OptimizerKind::Nag:
      return 1;
    case OptimizerKind::Momentum:
      return 2;
  }
  return 3;
}

ReportRow row_from_run(const RunOutcome& outcome) {
  const RunResult& run = outcome.run;
  if (run.epochs.empty()) throw std::invalid_argument("build_report: run has no epoch records");
  ReportRow row;
  row.cell = run.config.cell;
  row.optimizer = run.config.optimizer;
  row.seed = run.config.seed;
  row.final_train_loss = run.epochs.back().train_loss;
  row.final_val_loss = run.epochs.back().val_loss;
  row.rmse = outcome.test.rmse_price;
  row.rmse_normalized = outcome.test.rmse_normalized;
  if (run.epochs_to_threshold) row.epochs_to_threshold = static_cast<double>(*run.epochs_to_threshold);
  row.stability_count = static_cast<double>(run.stability.increases);
  row.stability_sum = run.stability.total_increase;
  row.wall_clock_s = run.wall_clock_s;
  row.epochs = run.epochs;
  return row;
}

ReportRow median_row(const std::vector<const ReportRow*>& group) {
  ReportRow out;
  out.cell = group.front()->cell;
  out.optimizer = group.front()->optimizer;
  out.median = true;
  out.config = config_label(out.cell, out.optimizer) + "-median";

  auto field = [&](auto getter) {
    std::vector<double> xs;
    for (const ReportRow* r : group) xs.push_back(getter(*r));
    return median(std::move(xs));
  };
  out.final_train_loss = field([](const ReportRow& r) { return r.final_train_loss; });
  out.final_val_loss = field([](const ReportRow& r) { return r.final_val_loss; });
  out.rmse = field([](const ReportRow& r) { return r.rmse; });
  out.rmse_normalized = field([](const ReportRow& r) { return r.rmse_normalized; });
  out.stability_count = field([](const ReportRow& r) { return r.stability_count; });
  out.stability_sum = field([](const ReportRow& r) { return r.stability_sum; });
  out.wall_clock_s = field([](const ReportRow& r) { return r.wall_clock_s; });
  // Runs that never reached the threshold count as +inf.
  const double ett = field([](const ReportRow& r) {
    return r.epochs_to_threshold.value_or(std::numeric_limits<double>::infinity());
  });
  if (std::isfinite(ett)) out.epochs_to_threshold = ett;

  std::size_t n_epochs = group.front()->epochs.size();
  for (const ReportRow* r : group) n_epochs = std::min(n_epochs, r->epochs.size());
  for (std::size_t e = 0; e < n_epochs; ++e) {
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.train_loss = field([e](const ReportRow& r) { return r.epochs[e].train_loss; });
    rec.val_loss = field([e](const ReportRow& r) { return r.epochs[e].val_loss; });
    rec.seconds = field([e](const ReportRow& r) { return r.epochs[e].seconds; });
    out.epochs.push_back(rec);
  }
  return out;
}

std::string optional_number(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string();
}

nlohmann::json optional_json(const std::optional<double>& x) {
  return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("rmse: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(targets.size()) + " targets");
  }
  if (predictions.empty()) throw std::invalid_argument("rmse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

std::vector<double> predict_series(const Model& model, const ScalerParams& scaler,
                                   const WindowedDataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const Sample& s : data.samples) out.push_back(inverse_transform(scaler, predict(model, s.window)));
  return out;
}

std::vector<double> denormalized_targets(const ScalerParams& scaler, const WindowedDataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const Sample& s : data.samples) out.push_back(inverse_transform(scaler, s.target));
  return out;
}

TestMetrics test_metrics(const Model& model, const ScalerParams& scaler, const WindowedDataset& test) {
  std::vector<double> pred_norm;
  std::vector<double> target_norm;
  pred_norm.reserve(test.size());
  target_norm.reserve(test.size());
  for (const Sample& s : test.samples) {
    pred_norm.push_back(predict(model, s.window));
    target_norm.push_back(s.target);
  }
  TestMetrics m;
  m.samples = test.size();
  m.rmse_normalized = rmse(pred_norm, target_norm);
  m.rmse_price = rmse(inverse_transform(scaler, pred_norm), inverse_transform(scaler, target_norm));
  return m;
}

BenchmarkReport build_report(const std::vector<RunOutcome>& runs, ReportMetadata meta) {
  if (runs.empty()) throw std::invalid_argument("build_report: no completed runs");

  std::vector<ReportRow> rows;
  rows.reserve(runs.size());
  for (const auto& r : runs) rows.push_back(row_from_run(r));
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::make_tuple(cell_rank(a.cell), optimizer_rank(a.optimizer), a.seed.value_or(0)) <
           std::make_tuple(cell_rank(b.cell), optimizer_rank(b.optimizer), b.seed.value_or(0));
  });

  std::map<std::pair<int, int>, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows) groups[{cell_rank(r.cell), optimizer_rank(r.optimizer)}].push_back(&r);
  const bool multi_seed = std::any_of(groups.begin(), groups.end(),
                                      [](const auto& g) { return g.second.size() > 1; });

  BenchmarkReport report;
  report.meta = std::move(meta);
  for (const auto& [key, group] : groups) {
    for (const ReportRow* r : group) {
      ReportRow row = *r;
      row.config = config_label(row.cell, row.optimizer);
      if (multi_seed) row.config += "-seed" + std::to_string(row.seed.value_or(0));
      report.rows.push_back(std::move(row));
    }
    if (multi_seed) report.rows.push_back(median_row(group));
  }
  return report;
}

std::vector<std::optional<double>> log_losses(std::span<const double> losses) {
  std::vector<std::optional<double>> out;
  out.reserve(losses.size());
  for (double l : losses) {
    if (!std::isfinite(l) || l < 0.0) {
      throw std::invalid_argument("log_losses: loss " + format_double(l) + " outside [0, inf)");
    }
    out.push_back(l == 0.0 ? std::nullopt : std::optional<double>(std::log(l)));
  }
  return out;
}

std::vector<std::vector<double>> loss_matrix(const BenchmarkReport& report) {
  std::vector<std::vector<double>> m;
  for (const auto& row : report.rows) {
    std::vector<double> losses;
    for (const auto& e : row.epochs) losses.push_back(e.train_loss);
    m.push_back(std::move(losses));
  }
  return m;
}

std::string report_csv(const BenchmarkReport& report) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : report.rows) {
    out += r.config + "," + std::string(to_string(r.cell)) + "," + std::string(to_string(r.optimizer)) +
           "," + format_double(r.final_train_loss) + "," + format_double(r.final_val_loss) + "," +
           format_double(r.rmse) + "," + optional_number(r.epochs_to_threshold) + "," +
           format_double(r.stability_count) + "," + format_double(r.stability_sum) + "," +
           format_double(r.wall_clock_s) + "\n";
  }
  return out;
}

std::string curves_csv(const BenchmarkReport& report) {
  std::string out = std::string(kCurvesCsvHeader) + "\n";
  for (const auto& r : report.rows) {
    for (const auto& e : r.epochs) {
      out += r.config + "," + std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
             format_double(e.val_loss) + "\n";
    }
  }
  return out;
}

nlohmann::json report_json(const BenchmarkReport& report) {
  using nlohmann::json;
  const ReportMetadata& m = report.meta;
  json meta = {
      {"dataset", m.dataset},
      {"lookback", m.lookback},
      {"hidden", m.hidden},
      {"epochs", m.epochs},
      {"batch_size", m.batch_size},
      {"learning_rate", m.hyper.learning_rate},
      {"momentum", m.hyper.momentum},
      {"beta1", m.hyper.beta1},
      {"beta2", m.hyper.beta2},
      {"epsilon", m.hyper.epsilon},
      {"threshold", m.threshold},
      {"scaler_mode", m.scaler_mode},
      {"scaler", {{"min", m.scaler.min_x}, {"max", m.scaler.max_x}}},
      {"points", {{"train", m.points.train}, {"val", m.points.val}, {"test", m.points.test}}},
      {"windows", {{"train", m.windows.train}, {"val", m.windows.val}, {"test", m.windows.test}}},
      {"seeds", m.seeds},
      {"timing_recorded", m.timing_recorded},
  };

  json rows = json::array();
  for (const auto& r : report.rows) {
    std::vector<double> train_losses, val_losses;
    for (const auto& e : r.epochs) {
      train_losses.push_back(e.train_loss);
      val_losses.push_back(e.val_loss);
    }
    const auto log_train = log_losses(train_losses);
    const auto log_val = log_losses(val_losses);
    json epochs = json::array();
    for (std::size_t i = 0; i < r.epochs.size(); ++i) {
      const auto& e = r.epochs[i];
      epochs.push_back({{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_loss", e.val_loss},
                        {"seconds", e.seconds},
                        {"log_train_loss", optional_json(log_train[i])},
                        {"log_val_loss", optional_json(log_val[i])}});
    }
    rows.push_back({
        {"config", r.config},
        {"display_name", display_name(r.cell, r.optimizer)},
        {"cell", std::string(to_string(r.cell))},
        {"optimizer", std::string(to_string(r.optimizer))},
        {"seed", r.seed ? json(*r.seed) : json(nullptr)},
        {"median", r.median},
        {"final_train_loss", r.final_train_loss},
        {"final_val_loss", r.final_val_loss},
        {"rmse", r.rmse},
        {"rmse_normalized", r.rmse_normalized},
        {"epochs_to_threshold", optional_json(r.epochs_to_threshold)},
        {"stability_count", r.stability_count},
        {"stability_sum", r.stability_sum},
        {"wall_clock_s", r.wall_clock_s},
        {"epochs", std::move(epochs)},
    });
  }
  return {{"meta", std::move(meta)}, {"rows", std::move(rows)}};
}

BenchmarkReport report_from_json(const nlohmann::json& j) {
  BenchmarkReport report;
  try {
    const auto& m = j.at("meta");
    ReportMetadata& meta = report.meta;
    meta.dataset = m.at("dataset").get<std::string>();
    meta.lookback = m.at("lookback").get<std::size_t>();
    meta.hidden = m.at("hidden").get<std::size_t>();
    meta.epochs = m.at("epochs").get<std::size_t>();
    meta.batch_size = m.at("batch_size").get<std::size_t>();
    meta.hyper.learning_rate = m.at("learning_rate").get<double>();
    meta.hyper.momentum = m.at("momentum").get<double>();
    meta.hyper.beta1 = m.at("beta1").get<double>();
    meta.hyper.beta2 = m.at("beta2").get<double>();
    meta.hyper.epsilon = m.at("epsilon").get<double>();
    meta.threshold = m.at("threshold").get<double>();
    meta.scaler_mode = m.at("scaler_mode").get<std::string>();
    meta.scaler = {m.at("scaler").at("min").get<double>(), m.at("scaler").at("max").get<double>()};
    auto sizes = [](const nlohmann::json& s) {
      return SplitSizes{s.at("train").get<std::size_t>(), s.at("val").get<std::size_t>(),
                        s.at("test").get<std::size_t>()};
    };
    meta.points = sizes(m.at("points"));
    meta.windows = sizes(m.at("windows"));
    meta.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    meta.timing_recorded = m.at("timing_recorded").get<bool>();

    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.config = r.at("config").get<std::string>();
      row.cell = parse_cell_kind(r.at("cell").get<std::string>());
      row.optimizer = parse_optimizer_kind(r.at("optimizer").get<std::string>());
      if (!r.at("seed").is_null()) row.seed = r.at("seed").get<std::uint64_t>();
      row.median = r.at("median").get<bool>();
      row.final_train_loss = r.at("final_train_loss").get<double>();
      row.final_val_loss = r.at("final_val_loss").get<double>();
      row.rmse = r.at("rmse").get<double>();
      row.rmse_normalized = r.at("rmse_normalized").get<double>();
      if (!r.at("epochs_to_threshold").is_null()) {
        row.epochs_to_threshold = r.at("epochs_to_threshold").get<double>();
      }
      row.stability_count = r.at("stability_count").get<double>();
      row.stability_sum = r.at("stability_sum").get<double>();
      row.wall_clock_s = r.at("wall_clock_s").get<double>();
      for (const auto& e : r.at("epochs")) {
        row.epochs.push_back({e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(),
                              e.at("val_loss").get<double>(), e.at("seconds").get<double>()});
      }
      report.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed report JSON: ") + e.what());
  }
  return report;
}

std::string display_name(CellKind cell, OptimizerKind optimizer) {
  std::string out = cell == CellKind::Lstm ? "LSTM" : "GRU";
  switch (optimizer) {
    case OptimizerKind::Adam:
      return out + " Adam";
    case OptimizerKind::Nag:
      return out + " NAG";
    case OptimizerKind::Momentum:
      return out + " Momentum";
  }
  return out;
}

std::string format_table(const BenchmarkReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %14s %14s %14s %14s %10s\n", "Architecture and Optimizer",
                "RMSE", "RMSE (norm)", "final train", "final val", "epochs<=thr");
  out << line;
  for (const auto& r : report.rows) {
    std::string name = display_name(r.cell, r.optimizer);
    if (r.median) {
      name += " (median)";
    } else if (r.config != config_label(r.cell, r.optimizer) && r.seed) {
      name += " seed " + std::to_string(*r.seed);
    }
    const std::string ett = r.epochs_to_threshold ? format_double(*r.epochs_to_threshold) : "-";
    std::snprintf(line, sizeof(line), "%-28s %14.4f %14.6f %14.4e %14.4e %10s\n", name.c_str(), r.rmse,
                  r.rmse_normalized, r.final_train_loss, r.final_val_loss, ett.c_str());
    out << line;
  }
  return out.str();
}

ExportFormat parse_export_format(std::string_view name) {
  if (name == "csv") return ExportFormat::Csv;
  if (name == "json") return ExportFormat::Json;
  if (name == "both") return ExportFormat::Both;
  throw std::invalid_argument("unknown format '" + std::string(name) +
                              "' (expected one of: csv, json, both)");
}

std::vector<std::filesystem::path> export_report(const BenchmarkReport& report, ExportFormat format,
                                                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": cannot create directory: " + ec.message());
  std::vector<std::filesystem::path> written;
  if (format == ExportFormat::Csv || format == ExportFormat::Both) {
    write_text_file(dir / "report.csv", report_csv(report));
    write_text_file(dir / "curves.csv", curves_csv(report));
    written.push_back(dir / "report.csv");
    written.push_back(dir / "curves.csv");
  }
  if (format == ExportFormat::Json || format == ExportFormat::Both) {
    write_text_file(dir / "report.json", dump_stable(report_json(report)));
    written.push_back(dir / "report.json");
  }
  return written;
}

}  // namespace rnnopt
