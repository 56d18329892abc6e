#include "rnnopt/cli.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "rnnopt/benchmark.hpp"
#include "rnnopt/cells.hpp"
#include "rnnopt/data.hpp"
#include "rnnopt/eval.hpp"
#include "rnnopt/format.hpp"
#include "rnnopt/json_io.hpp"
#include "rnnopt/train.hpp"

namespace rnnopt {

namespace {

using nlohmann::json;
using Setter = std::function<void(const json&, CliConfig&)>;

std::string want_string(const json& v, std::string_view key) {
  if (!v.is_string()) throw UsageError("config: \"" + std::string(key) + "\" must be a string");
  return v.get<std::string>();
}

std::uint64_t want_count(const json& v, std::string_view key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw UsageError("config: \"" + std::string(key) + "\" must be a non-negative integer");
}

double want_number(const json& v, std::string_view key) {
  if (!v.is_number()) throw UsageError("config: \"" + std::string(key) + "\" must be a number");
  return v.get<double>();
}

bool want_bool(const json& v, std::string_view key) {
  if (!v.is_boolean()) throw UsageError("config: \"" + std::string(key) + "\" must be true or false");
  return v.get<bool>();
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto str = [&t](const char* key, std::string CliConfig::*field) {
      t[key] = [key, field](const json& v, CliConfig& c) { c.*field = want_string(v, key); };
    };
    auto count = [&t](const char* key, std::size_t CliConfig::*field) {
      t[key] = [key, field](const json& v, CliConfig& c) { c.*field = want_count(v, key); };
    };
    auto num = [&t](const char* key, double CliConfig::*field) {
      t[key] = [key, field](const json& v, CliConfig& c) { c.*field = want_number(v, key); };
    };
    auto flag = [&t](const char* key, bool CliConfig::*field) {
      t[key] = [key, field](const json& v, CliConfig& c) { c.*field = want_bool(v, key); };
    };
    str("data", &CliConfig::data);
    str("out", &CliConfig::out);
    str("column", &CliConfig::column);
    str("cell", &CliConfig::cell);
    str("optimizer", &CliConfig::optimizer);
    count("epochs", &CliConfig::epochs);
    count("hidden", &CliConfig::hidden);
    count("lookback", &CliConfig::lookback);
    num("lr", &CliConfig::lr);
    num("momentum", &CliConfig::momentum);
    num("beta1", &CliConfig::beta1);
    num("beta2", &CliConfig::beta2);
    num("epsilon", &CliConfig::epsilon);
    t["seed"] = [](const json& v, CliConfig& c) { c.seed = want_count(v, "seed"); };
    t["seeds"] = [](const json& v, CliConfig& c) {
      if (v.is_array()) {
        std::string joined;
        for (const auto& s : v) {
          if (!joined.empty()) joined += ',';
          joined += std::to_string(want_count(s, "seeds"));
        }
        c.seeds = joined;
      } else {
        c.seeds = want_string(v, "seeds");
      }
    };
    str("split", &CliConfig::split);
    str("scaler-mode", &CliConfig::scaler_mode);
    num("threshold", &CliConfig::threshold);
    num("tolerance", &CliConfig::tolerance);
    flag("instrument", &CliConfig::instrument);
    str("format", &CliConfig::format);
    flag("shuffle", &CliConfig::shuffle);
    num("clip-norm", &CliConfig::clip_norm);
    count("jobs", &CliConfig::jobs);
    flag("no-timing", &CliConfig::no_timing);
    str("in", &CliConfig::in);
    count("instances", &CliConfig::instances);
    return t;
  }();
  return table;
}

std::string short_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

// Everything a subcommand needs, parsed and checked before any work starts.
struct Resolved {
  TrainConfig train;
  PrepareOptions prep;
  std::vector<std::uint64_t> seeds;
  ExportFormat format = ExportFormat::Both;
  std::vector<CellKind> check_cells;
};

template <class F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

Resolved resolve(const CliConfig& c) {
  Resolved r;
  const std::string& sub = c.subcommand;
  const bool needs_data = sub == "prepare" || sub == "train" || sub == "benchmark";
  if (needs_data && c.data.empty()) throw UsageError("--data is required for " + sub);
  if (sub == "report" && c.in.empty()) throw UsageError("--in is required for report");

  if (c.lookback == 0) throw UsageError("--lookback must be at least 1");
  r.prep.lookback = c.lookback;
  r.prep.split = as_usage([&] {
    SplitSpec s = parse_split(c.split);
    validate(s);
    return s;
  });
  r.prep.scaler_mode = as_usage([&] { return parse_scaler_mode(c.scaler_mode); });
  r.format = as_usage([&] { return parse_export_format(c.format); });

  if (sub == "gradcheck") {
    const std::string which = c.cell.empty() ? "both" : c.cell;
    if (which == "both") {
      r.check_cells = {CellKind::Lstm, CellKind::Gru};
    } else {
      r.check_cells = {as_usage([&] { return parse_cell_kind(which); })};
    }
    if (!(c.tolerance > 0.0)) throw UsageError("--tolerance must be positive");
    if (c.instances == 0) throw UsageError("--instances must be at least 1");
  }

  TrainConfig& t = r.train;
  if (sub != "gradcheck") t.cell = as_usage([&] { return parse_cell_kind(c.cell.empty() ? "gru" : c.cell); });
  t.optimizer = as_usage([&] { return parse_optimizer_kind(c.optimizer); });
  t.epochs = c.epochs;
  t.hidden = c.hidden;
  t.hyper = OptimizerHyperparams{c.lr, c.momentum, c.beta1, c.beta2, c.epsilon};
  t.seed = c.seed;
  t.threshold = c.threshold;
  t.shuffle = c.shuffle;
  t.clip_norm = c.clip_norm;
  as_usage([&] {
    validate(t);
    // benchmark runs every optimizer, so all hyperparameters must hold
    for (OptimizerKind k : {OptimizerKind::Adam, OptimizerKind::Nag, OptimizerKind::Momentum}) {
      validate(k, t.hyper);
    }
    return 0;
  });

  r.seeds = c.seeds.empty() ? std::vector<std::uint64_t>{c.seed}
                            : as_usage([&] { return parse_seed_list(c.seeds); });
  if (c.jobs == 0) throw UsageError("--jobs must be at least 1");
  return r;
}

struct LoadedData {
  PreparedData prepared;
  std::string name;
  std::size_t points = 0;
  std::size_t repaired = 0;
  bool from_prepared_file = false;
};

LoadedData load_data(const CliConfig& c, const PrepareOptions& prep) {
  LoadedData d;
  d.name = dataset_name(c.data);
  if (std::filesystem::path(c.data).extension() == ".json") {
    d.prepared = load_prepared(c.data, &d.name);
    d.from_prepared_file = true;
  } else {
    const RawPriceSeries raw = read_csv_file(c.data, c.column);
    d.repaired = raw.missing_count();
    PriceSeries series;
    try {
      series = repair_missing(raw);
    } catch (const DataError& e) {
      throw DataError(c.data + ": " + e.what());
    }
    try {
      d.prepared = prepare(series, prep);
    } catch (const DataError& e) {
      throw DataError(c.data + ": " + e.what());
    }
  }
  const auto& p = d.prepared.partitions;
  d.points = p.train.size() + p.val.size() + p.test.size();
  return d;
}

std::filesystem::path output_dir(const CliConfig& c) {
  std::filesystem::path dir = c.out.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out);
  std::filesystem::create_directories(dir);
  return dir;
}

ProgressFn progress_printer(std::ostream& err) {
  return [&err](const TrainConfig& c, const EpochRecord& r) {
    err << config_label(c.cell, c.optimizer) << "-seed" << c.seed << '\t' << r.epoch << '\t'
        << short_num(r.train_loss) << '\t' << short_num(r.val_loss) << '\t' << short_num(r.seconds)
        << '\n';
  };
}

json optional_json(const std::optional<std::size_t>& v) {
  return v ? json(*v) : json(nullptr);
}

int cmd_prepare(const CliConfig& c, const Resolved& r, std::ostream& out) {
  const LoadedData d = load_data(c, r.prep);
  const PreparedData& p = d.prepared;
  out << "source      " << d.name << (d.from_prepared_file ? " (prepared)" : "") << '\n';
  out << "points      " << d.points;
  if (!d.from_prepared_file) out << " (" << d.repaired << " missing closes interpolated)";
  out << '\n';
  out << "partitions  train " << p.partitions.train.size() << "  val " << p.partitions.val.size()
      << "  test " << p.partitions.test.size() << '\n';
  out << "windows     train " << p.train.size() << "  val " << p.val.size() << "  test "
      << p.test.size() << "  (lookback " << p.lookback << ")\n";
  out << "scaler      " << to_string(p.scaler_mode) << "  min " << format_double(p.scaler.min_x)
      << "  max " << format_double(p.scaler.max_x) << '\n';
  out << "reference   train 1862  val 402  test 401  (published sample counts, full daily history)\n";
  if (!c.out.empty()) {
    const auto path = output_dir(c) / "prepared.json";
    save_prepared(p, path, d.name);
    out << "wrote " << path.string() << '\n';
  }
  return 0;
}

json config_json(const TrainConfig& t, std::size_t lookback) {
  return {{"cell", to_string(t.cell)},
          {"optimizer", to_string(t.optimizer)},
          {"epochs", t.epochs},
          {"hidden", t.hidden},
          {"lookback", lookback},
          {"batch_size", 1},
          {"lr", t.hyper.learning_rate},
          {"momentum", t.hyper.momentum},
          {"beta1", t.hyper.beta1},
          {"beta2", t.hyper.beta2},
          {"epsilon", t.hyper.epsilon},
          {"seed", t.seed},
          {"threshold", t.threshold},
          {"shuffle", t.shuffle},
          {"clip_norm", t.clip_norm}};
}

int cmd_train(const CliConfig& c, const Resolved& r, std::ostream& out, std::ostream& err) {
  const LoadedData d = load_data(c, r.prep);
  const PreparedData& p = d.prepared;
  const auto dir = output_dir(c);

  RunResult run;
  try {
    run = fit(r.train, p.train, p.val, progress_printer(err), !c.no_timing);
  } catch (const std::exception& e) {
    err << "error: training failed: " << e.what() << '\n';
    return 1;
  }
  const TestMetrics test = test_metrics(run.model, p.scaler, p.test);

  json epochs = json::array();
  std::string csv = "epoch,train_loss,val_loss,seconds\n";
  for (const auto& e : run.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"seconds", e.seconds}});
    csv += std::to_string(e.epoch) + ',' + format_double(e.train_loss) + ',' +
           format_double(e.val_loss) + ',' + format_double(e.seconds) + '\n';
  }
  const json doc = {
      {"dataset", d.name},
      {"config", config_json(run.config, p.lookback)},
      {"epochs", epochs},
      {"final_train_loss", run.epochs.back().train_loss},
      {"final_val_loss", run.epochs.back().val_loss},
      {"test", {{"rmse", test.rmse_price}, {"rmse_normalized", test.rmse_normalized}, {"samples", test.samples}}},
      {"epochs_to_threshold", optional_json(run.epochs_to_threshold)},
      {"stability", {{"count", run.stability.increases}, {"sum", run.stability.total_increase}}},
      {"wall_clock_s", run.wall_clock_s},
      {"gradient_evaluations", run.gradient_evaluations},
  };
  write_text_file(dir / "run.json", dump_stable(doc));
  write_text_file(dir / "epochs.csv", csv);
  std::ostringstream params;
  write_snapshot(run.model, params);
  write_text_file(dir / "params.txt", params.str());

  out << display_name(run.config.cell, run.config.optimizer) << "  final train " << short_num(run.epochs.back().train_loss)
      << "  val " << short_num(run.epochs.back().val_loss) << "  test rmse " << short_num(test.rmse_price)
      << " (normalized " << short_num(test.rmse_normalized) << ")\n";
  if (c.instrument) {
    const double per_sample = static_cast<double>(run.gradient_evaluations) /
                              static_cast<double>(p.train.size() * run.config.epochs);
    out << "gradient evaluations  " << run.gradient_evaluations << " total, " << short_num(per_sample)
        << " per sample\n";
  }
  out << "wrote " << (dir / "run.json").string() << ", epochs.csv, params.txt\n";
  return 0;
}

int cmd_benchmark(const CliConfig& c, const Resolved& r, std::ostream& out, std::ostream& err) {
  const LoadedData d = load_data(c, r.prep);
  BenchmarkOptions opts;
  opts.base = r.train;
  opts.seeds = r.seeds;
  opts.jobs = c.jobs;
  opts.record_timing = !c.no_timing;
  const auto dir = output_dir(c);

  const BenchmarkOutcome outcome = run_benchmark(d.prepared, opts, progress_printer(err));
  const BenchmarkReport report = build_report(outcome.runs, make_metadata(d.name, d.prepared, opts));
  const auto written = export_report(report, r.format, dir);

  out << format_table(report);
  for (const auto& path : written) out << "wrote " << path.string() << '\n';
  for (const auto& f : outcome.failures) {
    err << "error: " << f.config << " seed " << f.seed << " failed: " << f.message << '\n';
  }
  if (!outcome.failures.empty()) {
    err << outcome.failures.size() << " of " << outcome.failures.size() + outcome.runs.size()
        << " runs failed\n";
    return 1;
  }
  return 0;
}

int cmd_gradcheck(const CliConfig& c, const Resolved& r, std::ostream& out) {
  bool all_passed = true;
  for (CellKind kind : r.check_cells) {
    Rng rng(c.seed * 2 + (kind == CellKind::Gru ? 1 : 0));
    std::vector<std::string> order;
    std::map<std::string, double> worst;
    std::size_t failures = 0;
    double overall = 0.0;
    for (std::size_t i = 0; i < c.instances; ++i) {
      const auto inst = random_gradcheck_instance(kind, rng);
      const auto report = gradient_check(inst.model, inst.window, c.tolerance);
      for (const auto& b : report.blocks) {
        if (!worst.count(b.name)) order.push_back(b.name);
        worst[b.name] = std::max(worst[b.name], b.max_rel_error);
      }
      overall = std::max(overall, report.max_rel_error);
      if (!report.passed) ++failures;
    }
    const bool passed = failures == 0;
    all_passed = all_passed && passed;
    out << to_string(kind) << "  instances " << c.instances << "  tolerance " << short_num(c.tolerance)
        << "  max rel error " << short_num(overall) << "  " << (passed ? "PASS" : "FAIL");
    if (!passed) out << " (" << failures << " instances over tolerance)";
    out << '\n';
    for (const auto& name : order) {
      char line[96];
      std::snprintf(line, sizeof line, "  %-6s %.3e%s\n", name.c_str(), worst[name],
                    worst[name] <= c.tolerance ? "" : "  over");
      out << line;
    }
  }
  return all_passed ? 0 : 1;
}

int cmd_report(const CliConfig& c, const Resolved& r, std::ostream& out) {
  const BenchmarkReport report = report_from_json(json::parse(read_text_file(c.in)));
  out << format_table(report);
  if (!c.out.empty()) {
    for (const auto& path : export_report(report, r.format, output_dir(c))) {
      out << "wrote " << path.string() << '\n';
    }
  }
  return 0;
}

// Finds --config before CLI11 runs so file values can act as defaults
// that explicit flags then override.
std::optional<std::string> find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--config") {
      if (i + 1 >= argc) throw UsageError("--config needs a path");
      return std::string(argv[i + 1]);
    }
    if (a.starts_with("--config=")) return std::string(a.substr(9));
  }
  return std::nullopt;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_config_json(const json& object, CliConfig& config) {
  if (!object.is_object()) throw UsageError("config: top level must be a JSON object");
  const auto& table = setters();
  for (auto it = object.begin(); it != object.end(); ++it) {
    const auto s = table.find(it.key());
    if (s == table.end()) throw UsageError("config: unknown key \"" + it.key() + "\"");
    s->second(it.value(), config);
  }
}

void apply_config_file(const std::filesystem::path& path, CliConfig& config) {
  json object;
  try {
    object = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": invalid JSON: " + e.what());
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  try {
    apply_config_json(object, config);
  } catch (const UsageError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::set<std::uint64_t> seen;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    std::string_view tok = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size()) {
      throw UsageError("--seeds: \"" + std::string(tok) + "\" is not a non-negative integer");
    }
    if (!seen.insert(v).second) throw UsageError("--seeds: duplicate seed " + std::to_string(v));
    seeds.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return seeds;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  try {
    if (const auto path = find_config_path(argc, argv)) apply_config_file(*path, cfg);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  CLI::App app{"Train and compare LSTM/GRU forecasters under Adam and Nesterov momentum.", "rnnopt"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  app.footer(
      "Updates are per sample (batch size 1); batch size is part of the protocol and has no flag.\n"
      "A --config JSON file takes the long flag names as keys; flags given on the command line win.");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Flat JSON object of flag values");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", cfg.data, "Price CSV (Date + close column) or a prepared .json");
    sub->add_option("--column", cfg.column, "Price column to read");
    sub->add_option("--lookback", cfg.lookback, "Window length");
    sub->add_option("--split", cfg.split, "train,val,test fractions");
    sub->add_option("--scaler-mode", cfg.scaler_mode, "Scaler fit range: train-only | full-series");
  };
  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--epochs", cfg.epochs, "Passes over the training windows");
    sub->add_option("--hidden", cfg.hidden, "Hidden units");
    sub->add_option("--lr", cfg.lr, "Learning rate");
    sub->add_option("--momentum", cfg.momentum, "NAG / momentum coefficient");
    sub->add_option("--beta1", cfg.beta1, "Adam first-moment decay");
    sub->add_option("--beta2", cfg.beta2, "Adam second-moment decay");
    sub->add_option("--epsilon", cfg.epsilon, "Adam denominator offset");
    sub->add_option("--seed", cfg.seed, "Initialization seed");
    sub->add_option("--threshold", cfg.threshold, "Train-loss level for epochs-to-threshold");
    sub->add_flag("--shuffle", cfg.shuffle, "Seeded per-epoch shuffle instead of chronological order");
    sub->add_option("--clip-norm", cfg.clip_norm, "Global gradient-norm clip (0 = off)");
    sub->add_flag("--no-timing", cfg.no_timing, "Record all durations as 0 for byte-identical artifacts");
  };
  auto add_out = [&](CLI::App* sub, const char* what) {
    sub->add_option("--out", cfg.out, what);
  };

  auto* prepare = app.add_subcommand("prepare", "Parse, repair, split, scale and window a price series");
  add_config(prepare);
  add_data(prepare);
  add_out(prepare, "Directory for prepared.json (omit to only print the summary)");

  auto* train = app.add_subcommand("train", "Train one configuration and write run artifacts");
  add_config(train);
  add_data(train);
  add_training(train);
  train->add_option("--cell", cfg.cell, "lstm | gru")->default_str("gru");
  train->add_option("--optimizer", cfg.optimizer, "adam | nag | momentum");
  train->add_flag("--instrument", cfg.instrument, "Print gradient-evaluation counts");
  add_out(train, "Directory for run.json, epochs.csv, params.txt (default .)");

  auto* bench = app.add_subcommand("benchmark", "Run the {LSTM, GRU} x {Adam, NAG} matrix");
  add_config(bench);
  add_data(bench);
  add_training(bench);
  bench->add_option("--seeds", cfg.seeds, "Comma-separated seeds (default: --seed)");
  bench->add_option("--jobs", cfg.jobs, "Worker threads");
  bench->add_option("--format", cfg.format, "csv | json | both");
  add_out(bench, "Directory for report.csv, curves.csv, report.json (default .)");

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  add_config(grad);
  grad->add_option("--cell", cfg.cell, "lstm | gru | both")->default_str("both");
  grad->add_option("--tolerance", cfg.tolerance, "Maximum relative error");
  grad->add_option("--instances", cfg.instances, "Random instances per cell");
  grad->add_option("--seed", cfg.seed, "Sweep seed");

  auto* report = app.add_subcommand("report", "Print and re-export a saved report.json");
  add_config(report);
  report->add_option("--in", cfg.in, "report.json from a benchmark run");
  report->add_option("--format", cfg.format, "csv | json | both");
  add_out(report, "Directory to re-export into (omit to only print)");


  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();

  Resolved resolved;
  try {
    resolved = resolve(cfg);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (cfg.subcommand == "prepare") return cmd_prepare(cfg, resolved, out);
    if (cfg.subcommand == "train") return cmd_train(cfg, resolved, out, err);
    if (cfg.subcommand == "benchmark") return cmd_benchmark(cfg, resolved, out, err);
    if (cfg.subcommand == "gradcheck") return cmd_gradcheck(cfg, resolved, out);
    if (cfg.subcommand == "report") return cmd_report(cfg, resolved, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace rnnopt
