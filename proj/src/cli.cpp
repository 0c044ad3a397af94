#include "xfolio/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "xfolio/decision_log.hpp"
#include "xfolio/report.hpp"
#include "xfolio/text.hpp"

namespace xfolio::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Advisory lock: one command per output_dir at a time.
class OutputLock {
 public:
  explicit OutputLock(const std::string& output_dir) {
    fs::create_directories(output_dir);
    path_ = (fs::path(output_dir) / ".xfolio.lock").string();
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw InputError("output_dir is locked by another run (" + path_ +
                       " exists; remove it if stale)");
    }
  }
  ~OutputLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw InputError("cannot open " + path + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

market::FeatureMatrix load_features(const RunConfig& cfg) {
  const fs::path out(cfg.output_dir);
  const std::string features = (out / "features.csv").string();
  const std::string relatives = (out / "relatives.csv").string();
  if (!fs::exists(features) || !fs::exists(relatives)) {
    throw InputError("features not found under " + cfg.output_dir +
                     "; run `xfolio ingest` first");
  }
  return market::load_features_csv(features, relatives);
}

policy::PolicyNet load_net(const RunConfig& cfg) {
  const std::string path = (fs::path(cfg.output_dir) / "policy.bin").string();
  if (!fs::exists(path)) {
    throw policy::CorruptCheckpoint("checkpoint not found: " + path +
                                    "; run `xfolio train` first");
  }
  return policy::PolicyNet::load(path);
}

std::vector<Date> resolve_instances(const RunConfig& cfg,
                                    const CommandOptions& opts,
                                    const decisions::DecisionLog& log) {
  std::vector<std::string> raw;
  if (!opts.instances.empty()) {
    raw = opts.instances;
  } else if (cfg.explain_all_instances) {
    std::vector<Date> all;
    all.reserve(log.size());
    for (const auto& rec : log.records) all.push_back(rec.date);
    return all;
  } else {
    raw = cfg.explain_instances;
  }
  std::vector<Date> dates;
  dates.reserve(raw.size());
  for (const auto& s : raw) dates.push_back(Date::parse(s));
  return dates;
}

}  // namespace

void cmd_ingest(const RunConfig& cfg) {
  OutputLock lock(cfg.output_dir);

  std::vector<market::AssetSeries> series;
  for (const std::string& ticker : cfg.tickers) {
    const std::string path =
        (fs::path(cfg.data_dir) / (ticker + ".csv")).string();
    if (!fs::exists(path)) {
      throw InputError("missing input file " + path);
    }
    market::CsvParseResult parsed =
        market::parse_ohlcv_csv(read_file(path), ticker);
    std::cout << ticker << ": " << parsed.series.bars.size() << " bars, "
              << parsed.dropped_rows << " rows dropped\n";
    series.push_back(std::move(parsed.series));
  }

  const market::AlignedPanel panel = market::align_panel(series, cfg.fill);
  const fs::path out(cfg.output_dir);
  market::save_panel_cache(panel, (out / "panel.bin").string());

  const market::FeatureMatrix fm = market::build_features(panel);
  market::write_features_csv(fm, (out / "features.csv").string(),
                             (out / "relatives.csv").string());
  std::cout << "panel: " << panel.n_dates() << " dates x "
            << panel.n_assets() << " assets\n";
  std::cout << "features: " << fm.n_rows() << " rows x " << fm.dim()
            << " columns\n";
}

void cmd_train(const RunConfig& cfg) {
  OutputLock lock(cfg.output_dir);

  const market::FeatureMatrix fm = load_features(cfg);
  auto [train_fm, trade_fm] =
      market::split_by_date(fm, cfg.train_range, cfg.trade_range);
  (void)trade_fm;

  policy::NetConfig nc;
  nc.input_dim = train_fm.dim();
  nc.hidden = cfg.hidden;
  nc.n_outputs = train_fm.n_assets() + 1;
  nc.seed = derive_seed(cfg.seed, "net.init");
  policy::PolicyNet net(nc);

  ppo::PPOConfig pc = cfg.ppo;
  pc.seed = derive_seed(cfg.seed, "ppo");

  envsim::PortfolioEnv env(train_fm, cfg.env);
  auto [trained, history] = ppo::train(env, std::move(net), pc);

  const fs::path out(cfg.output_dir);
  trained.save((out / "policy.bin").string());

  std::string log_text;
  for (const ppo::TrainStats& s : history) {
    json obj;
    obj["update"] = s.update;
    obj["mean_reward"] = s.mean_reward;
    obj["surrogate_loss"] = s.surrogate_loss;
    obj["value_loss"] = s.value_loss;
    obj["clip_fraction"] = s.clip_fraction;
    obj["approx_kl"] = s.approx_kl;
    log_text += obj.dump();
    log_text += '\n';
  }
  write_file((out / "train_log.jsonl").string(), log_text);

  std::cout << "trained " << history.size() << " updates over "
            << train_fm.n_rows() << " rows";
  if (!history.empty()) {
    std::cout << "; mean reward " << fmt_double(history.front().mean_reward)
              << " -> " << fmt_double(history.back().mean_reward);
  }
  std::cout << '\n';
}

void cmd_trade(const RunConfig& cfg) {
  OutputLock lock(cfg.output_dir);

  const market::FeatureMatrix fm = load_features(cfg);
  auto [train_fm, trade_fm] =
      market::split_by_date(fm, cfg.train_range, cfg.trade_range);
  const policy::PolicyNet net = load_net(cfg);

  std::optional<envsim::Action> forced;
  if (cfg.force_cash) {
    forced = envsim::all_cash_action(trade_fm.n_assets() + 1);
  }

  envsim::PortfolioEnv env(trade_fm, cfg.env);
  auto [log, summary] = decisions::run_trading(env, net, forced);

  const fs::path out(cfg.output_dir);
  decisions::export_jsonl(log, (out / "decisions.jsonl").string(),
                          (out / "meta.json").string());

  json s;
  s["final_value"] = summary.final_value;
  s["cumulative_log_return"] = summary.total_log_return;
  s["max_drawdown"] = summary.max_drawdown;
  s["rewards"] = summary.rewards;
  json dates = json::array();
  for (const Date& d : summary.dates) dates.push_back(d.to_string());
  s["dates"] = dates;
  write_file((out / "summary.json").string(), s.dump(2) + "\n");

  if (cfg.log_training) {
    envsim::PortfolioEnv train_env(train_fm, cfg.env);
    auto [train_log, train_summary] =
        decisions::run_trading(train_env, net, forced);
    (void)train_summary;
    decisions::export_jsonl(train_log,
                            (out / "decisions_train.jsonl").string(),
                            (out / "meta_train.json").string());
  }

  std::cout << "trade: " << log.size() << " decisions, final value "
            << fmt_double(summary.final_value) << ", max drawdown "
            << fmt_double(summary.max_drawdown) << '\n';
}

void cmd_explain(const RunConfig& cfg, const CommandOptions& opts) {
  OutputLock lock(cfg.output_dir);

  const market::FeatureMatrix fm = load_features(cfg);
  auto [train_fm, trade_fm] =
      market::split_by_date(fm, cfg.train_range, cfg.trade_range);
  (void)trade_fm;
  const policy::PolicyNet net = load_net(cfg);

  const fs::path out(cfg.output_dir);
  const std::string log_path = (out / "decisions.jsonl").string();
  if (!fs::exists(log_path)) {
    throw InputError("decision log not found: " + log_path +
                     "; run `xfolio trade` first");
  }
  const decisions::DecisionLog log = decisions::import_jsonl(
      log_path, (out / "meta.json").string());

  explain::ExplainConfig ec;
  if (opts.output) {
    ec.outputs = {*opts.output};
  } else {
    ec.outputs = cfg.explain_outputs;
  }
  for (const Date& d : resolve_instances(cfg, opts, log)) {
    ec.instances.push_back(d);
  }
  ec.background = explain::sample_background(
      train_fm, cfg.background_size, derive_seed(cfg.seed, "background"));
  ec.stats = explain::compute_feature_stats(train_fm);
  ec.shap_samples =
      cfg.shap_all ? explain::kAllCoalitions : cfg.shap_samples;
  ec.lime = cfg.lime;
  ec.importance_repeats = cfg.importance_repeats;
  ec.seed = derive_seed(cfg.seed, "explain");

  const explain::ExplanationBundle bundle = explain::explain_log(log, net, ec);
  const std::string bundle_dir = (out / "explain").string();
  explain::write_bundle(bundle, bundle_dir);

  std::size_t shap_count = 0;
  if (opts.force_plot) {
    for (const auto& oe : bundle.outputs) {
      for (const auto& ie : oe.instances) {
        const report::ForcePlotData data = report::make_force_plot(
            ie.shap, bundle.feature_names, opts.feature);
        json obj;
        obj["base"] = data.base_value;
        obj["fx"] = data.fx;
        obj["feature_filter"] = data.feature_filter;
        json pos = json::array(), neg = json::array();
        for (const auto& [name, phi] : data.positive) {
          pos.push_back({{"feature", name}, {"phi", phi}});
        }
        for (const auto& [name, phi] : data.negative) {
          neg.push_back({{"feature", name}, {"phi", phi}});
        }
        obj["positive"] = pos;
        obj["negative"] = neg;
        std::string name = "forceplot_" + std::to_string(oe.output) + "_" +
                           ie.date.to_string();
        if (!opts.feature.empty()) name += "_" + opts.feature;
        write_file((fs::path(bundle_dir) / (name + ".json")).string(),
                   obj.dump(2) + "\n");
      }
    }
  }
  for (const auto& oe : bundle.outputs) shap_count += oe.instances.size();
  std::cout << "explain: " << bundle.outputs.size() << " outputs, "
            << shap_count << " instance explanations -> " << bundle_dir
            << '\n';
}

namespace {

std::vector<std::pair<std::string, double>> read_importance_csv(
    const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::pair<std::string, double>> rows;
  bool header = true;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw InputError(path + ": bad row");
    rows.emplace_back(std::string(fields[0]), parse_double(fields[1]));
  }
  return rows;
}

}  // namespace

void cmd_report(const RunConfig& cfg) {
  OutputLock lock(cfg.output_dir);

  const fs::path bundle_dir = fs::path(cfg.output_dir) / "explain";
  if (!fs::exists(bundle_dir / "provenance.json")) {
    throw report::MissingBundle("no explanation bundle under " +
                                bundle_dir.string() +
                                "; run `xfolio explain` first");
  }
  const json prov = json::parse(read_file((bundle_dir /
                                           "provenance.json").string()));
  const auto feature_names =
      prov.at("feature_names").get<std::vector<std::string>>();

  const fs::path report_dir = fs::path(cfg.output_dir) / "report";
  fs::create_directories(report_dir);

  std::vector<std::string> entries;
  for (const auto& e : fs::directory_iterator(bundle_dir)) {
    entries.push_back(e.path().filename().string());
  }
  std::sort(entries.begin(), entries.end());

  std::size_t importance_svgs = 0, force_svgs = 0, lime_svgs = 0;
  for (const std::string& name : entries) {
    const std::string path = (bundle_dir / name).string();
    if (name.starts_with("importance_") && name.ends_with(".csv")) {
      auto rows = read_importance_csv(path);
      if (name.find("_by_") == std::string::npos) {
        std::sort(rows.begin(), rows.end(),
                  [](const auto& a, const auto& b) {
                    if (a.second != b.second) return a.second > b.second;
                    return a.first < b.first;
                  });
      }
      const std::string stem = name.substr(0, name.size() - 4);
      write_file((report_dir / (stem + ".svg")).string(),
                 report::render_bar_chart_svg(stem, rows));
      ++importance_svgs;
    } else if (name.starts_with("shap_") && name.ends_with(".json")) {
      const json obj = json::parse(read_file(path));
      explain::ShapValues sv;
      sv.base_value = obj.at("base").get<double>();
      sv.fx = obj.at("fx").get<double>();
      sv.method = obj.value("method", "kernel");
      const json& phi = obj.at("phi");
      sv.phi.reserve(feature_names.size());
      for (const std::string& fn : feature_names) {
        sv.phi.push_back(phi.at(fn).get<double>());
      }
      const report::ForcePlotData data =
          report::make_force_plot(sv, feature_names);
      const std::string stem = "force" + name.substr(4, name.size() - 9);
      write_file((report_dir / (stem + ".svg")).string(),
                 report::render_force_plot_svg(stem, data));
      ++force_svgs;
    } else if (name.starts_with("forceplot_") && name.ends_with(".json")) {
      const json obj = json::parse(read_file(path));
      report::ForcePlotData data;
      data.base_value = obj.at("base").get<double>();
      data.fx = obj.at("fx").get<double>();
      data.feature_filter = obj.value("feature_filter", "");
      for (const auto& item : obj.at("positive")) {
        data.positive.emplace_back(item.at("feature").get<std::string>(),
                                   item.at("phi").get<double>());
      }
      for (const auto& item : obj.at("negative")) {
        data.negative.emplace_back(item.at("feature").get<std::string>(),
                                   item.at("phi").get<double>());
      }
      const std::string stem = name.substr(0, name.size() - 5);
      write_file((report_dir / (stem + ".svg")).string(),
                 report::render_force_plot_svg(stem, data));
      ++force_svgs;
    } else if (name.starts_with("lime_") && name.ends_with(".json")) {
      const json obj = json::parse(read_file(path));
      std::vector<std::pair<std::string, double>> items;
      for (const auto& item : obj.at("top_k")) {
        items.emplace_back(item.at("feature").get<std::string>(),
                           item.at("weight").get<double>());
      }
      const std::string stem = name.substr(0, name.size() - 5);
      write_file((report_dir / (stem + ".svg")).string(),
                 report::render_signed_bar_svg(stem, items));
      ++lime_svgs;
    }
  }
  if (force_svgs == 0) {
    std::cout << "notice: no force-plot inputs in bundle; skipped\n";
  }
  std::cout << "report: " << importance_svgs << " importance charts, "
            << force_svgs << " force plots, " << lime_svgs
            << " surrogate charts -> " << report_dir.string() << '\n';
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"portfolio policy training, trading and explanation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  CommandOptions opts;
  std::vector<std::string> instance_args;
  long long output_index = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")
        ->required();
    sub->add_option("--set", overrides,
                    "override a config value (key.path=value)");
  };
  CLI::App* ingest = app.add_subcommand("ingest", "parse and align raw CSVs");
  CLI::App* train = app.add_subcommand("train", "train the policy");
  CLI::App* trade =
      app.add_subcommand("trade", "replay the policy over the trade split");
  CLI::App* explain_cmd =
      app.add_subcommand("explain", "explain logged decisions");
  CLI::App* report_cmd =
      app.add_subcommand("report", "render charts from the bundle");
  for (CLI::App* sub : {ingest, train, trade, explain_cmd, report_cmd}) {
    add_common(sub);
  }
  explain_cmd->add_option("--instances", instance_args,
                          "comma-separated decision dates");
  explain_cmd->add_option("--output", output_index,
                          "restrict to one output head");
  explain_cmd->add_option("--feature", opts.feature,
                          "single-feature force plot");
  explain_cmd->add_flag("--force-plot", opts.force_plot,
                        "emit force-plot data");

  std::vector<const char*> argv;
  argv.push_back("xfolio");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  for (const std::string& chunk : instance_args) {
    for (std::string_view d : split(chunk, ',')) {
      if (!d.empty()) opts.instances.emplace_back(d);
    }
  }
  if (output_index >= 0) {
    opts.output = static_cast<std::size_t>(output_index);
  }

  try {
    const RunConfig cfg = load_config(config_path, overrides);
    if (app.got_subcommand(ingest)) {
      cmd_ingest(cfg);
    } else if (app.got_subcommand(train)) {
      cmd_train(cfg);
    } else if (app.got_subcommand(trade)) {
      cmd_trade(cfg);
    } else if (app.got_subcommand(explain_cmd)) {
      cmd_explain(cfg, opts);
    } else if (app.got_subcommand(report_cmd)) {
      cmd_report(cfg);
    }
    return kOk;
  } catch (const ppo::NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kTrainError;
  } catch (const policy::CorruptCheckpoint& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckpointError;
  } catch (const explain::LogModelMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConsistencyError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const report::MissingBundle& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const decisions::SchemaViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::runtime_error& e) {
    // Remaining domain errors (market data, explainers) are input-shaped.
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace xfolio::cli
