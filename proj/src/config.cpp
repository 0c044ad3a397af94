#include "xfolio/config.hpp"

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "xfolio/text.hpp"

namespace xfolio::cli {
namespace {

using nlohmann::json;

void apply_override(json& root, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must be key.path=value, got '" + kv + "'");
  }
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings (dates, names) need no quoting
  }

  json* node = &root;
  const auto keys = split(path, '.');
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    node = &((*node)[std::string(keys[i])]);
    if (!node->is_object() && !node->is_null()) {
      throw ConfigError("override path '" + path + "' crosses a non-object");
    }
  }
  (*node)[std::string(keys.back())] = value;
}

DateRange parse_range(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("begin") || !j.contains("end")) {
    throw ConfigError(name + " must be {\"begin\": date, \"end\": date}");
  }
  DateRange r;
  r.begin = Date::parse(j.at("begin").get<std::string>());
  r.end = Date::parse(j.at("end").get<std::string>());
  if (!r.valid()) throw ConfigError(name + ": begin after end");
  return r;
}

}  // namespace

RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }

  if (const char* env_seed = std::getenv("XFOLIO_SEED")) {
    try {
      j["seed"] = std::stoull(env_seed);
    } catch (const std::exception&) {
      throw ConfigError("XFOLIO_SEED must be an unsigned integer");
    }
  }
  for (const std::string& kv : overrides) apply_override(j, kv);

  RunConfig cfg;
  try {
    cfg.data_dir = j.at("data_dir").get<std::string>();
    cfg.tickers = j.at("tickers").get<std::vector<std::string>>();
    cfg.train_range = parse_range(j.at("train_range"), "train_range");
    cfg.trade_range = parse_range(j.at("trade_range"), "trade_range");
    cfg.output_dir = j.at("output_dir").get<std::string>();

    if (j.contains("fill_policy")) {
      const auto fp = j["fill_policy"].get<std::string>();
      if (fp == "forward_fill") {
        cfg.fill = market::FillPolicy::forward_fill;
      } else if (fp == "intersect_dates") {
        cfg.fill = market::FillPolicy::intersect_dates;
      } else {
        throw ConfigError("fill_policy must be forward_fill or "
                          "intersect_dates");
      }
    }
    if (j.contains("env")) {
      const json& e = j["env"];
      cfg.env.cost_rate = e.value("cost_rate", cfg.env.cost_rate);
      cfg.env.cash_rate = e.value("cash_rate", cfg.env.cash_rate);
    }
    if (j.contains("net") && j["net"].contains("hidden")) {
      cfg.hidden = j["net"]["hidden"].get<std::vector<std::size_t>>();
    }
    if (j.contains("ppo")) {
      const json& p = j["ppo"];
      cfg.ppo.gamma = p.value("gamma", cfg.ppo.gamma);
      cfg.ppo.gae_lambda = p.value("gae_lambda", cfg.ppo.gae_lambda);
      cfg.ppo.clip_epsilon = p.value("clip_epsilon", cfg.ppo.clip_epsilon);
      cfg.ppo.epochs_per_update =
          p.value("epochs_per_update", cfg.ppo.epochs_per_update);
      cfg.ppo.minibatch_size =
          p.value("minibatch_size", cfg.ppo.minibatch_size);
      cfg.ppo.learning_rate = p.value("learning_rate", cfg.ppo.learning_rate);
      cfg.ppo.value_coef = p.value("value_coef", cfg.ppo.value_coef);
      cfg.ppo.entropy_coef = p.value("entropy_coef", cfg.ppo.entropy_coef);
      cfg.ppo.n_updates = p.value("n_updates", cfg.ppo.n_updates);
    }
    if (j.contains("explain")) {
      const json& e = j["explain"];
      if (e.contains("outputs")) {
        cfg.explain_outputs = e["outputs"].get<std::vector<std::size_t>>();
      }
      if (e.contains("instances")) {
        if (e["instances"].is_string()) {
          if (e["instances"].get<std::string>() != "all") {
            throw ConfigError("explain.instances must be \"all\" or a date "
                              "array");
          }
          cfg.explain_all_instances = true;
        } else {
          cfg.explain_instances =
              e["instances"].get<std::vector<std::string>>();
        }
      }
      cfg.background_size = e.value("background_size", cfg.background_size);
      if (e.contains("shap_samples")) {
        if (e["shap_samples"].is_string()) {
          if (e["shap_samples"].get<std::string>() != "all") {
            throw ConfigError("explain.shap_samples must be an integer or "
                              "\"all\"");
          }
          cfg.shap_all = true;
        } else {
          cfg.shap_samples = e["shap_samples"].get<std::size_t>();
        }
      }
      if (e.contains("lime")) {
        const json& l = e["lime"];
        cfg.lime.n_samples = l.value("n_samples", cfg.lime.n_samples);
        cfg.lime.kernel_width = l.value("kernel_width", cfg.lime.kernel_width);
        cfg.lime.top_k = l.value("top_k", cfg.lime.top_k);
        cfg.lime.ridge = l.value("ridge", cfg.lime.ridge);
        if (l.contains("sampler")) {
          const auto s = l["sampler"].get<std::string>();
          if (s == "gaussian") {
            cfg.lime.sampler = explain::LimeSampler::gaussian;
          } else if (s == "uniform") {
            cfg.lime.sampler = explain::LimeSampler::uniform;
          } else {
            throw ConfigError("explain.lime.sampler must be gaussian or "
                              "uniform");
          }
        }
      }
      cfg.importance_repeats =
          e.value("importance_repeats", cfg.importance_repeats);
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("trade")) {
      cfg.log_training = j["trade"].value("log_training", false);
      cfg.force_cash = j["trade"].value("force_cash", false);
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }

  if (cfg.tickers.empty()) throw ConfigError("tickers must be non-empty");
  for (std::size_t i = 0; i < cfg.tickers.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.tickers.size(); ++j) {
      if (cfg.tickers[i] == cfg.tickers[j]) {
        throw ConfigError("duplicate ticker " + cfg.tickers[i]);
      }
    }
  }
  if (!(cfg.train_range.end < cfg.trade_range.begin)) {
    throw ConfigError("train_range must end before trade_range begins");
  }
  cfg.ppo.seed = cfg.seed;
  return cfg;
}

}  // namespace xfolio::cli
