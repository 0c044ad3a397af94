#pragma once

// Shared helpers for the test suites: temp dirs, synthetic market data.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xfolio/date.hpp"
#include "xfolio/market_data.hpp"
#include "xfolio/rng.hpp"
#include "xfolio/text.hpp"

namespace xfolio::test {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / (tag + "_" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("TempDir: could not create under " +
                             base.string());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

// Weekday sequence starting at `start` (skips Saturdays/Sundays).
inline std::vector<Date> trading_days(Date start, std::size_t count) {
  std::vector<Date> days;
  std::int64_t serial = start.serial();
  while (days.size() < count) {
    // 1970-01-01 was a Thursday; Saturday = (serial + 4) % 7 == 6.
    const int dow = static_cast<int>(((serial + 4) % 7 + 7) % 7);
    if (dow != 6 && dow != 0) days.push_back(Date::from_serial(serial));
    ++serial;
  }
  return days;
}

// Geometric random walk series in vendor CSV schema.
inline std::string gbm_csv(const std::string& ticker, Date start,
                           std::size_t n_days, double drift, double vol,
                           std::uint64_t seed) {
  Rng rng(seed ^ std::hash<std::string>{}(ticker));
  const auto days = trading_days(start, n_days);
  std::string csv = "Date,Open,High,Low,Close,Adj Close,Volume\n";
  double close = 50.0 + 100.0 * rng.uniform();
  for (const Date& d : days) {
    const double prev = close;
    close = prev * std::exp(drift + vol * rng.normal());
    const double open = prev * std::exp(0.3 * vol * rng.normal());
    const double high = std::max(open, close) * (1.0 + 0.2 * vol *
                                                 rng.uniform());
    const double low = std::min(open, close) * (1.0 - 0.2 * vol *
                                                rng.uniform());
    const double volume = 1e6 * (0.5 + rng.uniform());
    csv += d.to_string() + "," + std::to_string(open) + "," +
           std::to_string(high) + "," + std::to_string(low) + "," +
           std::to_string(close) + "," + std::to_string(close) + "," +
           std::to_string(volume) + "\n";
  }
  return csv;
}

// Two-asset feature matrix with constant per-step growth factors; features
// are flat so the optimal stationary policy is all-in on the better asset.
inline market::FeatureMatrix drift_market(std::size_t n_rows, double up,
                                          double down) {
  market::FeatureMatrix fm;
  fm.tickers = {"UPA", "DNB"};
  for (const auto& t : fm.tickers) {
    for (int i = 0; i < market::kIndicators; ++i) {
      fm.feature_names.push_back(market::feature_name(t, i));
    }
  }
  const auto days = trading_days(Date(2020, 1, 1), n_rows);
  fm.dates = days;
  fm.rows.assign(n_rows * fm.feature_names.size(), 1.0);
  fm.price_relatives.resize(n_rows * 2);
  for (std::size_t r = 0; r < n_rows; ++r) {
    fm.price_relatives[r * 2 + 0] = up;
    fm.price_relatives[r * 2 + 1] = down;
  }
  return fm;
}

// Market whose reward is driven by one asset's close path: SIG's close
// relative alternates by a hidden sign that the previous day's open/close
// ratio telegraphs; FLT stays flat. After the feature build, exactly one
// column (SIG_open_L1) varies.
struct SignalMarket {
  std::string sig_csv;
  std::string flt_csv;
  std::vector<int> signs;  // s_t per day
};

inline SignalMarket signal_market(std::size_t n_days, std::uint64_t seed,
                                  double move = 0.01, double telegraph = 0.04) {
  Rng rng(seed);
  SignalMarket mkt;
  mkt.signs.resize(n_days + 3, 1);
  for (auto& s : mkt.signs) s = rng.uniform() < 0.5 ? -1 : 1;

  const auto days = trading_days(Date(2019, 1, 1), n_days);
  std::string sig = "Date,Open,High,Low,Close,Adj Close,Volume\n";
  double close = 100.0;
  for (std::size_t t = 0; t < n_days; ++t) {
    if (t > 0) close *= 1.0 + move * mkt.signs[t];
    // Open encodes the sign that will move the close two days out.
    const double open = close * (1.0 + telegraph * mkt.signs[t + 2]);
    const double high = close * 1.05;
    const double low = close * 0.94;
    sig += days[t].to_string() + "," + fmt_double(open) + "," +
           fmt_double(high) + "," + fmt_double(low) + "," +
           fmt_double(close) + "," + fmt_double(close) + ",1000\n";
  }
  std::string flt = "Date,Open,High,Low,Close,Adj Close,Volume\n";
  for (std::size_t t = 0; t < n_days; ++t) {
    flt += days[t].to_string() + ",50,50,50,50,50,1000\n";
  }
  mkt.sig_csv = std::move(sig);
  mkt.flt_csv = std::move(flt);
  return mkt;
}

}  // namespace xfolio::test
