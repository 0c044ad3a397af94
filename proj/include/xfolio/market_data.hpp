#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xfolio/date.hpp"

namespace xfolio::market {

struct MalformedHeader : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnparsableRow : std::runtime_error {
  std::size_t line;
  UnparsableRow(std::size_t line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};
struct EmptySeries : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoCommonDates : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientHistory : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptySplit : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OverlappingRanges : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptPanelCache : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Daily bar. Prices strictly positive, low <= min(open, close),
// high >= max(open, close), volume >= 0.
struct Bar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  bool valid() const;
  bool operator==(const Bar&) const = default;
};

struct AssetSeries {
  std::string ticker;
  std::vector<Bar> bars;  // strictly ascending dates
};

struct CsvParseResult {
  AssetSeries series;
  std::size_t dropped_rows = 0;  // empty/null price fields, bad bars, dupes
};

enum class FillPolicy { intersect_dates, forward_fill };

// Price indicators in fixed column order.
inline constexpr int kIndicators = 4;
inline constexpr const char* kIndicatorNames[kIndicators] = {"open", "high",
                                                             "low", "close"};
enum Indicator { kOpen = 0, kHigh = 1, kLow = 2, kClose = 3 };

// Calendar-aligned OHLC panel: every (date, asset) cell populated.
struct AlignedPanel {
  std::vector<std::string> tickers;
  std::vector<Date> dates;
  std::vector<double> values;   // T x N x 4, indicator-minor
  std::vector<double> volumes;  // T x N

  std::size_t n_dates() const { return dates.size(); }
  std::size_t n_assets() const { return tickers.size(); }
  double value(std::size_t t, std::size_t n, int indicator) const {
    return values[(t * n_assets() + n) * kIndicators + indicator];
  }
  double& value(std::size_t t, std::size_t n, int indicator) {
    return values[(t * n_assets() + n) * kIndicators + indicator];
  }
  double volume(std::size_t t, std::size_t n) const {
    return volumes[t * n_assets() + n];
  }
};

// Lagged, scale-normalized model inputs. Row r describes the decision date
// dates[r] using only the previous day's prices: each indicator of each
// asset is divided by that asset's previous close. price_relatives[r][n] is
// the close-to-close growth realized AT dates[r] relative to the prior date.
struct FeatureMatrix {
  std::vector<std::string> feature_names;  // D = 4 * N labels
  std::vector<std::string> tickers;
  std::vector<Date> dates;               // T' decision dates
  std::vector<double> rows;              // T' x D
  std::vector<double> price_relatives;   // T' x N

  std::size_t n_rows() const { return dates.size(); }
  std::size_t dim() const { return feature_names.size(); }
  std::size_t n_assets() const { return tickers.size(); }
  std::span<const double> row(std::size_t r) const {
    return {rows.data() + r * dim(), dim()};
  }
  double relative(std::size_t r, std::size_t n) const {
    return price_relatives[r * n_assets() + n];
  }
};

// Parses a vendor export with header
//   Date,Open,High,Low,Close,Adj Close,Volume
// Rows whose price fields are empty or "null" are dropped and counted, as
// are rows violating the Bar invariants and duplicate dates (first wins).
// A non-empty field that fails to parse raises UnparsableRow. Bars come
// back date-ascending. Adj Close is validated but not retained.
CsvParseResult parse_ohlcv_csv(std::string_view text, std::string_view ticker);

// Inverse of parse_ohlcv_csv for valid series (Adj Close column mirrors
// close). parse(write(s)) reproduces s.bars exactly.
std::string write_ohlcv_csv(const AssetSeries& series);

// intersect_dates keeps dates common to all series; forward_fill uses the
// union of dates at or after every asset's first bar, carrying the latest
// bar forward.
AlignedPanel align_panel(std::span<const AssetSeries> series,
                         FillPolicy fill);

// Panel with T dates yields T-1 feature rows (the first date has no lag).
FeatureMatrix build_features(const AlignedPanel& panel);

// Row membership by decision date, ranges inclusive. Train must end before
// trade begins.
std::pair<FeatureMatrix, FeatureMatrix> split_by_date(
    const FeatureMatrix& features, const DateRange& train,
    const DateRange& trade);

// Binary panel cache: 16-byte magic "XFOLIOPANEL" + NULs, u32 T, u32 N,
// N x 8-byte NUL-padded tickers, then little-endian f64 payload
// (date serials, values, volumes).
void save_panel_cache(const AlignedPanel& panel, const std::string& path);
AlignedPanel load_panel_cache(const std::string& path);

// CSV projections of a FeatureMatrix (features + per-asset relatives).
void write_features_csv(const FeatureMatrix& fm,
                        const std::string& features_path,
                        const std::string& relatives_path);
FeatureMatrix load_features_csv(const std::string& features_path,
                                const std::string& relatives_path);

std::string feature_name(std::string_view ticker, int indicator);

}  // namespace xfolio::market
