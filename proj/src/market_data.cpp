#include "xfolio/market_data.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xfolio/text.hpp"

static_assert(std::endian::native == std::endian::little,
              "panel cache assumes a little-endian host");

namespace xfolio::market {
namespace {

constexpr std::string_view kCsvHeader =
    "Date,Open,High,Low,Close,Adj Close,Volume";
constexpr char kPanelMagic[16] = {'X', 'F', 'O', 'L', 'I', 'O', 'P', 'A',
                                  'N', 'E', 'L', 0,   0,   0,   0,   0};

bool is_null_field(std::string_view f) {
  if (f.empty()) return true;
  if (f.size() != 4) return false;
  return (f[0] == 'n' || f[0] == 'N') && (f[1] == 'u' || f[1] == 'U') &&
         (f[2] == 'l' || f[2] == 'L') && (f[3] == 'l' || f[3] == 'L');
}

}  // namespace

bool Bar::valid() const {
  return open > 0.0 && high > 0.0 && low > 0.0 && close > 0.0 &&
         volume >= 0.0 && low <= std::min(open, close) &&
         high >= std::max(open, close);
}

std::string feature_name(std::string_view ticker, int indicator) {
  std::string name(ticker);
  name += '_';
  name += kIndicatorNames[indicator];
  name += "_L1";
  return name;
}

CsvParseResult parse_ohlcv_csv(std::string_view text,
                               std::string_view ticker) {
  CsvParseResult result;
  result.series.ticker = std::string(ticker);

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos)
                                ? text.substr(pos)
                                : text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;

    if (!saw_header) {
      if (line != kCsvHeader) {
        throw MalformedHeader("expected '" + std::string(kCsvHeader) +
                              "', got '" + std::string(line) + "'");
      }
      saw_header = true;
      continue;
    }

    const auto fields = split(line, ',');
    if (fields.size() != 7) {
      throw UnparsableRow(line_no, "expected 7 fields, got " +
                                       std::to_string(fields.size()));
    }

    // Any empty/null price field disqualifies the row without error.
    bool has_hole = false;
    for (int i = 1; i <= 5; ++i) {
      if (is_null_field(trim(fields[i]))) has_hole = true;
    }
    if (has_hole) {
      ++result.dropped_rows;
      continue;
    }

    Bar bar;
    try {
      bar.date = Date::parse(trim(fields[0]));
      bar.open = parse_double(trim(fields[1]));
      bar.high = parse_double(trim(fields[2]));
      bar.low = parse_double(trim(fields[3]));
      bar.close = parse_double(trim(fields[4]));
      parse_double(trim(fields[5]));  // Adj Close: validated, not retained
      const auto vol = trim(fields[6]);
      bar.volume = is_null_field(vol) ? 0.0 : parse_double(vol);
    } catch (const std::invalid_argument& e) {
      throw UnparsableRow(line_no, e.what());
    }
    if (!bar.valid()) {
      ++result.dropped_rows;
      continue;
    }
    result.series.bars.push_back(bar);
  }

  if (!saw_header) throw MalformedHeader("empty input");

  auto& bars = result.series.bars;
  std::stable_sort(bars.begin(), bars.end(),
                   [](const Bar& a, const Bar& b) { return a.date < b.date; });
  // Duplicate dates: keep the first occurrence.
  std::size_t w = 0;
  for (std::size_t r = 0; r < bars.size(); ++r) {
    if (w > 0 && bars[r].date == bars[w - 1].date) {
      ++result.dropped_rows;
      continue;
    }
    bars[w++] = bars[r];
  }
  bars.resize(w);

  if (bars.empty()) {
    throw EmptySeries("no valid rows for " + std::string(ticker));
  }
  return result;
}

std::string write_ohlcv_csv(const AssetSeries& series) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const Bar& b : series.bars) {
    out += b.date.to_string();
    out += ',';
    out += fmt_double(b.open);
    out += ',';
    out += fmt_double(b.high);
    out += ',';
    out += fmt_double(b.low);
    out += ',';
    out += fmt_double(b.close);
    out += ',';
    out += fmt_double(b.close);  // Adj Close mirror
    out += ',';
    out += fmt_double(b.volume);
    out += '\n';
  }
  return out;
}

AlignedPanel align_panel(std::span<const AssetSeries> series,
                         FillPolicy fill) {
  if (series.empty()) {
    throw std::invalid_argument("align_panel: at least one series required");
  }
  for (const auto& s : series) {
    if (s.bars.empty()) throw EmptySeries("align_panel: " + s.ticker);
  }

  std::vector<Date> axis;
  if (fill == FillPolicy::intersect_dates) {
    std::set<std::int64_t> common;
    for (const Bar& b : series[0].bars) common.insert(b.date.serial());
    for (std::size_t i = 1; i < series.size(); ++i) {
      std::set<std::int64_t> keep;
      for (const Bar& b : series[i].bars) {
        if (common.count(b.date.serial())) keep.insert(b.date.serial());
      }
      common.swap(keep);
    }
    for (auto s : common) axis.push_back(Date::from_serial(s));
  } else {
    std::int64_t first_common = series[0].bars.front().date.serial();
    std::set<std::int64_t> uni;
    for (const auto& s : series) {
      first_common = std::max(first_common, s.bars.front().date.serial());
      for (const Bar& b : s.bars) uni.insert(b.date.serial());
    }
    for (auto s : uni) {
      if (s >= first_common) axis.push_back(Date::from_serial(s));
    }
  }
  if (axis.empty()) throw NoCommonDates("align_panel: empty date axis");

  AlignedPanel panel;
  panel.dates = axis;
  for (const auto& s : series) panel.tickers.push_back(s.ticker);
  const std::size_t T = axis.size();
  const std::size_t N = series.size();
  panel.values.assign(T * N * kIndicators, 0.0);
  panel.volumes.assign(T * N, 0.0);

  for (std::size_t n = 0; n < N; ++n) {
    const auto& bars = series[n].bars;
    std::size_t cursor = 0;
    const Bar* last = nullptr;
    for (std::size_t t = 0; t < T; ++t) {
      while (cursor < bars.size() && bars[cursor].date <= axis[t]) {
        last = &bars[cursor];
        ++cursor;
      }
      // Axis construction guarantees a bar at or before every axis date.
      if (!last || (fill == FillPolicy::intersect_dates &&
                    last->date != axis[t])) {
        throw NoCommonDates("align_panel: internal axis inconsistency");
      }
      panel.value(t, n, kOpen) = last->open;
      panel.value(t, n, kHigh) = last->high;
      panel.value(t, n, kLow) = last->low;
      panel.value(t, n, kClose) = last->close;
      panel.volumes[t * N + n] = last->volume;
    }
  }
  return panel;
}

FeatureMatrix build_features(const AlignedPanel& panel) {
  const std::size_t T = panel.n_dates();
  const std::size_t N = panel.n_assets();
  if (T < 2) {
    throw InsufficientHistory("build_features: need at least 2 dates, got " +
                              std::to_string(T));
  }

  FeatureMatrix fm;
  fm.tickers = panel.tickers;
  for (std::size_t n = 0; n < N; ++n) {
    for (int i = 0; i < kIndicators; ++i) {
      fm.feature_names.push_back(feature_name(panel.tickers[n], i));
    }
  }
  const std::size_t D = fm.feature_names.size();
  fm.dates.reserve(T - 1);
  fm.rows.assign((T - 1) * D, 0.0);
  fm.price_relatives.assign((T - 1) * N, 0.0);

  for (std::size_t t = 1; t < T; ++t) {
    const std::size_t r = t - 1;
    fm.dates.push_back(panel.dates[t]);
    for (std::size_t n = 0; n < N; ++n) {
      const double prev_close = panel.value(t - 1, n, kClose);
      for (int i = 0; i < kIndicators; ++i) {
        fm.rows[r * D + n * kIndicators + i] =
            panel.value(t - 1, n, i) / prev_close;
      }
      fm.price_relatives[r * N + n] = panel.value(t, n, kClose) / prev_close;
    }
  }
  return fm;
}

std::pair<FeatureMatrix, FeatureMatrix> split_by_date(
    const FeatureMatrix& features, const DateRange& train,
    const DateRange& trade) {
  if (!train.valid() || !trade.valid()) {
    throw std::invalid_argument("split_by_date: invalid range");
  }
  if (!(train.end < trade.begin)) {
    throw OverlappingRanges("split_by_date: train must end before trade "
                            "begins (" +
                            train.end.to_string() + " vs " +
                            trade.begin.to_string() + ")");
  }

  auto take = [&](const DateRange& range) {
    FeatureMatrix out;
    out.feature_names = features.feature_names;
    out.tickers = features.tickers;
    const std::size_t D = features.dim();
    const std::size_t N = features.n_assets();
    for (std::size_t r = 0; r < features.n_rows(); ++r) {
      if (!range.contains(features.dates[r])) continue;
      out.dates.push_back(features.dates[r]);
      const auto row = features.row(r);
      out.rows.insert(out.rows.end(), row.begin(), row.end());
      out.price_relatives.insert(
          out.price_relatives.end(),
          features.price_relatives.begin() + r * N,
          features.price_relatives.begin() + (r + 1) * N);
    }
    (void)D;
    return out;
  };

  FeatureMatrix train_fm = take(train);
  FeatureMatrix trade_fm = take(trade);
  if (train_fm.n_rows() == 0) {
    throw EmptySplit("split_by_date: train range captures no rows");
  }
  if (trade_fm.n_rows() == 0) {
    throw EmptySplit("split_by_date: trade range captures no rows");
  }
  return {std::move(train_fm), std::move(trade_fm)};
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_f64(std::string& out, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

}  // namespace

void save_panel_cache(const AlignedPanel& panel, const std::string& path) {
  std::string out(kPanelMagic, sizeof(kPanelMagic));
  put_u32(out, static_cast<std::uint32_t>(panel.n_dates()));
  put_u32(out, static_cast<std::uint32_t>(panel.n_assets()));
  for (const auto& t : panel.tickers) {
    if (t.size() > 8) {
      throw std::invalid_argument("save_panel_cache: ticker too long: " + t);
    }
    char buf[8] = {0};
    std::memcpy(buf, t.data(), t.size());
    out.append(buf, 8);
  }
  for (const Date& d : panel.dates) {
    put_f64(out, static_cast<double>(d.serial()));
  }
  for (double v : panel.values) put_f64(out, v);
  for (double v : panel.volumes) put_f64(out, v);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_panel_cache: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

AlignedPanel load_panel_cache(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorruptPanelCache("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());

  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (data.size() - off < n) {
      throw CorruptPanelCache(path + ": truncated at byte " +
                              std::to_string(off));
    }
  };
  need(sizeof(kPanelMagic));
  if (std::memcmp(data.data(), kPanelMagic, sizeof(kPanelMagic)) != 0) {
    throw CorruptPanelCache(path + ": bad magic");
  }
  off = sizeof(kPanelMagic);

  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, data.data() + off, 4);
    off += 4;
    return v;
  };
  auto get_f64 = [&]() {
    need(8);
    double v;
    std::memcpy(&v, data.data() + off, 8);
    off += 8;
    return v;
  };

  AlignedPanel panel;
  const std::uint32_t T = get_u32();
  const std::uint32_t N = get_u32();
  if (T == 0 || N == 0) throw CorruptPanelCache(path + ": zero dimension");
  for (std::uint32_t n = 0; n < N; ++n) {
    need(8);
    const char* p = data.data() + off;
    std::size_t len = 0;
    while (len < 8 && p[len] != 0) ++len;
    panel.tickers.emplace_back(p, len);
    off += 8;
  }
  panel.dates.reserve(T);
  for (std::uint32_t t = 0; t < T; ++t) {
    panel.dates.push_back(
        Date::from_serial(static_cast<std::int64_t>(get_f64())));
  }
  panel.values.resize(std::size_t{T} * N * kIndicators);
  for (auto& v : panel.values) v = get_f64();
  panel.volumes.resize(std::size_t{T} * N);
  for (auto& v : panel.volumes) v = get_f64();
  if (off != data.size()) {
    throw CorruptPanelCache(path + ": trailing bytes");
  }
  return panel;
}

void write_features_csv(const FeatureMatrix& fm,
                        const std::string& features_path,
                        const std::string& relatives_path) {
  {
    std::ofstream f(features_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + features_path);
    f << "date";
    for (const auto& name : fm.feature_names) f << ',' << name;
    f << '\n';
    for (std::size_t r = 0; r < fm.n_rows(); ++r) {
      f << fm.dates[r].to_string();
      for (double v : fm.row(r)) f << ',' << fmt_double(v);
      f << '\n';
    }
  }
  {
    std::ofstream f(relatives_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + relatives_path);
    f << "date";
    for (const auto& t : fm.tickers) f << ',' << t;
    f << '\n';
    const std::size_t N = fm.n_assets();
    for (std::size_t r = 0; r < fm.n_rows(); ++r) {
      f << fm.dates[r].to_string();
      for (std::size_t n = 0; n < N; ++n) {
        f << ',' << fmt_double(fm.relative(r, n));
      }
      f << '\n';
    }
  }
}

FeatureMatrix load_features_csv(const std::string& features_path,
                                const std::string& relatives_path) {
  auto read_all = [](const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  };

  FeatureMatrix fm;
  {
    const std::string text = read_all(features_path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error(features_path + ": empty");
    }
    auto hdr = split(trim(line), ',');
    if (hdr.size() < 2 || hdr[0] != "date") {
      throw std::runtime_error(features_path + ": bad header");
    }
    for (std::size_t i = 1; i < hdr.size(); ++i) {
      fm.feature_names.emplace_back(hdr[i]);
    }
    const std::size_t D = fm.feature_names.size();
    while (std::getline(in, line)) {
      auto t = trim(line);
      if (t.empty()) continue;
      auto fields = split(t, ',');
      if (fields.size() != D + 1) {
        throw std::runtime_error(features_path + ": bad row width");
      }
      fm.dates.push_back(Date::parse(fields[0]));
      for (std::size_t i = 1; i < fields.size(); ++i) {
        fm.rows.push_back(parse_double(fields[i]));
      }
    }
  }
  {
    const std::string text = read_all(relatives_path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error(relatives_path + ": empty");
    }
    auto hdr = split(trim(line), ',');
    if (hdr.size() < 2 || hdr[0] != "date") {
      throw std::runtime_error(relatives_path + ": bad header");
    }
    for (std::size_t i = 1; i < hdr.size(); ++i) {
      fm.tickers.emplace_back(hdr[i]);
    }
    const std::size_t N = fm.tickers.size();
    std::size_t r = 0;
    while (std::getline(in, line)) {
      auto t = trim(line);
      if (t.empty()) continue;
      auto fields = split(t, ',');
      if (fields.size() != N + 1) {
        throw std::runtime_error(relatives_path + ": bad row width");
      }
      if (r >= fm.dates.size() || Date::parse(fields[0]) != fm.dates[r]) {
        throw std::runtime_error(relatives_path + ": date mismatch with " +
                                 features_path);
      }
      for (std::size_t n = 1; n < fields.size(); ++n) {
        fm.price_relatives.push_back(parse_double(fields[n]));
      }
      ++r;
    }
    if (r != fm.dates.size()) {
      throw std::runtime_error(relatives_path + ": row count mismatch");
    }
  }
  if (fm.feature_names.size() != fm.tickers.size() * kIndicators) {
    throw std::runtime_error(features_path +
                             ": feature count does not match tickers");
  }
  return fm;
}

}  // namespace xfolio::market
