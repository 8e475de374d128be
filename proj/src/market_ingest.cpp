#include "eigenfolio/market_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "eigenfolio/error.hpp"
#include "eigenfolio/io.hpp"

namespace eigenfolio {

using nlohmann::json;

bool Candle::valid() const noexcept {
  return close > 0.0 && volume >= 0.0 && low <= std::min(open, close) &&
         high >= std::max(open, close);
}

PriceMatrix PriceMatrix::create(std::vector<std::string> symbols, std::vector<Timestamp> timestamps,
                                Eigen::MatrixXd prices) {
  if (static_cast<std::size_t>(prices.rows()) != symbols.size() ||
      static_cast<std::size_t>(prices.cols()) != timestamps.size()) {
    throw Error(ErrorKind::validation, "price grid shape does not match symbols x timestamps");
  }
  std::set<std::string> seen;
  for (const auto& s : symbols) {
    if (s.empty()) throw Error(ErrorKind::validation, "empty asset symbol");
    if (!seen.insert(s).second) throw Error(ErrorKind::validation, "duplicate asset symbol " + s);
  }
  for (std::size_t n = 1; n < timestamps.size(); ++n) {
    if (timestamps[n] <= timestamps[n - 1]) {
      throw Error(ErrorKind::validation,
                  "timestamps not strictly increasing at column " + std::to_string(n));
    }
  }
  for (Eigen::Index m = 0; m < prices.rows(); ++m) {
    for (Eigen::Index n = 0; n < prices.cols(); ++n) {
      const double p = prices(m, n);
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw Error(ErrorKind::validation, "non-positive price for " + symbols[m] + " at column " +
                                               std::to_string(n));
      }
    }
  }
  PriceMatrix out;
  out.symbols_ = std::move(symbols);
  out.timestamps_ = std::move(timestamps);
  out.prices_ = std::move(prices);
  return out;
}

// --- CSV -------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

bool parse_int64(std::string_view s, std::int64_t& out) {
  const auto t = trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc{} && ptr == t.data() + t.size() && !t.empty();
}

bool parse_double(std::string_view s, double& out) {
  auto t = trim(s);
  if (!t.empty() && t.front() == '+') t.erase(0, 1);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc{} && ptr == t.data() + t.size() && !t.empty();
}

}  // namespace

PriceMatrix parse_price_csv(const std::string& text) {
  const auto records = split_csv(text);
  if (records.empty()) throw Error(ErrorKind::parse, "empty price file");
  const auto& header = records.front().fields;
  if (header.size() < 2 || trim(header[0]) != "timestamp") {
    throw Error(ErrorKind::parse, "header must be `timestamp,SYM1,...`");
  }
  std::vector<std::string> symbols;
  for (std::size_t k = 1; k < header.size(); ++k) symbols.push_back(trim(header[k]));

  const std::size_t rows = records.size() - 1;
  std::vector<Timestamp> timestamps(rows);
  Eigen::MatrixXd prices(static_cast<Eigen::Index>(symbols.size()), static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& rec = records[r + 1];
    const std::string where = "line " + std::to_string(rec.line);
    if (rec.fields.size() != header.size()) {
      throw Error(ErrorKind::validation, where + ": expected " + std::to_string(header.size()) +
                                             " fields, found " + std::to_string(rec.fields.size()));
    }
    if (!parse_int64(rec.fields[0], timestamps[r])) {
      throw Error(ErrorKind::parse, where + ": timestamp is not an integer");
    }
    if (r > 0 && timestamps[r] <= timestamps[r - 1]) {
      throw Error(ErrorKind::validation, where + ": non-monotone timestamp " + rec.fields[0]);
    }
    for (std::size_t k = 0; k < symbols.size(); ++k) {
      double p = 0.0;
      if (!parse_double(rec.fields[k + 1], p)) {
        throw Error(ErrorKind::parse, where + ": price for " + symbols[k] + " is not numeric");
      }
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw Error(ErrorKind::validation, where + ": non-positive price for " + symbols[k]);
      }
      prices(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)) = p;
    }
  }
  return PriceMatrix::create(std::move(symbols), std::move(timestamps), std::move(prices));
}

PriceMatrix load_csv(const std::filesystem::path& path) {
  return parse_price_csv(read_text_file(path));
}

std::string format_price_csv(const PriceMatrix& pm) {
  std::string out = "timestamp";
  for (const auto& s : pm.symbols()) out += "," + csv_quote(s);
  out += "\n";
  for (std::size_t n = 0; n < pm.points(); ++n) {
    out += std::to_string(pm.timestamps()[n]);
    for (std::size_t m = 0; m < pm.assets(); ++m) {
      out += ",";
      out += format_double(pm.prices()(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)));
    }
    out += "\n";
  }
  return out;
}

void write_csv(const PriceMatrix& prices, const std::filesystem::path& path) {
  write_file_atomic(path, format_price_csv(prices));
}

// --- alignment -------------------------------------------------------------

AlignedPrices align_series(const std::vector<TickerSeries>& series, std::size_t min_length) {
  std::vector<const TickerSeries*> kept;
  std::vector<std::string> dropped;
  for (const auto& s : series) {
    for (std::size_t k = 1; k < s.candles.size(); ++k) {
      if (s.candles[k].timestamp <= s.candles[k - 1].timestamp) {
        throw Error(ErrorKind::validation, s.symbol + ": candles not in ascending timestamp order");
      }
    }
    if (s.candles.size() >= min_length && !s.candles.empty()) {
      kept.push_back(&s);
    } else {
      dropped.push_back(s.symbol);
    }
  }
  if (kept.empty()) {
    throw Error(ErrorKind::insufficient_data,
                "no series has at least " + std::to_string(min_length) + " candles");
  }

  std::vector<Timestamp> common;
  for (const auto& c : kept.front()->candles) common.push_back(c.timestamp);
  for (std::size_t k = 1; k < kept.size(); ++k) {
    std::vector<Timestamp> other;
    for (const auto& c : kept[k]->candles) other.push_back(c.timestamp);
    std::vector<Timestamp> next;
    std::set_intersection(common.begin(), common.end(), other.begin(), other.end(),
                          std::back_inserter(next));
    common = std::move(next);
  }
  if (common.empty()) throw Error(ErrorKind::no_common_range, "retained series share no timestamps");

  std::vector<std::string> symbols;
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(common.size()));
  for (std::size_t m = 0; m < kept.size(); ++m) {
    symbols.push_back(kept[m]->symbol);
    const auto& candles = kept[m]->candles;
    std::size_t j = 0;
    for (std::size_t n = 0; n < common.size(); ++n) {
      while (candles[j].timestamp < common[n]) ++j;
      grid(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = candles[j].close;
    }
  }
  return {PriceMatrix::create(std::move(symbols), std::move(common), std::move(grid)),
          std::move(dropped)};
}

// --- time ------------------------------------------------------------------

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

Timestamp parse_iso8601(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &s, &consumed) != 6) {
    throw Error(ErrorKind::parse, "not an ISO-8601 timestamp: " + text);
  }
  std::string_view rest(text.c_str() + consumed);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  }
  if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
    throw Error(ErrorKind::parse, "timestamp is not UTC: " + text);
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw Error(ErrorKind::parse, "invalid date: " + text);
  const auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
  return tp.time_since_epoch().count();
}

// --- remote candles --------------------------------------------------------

Period parse_period(const std::string& text) {
  struct Entry {
    const char* cli;
    const char* code;
    std::int64_t seconds;
  };
  static constexpr Entry table[] = {
      {"1m", "M1", 60},      {"3m", "M3", 180},      {"5m", "M5", 300},
      {"15m", "M15", 900},   {"30m", "M30", 1800},   {"1h", "H1", 3600},
      {"4h", "H4", 14400},   {"1d", "D1", 86400},    {"1w", "D7", 604800},
      {"1M", "1M", 2592000},
  };
  for (const auto& e : table) {
    if (text == e.cli || text == e.code) return {e.code, e.seconds};
  }
  throw Error(ErrorKind::argument, "unsupported period: " + text);
}

std::string default_endpoint() {
  if (const char* env = std::getenv(kEndpointEnvVar); env && *env) return env;
  return kDefaultEndpoint;
}

namespace {

double number_field(const json& obj, const std::string& name, std::size_t index) {
  const std::string where = "candle[" + std::to_string(index) + "]." + name;
  auto it = obj.find(name);
  if (it == obj.end()) throw Error(ErrorKind::parse, where + ": missing");
  double v = 0.0;
  if (it->is_number()) {
    v = it->get<double>();
  } else if (!it->is_string() || !parse_double(it->get_ref<const std::string&>(), v)) {
    throw Error(ErrorKind::parse, where + ": expected a number");
  }
  if (!std::isfinite(v)) throw Error(ErrorKind::parse, where + ": not finite");
  return v;
}

Timestamp timestamp_field(const json& obj, const std::string& name, std::size_t index) {
  const std::string where = "candle[" + std::to_string(index) + "]." + name;
  auto it = obj.find(name);
  if (it == obj.end()) throw Error(ErrorKind::parse, where + ": missing");
  std::int64_t raw = 0;
  if (it->is_number_integer()) {
    raw = it->get<std::int64_t>();
  } else if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    if (!parse_int64(s, raw)) {
      try {
        return parse_iso8601(s);
      } catch (const Error&) {
        throw Error(ErrorKind::parse, where + ": unrecognised timestamp '" + s + "'");
      }
    }
  } else {
    throw Error(ErrorKind::parse, where + ": expected epoch seconds or ISO-8601 string");
  }
  return raw > 100'000'000'000LL ? raw / 1000 : raw;  // milliseconds
}

[[noreturn]] void throw_http_error(const std::string& symbol, const HttpResponse& response) {
  std::string message;
  int code = 0;
  try {
    const auto body = json::parse(response.body);
    if (body.contains("error")) {
      const auto& e = body["error"];
      if (e.is_object()) {
        code = e.value("code", 0);
        message = e.value("message", std::string{});
      } else if (e.is_string()) {
        message = e.get<std::string>();
      }
    }
  } catch (const json::exception&) {
  }
  std::string lowered = message;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (response.status == 404 || code == 2001 || lowered.find("symbol") != std::string::npos) {
    throw Error(ErrorKind::symbol_not_found, "symbol not found: " + symbol);
  }
  throw Error(ErrorKind::transport, "HTTP " + std::to_string(response.status) + " for " + symbol +
                                        (message.empty() ? "" : ": " + message));
}

}  // namespace

std::vector<Candle> parse_candles(const std::string& body, const CandleFieldMap& fields) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("candle payload is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::parse, "candle payload: expected a JSON array");
  std::vector<Candle> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    if (!obj.is_object()) {
      throw Error(ErrorKind::parse, "candle[" + std::to_string(i) + "]: expected an object");
    }
    Candle c;
    c.timestamp = timestamp_field(obj, fields.timestamp, i);
    c.open = number_field(obj, fields.open, i);
    c.close = number_field(obj, fields.close, i);
    c.low = number_field(obj, fields.low, i);
    c.high = number_field(obj, fields.high, i);
    c.volume = number_field(obj, fields.volume, i);
    if (!c.valid()) {
      throw Error(ErrorKind::parse, "candle[" + std::to_string(i) + "]: inconsistent OHLCV values");
    }
    out.push_back(c);
  }
  return out;
}

std::vector<Candle> fetch_candles(HttpTransport& transport, const std::string& symbol,
                                  const Period& period, std::size_t limit, const FetchConfig& config) {
  if (limit < 1) throw Error(ErrorKind::argument, "limit must be at least 1");
  if (config.page_size < 2) throw Error(ErrorKind::argument, "page size must be at least 2");

  std::string path = config.path_template;
  if (auto pos = path.find("{symbol}"); pos != std::string::npos) path.replace(pos, 8, symbol);

  std::vector<Candle> collected;
  std::unordered_set<Timestamp> seen;
  std::optional<Timestamp> cursor;
  bool first = true;

  while (collected.size() < limit) {
    // With a cursor the boundary candle comes back again, so ask for one extra.
    const std::size_t want = std::min(config.page_size, limit - collected.size() + (cursor ? 1 : 0));
    QueryParams query{{"period", period.code}, {"sort", "DESC"}, {"limit", std::to_string(want)}};
    if (cursor) query.emplace("till", format_iso8601(*cursor));

    if (!first && config.delay.count() > 0) std::this_thread::sleep_for(config.delay);
    first = false;

    const HttpResponse response = transport.get(path, query);
    if (response.status != 200) throw_http_error(symbol, response);
    const auto page = parse_candles(response.body, config.fields);

    std::size_t added = 0;
    for (const auto& c : page) {
      if (cursor && c.timestamp >= *cursor) continue;
      if (seen.insert(c.timestamp).second) {
        collected.push_back(c);
        ++added;
      }
    }
    if (added == 0) break;
    cursor = std::min_element(collected.begin(), collected.end(), [](const Candle& a, const Candle& b) {
               return a.timestamp < b.timestamp;
             })->timestamp;
    if (page.size() < want) break;  // history exhausted
  }

  std::sort(collected.begin(), collected.end(),
            [](const Candle& a, const Candle& b) { return a.timestamp < b.timestamp; });
  if (collected.size() > limit) {
    collected.erase(collected.begin(), collected.end() - static_cast<std::ptrdiff_t>(limit));
  }
  return collected;
}

std::vector<TickerSeries> fetch_all(HttpTransport& transport, const std::vector<std::string>& symbols,
                                    const Period& period, std::size_t limit, const FetchConfig& config) {
  std::vector<TickerSeries> out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back({s, fetch_candles(transport, s, period, limit, config)});
  return out;
}

}  // namespace eigenfolio
