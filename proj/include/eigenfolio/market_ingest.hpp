#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eigenfolio/http.hpp"

namespace eigenfolio {

using Timestamp = std::int64_t;  // UTC epoch seconds

struct Candle {
  Timestamp timestamp = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  /// low <= min(open, close), high >= max(open, close), close > 0, volume >= 0.
  bool valid() const noexcept;
};

/// Aligned closing prices: one row per asset, one column per timestamp.
/// Immutable once constructed; the factory enforces strictly increasing
/// timestamps, matching shapes and strictly positive prices.
class PriceMatrix {
 public:
  static PriceMatrix create(std::vector<std::string> symbols, std::vector<Timestamp> timestamps,
                            Eigen::MatrixXd prices);

  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::vector<Timestamp>& timestamps() const noexcept { return timestamps_; }
  const Eigen::MatrixXd& prices() const noexcept { return prices_; }

  std::size_t assets() const noexcept { return symbols_.size(); }
  std::size_t points() const noexcept { return timestamps_.size(); }

 private:
  PriceMatrix() = default;
  std::vector<std::string> symbols_;
  std::vector<Timestamp> timestamps_;
  Eigen::MatrixXd prices_;
};

// --- CSV -------------------------------------------------------------------

/// Reads `timestamp,SYM1,SYM2,...` with RFC-4180 quoting. Validation errors
/// cite the 1-based line number of the offending row.
PriceMatrix load_csv(const std::filesystem::path& path);
PriceMatrix parse_price_csv(const std::string& text);

/// Shortest round-trip formatting: load_csv(write) reproduces every value bit for bit.
std::string format_price_csv(const PriceMatrix& prices);
void write_csv(const PriceMatrix& prices, const std::filesystem::path& path);

// --- alignment -------------------------------------------------------------

struct TickerSeries {
  std::string symbol;
  std::vector<Candle> candles;  // ascending timestamps
};

struct AlignedPrices {
  PriceMatrix prices;
  std::vector<std::string> dropped;  // assets with fewer than min_length candles
};

/// Drops series shorter than min_length, then keeps the timestamps present in
/// every retained series (intersection; no forward fill).
AlignedPrices align_series(const std::vector<TickerSeries>& series, std::size_t min_length);

// --- remote candles --------------------------------------------------------

/// Field names of one candle object in the exchange payload.
struct CandleFieldMap {
  std::string timestamp = "timestamp";
  std::string open = "open";
  std::string close = "close";
  std::string low = "min";
  std::string high = "max";
  std::string volume = "volume";
};

struct Period {
  std::string code;  // exchange interval code, e.g. "M1"
  std::int64_t seconds = 60;
};

/// Accepts CLI style codes (1m, 5m, 1h, 1d, ...) as well as exchange codes (M1, H4, D1).
Period parse_period(const std::string& text);

struct FetchConfig {
  std::string path_template = "/api/3/public/candles/{symbol}";
  std::size_t page_size = 1000;
  std::chrono::milliseconds delay{200};
  CandleFieldMap fields;
};

inline constexpr const char* kDefaultEndpoint = "https://api.hitbtc.com";
inline constexpr const char* kEndpointEnvVar = "EIGENFOLIO_API_URL";

/// Endpoint from the environment override, or the built-in default.
std::string default_endpoint();

/// Parses one page of candles. Errors name the offending element and field.
std::vector<Candle> parse_candles(const std::string& body, const CandleFieldMap& fields);

/// Downloads the most recent `limit` candles, newest page first, following a
/// `till` cursor until enough candles are collected or history runs out.
/// Pages are stitched without duplicates and returned in ascending order.
std::vector<Candle> fetch_candles(HttpTransport& transport, const std::string& symbol,
                                  const Period& period, std::size_t limit,
                                  const FetchConfig& config = {});

/// Fetches each symbol in order; the result order follows `symbols`.
std::vector<TickerSeries> fetch_all(HttpTransport& transport, const std::vector<std::string>& symbols,
                                    const Period& period, std::size_t limit,
                                    const FetchConfig& config = {});

std::string format_iso8601(Timestamp t);
Timestamp parse_iso8601(const std::string& text);

}  // namespace eigenfolio
