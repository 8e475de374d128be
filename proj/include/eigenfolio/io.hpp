#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eigenfolio/returns.hpp"
#include "eigenfolio/spectral.hpp"
#include "eigenfolio/structure.hpp"

namespace eigenfolio {

std::string read_text_file(const std::filesystem::path& path);

/// Writes `<path>.tmp` and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

/// Parses a finite double; errors mention `context`.
double parse_number(std::string_view text, const std::string& context);

// --- CSV -------------------------------------------------------------------

struct CsvRecord {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// RFC-4180 splitting: quoted fields, doubled quotes, CRLF, optional BOM.
/// Blank lines are skipped.
std::vector<CsvRecord> split_csv(const std::string& text);
std::string csv_quote(const std::string& field);

// --- curves and tables -----------------------------------------------------

struct Curve {
  std::vector<double> x;
  std::vector<double> y;
};

std::string format_curve_csv(std::span<const double> x, std::span<const double> y);
Curve parse_curve_csv(const std::string& text);

std::string format_table_csv(const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows);

// --- returns ---------------------------------------------------------------

/// `timestamp,SYM...` with one row per return interval. Without timestamps
/// the first column holds the interval index.
std::string format_returns_csv(const NormalizedReturns& returns);

/// Rows are taken as already standardized; mean and stddev are left empty.
NormalizedReturns parse_returns_csv(const std::string& text);

// --- matrix ensembles ------------------------------------------------------

/// One line per member: {"sample":i,"labels":[...],"lambda":[[...],...]}.
std::string format_ensemble_jsonl(std::span<const CorrelationMatrix> ensemble);
std::vector<CorrelationMatrix> parse_ensemble_jsonl(const std::string& text);

struct SpectrumFile {
  CorrelationMatrix mean;
  EigenSystem mean_eigen;
  std::vector<Eigen::VectorXd> member_values;
};

SpectrumFile make_spectrum(std::span<const CorrelationMatrix> ensemble, std::span<const EigenSystem> eigen);
std::string format_spectrum_json(const SpectrumFile& spectrum);
SpectrumFile parse_spectrum_json(const std::string& text);

// --- structure -------------------------------------------------------------

/// Square CSV: `label,SYM...` header, one row per asset.
std::string format_distance_csv(const DistanceMatrix& d);
DistanceMatrix parse_distance_csv(const std::string& text);

std::string format_mst_dot(const SpanningTree& tree);
std::string format_dendrogram_json(const Dendrogram& dendro);

// --- sidecars --------------------------------------------------------------

/// `<out>.meta.json` next to an output file.
std::filesystem::path meta_path(const std::filesystem::path& out);
void write_meta(const std::filesystem::path& out, const nlohmann::ordered_json& meta);

}  // namespace eigenfolio
