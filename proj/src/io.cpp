#include "eigenfolio/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "eigenfolio/error.hpp"

namespace eigenfolio {

using nlohmann::json;
using nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::io, "read failed for " + path.string());
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::io, "cannot move output into place at " + path.string());
  }
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error(ErrorKind::contract, "double formatting failed");
  return std::string(buf, ptr);
}

double parse_number(std::string_view text, const std::string& context) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(out)) {
    throw Error(ErrorKind::parse, context + ": not a finite number: '" + std::string(text) + "'");
  }
  return out;
}

// --- CSV -------------------------------------------------------------------

std::vector<CsvRecord> split_csv(const std::string& text) {
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  std::size_t line = 1;
  current.line = line;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) i = 3;  // UTF-8 BOM

  auto end_record = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    const bool blank = current.fields.size() == 1 && current.fields[0].empty() && !field_started;
    if (!blank) records.push_back(std::move(current));
    current = CsvRecord{};
    field_started = false;
  };

  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        current.line = line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw Error(ErrorKind::parse, "unterminated quoted field at line " + std::to_string(line));
  if (!field.empty() || field_started || !current.fields.empty()) end_record();
  return records;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// --- curves and tables -----------------------------------------------------

std::string format_curve_csv(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::contract, "curve columns differ in length");
  std::string out = "x,y\n";
  for (std::size_t k = 0; k < x.size(); ++k) {
    out += format_double(x[k]);
    out += ',';
    out += format_double(y[k]);
    out += '\n';
  }
  return out;
}

Curve parse_curve_csv(const std::string& text) {
  const auto records = split_csv(text);
  if (records.empty() || records[0].fields.size() != 2) {
    throw Error(ErrorKind::parse, "curve file needs an `x,y` header");
  }
  Curve c;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "line " + std::to_string(rec.line);
    if (rec.fields.size() != 2) throw Error(ErrorKind::parse, where + ": expected two fields");
    c.x.push_back(parse_number(rec.fields[0], where));
    c.y.push_back(parse_number(rec.fields[1], where));
  }
  return c;
}

std::string format_table_csv(const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + csv_quote(header[k]);
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw Error(ErrorKind::contract, "table row width mismatch");
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + format_double(row[k]);
    out += '\n';
  }
  return out;
}

// --- returns ---------------------------------------------------------------

std::string format_returns_csv(const NormalizedReturns& returns) {
  std::string out = "timestamp";
  for (const auto& s : returns.labels) out += "," + csv_quote(s);
  out += '\n';
  for (Eigen::Index n = 0; n < returns.values.cols(); ++n) {
    const auto idx = static_cast<std::size_t>(n);
    out += returns.timestamps.empty() ? std::to_string(idx) : std::to_string(returns.timestamps[idx]);
    for (Eigen::Index m = 0; m < returns.values.rows(); ++m) {
      out += ',';
      out += format_double(returns.values(m, n));
    }
    out += '\n';
  }
  return out;
}

NormalizedReturns parse_returns_csv(const std::string& text) {
  const auto records = split_csv(text);
  if (records.empty() || records[0].fields.size() < 2) {
    throw Error(ErrorKind::parse, "returns file needs a `timestamp,SYM1,...` header");
  }
  NormalizedReturns out;
  out.labels.assign(records[0].fields.begin() + 1, records[0].fields.end());
  const auto m = static_cast<Eigen::Index>(out.labels.size());
  const auto n = static_cast<Eigen::Index>(records.size() - 1);
  out.values.resize(m, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& rec = records[static_cast<std::size_t>(c) + 1];
    const std::string where = "line " + std::to_string(rec.line);
    if (rec.fields.size() != out.labels.size() + 1) {
      throw Error(ErrorKind::validation, where + ": expected " + std::to_string(out.labels.size() + 1) + " fields");
    }
    const double t = parse_number(rec.fields[0], where);
    if (t != std::floor(t)) throw Error(ErrorKind::parse, where + ": timestamp is not an integer");
    out.timestamps.push_back(static_cast<Timestamp>(t));
    for (Eigen::Index r = 0; r < m; ++r) {
      out.values(r, c) = parse_number(rec.fields[static_cast<std::size_t>(r) + 1], where);
    }
  }
  return out;
}

// --- matrix ensembles ------------------------------------------------------

namespace {

ordered_json matrix_rows(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd read_square(const json& rows, std::size_t size, const std::string& where) {
  if (!rows.is_array() || rows.size() != size) {
    throw Error(ErrorKind::parse, where + ": expected " + std::to_string(size) + " matrix rows");
  }
  const auto n = static_cast<Eigen::Index>(size);
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != size) {
      throw Error(ErrorKind::parse, where + ": row " + std::to_string(i) + " has the wrong length");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) throw Error(ErrorKind::parse, where + ": non-numeric matrix entry");
      out(i, j) = v.get<double>();
    }
  }
  return out;
}

std::vector<std::string> read_labels(const json& j, const std::string& where) {
  if (!j.contains("labels") || !j["labels"].is_array()) {
    throw Error(ErrorKind::parse, where + ": missing labels");
  }
  std::vector<std::string> labels;
  for (const auto& l : j["labels"]) {
    if (!l.is_string()) throw Error(ErrorKind::parse, where + ": labels must be strings");
    labels.push_back(l.get<std::string>());
  }
  return labels;
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, where + ": " + e.what());
  }
}

}  // namespace

std::string format_ensemble_jsonl(std::span<const CorrelationMatrix> ensemble) {
  std::string out;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    ordered_json line;
    line["sample"] = i;
    line["labels"] = ensemble[i].labels;
    line["lambda"] = matrix_rows(ensemble[i].values);
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<CorrelationMatrix> parse_ensemble_jsonl(const std::string& text) {
  std::vector<CorrelationMatrix> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    const json j = parse_json(line, where);
    CorrelationMatrix c;
    c.labels = read_labels(j, where);
    if (!j.contains("lambda")) throw Error(ErrorKind::parse, where + ": missing lambda");
    c.values = read_square(j["lambda"], c.labels.size(), where);
    if (auto problem = check_correlation_invariants(c); !problem.empty()) {
      throw Error(ErrorKind::validation, where + ": " + problem);
    }
    if (!out.empty() && out.front().labels != c.labels) {
      throw Error(ErrorKind::validation, where + ": labels differ from the first member");
    }
    out.push_back(std::move(c));
  }
  if (out.empty()) throw Error(ErrorKind::parse, "ensemble file holds no matrices");
  return out;
}

SpectrumFile make_spectrum(std::span<const CorrelationMatrix> ensemble, std::span<const EigenSystem> eigen) {
  SpectrumFile s;
  s.mean = mean_correlation(ensemble);
  s.mean_eigen = eig_sym(s.mean);
  for (const auto& es : eigen) s.member_values.push_back(es.values);
  return s;
}

std::string format_spectrum_json(const SpectrumFile& s) {
  ordered_json j;
  j["labels"] = s.mean.labels;
  ordered_json mean;
  mean["correlation"] = matrix_rows(s.mean.values);
  mean["values"] = std::vector<double>(s.mean_eigen.values.data(),
                                       s.mean_eigen.values.data() + s.mean_eigen.values.size());
  // One row per eigenvector, in eigenvalue order.
  mean["vectors"] = matrix_rows(s.mean_eigen.vectors.transpose());
  j["mean"] = std::move(mean);
  ordered_json members = ordered_json::array();
  for (const auto& v : s.member_values) members.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  j["members"] = std::move(members);
  return j.dump() + "\n";
}

SpectrumFile parse_spectrum_json(const std::string& text) {
  const json j = parse_json(text, "spectrum");
  SpectrumFile s;
  const auto labels = read_labels(j, "spectrum");
  const std::size_t m = labels.size();
  if (!j.contains("mean")) throw Error(ErrorKind::parse, "spectrum: missing mean");
  const auto& mean = j["mean"];
  s.mean.labels = labels;
  s.mean.values = read_square(mean.at("correlation"), m, "spectrum correlation");
  s.mean_eigen.labels = labels;
  s.mean_eigen.vectors = read_square(mean.at("vectors"), m, "spectrum vectors").transpose();
  const auto values = mean.at("values").get<std::vector<double>>();
  if (values.size() != m) throw Error(ErrorKind::parse, "spectrum: eigenvalue count mismatch");
  s.mean_eigen.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(m));
  for (const auto& member : j.at("members")) {
    const auto v = member.get<std::vector<double>>();
    if (v.size() != m) throw Error(ErrorKind::parse, "spectrum: member eigenvalue count mismatch");
    s.member_values.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(m)));
  }
  return s;
}

// --- structure -------------------------------------------------------------

std::string format_distance_csv(const DistanceMatrix& d) {
  std::string out = "label";
  for (const auto& l : d.labels) out += "," + csv_quote(l);
  out += '\n';
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    out += csv_quote(d.labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
      out += ',';
      out += format_double(d.values(i, j));
    }
    out += '\n';
  }
  return out;
}

DistanceMatrix parse_distance_csv(const std::string& text) {
  const auto records = split_csv(text);
  if (records.empty() || records[0].fields.size() < 2) {
    throw Error(ErrorKind::parse, "distance file needs a `label,SYM1,...` header");
  }
  DistanceMatrix d;
  d.labels.assign(records[0].fields.begin() + 1, records[0].fields.end());
  const std::size_t m = d.labels.size();
  if (records.size() != m + 1) {
    throw Error(ErrorKind::validation, "distance matrix must be square: " + std::to_string(m) + " columns, " +
                                           std::to_string(records.size() - 1) + " rows");
  }
  d.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const auto& rec = records[i + 1];
    const std::string where = "line " + std::to_string(rec.line);
    if (rec.fields.size() != m + 1) throw Error(ErrorKind::validation, where + ": wrong field count");
    if (rec.fields[0] != d.labels[i]) throw Error(ErrorKind::validation, where + ": row label out of order");
    for (std::size_t j = 0; j < m; ++j) {
      d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_number(rec.fields[j + 1], where);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (d.values(ii, ii) != 0.0) throw Error(ErrorKind::validation, "distance diagonal must be zero");
    for (std::size_t j = 0; j < i; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (d.values(ii, jj) != d.values(jj, ii) || d.values(ii, jj) < 0.0) {
        throw Error(ErrorKind::validation, "distance matrix must be symmetric and non-negative");
      }
    }
  }
  return d;
}

namespace {

std::string dot_id(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_mst_dot(const SpanningTree& tree) {
  std::string out = "graph mst {\n";
  for (const auto& l : tree.labels) out += "  " + dot_id(l) + ";\n";
  for (const auto& e : tree.edges) {
    out += "  " + dot_id(tree.labels[e.a]) + " -- " + dot_id(tree.labels[e.b]) + " [weight=" +
           format_double(e.weight) + "];\n";
  }
  out += "}\n";
  return out;
}

std::string format_dendrogram_json(const Dendrogram& dendro) {
  ordered_json j;
  j["labels"] = dendro.labels;
  ordered_json merges = ordered_json::array();
  for (const auto& m : dendro.merges) merges.push_back(ordered_json::array({m.a, m.b, m.height, m.size}));
  j["merges"] = std::move(merges);
  j["leaf_order"] = dendro.leaf_order;
  j["appearance_order"] = appearance_order(dendro);
  return j.dump(2) + "\n";
}

// --- sidecars --------------------------------------------------------------

std::filesystem::path meta_path(const std::filesystem::path& out) {
  auto p = out;
  p += ".meta.json";
  return p;
}

void write_meta(const std::filesystem::path& out, const ordered_json& meta) {
  write_file_atomic(meta_path(out), meta.dump(2) + "\n");
}

}  // namespace eigenfolio
