#include "eigenfolio/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eigenfolio/error.hpp"
#include "eigenfolio/io.hpp"
#include "eigenfolio/market_ingest.hpp"
#include "eigenfolio/parallel.hpp"
#include "eigenfolio/returns.hpp"
#include "eigenfolio/rmt_bench.hpp"
#include "eigenfolio/rng.hpp"
#include "eigenfolio/spectral.hpp"
#include "eigenfolio/structure.hpp"

namespace eigenfolio::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

GridSpec parse_grid(const std::string& text) {
  if (text == "auto") return {};
  const auto first = text.find(':');
  const auto second = first == std::string::npos ? std::string::npos : text.find(':', first + 1);
  if (second == std::string::npos || text.find(':', second + 1) != std::string::npos) {
    throw Error(ErrorKind::argument, "grid must be start:stop:points or auto, got '" + text + "'");
  }
  GridSpec g;
  g.automatic = false;
  g.start = parse_number(std::string_view(text).substr(0, first), "grid start");
  g.stop = parse_number(std::string_view(text).substr(first + 1, second - first - 1), "grid stop");
  const double points = parse_number(std::string_view(text).substr(second + 1), "grid points");
  if (points < 2 || points != std::floor(points) || points > 1e7) {
    throw Error(ErrorKind::argument, "grid needs an integer point count >= 2");
  }
  g.points = static_cast<std::size_t>(points);
  if (!(g.stop > g.start)) throw Error(ErrorKind::argument, "grid stop must exceed start");
  return g;
}

std::vector<double> parse_values(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    const auto g = parse_grid(text);
    if (g.automatic) throw Error(ErrorKind::argument, "value range cannot be auto");
    return linear_grid(g.start, g.stop, g.points);
  }
  std::vector<double> out;
  std::string_view rest(text);
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(parse_number(rest.substr(0, comma), "value list"));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

namespace {

// Independent streams derived from the user seed.
constexpr std::uint64_t kSpacingStream = 1;
constexpr std::uint64_t kControlStream = 2;
constexpr std::uint64_t kFitStream = 3;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::optional<double> parse_auto(const std::string& text, const std::string& what) {
  if (text == "auto") return std::nullopt;
  return parse_number(text, what);
}

PrScale parse_scale(const std::string& text) {
  if (text == "normalized") return PrScale::normalized;
  if (text == "raw") return PrScale::raw;
  throw Error(ErrorKind::argument, "scale must be normalized or raw");
}

ordered_json grid_json(const GridSpec& g) {
  if (g.automatic) return "auto";
  return ordered_json::array({g.start, g.stop, g.points});
}

void emit(const fs::path& path, const std::string& content, const ordered_json& meta) {
  write_file_atomic(path, content);
  write_meta(path, meta);
}

ordered_json make_meta(const std::string& command, ordered_json config, ordered_json stats = ordered_json::object()) {
  ordered_json meta;
  meta["command"] = command;
  meta["config"] = std::move(config);
  meta["stats"] = std::move(stats);
  return meta;
}

std::vector<double> dos_grid(const GridSpec& spec, std::span<const EigenSystem> eig, double eta) {
  if (!spec.automatic) return linear_grid(spec.start, spec.stop, spec.points);
  double top = 0.0;
  for (const auto& es : eig) top = std::max(top, es.values.maxCoeff());
  return linear_grid(0.0, top + 10.0 * eta, 600);
}

std::vector<double> pr_grid(const GridSpec& spec, std::span<const EigenSystem> eig) {
  if (!spec.automatic) return linear_grid(spec.start, spec.stop, spec.points);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& es : eig) {
    lo = std::min(lo, es.values.minCoeff());
    hi = std::max(hi, es.values.maxCoeff());
  }
  return linear_grid(lo, hi, 200);
}

std::vector<double> bin_centres(const SpacingHistogram& h) {
  std::vector<double> x(h.density.size());
  for (std::size_t b = 0; b < x.size(); ++b) x[b] = 0.5 * (h.bin_edges[b] + h.bin_edges[b + 1]);
  return x;
}

std::pair<double, double> eigen_range(std::span<const EigenSystem> eig) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& es : eig) {
    lo = std::min(lo, es.values.minCoeff());
    hi = std::max(hi, es.values.maxCoeff());
  }
  return {lo, hi};
}

std::vector<double> index_axis(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = static_cast<double>(k);
  return x;
}

std::vector<EigenSystem> load_eigen_ensemble(const std::string& path) {
  const auto ens = parse_ensemble_jsonl(read_text_file(path));
  return eig_ensemble(ens);
}

// --- clusters --------------------------------------------------------------

struct ClusterTable {
  std::vector<std::vector<double>> rows;
  std::vector<double> measured;
  std::vector<double> trivial;
};

ClusterTable cluster_table(const EigenSystem& es) {
  const auto tree = sign_partition(es);
  ClusterTable t;
  for (std::size_t p = 0; p < es.size(); ++p) {
    const auto n = static_cast<double>(cluster_count(tree, p));
    const auto base = static_cast<double>(trivial_count(es.size(), p));
    t.rows.push_back({static_cast<double>(p), n, base});
    t.measured.push_back(n);
    t.trivial.push_back(base);
  }
  return t;
}

ordered_json p0_json(const ClusterTable& t) {
  ordered_json j;
  try {
    const auto fit = fit_p0(t.measured, t.trivial);
    j["p0"] = std::isfinite(fit.p0) ? ordered_json(fit.p0) : ordered_json("inf");
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["used_levels"] = fit.used_levels;
    j["excluded_levels"] = fit.excluded_levels;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::fit_domain) throw;
    j["error"] = std::string(to_string(e.kind()));
    j["message"] = e.what();
  }
  return j;
}

// --- subcommand bodies -----------------------------------------------------

struct FetchArgs {
  std::string symbols;
  std::string period = "1m";
  std::size_t limit = 100000;
  std::size_t min_length = 2;
  std::string endpoint;
  long delay_ms = 200;
  std::string out;
};

ordered_json cmd_fetch(const FetchArgs& a, const TransportFactory& factory) {
  const auto symbols = split_list(a.symbols);
  if (symbols.empty()) throw Error(ErrorKind::argument, "no symbols given");
  if (a.limit < 1) throw Error(ErrorKind::argument, "limit must be positive");
  const auto period = parse_period(a.period);
  const std::string endpoint = a.endpoint.empty() ? default_endpoint() : a.endpoint;
  auto transport = factory ? factory(endpoint) : make_http_transport(endpoint);
  FetchConfig config;
  config.delay = std::chrono::milliseconds(std::max(0L, a.delay_ms));
  const auto series = fetch_all(*transport, symbols, period, a.limit, config);
  const auto aligned = align_series(series, a.min_length);
  write_csv(aligned.prices, a.out);
  ordered_json cfg{{"symbols", symbols},     {"period", period.code},   {"limit", a.limit},
                   {"min_length", a.min_length}, {"endpoint", endpoint}};
  ordered_json stats{{"assets", aligned.prices.assets()},
                     {"points", aligned.prices.points()},
                     {"dropped", aligned.dropped}};
  write_meta(a.out, make_meta("fetch", cfg, stats));
  return stats;
}

struct ReturnsArgs {
  std::string in, out;
};

ordered_json returns_stats(const NormalizedReturns& r) {
  ordered_json mean = ordered_json::object(), sd = ordered_json::object();
  for (std::size_t m = 0; m < r.assets(); ++m) {
    mean[r.labels[m]] = r.mean(static_cast<Eigen::Index>(m));
    sd[r.labels[m]] = r.stddev(static_cast<Eigen::Index>(m));
  }
  return {{"assets", r.assets()}, {"length", r.length()}, {"mean", mean}, {"stddev", sd}};
}

ordered_json cmd_returns(const ReturnsArgs& a) {
  const auto r = normalized_returns(load_csv(a.in));
  const auto stats = returns_stats(r);
  emit(a.out, format_returns_csv(r), make_meta("returns", {{"in", a.in}}, stats));
  return {{"assets", r.assets()}, {"length", r.length()}};
}

struct EnsembleArgs {
  std::string in, out;
  std::size_t window = 100;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
};

ordered_json cmd_ensemble(const EnsembleArgs& a) {
  const auto r = parse_returns_csv(read_text_file(a.in));
  BootstrapSpec spec{a.window, a.samples, a.seed};
  std::size_t rejected = 0;
  const auto ens = correlation_ensemble(r, spec, &rejected);
  ordered_json cfg{{"in", a.in}, {"window", a.window}, {"samples", a.samples}, {"seed", a.seed}};
  ordered_json stats{{"assets", r.assets()}, {"rejected_windows", rejected}};
  emit(a.out, format_ensemble_jsonl(ens), make_meta("ensemble", cfg, stats));
  return stats;
}

struct BenchArgs {
  std::string dist = "gaussian";
  double gamma = 0.032;
  std::size_t m = 17, n = 100, samples = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

ordered_json cmd_bench(const BenchArgs& a) {
  EnsembleSpec spec{parse_distribution(a.dist), a.gamma, a.m, a.n, a.samples, a.seed};
  const auto ens = sample_benchmark_ensemble(spec);
  ordered_json cfg{{"dist", a.dist}, {"m", a.m}, {"n", a.n}, {"samples", a.samples}, {"seed", a.seed}};
  if (spec.distribution == Distribution::cauchy) cfg["gamma"] = a.gamma;
  emit(a.out, format_ensemble_jsonl(ens), make_meta("bench", cfg));
  return {{"samples", ens.size()}};
}

struct InOut {
  std::string in, out;
};

ordered_json cmd_spectrum(const InOut& a) {
  const auto ens = parse_ensemble_jsonl(read_text_file(a.in));
  const auto eig = eig_ensemble(ens);
  const auto spectrum = make_spectrum(ens, eig);
  const auto [lo, hi] = eigen_range(eig);
  ordered_json stats{{"members", eig.size()}, {"lambda_min", lo}, {"lambda_max", hi}};
  emit(a.out, format_spectrum_json(spectrum), make_meta("spectrum", {{"in", a.in}}, stats));
  return stats;
}

struct DosArgs {
  std::string in, out;
  std::string eta = "auto";
  std::string grid = "auto";
};

ordered_json cmd_dos(const DosArgs& a) {
  const auto eta_opt = parse_auto(a.eta, "eta");
  if (eta_opt && !(*eta_opt > 0.0)) {
    throw Error(ErrorKind::domain, "broadening eta must be positive, got " + a.eta);
  }
  const auto grid_spec = parse_grid(a.grid);
  const auto eig = load_eigen_ensemble(a.in);
  const double eta = eta_opt ? *eta_opt : default_eta(eig);
  const auto dos = dos_green(eig, dos_grid(grid_spec, eig, eta), eta);
  ordered_json cfg{{"in", a.in}, {"eta", a.eta}, {"grid", grid_json(grid_spec)}};
  ordered_json stats{{"eta", eta}, {"members", dos.sample_count}};
  emit(a.out, format_curve_csv(dos.grid, dos.density), make_meta("dos", cfg, stats));
  return stats;
}

struct SpacingArgs {
  std::string in, out;
  std::size_t draws = 10000, sets = 100, bins = 60;
  double max_spacing = 6.0;
  std::uint64_t seed = 0;
};

ordered_json spacing_stats(const SpacingHistogram& h) {
  return {{"mean_spacing", h.mean_spacing}, {"spacing_count", h.spacing_count}, {"bin_edges", h.bin_edges}};
}

ordered_json cmd_spacings(const SpacingArgs& a) {
  const auto curve = parse_curve_csv(read_text_file(a.in));
  DOSCurve dos{curve.x, curve.y, 0.0, 0};
  const auto h = unfold_and_spacings(dos, {a.draws, a.sets, a.seed, a.bins, a.max_spacing});
  ordered_json cfg{{"in", a.in},     {"draws", a.draws}, {"sets", a.sets},
                   {"seed", a.seed}, {"bins", a.bins},   {"max_spacing", a.max_spacing}};
  emit(a.out, format_curve_csv(bin_centres(h), h.density), make_meta("spacings", cfg, spacing_stats(h)));
  return {{"mean_spacing", h.mean_spacing}};
}

struct IprArgs {
  std::string in, out;
  std::string sigma = "auto";
  std::string grid = "auto";
  std::string scale = "normalized";
};

ordered_json cmd_ipr(const IprArgs& a) {
  const SigmaPolicy sigma{parse_auto(a.sigma, "sigma")};
  const auto grid_spec = parse_grid(a.grid);
  const auto scale = parse_scale(a.scale);
  const auto eig = load_eigen_ensemble(a.in);
  const auto pr = expected_pr(eig, pr_grid(grid_spec, eig), sigma, scale);
  ordered_json cfg{{"in", a.in}, {"sigma", a.sigma}, {"grid", grid_json(grid_spec)}, {"scale", a.scale}};
  ordered_json stats{{"sigma", pr.sigma}, {"members_used", pr.members_used}, {"members_dropped", pr.members_dropped}};
  emit(a.out, format_curve_csv(pr.grid, pr.pr), make_meta("ipr", cfg, stats));
  return stats;
}

ordered_json cmd_volatility(const InOut& a) {
  const auto eig = load_eigen_ensemble(a.in);
  const auto phi = expected_cumulative_volatility(eig);
  ordered_json stats{{"phi0", phi.front()}};
  emit(a.out, format_curve_csv(index_axis(phi.size()), phi), make_meta("volatility", {{"in", a.in}}, stats));
  return stats;
}

ordered_json cmd_clusters(const InOut& a) {
  const auto spectrum = parse_spectrum_json(read_text_file(a.in));
  const auto table = cluster_table(spectrum.mean_eigen);
  const auto p0 = p0_json(table);
  emit(a.out, format_table_csv({"p", "N_measured", "N_trivial"}, table.rows),
       make_meta("clusters", {{"in", a.in}}, {{"p0_fit", p0}}));
  return p0;
}

struct DistArgs {
  std::string in, out;
  std::string metric = "euclid";
};

DistanceMatrix distance_for(const SpectrumFile& s, const std::string& metric) {
  if (metric == "euclid") return euclid_dist(s.mean);
  if (metric == "spectral") return spectral_dist(s.mean_eigen);
  throw Error(ErrorKind::argument, "metric must be euclid or spectral");
}

ordered_json cmd_dist(const DistArgs& a) {
  const auto spectrum = parse_spectrum_json(read_text_file(a.in));
  const auto d = distance_for(spectrum, a.metric);
  emit(a.out, format_distance_csv(d), make_meta("dist", {{"in", a.in}, {"metric", a.metric}}));
  return {{"assets", d.size()}};
}

ordered_json cmd_mst(const InOut& a) {
  const auto tree = mst_prim(parse_distance_csv(read_text_file(a.in)));
  ordered_json stats{{"total_weight", tree.total_weight}, {"edges", tree.edges.size()}};
  emit(a.out, format_mst_dot(tree), make_meta("mst", {{"in", a.in}}, stats));
  return stats;
}

struct DendroArgs {
  std::string in, out, cophenetic;
};

ordered_json ultrametric_json(const UltrametricReport& r) {
  return {{"ultrametric", r.ultrametric}, {"violations", r.violations.size()}};
}

ordered_json cmd_dendro(const DendroArgs& a) {
  const auto d = parse_distance_csv(read_text_file(a.in));
  const auto dendro = single_linkage(d);
  const auto coph = cophenetic(dendro);
  const auto stats = ultrametric_json(ultrametric_check(coph));
  ordered_json cfg{{"in", a.in}, {"linkage", "single"}};
  emit(a.out, format_dendrogram_json(dendro), make_meta("dendro", cfg, stats));
  if (!a.cophenetic.empty()) emit(a.cophenetic, format_distance_csv(coph), make_meta("dendro", cfg, stats));
  return stats;
}

// --- pipeline --------------------------------------------------------------

struct PipelineArgs {
  std::string in, outdir;
  std::size_t window = 100, samples = 1000;
  std::uint64_t seed = 0;
  std::string eta = "auto";
  std::string sigma = "auto";
  std::string dos_grid = "auto";
  std::string pr_grid = "auto";
  std::string gammas = "0.032,0.048";
  std::string fit_gammas = "0.004:0.1:25";
  std::size_t fit_samples = 200;
  std::size_t control_samples = 0;  // 0: same as samples
  std::size_t draws = 10000, sets = 100, bins = 60;
  double max_spacing = 6.0;
};

ordered_json cmd_pipeline(const PipelineArgs& a) {
  const auto eta_opt = parse_auto(a.eta, "eta");
  if (eta_opt && !(*eta_opt > 0.0)) throw Error(ErrorKind::domain, "broadening eta must be positive, got " + a.eta);
  const SigmaPolicy sigma{parse_auto(a.sigma, "sigma")};
  const auto dos_spec = parse_grid(a.dos_grid);
  const auto pr_spec = parse_grid(a.pr_grid);
  const auto gammas = parse_values(a.gammas);
  const auto fit_gammas = parse_values(a.fit_gammas);
  const std::size_t control_samples = a.control_samples ? a.control_samples : a.samples;

  ordered_json cfg{{"in", a.in},
                   {"window", a.window},
                   {"samples", a.samples},
                   {"seed", a.seed},
                   {"eta", a.eta},
                   {"sigma", a.sigma},
                   {"dos_grid", grid_json(dos_spec)},
                   {"pr_grid", grid_json(pr_spec)},
                   {"gammas", gammas},
                   {"fit_gammas", fit_gammas},
                   {"fit_samples", a.fit_samples},
                   {"control_samples", control_samples},
                   {"draws", a.draws},
                   {"sets", a.sets},
                   {"bins", a.bins},
                   {"max_spacing", a.max_spacing}};
  const fs::path dir(a.outdir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory " + a.outdir);
  auto put = [&](const std::string& name, const std::string& content, ordered_json stats = ordered_json::object()) {
    ordered_json meta = make_meta("pipeline", cfg, std::move(stats));
    meta["file"] = name;
    emit(dir / name, content, meta);
  };

  // Data path.
  const auto returns = normalized_returns(load_csv(a.in));
  put("returns.csv", format_returns_csv(returns), returns_stats(returns));
  const std::size_t m = returns.assets();

  std::size_t rejected = 0;
  const auto ens = correlation_ensemble(returns, {a.window, a.samples, a.seed}, &rejected);
  put("lambda.jsonl", format_ensemble_jsonl(ens), {{"rejected_windows", rejected}});
  const auto eig = eig_ensemble(ens);
  const auto spectrum = make_spectrum(ens, eig);
  put("eigs.json", format_spectrum_json(spectrum));

  const auto phi = expected_cumulative_volatility(eig);
  put("volatility.csv", format_curve_csv(index_axis(phi.size()), phi), {{"phi0", phi.front()}});

  const double eta = eta_opt ? *eta_opt : default_eta(eig);
  const auto grid = dos_grid(dos_spec, eig, eta);
  const auto dos = dos_green(eig, grid, eta);
  put("dos.csv", format_curve_csv(dos.grid, dos.density), {{"eta", eta}});

  ordered_json summary;
  summary["assets"] = m;
  summary["labels"] = returns.labels;
  summary["returns_length"] = returns.length();
  summary["rejected_windows"] = rejected;
  summary["eta"] = eta;
  const auto [lo, hi] = eigen_range(eig);
  summary["lambda_range"] = {lo, hi};
  summary["phi0"] = phi.front();

  const auto support = mp_support(m, a.window);
  summary["mp_support"] = {support.lambda_min, support.lambda_max};
  if (m <= a.window) {
    std::vector<double> mp(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) mp[k] = mp_density(grid[k], m, a.window);
    put("mp.csv", format_curve_csv(grid, mp), {{"lambda_min", support.lambda_min}, {"lambda_max", support.lambda_max}});
  }

  const UnfoldOptions unfold{a.draws, a.sets, subseed(a.seed, kSpacingStream), a.bins, a.max_spacing};
  const auto spacings = unfold_and_spacings(dos, unfold);
  put("spacings.csv", format_curve_csv(bin_centres(spacings), spacings.density), spacing_stats(spacings));
  summary["mean_spacing"] = spacings.mean_spacing;

  const auto prgrid = pr_grid(pr_spec, eig);
  const auto pr = expected_pr(eig, prgrid, sigma);
  put("pr.csv", format_curve_csv(pr.grid, pr.pr),
      {{"sigma", pr.sigma}, {"members_used", pr.members_used}, {"members_dropped", pr.members_dropped}});
  summary["pr_sigma"] = pr.sigma;

  // Structure of the ensemble-mean correlation.
  const auto table = cluster_table(spectrum.mean_eigen);
  const auto p0 = p0_json(table);
  put("clusters.csv", format_table_csv({"p", "N_measured", "N_trivial"}, table.rows), {{"p0_fit", p0}});
  summary["p0_fit"] = p0;

  ordered_json structure = ordered_json::object();
  for (const std::string metric : {"euclid", "spectral"}) {
    const auto d = distance_for(spectrum, metric);
    put("dist_" + metric + ".csv", format_distance_csv(d));
    const auto tree = mst_prim(d);
    put("mst_" + metric + ".dot", format_mst_dot(tree), {{"total_weight", tree.total_weight}});
    const auto dendro = single_linkage(d);
    const auto coph = cophenetic(dendro);
    const auto report = ultrametric_json(ultrametric_check(coph));
    put("dendro_" + metric + ".json", format_dendrogram_json(dendro), report);
    put("cophenetic_" + metric + ".csv", format_distance_csv(coph), report);
    structure[metric] = {{"mst_total_weight", tree.total_weight}, {"ultrametric", report}};
  }
  summary["structure"] = structure;

  // Benchmark controls on the same grids.
  ordered_json controls = ordered_json::array();
  std::vector<std::pair<std::string, EnsembleSpec>> specs;
  specs.push_back({"gaussian", {Distribution::gaussian, 0.0, m, a.window, control_samples,
                                subseed(a.seed, kControlStream)}});
  for (double g : gammas) {
    specs.push_back({"cauchy_" + format_double(g), {Distribution::cauchy, g, m, a.window, control_samples,
                                                   subseed(a.seed, kControlStream)}});
  }
  for (const auto& [tag, spec] : specs) {
    const auto ceig = eig_ensemble(sample_benchmark_ensemble(spec));
    const auto cphi = expected_cumulative_volatility(ceig);
    const auto cdos = dos_green(ceig, grid, eta);
    const auto cpr = expected_pr(ceig, prgrid, sigma);
    const auto csp = unfold_and_spacings(cdos, unfold);
    ordered_json cstats{{"distribution", to_string(spec.distribution)}};
    if (spec.distribution == Distribution::cauchy) cstats["gamma"] = spec.gamma;
    const auto [clo, chi] = eigen_range(ceig);
    cstats["lambda_range"] = {clo, chi};
    cstats["phi0"] = cphi.front();
    cstats["mean_spacing"] = csp.mean_spacing;
    put("control_" + tag + "_volatility.csv", format_curve_csv(index_axis(cphi.size()), cphi), cstats);
    put("control_" + tag + "_dos.csv", format_curve_csv(cdos.grid, cdos.density), cstats);
    put("control_" + tag + "_pr.csv", format_curve_csv(cpr.grid, cpr.pr), cstats);
    put("control_" + tag + "_spacings.csv", format_curve_csv(bin_centres(csp), csp.density), cstats);
    cstats["tag"] = tag;
    controls.push_back(std::move(cstats));
  }
  summary["controls"] = controls;

  // Scale of the Cauchy component closest to the measured curves.
  ordered_json fits;
  GammaFitOptions fit_options{FitQuantity::density, m, a.window, a.fit_samples, subseed(a.seed, kFitStream),
                              eta, sigma.fixed};
  for (const auto quantity : {FitQuantity::density, FitQuantity::participation}) {
    fit_options.quantity = quantity;
    const bool density = quantity == FitQuantity::density;
    const auto fit = density ? fit_gamma(grid, dos.density, fit_gammas, fit_options)
                             : fit_gamma(prgrid, pr.pr, fit_gammas, fit_options);
    fits[density ? "density" : "participation"] = {{"gamma", fit.gamma}, {"sse", fit.sse}, {"grid_sse", fit.grid_sse}};
  }
  summary["gamma_fit"] = fits;

  ordered_json doc = make_meta("pipeline", cfg, summary);
  write_file_atomic(dir / "summary.json", doc.dump(2) + "\n");
  return {{"outdir", a.outdir}, {"assets", m}};
}

void print_error(std::ostream& err, std::string_view kind, const std::string& message) {
  ordered_json line{{"error", kind}, {"message", message}};
  err << line.dump() << '\n';
}

struct ThreadGuard {
  ~ThreadGuard() { set_thread_count(0); }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const TransportFactory& transport) {
  CLI::App app{"Random-matrix spectral analysis of multi-asset return series", "eigenfolio"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  FetchArgs fetch;
  auto* c_fetch = sub("fetch", "Download candles and write aligned closing prices");
  c_fetch->add_option("--symbols", fetch.symbols, "Comma-separated tickers")->required();
  c_fetch->add_option("--period", fetch.period, "Candle period (1m, 5m, 1h, ...)");
  c_fetch->add_option("--limit", fetch.limit, "Most recent candles per symbol");
  c_fetch->add_option("--min-length", fetch.min_length, "Drop symbols with fewer candles");
  c_fetch->add_option("--endpoint", fetch.endpoint, std::string("API base URL (default $") + kEndpointEnvVar + ")");
  c_fetch->add_option("--delay-ms", fetch.delay_ms, "Pause between paged requests");
  c_fetch->add_option("--out", fetch.out)->required();

  ReturnsArgs ret;
  auto* c_returns = sub("returns", "Standardized log-returns from a price CSV");
  c_returns->add_option("--in", ret.in)->required();
  c_returns->add_option("--out", ret.out)->required();

  EnsembleArgs ensemble;
  auto* c_ensemble = sub("ensemble", "Bootstrap correlation ensemble");
  c_ensemble->add_option("--in", ensemble.in)->required();
  c_ensemble->add_option("--window", ensemble.window);
  c_ensemble->add_option("--samples", ensemble.samples);
  c_ensemble->add_option("--seed", ensemble.seed)->required();
  c_ensemble->add_option("--out", ensemble.out)->required();

  BenchArgs bench;
  auto* c_bench = sub("bench", "Gaussian or Cauchy benchmark ensemble");
  c_bench->add_option("--dist", bench.dist)->check(CLI::IsMember({"gaussian", "cauchy"}));
  c_bench->add_option("--gamma", bench.gamma);
  c_bench->add_option("--m", bench.m);
  c_bench->add_option("--n", bench.n);
  c_bench->add_option("--samples", bench.samples);
  c_bench->add_option("--seed", bench.seed)->required();
  c_bench->add_option("--out", bench.out)->required();

  InOut spectrum;
  auto* c_spectrum = sub("spectrum", "Eigensystems of an ensemble");
  c_spectrum->add_option("--in", spectrum.in)->required();
  c_spectrum->add_option("--out", spectrum.out)->required();

  DosArgs dos;
  auto* c_dos = sub("dos", "Resolvent density of states");
  c_dos->add_option("--in", dos.in)->required();
  c_dos->add_option("--eta", dos.eta, "Broadening or auto");
  c_dos->add_option("--grid", dos.grid, "start:stop:points or auto");
  c_dos->add_option("--out", dos.out)->required();

  SpacingArgs spacing;
  auto* c_spacings = sub("spacings", "Unfolded nearest-neighbour spacing histogram");
  c_spacings->add_option("--in", spacing.in)->required();
  c_spacings->add_option("--draws", spacing.draws);
  c_spacings->add_option("--sets", spacing.sets);
  c_spacings->add_option("--bins", spacing.bins);
  c_spacings->add_option("--max-spacing", spacing.max_spacing);
  c_spacings->add_option("--seed", spacing.seed)->required();
  c_spacings->add_option("--out", spacing.out)->required();

  IprArgs iprs;
  auto* c_ipr = sub("ipr", "Ensemble-averaged participation ratio curve");
  c_ipr->add_option("--in", iprs.in)->required();
  c_ipr->add_option("--sigma", iprs.sigma, "Kernel width or auto");
  c_ipr->add_option("--grid", iprs.grid, "start:stop:points or auto");
  c_ipr->add_option("--scale", iprs.scale)->check(CLI::IsMember({"normalized", "raw"}));
  c_ipr->add_option("--out", iprs.out)->required();

  InOut vol;
  auto* c_vol = sub("volatility", "Expected cumulative explained volatility");
  c_vol->add_option("--in", vol.in)->required();
  c_vol->add_option("--out", vol.out)->required();

  InOut clusters;
  auto* c_clusters = sub("clusters", "Eigenvector-sign cluster counts");
  c_clusters->add_option("--in", clusters.in)->required();
  c_clusters->add_option("--out", clusters.out)->required();

  DistArgs dist;
  auto* c_dist = sub("dist", "Distance matrix of the mean correlation");
  c_dist->add_option("--in", dist.in)->required();
  c_dist->add_option("--metric", dist.metric)->check(CLI::IsMember({"euclid", "spectral"}));
  c_dist->add_option("--out", dist.out)->required();

  InOut mst;
  auto* c_mst = sub("mst", "Minimum spanning tree");
  c_mst->add_option("--in", mst.in)->required();
  c_mst->add_option("--out", mst.out)->required();

  DendroArgs dendro;
  auto* c_dendro = sub("dendro", "Single-linkage dendrogram");
  c_dendro->add_option("--in", dendro.in)->required();
  c_dendro->add_option("--out", dendro.out)->required();
  c_dendro->add_option("--cophenetic", dendro.cophenetic);

  PipelineArgs pipe;
  auto* c_pipe = sub("pipeline", "Every analysis from a price CSV");
  c_pipe->add_option("--in", pipe.in)->required();
  c_pipe->add_option("--outdir", pipe.outdir)->required();
  c_pipe->add_option("--window", pipe.window);
  c_pipe->add_option("--samples", pipe.samples);
  c_pipe->add_option("--seed", pipe.seed)->required();
  c_pipe->add_option("--eta", pipe.eta);
  c_pipe->add_option("--sigma", pipe.sigma);
  c_pipe->add_option("--dos-grid", pipe.dos_grid);
  c_pipe->add_option("--pr-grid", pipe.pr_grid);
  c_pipe->add_option("--gammas", pipe.gammas, "Cauchy control scales");
  c_pipe->add_option("--fit-gammas", pipe.fit_gammas, "Candidate scales for the fit");
  c_pipe->add_option("--fit-samples", pipe.fit_samples);
  c_pipe->add_option("--control-samples", pipe.control_samples);
  c_pipe->add_option("--draws", pipe.draws);
  c_pipe->add_option("--sets", pipe.sets);
  c_pipe->add_option("--bins", pipe.bins);
  c_pipe->add_option("--max-spacing", pipe.max_spacing);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  ThreadGuard guard;
  set_thread_count(threads);
  try {
    ordered_json result;
    const auto* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    if (chosen == c_fetch) result = cmd_fetch(fetch, transport);
    else if (chosen == c_returns) result = cmd_returns(ret);
    else if (chosen == c_ensemble) result = cmd_ensemble(ensemble);
    else if (chosen == c_bench) result = cmd_bench(bench);
    else if (chosen == c_spectrum) result = cmd_spectrum(spectrum);
    else if (chosen == c_dos) result = cmd_dos(dos);
    else if (chosen == c_spacings) result = cmd_spacings(spacing);
    else if (chosen == c_ipr) result = cmd_ipr(iprs);
    else if (chosen == c_vol) result = cmd_volatility(vol);
    else if (chosen == c_clusters) result = cmd_clusters(clusters);
    else if (chosen == c_dist) result = cmd_dist(dist);
    else if (chosen == c_mst) result = cmd_mst(mst);
    else if (chosen == c_dendro) result = cmd_dendro(dendro);
    else result = cmd_pipeline(pipe);
    ordered_json line{{"command", name}, {"result", result}};
    out << line.dump() << '\n';
    return 0;
  } catch (const Error& e) {
    print_error(err, to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace eigenfolio::cli
