// lpcoreset: scores, flattening, sampling, distortion checks and scaling
// benchmarks from the command line.
//
// Exit codes: 0 success, 1 check failed, 2 usage or input error,
// 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lpcoreset/io.hpp"
#include "lpcoreset/lpcoreset.hpp"

namespace lc = lpcoreset;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string input;
  std::string gen;
  std::size_t n = 0, d = 0, k = 0, q = 0, s = 0;
  std::optional<std::uint64_t> gen_seed;
  double p = 2.0;
  double eps = 0.5;
  double delta = 0.1;
  std::string method = "sensitivity";
  std::string alpha = "auto";
  double C = 0.0;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::string out;
  // command specific
  std::string kind = "sensitivity";
  std::string transform = "sens";
  std::string map_path;
  std::string sample_path;
  std::string draw_path;
  std::size_t probes = 64;
  std::size_t restarts = 4;
  std::size_t draws = 5;
  std::size_t budget = 24;
  std::vector<double> grid{0.4, 0.3, 0.2, 0.15, 0.1};
  double tol = lc::kDefaultSensitivityTol;
  bool eps_given = false;
};

void validate(const RunConfig& c) {
  if (c.input.empty() == c.gen.empty()) throw lc::InvalidArgument("give exactly one of --input and --gen");
  if (c.trials < 1) throw lc::InvalidArgument("--trials must be >= 1");
  if (!(c.eps > 0.0 && c.eps < 1.0)) throw lc::InvalidArgument("--eps must lie in (0,1)");
  if (!(c.p >= 1.0) || !std::isfinite(c.p)) throw lc::InvalidArgument("--p must be finite and >= 1");
}

lc::Matrix load_matrix(const RunConfig& c) {
  if (!c.input.empty()) return lc::read_csv(c.input);
  lc::GeneratorSpec spec;
  spec.family = lc::parse_family(c.gen);
  spec.n = c.n;
  spec.d = c.d;
  spec.k = c.k;
  spec.q = c.q;
  spec.s = c.s;
  spec.p = c.p;
  spec.seed = c.gen_seed.value_or(c.seed);
  return lc::generate(spec);
}

/// out.csv -> out.<suffix>
std::string sibling(const std::string& out, const std::string& suffix) {
  std::filesystem::path path(out);
  path.replace_extension(suffix);
  return path.string();
}

void emit(const RunConfig& c, const json& j) {
  if (c.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    lc::io::write_json(c.out, j);
  }
}

lc::ScoreVector compute_scores(const lc::Matrix& a, const RunConfig& c) {
  if (c.kind == "leverage") return lc::leverage_scores(a);
  if (c.kind == "sensitivity" || c.kind == "lp_sensitivity") return lc::lp_sensitivities(a, c.p, c.tol);
  if (c.kind == "lewis") return lc::lewis_weights(a, c.p);
  throw lc::InvalidArgument("unknown score kind '" + c.kind + "'");
}

int cmd_scores(const RunConfig& c) {
  const lc::Matrix a = load_matrix(c);
  emit(c, lc::io::to_json(compute_scores(a, c)));
  return kExitOk;
}

int cmd_flatten(const RunConfig& c) {
  if (c.out.empty()) throw lc::InvalidArgument("flatten needs --out for the matrix CSV");
  const lc::Matrix a = load_matrix(c);
  const double cc = c.C > 0.0 ? c.C : 4.0;
  lc::Flattened f;
  if (c.transform == "sens") {
    f = lc::flatten_sensitivities(a, c.p, cc, c.tol);
  } else if (c.transform == "uniform") {
    if (c.alpha == "auto") throw lc::InvalidArgument("uniform flattening needs a numeric --alpha");
    f = lc::flatten_uniform(a, c.p, std::stod(c.alpha));
  } else if (c.transform == "senslev") {
    f = lc::flatten_sens_lev(a, c.p, cc);
  } else {
    throw lc::InvalidArgument("unknown transform '" + c.transform + "'");
  }
  lc::write_csv(f.matrix, c.out);
  lc::io::write_json(c.map_path.empty() ? sibling(c.out, ".rowmap.json") : c.map_path, lc::io::to_json(f.map));
  return kExitOk;
}

lc::CalibrationOptions calibration_options(const RunConfig& c) {
  lc::CalibrationOptions opt;
  opt.budget = c.budget;
  opt.draws = c.draws;
  opt.probes = c.probes;
  opt.restarts = c.restarts;
  return opt;
}

struct PlanChoice {
  lc::SamplingPlan plan;
  std::optional<double> alpha;
};

PlanChoice choose_plan(const lc::Matrix& a, const RunConfig& c, std::uint64_t seed) {
  const lc::PlanMethod method = lc::parse_plan_method(c.method);
  if (method == lc::PlanMethod::uniform_half) return {lc::half_plan(a.rows(), c.p), std::nullopt};
  if (method == lc::PlanMethod::custom) throw lc::InvalidArgument("custom plans are not available from the CLI");
  const lc::ScoreVector s = lc::scores_for(a, c.p, method, c.tol);
  if (c.alpha == "auto") {
    lc::CalibrationResult r = lc::calibrate_alpha(a, s, c.p, c.eps, method, seed, calibration_options(c));
    return {std::move(r.plan), r.alpha};
  }
  const double alpha = std::stod(c.alpha);
  return {lc::plan_for(s, c.p, method, alpha), alpha};
}

int cmd_sample(const RunConfig& c) {
  if (c.out.empty()) throw lc::InvalidArgument("sample needs --out for the sampled matrix CSV");
  const lc::Matrix a = load_matrix(c);
  const PlanChoice choice = choose_plan(a, c, c.seed);
  const lc::SampleDraw dr = lc::draw(choice.plan, c.seed);
  lc::write_csv(lc::apply(dr, a), c.out);
  lc::io::write_json(c.draw_path.empty() ? sibling(c.out, ".draw.json") : c.draw_path, lc::io::to_json(dr));
  json summary = {{"rows", a.rows()},
                  {"kept", dr.size()},
                  {"expected_rows", choice.plan.expected_rows()},
                  {"method", lc::to_string(choice.plan.method)},
                  {"alpha", choice.alpha ? json(*choice.alpha) : json(nullptr)}};
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

int cmd_verify(const RunConfig& c) {
  const lc::Matrix a = load_matrix(c);
  lc::Matrix b;
  if (!c.sample_path.empty() == !c.draw_path.empty())
    throw lc::InvalidArgument("verify needs exactly one of --sample and --draw");
  if (!c.sample_path.empty()) {
    b = lc::read_csv(c.sample_path);
  } else {
    const lc::SampleDraw dr = lc::io::draw_from_json(lc::io::read_json(c.draw_path));
    if (dr.p != c.p) throw lc::InvalidArgument("draw exponent differs from --p");
    b = lc::apply(dr, a);
  }
  if (b.cols() != a.cols()) throw lc::ShapeMismatch("sampled matrix has a different column count");
  const lc::DistortionReport rep = lc::distortion_best(a, b, c.p, c.probes, c.restarts, c.seed);
  emit(c, lc::io::to_json(rep));
  if (c.eps_given && rep.lambda_est > c.eps) return kExitCheckFailed;
  return kExitOk;
}

/// Linear-interpolation percentile of a sorted sample.
double percentile(const std::vector<double>& sorted, double frac) {
  if (sorted.empty()) return std::nan("");
  const double pos = frac * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

json config_echo(const RunConfig& c) {
  json j = {{"p", c.p},           {"method", c.method},   {"C", c.C},           {"seed", c.seed},
            {"trials", c.trials}, {"grid", c.grid},       {"probes", c.probes}, {"restarts", c.restarts},
            {"draws", c.draws},   {"budget", c.budget},   {"tol", c.tol}};
  if (!c.input.empty()) {
    j["input"] = c.input;
  } else {
    j["generator"] = {{"family", c.gen}, {"n", c.n}, {"d", c.d}, {"k", c.k},
                      {"q", c.q},        {"s", c.s}, {"seed", c.gen_seed.value_or(c.seed)}};
  }
  return j;
}

int cmd_bench(const RunConfig& c) {
  if (c.grid.empty()) throw lc::InvalidArgument("bench needs a non-empty --grid");
  for (double e : c.grid)
    if (!(e > 0.0 && e < 1.0)) throw lc::InvalidArgument("--grid values must lie in (0,1)");
  const lc::PlanMethod method = lc::parse_plan_method(c.method);
  if (method == lc::PlanMethod::uniform_half || method == lc::PlanMethod::custom)
    throw lc::InvalidArgument("bench needs a calibratable method");

  lc::Matrix a = load_matrix(c);
  if (c.C > 0.0) a = lc::flatten_sensitivities(a, c.p, c.C, c.tol).matrix;
  const lc::ScoreVector s = lc::scores_for(a, c.p, method, c.tol);
  const double total = s.sum();
  const lc::CalibrationOptions opt = calibration_options(c);

  json points = json::array();
  json wall = json::array();
  std::vector<double> xs, ys;
  std::string csv = "eps,median_rows,p25_rows,p75_rows,median_lambda\n";
  for (double eps : c.grid) {
    json trials = json::array();
    json trial_ms = json::array();
    std::vector<double> rows, lambdas;
    for (std::size_t i = 0; i < c.trials; ++i) {
      const std::uint64_t ts = lc::trial_seed(c.seed, i);
      const auto t0 = std::chrono::steady_clock::now();
      json rec = {{"seed", ts}, {"total_sens", total}};
      try {
        const lc::CalibrationResult r = lc::calibrate_alpha(a, s, c.p, eps, method, ts, opt);
        const lc::SampleDraw dr = lc::draw(r.plan, lc::detail::mix_seed(ts, 0xd4a3, 0));
        const lc::DistortionReport rep =
            lc::distortion_best(a, lc::apply(dr, a), c.p, c.probes, c.restarts, lc::detail::mix_seed(ts, 0xd4a3, 1));
        rec["rows_kept"] = dr.size();
        rec["lambda_est"] = rep.lambda_est;
        rec["alpha"] = r.alpha;
        rec["budget_exhausted"] = false;
        rows.push_back(static_cast<double>(dr.size()));
        lambdas.push_back(rep.lambda_est);
      } catch (const lc::BudgetExhausted& e) {
        rec["rows_kept"] = e.best().draw.size();
        rec["lambda_est"] = e.best().median_lambda;
        rec["alpha"] = e.best().alpha;
        rec["budget_exhausted"] = true;
      }
      const auto t1 = std::chrono::steady_clock::now();
      trial_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      trials.push_back(std::move(rec));
    }
    std::sort(rows.begin(), rows.end());
    std::sort(lambdas.begin(), lambdas.end());
    json agg = {{"median_rows", nullptr}, {"p25_rows", nullptr}, {"p75_rows", nullptr},
                {"median_lambda", nullptr}, {"included_trials", rows.size()}};
    if (!rows.empty()) {
      agg["median_rows"] = percentile(rows, 0.5);
      agg["p25_rows"] = percentile(rows, 0.25);
      agg["p75_rows"] = percentile(rows, 0.75);
      agg["median_lambda"] = percentile(lambdas, 0.5);
      xs.push_back(std::log(1.0 / eps));
      ys.push_back(std::log(percentile(rows, 0.5)));
      csv += json(eps).dump() + "," + json(percentile(rows, 0.5)).dump() + "," +
             json(percentile(rows, 0.25)).dump() + "," + json(percentile(rows, 0.75)).dump() + "," +
             json(percentile(lambdas, 0.5)).dump() + "\n";
    } else {
      csv += json(eps).dump() + ",,,,\n";
    }
    points.push_back({{"eps", eps}, {"trials", std::move(trials)}, {"aggregate", std::move(agg)}});
    wall.push_back(std::move(trial_ms));
  }

  json slope = nullptr;
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
    slope = sxy / sxx;
  }
  json result = {{"config", config_echo(c)},
                 {"rows", a.rows()},
                 {"total_sensitivity", total},
                 {"points", std::move(points)},
                 {"slope", slope}};
  emit(c, result);
  if (!c.out.empty()) {
    lc::io::write_text(sibling(c.out, ".csv"), csv);
    // Wall-clock timings vary between runs; they live outside the result file.
    lc::io::write_json(sibling(c.out, ".meta.json"), {{"wall_ms", std::move(wall)}});
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"lp subspace embeddings by sensitivity sampling"};
  app.set_config("--config", "", "key=value run configuration; flags override its entries");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  auto* in_opt = app.add_option("--input", c.input, "input matrix CSV");
  auto* gen_opt = app.add_option("--gen", c.gen, "generator family: gaussian|vandermonde|lowrank_sparse|perturbed");
  in_opt->excludes(gen_opt);
  app.add_option("--n", c.n, "generated rows");
  app.add_option("--d", c.d, "generated columns (base columns for vandermonde use --k)");
  app.add_option("--k", c.k, "rank (lowrank_sparse) or base columns (vandermonde)");
  app.add_option("--q", c.q, "vandermonde degree");
  app.add_option("--s", c.s, "sparse entries per row");
  app.add_option("--gen-seed", c.gen_seed, "generator seed (defaults to --seed)");
  app.add_option("--p", c.p, "exponent p >= 1");
  auto* eps_opt = app.add_option("--eps", c.eps, "target distortion in (0,1)");
  app.add_option("--delta", c.delta, "failure probability");
  app.add_option("--method", c.method, "sensitivity|rootlev|lewis|half");
  app.add_option("--alpha", c.alpha, "oversampling parameter, or auto to calibrate");
  app.add_option("--C", c.C, "flattening constant");
  app.add_option("--seed", c.seed, "top-level seed; trial i uses seed + i");
  app.add_option("--trials", c.trials, "trials per configuration");
  app.add_option("--out", c.out, "output path");
  app.add_option("--kind", c.kind, "score kind for scores: leverage|sensitivity|lewis");
  app.add_option("--transform", c.transform, "flatten transform: sens|uniform|senslev");
  app.add_option("--map", c.map_path, "row map output for flatten");
  app.add_option("--sample", c.sample_path, "sampled matrix CSV for verify");
  app.add_option("--draw", c.draw_path, "draw JSON (output of sample, input of verify)");
  app.add_option("--probes", c.probes, "random probe directions for distortion estimates");
  app.add_option("--restarts", c.restarts, "gradient ascent restarts for distortion estimates");
  app.add_option("--draws", c.draws, "draws per candidate alpha during calibration");
  app.add_option("--budget", c.budget, "maximum halvings during calibration");
  app.add_option("--grid", c.grid, "eps grid for bench")->delimiter(',');
  app.add_option("--tol", c.tol, "sensitivity solver tolerance");

  auto* scores = app.add_subcommand("scores", "write a score vector as JSON");
  auto* flatten = app.add_subcommand("flatten", "split rows; write matrix CSV and row map JSON");
  auto* sample = app.add_subcommand("sample", "draw a sampling matrix; write draw JSON and sampled CSV");
  auto* verify = app.add_subcommand("verify", "estimate the sampling error of a sampled matrix");
  auto* bench = app.add_subcommand("bench", "rows kept versus eps over a grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  c.eps_given = eps_opt->count() > 0;

  try {
    validate(c);
    if (*scores) return cmd_scores(c);
    if (*flatten) return cmd_flatten(c);
    if (*sample) return cmd_sample(c);
    if (*verify) return cmd_verify(c);
    if (*bench) return cmd_bench(c);
  } catch (const lc::NoConvergence& e) {
    std::cerr << "error: " << e.what();
    if (e.row() >= 0) std::cerr << " (row " << e.row() << ")";
    std::cerr << "\n";
    return kExitNumerical;
  } catch (const lc::BudgetExhausted& e) {
    std::cerr << "error: " << e.what() << " (best alpha " << e.best().alpha << ", lambda "
              << e.best().median_lambda << ")\n";
    return kExitNumerical;
  } catch (const lc::RoundRetryExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const lc::AllZeroMatrix& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const lc::RankDeficient& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const lc::Overflow& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const lc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::logic_error& e) {
    std::cerr << "error: bad number: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
