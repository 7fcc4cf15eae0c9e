#pragma once

// JSON records for scores, row maps, draws, reports and traces. Requires
// nlohmann/json on the include path; the rest of the library does not.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpcoreset/errors.hpp"
#include "lpcoreset/flatten.hpp"
#include "lpcoreset/recursive.hpp"
#include "lpcoreset/sampling.hpp"
#include "lpcoreset/scores.hpp"
#include "lpcoreset/verify.hpp"

namespace lpcoreset::io {

using json = nlohmann::json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <class F>
auto checked(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

// --- scores -----------------------------------------------------------------

inline json to_json(const ScoreVector& s) {
  return {{"kind", to_string(s.kind)}, {"p", s.p}, {"tol", s.tol}, {"values", s.values}, {"total", s.sum()}};
}

inline ScoreVector scores_from_json(const json& j) {
  return checked("score record", [&] {
    ScoreVector s;
    s.kind = parse_score_kind(j.at("kind").get<std::string>());
    s.p = j.at("p").get<double>();
    s.tol = j.at("tol").get<double>();
    s.values = j.at("values").get<std::vector<double>>();
    return s;
  });
}

// --- row maps ---------------------------------------------------------------

inline json to_json(const RowMap& m) {
  json out = json::array();
  for (const auto& e : m.entries) out.push_back({{"src", e.src}, {"k", e.k}});
  return out;
}

inline RowMap rowmap_from_json(const json& j, double p) {
  return checked("row map", [&] {
    RowMap m;
    m.p = p;
    for (const auto& e : j) {
      const auto k = e.at("k").get<std::size_t>();
      if (k == 0) throw ParseError("row map: k must be >= 1");
      m.entries.push_back({e.at("src").get<std::size_t>(), k,
                           k == 1 ? 1.0 : std::pow(static_cast<double>(k), -1.0 / p)});
    }
    return m;
  });
}

// --- draws ------------------------------------------------------------------

inline json to_json(const SampleDraw& d) {
  json kept = json::array();
  for (const auto& k : d.kept) kept.push_back(json::array({k.index, k.weight}));
  return {{"seed", d.seed}, {"p", d.p}, {"source_rows", d.source_rows}, {"kept", kept}};
}

inline SampleDraw draw_from_json(const json& j) {
  return checked("draw record", [&] {
    SampleDraw d;
    d.seed = j.at("seed").get<std::uint64_t>();
    d.p = j.at("p").get<double>();
    d.source_rows = j.value("source_rows", std::size_t{0});
    for (const auto& k : j.at("kept")) {
      d.kept.push_back({k.at(0).get<std::size_t>(), k.at(1).get<double>()});
      if (!j.contains("source_rows")) d.source_rows = std::max(d.source_rows, d.kept.back().index + 1);
    }
    return d;
  });
}

// --- distortion reports -----------------------------------------------------

inline json to_json(const DistortionReport& r) {
  return {{"lambda_lower", r.lambda_lower}, {"lambda_est", r.lambda_est}, {"method", to_string(r.method)},
          {"witness", r.witness},           {"probes", r.probes},         {"restarts", r.restarts}};
}

inline DistortionReport report_from_json(const json& j) {
  return checked("distortion report", [&] {
    DistortionReport r;
    r.lambda_lower = j.at("lambda_lower").get<double>();
    r.lambda_est = j.at("lambda_est").get<double>();
    r.method = parse_distortion_method(j.at("method").get<std::string>());
    r.witness = j.at("witness").get<std::vector<double>>();
    r.probes = j.at("probes").get<std::size_t>();
    r.restarts = j.at("restarts").get<std::size_t>();
    return r;
  });
}

// --- recursion traces -------------------------------------------------------

inline json to_json(const RoundRecord& r) {
  json j = {{"round", r.round},       {"rows_in", r.rows_in},         {"rows_out", r.rows_out},
            {"lambda_est", r.lambda_est}, {"total_sens_est", r.total_sens_est},
            {"alpha", r.alpha ? json(*r.alpha) : json(nullptr)},
            {"rows_flat", r.rows_flat}, {"attempts", r.attempts}};
  if (r.sensitivity_bound > 0.0) {
    j["max_sensitivity"] = r.max_sensitivity;
    j["sensitivity_bound"] = r.sensitivity_bound;
    j["flatten_ok"] = r.flatten_ok;
  }
  if (r.leverage_bound > 0.0) {
    j["max_leverage"] = r.max_leverage;
    j["leverage_bound"] = r.leverage_bound;
  }
  return j;
}

inline json trace_to_json(const std::vector<RoundRecord>& trace) {
  json out = json::array();
  for (const auto& r : trace) out.push_back(to_json(r));
  return out;
}

}  // namespace lpcoreset::io
