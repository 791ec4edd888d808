#pragma once

// JSON forms of traces, problems and summaries. Indices are 0-based.

#include "imp/designs.hpp"
#include "imp/imp.hpp"
#include "imp/stats.hpp"

#include "json.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace imp {

using Json = nlohmann::ordered_json;

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const std::vector<Index>& v) { return Json(v); }

inline Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

inline Matrix matrix_from_json(const Json& j) {
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Index>(row.size()) != cols) throw std::invalid_argument("ragged matrix in JSON");
    for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline Json to_json(const ImpTrace& trace) {
  Json rounds = Json::array();
  for (std::size_t k = 0; k < trace.rounds.size(); ++k) {
    const ImpRound& r = trace.rounds[k];
    rounds.push_back(Json{{"round", k},
                          {"active", r.mask.active_indices()},
                          {"weights", to_json(r.weights)},
                          {"pruned", r.pruned},
                          {"pruned_magnitudes", r.pruned_magnitudes}});
  }
  return Json{{"p", trace.final_mask.dim()},
              {"rounds", std::move(rounds)},
              {"prune_order", trace.prune_order()},
              {"final_weights", to_json(trace.final_weights)}};
}

inline Json to_json(const FeatureSet& fs) {
  return Json{{"n", fs.n()},
              {"p", fs.p()},
              {"normalized", fs.normalized()},
              {"phi", to_json(fs.phi())},
              {"targets", to_json(fs.targets())}};
}

inline FeatureSet feature_set_from_json(const Json& j) {
  return FeatureSet(matrix_from_json(j.at("phi")), vector_from_json(j.at("targets")));
}

inline Json to_json(const SparseProblem& sp) {
  return Json{{"features", to_json(sp.features)},
              {"signal", to_json(sp.signal)},
              {"support", sp.support},
              {"noise", to_json(sp.noise)},
              {"noise_kind", to_string(sp.noise_kind)},
              {"sigma", sp.sigma},
              {"gamma", sp.gamma},
              {"amplitude_law", to_string(sp.law)},
              {"delta_pw", sp.delta_pw},
              {"seed", sp.seed}};
}

inline SparseProblem sparse_problem_from_json(const Json& j) {
  return SparseProblem{feature_set_from_json(j.at("features")),
                       vector_from_json(j.at("signal")),
                       j.at("support").get<std::vector<Index>>(),
                       vector_from_json(j.at("noise")),
                       parse_noise_kind(j.at("noise_kind").get<std::string>()),
                       j.at("sigma").get<double>(),
                       j.at("gamma").get<double>(),
                       parse_amplitude_law(j.at("amplitude_law").get<std::string>()),
                       j.at("delta_pw").get<double>(),
                       j.at("seed").get<std::uint64_t>()};
}

inline Json to_json(const McSummary& s) {
  Json counts = Json::object();
  for (const auto& [name, c] : s.failure_counts) counts[name] = c;
  return Json{{"trials", s.trials},
              {"failures", s.failures},
              {"failure_counts", std::move(counts)},
              {"failure_rate", s.failure_rate},
              {"ci95", Json::array({s.ci.lower, s.ci.upper})},
              {"budget", s.budget},
              {"pass", s.pass}};
}

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace imp
