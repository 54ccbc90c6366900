#pragma once

// JSON and CSV emission for verification runs. Reports carry no timestamps
// or host data, so identical configurations produce identical bytes.
// Non-finite numbers serialize as null.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "inducing/verify.hpp"

namespace inducing {

using Json = nlohmann::ordered_json;

inline Json to_json(const OrbitOptions& o) {
  return {{"n_orbits", o.n_orbits}, {"n_iters", o.n_iters}, {"burn_in", o.burn_in},
          {"seed", o.seed}, {"threads", o.threads}};
}

inline Json to_json(const BlockOptions& o) {
  return {{"n_max_block", o.n_max_block}, {"n_orbits", o.n_orbits}, {"n_iters", o.n_iters},
          {"burn_in", o.burn_in}, {"segment", o.segment}};
}

inline Json to_json(const EvidenceRow& r) {
  return {{"N", r.N}, {"partial_sum", r.partial_sum}, {"increment", r.increment}, {"bound", r.bound}};
}

inline Json to_json(const EstimatorReport& r) {
  Json ev = Json::array();
  for (const auto& row : r.evidence) ev.push_back(to_json(row));
  return {{"method", r.method},
          {"value", r.value},
          {"std_error", r.std_error},
          {"truncation_bound", r.truncation_bound},
          {"samples", r.samples},
          {"verdict", to_string(r.verdict)},
          {"resampled", r.resampled},
          {"evidence", std::move(ev)},
          {"warnings", r.warnings}};
}

inline Json to_json(const Comparison& c) {
  return {{"difference", c.difference}, {"tolerance", c.tolerance}, {"pass", c.pass}};
}

inline Json to_json(const BlockEntropyResult& b) {
  Json rows = Json::array();
  for (const auto& r : b.rows)
    rows.push_back({{"n", r.n}, {"h_over_n", r.h_over_n}, {"std_error", r.std_error},
                    {"distinct_blocks", r.distinct_blocks}, {"min_count", r.min_count}});
  return {{"rows", std::move(rows)}, {"warnings", b.warnings}};
}

inline Json to_json(const SecondMomentReport& s) {
  Json rows = Json::array();
  for (const auto& r : s.partial_sums) rows.push_back(to_json(r));
  return {{"applicable", s.applicable},
          {"sup_derivative", s.sup_derivative},
          {"partial_sums", std::move(rows)},
          {"tail_exponent", s.tail_exponent},
          {"verdict", to_string(s.verdict)},
          {"note", s.note}};
}

inline Json to_json(const FormulaConfig& c) {
  Json j = {{"command", "verify"}, {"map", c.map}};
  if (c.map == "lorenz" || c.map == "lsv") j["alpha"] = c.alpha_or_default();
  if (c.map == "singular") j["gamma"] = c.gamma;
  if (c.map == "skewprod") {
    j["alpha0"] = c.alpha0;
    j["alpha1"] = c.alpha1;
    j["p0"] = c.p0;
  }
  if (c.map == "lsv" || c.map == "skewprod") j["n_max"] = c.n_max;
  j["bins"] = c.bins;
  j["orbit"] = to_json(c.orbit);
  j["block"] = c.run_block ? to_json(c.block) : Json(nullptr);
  j["sigmas"] = c.sigmas;
  return j;
}

inline Json to_json(const FormulaReport& r) {
  Json j;
  j["command"] = "verify";
  j["map"] = r.map;
  j["config"] = to_json(r.config);
  j["outcome"] = to_string(r.outcome);
  j["verdict"] = r.verdict;
  j["finiteness"] = to_json(r.finiteness);
  j["rohlin"] = to_json(r.rohlin);
  j["birkhoff"] = to_json(r.birkhoff);
  j["block_entropy"] = r.block ? to_json(*r.block) : Json(nullptr);
  j["comparison"] = to_json(r.comparison);
  j["second_moment"] = to_json(r.second_moment);
  if (r.lebesgue_sup_deviation) {
    j["lebesgue"] = {{"sup_density_deviation", *r.lebesgue_sup_deviation},
                     {"lyapunov_quadrature", *r.lebesgue_quadrature}};
  }
  j["warnings"] = r.warnings;
  return j;
}

inline Json to_json(const ConvergenceReport& c) {
  Json rows = Json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"N", r.N},
                    {"sum_a", r.sum_a},
                    {"sum_na", r.sum_na},
                    {"sum_phi", r.sum_phi},
                    {"sum_nphi", r.sum_nphi},
                    {"tail_a", r.tail_a},
                    {"tail_na", r.tail_na},
                    {"tail_phi", r.tail_phi},
                    {"minorant_nphi", r.minorant_nphi},
                    {"phi_bracket", {r.phi_bracket_lo, r.phi_bracket_hi}}});
  Json dbl = Json::array();
  for (const auto& d : c.doublings) dbl.push_back({{"N", d.N}, {"increment", d.increment}, {"bound", d.bound}});
  return {{"rows", std::move(rows)},
          {"doublings", std::move(dbl)},
          {"verdicts",
           {{"sum_a", to_string(c.sum_a)},
            {"sum_na", to_string(c.sum_na)},
            {"sum_phi", to_string(c.sum_phi)},
            {"sum_nphi", to_string(c.sum_nphi)}}},
          {"phi_in_bracket", c.phi_in_bracket},
          {"weighted_tail_inequality", c.weighted_tail_holds},
          {"nphi_increment", c.nphi_increment},
          {"nphi_target", c.nphi_target},
          {"nphi_increment_ok", c.nphi_increment_ok},
          {"conclusive", c.conclusive},
          {"matches_expected", c.matches_lemma()}};
}

inline Json to_json(const JacobianIntegral& j) {
  return {{"truncated", j.truncated}, {"tail_corrected", j.tail_corrected},
          {"lower", j.lower}, {"upper", j.upper}, {"rho", j.rho}};
}

inline Json to_json(const CounterexampleConfig& c) {
  return {{"command", "counterexample"}, {"n_max_list", c.n_max_list},
          {"layout_n_max", c.layout_n_max}, {"orbit", to_json(c.orbit)}, {"sigmas", c.sigmas}};
}

inline Json to_json(const CounterexampleReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.formula.rows)
    rows.push_back({{"n_max", row.n_max},
                    {"finiteness", to_json(row.finiteness)},
                    {"jacobian_integral", to_json(row.jacobian)}});
  Json layout = nullptr;
  if (r.formula.layout_n_max > 0)
    layout = {{"n_max", r.formula.layout_n_max},
              {"birkhoff", to_json(r.formula.layout_birkhoff)},
              {"exact", r.formula.layout_exact},
              {"comparison", to_json(r.formula.layout_comparison)}};
  Json j;
  j["command"] = "counterexample";
  j["config"] = to_json(r.config);
  j["outcome"] = to_string(r.outcome);
  j["series"] = to_json(r.lemma);
  j["formula"] = {{"rows", std::move(rows)},
                  {"entropy_divergent", r.formula.entropy_divergent},
                  {"integral_finite", r.formula.integral_finite},
                  {"stable_three_figures", r.formula.stable},
                  {"relative_spread", r.formula.relative_spread},
                  {"layout", std::move(layout)},
                  {"verdict", r.formula.verdict}};
  return j;
}

inline Json to_json(const SkewConfig& c) {
  return {{"command", "skew"}, {"lambda", c.lambda}, {"n_max", c.n_max}, {"n_pairs", c.n_pairs},
          {"conjugacy_samples", c.conjugacy_samples}, {"orbit", to_json(c.orbit)}};
}

inline Json to_json(const SkewReport& r) {
  const auto& inj = r.injectivity;
  Json witness = nullptr;
  if (inj.witness)
    witness = {{"x", inj.witness->x}, {"x_prime", inj.witness->xp}, {"y", inj.witness->y},
               {"z", inj.witness->z}, {"gap", inj.witness->gap}};
  const auto& u = r.integral;
  Json j;
  j["command"] = "skew";
  j["config"] = to_json(r.config);
  j["outcome"] = to_string(r.outcome);
  j["injectivity"] = {{"n_pairs", inj.n_pairs},
                      {"cross_cell_pairs", inj.cross_cell_pairs},
                      {"same_cell_pairs", inj.same_cell_pairs},
                      {"min_gap_over_minorant", inj.min_gap_over_minorant},
                      {"pass", inj.pass},
                      {"witness", std::move(witness)}};
  j["conjugacy"] = {{"samples", r.conjugacy.samples}, {"mismatches", r.conjugacy.mismatches},
                    {"exact", r.conjugacy.exact()}};
  j["contraction"] = {{"samples", r.contraction.samples},
                      {"max_relative_error", r.contraction.max_relative_error}};
  j["slots_disjoint"] = r.slots_disjoint;
  j["unstable_integral"] = {{"birkhoff", to_json(u.birkhoff)},
                            {"quotient_value", u.quotient_value},
                            {"tail_corrected", u.tail_corrected},
                            {"bracket", {u.lower, u.upper}},
                            {"comparison", to_json(u.comparison)},
                            {"finiteness", to_json(u.finiteness)},
                            {"integral_finite", u.integral_finite},
                            {"entropy_divergent", u.entropy_divergent}};
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// CSV side files

namespace detail {
inline void csv_precision(std::ostream& out) { out.precision(17); }
}  // namespace detail

inline void write_block_csv(std::ostream& out, const BlockEntropyResult& b) {
  detail::csv_precision(out);
  out << "n,h_over_n,std_error,distinct_blocks,min_count\n";
  for (const auto& r : b.rows)
    out << r.n << ',' << r.h_over_n << ',' << r.std_error << ',' << r.distinct_blocks << ','
        << r.min_count << '\n';
}

/// Bin edges and density values of a histogram measure.
inline void write_density_csv(std::ostream& out, const std::vector<double>& edges,
                              const std::vector<double>& masses) {
  detail::csv_precision(out);
  out << "lo,hi,mass,density\n";
  for (std::size_t i = 0; i < masses.size(); ++i)
    out << edges[i] << ',' << edges[i + 1] << ',' << masses[i] << ','
        << masses[i] / (edges[i + 1] - edges[i]) << '\n';
}

/// Counterexample sequence at roughly log-spaced n up to n_top.
inline void write_sequence_csv(std::ostream& out, long n_top, int per_decade = 20) {
  detail::csv_precision(out);
  out << "n,a_n,n_a_n,phi_a_n,n_phi_a_n\n";
  long last = 0;
  const int steps = static_cast<int>(std::ceil(std::log10(static_cast<double>(n_top)) * per_decade));
  for (int i = 0; i <= steps; ++i) {
    long n = std::lround(std::pow(10.0, static_cast<double>(i) / per_decade));
    n = std::min(std::max(n, 2L), n_top);
    if (n <= last) continue;
    last = n;
    const double t = counterexample_phi_value(n);
    const double a = phi_inverse(t);
    const double d = static_cast<double>(n);
    out << n << ',' << a << ',' << d * a << ',' << t << ',' << d * t << '\n';
  }
}

}  // namespace inducing
