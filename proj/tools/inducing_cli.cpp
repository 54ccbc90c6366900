// Command-line driver: verify, counterexample, skew.
//
// Exit codes: 0 pass, 1 fail, 2 inconclusive, 64 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "inducing/report.hpp"

namespace fs = std::filesystem;
using namespace inducing;

namespace {

constexpr int kUsage = 64;

struct Globals {
  std::string out_dir;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool quiet = false;
};

struct OrbitFlags {
  long n_orbits, n_iters, burn_in;
};

void add_orbit_flags(CLI::App* sub, OrbitFlags& o) {
  sub->add_option("--n-orbits", o.n_orbits, "Independent orbits for Birkhoff averages")->capture_default_str();
  sub->add_option("--n-iters", o.n_iters, "Iterations per orbit")->capture_default_str();
  sub->add_option("--burn-in", o.burn_in, "Discarded initial iterations")->capture_default_str();
}

OrbitOptions orbit_options(const OrbitFlags& f, const Globals& g) {
  return {f.n_orbits, f.n_iters, f.burn_in, g.seed, g.threads};
}

fs::path output_dir(const Globals& g) {
  std::string d = g.out_dir;
  if (d.empty())
    if (const char* env = std::getenv("INDUCING_OUT_DIR")) d = env;
  if (d.empty()) d = ".";
  fs::create_directories(d);
  return d;
}

template <class Writer>
void write_file(const fs::path& p, Writer&& w) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  w(out);
}

void print_estimator(const char* label, const EstimatorReport& r) {
  std::cout << "  " << label << ": " << r.value << " +/- " << r.std_error;
  if (r.truncation_bound > 0.0) std::cout << " (truncation " << r.truncation_bound << ")";
  std::cout << '\n';
}

// ---------------------------------------------------------------------------

int run_verify(const FormulaConfig& cfg, const Globals& g) {
  const auto rep = entropy_formula_report(cfg);
  const fs::path dir = output_dir(g);
  const std::string stem = "verify_" + cfg.map;
  std::vector<std::string> outputs{stem + ".json"};
  if (rep.block) outputs.push_back(stem + "_block.csv");
  if (!rep.density_masses.empty()) outputs.push_back(stem + "_density.csv");

  Json j = to_json(rep);
  j["outputs"] = outputs;
  write_file(dir / outputs[0], [&](std::ostream& o) { o << dump(j); });
  if (rep.block) write_file(dir / (stem + "_block.csv"), [&](std::ostream& o) { write_block_csv(o, *rep.block); });
  if (!rep.density_masses.empty())
    write_file(dir / (stem + "_density.csv"),
               [&](std::ostream& o) { write_density_csv(o, rep.density_edges, rep.density_masses); });

  if (!g.quiet) {
    std::cout.precision(10);
    std::cout << "verify " << cfg.map << ": " << to_string(rep.outcome) << "\n";
    std::cout << "  finiteness: " << to_string(rep.finiteness.verdict) << '\n';
    print_estimator("jacobian integral", rep.rohlin);
    print_estimator("lyapunov average", rep.birkhoff);
    std::cout << "  |difference| " << rep.comparison.difference << " vs tolerance " << rep.comparison.tolerance << '\n';
    if (rep.block && !rep.block->rows.empty()) {
      const auto& last = rep.block->rows.back();
      std::cout << "  block entropy H_" << last.n << "/" << last.n << ": " << last.h_over_n << " +/- "
                << last.std_error << '\n';
    }
    std::cout << "  second moment of return time: " << to_string(rep.second_moment.verdict);
    if (!rep.second_moment.note.empty()) std::cout << " (" << rep.second_moment.note << ")";
    std::cout << '\n' << "  " << rep.verdict << '\n';
    for (const auto& w : rep.warnings) std::cout << "  warning: " << w << '\n';
    std::cout << "  report: " << (dir / outputs[0]).string() << '\n';
  }
  return exit_code(rep.outcome);
}

int run_counterexample(const CounterexampleConfig& cfg, const Globals& g) {
  const auto rep = counterexample_report(cfg);
  const fs::path dir = output_dir(g);
  std::vector<std::string> outputs{"counterexample.json", "counterexample_sequence.csv"};
  Json j = to_json(rep);
  j["outputs"] = outputs;
  write_file(dir / outputs[0], [&](std::ostream& o) { o << dump(j); });
  long top = 0;
  for (long n : cfg.n_max_list) top = std::max(top, n);
  write_file(dir / outputs[1], [&](std::ostream& o) { write_sequence_csv(o, top); });

  if (!g.quiet) {
    std::cout.precision(10);
    std::cout << "counterexample: " << to_string(rep.outcome) << '\n';
    std::cout << "  series: sum a_n " << to_string(rep.lemma.sum_a) << ", sum n a_n " << to_string(rep.lemma.sum_na)
              << ", sum phi(a_n) " << to_string(rep.lemma.sum_phi) << ", sum n phi(a_n) "
              << to_string(rep.lemma.sum_nphi) << '\n';
    for (const auto& r : rep.formula.rows)
      std::cout << "  n_max " << r.n_max << ": entropy " << to_string(r.finiteness.verdict)
                << ", jacobian integral " << r.jacobian.tail_corrected << " in [" << r.jacobian.lower << ", "
                << r.jacobian.upper << "]\n";
    std::cout << "  " << rep.formula.verdict << '\n';
    std::cout << "  report: " << (dir / outputs[0]).string() << '\n';
  }
  return exit_code(rep.outcome);
}

int run_skew(const SkewConfig& cfg, long orbit_steps, const Globals& g) {
  const auto rep = skew_report(cfg);
  const fs::path dir = output_dir(g);
  std::vector<std::string> outputs{"skew.json"};
  if (orbit_steps > 0) outputs.push_back("skew_orbit.csv");
  Json j = to_json(rep);
  j["outputs"] = outputs;
  write_file(dir / outputs[0], [&](std::ostream& o) { o << dump(j); });
  if (orbit_steps > 0) {
    const SkewSystem sys(build_counterexample_scheme(cfg.n_max), cfg.lambda);
    const InducingScheme& s = sys.scheme();
    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& c : s.cells) cumulative.push_back(acc += static_cast<double>(c.return_time) * c.length());
    Rng rng(cfg.orbit.seed, 99);
    const SkewState start = sample_tower_start(sys, cumulative, rng);
    write_file(dir / outputs[1], [&](std::ostream& o) { write_orbit_csv(o, sys, start, orbit_steps); });
  }

  if (!g.quiet) {
    std::cout.precision(10);
    std::cout << "skew lambda=" << cfg.lambda << ": " << to_string(rep.outcome) << '\n';
    std::cout << "  injectivity: " << (rep.injectivity.pass ? "PASS" : "FAIL") << " on " << rep.injectivity.n_pairs
              << " pairs\n";
    std::cout << "  conjugacy: " << rep.conjugacy.mismatches << " mismatches in " << rep.conjugacy.samples << '\n';
    std::cout << "  return slots disjoint: " << (rep.slots_disjoint ? "yes" : "no") << '\n';
    print_estimator("unstable jacobian average", rep.integral.birkhoff);
    std::cout << "  quotient integral " << rep.integral.quotient_value << ", untruncated in [" << rep.integral.lower
              << ", " << rep.integral.upper << "]\n";
    std::cout << "  entropy of quotient: " << to_string(rep.integral.finiteness.verdict) << '\n';
    std::cout << "  report: " << (dir / outputs[0]).string() << '\n';
  }
  return exit_code(rep.outcome);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy formula checks for inducing schemes and towers"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value configuration file; command-line flags win");
  app.allow_config_extras(false);

  Globals g;
  app.add_option("--out-dir", g.out_dir, "Output directory (default $INDUCING_OUT_DIR or .)");
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "No summary on stdout");

  // verify
  FormulaConfig vcfg;
  OrbitFlags vorb{vcfg.orbit.n_orbits, vcfg.orbit.n_iters, vcfg.orbit.burn_in};
  double alpha = std::nan("");
  bool no_block = false;
  auto* verify = app.add_subcommand("verify", "Compare Jacobian integral and Lyapunov average for a map");
  verify->add_option("map", vcfg.map, "doubling | lorenz | lsv | singular | skewprod")
      ->required()
      ->check(CLI::IsMember(known_maps()));
  verify->add_option("--alpha", alpha, "Exponent (lorenz default 0.25, lsv default 0.5)");
  verify->add_option("--gamma", vcfg.gamma, "Singular map exponent")->capture_default_str();
  verify->add_option("--alpha0", vcfg.alpha0, "Skew product: first exponent")->capture_default_str();
  verify->add_option("--alpha1", vcfg.alpha1, "Skew product: second exponent")->capture_default_str();
  verify->add_option("--p0", vcfg.p0, "Skew product: weight of the first exponent")->capture_default_str();
  verify->add_option("--n-max", vcfg.n_max, "Return-time truncation for LSV schemes")->capture_default_str();
  verify->add_option("--bins", vcfg.bins, "Ulam bins")->capture_default_str();
  add_orbit_flags(verify, vorb);
  verify->add_option("--block-max", vcfg.block.n_max_block, "Longest block for block entropy")->capture_default_str();
  verify->add_option("--block-orbits", vcfg.block.n_orbits, "Orbits for block entropy")->capture_default_str();
  verify->add_option("--block-iters", vcfg.block.n_iters, "Symbols per orbit for block entropy")->capture_default_str();
  verify->add_flag("--no-block", no_block, "Skip block entropy");
  verify->add_option("--sigmas", vcfg.sigmas, "Comparison tolerance in standard errors")->capture_default_str();

  // counterexample
  CounterexampleConfig ccfg;
  OrbitFlags corb{ccfg.orbit.n_orbits, ccfg.orbit.n_iters, ccfg.orbit.burn_in};
  auto* counter = app.add_subcommand("counterexample", "Series certification and failure of the formula");
  counter->add_option("--n-max-list", ccfg.n_max_list, "Truncation levels")
      ->delimiter(',')
      ->capture_default_str();
  counter->add_option("--layout-n-max", ccfg.layout_n_max, "Truncation of the laid-out interval map")
      ->capture_default_str();
  add_orbit_flags(counter, corb);
  counter->add_option("--sigmas", ccfg.sigmas, "Comparison tolerance in standard errors")->capture_default_str();

  // skew
  SkewConfig scfg;
  OrbitFlags sorb{scfg.orbit.n_orbits, scfg.orbit.n_iters, scfg.orbit.burn_in};
  long orbit_steps = 0;
  auto* skew = app.add_subcommand("skew", "Injective skew system over the counterexample tower");
  skew->add_option("--lambda", scfg.lambda, "Vertical contraction in (0, 1/2]")->capture_default_str();
  skew->add_option("--n-max", scfg.n_max, "Return-time truncation")->capture_default_str();
  skew->add_option("--pairs", scfg.n_pairs, "Injectivity test pairs")->capture_default_str();
  skew->add_option("--conjugacy-samples", scfg.conjugacy_samples, "Conjugacy test states")->capture_default_str();
  add_orbit_flags(skew, sorb);
  skew->add_option("--orbit-csv", orbit_steps, "Write this many orbit steps to skew_orbit.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (verify->parsed()) {
      if (!std::isnan(alpha)) vcfg.alpha = alpha;
      vcfg.orbit = orbit_options(vorb, g);
      vcfg.run_block = !no_block;
      return run_verify(vcfg, g);
    }
    if (counter->parsed()) {
      ccfg.orbit = orbit_options(corb, g);
      return run_counterexample(ccfg, g);
    }
    scfg.orbit = orbit_options(sorb, g);
    return run_skew(scfg, orbit_steps, g);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
