// Command-line front end: single-setting runs, the full simulation grid, and
// regeneration of the calibration golden files.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "honestsets/competitors.hpp"
#include "honestsets/confset.hpp"
#include "honestsets/simlab.hpp"
#include "honestsets/stein.hpp"

namespace hs = honestsets;
using hs::simlab::SimConfig;
using json = nlohmann::json;

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

SimConfig config_from_json(const json& j) {
  SimConfig cfg;
  if (j.contains("n")) cfg.n = j["n"];
  if (j.contains("p")) cfg.p = j["p"];
  if (j.contains("s")) cfg.s = j["s"];
  if (j.contains("sigma2")) cfg.sigma2 = j["sigma2"];
  if (j.contains("design")) cfg.design = hs::simlab::design_from_name(j["design"]);
  if (j.contains("beta_mode")) cfg.beta_mode = hs::simlab::beta_mode_from_name(j["beta_mode"]);
  if (j.contains("b")) cfg.b = j["b"];
  if (j.contains("alpha")) cfg.alpha = j["alpha"];
  if (j.contains("lambda_rule")) cfg.lambda_rule = hs::simlab::lambda_rule_from_name(j["lambda_rule"]);
  if (j.contains("folds")) cfg.lambda_rule.folds = j["folds"];
  if (j.contains("methods")) cfg.methods = j["methods"].get<std::vector<std::string>>();
  if (j.contains("a_grid")) cfg.a_grid = j["a_grid"].get<std::vector<double>>();
  if (j.contains("replicates")) cfg.replicates = j["replicates"];
  if (j.contains("master_seed")) cfg.master_seed = j["master_seed"];
  if (j.contains("seed")) cfg.master_seed = j["seed"];
  if (j.contains("strict_multi")) cfg.strict_multi = j["strict_multi"];
  if (j.contains("setting_id")) cfg.setting_id = j["setting_id"];
  if (j.contains("cs_n_sim")) cfg.cs_n_sim = j["cs_n_sim"];
  if (j.contains("co_n_sim")) cfg.co_n_sim = j["co_n_sim"];
  if (j.contains("cl_n_sim")) cfg.cl_n_sim = j["cl_n_sim"];
  if (j.contains("E")) cfg.E = j["E"];
  if (j.contains("record_timing")) cfg.record_timing = j["record_timing"];
  return cfg;
}

int run_one(const SimConfig& cfg, const std::string& out_dir) {
  const auto records = hs::simlab::run_setting(cfg);
  const auto summary = hs::simlab::aggregate(records);
  hs::simlab::emit_outputs(records, summary, {cfg}, out_dir);
  for (const auto& row : summary) {
    std::cout << "setting " << row.setting_id << " " << row.method << ": coverage="
              << row.coverage << " mean_r_bar=" << row.mean_r_bar << " mean_k=" << row.mean_k
              << " errors=" << row.n_errors << "\n";
  }
  std::cout << "wrote " << out_dir << "/trials.csv, summary.csv, plots.gp\n";
  return 0;
}

int run_grid(bool paper, const std::string& out_dir, std::uint64_t seed, int replicates,
             const std::vector<std::string>& methods) {
  std::vector<double> b_values;
  for (int i = 1; i <= 10; ++i) b_values.push_back(0.1 * i);
  for (int i = 0; i < 10; ++i) b_values.push_back(1.4 + 0.4 * i);
  const std::vector<hs::simlab::Design> designs = {hs::simlab::Design::toeplitz,
                                                   hs::simlab::Design::expdecay,
                                                   hs::simlab::Design::equicorr};
  const std::vector<hs::simlab::BetaMode> modes = {hs::simlab::BetaMode::uniform,
                                                   hs::simlab::BetaMode::mixed};
  const std::vector<std::string> rules =
      paper ? std::vector<std::string>{"theoretical", "cv_min", "cv_1se"}
            : std::vector<std::string>{"theoretical"};

  std::vector<SimConfig> configs;
  int id = 0;
  for (const auto& rule : rules) {
    for (auto design : designs) {
      for (auto mode : modes) {
        for (double b : b_values) {
          SimConfig cfg;
          cfg.design = design;
          cfg.beta_mode = mode;
          cfg.b = b;
          cfg.lambda_rule = hs::simlab::lambda_rule_from_name(rule);
          cfg.methods = methods;
          cfg.replicates = replicates;
          cfg.master_seed = seed;
          cfg.setting_id = id++;
          configs.push_back(cfg);
        }
      }
    }
  }

  std::vector<hs::simlab::TrialRecord> all;
  for (const auto& cfg : configs) {
    std::cout << "[grid] setting " << cfg.setting_id << "/" << configs.size() << ": "
              << hs::simlab::design_name(cfg.design) << " "
              << hs::simlab::beta_mode_name(cfg.beta_mode) << " b=" << cfg.b << " rule="
              << hs::simlab::lambda_rule_name(cfg.lambda_rule) << std::endl;
    auto records = hs::simlab::run_setting(cfg);
    all.insert(all.end(), records.begin(), records.end());
  }
  const auto summary = hs::simlab::aggregate(all);
  hs::simlab::emit_outputs(all, summary, configs, out_dir);
  std::cout << "wrote " << out_dir << "/trials.csv, summary.csv, plots.gp\n";
  return 0;
}

int run_calibrate(const std::string& out_dir, std::uint64_t seed, bool with_eta_pilot,
                  int cs_big_n_sim);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-step projection-and-shrinkage confidence sets: simulation lab"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run one simulation setting");
  std::string config_path, out_dir = "./results";
  std::string design = "toeplitz", beta_mode = "uniform", rule = "1se", methods_csv = "stein_vol";
  std::string criterion = "volume";
  SimConfig cfg;
  run->add_option("--config", config_path, "JSON config file (overrides flags)");
  run->add_option("--design", design, "toeplitz|expdecay|equicorr");
  run->add_option("--beta-mode", beta_mode, "uniform|mixed");
  run->add_option("--b", cfg.b, "signal magnitude bound");
  run->add_option("--n", cfg.n, "per-half sample size");
  run->add_option("--p", cfg.p, "dimension");
  run->add_option("--s", cfg.s, "sparsity");
  run->add_option("--sigma2", cfg.sigma2, "noise variance");
  run->add_option("--alpha", cfg.alpha, "1 - confidence level");
  run->add_option("--lambda-rule", rule, "theoretical|val|cv|cv_min|1se|cv_1se");
  run->add_option("--methods", methods_csv,
                  "comma list: stein_vol,stein_diam,adaptive,oracle_lasso,tsl_vol,tsl_diam,naive"
                  " (stein/tsl expand with --criterion)");
  run->add_option("--criterion", criterion, "volume|diameter (for bare stein/tsl names)");
  run->add_option("--reps", cfg.replicates, "replicates");
  run->add_option("--seed", cfg.master_seed, "master seed");
  run->add_option("--out", out_dir, "output directory");
  bool strict_multi = false, timing = false;
  run->add_flag("--strict-multi", strict_multi, "use multi-candidate radii");
  run->add_flag("--timing", timing, "record wall times (breaks byte determinism)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Regenerate golden calibration constants");
  std::string cal_out = "data/golden";
  std::uint64_t cal_seed = 20240901;
  bool eta_pilot = false;
  int cs_big = 1000000;
  cal->add_option("--out", cal_out, "output directory for golden CSVs");
  cal->add_option("--seed", cal_seed, "master seed");
  cal->add_option("--cs-big-nsim", cs_big, "draw count for the headline c_s row");
  cal->add_flag("--eta-pilot", eta_pilot, "rerun the oracle eta pilot (slow)");

  // grid
  auto* grid = app.add_subcommand("grid", "Run the full simulation grid");
  bool paper = false;
  std::string grid_out = "./grid_results";
  std::uint64_t grid_seed = 42;
  int grid_reps = 100;
  std::string grid_methods = "stein_vol,stein_diam,adaptive,oracle_lasso,naive";
  grid->add_flag("--paper", paper, "all three lambda rules and both beta modes");
  grid->add_option("--out", grid_out, "output directory");
  grid->add_option("--seed", grid_seed, "master seed");
  grid->add_option("--reps", grid_reps, "replicates per setting");
  grid->add_option("--methods", grid_methods, "comma list of methods");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) {
          std::cerr << "cannot open config: " << config_path << "\n";
          return 1;
        }
        json j;
        f >> j;
        cfg = config_from_json(j);
        if (j.contains("out")) out_dir = j["out"];
      } else {
        cfg.design = hs::simlab::design_from_name(design);
        cfg.beta_mode = hs::simlab::beta_mode_from_name(beta_mode);
        cfg.lambda_rule = hs::simlab::lambda_rule_from_name(rule);
        cfg.methods.clear();
        for (std::string m : split_csv_list(methods_csv)) {
          if (m == "stein" || m == "tsl") {
            m += (criterion == "diameter") ? "_diam" : "_vol";
          }
          cfg.methods.push_back(m);
        }
        cfg.strict_multi = strict_multi;
        cfg.record_timing = timing;
      }
      return run_one(cfg, out_dir);
    }
    if (cal->parsed()) return run_calibrate(cal_out, cal_seed, eta_pilot, cs_big);
    if (grid->parsed()) {
      return run_grid(paper, grid_out, grid_seed, grid_reps, split_csv_list(grid_methods));
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

namespace {

int run_calibrate(const std::string& out_dir, std::uint64_t seed, bool with_eta_pilot,
                  int cs_big_n_sim) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  {
    std::ofstream f(out_dir + "/cs_constants.csv", std::ios::binary);
    f << "n,alpha,n_sim,master_seed,value\n";
    auto emit = [&](int n, double alpha, int n_sim) {
      const auto c = hs::stein::cs_constant_cached(alpha, n, n_sim, seed);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%llu,%.17g\n", n, alpha, n_sim,
                    static_cast<unsigned long long>(seed), c.value);
      f << buf;
      std::cout << "c_s(n=" << n << ", alpha=" << alpha << ", n_sim=" << n_sim
                << ") = " << c.value << "\n";
    };
    for (int n : {200, 400}) {
      for (double alpha : {0.05, 0.025}) emit(n, alpha, 100000);
    }
    emit(200, 0.025, cs_big_n_sim);
  }

  {
    std::ofstream f(out_dir + "/calibration_constants.csv", std::ios::binary);
    f << "kind,context,alpha,seed,n_sim,value\n";

    // Reference context: seeded (n=200, p=800, s=10) toeplitz draw.
    SimConfig cfg;
    cfg.n = 200; cfg.p = 800; cfg.s = 10; cfg.b = 2.0;
    cfg.design = hs::simlab::Design::toeplitz;
    cfg.master_seed = seed;
    hs::numkit::RngEngine eng(hs::numkit::RngStream(seed, 777));
    const auto data = hs::simlab::sample_dataset(cfg, eng);

    const double lam_sim = 0.5 * (2.0 * std::sqrt(2.0) + 0.01) *
                           std::sqrt(std::log(800.0) / 200.0);
    const auto cl = hs::competitors::estimate_cl(data.eval.X, data.fit.X, data.fit.y, 10,
                                                 lam_sim, 0.025, 500,
                                                 hs::numkit::RngStream(seed, 778));
    char buf[128];
    std::snprintf(buf, sizeof(buf), "c_l,%llx,%.17g,%llu,%d,%.17g\n",
                  static_cast<unsigned long long>(cl.context_digest), cl.alpha,
                  static_cast<unsigned long long>(seed), cl.n_sim, cl.value);
    f << buf;
    std::cout << "c_l = " << cl.value << "\n";

    hs::Matrix Xfull(400, 800);
    Xfull.topRows(200) = data.eval.X;
    Xfull.bottomRows(200) = data.fit.X;
    hs::Vector yfull(400);
    yfull.head(200) = data.eval.y;
    yfull.tail(200) = data.fit.y;
    double bb = -std::numeric_limits<double>::infinity();
    for (hs::Index j = 0; j < Xfull.cols(); ++j) {
      bb = std::max(bb, Xfull.col(j).dot(yfull) / Xfull.col(j).squaredNorm());
    }
    const double lam_val = 2.0 * std::sqrt(2.0) * std::sqrt(std::log(800.0) / 400.0);
    const auto co = hs::competitors::calibrate_c_o(Xfull, lam_val, 10, 0.05, 500,
                                                   hs::numkit::RngStream(seed, 779), bb);
    std::snprintf(buf, sizeof(buf), "c_o,%llx,%.17g,%llu,%d,%.17g\n",
                  static_cast<unsigned long long>(co.context_digest), co.alpha,
                  static_cast<unsigned long long>(seed), co.n_sim, co.value);
    f << buf;
    std::cout << "c_o = " << co.value << "\n";

    double eta_cv = hs::simlab::oracle_eta_cv();
    double eta_1se = hs::simlab::oracle_eta_1se();
    if (with_eta_pilot) {
      // Overall oracle coverage across b > 0.3 settings at desk scale, for each
      // eta in the pilot grid; picks the closest to 1 - alpha.
      const std::vector<double> etas = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0,
                                        2.25, 2.5, 2.75, 3.0};
      for (auto kind : {hs::solvers::LambdaKind::cv_min, hs::solvers::LambdaKind::cv_1se}) {
        std::vector<int> hit(etas.size(), 0);
        int total = 0;
        for (auto design : {hs::simlab::Design::toeplitz, hs::simlab::Design::expdecay,
                            hs::simlab::Design::equicorr}) {
          for (double b : {0.4, 1.0, 2.0, 5.0}) {
            SimConfig pc;
            pc.design = design; pc.b = b; pc.s = 10; pc.master_seed = seed;
            for (int rep = 0; rep < 25; ++rep) {
              hs::numkit::RngStream st(seed, 9000 + static_cast<std::uint64_t>(total));
              hs::numkit::RngEngine de(st.substream(1));
              const auto d = hs::simlab::sample_dataset(pc, de);
              hs::Matrix Xf(2 * pc.n, pc.p);
              Xf.topRows(pc.n) = d.eval.X;
              Xf.bottomRows(pc.n) = d.fit.X;
              hs::Vector yf(2 * pc.n);
              yf.head(pc.n) = d.eval.y;
              yf.tail(pc.n) = d.fit.y;
              double bmax = -std::numeric_limits<double>::infinity();
              for (hs::Index j = 0; j < Xf.cols(); ++j) {
                bmax = std::max(bmax, Xf.col(j).dot(yf) / Xf.col(j).squaredNorm());
              }
              const double lv = 2.0 * std::sqrt(2.0) * std::sqrt(std::log(800.0) / 400.0);
              const auto c = hs::competitors::calibrate_c_o(Xf, lv, pc.s, pc.alpha, 120,
                                                            st.substream(2), bmax);
              hs::solvers::LambdaRule lr;
              lr.kind = kind;
              const double lam = hs::solvers::select_lambda(Xf, yf, 1.0, lr, st.substream(3));
              const auto fit = hs::solvers::lasso(Xf, yf, lam);
              const double dist2 = (Xf * (fit.coefficients - d.beta)).squaredNorm() / (2.0 * pc.n);
              const double base_r2 = c.value * pc.s * std::log(800.0) / (2.0 * pc.n);
              for (std::size_t e = 0; e < etas.size(); ++e) {
                if (dist2 <= etas[e] * base_r2) ++hit[e];
              }
              ++total;
            }
          }
        }
        double best_eta = etas[0];
        double best_gap = 2.0;
        for (std::size_t e = 0; e < etas.size(); ++e) {
          const double cov = static_cast<double>(hit[e]) / total;
          const double gap = std::abs(cov - 0.95);
          std::cout << "eta pilot " << (kind == hs::solvers::LambdaKind::cv_min ? "cv" : "1se")
                    << " eta=" << etas[e] << " coverage=" << cov << "\n";
          if (gap < best_gap) { best_gap = gap; best_eta = etas[e]; }
        }
        if (kind == hs::solvers::LambdaKind::cv_min) eta_cv = best_eta; else eta_1se = best_eta;
      }
    }
    std::snprintf(buf, sizeof(buf), "eta_cv,pilot,%.17g,%llu,%d,%.17g\n", 0.05,
                  static_cast<unsigned long long>(seed), 25, eta_cv);
    f << buf;
    std::snprintf(buf, sizeof(buf), "eta_1se,pilot,%.17g,%llu,%d,%.17g\n", 0.05,
                  static_cast<unsigned long long>(seed), 25, eta_1se);
    f << buf;
    std::cout << "eta_cv = " << eta_cv << ", eta_1se = " << eta_1se << "\n";
  }

  std::cout << "wrote " << out_dir << "/cs_constants.csv, calibration_constants.csv\n";
  return 0;
}

}  // namespace
