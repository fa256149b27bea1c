#include "honestsets/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "honestsets/competitors.hpp"
#include "honestsets/confset.hpp"
#include "honestsets/stein.hpp"

namespace honestsets::simlab {

std::string design_name(Design d) {
  switch (d) {
    case Design::toeplitz: return "toeplitz";
    case Design::expdecay: return "expdecay";
    case Design::equicorr: return "equicorr";
  }
  return "?";
}

std::string beta_mode_name(BetaMode m) { return m == BetaMode::uniform ? "uniform" : "mixed"; }

std::string lambda_rule_name(const solvers::LambdaRule& r) {
  switch (r.kind) {
    case solvers::LambdaKind::theoretical: return "theoretical";
    case solvers::LambdaKind::cv_min: return "cv_min";
    case solvers::LambdaKind::cv_1se: return "cv_1se";
  }
  return "?";
}

Design design_from_name(const std::string& name) {
  if (name == "toeplitz") return Design::toeplitz;
  if (name == "expdecay") return Design::expdecay;
  if (name == "equicorr") return Design::equicorr;
  throw std::invalid_argument("unknown design: " + name);
}

BetaMode beta_mode_from_name(const std::string& name) {
  if (name == "uniform") return BetaMode::uniform;
  if (name == "mixed") return BetaMode::mixed;
  throw std::invalid_argument("unknown beta mode: " + name);
}

solvers::LambdaRule lambda_rule_from_name(const std::string& name, int folds) {
  solvers::LambdaRule rule;
  rule.folds = folds;
  if (name == "theoretical" || name == "val") {
    rule.kind = solvers::LambdaKind::theoretical;
  } else if (name == "cv_min" || name == "cv") {
    rule.kind = solvers::LambdaKind::cv_min;
  } else if (name == "cv_1se" || name == "1se") {
    rule.kind = solvers::LambdaKind::cv_1se;
  } else {
    throw std::invalid_argument("unknown lambda rule: " + name);
  }
  return rule;
}

// Pilot-calibrated factors for the oracle's data-dependent lambda choices;
// regenerate with `honestsets calibrate`.
double oracle_eta_cv() { return 0.5; }
double oracle_eta_1se() { return 0.5; }

namespace {

std::vector<double> default_a_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 80; ++i) g.push_back(0.05 * i);
  return g;
}

struct ReplicateContext {
  const SimConfig& config;
  int replicate;
  numkit::RngStream stream;
  SampledData data;
  Vector mu_eval;
  stein::SureConstant cs;

  // lazily computed shared pieces
  std::optional<double> lambda_prime;
  std::optional<solvers::PenalizedFit> fit_prime;

  double half_lambda() {
    if (!lambda_prime) {
      lambda_prime = solvers::select_lambda(data.fit.X, data.fit.y,
                                            std::sqrt(config.sigma2), config.lambda_rule,
                                            stream.substream(11));
    }
    return *lambda_prime;
  }

  const solvers::PenalizedFit& half_fit() {
    if (!fit_prime) fit_prime = solvers::lasso(data.fit.X, data.fit.y, half_lambda());
    return *fit_prime;
  }
};

TrialRecord base_record(const ReplicateContext& ctx, const std::string& method) {
  TrialRecord rec;
  rec.setting_id = ctx.config.setting_id;
  rec.replicate = ctx.replicate;
  rec.method = method;
  return rec;
}

TrialRecord run_stein_method(ReplicateContext& ctx, const std::string& method,
                             confset::Criterion criterion) {
  TrialRecord rec = base_record(ctx, method);
  const SimConfig& cfg = ctx.config;
  const std::vector<double> a_grid = cfg.a_grid.empty() ? default_a_grid() : cfg.a_grid;

  std::vector<IndexSet> cand_sets =
      confset::generate_candidates(ctx.half_fit().coefficients, ctx.half_lambda(), a_grid);

  confset::BuildOptions opt;
  opt.criterion = criterion;
  opt.E = cfg.E;
  opt.strict_multi = cfg.strict_multi;
  opt.M = static_cast<int>(cand_sets.size());

  std::vector<confset::EllipsoidCS> sets;
  sets.reserve(cand_sets.size());
  for (std::size_t m = 0; m < cand_sets.size(); ++m) {
    confset::CandidateSet cand = confset::make_candidate(ctx.data.eval.X, cand_sets[m]);
    confset::EllipsoidCS cs = confset::build_two_step(ctx.data.eval, cand, cfg.alpha, ctx.cs, opt);
    cs.provenance = static_cast<int>(m);
    sets.push_back(std::move(cs));
  }
  const confset::EllipsoidCS& best = confset::select_best(sets, criterion);

  rec.covered = confset::contains(best, ctx.mu_eval) ? 1 : 0;
  const confset::Geometry geo = confset::geometry(best);
  rec.r_bar = geo.geo_avg_radius;
  rec.r_A = best.r_A;
  rec.r_perp = best.r_perp;
  rec.k = static_cast<int>(best.k());
  rec.m_star = best.provenance;
  return rec;
}

TrialRecord run_naive(ReplicateContext& ctx) {
  TrialRecord rec = base_record(ctx, "naive");
  const confset::BallCS ball =
      confset::naive_chi2_ball(ctx.data.eval.y, ctx.config.sigma2, ctx.config.alpha);
  rec.covered = confset::contains(ball, ctx.mu_eval) ? 1 : 0;
  rec.r_bar = rec.r_perp = ball.radius;
  return rec;
}

TrialRecord run_adaptive(ReplicateContext& ctx) {
  TrialRecord rec = base_record(ctx, "adaptive");
  const Vector mu_hat = ctx.data.eval.X * ctx.half_fit().coefficients;
  const confset::BallCS ball = competitors::adaptive_cs_from_center(
      ctx.data.eval.y, mu_hat, ctx.config.sigma2, ctx.config.alpha);
  rec.covered = confset::contains(ball, ctx.mu_eval) ? 1 : 0;
  rec.r_bar = rec.r_perp = ball.radius;
  return rec;
}

TrialRecord run_oracle(ReplicateContext& ctx) {
  TrialRecord rec = base_record(ctx, "oracle_lasso");
  const SimConfig& cfg = ctx.config;

  Dataset full;
  full.sigma2 = cfg.sigma2;
  full.X.resize(2 * cfg.n, cfg.p);
  full.X.topRows(cfg.n) = ctx.data.eval.X;
  full.X.bottomRows(cfg.n) = ctx.data.fit.X;
  full.y.resize(2 * cfg.n);
  full.y.head(cfg.n) = ctx.data.eval.y;
  full.y.tail(cfg.n) = ctx.data.fit.y;

  if (cfg.s == 0) {
    rec.covered = 0;  // degenerate radius-0 ball: covers only the exact center
    const Vector mu_full = full.X * ctx.data.beta;
    rec.covered = (mu_full.squaredNorm() == 0.0) ? 1 : 0;
    return rec;
  }

  const double lambda_val = 2.0 * std::sqrt(2.0) * std::sqrt(cfg.sigma2) *
                            std::sqrt(std::log(static_cast<double>(cfg.p)) / (2.0 * cfg.n));
  double b = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < full.X.cols(); ++j) {
    const double n2 = full.X.col(j).squaredNorm();
    if (n2 > 0.0) b = std::max(b, full.X.col(j).dot(full.y) / n2);
  }
  competitors::CalibratedConstant c_o = competitors::calibrate_c_o(
      full.X, lambda_val, cfg.s, cfg.alpha, cfg.co_n_sim, ctx.stream.substream(21), b,
      cfg.sigma2);
  if (cfg.lambda_rule.kind == solvers::LambdaKind::cv_min) c_o.value *= oracle_eta_cv();
  if (cfg.lambda_rule.kind == solvers::LambdaKind::cv_1se) c_o.value *= oracle_eta_1se();

  const confset::BallCS ball = competitors::oracle_lasso_cs(
      full, cfg.s, cfg.lambda_rule, cfg.alpha, c_o, ctx.stream.substream(22));
  const Vector mu_full = full.X * ctx.data.beta;
  rec.covered = confset::contains(ball, mu_full) ? 1 : 0;
  rec.r_bar = rec.r_perp = ball.radius;
  return rec;
}

TrialRecord run_tsl(ReplicateContext& ctx, const std::string& method,
                    confset::Criterion criterion) {
  TrialRecord rec = base_record(ctx, method);
  const SimConfig& cfg = ctx.config;
  if (cfg.s == 0) throw std::invalid_argument("two-step lasso needs s_beta >= 1");

  competitors::TslOptions opt;
  opt.n_sim_cl = cfg.cl_n_sim;
  opt.E = cfg.E;
  if (!cfg.a_grid.empty()) opt.a_grid = cfg.a_grid;

  const confset::EllipsoidCS best =
      competitors::two_step_lasso_cs(ctx.data.fit, ctx.data.eval, cfg.s, cfg.alpha, criterion,
                                     cfg.lambda_rule, ctx.stream.substream(31), opt);
  rec.covered = confset::contains(best, ctx.mu_eval) ? 1 : 0;
  const confset::Geometry geo = confset::geometry(best);
  rec.r_bar = geo.geo_avg_radius;
  rec.r_A = best.r_A;
  rec.r_perp = best.r_perp;
  rec.k = static_cast<int>(best.k());
  rec.m_star = best.provenance;
  return rec;
}

std::vector<TrialRecord> run_replicate(const SimConfig& config, int replicate,
                                       const stein::SureConstant& cs) {
  ReplicateContext ctx{config, replicate,
                       numkit::RngStream(config.master_seed,
                                         static_cast<std::uint64_t>(config.setting_id) * 1000000u +
                                             static_cast<std::uint64_t>(replicate)),
                       {}, {}, cs, {}, {}};
  numkit::RngEngine data_eng(ctx.stream.substream(1));
  ctx.data = sample_dataset(config, data_eng);
  ctx.mu_eval = ctx.data.eval.X * ctx.data.beta;

  std::vector<TrialRecord> out;
  out.reserve(config.methods.size());
  for (const std::string& method : config.methods) {
    const auto t0 = std::chrono::steady_clock::now();
    TrialRecord rec;
    try {
      if (method == "stein_vol") {
        rec = run_stein_method(ctx, method, confset::Criterion::volume);
      } else if (method == "stein_diam") {
        rec = run_stein_method(ctx, method, confset::Criterion::diameter);
      } else if (method == "naive") {
        rec = run_naive(ctx);
      } else if (method == "adaptive") {
        rec = run_adaptive(ctx);
      } else if (method == "oracle_lasso") {
        rec = run_oracle(ctx);
      } else if (method == "tsl_vol") {
        rec = run_tsl(ctx, method, confset::Criterion::volume);
      } else if (method == "tsl_diam") {
        rec = run_tsl(ctx, method, confset::Criterion::diameter);
      } else {
        throw std::invalid_argument("unknown method: " + method);
      }
    } catch (const std::exception&) {
      rec = base_record(ctx, method);
      rec.covered = -1;
      rec.k = -1;
      rec.m_star = -1;
    }
    if (config.record_timing) {
      rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

int thread_count() {
  if (const char* env = std::getenv("HONESTSETS_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

std::vector<TrialRecord> run_setting(const SimConfig& config) {
  require(config.replicates >= 1, "run_setting: replicates must be >= 1");
  require(config.alpha > 0.0 && config.alpha < 1.0, "run_setting: alpha in (0,1)");

  // Shared constant, computed once up front so worker order cannot matter.
  const stein::SureConstant cs = stein::cs_constant_cached(
      config.alpha / 2.0, config.n, config.cs_n_sim, config.master_seed);

  std::vector<std::vector<TrialRecord>> slots(static_cast<std::size_t>(config.replicates));
  std::atomic<int> next{0};
  const int workers = std::min(thread_count(), config.replicates);

  auto work = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= config.replicates) return;
      slots[static_cast<std::size_t>(r)] = run_replicate(config, r, cs);
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<TrialRecord> records;
  records.reserve(static_cast<std::size_t>(config.replicates) * config.methods.size());
  for (auto& slot : slots) {
    for (auto& rec : slot) records.push_back(std::move(rec));
  }
  std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    if (a.setting_id != b.setting_id) return a.setting_id < b.setting_id;
    if (a.replicate != b.replicate) return a.replicate < b.replicate;
    return a.method < b.method;
  });
  return records;
}

std::vector<SummaryRow> aggregate(const std::vector<TrialRecord>& records) {
  require(!records.empty(), "aggregate: no records");
  std::map<std::pair<int, std::string>, SummaryRow> acc;
  std::map<std::pair<int, std::string>, std::pair<double, double>> sums;  // r_bar, k
  for (const TrialRecord& rec : records) {
    const auto key = std::make_pair(rec.setting_id, rec.method);
    SummaryRow& row = acc[key];
    row.setting_id = rec.setting_id;
    row.method = rec.method;
    if (rec.covered < 0) {
      ++row.n_errors;
      continue;
    }
    ++row.n_trials;
    row.coverage += rec.covered;
    sums[key].first += rec.r_bar;
    sums[key].second += rec.k;
  }
  std::vector<SummaryRow> out;
  out.reserve(acc.size());
  for (auto& [key, row] : acc) {
    if (row.n_trials > 0) {
      row.coverage /= row.n_trials;
      row.mean_r_bar = sums[key].first / row.n_trials;
      row.mean_k = sums[key].second / row.n_trials;
    }
    out.push_back(row);
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// RFC-4180: quote fields containing separators, quotes, or newlines.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void emit_outputs(const std::vector<TrialRecord>& records,
                  const std::vector<SummaryRow>& summaries,
                  const std::vector<SimConfig>& configs, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  const std::string trials_path = out_dir + "/trials.csv";
  {
    std::ofstream f(trials_path, std::ios::binary);
    if (!f) throw std::runtime_error("emit_outputs: cannot write " + trials_path);
    f << "setting_id,replicate,method,covered,r_bar,r_A,r_perp,k,m_star,wall_ms\n";
    for (const TrialRecord& r : records) {
      f << r.setting_id << ',' << r.replicate << ',' << csv_field(r.method) << ',' << r.covered
        << ',' << fmt_double(r.r_bar) << ',' << fmt_double(r.r_A) << ',' << fmt_double(r.r_perp)
        << ',' << r.k << ',' << r.m_star << ',' << r.wall_ms << '\n';
    }
  }

  std::map<int, const SimConfig*> by_id;
  for (const SimConfig& c : configs) by_id[c.setting_id] = &c;

  const std::string summary_path = out_dir + "/summary.csv";
  {
    std::ofstream f(summary_path, std::ios::binary);
    if (!f) throw std::runtime_error("emit_outputs: cannot write " + summary_path);
    f << "setting_id,design,beta_mode,b,s,lambda_rule,method,n_trials,n_errors,coverage,"
         "mean_r_bar,mean_k\n";
    for (const SummaryRow& s : summaries) {
      const SimConfig* cfg = by_id.count(s.setting_id) ? by_id[s.setting_id] : nullptr;
      f << s.setting_id << ',' << (cfg ? design_name(cfg->design) : "") << ','
        << (cfg ? beta_mode_name(cfg->beta_mode) : "") << ','
        << (cfg ? fmt_double(cfg->b) : "") << ',' << (cfg ? std::to_string(cfg->s) : "") << ','
        << (cfg ? lambda_rule_name(cfg->lambda_rule) : "") << ',' << csv_field(s.method) << ','
        << s.n_trials << ',' << s.n_errors << ',' << fmt_double(s.coverage) << ','
        << fmt_double(s.mean_r_bar) << ',' << fmt_double(s.mean_k) << '\n';
    }
  }

  const std::string plots_path = out_dir + "/plots.gp";
  {
    std::ofstream f(plots_path, std::ios::binary);
    if (!f) throw std::runtime_error("emit_outputs: cannot write " + plots_path);
    f << "# gnuplot script: radius-vs-b curves and coverage box plots from summary.csv\n"
         "set datafile separator ','\n"
         "set key outside\n"
         "set term pngcairo size 1200,500\n"
         "\n"
         "set output 'radius_vs_b.png'\n"
         "set xlabel 'b'\n"
         "set ylabel 'mean geometric average radius'\n"
         "plot for [m in 'stein_vol stein_diam adaptive oracle_lasso tsl_vol tsl_diam naive'] \\\n"
         "  'summary.csv' using 4:(strcol(7) eq m ? column(11) : NaN) \\\n"
         "  with linespoints title m\n"
         "\n"
         "set output 'coverage_box.png'\n"
         "set style data boxplot\n"
         "set style boxplot outliers pointtype 7\n"
         "set xlabel 'method'\n"
         "set ylabel 'coverage'\n"
         "set xtics ('stein_vol' 1, 'stein_diam' 2, 'adaptive' 3, 'oracle_lasso' 4, "
         "'tsl_vol' 5, 'tsl_diam' 6, 'naive' 7)\n"
         "plot for [i=1:7] 'summary.csv' \\\n"
         "  using (i):(strcol(7) eq word('stein_vol stein_diam adaptive oracle_lasso tsl_vol "
         "tsl_diam naive', i) ? column(10) : NaN) notitle\n";
  }
}

std::vector<TrialRecord> parse_trials_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("parse_trials_csv: cannot open " + path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<TrialRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    TrialRecord r;
    std::getline(ss, field, ','); r.setting_id = std::stoi(field);
    std::getline(ss, field, ','); r.replicate = std::stoi(field);
    std::getline(ss, field, ','); r.method = field;
    std::getline(ss, field, ','); r.covered = std::stoi(field);
    std::getline(ss, field, ','); r.r_bar = std::stod(field);
    std::getline(ss, field, ','); r.r_A = std::stod(field);
    std::getline(ss, field, ','); r.r_perp = std::stod(field);
    std::getline(ss, field, ','); r.k = std::stoi(field);
    std::getline(ss, field, ','); r.m_star = std::stoi(field);
    std::getline(ss, field, ','); r.wall_ms = std::stoll(field);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace honestsets::simlab
