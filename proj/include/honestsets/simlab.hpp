#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "honestsets/rng.hpp"
#include "honestsets/solvers.hpp"
#include "honestsets/types.hpp"

namespace honestsets::simlab {

enum class Design { toeplitz, expdecay, equicorr };
enum class BetaMode { uniform, mixed };

// Sampling factor L with L L^T = Sigma, applied row-wise without materializing
// Sigma. Toeplitz (Sigma_ij = 0.5^|i-j|) uses its closed-form bidiagonal-
// recursion Cholesky; Exp.decay inverts the stated Toeplitz precision in
// closed form (tridiagonal Sigma) and takes its bidiagonal Cholesky;
// Equi.corr (0.8 off-diagonal) uses the rank-one representation
// x = sqrt(0.8) z0 1 + sqrt(0.2) w.
class CovarianceFactor {
 public:
  CovarianceFactor(Design design, Index p);

  Design design() const { return design_; }
  Index p() const { return p_; }

  // One row x ~ N_p(0, Sigma).
  Vector sample_row(numkit::RngEngine& eng) const;

  // Dense factor (p x p, or p x (p+1) for the rank-one equicorrelated form);
  // intended for tests at small p.
  Matrix dense_factor() const;

  // Closed-form Sigma entry.
  double sigma_entry(Index i, Index j) const;

 private:
  Design design_;
  Index p_;
  Vector chol_diag_;  // expdecay: bidiagonal Cholesky of the tridiagonal Sigma
  Vector chol_sub_;
};

CovarianceFactor build_covariance(Design design, Index p);

struct SimConfig {
  int n = 200;
  int p = 800;
  int s = 10;
  double sigma2 = 1.0;
  Design design = Design::toeplitz;
  BetaMode beta_mode = BetaMode::uniform;
  double b = 1.0;
  double alpha = 0.05;
  solvers::LambdaRule lambda_rule;
  std::vector<std::string> methods = {"stein_vol"};
  std::vector<double> a_grid;  // empty -> 0, 0.05, ..., 4
  int replicates = 100;
  std::uint64_t master_seed = 42;
  bool strict_multi = false;
  int setting_id = 0;

  // calibration sizes and knobs
  int cs_n_sim = 100000;
  int co_n_sim = 500;
  int cl_n_sim = 500;
  double E = 10.0;
  bool record_timing = false;
};

struct TrialRecord {
  int setting_id = 0;
  int replicate = 0;
  std::string method;
  int covered = 0;  // 0/1; -1 marks an error row
  double r_bar = 0.0;
  double r_A = 0.0;
  double r_perp = 0.0;
  int k = 0;
  int m_star = -1;
  long long wall_ms = 0;
};

struct SummaryRow {
  int setting_id = 0;
  std::string method;
  int n_trials = 0;
  int n_errors = 0;
  double coverage = 0.0;
  double mean_r_bar = 0.0;
  double mean_k = 0.0;
};

// (X, y) evaluation half, (X', y') fitting half, and the coefficient vector.
struct SampledData {
  Dataset eval;
  Dataset fit;
  Vector beta;
};

// Rows i.i.d. N_p(0, Sigma), columns of each half rescaled to ||X_j||^2 = n;
// support is an s-subset resampled per call; y = X beta + sigma eps.
SampledData sample_dataset(const SimConfig& config, numkit::RngEngine& eng);

// Runs config.replicates replicates over a thread pool sized by
// HONESTSETS_THREADS (default: hardware concurrency); output order is
// deterministic regardless of the thread count. Per-replicate failures
// become covered = -1 rows.
std::vector<TrialRecord> run_setting(const SimConfig& config);

std::vector<SummaryRow> aggregate(const std::vector<TrialRecord>& records);

// trials.csv, summary.csv, plots.gp under out_dir. Summary rows are joined
// with per-setting metadata when configs are supplied.
void emit_outputs(const std::vector<TrialRecord>& records,
                  const std::vector<SummaryRow>& summaries,
                  const std::vector<SimConfig>& configs, const std::string& out_dir);

std::vector<TrialRecord> parse_trials_csv(const std::string& path);

std::string design_name(Design d);
std::string beta_mode_name(BetaMode m);
std::string lambda_rule_name(const solvers::LambdaRule& r);
Design design_from_name(const std::string& name);
BetaMode beta_mode_from_name(const std::string& name);
solvers::LambdaRule lambda_rule_from_name(const std::string& name, int folds = 10);

// Frozen pilot factors applied to c_o when the oracle's lambda is chosen by
// cross-validation; regenerated by the calibrate tool.
double oracle_eta_cv();
double oracle_eta_1se();

}  // namespace honestsets::simlab
