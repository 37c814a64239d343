#pragma once

#include <string>
#include <vector>

#include "fgsmglm/asymptotics.hpp"
#include "fgsmglm/estimators.hpp"

namespace fgsmglm {

/// Experiment description: model, penalty schedule lambda_n = lambda0 *
/// n^{-rate_exponent}, sample-size grid, replication counts and seeds.
struct ExperimentConfig {
    ModelSpec model;
    PenaltySpec penalty_template;  // lambda field unused; schedule below applies
    double lambda0 = 0.0;
    double rate_exponent = 0.5;
    std::vector<int> n_grid;
    int replications = 1;
    EstimatorOptions estimator_options;
    int limit_draws = 1000;
    long moment_samples = 100000;
    std::uint64_t master_seed = 0;
    std::string output_dir;
    int threads = 1;

    double lambda_for(int n) const;
    void validate() const;
};

struct ReplicationRecord {
    int n = 0;
    int replication_index = 0;
    std::string estimator;  // "fgsm" or "penlik"
    VectorXd beta_hat;
    VectorXd scaled_error;  // sqrt(n) (beta_hat - beta0)
    std::vector<bool> active_set;
    double objective_value = 0.0;
    bool converged = false;
    double wall_ms = 0.0;
};

struct PerNSummary {
    int n = 0;
    int count = 0;
    int nonconverged = 0;
    double median_scaled_norm = 0.0;
    double q90_scaled_norm = 0.0;
    VectorXd zero_recovery_rate;       // per coordinate
    std::vector<int> sign_error_counts;  // per coordinate, over nonzero beta0 coords
};

struct ExperimentReport {
    std::vector<PerNSummary> fgsm_summary;
    std::vector<PerNSummary> baseline_summary;
    VectorXd ks_statistics;  // per coordinate, largest n, fgsm vs limit draws
    bool ks_low_power = false;
    double consistency_slope = 0.0;
    double baseline_consistency_slope = 0.0;
    double nonconvergence_rate = 0.0;
    int ks_excluded = 0;
    MatrixXd moments_M;
    VectorXd moments_V;
    double mean_abs_eps = 0.0;
};

std::vector<ReplicationRecord> run_replications(const ExperimentConfig& config);

/// Report is a pure function of the persisted records (plus limit draws
/// derived from the config seeds).
ExperimentReport build_report(const ExperimentConfig& config,
                              const std::vector<ReplicationRecord>& records);

/// Runs the full experiment, persists records.csv and report.json under
/// config.output_dir, and returns the report.
ExperimentReport run_experiment(const ExperimentConfig& config);

struct OracleRow {
    double lambda0 = 0.0;
    double p_zero_block = 0.0;     // all true-zero coordinates estimated exactly 0
    double p_exact_support = 0.0;  // active set equals the true support
    int replications = 0;
};

std::vector<OracleRow> oracle_study(const ExperimentConfig& config,
                                    const std::vector<double>& lambda0_grid);

struct SignStudyRow {
    VectorXd shift;
    double v_norm = 0.0;
    double v_se_max = 0.0;
    VectorXd mean_scaled_error;
    VectorXd bias_excess;     // mean scaled error minus the V = 0 limit mean
    VectorXd predicted_bias;  // lambda0 ||beta0||_gamma^gamma M^{-1} V
    double cosine_similarity = 0.0;
};

struct SignStudyResult {
    std::vector<SignStudyRow> rows;
    double corr_vnorm_bias = 0.0;
};

SignStudyResult sign_neutrality_study(const ModelSpec& base_model,
                                      const std::vector<VectorXd>& shift_grid,
                                      const ExperimentConfig& config);

// Persistence.
void write_records_csv(const std::vector<ReplicationRecord>& records, int p,
                       const std::string& path);
std::vector<ReplicationRecord> read_records_csv(const std::string& path);

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& json_text);

/// format is one of "json", "csv", "plotdata"; writes the corresponding
/// files under dir.
void emit_report(const ExperimentReport& report, const std::string& dir,
                 const std::string& format);

// Config file handling (JSON).
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

LimitProblem limit_problem_for(const ExperimentConfig& config, const MomentSummary& moments);

}  // namespace fgsmglm
