#include "fgsmglm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "fgsmglm/stats.hpp"

namespace fgsmglm {

namespace {

using nlohmann::json;

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double gamma_norm(const VectorXd& beta, double gamma) {
    double total = 0.0;
    for (int j = 0; j < beta.size(); ++j) {
        const double t = std::fabs(beta[j]);
        total += gamma == 1.0 ? t : std::pow(t, gamma);
    }
    return total;
}

double expected_rate_exponent(const PenaltySpec& spec) {
    if (spec.family == PenaltyFamily::LGamma && spec.gamma < 1.0) return 1.0 - spec.gamma / 2.0;
    return 0.5;
}

std::vector<double> to_std(const VectorXd& v) { return {v.begin(), v.end()}; }
VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double ExperimentConfig::lambda_for(int n) const {
    return lambda0 * std::pow(static_cast<double>(n), -rate_exponent);
}

void ExperimentConfig::validate() const {
    model.validate();
    penalty_template.validate();
    estimator_options.validate();
    if (replications < 1) throw std::invalid_argument("replications must be >= 1");
    if (n_grid.empty()) throw std::invalid_argument("n_grid must be nonempty");
    if (!std::is_sorted(n_grid.begin(), n_grid.end()) ||
        std::adjacent_find(n_grid.begin(), n_grid.end()) != n_grid.end())
        throw std::invalid_argument("n_grid must be strictly ascending");
    if (!(lambda0 >= 0.0)) throw std::invalid_argument("lambda0 must be >= 0");
    if (std::fabs(rate_exponent - expected_rate_exponent(penalty_template)) > 1e-12)
        throw std::invalid_argument("rate_exponent inconsistent with penalty family");
    if (limit_draws < 1) throw std::invalid_argument("limit_draws must be >= 1");
    if (moment_samples < 100) throw std::invalid_argument("moment_samples must be >= 100");
}

std::vector<ReplicationRecord> run_replications(const ExperimentConfig& config) {
    config.validate();
    const int reps = config.replications;
    const int num_n = static_cast<int>(config.n_grid.size());
    const int tasks = num_n * reps;
    std::vector<ReplicationRecord> fgsm_records(static_cast<std::size_t>(tasks));
    std::vector<ReplicationRecord> pen_records(static_cast<std::size_t>(tasks));

    auto run_task = [&](int task) {
        const int ni = task / reps;
        const int rep = task % reps;
        const int n = config.n_grid[static_cast<std::size_t>(ni)];
        const double lambda_n = config.lambda_for(n);
        const std::uint64_t data_seed = mix_seed(
            config.master_seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep), 0});
        Dataset data = sample_dataset(config.model, n, data_seed);
        const PenaltySpec pen = config.penalty_template.with_lambda(lambda_n);
        const double sqrt_n = std::sqrt(static_cast<double>(n));

        auto fill = [&](ReplicationRecord& rec, const EstimateResult& fit, const char* tag,
                        double wall_ms) {
            rec.n = n;
            rec.replication_index = rep;
            rec.estimator = tag;
            rec.beta_hat = fit.beta_hat;
            rec.scaled_error = sqrt_n * (fit.beta_hat - config.model.beta0);
            rec.active_set = fit.active_set;
            rec.objective_value = fit.objective_value;
            rec.converged = fit.converged;
            rec.wall_ms = wall_ms;
        };

        {
            AdversarialObjective obj(data, config.model.link, pen);
            EstimatorOptions opts = config.estimator_options;
            opts.seed = mix_seed(config.master_seed,
                                 {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep), 1});
            const auto t0 = std::chrono::steady_clock::now();
            EstimateResult fit = fit_fgsm(obj, config.model.beta0, opts);
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            fill(fgsm_records[static_cast<std::size_t>(task)], fit, "fgsm", ms);
        }
        {
            EstimatorOptions opts = config.estimator_options;
            opts.seed = mix_seed(config.master_seed,
                                 {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep), 2});
            const auto t0 = std::chrono::steady_clock::now();
            EstimateResult fit =
                fit_penalized_likelihood(data, config.model.link, pen, config.model.beta0, opts);
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            fill(pen_records[static_cast<std::size_t>(task)], fit, "penlik", ms);
        }
    };

    const int workers = std::max(1, config.threads);
    if (workers == 1) {
        for (int t = 0; t < tasks; ++t) run_task(t);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < tasks; t = next.fetch_add(1)) run_task(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    // Deterministic order: (n, replication, estimator).
    std::vector<ReplicationRecord> records;
    records.reserve(static_cast<std::size_t>(2 * tasks));
    for (int t = 0; t < tasks; ++t) {
        records.push_back(std::move(fgsm_records[static_cast<std::size_t>(t)]));
        records.push_back(std::move(pen_records[static_cast<std::size_t>(t)]));
    }
    return records;
}

LimitProblem limit_problem_for(const ExperimentConfig& config, const MomentSummary& moments) {
    LimitProblem problem;
    problem.moments = moments;
    problem.penalty_case = penalty_case_for(config.penalty_template);
    problem.gamma = config.penalty_template.family == PenaltyFamily::LGamma
                        ? config.penalty_template.gamma
                        : 1.0;
    problem.lambda0 = config.lambda0;
    problem.beta0 = config.model.beta0;
    problem.radius_K = config.estimator_options.ball_radius_K;
    return problem;
}

namespace {

PerNSummary summarize(int n, const std::vector<const ReplicationRecord*>& recs,
                      const VectorXd& beta0) {
    const int p = static_cast<int>(beta0.size());
    PerNSummary s;
    s.n = n;
    s.count = static_cast<int>(recs.size());
    s.zero_recovery_rate = VectorXd::Zero(p);
    s.sign_error_counts.assign(static_cast<std::size_t>(p), 0);
    std::vector<double> norms;
    for (const auto* r : recs) {
        if (!r->converged) {
            ++s.nonconverged;
            continue;
        }
        norms.push_back(r->scaled_error.norm());
        for (int j = 0; j < p; ++j) {
            if (r->active_set[static_cast<std::size_t>(j)])
                s.zero_recovery_rate[j] += 1.0;
            if (beta0[j] != 0.0 && sgn(r->beta_hat[j]) != sgn(beta0[j]))
                ++s.sign_error_counts[static_cast<std::size_t>(j)];
        }
    }
    const int used = s.count - s.nonconverged;
    if (used > 0) {
        s.zero_recovery_rate /= static_cast<double>(used);
        s.median_scaled_norm = median(norms);
        s.q90_scaled_norm = quantile(norms, 0.9);
    }
    return s;
}

std::vector<PerNSummary> summarize_all(const std::vector<ReplicationRecord>& records,
                                       const std::string& tag, const std::vector<int>& n_grid,
                                       const VectorXd& beta0) {
    std::vector<PerNSummary> out;
    for (int n : n_grid) {
        std::vector<const ReplicationRecord*> recs;
        for (const auto& r : records)
            if (r.estimator == tag && r.n == n) recs.push_back(&r);
        out.push_back(summarize(n, recs, beta0));
    }
    return out;
}

}  // namespace

ExperimentReport build_report(const ExperimentConfig& config,
                              const std::vector<ReplicationRecord>& records) {
    config.validate();
    const int p = config.model.p();
    ExperimentReport report;
    report.fgsm_summary = summarize_all(records, "fgsm", config.n_grid, config.model.beta0);
    report.baseline_summary = summarize_all(records, "penlik", config.n_grid, config.model.beta0);

    int total = 0, bad = 0;
    for (const auto& r : records) {
        ++total;
        if (!r.converged) ++bad;
    }
    report.nonconvergence_rate = total > 0 ? static_cast<double>(bad) / total : 0.0;

    std::vector<double> ns, med_fgsm, med_pen;
    for (const auto& s : report.fgsm_summary) {
        ns.push_back(s.n);
        med_fgsm.push_back(s.median_scaled_norm);
    }
    for (const auto& s : report.baseline_summary) med_pen.push_back(s.median_scaled_norm);
    report.consistency_slope = ns.size() >= 2 ? log_log_slope(ns, med_fgsm) : 0.0;
    report.baseline_consistency_slope = ns.size() >= 2 ? log_log_slope(ns, med_pen) : 0.0;

    const MomentSummary moments = compute_moments(
        config.model, config.moment_samples, mix_seed(config.master_seed, {0x303e275ULL, 1}));
    report.moments_M = moments.M;
    report.moments_V = moments.V;
    report.mean_abs_eps = moments.mean_abs_eps;

    const LimitProblem problem = limit_problem_for(config, moments);
    const auto draws = draw_limit_samples(problem, config.limit_draws,
                                          mix_seed(config.master_seed, {0x11317d7ULL, 2}));

    const int n_max = config.n_grid.back();
    std::vector<std::vector<double>> empirical(static_cast<std::size_t>(p));
    report.ks_excluded = 0;
    for (const auto& r : records) {
        if (r.estimator != "fgsm" || r.n != n_max) continue;
        if (!r.converged) {
            ++report.ks_excluded;
            continue;
        }
        for (int j = 0; j < p; ++j)
            empirical[static_cast<std::size_t>(j)].push_back(r.scaled_error[j]);
    }
    report.ks_statistics = VectorXd::Zero(p);
    if (!empirical[0].empty() && !draws.empty()) {
        for (int j = 0; j < p; ++j) {
            std::vector<double> limit_coord;
            limit_coord.reserve(draws.size());
            for (const auto& d : draws) limit_coord.push_back(d.u_star[j]);
            report.ks_statistics[j] =
                ks_statistic(empirical[static_cast<std::size_t>(j)], limit_coord);
        }
        report.ks_low_power = empirical[0].size() < 500 || draws.size() < 500;
    } else {
        report.ks_low_power = true;
    }
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.output_dir.empty()) throw std::invalid_argument("output_dir must be set");
    std::filesystem::create_directories(config.output_dir);
    const auto records = run_replications(config);
    write_records_csv(records, config.model.p(), config.output_dir + "/records.csv");
    ExperimentReport report = build_report(config, records);
    std::ofstream out(config.output_dir + "/report.json");
    if (!out) throw std::runtime_error("cannot write report.json");
    out << report_to_json(report);
    return report;
}

std::vector<OracleRow> oracle_study(const ExperimentConfig& config,
                                    const std::vector<double>& lambda0_grid) {
    config.validate();
    const VectorXd& beta0 = config.model.beta0;
    const bool has_zero = (beta0.array() == 0.0).any();
    const bool has_nonzero = (beta0.array() != 0.0).any();
    if (!has_zero || !has_nonzero)
        throw std::invalid_argument("oracle study needs beta0 with zero and nonzero components");

    const int n = config.n_grid.back();
    std::vector<OracleRow> out;
    for (double l0 : lambda0_grid) {
        ExperimentConfig sub = config;
        sub.lambda0 = l0;
        sub.n_grid = {n};
        // Same master seed per lambda0: common random numbers across the grid.
        const auto records = run_replications(sub);
        int zero_ok = 0, support_ok = 0, used = 0;
        for (const auto& r : records) {
            if (r.estimator != "fgsm") continue;
            ++used;
            bool zeros_recovered = true, support_exact = true;
            for (int j = 0; j < beta0.size(); ++j) {
                const bool truth_zero = beta0[j] == 0.0;
                const bool est_zero = r.active_set[static_cast<std::size_t>(j)];
                if (truth_zero && !est_zero) zeros_recovered = false;
                if (truth_zero != est_zero) support_exact = false;
            }
            if (zeros_recovered) ++zero_ok;
            if (support_exact) ++support_ok;
        }
        OracleRow row;
        row.lambda0 = l0;
        row.replications = used;
        row.p_zero_block = used > 0 ? static_cast<double>(zero_ok) / used : 0.0;
        row.p_exact_support = used > 0 ? static_cast<double>(support_ok) / used : 0.0;
        out.push_back(row);
    }
    return out;
}

SignStudyResult sign_neutrality_study(const ModelSpec& base_model,
                                      const std::vector<VectorXd>& shift_grid,
                                      const ExperimentConfig& config) {
    SignStudyResult result;
    const int p = base_model.p();
    for (const VectorXd& shift : shift_grid) {
        ExperimentConfig sub = config;
        sub.model = base_model;
        if (shift.lpNorm<1>() > 0.0)
            sub.model.covariates = CovariateDistribution::shifted(base_model.covariates, shift);
        sub.n_grid = {config.n_grid.back()};

        const MomentSummary moments = compute_moments(
            sub.model, sub.moment_samples, mix_seed(sub.master_seed, {0x303e275ULL, 1}));

        const auto records = run_replications(sub);
        VectorXd mean_err = VectorXd::Zero(p);
        int used = 0;
        for (const auto& r : records) {
            if (r.estimator != "fgsm" || !r.converged) continue;
            mean_err += r.scaled_error;
            ++used;
        }
        if (used > 0) mean_err /= static_cast<double>(used);

        // Limit mean with V forced to zero isolates the sign-neutrality bias.
        LimitProblem neutral = limit_problem_for(sub, moments);
        neutral.moments.V = VectorXd::Zero(p);
        const auto draws = draw_limit_samples(neutral, sub.limit_draws,
                                              mix_seed(sub.master_seed, {0x11317d7ULL, 2}));
        VectorXd neutral_mean = VectorXd::Zero(p);
        for (const auto& d : draws) neutral_mean += d.u_star;
        neutral_mean /= static_cast<double>(draws.size());

        SignStudyRow row;
        row.shift = shift;
        row.v_norm = moments.V.norm();
        row.v_se_max = moments.se_V.maxCoeff();
        row.mean_scaled_error = mean_err;
        row.bias_excess = mean_err - neutral_mean;
        const double scale =
            sub.lambda0 * gamma_norm(sub.model.beta0,
                                     sub.penalty_template.family == PenaltyFamily::LGamma
                                         ? sub.penalty_template.gamma
                                         : 1.0);
        if (sub.penalty_template.family == PenaltyFamily::Scad) {
            row.predicted_bias = VectorXd::Zero(p);
        } else {
            row.predicted_bias = Eigen::LDLT<MatrixXd>(moments.M).solve(scale * moments.V);
        }
        const double denom = row.bias_excess.norm() * row.predicted_bias.norm();
        row.cosine_similarity = denom > 0.0 ? row.bias_excess.dot(row.predicted_bias) / denom : 0.0;
        result.rows.push_back(std::move(row));
    }

    if (result.rows.size() >= 2) {
        std::vector<double> vs, bs;
        for (const auto& r : result.rows) {
            vs.push_back(r.v_norm);
            bs.push_back(r.bias_excess.norm());
        }
        const double n = static_cast<double>(vs.size());
        double mv = 0, mb = 0;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            mv += vs[i];
            mb += bs[i];
        }
        mv /= n;
        mb /= n;
        double cov = 0, vv = 0, bb = 0;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            cov += (vs[i] - mv) * (bs[i] - mb);
            vv += (vs[i] - mv) * (vs[i] - mv);
            bb += (bs[i] - mb) * (bs[i] - mb);
        }
        result.corr_vnorm_bias = vv > 0 && bb > 0 ? cov / std::sqrt(vv * bb) : 0.0;
    }
    return result;
}

void write_records_csv(const std::vector<ReplicationRecord>& records, int p,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "n,rep,estimator";
    for (int j = 1; j <= p; ++j) out << ",beta_hat_" << j;
    for (int j = 1; j <= p; ++j) out << ",scaled_err_" << j;
    for (int j = 1; j <= p; ++j) out << ",active_" << j;
    out << ",objective,converged,wall_ms\n";
    for (const auto& r : records) {
        out << r.n << "," << r.replication_index << "," << r.estimator;
        for (int j = 0; j < p; ++j) out << "," << fmt17(r.beta_hat[j]);
        for (int j = 0; j < p; ++j) out << "," << fmt17(r.scaled_error[j]);
        for (int j = 0; j < p; ++j) out << "," << (r.active_set[static_cast<std::size_t>(j)] ? 1 : 0);
        out << "," << fmt17(r.objective_value) << "," << (r.converged ? 1 : 0) << ","
            << fmt17(r.wall_ms) << "\n";
    }
}

std::vector<ReplicationRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty records file");
    int commas = 0;
    for (char c : header)
        if (c == ',') ++commas;
    // columns: 3 fixed + 3p + 3 trailing
    const int p = (commas + 1 - 6) / 3;
    if (p < 1 || 3 * p + 6 != commas + 1)
        throw std::runtime_error("unexpected records.csv header layout");
    std::vector<ReplicationRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != 3 * p + 6)
            throw std::runtime_error("malformed records row");
        ReplicationRecord r;
        r.n = std::stoi(cells[0]);
        r.replication_index = std::stoi(cells[1]);
        r.estimator = cells[2];
        r.beta_hat.resize(p);
        r.scaled_error.resize(p);
        r.active_set.resize(static_cast<std::size_t>(p));
        for (int j = 0; j < p; ++j) r.beta_hat[j] = std::stod(cells[static_cast<std::size_t>(3 + j)]);
        for (int j = 0; j < p; ++j)
            r.scaled_error[j] = std::stod(cells[static_cast<std::size_t>(3 + p + j)]);
        for (int j = 0; j < p; ++j)
            r.active_set[static_cast<std::size_t>(j)] =
                cells[static_cast<std::size_t>(3 + 2 * p + j)] == "1";
        r.objective_value = std::stod(cells[static_cast<std::size_t>(3 + 3 * p)]);
        r.converged = cells[static_cast<std::size_t>(4 + 3 * p)] == "1";
        r.wall_ms = std::stod(cells[static_cast<std::size_t>(5 + 3 * p)]);
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

json summary_to_json(const PerNSummary& s) {
    json j;
    j["n"] = s.n;
    j["count"] = s.count;
    j["nonconverged"] = s.nonconverged;
    j["median_scaled_norm"] = s.median_scaled_norm;
    j["q90_scaled_norm"] = s.q90_scaled_norm;
    j["zero_recovery_rate"] = to_std(s.zero_recovery_rate);
    j["sign_error_counts"] = s.sign_error_counts;
    return j;
}

PerNSummary summary_from_json(const json& j) {
    PerNSummary s;
    s.n = j.at("n");
    s.count = j.at("count");
    s.nonconverged = j.at("nonconverged");
    s.median_scaled_norm = j.at("median_scaled_norm");
    s.q90_scaled_norm = j.at("q90_scaled_norm");
    s.zero_recovery_rate = to_eigen(j.at("zero_recovery_rate").get<std::vector<double>>());
    s.sign_error_counts = j.at("sign_error_counts").get<std::vector<int>>();
    return s;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
    json j;
    j["fgsm_summary"] = json::array();
    for (const auto& s : report.fgsm_summary) j["fgsm_summary"].push_back(summary_to_json(s));
    j["baseline_summary"] = json::array();
    for (const auto& s : report.baseline_summary)
        j["baseline_summary"].push_back(summary_to_json(s));
    j["ks_statistics"] = to_std(report.ks_statistics);
    j["ks_low_power"] = report.ks_low_power;
    j["ks_excluded"] = report.ks_excluded;
    j["consistency_slope"] = report.consistency_slope;
    j["baseline_consistency_slope"] = report.baseline_consistency_slope;
    j["nonconvergence_rate"] = report.nonconvergence_rate;
    j["mean_abs_eps"] = report.mean_abs_eps;
    j["moments_V"] = to_std(report.moments_V);
    std::vector<std::vector<double>> m;
    for (int i = 0; i < report.moments_M.rows(); ++i)
        m.push_back(to_std(report.moments_M.row(i)));
    j["moments_M"] = m;
    return j.dump(2);
}

ExperimentReport report_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    ExperimentReport r;
    for (const auto& s : j.at("fgsm_summary")) r.fgsm_summary.push_back(summary_from_json(s));
    for (const auto& s : j.at("baseline_summary"))
        r.baseline_summary.push_back(summary_from_json(s));
    r.ks_statistics = to_eigen(j.at("ks_statistics").get<std::vector<double>>());
    r.ks_low_power = j.at("ks_low_power");
    r.ks_excluded = j.at("ks_excluded");
    r.consistency_slope = j.at("consistency_slope");
    r.baseline_consistency_slope = j.at("baseline_consistency_slope");
    r.nonconvergence_rate = j.at("nonconvergence_rate");
    r.mean_abs_eps = j.at("mean_abs_eps");
    r.moments_V = to_eigen(j.at("moments_V").get<std::vector<double>>());
    const auto m = j.at("moments_M").get<std::vector<std::vector<double>>>();
    r.moments_M.resize(static_cast<Eigen::Index>(m.size()),
                       static_cast<Eigen::Index>(m.empty() ? 0 : m[0].size()));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t k = 0; k < m[i].size(); ++k)
            r.moments_M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = m[i][k];
    return r;
}

void emit_report(const ExperimentReport& report, const std::string& dir,
                 const std::string& format) {
    std::filesystem::create_directories(dir);
    if (format == "json") {
        std::ofstream out(dir + "/report.json");
        if (!out) throw std::runtime_error("cannot write report.json");
        out << report_to_json(report);
    } else if (format == "csv") {
        std::ofstream out(dir + "/summary.csv");
        if (!out) throw std::runtime_error("cannot write summary.csv");
        const int p =
            report.fgsm_summary.empty() ? 0 : static_cast<int>(report.fgsm_summary[0].zero_recovery_rate.size());
        out << "estimator,n,count,nonconverged,median_scaled_norm,q90_scaled_norm";
        for (int j = 1; j <= p; ++j) out << ",zero_rec_" << j;
        for (int j = 1; j <= p; ++j) out << ",sign_err_" << j;
        out << "\n";
        auto rows = [&](const std::vector<PerNSummary>& ss, const char* tag) {
            for (const auto& s : ss) {
                out << tag << "," << s.n << "," << s.count << "," << s.nonconverged << ","
                    << fmt17(s.median_scaled_norm) << "," << fmt17(s.q90_scaled_norm);
                for (int j = 0; j < p; ++j) out << "," << fmt17(s.zero_recovery_rate[j]);
                for (int j = 0; j < p; ++j) out << "," << s.sign_error_counts[static_cast<std::size_t>(j)];
                out << "\n";
            }
        };
        rows(report.fgsm_summary, "fgsm");
        rows(report.baseline_summary, "penlik");
    } else if (format == "plotdata") {
        {
            std::ofstream out(dir + "/consistency_fgsm.csv");
            out << "n,median_scaled_norm\n";
            for (const auto& s : report.fgsm_summary)
                out << s.n << "," << fmt17(s.median_scaled_norm) << "\n";
        }
        {
            std::ofstream out(dir + "/consistency_penlik.csv");
            out << "n,median_scaled_norm\n";
            for (const auto& s : report.baseline_summary)
                out << s.n << "," << fmt17(s.median_scaled_norm) << "\n";
        }
        {
            std::ofstream out(dir + "/ks_bars.csv");
            out << "coordinate,ks\n";
            for (int j = 0; j < report.ks_statistics.size(); ++j)
                out << (j + 1) << "," << fmt17(report.ks_statistics[j]) << "\n";
        }
    } else {
        throw std::invalid_argument("unknown report format: " + format);
    }
}

namespace {

CovariateDistribution parse_covariates(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "gaussian_iid") {
        VectorXd mean = to_eigen(j.at("mean").get<std::vector<double>>());
        const auto rows = j.at("cov").get<std::vector<std::vector<double>>>();
        MatrixXd cov(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t k = 0; k < rows[i].size(); ++k)
                cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        return CovariateDistribution::gaussian_iid(std::move(mean), std::move(cov));
    }
    if (kind == "uniform_box") {
        return CovariateDistribution::uniform_box(
            to_eigen(j.at("lower").get<std::vector<double>>()),
            to_eigen(j.at("upper").get<std::vector<double>>()));
    }
    if (kind == "shifted") {
        return CovariateDistribution::shifted(parse_covariates(j.at("base")),
                                              to_eigen(j.at("shift").get<std::vector<double>>()));
    }
    if (kind == "heavy_tail_gaussian") {
        return CovariateDistribution::heavy_tail_gaussian(j.at("dim").get<int>());
    }
    throw std::invalid_argument("unknown covariate kind: " + kind);
}

PenaltySpec parse_penalty(const json& j) {
    const std::string family = j.at("family");
    const double lambda = j.value("lambda", 0.0);
    if (family == "lasso") return PenaltySpec::lasso(lambda);
    if (family == "scad") return PenaltySpec::scad(lambda, j.value("a", 3.7));
    if (family == "lgamma") return PenaltySpec::lgamma(j.at("gamma").get<double>(), lambda);
    throw std::invalid_argument("unknown penalty family: " + family);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        const json& jm = j.at("model");
        const std::string family = jm.at("family");
        LinkFamily link = family == "logistic"
                              ? LinkFamily::logistic()
                              : LinkFamily::linear_gaussian(jm.value("sigma", 1.0));
        if (family != "logistic" && family != "linear_gaussian")
            throw std::invalid_argument("unknown model family: " + family);
        ModelSpec model{link, to_eigen(jm.at("beta0").get<std::vector<double>>()),
                        parse_covariates(jm.at("covariates"))};

        const json& jp = j.at("penalty");
        PenaltySpec pen = parse_penalty(jp);

        ExperimentConfig cfg;
        cfg.model = std::move(model);
        cfg.penalty_template = std::move(pen);
        cfg.lambda0 = jp.value("lambda0", 0.0);
        cfg.rate_exponent = jp.value("rate_exponent", expected_rate_exponent(cfg.penalty_template));
        cfg.n_grid = j.at("n_grid").get<std::vector<int>>();
        cfg.replications = j.value("replications", 1);
        cfg.limit_draws = j.value("limit_draws", 1000);
        cfg.moment_samples = j.value("moment_samples", 100000L);
        cfg.master_seed = j.value("master_seed", 0ULL);
        cfg.output_dir = j.value("output_dir", std::string());
        cfg.threads = j.value("threads", 1);
        if (j.contains("estimator")) {
            const json& je = j.at("estimator");
            cfg.estimator_options.ball_radius_K = je.value("K", 10.0);
            cfg.estimator_options.restarts = je.value("restarts", 8);
            cfg.estimator_options.max_iterations = je.value("max_iterations", 500);
            cfg.estimator_options.step_tolerance = je.value("step_tolerance", 1e-10);
            cfg.estimator_options.objective_tolerance = je.value("objective_tolerance", 1e-9);
            cfg.estimator_options.seed = je.value("seed", 0ULL);
        }
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("bad config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

}  // namespace fgsmglm
