#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fgsmglm/harness.hpp"

namespace {

using fgsmglm::ExperimentConfig;
using fgsmglm::VectorXd;
using nlohmann::json;

std::vector<double> to_std(const VectorXd& v) { return {v.begin(), v.end()}; }

VectorXd parse_vector(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    return Eigen::Map<const VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

json estimate_to_json(const fgsmglm::EstimateResult& r) {
    json j;
    j["beta_hat"] = to_std(r.beta_hat);
    j["objective"] = r.objective_value;
    j["converged"] = r.converged;
    j["active_set"] = r.active_set;
    j["iterations"] = r.iterations_used;
    j["restart_index"] = r.restart_index;
    return j;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool check = false;
};

ExperimentConfig load_config(const CommonArgs& args) {
    ExperimentConfig cfg = fgsmglm::load_experiment_config(args.config_path);
    if (args.seed_set) cfg.master_seed = args.seed;
    if (args.threads > 0) cfg.threads = args.threads;
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    return cfg;
}

int cmd_estimate(const CommonArgs& args, const std::string& data_path) {
    ExperimentConfig cfg = load_config(args);
    fgsmglm::Dataset data = fgsmglm::read_dataset_csv(data_path);
    const double lambda = cfg.penalty_template.lambda > 0.0 ? cfg.penalty_template.lambda
                                                            : cfg.lambda_for(data.n());
    fgsmglm::AdversarialObjective obj(data, cfg.model.link,
                                      cfg.penalty_template.with_lambda(lambda));
    fgsmglm::EstimateResult fit = fgsmglm::fit_fgsm(obj, cfg.model.beta0, cfg.estimator_options);
    std::cout << estimate_to_json(fit).dump(2) << "\n";
    return 0;
}

int cmd_perturb(const CommonArgs& args, const std::string& data_path, const std::string& beta_csv,
                const std::string& out_csv) {
    ExperimentConfig cfg = load_config(args);
    fgsmglm::Dataset data = fgsmglm::read_dataset_csv(data_path);
    const VectorXd beta = parse_vector(beta_csv);
    const double lambda = cfg.penalty_template.lambda > 0.0 ? cfg.penalty_template.lambda
                                                            : cfg.lambda_for(data.n());
    fgsmglm::AdversarialObjective obj(data, cfg.model.link,
                                      cfg.penalty_template.with_lambda(lambda));
    fgsmglm::PerturbedDataset pert = obj.perturb(beta);
    fgsmglm::Dataset out = data;
    out.x = pert.x_tilde;
    fgsmglm::write_dataset_csv(out, out_csv);
    json summary;
    VectorXd max_pert = (pert.x_tilde - data.x).cwiseAbs().colwise().maxCoeff();
    summary["max_perturbation_per_column"] = to_std(max_pert);
    summary["linf_budget"] = max_pert.size() > 0 ? max_pert.maxCoeff() : 0.0;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_limit(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    const fgsmglm::MomentSummary moments = fgsmglm::compute_moments(
        cfg.model, cfg.moment_samples, fgsmglm::mix_seed(cfg.master_seed, {0x303e275ULL, 1}));
    const fgsmglm::LimitProblem problem = fgsmglm::limit_problem_for(cfg, moments);
    const auto draws = fgsmglm::draw_limit_samples(
        problem, cfg.limit_draws, fgsmglm::mix_seed(cfg.master_seed, {0x11317d7ULL, 2}));

    json out;
    std::vector<std::vector<double>> m_rows;
    for (int i = 0; i < moments.M.rows(); ++i) m_rows.push_back(to_std(moments.M.row(i)));
    out["M"] = m_rows;
    out["V"] = to_std(moments.V);
    out["mean_abs_eps"] = moments.mean_abs_eps;
    out["se_mean_abs_eps"] = moments.se_mean_abs_eps;
    if (moments.analytic_V) out["analytic_V"] = to_std(*moments.analytic_V);
    if (moments.analytic_mean_abs_eps) out["analytic_mean_abs_eps"] = *moments.analytic_mean_abs_eps;
    json samples = json::array();
    for (const auto& d : draws) samples.push_back(to_std(d.u_star));
    out["u_star_samples"] = samples;
    out["diagnostics"] = {{"lambda0", cfg.lambda0}, {"draws", draws.size()}};
    std::cout << out.dump(2) << "\n";

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        const std::vector<double> n_grid = {100, 1000, 10000, 100000};
        auto schedule = [&](double n) { return cfg.lambda0 * std::pow(n, -cfg.rate_exponent); };
        const auto rates =
            fgsmglm::check_rates(cfg.penalty_template, schedule, cfg.model.beta0, n_grid);
        {
            std::ofstream f(cfg.output_dir + "/rates.csv");
            f << "n,alpha_n,tau_n\n";
            for (std::size_t i = 0; i < rates.alpha_sequence.size(); ++i)
                f << rates.alpha_sequence[i].first << "," << rates.alpha_sequence[i].second << ","
                  << rates.tau_sequence[i].second << "\n";
        }
        const auto probes = fgsmglm::probe_sign_conditions(cfg.model, 1.0, n_grid, 100000,
                                                           cfg.master_seed);
        {
            std::ofstream f(cfg.output_dir + "/conditions.csv");
            f << "n,eq8_sup,eq9_sup\n";
            for (const auto& row : probes.rows)
                f << row.n << "," << row.eq_near_zero_sup << "," << row.eq_sign_sup << "\n";
        }
    }
    return 0;
}

int cmd_experiment(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    if (cfg.output_dir.empty()) cfg.output_dir = "out";
    const fgsmglm::ExperimentReport report = fgsmglm::run_experiment(cfg);
    std::cout << fgsmglm::report_to_json(report) << "\n";
    if (args.check && report.nonconvergence_rate > 0.02) {
        std::cerr << "check failed: nonconvergence rate " << report.nonconvergence_rate
                  << " exceeds 2%\n";
        return 3;
    }
    return 0;
}

int cmd_oracle(const CommonArgs& args, const std::string& grid_csv) {
    ExperimentConfig cfg = load_config(args);
    const VectorXd grid = parse_vector(grid_csv);
    const auto rows = fgsmglm::oracle_study(cfg, {grid.begin(), grid.end()});
    std::cout << "lambda0,p_zero_block,p_exact_support,replications\n";
    for (const auto& r : rows)
        std::cout << r.lambda0 << "," << r.p_zero_block << "," << r.p_exact_support << ","
                  << r.replications << "\n";
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        std::ofstream f(cfg.output_dir + "/oracle_curve.csv");
        f << "lambda0,p_zero_block,p_exact_support,replications\n";
        for (const auto& r : rows)
            f << r.lambda0 << "," << r.p_zero_block << "," << r.p_exact_support << ","
              << r.replications << "\n";
    }
    return 0;
}

int cmd_signstudy(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    std::ifstream in(args.config_path);
    json j = json::parse(in);
    std::vector<VectorXd> shifts;
    for (const auto& s : j.at("shift_grid")) {
        const auto vals = s.get<std::vector<double>>();
        shifts.push_back(Eigen::Map<const VectorXd>(vals.data(),
                                                    static_cast<Eigen::Index>(vals.size())));
    }
    const auto result = fgsmglm::sign_neutrality_study(cfg.model, shifts, cfg);
    std::cout << "shift_norm,v_norm,bias_excess_norm,cosine_similarity\n";
    for (const auto& r : result.rows)
        std::cout << r.shift.norm() << "," << r.v_norm << "," << r.bias_excess.norm() << ","
                  << r.cosine_similarity << "\n";
    std::cout << "# corr(|V|, |bias|) = " << result.corr_vnorm_bias << "\n";
    return 0;
}

int cmd_report(const CommonArgs& args, const std::string& records_path,
               const std::string& format) {
    ExperimentConfig cfg = load_config(args);
    const auto records = fgsmglm::read_records_csv(records_path);
    const auto report = fgsmglm::build_report(cfg, records);
    const std::string dir = cfg.output_dir.empty() ? "." : cfg.output_dir;
    fgsmglm::emit_report(report, dir, format);
    std::cout << fgsmglm::report_to_json(report) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized FGSM estimation for GLMs: estimators, limit laws, experiments"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string data_path, beta_csv, out_csv = "perturbed.csv", grid_csv = "0.5,1,2,4,8";
    std::string records_path = "records.csv", format = "json";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "config file (JSON)")->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed, "master seed override")
            ->each([&](const std::string&) { args.seed_set = true; });
        sub->add_option("--threads", args.threads, "worker count");
        sub->add_flag("--check", args.check, "exit 3 on acceptance-threshold breach");
    };

    auto* est = app.add_subcommand("estimate", "fit the FGSM estimator on a dataset CSV");
    add_common(est);
    est->add_option("--data", data_path, "dataset CSV")->required();

    auto* pert = app.add_subcommand("perturb", "write the adversarially perturbed dataset");
    add_common(pert);
    pert->add_option("--data", data_path, "dataset CSV")->required();
    pert->add_option("--beta", beta_csv, "comma-separated beta vector")->required();
    pert->add_option("--perturbed-out", out_csv, "output CSV path");

    auto* lim = app.add_subcommand("limit", "moments, limit draws, rate and condition tables");
    add_common(lim);

    auto* exp = app.add_subcommand("experiment", "run the Monte Carlo experiment");
    add_common(exp);

    auto* ora = app.add_subcommand("oracle", "zero-recovery probability across a lambda0 grid");
    add_common(ora);
    ora->add_option("--lambda0-grid", grid_csv, "comma-separated lambda0 values");

    auto* sign = app.add_subcommand("signstudy", "sign-neutrality bias study over shifts");
    add_common(sign);

    auto* rep = app.add_subcommand("report", "recompute the report from persisted records");
    add_common(rep);
    rep->add_option("--records", records_path, "records.csv path");
    rep->add_option("--format", format, "json|csv|plotdata");

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed()) return cmd_estimate(args, data_path);
        if (pert->parsed()) return cmd_perturb(args, data_path, beta_csv, out_csv);
        if (lim->parsed()) return cmd_limit(args);
        if (exp->parsed()) return cmd_experiment(args);
        if (ora->parsed()) return cmd_oracle(args, grid_csv);
        if (sign->parsed()) return cmd_signstudy(args);
        if (rep->parsed()) return cmd_report(args, records_path, format);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
