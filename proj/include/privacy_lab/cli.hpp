#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "privacy_lab/equilibrium.hpp"
#include "privacy_lab/monte_carlo.hpp"
#include "privacy_lab/params.hpp"
#include "privacy_lab/scenarios.hpp"
#include "privacy_lab/welfare.hpp"

namespace privacy_lab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitVerification = 3;

enum class Format { Human, Csv, Json };

struct RunConfig {
    MarketParams market;
    std::optional<SimConfig> sim;
    std::optional<SweepSpec> sweep;
    std::int64_t tau = 1;
    std::string output_path;  // empty = stdout
    Format format = Format::Human;
};

inline const char* to_string(Format f) {
    switch (f) {
        case Format::Human: return "human";
        case Format::Csv: return "csv";
        case Format::Json: return "json";
    }
    return "human";
}

inline Format parse_format(const std::string& s) {
    if (s == "human") return Format::Human;
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    throw ParamError(ParamErrorCode::InvalidArgument, "format", "must be human, csv or json");
}

inline const std::vector<std::pair<std::string, SweepOutput>>& output_names() {
    static const std::vector<std::pair<std::string, SweepOutput>> names = {
        {"equilibrium", SweepOutput::Equilibrium},
        {"welfare", SweepOutput::Welfare},
        {"subsidy_analysis", SweepOutput::SubsidyAnalysis},
        {"fee", SweepOutput::Fee},
    };
    return names;
}

inline unsigned parse_outputs(const std::vector<std::string>& names) {
    unsigned mask = 0;
    for (const auto& n : names) {
        bool found = false;
        for (const auto& [key, bit] : output_names()) {
            if (key == n) {
                mask |= static_cast<unsigned>(bit);
                found = true;
            }
        }
        if (!found)
            throw ParamError(ParamErrorCode::InvalidArgument, "outputs", "unknown output '" + n + "'");
    }
    return mask;
}

inline std::vector<std::string> output_list(unsigned mask) {
    std::vector<std::string> out;
    for (const auto& [key, bit] : output_names())
        if (mask & static_cast<unsigned>(bit)) out.push_back(key);
    return out;
}

inline nlohmann::json market_json(const MarketParams& m) {
    return {{"p0", m.p0}, {"sigma_v", m.sigma_v}, {"sigma_u", m.sigma_u}, {"sigma_eps", m.sigma_eps}};
}

/// Thread count is deliberately absent: it never changes results.
inline nlohmann::json sim_json(const SimConfig& s) {
    return {{"n_paths", s.n_paths}, {"seed", s.seed}, {"chunk_size", s.chunk_size}};
}

/// Reads a JSON config. Unknown keys (such as a "result" block from a previous
/// --format json run) are ignored, so command output can be fed back in.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError(ParamErrorCode::InvalidArgument, "config", "cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParamError(ParamErrorCode::InvalidArgument, "config", e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("market")) {
            const auto& m = j["market"];
            cfg.market.p0 = m.value("p0", cfg.market.p0);
            cfg.market.sigma_v = m.value("sigma_v", cfg.market.sigma_v);
            cfg.market.sigma_u = m.value("sigma_u", cfg.market.sigma_u);
            cfg.market.sigma_eps = m.value("sigma_eps", cfg.market.sigma_eps);
        }
        if (j.contains("sim")) {
            const auto& s = j["sim"];
            SimConfig sc;
            sc.n_paths = s.value("n_paths", sc.n_paths);
            sc.seed = s.value("seed", sc.seed);
            sc.chunk_size = s.value("chunk_size", sc.chunk_size);
            cfg.sim = sc;
        }
        if (j.contains("sweep")) {
            const auto& s = j["sweep"];
            SweepSpec spec;
            spec.sigma_eps_values = s.value("sigma_eps_values", std::vector<double>{});
            if (s.contains("outputs"))
                spec.outputs = parse_outputs(s["outputs"].get<std::vector<std::string>>());
            cfg.sweep = spec;
        }
        if (j.contains("batch")) cfg.tau = j["batch"].value("tau", cfg.tau);
        cfg.output_path = j.value("output_path", std::string{});
        if (j.contains("format")) cfg.format = parse_format(j["format"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ParamError(ParamErrorCode::InvalidArgument, "config", e.what());
    }
    return cfg;
}

inline std::string sig6(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x == 0.0 ? 0.0 : x);
    return buf;
}

namespace detail {

struct Check {
    std::string name;
    double expected = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    bool pass = false;
};

inline Check within_3se(std::string name, double expected, double estimate, double se) {
    return {std::move(name), expected, estimate, se, std::abs(estimate - expected) <= 3.0 * se};
}

inline unsigned env_threads() {
    const char* s = std::getenv("PRIVACY_LAB_THREADS");
    if (!s || !*s) return 0;
    try {
        const long v = std::stol(s);
        return v > 0 ? static_cast<unsigned>(v) : 0u;
    } catch (...) {
        throw ParamError(ParamErrorCode::InvalidArgument, "PRIVACY_LAB_THREADS",
                         "must be a non-negative integer");
    }
}

/// Expected P&L for an arbitrary linear profile (lambda, beta); reduces to the
/// equilibrium closed forms when lambda beta = 1/2.
inline WelfareDecomposition profile_welfare(const MarketParams& p, const Equilibrium& eq) {
    const double sv2 = p.sigma_v * p.sigma_v;
    const double pi_i = eq.beta * sv2 - eq.lambda * eq.beta * eq.beta * sv2;
    const double pi_n = -eq.lambda * p.sigma_u * p.sigma_u;
    return {pi_i, pi_n, -(pi_i + pi_n)};
}

}  // namespace detail

inline bool format_opt_set(const CLI::App& app) {
    for (const CLI::App* sub : app.get_subcommands()) {
        const CLI::Option* o = sub->get_option_no_throw("--format");
        if (o && o->count() > 0) return true;
    }
    return false;
}

/// Command-line front end. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kyle equilibrium under privacy noise: closed forms, oracles and Monte Carlo"};
    app.name("privacy-lab");
    app.require_subcommand(1);

    MarketParams flags;
    std::string config_path;
    std::string format_name;
    std::string output_path;
    std::uint64_t n_paths = 1'000'000, seed = 42, chunk_size = 65'536;
    unsigned threads = 0;
    double beta_scale = 1.0;
    bool batched = false;
    std::int64_t tau = 1;
    std::vector<double> eps_values;
    double eps_max = 5.0;
    int points = 11;
    std::vector<std::string> outputs;
    double daily_volume = 1.0e9, fee_bps = 10.0;
    std::string out_dir = "paper_artifacts";

    std::vector<CLI::Option*> market_opts;
    auto add_market = [&](CLI::App* sub) {
        market_opts.push_back(sub->add_option("--p0", flags.p0, "Prior mean price"));
        market_opts.push_back(sub->add_option("--sigma-v", flags.sigma_v, "Value std-dev"));
        market_opts.push_back(sub->add_option("--sigma-u", flags.sigma_u, "Noise-flow std-dev"));
        market_opts.push_back(sub->add_option("--sigma-eps", flags.sigma_eps, "Privacy-noise std-dev"));
        sub->add_option("--config", config_path, "JSON config file; flags override it");
        sub->add_option("--format", format_name, "human, csv or json");
        sub->add_option("--output", output_path, "Write to this file instead of stdout");
    };

    auto* eq_cmd = app.add_subcommand("equilibrium", "Closed-form equilibrium with fixed-point cross-check");
    auto* dec_cmd = app.add_subcommand("decompose", "Welfare decomposition, subsidy and break-even fee");
    auto* fee_cmd = app.add_subcommand("fee", "Break-even fee and fee-revenue comparison");
    auto* sweep_cmd = app.add_subcommand("sweep", "Closed forms over a sigma_eps grid");
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo verification of the closed forms");
    auto* rep_cmd = app.add_subcommand("reproduce-paper", "Reference tables, curve and fee comparison");
    for (auto* sub : {eq_cmd, dec_cmd, fee_cmd, sweep_cmd, sim_cmd}) add_market(sub);

    fee_cmd->add_option("--daily-volume", daily_volume, "Daily volume in currency");
    fee_cmd->add_option("--fee-bps", fee_bps, "Fee in basis points");

    auto* opt_values = sweep_cmd->add_option("--sigma-eps-values", eps_values, "Explicit sigma_eps grid")
                           ->delimiter(',');
    sweep_cmd->add_option("--sigma-eps-max", eps_max, "Upper end of a uniform grid");
    sweep_cmd->add_option("--points", points, "Points in the uniform grid");
    auto* opt_outputs = sweep_cmd->add_option("--outputs", outputs,
                                              "equilibrium,welfare,subsidy_analysis,fee")
                            ->delimiter(',');

    auto* opt_n = sim_cmd->add_option("--n-paths", n_paths, "Number of simulated paths");
    auto* opt_seed = sim_cmd->add_option("--seed", seed, "64-bit seed");
    auto* opt_chunk = sim_cmd->add_option("--chunk-size", chunk_size, "Paths per seeded chunk");
    auto* opt_threads = sim_cmd->add_option("--threads", threads, "Thread cap (0 = auto)");
    sim_cmd->add_option("--beta-scale", beta_scale, "Multiply the informed coefficient");
    sim_cmd->add_flag("--batched", batched, "Simulate the batched-swap variant");
    auto* opt_tau = sim_cmd->add_option("--tau", tau, "Batch length in periods");

    rep_cmd->add_option("--out-dir", out_dir, "Directory for the artifact bundle");
    rep_cmd->add_option("--format", format_name, "human or json");

    std::vector<std::string> argv_store = args;
    std::vector<char*> argv;
    std::string prog = "privacy-lab";
    argv.push_back(prog.data());
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    RunConfig cfg;
    std::ostringstream body;
    int code = kExitOk;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        for (auto* o : market_opts) {
            if (o->count() == 0) continue;
            const std::string name = o->get_name();
            if (name == "--p0") cfg.market.p0 = flags.p0;
            if (name == "--sigma-v") cfg.market.sigma_v = flags.sigma_v;
            if (name == "--sigma-u") cfg.market.sigma_u = flags.sigma_u;
            if (name == "--sigma-eps") cfg.market.sigma_eps = flags.sigma_eps;
        }
        if (format_opt_set(app)) cfg.format = parse_format(format_name);
        if (!output_path.empty()) cfg.output_path = output_path;
        const MarketParams market = validate_params(cfg.market);
        const Format fmt = cfg.format;

        if (app.got_subcommand(eq_cmd)) {
            const Equilibrium cf = solve_closed_form(market);
            const Equilibrium fp = solve_fixed_point(market);
            const double disc = std::abs(fp.lambda - cf.lambda) / cf.lambda;
            const double lam_tilde = zero_profit_lambda_unconditional(market);
            if (fmt == Format::Json) {
                nlohmann::json j = {{"command", "equilibrium"}, {"format", "json"}, {"market", market_json(market)}};
                j["result"] = {{"lambda", cf.lambda},
                               {"beta", cf.beta},
                               {"lambda_fixed_point", fp.lambda},
                               {"beta_fixed_point", fp.beta},
                               {"relative_discrepancy", disc},
                               {"lambda_unconditional_zero_profit", lam_tilde}};
                body << j.dump(2) << '\n';
            } else if (fmt == Format::Csv) {
                body << "method,lambda,beta\n"
                     << "closed_form," << format_full(cf.lambda) << ',' << format_full(cf.beta) << '\n'
                     << "fixed_point," << format_full(fp.lambda) << ',' << format_full(fp.beta) << '\n';
            } else {
                body << "λ  = " << sig6(cf.lambda) << "  (closed form)\n"
                     << "β  = " << sig6(cf.beta) << "  (closed form)\n"
                     << "λ  = " << sig6(fp.lambda) << "  (fixed-point oracle)\n"
                     << "β  = " << sig6(fp.beta) << "  (fixed-point oracle)\n"
                     << "relative discrepancy = " << sig6(disc) << '\n'
                     << "λβ = " << sig6(cf.lambda * cf.beta) << '\n'
                     << "λ̃  = " << sig6(lam_tilde)
                     << "  (real-flow zero-profit slope, comparison only)\n";
            }
        } else if (app.got_subcommand(dec_cmd) || app.got_subcommand(fee_cmd)) {
            const bool is_fee = app.got_subcommand(fee_cmd);
            const WelfareDecomposition w = welfare_decomposition(market);
            const SubsidyAnalysis a = subsidy_analysis(market);
            const FeeBreakEven f = break_even_fee(market);
            const IncrementalGains g = incremental_gains(market);
            std::optional<FeeComparison> cmp;
            if (is_fee) cmp = fee_revenue_comparison(market, daily_volume, fee_bps);
            if (fmt == Format::Json) {
                nlohmann::json j = {{"command", is_fee ? "fee" : "decompose"}, {"format", "json"},
                                    {"market", market_json(market)}};
                nlohmann::json r;
                r["welfare"] = {{"pi_I", w.pi_I}, {"pi_N", w.pi_N}, {"pi_M", w.pi_M},
                                {"subsidy", w.subsidy()}};
                r["subsidy_analysis"] = {{"d1", a.d1}, {"d2", a.d2}, {"inflection", a.inflection},
                                         {"low_privacy_coeff", a.low_privacy_coeff},
                                         {"high_privacy_slope", a.high_privacy_slope}};
                r["incremental_gains"] = {{"informed", g.informed}, {"noise", g.noise}};
                r["break_even_fee"] = {{"e_abs_x", f.e_abs_x}, {"e_abs_u", f.e_abs_u},
                                       {"q_total", f.q_total}, {"fee_rate", f.fee_rate},
                                       {"fee_on_informed", f.fee_on_informed},
                                       {"fee_on_noise", f.fee_on_noise},
                                       {"net_pi_I", f.net_pi_I}, {"net_pi_N", f.net_pi_N}};
                if (cmp) r["fee_comparison"] = to_json(*cmp);
                j["result"] = r;
                body << j.dump(2) << '\n';
            } else if (fmt == Format::Csv) {
                body << "quantity,value\n";
                auto row = [&](const char* k, double v) { body << k << ',' << format_full(v) << '\n'; };
                row("pi_I", w.pi_I);
                row("pi_N", w.pi_N);
                row("pi_M", w.pi_M);
                row("subsidy", w.subsidy());
                row("d1", a.d1);
                row("d2", a.d2);
                row("inflection", a.inflection);
                row("e_abs_x", f.e_abs_x);
                row("e_abs_u", f.e_abs_u);
                row("q_total", f.q_total);
                row("fee_rate", f.fee_rate);
                row("fee_on_informed", f.fee_on_informed);
                row("fee_on_noise", f.fee_on_noise);
                row("net_pi_I", f.net_pi_I);
                row("net_pi_N", f.net_pi_N);
                if (cmp) {
                    row("fee_revenue", cmp->revenue);
                    row("fee_shortfall", cmp->shortfall);
                    row("fee_surplus", cmp->surplus);
                }
            } else {
                body << "π_I = " << sig6(w.pi_I) << '\n'
                     << "π_N = " << sig6(w.pi_N) << '\n'
                     << "π_M = " << sig6(w.pi_M) << '\n'
                     << "subsidy |π_M| = " << sig6(w.subsidy()) << "  (≈ "
                     << format_grouped(w.subsidy()) << " per period)\n"
                     << "∂|π_M|/∂σε = " << sig6(a.d1) << ",  ∂²|π_M|/∂σε² = " << sig6(a.d2)
                     << ",  inflection σε* = " << sig6(a.inflection) << '\n'
                     << "E|x| = " << sig6(f.e_abs_x) << ",  E|u| = " << sig6(f.e_abs_u)
                     << ",  Q = " << sig6(f.q_total) << '\n'
                     << "break-even fee f = " << sig6(f.fee_rate) << " per unit volume (fee floor "
                     << sig6(w.subsidy()) << ")\n"
                     << "fee on informed = " << sig6(f.fee_on_informed)
                     << ",  fee on noise = " << sig6(f.fee_on_noise) << '\n'
                     << "net π_I = " << sig6(f.net_pi_I) << ",  net π_N = " << sig6(f.net_pi_N) << '\n';
                if (cmp) {
                    body << "fee revenue = " << format_grouped(cmp->revenue) << " vs subsidy "
                         << format_grouped(cmp->subsidy);
                    if (cmp->shortfall > 0.0)
                        body << ": shortfall " << format_grouped(cmp->shortfall);
                    else
                        body << ": surplus " << format_grouped(cmp->surplus);
                    if (cmp->shortfall_pct) body << " (" << sig6(*cmp->shortfall_pct) << "% of revenue)";
                    body << '\n';
                }
            }
        } else if (app.got_subcommand(sweep_cmd)) {
            SweepSpec spec = cfg.sweep.value_or(SweepSpec{});
            spec.params_base = market;
            if (opt_values->count() > 0) {
                spec.sigma_eps_values = eps_values;
            } else if (spec.sigma_eps_values.empty()) {
                if (points < 2)
                    throw ParamError(ParamErrorCode::InvalidArgument, "points", "must be >= 2");
                for (int k = 0; k < points; ++k)
                    spec.sigma_eps_values.push_back(k == points - 1 ? eps_max
                                                                    : eps_max * k / (points - 1));
            }
            if (opt_outputs->count() > 0) spec.outputs = parse_outputs(outputs);
            const auto rows = sweep(spec);
            if (fmt == Format::Json) {
                nlohmann::json j = {{"command", "sweep"}, {"format", "json"}, {"market", market_json(market)}};
                j["sweep"] = {{"sigma_eps_values", spec.sigma_eps_values},
                              {"outputs", output_list(spec.outputs)}};
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& r : rows) {
                    nlohmann::json o = {{"sigma_eps", r.sigma_eps}, {"note", r.note}};
                    auto put = [&](const char* k, const std::optional<double>& v) {
                        if (v) o[k] = *v;
                    };
                    put("lambda", r.lambda);
                    put("beta", r.beta);
                    put("pi_I", r.pi_I);
                    put("pi_N", r.pi_N);
                    put("pi_M", r.pi_M);
                    put("subsidy", r.subsidy);
                    put("d1", r.d1);
                    put("d2", r.d2);
                    put("fee_rate", r.fee_rate);
                    arr.push_back(o);
                }
                j["result"] = arr;
                body << j.dump(2) << '\n';
            } else if (fmt == Format::Csv) {
                write_report_csv(body, rows);
            } else {
                auto cell = [](const std::optional<double>& v) { return v ? format_fixed(*v, 3) : std::string("-"); };
                body << std::left << std::setw(10) << "σε" << std::setw(9) << "λ" << std::setw(9)
                     << "β" << std::setw(9) << "|π_M|" << "note\n";
                for (const auto& r : rows)
                    body << std::setw(8) << format_fixed(r.sigma_eps, 3) << std::setw(8)
                         << cell(r.lambda) << std::setw(8) << cell(r.beta) << std::setw(8)
                         << cell(r.subsidy) << r.note << '\n';
            }
        } else if (app.got_subcommand(sim_cmd)) {
            SimConfig sim = cfg.sim.value_or(SimConfig{n_paths, seed, chunk_size});
            if (opt_n->count() > 0) sim.n_paths = n_paths;
            if (opt_seed->count() > 0) sim.seed = seed;
            if (opt_chunk->count() > 0) sim.chunk_size = chunk_size;
            sim.threads = opt_threads->count() > 0 ? threads : detail::env_threads();
            sim.storage = StorageMode::SummaryOnly;
            if (opt_tau->count() > 0) cfg.tau = tau;
            if (!(beta_scale > 0.0) || !std::isfinite(beta_scale))
                throw ParamError(ParamErrorCode::InvalidArgument, "beta_scale", "must be > 0");

            std::vector<detail::Check> checks;
            nlohmann::json extra;
            if (batched) {
                const BatchParams bp = validate_batch({market, cfg.tau});
                Equilibrium eq = batched_equilibrium(bp);
                eq.beta *= beta_scale;
                const WelfareEstimate w = simulate_batched(bp, eq, sim);
                MarketParams pooled = market;
                pooled.sigma_u = market.sigma_u * std::sqrt(static_cast<double>(bp.tau));
                pooled.sigma_eps = 0.0;
                const WelfareDecomposition ref = detail::profile_welfare(pooled, eq);
                checks.push_back(detail::within_3se("pi_I", ref.pi_I, w.mean_pi_I, w.se_pi_I));
                checks.push_back(detail::within_3se("pi_N", ref.pi_N, w.mean_pi_N, w.se_pi_N));
                checks.push_back(detail::within_3se("pi_M", ref.pi_M, w.mean_pi_M, w.se_pi_M));
                extra = {{"lambda_batch", eq.lambda}, {"beta_batch", eq.beta}, {"tau", bp.tau}};
            } else {
                Equilibrium eq = solve_closed_form(market);
                eq.beta *= beta_scale;
                const PathSample sample = simulate(market, eq, sim);
                const WelfareEstimate w = estimate_welfare(sample);
                const WelfareDecomposition ref = beta_scale == 1.0 ? welfare_decomposition(market)
                                                                   : detail::profile_welfare(market, eq);
                checks.push_back(detail::within_3se("pi_I", ref.pi_I, w.mean_pi_I, w.se_pi_I));
                checks.push_back(detail::within_3se("pi_N", ref.pi_N, w.mean_pi_N, w.se_pi_N));
                checks.push_back(detail::within_3se("pi_M", ref.pi_M, w.mean_pi_M, w.se_pi_M));

                const RegressionSlope slope = estimate_lambda_regression(sample);
                checks.push_back(detail::within_3se("ols_posterior_slope",
                                                    projection_coefficient(market, eq.beta),
                                                    slope.slope, slope.se));
                const PriceMoments pm = estimate_price_moments(sample, market);
                const double lb = eq.lambda * eq.beta;
                const double s2 = market.sigma_u * market.sigma_u + market.sigma_eps * market.sigma_eps;
                checks.push_back(detail::within_3se("price_on_value_slope", lb, pm.fit.slope,
                                                    pm.fit.slope_se));
                checks.push_back(detail::within_3se("price_on_value_intercept",
                                                    market.p0 * (1.0 - lb), pm.fit.intercept,
                                                    pm.fit.intercept_se));
                checks.push_back(detail::within_3se("price_residual_variance",
                                                    eq.lambda * eq.lambda * s2,
                                                    pm.fit.residual_variance, pm.residual_variance_se));
                const CoMoments& vs = sample.summary.value_on_signal;
                const double var_yt = eq.beta * eq.beta * market.sigma_v * market.sigma_v + s2;
                checks.push_back(detail::within_3se("mean_y_tilde", 0.0, vs.mean_a,
                                                    std::sqrt(var_yt / static_cast<double>(sample.n))));
                extra = {{"lambda", eq.lambda}, {"beta", eq.beta}, {"beta_scale", beta_scale}};
            }
            bool all = true;
            for (const auto& c : checks) all = all && c.pass;
            code = all ? kExitOk : kExitVerification;

            if (fmt == Format::Json) {
                nlohmann::json j = {{"command", "simulate"}, {"format", "json"},
                                    {"market", market_json(market)},
                                    {"sim", sim_json(sim)}};
                if (batched) j["batch"] = {{"tau", cfg.tau}};
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& c : checks)
                    arr.push_back({{"name", c.name}, {"closed_form", c.expected},
                                   {"estimate", c.estimate}, {"se", c.se},
                                   {"pass", c.pass}});
                j["result"] = {{"checks", arr}, {"profile", extra}, {"all_pass", all}};
                body << j.dump(2) << '\n';
            } else if (fmt == Format::Csv) {
                body << "check,closed_form,estimate,se,status\n";
                for (const auto& c : checks)
                    body << c.name << ',' << format_full(c.expected) << ',' << format_full(c.estimate)
                         << ',' << format_full(c.se) << ',' << (c.pass ? "PASS" : "FAIL") << '\n';
            } else {
                body << "n_paths = " << sim.n_paths << ", seed = " << sim.seed
                     << ", chunk_size = " << sim.chunk_size << (batched ? ", batched" : "") << '\n';
                for (const auto& c : checks)
                    body << std::left << std::setw(26) << c.name << " closed form " << std::setw(13)
                         << sig6(c.expected) << " MC " << std::setw(13) << sig6(c.estimate)
                         << " se " << std::setw(12) << sig6(c.se) << (c.pass ? "PASS" : "FAIL")
                         << '\n';
                body << (all ? "all checks PASS at 3 se\n" : "some checks FAIL at 3 se\n");
            }
        } else if (app.got_subcommand(rep_cmd)) {
            const ReproductionBundle b = build_reproduction();
            write_reproduction(b, out_dir);
            code = b.all_pass() ? kExitOk : kExitVerification;
            if (fmt == Format::Json) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& c : b.checks)
                    arr.push_back({{"name", c.name}, {"expected", c.expected},
                                   {"actual", c.actual}, {"rule", c.rule}, {"pass", c.pass}});
                body << nlohmann::json{{"command", "reproduce-paper"}, {"out_dir", out_dir},
                                       {"result", {{"checks", arr}, {"all_pass", b.all_pass()}}}}
                            .dump(2)
                     << '\n';
            } else {
                body << "wrote table1.csv, table2.csv, figure1.csv, figure1.json, "
                        "fee_comparison.json to "
                     << out_dir << '\n';
                for (const auto& c : b.checks) {
                    if (c.pass) continue;
                    body << "MISMATCH " << c.name << ": expected " << format_full(c.expected)
                         << ", got " << format_full(c.actual) << " (" << c.rule << ")\n";
                }
                body << b.checks.size() << " checks, "
                     << (b.all_pass() ? "all within tolerance\n" : "some out of tolerance\n");
            }
        }
    } catch (const ParamError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ResourceLimit& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    if (!cfg.output_path.empty()) {
        std::ofstream f(cfg.output_path);
        if (!f) {
            err << "error: cannot write " << cfg.output_path << '\n';
            return kExitUsage;
        }
        f << body.str();
    } else {
        out << body.str();
    }
    return code;
}

}  // namespace privacy_lab::cli
