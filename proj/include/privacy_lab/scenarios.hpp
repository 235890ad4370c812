#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "privacy_lab/equilibrium.hpp"
#include "privacy_lab/params.hpp"
#include "privacy_lab/welfare.hpp"

namespace privacy_lab {

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

/// 17 significant digits: round-trips any double exactly.
inline std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
    return buf;
}

/// Fixed decimals, ties to even on the exact binary value.
inline std::string format_fixed(double x, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
    std::string s = buf;
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

inline double round_to(double x, int decimals) { return std::stod(format_fixed(x, decimals)); }

/// Integer with thousands separators, rounded to nearest.
inline std::string format_grouped(double x) {
    const long long n = std::llround(x);
    std::string digits = std::to_string(n < 0 ? -n : n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return n < 0 ? "-" + out : out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepOutput : unsigned {
    Equilibrium = 1u << 0,
    Welfare = 1u << 1,
    SubsidyAnalysis = 1u << 2,
    Fee = 1u << 3,
};

inline constexpr unsigned kAllOutputs = 0xF;

struct SweepSpec {
    MarketParams params_base;
    std::vector<double> sigma_eps_values;
    unsigned outputs = kAllOutputs;

    bool wants(SweepOutput o) const { return (outputs & static_cast<unsigned>(o)) != 0; }
};

struct ReportRow {
    double sigma_eps = 0.0;
    std::optional<double> lambda;
    std::optional<double> beta;
    std::optional<double> pi_I;
    std::optional<double> pi_N;
    std::optional<double> pi_M;
    std::optional<double> subsidy;
    std::optional<double> d1;
    std::optional<double> d2;
    std::optional<double> fee_rate;
    std::string note;
};

/// Regime label in the wording of the dimensionless reference table.
inline std::string regime_note(double sigma_eps, double sigma_u) {
    const double r = sigma_eps / sigma_u;
    auto near = [&](double t) { return std::abs(r - t) <= 1e-9 * t; };
    if (sigma_eps == 0.0) return "textbook Kyle";
    if (near(1.0)) return "sigma_eps = sigma_u";
    if (near(std::numbers::sqrt2)) return "sigma_eps = sigma_eps* (inflection)";
    if (r < 1.0) return "low-privacy regime";
    if (r < std::numbers::sqrt2) return "approaching inflection";
    if (r <= 2.5) return "past inflection";
    if (r <= 4.0) return "high-privacy";
    return "far high-privacy";
}

inline void validate_sweep(const SweepSpec& spec) {
    validate_params(spec.params_base);
    if (spec.sigma_eps_values.empty())
        throw ParamError(ParamErrorCode::InvalidArgument, "sigma_eps_values", "must be non-empty");
    for (std::size_t i = 0; i < spec.sigma_eps_values.size(); ++i) {
        const double s = spec.sigma_eps_values[i];
        if (!std::isfinite(s))
            throw ParamError(ParamErrorCode::NonFiniteInput, "sigma_eps_values", "must be finite");
        if (s < 0.0)
            throw ParamError(ParamErrorCode::NegativeSigmaEps, "sigma_eps_values",
                             "must be >= 0");
        if (i > 0 && !(s > spec.sigma_eps_values[i - 1]))
            throw ParamError(ParamErrorCode::InvalidArgument, "sigma_eps_values",
                             "must be strictly increasing");
    }
}

inline std::vector<ReportRow> sweep(const SweepSpec& spec) {
    validate_sweep(spec);
    std::vector<ReportRow> rows;
    rows.reserve(spec.sigma_eps_values.size());
    for (double s : spec.sigma_eps_values) {
        MarketParams p = spec.params_base;
        p.sigma_eps = s;
        ReportRow row;
        row.sigma_eps = s;
        row.note = regime_note(s, p.sigma_u);
        if (spec.wants(SweepOutput::Equilibrium)) {
            const Equilibrium eq = solve_closed_form(p);
            row.lambda = eq.lambda;
            row.beta = eq.beta;
        }
        if (spec.wants(SweepOutput::Welfare)) {
            const WelfareDecomposition w = welfare_decomposition(p);
            row.pi_I = w.pi_I;
            row.pi_N = w.pi_N;
            row.pi_M = w.pi_M;
            row.subsidy = w.subsidy();
        }
        if (spec.wants(SweepOutput::SubsidyAnalysis)) {
            const SubsidyAnalysis a = subsidy_analysis(p);
            row.subsidy = a.subsidy;
            row.d1 = a.d1;
            row.d2 = a.d2;
        }
        if (spec.wants(SweepOutput::Fee)) row.fee_rate = break_even_fee(p).fee_rate;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline constexpr const char* kReportCsvHeader =
    "sigma_eps,lambda,beta,pi_I,pi_N,pi_M,subsidy,d1,d2,fee_rate,note";

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
    auto cell = [](const std::optional<double>& v) { return v ? format_full(*v) : std::string(); };
    os << kReportCsvHeader << '\n';
    for (const auto& r : rows) {
        os << format_full(r.sigma_eps) << ',' << cell(r.lambda) << ',' << cell(r.beta) << ','
           << cell(r.pi_I) << ',' << cell(r.pi_N) << ',' << cell(r.pi_M) << ','
           << cell(r.subsidy) << ',' << cell(r.d1) << ',' << cell(r.d2) << ','
           << cell(r.fee_rate) << ',' << csv_quote(r.note) << '\n';
    }
}

/// The dimensionless grid: sigma_v = sigma_u = 1 and
/// sigma_eps in {0, 0.5, 1, sqrt(2), 2, 3, 5} times sigma_u.
inline SweepSpec table1_spec(MarketParams base = {0.0, 1.0, 1.0, 0.0}) {
    SweepSpec spec;
    spec.params_base = base;
    const double su = base.sigma_u;
    spec.sigma_eps_values = {0.0, 0.5 * su, su, std::numbers::sqrt2 * su, 2.0 * su, 3.0 * su,
                             5.0 * su};
    return spec;
}

// ---------------------------------------------------------------------------
// Calibrated subsidy table
// ---------------------------------------------------------------------------

/// BTC/USDT per-day calibration: sigma_v = $3,000, sigma_u = 1,000 BTC.
inline MarketParams btc_calibration() { return {0.0, 3000.0, 1000.0, 0.0}; }

struct BtcRow {
    double ratio = 0.0;  // sigma_eps / sigma_u
    std::string ratio_label;
    double sigma_eps = 0.0;
    double subsidy_usd = 0.0;
    double fraction = 0.0;  // subsidy / (sigma_v sigma_u)
};

inline std::vector<BtcRow> table_btc(MarketParams calibration = btc_calibration()) {
    validate_params(calibration);
    const std::vector<std::pair<double, std::string>> ratios = {
        {0.1, "0.1"}, {0.5, "0.5"}, {1.0, "1.0"}, {std::numbers::sqrt2, "sqrt2"}, {2.0, "2.0"}};
    std::vector<BtcRow> rows;
    for (const auto& [ratio, label] : ratios) {
        MarketParams p = calibration;
        p.sigma_eps = ratio * calibration.sigma_u;
        BtcRow r;
        r.ratio = ratio;
        r.ratio_label = label;
        r.sigma_eps = p.sigma_eps;
        r.subsidy_usd = privacy_subsidy(p);
        r.fraction = r.subsidy_usd / (p.sigma_v * p.sigma_u);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline constexpr const char* kBtcCsvHeader =
    "sigma_eps_over_sigma_u,sigma_eps,subsidy_usd,subsidy_usd_rounded,fraction,fraction_rounded";

inline void write_btc_csv(std::ostream& os, const std::vector<BtcRow>& rows) {
    os << kBtcCsvHeader << '\n';
    for (const auto& r : rows) {
        os << format_full(r.ratio) << ',' << format_full(r.sigma_eps) << ','
           << format_full(r.subsidy_usd) << ',' << std::llround(r.subsidy_usd) << ','
           << format_full(r.fraction) << ',' << format_fixed(r.fraction, 3) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Subsidy curve
// ---------------------------------------------------------------------------

struct SubsidyCurve {
    std::vector<std::pair<double, double>> points;  // (sigma_eps, subsidy)
    double inflection = 0.0;
    double inflection_subsidy = 0.0;
};

inline SubsidyCurve subsidy_curve(const MarketParams& params, double sigma_eps_max, int n_points) {
    validate_params(params);
    if (n_points < 2)
        throw ParamError(ParamErrorCode::InvalidArgument, "n_points", "must be >= 2");
    if (!(sigma_eps_max > 0.0) || !std::isfinite(sigma_eps_max))
        throw ParamError(ParamErrorCode::InvalidArgument, "sigma_eps_max",
                         "must be finite and > 0");
    SubsidyCurve c;
    c.points.reserve(n_points);
    for (int k = 0; k < n_points; ++k) {
        MarketParams p = params;
        p.sigma_eps = k == n_points - 1 ? sigma_eps_max : sigma_eps_max * k / (n_points - 1);
        c.points.emplace_back(p.sigma_eps, privacy_subsidy(p));
    }
    MarketParams at = params;
    const SubsidyAnalysis a = subsidy_analysis(params);
    at.sigma_eps = a.inflection;
    c.inflection = a.inflection;
    c.inflection_subsidy = privacy_subsidy(at);
    return c;
}

inline void write_curve_csv(std::ostream& os, const SubsidyCurve& c) {
    os << "sigma_eps,subsidy\n";
    for (const auto& [s, v] : c.points) os << format_full(s) << ',' << format_full(v) << '\n';
}

/// Sidecar body. Emitted as text so the value keeps 17 significant digits.
inline std::string curve_sidecar_json(const SubsidyCurve& c) {
    return "{\"inflection\": " + format_full(c.inflection) +
           ", \"inflection_subsidy\": " + format_full(c.inflection_subsidy) + "}\n";
}

// ---------------------------------------------------------------------------
// Fee revenue vs subsidy
// ---------------------------------------------------------------------------

struct FeeComparison {
    double daily_volume_usd = 0.0;
    double fee_bps = 0.0;
    double revenue = 0.0;
    double subsidy = 0.0;
    double shortfall = 0.0;  // max(subsidy - revenue, 0)
    double surplus = 0.0;    // max(revenue - subsidy, 0)
    std::optional<double> shortfall_pct;  // shortfall relative to revenue, percent
};

inline FeeComparison fee_revenue_comparison(const MarketParams& params, double daily_volume_usd,
                                            double fee_bps) {
    validate_params(params);
    if (!(daily_volume_usd > 0.0) || !std::isfinite(daily_volume_usd))
        throw ParamError(ParamErrorCode::InvalidArgument, "daily_volume_usd", "must be > 0");
    if (!(fee_bps >= 0.0) || !std::isfinite(fee_bps))
        throw ParamError(ParamErrorCode::InvalidArgument, "fee_bps", "must be >= 0");
    FeeComparison f;
    f.daily_volume_usd = daily_volume_usd;
    f.fee_bps = fee_bps;
    f.revenue = daily_volume_usd * fee_bps * 1e-4;
    f.subsidy = privacy_subsidy(params);
    f.shortfall = std::max(f.subsidy - f.revenue, 0.0);
    f.surplus = std::max(f.revenue - f.subsidy, 0.0);
    if (f.revenue > 0.0) f.shortfall_pct = 100.0 * (f.subsidy - f.revenue) / f.revenue;
    return f;
}

inline nlohmann::json to_json(const FeeComparison& f) {
    nlohmann::json j = {
        {"daily_volume_usd", f.daily_volume_usd},
        {"fee_bps", f.fee_bps},
        {"revenue", f.revenue},
        {"subsidy", f.subsidy},
        {"shortfall", f.shortfall},
        {"surplus", f.surplus},
    };
    j["shortfall_pct"] = f.shortfall_pct ? nlohmann::json(*f.shortfall_pct) : nlohmann::json();
    return j;
}

// ---------------------------------------------------------------------------
// Reference reproduction
// ---------------------------------------------------------------------------

struct ReproductionCheck {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    std::string rule;
    bool pass = false;
};

struct Table1Reference {
    double sigma_eps, lambda, beta, subsidy;
};

/// Reference dimensionless values (3 decimals).
inline const std::vector<Table1Reference>& table1_reference() {
    static const std::vector<Table1Reference> ref = {
        {0.0, 0.500, 1.000, 0.000},
        {0.5, 0.447, 1.118, 0.112},
        {1.0, 0.354, 1.414, 0.354},
        {std::numbers::sqrt2, 0.289, 1.732, 0.577},
        {2.0, 0.224, 2.236, 0.894},
        {3.0, 0.158, 3.162, 1.423},
        {5.0, 0.098, 5.099, 2.451},
    };
    return ref;
}

struct Table2Reference {
    double ratio, subsidy_usd, fraction;
};

/// Reference approximate USD values and fractions of sigma_v sigma_u.
inline const std::vector<Table2Reference>& table2_reference() {
    static const std::vector<Table2Reference> ref = {
        {0.1, 15'000.0, 0.005},
        {0.5, 335'000.0, 0.112},
        {1.0, 1'060'000.0, 0.354},
        {std::numbers::sqrt2, 1'730'000.0, 0.577},
        {2.0, 2'680'000.0, 0.894},
    };
    return ref;
}

inline std::vector<ReproductionCheck> check_table1(const std::vector<ReportRow>& rows) {
    std::vector<ReproductionCheck> out;
    const auto& ref = table1_reference();
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const ReportRow* row = i < rows.size() ? &rows[i] : nullptr;
        auto add = [&](const char* col, double expected, std::optional<double> actual) {
            ReproductionCheck c;
            c.name = "table1[sigma_eps=" + format_fixed(ref[i].sigma_eps, 3) + "]." + col;
            c.expected = expected;
            c.actual = actual.value_or(std::nan(""));
            c.rule = "equal after rounding to 3 decimals";
            c.pass = actual && format_fixed(*actual, 3) == format_fixed(expected, 3);
            out.push_back(std::move(c));
        };
        add("lambda", ref[i].lambda, row ? row->lambda : std::nullopt);
        add("beta", ref[i].beta, row ? row->beta : std::nullopt);
        add("subsidy", ref[i].subsidy, row ? row->subsidy : std::nullopt);
    }
    return out;
}

inline std::vector<ReproductionCheck> check_table2(const std::vector<BtcRow>& rows) {
    std::vector<ReproductionCheck> out;
    const auto& ref = table2_reference();
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const bool have = i < rows.size();
        const std::string tag = "table2[ratio=" + format_fixed(ref[i].ratio, 3) + "]";
        ReproductionCheck usd{tag + ".subsidy_usd", ref[i].subsidy_usd,
                              have ? rows[i].subsidy_usd : std::nan(""),
                              "within 1% relative", false};
        usd.pass = have && std::abs(usd.actual - usd.expected) <= 0.01 * usd.expected;
        ReproductionCheck frac{tag + ".fraction", ref[i].fraction,
                               have ? rows[i].fraction : std::nan(""),
                               "equal after rounding to 3 decimals", false};
        frac.pass = have && format_fixed(frac.actual, 3) == format_fixed(frac.expected, 3);
        out.push_back(std::move(usd));
        out.push_back(std::move(frac));
    }
    return out;
}

inline std::vector<ReproductionCheck> check_fee_comparison(const FeeComparison& f) {
    std::vector<ReproductionCheck> out;
    out.push_back({"fee.revenue", 1.0e6, f.revenue, "within 1e-9 relative",
                   std::abs(f.revenue - 1.0e6) <= 1e-9 * 1.0e6});
    out.push_back({"fee.subsidy", 1.0607e6, f.subsidy, "within 1% relative",
                   std::abs(f.subsidy - 1.0607e6) <= 0.01 * 1.0607e6});
    const double pct = f.shortfall_pct.value_or(std::nan(""));
    out.push_back({"fee.shortfall_pct", 6.0, pct, "within [5, 7]", pct >= 5.0 && pct <= 7.0});
    return out;
}

inline std::vector<ReproductionCheck> check_curve(const SubsidyCurve& c, double sigma_u) {
    std::vector<ReproductionCheck> out;
    out.push_back({"figure1.inflection", std::numbers::sqrt2 * sigma_u, c.inflection,
                   "within 1e-12 relative",
                   std::abs(c.inflection - std::numbers::sqrt2 * sigma_u) <=
                       1e-12 * std::numbers::sqrt2 * sigma_u});
    out.push_back({"figure1.inflection_subsidy", 0.577, c.inflection_subsidy,
                   "equal after rounding to 3 decimals",
                   format_fixed(c.inflection_subsidy, 3) == "0.577"});
    bool increasing = true;
    for (std::size_t i = 1; i < c.points.size(); ++i)
        increasing = increasing && c.points[i].second > c.points[i - 1].second;
    out.push_back({"figure1.strictly_increasing", 1.0, increasing ? 1.0 : 0.0, "boolean",
                   increasing});
    return out;
}

struct ReproductionBundle {
    std::vector<ReportRow> table1;
    std::vector<BtcRow> table2;
    SubsidyCurve figure1;
    FeeComparison fee;
    std::vector<ReproductionCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

inline ReproductionBundle build_reproduction() {
    ReproductionBundle b;
    b.table1 = sweep(table1_spec());
    b.table2 = table_btc();
    b.figure1 = subsidy_curve({0.0, 1.0, 1.0, 0.0}, 5.0, 121);
    MarketParams at_unit = btc_calibration();
    at_unit.sigma_eps = at_unit.sigma_u;
    b.fee = fee_revenue_comparison(at_unit, 1.0e9, 10.0);

    for (auto& c : check_table1(b.table1)) b.checks.push_back(std::move(c));
    for (auto& c : check_table2(b.table2)) b.checks.push_back(std::move(c));
    for (auto& c : check_curve(b.figure1, 1.0)) b.checks.push_back(std::move(c));
    for (auto& c : check_fee_comparison(b.fee)) b.checks.push_back(std::move(c));
    return b;
}

/// Writes table1.csv, table2.csv, figure1.csv, figure1.json and
/// fee_comparison.json into dir.
inline void write_reproduction(const ReproductionBundle& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("table1.csv");
        write_report_csv(f, b.table1);
    }
    {
        auto f = open("table2.csv");
        write_btc_csv(f, b.table2);
    }
    {
        auto f = open("figure1.csv");
        write_curve_csv(f, b.figure1);
    }
    {
        auto f = open("figure1.json");
        f << curve_sidecar_json(b.figure1);
    }
    {
        auto f = open("fee_comparison.json");
        f << to_json(b.fee).dump(2) << '\n';
    }
}

}  // namespace privacy_lab
