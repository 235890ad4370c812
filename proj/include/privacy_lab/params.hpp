#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace privacy_lab {

/// Model primitives: v ~ N(p0, sigma_v^2), u ~ N(0, sigma_u^2),
/// eps ~ N(0, sigma_eps^2), mutually independent.
struct MarketParams {
    double p0 = 0.0;
    double sigma_v = 1.0;   // currency units
    double sigma_u = 1.0;   // asset units
    double sigma_eps = 0.0; // asset units
};

/// One batch of tau pooled noise-trader periods cleared at a single price.
struct BatchParams {
    MarketParams base;
    std::int64_t tau = 1;
};

enum class ParamErrorCode {
    NonPositiveSigmaV,
    NonPositiveSigmaU,
    NegativeSigmaEps,
    NonFiniteInput,
    InvalidTau,
    InvalidArgument,
};

inline const char* to_string(ParamErrorCode code) {
    switch (code) {
        case ParamErrorCode::NonPositiveSigmaV: return "NonPositiveSigmaV";
        case ParamErrorCode::NonPositiveSigmaU: return "NonPositiveSigmaU";
        case ParamErrorCode::NegativeSigmaEps: return "NegativeSigmaEps";
        case ParamErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ParamErrorCode::InvalidTau: return "InvalidTau";
        case ParamErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Raised on invalid model input. Carries the offending field name.
class ParamError : public std::invalid_argument {
public:
    ParamError(ParamErrorCode code, std::string field, const std::string& detail)
        : std::invalid_argument(std::string(to_string(code)) + ": " + field + " " + detail),
          code_(code),
          field_(std::move(field)) {}

    ParamErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ParamErrorCode code_;
    std::string field_;
};

/// Checks every constraint on the primitives and returns the input unchanged.
/// Never clamps.
inline MarketParams validate_params(const MarketParams& raw) {
    auto finite = [](const char* field, double value) {
        if (!std::isfinite(value))
            throw ParamError(ParamErrorCode::NonFiniteInput, field, "must be finite");
    };
    finite("p0", raw.p0);
    finite("sigma_v", raw.sigma_v);
    finite("sigma_u", raw.sigma_u);
    finite("sigma_eps", raw.sigma_eps);
    if (!(raw.sigma_v > 0.0))
        throw ParamError(ParamErrorCode::NonPositiveSigmaV, "sigma_v", "must be > 0");
    if (!(raw.sigma_u > 0.0))
        throw ParamError(ParamErrorCode::NonPositiveSigmaU, "sigma_u", "must be > 0");
    if (raw.sigma_eps < 0.0)
        throw ParamError(ParamErrorCode::NegativeSigmaEps, "sigma_eps", "must be >= 0");
    return raw;
}

inline BatchParams validate_batch(const BatchParams& raw) {
    BatchParams out{validate_params(raw.base), raw.tau};
    if (raw.tau < 1)
        throw ParamError(ParamErrorCode::InvalidTau, "tau", "must be >= 1");
    return out;
}

/// sqrt(sigma_u^2 + sigma_eps^2): the effective noise scale seen by the maker.
inline double effective_noise(const MarketParams& p) {
    return std::hypot(p.sigma_u, p.sigma_eps);
}

}  // namespace privacy_lab
