#include "spendmax/model.hpp"

#include <cmath>
#include <limits>

namespace spendmax {

std::string to_string(LambdaCase c) {
    switch (c) {
        case LambdaCase::Interior: return "LambdaInterior";
        case LambdaCase::Zero: return "LambdaZero";
        case LambdaCase::One: return "LambdaOne";
    }
    return "?";
}

std::string to_string(RhoCase c) {
    return c == RhoCase::EqualsR ? "RhoEqualsR" : "RhoGeneral";
}

ModelParams validate_params(const RawParams& raw) {
    double rho = std::isnan(raw.rho) ? raw.r : raw.rho;

    for (double v : {raw.r, rho, raw.mu, raw.sigma, raw.beta, raw.lambda}) {
        if (!std::isfinite(v)) throw DomainError("all parameters must be finite");
    }
    if (raw.sigma <= 0.0) throw DomainError("sigma must be positive");
    if (raw.beta <= 0.0) throw DomainError("beta must be positive");
    if (raw.r <= 0.0) throw DomainError("r must be positive");
    if (raw.mu <= raw.r) throw DomainError("mu must exceed r (kappa > 0 required)");
    if (raw.lambda < -kSnapTol || raw.lambda > 1.0 + kSnapTol)
        throw DomainError("lambda must lie in [0, 1]");

    double lambda = raw.lambda;
    LambdaCase lc = LambdaCase::Interior;
    if (std::abs(lambda) <= kSnapTol) {
        lambda = 0.0;
        lc = LambdaCase::Zero;
    } else if (std::abs(lambda - 1.0) <= kSnapTol) {
        lambda = 1.0;
        lc = LambdaCase::One;
    }

    RhoCase rc = RhoCase::EqualsR;
    if (std::abs(rho - raw.r) <= kSnapTol * std::max(1.0, std::abs(raw.r))) {
        rho = raw.r;
    } else {
        if (!raw.allow_rho_general)
            throw DomainError("rho != r requires the explicit general-rho opt-in");
        if (rho < 0.0) throw DomainError("rho must be nonnegative");
        if (lc != LambdaCase::Interior)
            throw DomainError("general-rho branch is only available for 0 < lambda < 1");
        rc = RhoCase::General;
    }

    return ModelParams{raw.r, rho, raw.mu, raw.sigma, raw.beta, lambda, CaseTag{lc, rc}};
}

DerivedConstants derive_constants(const ModelParams& p) {
    const double kappa = (p.mu - p.r) / p.sigma;
    double r1, r2;
    if (p.tag.rho_case == RhoCase::EqualsR) {
        // z^2 - z - 2r/kappa^2 = 0.  Discriminant 1 + 8r/kappa^2 > 1, so the
        // '+' root carries no cancellation; the other follows from the product
        // r1*r2 = -2r/kappa^2.
        const double q = 2.0 * p.r / (kappa * kappa);
        r1 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * q));
        r2 = -q / r1;
    } else {
        // (kappa^2/2) z^2 + b z - rho = 0 with b = rho - r - kappa^2/2.
        const double a = 0.5 * kappa * kappa;
        const double b = p.rho - p.r - a;
        const double c = -p.rho;
        const double disc = std::sqrt(b * b - 4.0 * a * c);
        const double big = -(b + std::copysign(disc, b)) / 2.0;  // stable root pair
        double z1 = big / a;
        double z2 = c / big;
        r1 = std::max(z1, z2);
        r2 = std::min(z1, z2);
    }
    return DerivedConstants{kappa, r1, r2};
}

double utility(double x, double beta) {
    return -std::exp(-beta * x) / beta;
}

}  // namespace spendmax
