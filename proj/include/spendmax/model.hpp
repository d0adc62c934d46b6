#pragma once

#include <limits>
#include <string>

#include "spendmax/errors.hpp"

namespace spendmax {

// Which closed-form family applies for the reference weight lambda.
enum class LambdaCase { Interior, Zero, One };

// Whether the discount rate equals the interest rate (the baseline
// analytics) or the general-rho extension is active.
enum class RhoCase { EqualsR, General };

struct CaseTag {
    LambdaCase lambda_case = LambdaCase::Interior;
    RhoCase rho_case = RhoCase::EqualsR;
};

std::string to_string(LambdaCase c);
std::string to_string(RhoCase c);

// Raw, unvalidated inputs. rho defaults to r when NaN.  The general-rho
// branch needs extra parameter conditions the closed forms do not police
// by themselves, so it has to be requested explicitly.
struct RawParams {
    double r = 0.05;
    double rho = std::numeric_limits<double>::quiet_NaN();
    double mu = 0.10;
    double sigma = 0.25;
    double beta = 1.0;
    double lambda = 0.5;
    bool allow_rho_general = false;
};

struct ModelParams {
    double r;       // riskless rate
    double rho;     // discount rate
    double mu;      // risky drift
    double sigma;   // risky volatility
    double beta;    // absolute risk aversion
    double lambda;  // weight on the spending-maximum reference
    CaseTag tag;
};

struct DerivedConstants {
    double kappa;  // Sharpe ratio (mu - r) / sigma
    double r1;     // larger root of the characteristic quadratic, > 1
    double r2;     // smaller root, < 0
};

// Lambda (or rho) within this relative distance of an extreme value snaps
// onto the exact special-case branch; the interior formulas degenerate there.
inline constexpr double kSnapTol = 1e-12;

// Checks the standing assumptions (sigma > 0, beta > 0, r > 0, mu > r,
// 0 <= lambda <= 1) and assigns the case tag.  Throws DomainError naming
// the violated constraint.
ModelParams validate_params(const RawParams& raw);

// Sharpe ratio and the two roots of the characteristic quadratic
//   z^2 - z - 2r/kappa^2 = 0                       (rho == r)
//   (kappa^2/2) z^2 + (rho - r - kappa^2/2) z - rho = 0   (general rho)
// computed cancellation-free: large root first, small root via the product.
DerivedConstants derive_constants(const ModelParams& p);

// Exponential utility of the consumption gap: -(1/beta) exp(-beta x).
double utility(double x, double beta);

}  // namespace spendmax
