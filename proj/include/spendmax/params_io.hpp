#pragma once

#include <iosfwd>
#include <string>

#include "spendmax/model.hpp"

namespace spendmax {

// Flat key-value parameter files:
//
//     # market
//     r = 0.05
//     mu = 0.1
//     sigma = 0.25
//     beta = 1
//     lambda = 0.5
//     # rho defaults to r when omitted
//
// '=' is optional, '#' starts a comment.  Unknown keys are rejected.
RawParams parse_params(std::istream& in);
RawParams load_params_file(const std::string& path);

}  // namespace spendmax
