#include "spendmax/params_io.hpp"

#include <fstream>
#include <sstream>

namespace spendmax {

RawParams parse_params(std::istream& in) {
    RawParams raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        for (auto& ch : line)
            if (ch == '=' || ch == ':' || ch == ',') ch = ' ';
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        double value;
        if (!(ls >> value))
            throw ConfigError("parameter file line " + std::to_string(lineno) +
                              ": expected '<key> = <number>'");
        if (key == "r")
            raw.r = value;
        else if (key == "rho")
            raw.rho = value;
        else if (key == "mu")
            raw.mu = value;
        else if (key == "sigma")
            raw.sigma = value;
        else if (key == "beta")
            raw.beta = value;
        else if (key == "lambda")
            raw.lambda = value;
        else
            throw ConfigError("parameter file line " + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
    }
    return raw;
}

RawParams load_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open parameter file: " + path);
    return parse_params(in);
}

}  // namespace spendmax
