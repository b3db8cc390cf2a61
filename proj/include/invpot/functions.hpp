#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "invpot/errors.hpp"

namespace invpot {

/// Catalogue of analytic functions referenced by id in configs and tests.
/// dim = 0 means usable in both 1-d and 2-d.
struct RegisteredFunction {
    int dim = 0;
    std::function<double(double, double)> f;
};

inline const std::map<std::string, RegisteredFunction>& function_catalogue() {
    static const std::map<std::string, RegisteredFunction> cat = [] {
        std::map<std::string, RegisteredFunction> c;
        c["const0"] = {0, [](double, double) { return 0.0; }};
        c["const1"] = {0, [](double, double) { return 1.0; }};
        c["const2"] = {0, [](double, double) { return 2.0; }};
        c["const3"] = {0, [](double, double) { return 3.0; }};
        c["ex1_q"] = {2, [](double x, double y) { return 3.0 + 0.5 * std::sin(M_PI * x) * std::sin(M_PI * y); }};
        c["ex3ab_q"] = {1, [](double x, double) {
                            const double s = std::sin(M_PI * x);
                            return 1.0 + 0.5 * s * s;
                        }};
        // manufactured pairs: -u'' + q u = f with homogeneous Dirichlet data
        c["ms1_u"] = {1, [](double x, double) { return std::sin(M_PI * x); }}; // q = const0
        c["ms1_f"] = {1, [](double x, double) { return M_PI * M_PI * std::sin(M_PI * x); }};
        c["ms2_u"] = {2, [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); }}; // q = const1
        c["ms2_f"] = {2, [](double x, double y) {
                          return (2.0 * M_PI * M_PI + 1.0) * std::sin(M_PI * x) * std::sin(M_PI * y);
                      }};
        return c;
    }();
    return cat;
}

inline const RegisteredFunction& lookup_function(const std::string& id, int dim) {
    const auto& cat = function_catalogue();
    auto it = cat.find(id);
    if (it == cat.end()) throw ConfigError("unknown function id '" + id + "'");
    if (it->second.dim != 0 && it->second.dim != dim)
        throw ConfigError("function '" + id + "' is defined for dim=" + std::to_string(it->second.dim) +
                          ", requested dim=" + std::to_string(dim));
    return it->second;
}

} // namespace invpot
