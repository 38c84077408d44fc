#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

// One statistical verification outcome.  `rule` spells out how `pass` was
// decided so the JSON report is self-describing.

namespace cmj {

struct TestReport {
    std::string name;
    std::size_t n = 0;                  // sample count behind the statistic
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> empirical;
    std::vector<double> theoretical;
    double tolerance = 0.0;
    std::string rule;
    bool pass = false;
};

// Round to 12 significant digits so emitted JSON numbers carry exactly the
// documented precision.
inline double round_sig12(double x) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return std::strtod(buf, nullptr);
}

inline nlohmann::json to_json(const TestReport& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["n"] = r.n;
    j["statistic"] = round_sig12(r.statistic);
    j["p_value"] = round_sig12(r.p_value);
    j["empirical"] = nlohmann::json::array();
    for (double v : r.empirical) j["empirical"].push_back(round_sig12(v));
    j["theoretical"] = nlohmann::json::array();
    for (double v : r.theoretical) j["theoretical"].push_back(round_sig12(v));
    j["tolerance"] = round_sig12(r.tolerance);
    j["rule"] = r.rule;
    j["pass"] = r.pass;
    return j;
}

inline nlohmann::json to_json(const std::vector<TestReport>& rs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rs) j.push_back(to_json(r));
    return j;
}

inline std::string format_line(const TestReport& r) {
    char buf[256];
    std::string emp, theo;
    for (double v : r.empirical) {
        std::snprintf(buf, sizeof(buf), "%s%.6g", emp.empty() ? "" : ",", v);
        emp += buf;
    }
    for (double v : r.theoretical) {
        std::snprintf(buf, sizeof(buf), "%s%.6g", theo.empty() ? "" : ",", v);
        theo += buf;
    }
    std::snprintf(buf, sizeof(buf), "[%s] %-34s n=%-8zu stat=%-12.6g p=%-12.6g emp=[%s] theo=[%s]",
                  r.pass ? "PASS" : "FAIL", r.name.c_str(), r.n, r.statistic, r.p_value,
                  emp.c_str(), theo.c_str());
    return buf;
}

inline bool all_pass(const std::vector<TestReport>& rs) {
    for (const auto& r : rs)
        if (!r.pass) return false;
    return true;
}

}  // namespace cmj
