#pragma once

// Independent reference implementation of the CVSS v3.1 base equations,
// transcribed directly from the normative specification pseudocode (string
// keyed weight tables, official Roundup). Kept deliberately separate from
// the library so the two can be compared exhaustively.

#include <cmath>
#include <map>
#include <string>

namespace cvss_oracle {

inline double roundup(double x) {
    long long i = std::llround(x * 100000.0);
    if (i % 10000 == 0) return static_cast<double>(i) / 100000.0;
    return (std::floor(static_cast<double>(i) / 10000.0) + 1.0) / 10.0;
}

// metrics given as single-letter codes, e.g. base_score("N","L","N","N","U","H","H","H")
inline double base_score(const std::string& av, const std::string& ac,
                         const std::string& pr, const std::string& ui,
                         const std::string& s, const std::string& c,
                         const std::string& i, const std::string& a) {
    static const std::map<std::string, double> AV = {
        {"N", 0.85}, {"A", 0.62}, {"L", 0.55}, {"P", 0.2}};
    static const std::map<std::string, double> AC = {{"L", 0.77}, {"H", 0.44}};
    static const std::map<std::string, double> PR_U = {
        {"N", 0.85}, {"L", 0.62}, {"H", 0.27}};
    static const std::map<std::string, double> PR_C = {
        {"N", 0.85}, {"L", 0.68}, {"H", 0.5}};
    static const std::map<std::string, double> UI = {{"N", 0.85}, {"R", 0.62}};
    static const std::map<std::string, double> CIA = {
        {"H", 0.56}, {"L", 0.22}, {"N", 0.0}};

    const bool changed = s == "C";
    const double iss = 1.0 - (1.0 - CIA.at(c)) * (1.0 - CIA.at(i)) * (1.0 - CIA.at(a));
    double impact;
    if (changed)
        impact = 7.52 * (iss - 0.029) - 3.25 * std::pow(iss - 0.02, 15.0);
    else
        impact = 6.42 * iss;
    const double exploitability = 8.22 * AV.at(av) * AC.at(ac) *
                                  (changed ? PR_C.at(pr) : PR_U.at(pr)) * UI.at(ui);
    if (impact <= 0.0) return 0.0;
    if (changed) return roundup(std::min(1.08 * (impact + exploitability), 10.0));
    return roundup(std::min(impact + exploitability, 10.0));
}

}  // namespace cvss_oracle
