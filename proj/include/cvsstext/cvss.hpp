#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cvsstext/errors.hpp"

namespace cvsstext::cvss {

enum class Av { N, A, L, P };
enum class Ac { L, H };
enum class Pr { N, L, H };
enum class Ui { N, R };
enum class Scope { U, C };
enum class Impact { H, L, N };  // shared by C, I, A

enum class Metric { AV, AC, PR, UI, S, C, I, A };

inline constexpr std::array<Metric, 8> kMetricOrder = {
    Metric::AV, Metric::AC, Metric::PR, Metric::UI,
    Metric::S,  Metric::C,  Metric::I,  Metric::A};

struct Vector {
    Av av;
    Ac ac;
    Pr pr;
    Ui ui;
    Scope s;
    Impact c;
    Impact i;
    Impact a;

    friend auto operator<=>(const Vector&, const Vector&) = default;
};

enum class Rating { None, Low, Medium, High, Critical };

struct Severity {
    double score;   // one fractional digit, 0.0 .. 10.0
    Rating rating;
};

struct Parsed {
    Vector vec;
    std::string version;  // "3.0" / "3.1" when prefixed, "" for bare strings
};

inline const char* metric_key(Metric m) {
    switch (m) {
        case Metric::AV: return "AV";
        case Metric::AC: return "AC";
        case Metric::PR: return "PR";
        case Metric::UI: return "UI";
        case Metric::S: return "S";
        case Metric::C: return "C";
        case Metric::I: return "I";
        case Metric::A: return "A";
    }
    return "?";
}

inline int num_classes(Metric m) {
    switch (m) {
        case Metric::AV: return 4;
        case Metric::AC: return 2;
        case Metric::PR: return 3;
        case Metric::UI: return 2;
        case Metric::S: return 2;
        case Metric::C:
        case Metric::I:
        case Metric::A: return 3;
    }
    return 0;
}

// wire code for the n-th value of a metric (n is the class index used by the
// per-metric classifiers)
inline const char* value_code(Metric m, int n) {
    static constexpr const char* av[] = {"N", "A", "L", "P"};
    static constexpr const char* ac[] = {"L", "H"};
    static constexpr const char* pr[] = {"N", "L", "H"};
    static constexpr const char* ui[] = {"N", "R"};
    static constexpr const char* s[] = {"U", "C"};
    static constexpr const char* cia[] = {"H", "L", "N"};
    switch (m) {
        case Metric::AV: return av[n];
        case Metric::AC: return ac[n];
        case Metric::PR: return pr[n];
        case Metric::UI: return ui[n];
        case Metric::S: return s[n];
        case Metric::C:
        case Metric::I:
        case Metric::A: return cia[n];
    }
    return "?";
}

inline const char* value_name(Metric m, int n) {
    static constexpr const char* av[] = {"Network", "Adjacent", "Local", "Physical"};
    static constexpr const char* ac[] = {"Low", "High"};
    static constexpr const char* pr[] = {"None", "Low", "High"};
    static constexpr const char* ui[] = {"None", "Required"};
    static constexpr const char* s[] = {"Unchanged", "Changed"};
    static constexpr const char* cia[] = {"High", "Low", "None"};
    switch (m) {
        case Metric::AV: return av[n];
        case Metric::AC: return ac[n];
        case Metric::PR: return pr[n];
        case Metric::UI: return ui[n];
        case Metric::S: return s[n];
        case Metric::C:
        case Metric::I:
        case Metric::A: return cia[n];
    }
    return "?";
}

inline int class_index(const Vector& v, Metric m) {
    switch (m) {
        case Metric::AV: return static_cast<int>(v.av);
        case Metric::AC: return static_cast<int>(v.ac);
        case Metric::PR: return static_cast<int>(v.pr);
        case Metric::UI: return static_cast<int>(v.ui);
        case Metric::S: return static_cast<int>(v.s);
        case Metric::C: return static_cast<int>(v.c);
        case Metric::I: return static_cast<int>(v.i);
        case Metric::A: return static_cast<int>(v.a);
    }
    return -1;
}

inline Vector with_class(Vector v, Metric m, int n) {
    switch (m) {
        case Metric::AV: v.av = static_cast<Av>(n); break;
        case Metric::AC: v.ac = static_cast<Ac>(n); break;
        case Metric::PR: v.pr = static_cast<Pr>(n); break;
        case Metric::UI: v.ui = static_cast<Ui>(n); break;
        case Metric::S: v.s = static_cast<Scope>(n); break;
        case Metric::C: v.c = static_cast<Impact>(n); break;
        case Metric::I: v.i = static_cast<Impact>(n); break;
        case Metric::A: v.a = static_cast<Impact>(n); break;
    }
    return v;
}

inline Metric metric_from_key(std::string_view key) {
    for (Metric m : kMetricOrder)
        if (key == metric_key(m)) return m;
    throw UnknownKeyError(std::string(key));
}

// 4*2*3*2*2*3*3*3 = 2592 distinct base vectors
inline constexpr std::size_t kVectorSpaceSize = 2592;

inline Vector vector_from_index(std::size_t idx) {
    Vector v{};
    for (auto it = kMetricOrder.rbegin(); it != kMetricOrder.rend(); ++it) {
        const auto n = static_cast<std::size_t>(num_classes(*it));
        v = with_class(v, *it, static_cast<int>(idx % n));
        idx /= n;
    }
    return v;
}

inline std::string format_vector(const Vector& v, bool with_prefix = false) {
    std::string out;
    if (with_prefix) out += "CVSS:3.1/";
    bool first = true;
    for (Metric m : kMetricOrder) {
        if (!first) out += '/';
        first = false;
        out += metric_key(m);
        out += ':';
        out += value_code(m, class_index(v, m));
    }
    return out;
}

inline Parsed parse_vector(std::string_view text) {
    Parsed result{};
    std::array<bool, 8> seen{};

    std::size_t pos = 0;
    bool first_fragment = true;
    while (pos <= text.size()) {
        std::size_t slash = text.find('/', pos);
        std::string_view frag = text.substr(
            pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
        pos = slash == std::string_view::npos ? text.size() + 1 : slash + 1;

        std::size_t colon = frag.find(':');
        if (colon == std::string_view::npos || colon == 0 || colon + 1 >= frag.size())
            throw MalformedPairError(std::string(frag));
        std::string_view key = frag.substr(0, colon);
        std::string_view val = frag.substr(colon + 1);

        if (key == "CVSS") {
            // version prefix, only valid as the leading fragment
            if (!first_fragment) throw UnknownKeyError("CVSS");
            if (val != "3.0" && val != "3.1")
                throw UnknownValueError("CVSS", std::string(val));
            result.version = std::string(val);
            first_fragment = false;
            continue;
        }
        first_fragment = false;

        Metric m = metric_from_key(key);
        const auto mi = static_cast<std::size_t>(m);
        if (seen[mi]) throw DuplicateMetricError(std::string(key));
        seen[mi] = true;

        int idx = -1;
        for (int n = 0; n < num_classes(m); ++n)
            if (val == value_code(m, n)) idx = n;
        if (idx < 0) throw UnknownValueError(std::string(key), std::string(val));
        result.vec = with_class(result.vec, m, idx);
    }

    for (Metric m : kMetricOrder)
        if (!seen[static_cast<std::size_t>(m)])
            throw MissingMetricError(metric_key(m));
    return result;
}

// Smallest one-decimal value >= x, computed on an integer scale so that
// binary-float residue (e.g. 0.1+0.2) does not bump the result a tenth up.
inline double round_up1(double x) {
    const long long n = std::llround(x * 100000.0);
    long long q = n / 10000;
    if (n % 10000 != 0) q += 1;
    return static_cast<double>(q) / 10.0;
}

namespace weights {
inline double av(Av v) {
    switch (v) {
        case Av::N: return 0.85;
        case Av::A: return 0.62;
        case Av::L: return 0.55;
        case Av::P: return 0.20;
    }
    return 0;
}
inline double ac(Ac v) { return v == Ac::L ? 0.77 : 0.44; }
inline double pr(Pr v, Scope s) {
    switch (v) {
        case Pr::N: return 0.85;
        case Pr::L: return s == Scope::C ? 0.68 : 0.62;
        case Pr::H: return s == Scope::C ? 0.50 : 0.27;
    }
    return 0;
}
inline double ui(Ui v) { return v == Ui::N ? 0.85 : 0.62; }
inline double cia(Impact v) {
    switch (v) {
        case Impact::H: return 0.56;
        case Impact::L: return 0.22;
        case Impact::N: return 0.0;
    }
    return 0;
}
}  // namespace weights

inline Rating severity_rating(double score) {
    if (!(score >= 0.0) || !(score <= 10.0)) throw OutOfRangeError(score);
    const long long s10 = std::llround(score * 10.0);
    if (s10 == 0) return Rating::None;
    if (s10 <= 39) return Rating::Low;
    if (s10 <= 69) return Rating::Medium;
    if (s10 <= 89) return Rating::High;
    return Rating::Critical;
}

inline const char* rating_name(Rating r) {
    switch (r) {
        case Rating::None: return "None";
        case Rating::Low: return "Low";
        case Rating::Medium: return "Medium";
        case Rating::High: return "High";
        case Rating::Critical: return "Critical";
    }
    return "?";
}

inline Severity base_score(const Vector& v) {
    using namespace weights;
    const double iss =
        1.0 - (1.0 - cia(v.c)) * (1.0 - cia(v.i)) * (1.0 - cia(v.a));
    const double impact =
        v.s == Scope::U
            ? 6.42 * iss
            : 7.52 * (iss - 0.029) - 3.25 * std::pow(iss - 0.02, 15.0);
    const double exploitability =
        8.22 * av(v.av) * ac(v.ac) * pr(v.pr, v.s) * ui(v.ui);

    double score = 0.0;
    if (impact > 0.0) {
        const double raw = v.s == Scope::U
                               ? std::min(impact + exploitability, 10.0)
                               : std::min(1.08 * (impact + exploitability), 10.0);
        score = round_up1(raw);
    }
    return Severity{score, severity_rating(score)};
}

}  // namespace cvsstext::cvss
