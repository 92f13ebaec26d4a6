#pragma once

// Synthetic planted-signal corpus: every metric value is revealed by a unique
// marker word, so a working training + saliency stack must (a) learn each
// metric to high accuracy and (b) attribute predictions to the markers.

#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cvsstext/cvss.hpp"
#include "cvsstext/nvd.hpp"
#include "cvsstext/rng.hpp"

namespace planted {

using cvsstext::Rng;
using cvsstext::cvss::Metric;

inline std::string marker_word(Metric m, int cls) {
    std::string key = cvsstext::cvss::metric_key(m);
    for (char& c : key) c = static_cast<char>(std::tolower(c));
    std::string code = cvsstext::cvss::value_code(m, cls);
    for (char& c : code) c = static_cast<char>(std::tolower(c));
    return key + code + "mark";
}

struct Corpus {
    std::vector<cvsstext::nvd::VulnRecord> records;
};

inline Corpus build(std::size_t n, std::uint64_t seed) {
    static const std::vector<std::string> filler = {
        "issue",   "found",  "in",      "the",     "component", "allows", "an",
        "actor",   "to",     "trigger", "a",       "problem",   "via",    "crafted",
        "input",   "when",   "feature", "is",      "enabled",   "before", "version",
        "handler", "module", "service", "request", "processing"};
    Rng rng(seed);
    Corpus corpus;
    corpus.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cvsstext::cvss::Vector vec{};
        std::vector<std::string> words;
        for (Metric m : cvsstext::cvss::kMetricOrder) {
            const int cls =
                static_cast<int>(rng.below(static_cast<std::uint64_t>(
                    cvsstext::cvss::num_classes(m))));
            vec = cvsstext::cvss::with_class(vec, m, cls);
            words.push_back(marker_word(m, cls));
        }
        const std::size_t n_filler = 4 + rng.below(5);
        for (std::size_t f = 0; f < n_filler; ++f)
            words.push_back(filler[rng.below(filler.size())]);
        rng.shuffle(words);

        cvsstext::nvd::VulnRecord r;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "CVE-2020-2%05zu", i);
        r.cve_id = buf;
        std::string desc;
        for (const std::string& w : words) {
            if (!desc.empty()) desc += ' ';
            desc += w;
        }
        r.description = desc + ".";
        r.vector = vec;
        r.vector_string = cvsstext::cvss::format_vector(vec);
        r.version = "3.1";
        r.score = cvsstext::cvss::base_score(vec).score;
        r.year = 2020;
        corpus.records.push_back(std::move(r));
    }
    return corpus;
}

// single-metric variant: markers of all other metrics are stripped so only
// one signal remains in the text
inline Corpus build_single_metric(Metric metric, std::size_t n, std::uint64_t seed) {
    std::set<std::string> keep, all_markers;
    for (Metric m : cvsstext::cvss::kMetricOrder)
        for (int c = 0; c < cvsstext::cvss::num_classes(m); ++c) {
            all_markers.insert(marker_word(m, c));
            if (m == metric) keep.insert(marker_word(m, c));
        }
    Corpus full = build(n, seed);
    for (auto& r : full.records) {
        std::string filtered;
        std::size_t start = 0;
        const std::string& d = r.description;
        while (start <= d.size()) {
            std::size_t end = d.find(' ', start);
            if (end == std::string::npos) end = d.size();
            std::string w = d.substr(start, end - start);
            std::string bare = w;
            if (!bare.empty() && bare.back() == '.') bare.pop_back();
            if (!all_markers.count(bare) || keep.count(bare)) {
                if (!filtered.empty() && !w.empty()) filtered += ' ';
                filtered += w;
            }
            start = end + 1;
        }
        r.description = filtered;
    }
    return full;
}

}  // namespace planted
