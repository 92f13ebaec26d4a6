#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvsstext/cvss.hpp"
#include "cvsstext/digest.hpp"
#include "cvsstext/errors.hpp"
#include "cvsstext/io.hpp"
#include "cvsstext/rng.hpp"

namespace cvsstext::nvd {

using nlohmann::json;

inline constexpr const char* kRejectMarker = "** REJECT **";

struct RawEntry {
    std::string cve_id;
    std::string description;    // English description, may be empty
    std::string vector_string;  // v3 vector string, may be empty
    std::optional<double> base_score;
    int year = 0;
};

struct VulnRecord {
    std::string cve_id;
    std::string description;
    cvss::Vector vector{};
    std::string vector_string;        // canonical form
    std::string version;              // claimed CVSS version ("3.0"/"3.1"/"")
    double score = 0.0;               // score as published in the feed
    int year = 0;
    std::vector<std::string> flags;   // e.g. "score_mismatch"

    bool has_flag(std::string_view f) const {
        return std::find(flags.begin(), flags.end(), f) != flags.end();
    }
};

namespace detail {

inline int year_from_cve_id(const std::string& id) {
    // CVE-YYYY-NNNN+
    if (id.size() < 13 || id.rfind("CVE-", 0) != 0) return 0;
    int year = 0;
    for (int i = 4; i < 8; ++i) {
        if (id[static_cast<std::size_t>(i)] < '0' || id[static_cast<std::size_t>(i)] > '9')
            return 0;
        year = year * 10 + (id[static_cast<std::size_t>(i)] - '0');
    }
    return year;
}

inline std::string fetch_url(const std::string& url);

}  // namespace detail

// Loads an NVD JSON 1.1 feed from a local path or http(s) URL, transparently
// inflating gzip. Network fetches retry once.
inline std::vector<RawEntry> load_feed(const std::string& source) {
    std::string bytes;
    if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
        bytes = detail::fetch_url(source);
    } else {
        try {
            bytes = read_file(source);
        } catch (const IoError& e) {
            throw UnreadableSourceError(e.what());
        }
    }
    if (looks_gzip(bytes)) bytes = gzip_inflate(bytes, source);

    json feed;
    try {
        feed = json::parse(bytes);
    } catch (const json::exception& e) {
        throw UnreadableSourceError("not a JSON feed: " + source + ": " + e.what());
    }

    if (!feed.is_object() || !feed.contains("CVE_Items") || !feed["CVE_Items"].is_array())
        throw SchemaViolationError("CVE_Items");

    std::vector<RawEntry> entries;
    entries.reserve(feed["CVE_Items"].size());
    std::size_t index = 0;
    for (const json& item : feed["CVE_Items"]) {
        const std::string at = "CVE_Items[" + std::to_string(index++) + "]";
        if (!item.contains("cve")) throw SchemaViolationError(at + ".cve");
        const json& cve = item["cve"];
        if (!cve.contains("CVE_data_meta") || !cve["CVE_data_meta"].contains("ID"))
            throw SchemaViolationError(at + ".cve.CVE_data_meta.ID");

        RawEntry e;
        e.cve_id = cve["CVE_data_meta"]["ID"].get<std::string>();
        e.year = detail::year_from_cve_id(e.cve_id);

        if (cve.contains("description") && cve["description"].contains("description_data"))
            for (const json& d : cve["description"]["description_data"])
                if (d.value("lang", "") == "en") {
                    e.description = d.value("value", "");
                    break;
                }

        if (item.contains("impact") && item["impact"].contains("baseMetricV3")) {
            const json& v3 = item["impact"]["baseMetricV3"];
            if (v3.contains("cvssV3")) {
                e.vector_string = v3["cvssV3"].value("vectorString", "");
                if (v3["cvssV3"].contains("baseScore"))
                    e.base_score = v3["cvssV3"]["baseScore"].get<double>();
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

// Keeps entries with an English description, a parseable v3 base vector and
// no rejection stub; recomputes the score and flags stored/recomputed
// mismatches rather than dropping them.
inline std::vector<VulnRecord> normalize(const std::vector<RawEntry>& raw) {
    std::vector<VulnRecord> out;
    for (const RawEntry& e : raw) {
        if (e.description.empty() || e.description.rfind(kRejectMarker, 0) == 0)
            continue;
        if (e.vector_string.empty()) continue;
        cvss::Parsed parsed;
        try {
            parsed = cvss::parse_vector(e.vector_string);
        } catch (const DataError&) {
            continue;  // v2-only or malformed vectors are filtered, not fatal
        }
        VulnRecord r;
        r.cve_id = e.cve_id;
        r.description = e.description;
        r.vector = parsed.vec;
        r.vector_string = cvss::format_vector(parsed.vec);
        r.version = parsed.version;
        r.year = e.year;
        const double recomputed = cvss::base_score(parsed.vec).score;
        if (e.base_score.has_value()) {
            r.score = *e.base_score;
            if (std::llround(r.score * 10.0) != std::llround(recomputed * 10.0))
                r.flags.push_back("score_mismatch");
        } else {
            r.score = recomputed;
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---- dataset persistence: one JSON record per line -------------------------

inline json record_to_json(const VulnRecord& r) {
    return json{{"cve_id", r.cve_id},     {"description", r.description},
                {"vector", r.vector_string}, {"version", r.version},
                {"score", r.score},       {"year", r.year},
                {"flags", r.flags}};
}

inline VulnRecord record_from_json(const json& j) {
    VulnRecord r;
    r.cve_id = j.at("cve_id").get<std::string>();
    r.description = j.at("description").get<std::string>();
    r.vector_string = j.at("vector").get<std::string>();
    r.vector = cvss::parse_vector(r.vector_string).vec;
    r.version = j.value("version", "");
    r.score = j.at("score").get<double>();
    r.year = j.at("year").get<int>();
    r.flags = j.value("flags", std::vector<std::string>{});
    return r;
}

inline std::string dataset_to_bytes(std::vector<VulnRecord> records) {
    std::sort(records.begin(), records.end(),
              [](const VulnRecord& a, const VulnRecord& b) { return a.cve_id < b.cve_id; });
    std::string out;
    std::string prev;
    for (const VulnRecord& r : records) {
        if (r.cve_id == prev) continue;  // first occurrence wins across feeds
        prev = r.cve_id;
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline void save_dataset(const std::vector<VulnRecord>& records, const std::string& path) {
    atomic_write_file(path, dataset_to_bytes(records));
}

inline std::vector<VulnRecord> load_dataset(const std::string& path) {
    const std::string bytes = read_file(path);
    std::vector<VulnRecord> out;
    std::size_t start = 0;
    std::size_t line_no = 1;
    while (start < bytes.size()) {
        std::size_t nl = bytes.find('\n', start);
        if (nl == std::string::npos) nl = bytes.size();
        std::string_view line(bytes.data() + start, nl - start);
        if (!line.empty()) {
            try {
                out.push_back(record_from_json(json::parse(line)));
            } catch (const json::exception& e) {
                throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        start = nl + 1;
        ++line_no;
    }
    return out;
}

// ---- deterministic splits ---------------------------------------------------

struct DatasetSplit {
    std::vector<VulnRecord> train;
    std::vector<VulnRecord> test;
    std::uint64_t seed = 0;
    double fraction = 0.5;
    std::string manifest_digest;
};

struct SplitManifest {
    std::uint64_t seed = 0;
    double fraction = 0.5;
    std::string dataset_digest;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;

    std::string to_bytes() const {
        json j{{"seed", seed},
               {"fraction", fraction},
               {"dataset_digest", dataset_digest},
               {"train_ids", train_ids},
               {"test_ids", test_ids}};
        return j.dump(2) + "\n";
    }

    static SplitManifest from_bytes(const std::string& bytes) {
        json j = json::parse(bytes);
        SplitManifest m;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.fraction = j.at("fraction").get<double>();
        m.dataset_digest = j.value("dataset_digest", "");
        m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
        m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
        return m;
    }
};

// Shuffles records (sorted by cve_id first, so the result is a pure function
// of ids + seed) and puts floor(n * fraction) into train, the rest into test.
inline SplitManifest make_split_manifest(const std::vector<VulnRecord>& records,
                                         std::uint64_t seed, double fraction) {
    if (records.empty()) throw EmptyCorpusError();
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw UsageError("split fraction must be in (0, 1)");
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const VulnRecord& r : records) ids.push_back(r.cve_id);
    std::sort(ids.begin(), ids.end());

    Rng rng(seed);
    rng.shuffle(ids);
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(ids.size()) * fraction));

    SplitManifest m;
    m.seed = seed;
    m.fraction = fraction;
    m.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    m.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    std::sort(m.train_ids.begin(), m.train_ids.end());
    std::sort(m.test_ids.begin(), m.test_ids.end());
    return m;
}

inline DatasetSplit apply_manifest(const std::vector<VulnRecord>& records,
                                   const SplitManifest& m) {
    DatasetSplit split;
    split.seed = m.seed;
    split.fraction = m.fraction;
    split.manifest_digest = content_digest(m.to_bytes());
    std::map<std::string, const VulnRecord*> by_id;
    for (const VulnRecord& r : records) by_id[r.cve_id] = &r;
    auto collect = [&](const std::vector<std::string>& ids,
                       std::vector<VulnRecord>& out) {
        out.reserve(ids.size());
        for (const std::string& id : ids) {
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw DataError("manifest id not present in dataset: " + id);
            out.push_back(*it->second);
        }
    };
    collect(m.train_ids, split.train);
    collect(m.test_ids, split.test);
    return split;
}

inline DatasetSplit split(const std::vector<VulnRecord>& records, std::uint64_t seed,
                          double fraction) {
    return apply_manifest(records, make_split_manifest(records, seed, fraction));
}

}  // namespace cvsstext::nvd

#ifdef CVSSTEXT_ENABLE_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace cvsstext::nvd::detail {

inline std::string fetch_url(const std::string& url) {
    const std::size_t scheme_end = url.find("://");
    const std::size_t host_start = scheme_end + 3;
    std::size_t path_start = url.find('/', host_start);
    if (path_start == std::string::npos) path_start = url.size();
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start < url.size() ? url.substr(path_start) : "/";

#ifndef CVSSTEXT_ENABLE_TLS
    if (url.rfind("https://", 0) == 0)
        throw UnreadableSourceError("built without TLS support: " + url);
#endif

    for (int attempt = 0; attempt < 2; ++attempt) {
        httplib::Client client(origin);
        client.set_follow_location(true);
        client.set_connection_timeout(30);
        client.set_read_timeout(60);
        auto res = client.Get(path);
        if (res && res->status == 200) return res->body;
        if (attempt == 1) {
            std::string why = res ? "http status " + std::to_string(res->status)
                                  : "connection failed";
            throw UnreadableSourceError("fetch failed: " + url + " (" + why + ")");
        }
    }
    throw UnreadableSourceError("fetch failed: " + url);
}

}  // namespace cvsstext::nvd::detail
