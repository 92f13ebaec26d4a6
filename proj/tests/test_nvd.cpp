#include "cvsstext/nvd.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <thread>

#include "cvsstext/io.hpp"

using namespace cvsstext;
using namespace cvsstext::nvd;

namespace {

std::string fixture(const std::string& name) {
    return std::string(CVSSTEXT_FIXTURE_DIR) + "/" + name;
}

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

std::vector<VulnRecord> synthetic_records(std::size_t n) {
    std::vector<VulnRecord> recs;
    for (std::size_t i = 0; i < n; ++i) {
        VulnRecord r;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "CVE-2020-1%04zu", i);
        r.cve_id = buf;
        r.description = "Issue number " + std::to_string(i) + " allows remote attackers "
                        "to cause a denial of service via crafted packets.";
        r.vector = cvss::parse_vector("AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H").vec;
        r.vector_string = cvss::format_vector(r.vector);
        r.version = "3.1";
        r.score = 7.5;
        r.year = 2020;
        recs.push_back(std::move(r));
    }
    return recs;
}

}  // namespace

TEST(LoadFeed, MiniFixtureYieldsFiveRawEntries) {
    auto entries = load_feed(fixture("nvd_mini.json"));
    ASSERT_EQ(entries.size(), 5u);
    EXPECT_EQ(entries[0].cve_id, "CVE-2019-90001");
    EXPECT_EQ(entries[0].year, 2019);
    EXPECT_FALSE(entries[0].description.empty());
    EXPECT_EQ(entries[0].vector_string, "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H");
    ASSERT_TRUE(entries[0].base_score.has_value());
    EXPECT_DOUBLE_EQ(*entries[0].base_score, 9.8);
}

TEST(LoadFeed, EntryWithoutV3BlockHasEmptyVectorSlot) {
    auto entries = load_feed(fixture("nvd_mini.json"));
    // CVE-2019-90003 (REJECT, no impact) and CVE-2019-90004 (v2 only)
    EXPECT_TRUE(entries[2].vector_string.empty());
    EXPECT_TRUE(entries[3].vector_string.empty());
    EXPECT_FALSE(entries[3].description.empty());
}

TEST(LoadFeed, GzipRoundTrip) {
    const std::string plain = read_file(fixture("nvd_mini.json"));
    const auto gz = tmp_path("nvd_mini_test.json.gz");
    atomic_write_file(gz.string(), gzip_deflate(plain));
    auto entries = load_feed(gz.string());
    EXPECT_EQ(entries.size(), 5u);
    std::filesystem::remove(gz);
}

TEST(LoadFeed, TruncatedGzipIsUnreadable) {
    const std::string plain = read_file(fixture("nvd_mini.json"));
    std::string gz = gzip_deflate(plain);
    gz.resize(gz.size() / 2);
    const auto path = tmp_path("nvd_truncated.json.gz");
    atomic_write_file(path.string(), gz);
    EXPECT_THROW(load_feed(path.string()), UnreadableSourceError);
    std::filesystem::remove(path);
}

TEST(LoadFeed, MissingFileAndBadJson) {
    EXPECT_THROW(load_feed("/nonexistent/feed.json"), UnreadableSourceError);
    const auto path = tmp_path("nvd_bad.json");
    atomic_write_file(path.string(), "this is not json");
    EXPECT_THROW(load_feed(path.string()), UnreadableSourceError);
    atomic_write_file(path.string(), "{\"CVE_Items\": 42}");
    EXPECT_THROW(load_feed(path.string()), SchemaViolationError);
    atomic_write_file(path.string(), "{\"CVE_Items\": [{\"cve\": {}}]}");
    EXPECT_THROW(load_feed(path.string()), SchemaViolationError);
    std::filesystem::remove(path);
}

TEST(LoadFeed, HttpSource) {
    const std::string body = read_file(fixture("nvd_mini.json"));
    httplib::Server server;
    server.Get("/feed.json", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(body, "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread srv([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    auto entries = load_feed("http://127.0.0.1:" + std::to_string(port) + "/feed.json");
    EXPECT_EQ(entries.size(), 5u);
    EXPECT_THROW(load_feed("http://127.0.0.1:" + std::to_string(port) + "/missing.json"),
                 UnreadableSourceError);

    server.stop();
    srv.join();
}

TEST(Normalize, FiltersAndFlags) {
    auto records = normalize(load_feed(fixture("nvd_mini.json")));
    ASSERT_EQ(records.size(), 3u);  // REJECT and v2-only entries dropped

    EXPECT_EQ(records[0].cve_id, "CVE-2019-90001");
    EXPECT_TRUE(records[0].flags.empty());
    EXPECT_DOUBLE_EQ(records[0].score, 9.8);

    EXPECT_EQ(records[1].cve_id, "CVE-2019-90002");
    EXPECT_EQ(records[1].version, "3.0");
    EXPECT_TRUE(records[1].flags.empty());

    // stored 6.4 vs recomputed 6.5
    EXPECT_EQ(records[2].cve_id, "CVE-2019-90005");
    EXPECT_TRUE(records[2].has_flag("score_mismatch"));
    EXPECT_DOUBLE_EQ(records[2].score, 6.4);
    EXPECT_DOUBLE_EQ(cvss::base_score(records[2].vector).score, 6.5);
}

TEST(Normalize, RecordsReparseAndRescore) {
    auto records = normalize(load_feed(fixture("nvd_mini.json")));
    for (const auto& r : records) {
        cvss::Vector v = cvss::parse_vector(r.vector_string).vec;
        EXPECT_EQ(v, r.vector);
        if (!r.has_flag("score_mismatch"))
            EXPECT_DOUBLE_EQ(cvss::base_score(v).score, r.score) << r.cve_id;
    }
}

TEST(Dataset, SaveLoadRoundTripAndIdempotence) {
    auto records = normalize(load_feed(fixture("nvd_mini.json")));
    const auto p1 = tmp_path("dataset_a.jsonl");
    const auto p2 = tmp_path("dataset_b.jsonl");
    save_dataset(records, p1.string());
    save_dataset(normalize(load_feed(fixture("nvd_mini.json"))), p2.string());
    EXPECT_EQ(read_file(p1.string()), read_file(p2.string()));

    auto loaded = load_dataset(p1.string());
    ASSERT_EQ(loaded.size(), records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        EXPECT_EQ(loaded[i].cve_id, records[i].cve_id);
        EXPECT_EQ(loaded[i].vector_string, records[i].vector_string);
        EXPECT_DOUBLE_EQ(loaded[i].score, records[i].score);
        EXPECT_EQ(loaded[i].flags, records[i].flags);
    }
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST(Split, PaperShapeFiftyFifty) {
    auto recs = synthetic_records(100);
    DatasetSplit s = split(recs, 7, 0.5);
    EXPECT_EQ(s.train.size(), 50u);
    EXPECT_EQ(s.test.size(), 50u);
}

TEST(Split, OddCountPutsLargerHalfInTest) {
    auto recs = synthetic_records(101);
    DatasetSplit s = split(recs, 7, 0.5);
    EXPECT_EQ(s.train.size(), 50u);
    EXPECT_EQ(s.test.size(), 51u);
}

TEST(Split, DeterministicAndDisjoint) {
    auto recs = synthetic_records(64);
    SplitManifest m1 = make_split_manifest(recs, 42, 0.5);
    SplitManifest m2 = make_split_manifest(recs, 42, 0.5);
    EXPECT_EQ(m1.to_bytes(), m2.to_bytes());
    SplitManifest m3 = make_split_manifest(recs, 43, 0.5);
    EXPECT_NE(m3.to_bytes(), m1.to_bytes());

    std::set<std::string> train(m1.train_ids.begin(), m1.train_ids.end());
    std::set<std::string> test(m1.test_ids.begin(), m1.test_ids.end());
    EXPECT_EQ(train.size() + test.size(), 64u);
    for (const auto& id : test) EXPECT_FALSE(train.count(id));
}

TEST(Split, ManifestRoundTripAndApply) {
    auto recs = synthetic_records(20);
    SplitManifest m = make_split_manifest(recs, 5, 0.25);
    SplitManifest parsed = SplitManifest::from_bytes(m.to_bytes());
    EXPECT_EQ(parsed.train_ids, m.train_ids);
    EXPECT_EQ(parsed.test_ids, m.test_ids);

    DatasetSplit s = apply_manifest(recs, parsed);
    EXPECT_EQ(s.train.size(), 5u);
    EXPECT_EQ(s.test.size(), 15u);
    EXPECT_FALSE(s.manifest_digest.empty());
}

TEST(Split, EmptyCorpusAndBadFraction) {
    EXPECT_THROW(split({}, 1, 0.5), EmptyCorpusError);
    auto recs = synthetic_records(4);
    EXPECT_THROW(split(recs, 1, 0.0), UsageError);
    EXPECT_THROW(split(recs, 1, 1.0), UsageError);
}
