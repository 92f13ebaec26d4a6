#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvsstext/checkpoint.hpp"
#include "cvsstext/cvss.hpp"
#include "cvsstext/errors.hpp"
#include "cvsstext/nvd.hpp"
#include "cvsstext/tokenizer.hpp"

namespace cvsstext::train {

using nlohmann::json;

struct ClassificationBlock {
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    std::vector<std::vector<long long>> confusion;  // [true][predicted]
    std::size_t total = 0;

    json to_json() const {
        return json{{"accuracy", accuracy},
                    {"weighted_precision", weighted_precision},
                    {"weighted_recall", weighted_recall},
                    {"weighted_f1", weighted_f1},
                    {"confusion", confusion},
                    {"total", total}};
    }
};

struct ScoreBlock {
    double mse = 0.0;
    double mae = 0.0;
    double exact_match_fraction = 0.0;  // one-decimal equality
    double mae_lt1_fraction = 0.0;      // |error| strictly below 1
    std::size_t count = 0;

    json to_json() const {
        return json{{"mse", mse},
                    {"mae", mae},
                    {"exact_match_fraction", exact_match_fraction},
                    {"mae_lt1_fraction", mae_lt1_fraction},
                    {"count", count}};
    }
};

// accuracy plus support-weighted precision/recall/F1; zero denominators
// contribute zero, matching the usual convention
inline ClassificationBlock classification_metrics(const std::vector<int>& y_true,
                                                  const std::vector<int>& y_pred,
                                                  std::size_t num_classes) {
    if (y_true.size() != y_pred.size())
        throw LengthMismatchError("classification_metrics: " +
                                  std::to_string(y_true.size()) + " vs " +
                                  std::to_string(y_pred.size()));
    ClassificationBlock blk;
    blk.total = y_true.size();
    blk.confusion.assign(num_classes, std::vector<long long>(num_classes, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes ||
            static_cast<std::size_t>(p) >= num_classes)
            throw LengthMismatchError("label out of range at index " + std::to_string(i));
        ++blk.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    if (blk.total == 0) return blk;

    long long trace = 0;
    for (std::size_t c = 0; c < num_classes; ++c) trace += blk.confusion[c][c];
    blk.accuracy = static_cast<double>(trace) / static_cast<double>(blk.total);

    for (std::size_t c = 0; c < num_classes; ++c) {
        long long tp = blk.confusion[c][c], fp = 0, fn = 0;
        for (std::size_t r = 0; r < num_classes; ++r) {
            if (r == c) continue;
            fp += blk.confusion[r][c];
            fn += blk.confusion[c][r];
        }
        const double support = static_cast<double>(tp + fn);
        const double precision =
            tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall =
            tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f1 = precision + recall == 0.0
                              ? 0.0
                              : 2.0 * precision * recall / (precision + recall);
        blk.weighted_precision += support * precision;
        blk.weighted_recall += support * recall;
        blk.weighted_f1 += support * f1;
    }
    blk.weighted_precision /= static_cast<double>(blk.total);
    blk.weighted_recall /= static_cast<double>(blk.total);
    blk.weighted_f1 /= static_cast<double>(blk.total);
    return blk;
}

// Severity-score error metrics between predicted vectors and true scores.
// Scores live on a one-decimal grid, so comparisons run on 10x integers.
inline ScoreBlock score_error_metrics(const std::vector<cvss::Vector>& predicted,
                                      const std::vector<double>& true_scores) {
    if (predicted.size() != true_scores.size())
        throw LengthMismatchError("score_error_metrics: " +
                                  std::to_string(predicted.size()) + " vs " +
                                  std::to_string(true_scores.size()));
    ScoreBlock blk;
    blk.count = predicted.size();
    if (blk.count == 0) return blk;
    std::size_t exact = 0, lt1 = 0;
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const long long p10 = std::llround(cvss::base_score(predicted[i]).score * 10.0);
        const long long t10 = std::llround(true_scores[i] * 10.0);
        const long long d10 = p10 > t10 ? p10 - t10 : t10 - p10;
        const double diff = static_cast<double>(d10) / 10.0;
        se += diff * diff;
        ae += diff;
        if (d10 == 0) ++exact;
        if (d10 < 10) ++lt1;
    }
    blk.mse = se / static_cast<double>(blk.count);
    blk.mae = ae / static_cast<double>(blk.count);
    blk.exact_match_fraction = static_cast<double>(exact) / static_cast<double>(blk.count);
    blk.mae_lt1_fraction = static_cast<double>(lt1) / static_cast<double>(blk.count);
    return blk;
}

struct EvalReport {
    std::map<std::string, ClassificationBlock> per_metric;  // keyed AV..A
    ScoreBlock score;
    std::string vocab_digest;
    std::string manifest_digest;
    std::size_t n_test = 0;

    json to_json() const {
        json metrics = json::object();
        for (const auto& [key, blk] : per_metric) metrics[key] = blk.to_json();
        return json{{"per_metric", metrics},
                    {"score", score.to_json()},
                    {"vocab_digest", vocab_digest},
                    {"manifest_digest", manifest_digest},
                    {"n_test", n_test}};
    }
};

// Runs all eight classifiers over the test records, assembles predicted
// vectors and computes both metric families. True scores are recomputed from
// the ground-truth vectors so the comparison is internally consistent.
inline EvalReport evaluate(
    const std::map<cvss::Metric, const model::Checkpoint*>& checkpoints,
    const std::vector<nvd::VulnRecord>& test_set, const text::Vocabulary& vocab,
    const std::string& manifest_digest = "") {
    for (cvss::Metric m : cvss::kMetricOrder)
        if (!checkpoints.count(m) || checkpoints.at(m) == nullptr)
            throw MissingCheckpointError(cvss::metric_key(m));
    const std::string vd = checkpoints.at(cvss::Metric::AV)->meta.vocab_digest;
    for (const auto& [m, ckpt] : checkpoints) {
        if (ckpt->meta.vocab_digest != vd)
            throw VocabMismatchError("checkpoints disagree on vocabulary digest");
        if (ckpt->model.config().vocab_size != vocab.size())
            throw VocabMismatchError("checkpoint vocab size " +
                                     std::to_string(ckpt->model.config().vocab_size) +
                                     " != vocabulary size " +
                                     std::to_string(vocab.size()));
    }

    EvalReport report;
    report.vocab_digest = vd;
    report.manifest_digest = manifest_digest;
    report.n_test = test_set.size();

    std::map<std::string, std::vector<int>> y_true, y_pred;
    std::vector<cvss::Vector> predicted_vectors;
    std::vector<double> true_scores;
    predicted_vectors.reserve(test_set.size());
    true_scores.reserve(test_set.size());

    const std::size_t seq_len = checkpoints.at(cvss::Metric::AV)->model.config().seq_len;
    for (const nvd::VulnRecord& r : test_set) {
        const text::TokenSequence seq = text::tokenize(r.description, vocab, seq_len);
        cvss::Vector assembled{};
        for (cvss::Metric m : cvss::kMetricOrder) {
            const model::Prediction p = checkpoints.at(m)->model.predict(seq);
            assembled = cvss::with_class(assembled, m, p.class_index);
            y_true[cvss::metric_key(m)].push_back(cvss::class_index(r.vector, m));
            y_pred[cvss::metric_key(m)].push_back(p.class_index);
        }
        predicted_vectors.push_back(assembled);
        true_scores.push_back(cvss::base_score(r.vector).score);
    }

    for (cvss::Metric m : cvss::kMetricOrder) {
        const std::string key = cvss::metric_key(m);
        report.per_metric[key] = classification_metrics(
            y_true[key], y_pred[key], static_cast<std::size_t>(cvss::num_classes(m)));
    }
    report.score = score_error_metrics(predicted_vectors, true_scores);
    return report;
}

}  // namespace cvsstext::train
