#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvsstext/checkpoint.hpp"
#include "cvsstext/cvss.hpp"
#include "cvsstext/encoder.hpp"
#include "cvsstext/errors.hpp"
#include "cvsstext/nvd.hpp"
#include "cvsstext/tokenizer.hpp"

namespace cvsstext::sal {

using nlohmann::json;

struct TokenScore {
    std::size_t position = 0;  // index into the token sequence
    std::string surface;       // piece surface, "##" prefix retained
    int word_index = -1;
    int start = 0, end = 0;    // byte span in the source text
    double score = 0.0;        // L2 of grad x input, always >= 0
};

struct RankedToken {
    std::string word;          // merged display word
    double score = 0.0;        // score of the ranked piece
    std::size_t position = 0;  // raw position of the ranked piece
    int start = 0, end = 0;    // byte span of the merged word
};

struct SaliencyReport {
    std::string cve_id;
    std::string metric;
    int predicted_class = 0;
    std::string predicted_value;
    double confidence = 0.0;
    std::vector<TokenScore> scores;  // real, non-special positions only
    std::vector<RankedToken> top;

    json to_json() const {
        json toks = json::array();
        for (const TokenScore& t : scores)
            toks.push_back({{"position", t.position},
                            {"token", t.surface},
                            {"span", {t.start, t.end}},
                            {"score", t.score}});
        json ranked = json::array();
        for (const RankedToken& r : top)
            ranked.push_back({{"word", r.word},
                              {"score", r.score},
                              {"position", r.position},
                              {"span", {r.start, r.end}}});
        return json{{"cve_id", cve_id},
                    {"metric", metric},
                    {"predicted_class", predicted_class},
                    {"predicted_value", predicted_value},
                    {"confidence", confidence},
                    {"tokens", toks},
                    {"top", ranked}};
    }
};

// per-row L2 norm of grad(X) elementwise-multiplied with X; the core of the
// gradient-times-input attribution
inline std::vector<double> token_importances(const num::Tensor& x) {
    if (!x.requires_grad())
        throw ModelError("token_importances: embeddings carry no gradient");
    std::vector<double> out(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double v = x.grad()[i * x.cols() + j] * x.data()[i * x.cols() + j];
            sq += v * v;
        }
        out[i] = std::sqrt(sq);
    }
    return out;
}

// Scores every real non-special token by back-propagating the pre-softmax
// logit of the predicted class (or the given target) to the input embeddings.
inline SaliencyReport gradient_x_input(const text::TokenSequence& seq,
                                       const model::EncoderModel& m,
                                       const text::Vocabulary& vocab,
                                       std::optional<int> target = std::nullopt) {
    num::Tape tape;
    model::ForwardResult res = m.forward(seq, &tape);  // inference mode, no dropout

    const std::size_t classes = m.config().num_classes;
    const std::vector<double> probs = num::softmax_row(res.logits.data(), classes);
    int predicted = 0;
    for (std::size_t j = 1; j < classes; ++j)
        if (probs[j] > probs[static_cast<std::size_t>(predicted)])
            predicted = static_cast<int>(j);
    const int cls = target.value_or(predicted);
    if (cls < 0 || static_cast<std::size_t>(cls) >= classes)
        throw TargetOutOfRangeError("saliency target " + std::to_string(cls));

    // clear any stale gradients from previous passes over the same model
    for (num::Param& p : const_cast<model::EncoderModel&>(m).params_cache())
        p.value.zero_grad();
    tape.backward(num::pick(&tape, res.logits, static_cast<std::size_t>(cls)));

    SaliencyReport report;
    report.predicted_class = cls;
    report.confidence = probs[static_cast<std::size_t>(cls)];
    const std::vector<double> imp = token_importances(res.input_embeddings);
    for (std::size_t i = 0; i < res.input_embeddings.rows(); ++i) {
        if (seq.mask[i] == 0 || vocab.is_special(seq.ids[i])) continue;
        report.scores.push_back({i, seq.surfaces[i], seq.word_index[i],
                                 seq.char_spans[i].first, seq.char_spans[i].second,
                                 imp[i]});
    }
    return report;
}

// Top-k raw tokens by importance (ties to the earlier position), each mapped
// to its merged word for display. A ranked sub-word elevates the whole word,
// so the same word may appear more than once when several of its pieces rank.
inline std::vector<RankedToken> top_k_tokens(const SaliencyReport& report,
                                             const text::TokenSequence& seq,
                                             std::size_t k = 5) {
    if (k < 1) throw UsageError("top_k_tokens: k must be >= 1");
    std::vector<const TokenScore*> order;
    order.reserve(report.scores.size());
    for (const TokenScore& t : report.scores) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const TokenScore* a, const TokenScore* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->position < b->position;
    });
    std::vector<RankedToken> out;
    for (const TokenScore* t : order) {
        if (out.size() >= k) break;
        RankedToken r;
        r.word = text::merged_word_at(seq, t->position);
        r.score = t->score;
        r.position = t->position;
        // span of the whole merged word
        std::size_t first = t->position, last = t->position;
        while (first > 0 && seq.word_index[first - 1] == t->word_index) --first;
        while (last + 1 < seq.word_index.size() &&
               seq.word_index[last + 1] == t->word_index)
            ++last;
        r.start = seq.char_spans[first].first;
        r.end = seq.char_spans[last].second;
        out.push_back(std::move(r));
    }
    return out;
}

struct Counted {
    std::string text;
    std::size_t count = 0;
};

struct ClassAssociation {
    std::string value;              // wire code of the class, e.g. "P"
    std::size_t filtered_count = 0; // records kept by the confidence filter
    bool empty_filtered_set = false;
    std::vector<Counted> unigrams;  // top 10
    std::vector<Counted> bigrams;   // top 5
};

struct AssociationTable {
    std::string metric;
    double threshold = 0.9;
    std::size_t k = 5;
    std::vector<ClassAssociation> classes;
    std::string manifest_digest;
    // bigrams pair adjacent tokens from distinct words; repeats within one
    // description all count
    std::string counting_policy = "every-occurrence";

    json to_json() const {
        json cls = json::array();
        for (const ClassAssociation& c : classes) {
            json uni = json::array(), bi = json::array();
            for (const Counted& u : c.unigrams)
                uni.push_back({{"token", u.text}, {"count", u.count}});
            for (const Counted& b : c.bigrams)
                bi.push_back({{"bigram", b.text}, {"count", b.count}});
            cls.push_back({{"value", c.value},
                           {"filtered_count", c.filtered_count},
                           {"empty_filtered_set", c.empty_filtered_set},
                           {"unigrams", uni},
                           {"bigrams", bi}});
        }
        return json{{"metric", metric},
                    {"threshold", threshold},
                    {"k", k},
                    {"classes", cls},
                    {"manifest_digest", manifest_digest},
                    {"counting_policy", counting_policy}};
    }
};

namespace detail {

inline std::vector<Counted> top_counts(const std::map<std::string, std::size_t>& counts,
                                       std::size_t k) {
    std::vector<Counted> all;
    all.reserve(counts.size());
    for (const auto& [text, n] : counts) all.push_back({text, n});
    std::sort(all.begin(), all.end(), [](const Counted& a, const Counted& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.text < b.text;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace detail

// Corpus-level aggregation: keep high-confidence predictions, take each
// record's top-k tokens, and count merged unigrams and adjacent-pair bigrams
// per predicted class.
inline AssociationTable aggregate_associations(const model::Checkpoint& ckpt,
                                               const std::vector<nvd::VulnRecord>& test_set,
                                               const text::Vocabulary& vocab,
                                               double threshold = 0.9, std::size_t k = 5,
                                               const std::string& manifest_digest = "") {
    const cvss::Metric metric = cvss::metric_from_key(ckpt.meta.metric);
    const std::size_t classes = ckpt.model.config().num_classes;

    AssociationTable table;
    table.metric = ckpt.meta.metric;
    table.threshold = threshold;
    table.k = k;
    table.manifest_digest = manifest_digest;

    std::vector<std::map<std::string, std::size_t>> uni(classes), bi(classes);
    std::vector<std::size_t> filtered(classes, 0);

    for (const nvd::VulnRecord& r : test_set) {
        const text::TokenSequence seq =
            text::tokenize(r.description, vocab, ckpt.model.config().seq_len);
        SaliencyReport report = gradient_x_input(seq, ckpt.model, vocab);
        if (report.confidence <= threshold) continue;
        const auto cls = static_cast<std::size_t>(report.predicted_class);
        ++filtered[cls];

        const std::vector<RankedToken> top = top_k_tokens(report, seq, k);
        std::set<std::size_t> top_positions;
        for (const RankedToken& t : top) {
            uni[cls][t.word] += 1;
            top_positions.insert(t.position);
        }
        for (std::size_t pos : top_positions) {
            if (!top_positions.count(pos + 1)) continue;
            if (seq.word_index[pos] == seq.word_index[pos + 1]) continue;
            bi[cls][text::merged_word_at(seq, pos) + " " +
                    text::merged_word_at(seq, pos + 1)] += 1;
        }
    }

    for (std::size_t c = 0; c < classes; ++c) {
        ClassAssociation assoc;
        assoc.value = cvss::value_code(metric, static_cast<int>(c));
        assoc.filtered_count = filtered[c];
        assoc.empty_filtered_set = filtered[c] == 0;
        assoc.unigrams = detail::top_counts(uni[c], 10);
        assoc.bigrams = detail::top_counts(bi[c], 5);
        table.classes.push_back(std::move(assoc));
    }
    return table;
}

// ---- report renderers -------------------------------------------------------

// terminal rendering: the description with the top-k merged words bolded,
// then the scored-token list
inline std::string render_text(const SaliencyReport& report,
                               const std::string& description) {
    std::vector<std::pair<int, int>> bold;
    for (const RankedToken& r : report.top) bold.push_back({r.start, r.end});
    std::sort(bold.begin(), bold.end());
    bold.erase(std::unique(bold.begin(), bold.end()), bold.end());

    std::string out;
    out += report.metric + " -> " + report.predicted_value + " (confidence " +
           std::to_string(report.confidence) + ")\n\n";
    int cursor = 0;
    for (const auto& [s, e] : bold) {
        if (s < cursor) continue;
        out += description.substr(static_cast<std::size_t>(cursor),
                                  static_cast<std::size_t>(s - cursor));
        out += "\033[1m";
        out += description.substr(static_cast<std::size_t>(s),
                                  static_cast<std::size_t>(e - s));
        out += "\033[0m";
        cursor = e;
    }
    out += description.substr(static_cast<std::size_t>(cursor));
    out += "\n\ntop tokens:\n";
    for (const RankedToken& r : report.top) {
        char line[160];
        std::snprintf(line, sizeof(line), "  %-24s %.6g\n", r.word.c_str(), r.score);
        out += line;
    }
    return out;
}

inline std::string html_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string render_html(const SaliencyReport& report,
                               const std::string& description) {
    std::vector<std::pair<int, int>> bold;
    for (const RankedToken& r : report.top) bold.push_back({r.start, r.end});
    std::sort(bold.begin(), bold.end());
    bold.erase(std::unique(bold.begin(), bold.end()), bold.end());

    std::string out = "<div class=\"saliency\">\n<p><strong>" +
                      html_escape(report.metric) + "</strong> &rarr; " +
                      html_escape(report.predicted_value) + " (confidence " +
                      std::to_string(report.confidence) + ")</p>\n<p>";
    int cursor = 0;
    for (const auto& [s, e] : bold) {
        if (s < cursor) continue;
        out += html_escape(description.substr(static_cast<std::size_t>(cursor),
                                              static_cast<std::size_t>(s - cursor)));
        out += "<b>";
        out += html_escape(description.substr(static_cast<std::size_t>(s),
                                              static_cast<std::size_t>(e - s)));
        out += "</b>";
        cursor = e;
    }
    out += html_escape(description.substr(static_cast<std::size_t>(cursor)));
    out += "</p>\n<table>\n<tr><th>token</th><th>score</th></tr>\n";
    for (const TokenScore& t : report.scores) {
        char row[256];
        std::snprintf(row, sizeof(row), "<tr><td>%s</td><td>%.6g</td></tr>\n",
                      html_escape(t.surface).c_str(), t.score);
        out += row;
    }
    out += "</table>\n</div>\n";
    return out;
}

}  // namespace cvsstext::sal
