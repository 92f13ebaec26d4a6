#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cvsstext/digest.hpp"
#include "cvsstext/errors.hpp"
#include "cvsstext/io.hpp"

namespace cvsstext::text {

inline constexpr const char* kPad = "[PAD]";
inline constexpr const char* kUnk = "[UNK]";
inline constexpr const char* kCls = "[CLS]";
inline constexpr const char* kSep = "[SEP]";
inline constexpr const char* kMask = "[MASK]";

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

// lowercases ASCII in place; byte length is preserved so char offsets into
// the original text stay valid
inline std::string ascii_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

struct WordSpan {
    std::string word;  // lowercased surface; single punctuation mark counts
    int start = 0;     // byte offsets into the source text
    int end = 0;
};

// splits on whitespace; punctuation marks become their own single-char words
inline std::vector<WordSpan> split_words(std::string_view text) {
    const std::string lower = ascii_lower(text);
    std::vector<WordSpan> out;
    std::size_t i = 0;
    while (i < lower.size()) {
        const unsigned char c = static_cast<unsigned char>(lower[i]);
        if (std::isspace(c) || c < 0x20) {
            ++i;
            continue;
        }
        if (is_word_char(lower[i])) {
            std::size_t j = i;
            while (j < lower.size() && is_word_char(lower[j])) ++j;
            out.push_back({lower.substr(i, j - i), static_cast<int>(i),
                           static_cast<int>(j)});
            i = j;
        } else {
            out.push_back({lower.substr(i, 1), static_cast<int>(i),
                           static_cast<int>(i + 1)});
            ++i;
        }
    }
    return out;
}

class Vocabulary {
  public:
    Vocabulary() = default;

    explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        for (std::size_t i = 0; i < tokens_.size(); ++i)
            id_of_[tokens_[i]] = static_cast<int>(i);
        for (const char* sp : {kPad, kUnk, kCls, kSep, kMask})
            if (!id_of_.count(sp))
                throw DataError(std::string("vocabulary is missing special token ") + sp);
    }

    int pad_id() const { return id_of_.at(kPad); }
    int unk_id() const { return id_of_.at(kUnk); }
    int cls_id() const { return id_of_.at(kCls); }
    int sep_id() const { return id_of_.at(kSep); }
    int mask_id() const { return id_of_.at(kMask); }

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    int id_of(std::string_view token) const {
        auto it = id_of_.find(std::string(token));
        return it == id_of_.end() ? -1 : it->second;
    }
    bool contains(std::string_view token) const { return id_of(token) >= 0; }

    bool is_special(int id) const {
        return id == pad_id() || id == unk_id() || id == cls_id() || id == sep_id() ||
               id == mask_id();
    }

    std::string dump() const {
        std::string out;
        for (const std::string& t : tokens_) {
            out += t;
            out += '\n';
        }
        return out;
    }

    std::string digest() const { return content_digest(dump()); }

    void save(const std::string& path) const { atomic_write_file(path, dump()); }

    static Vocabulary load(const std::string& path) {
        const std::string bytes = read_file(path);
        std::vector<std::string> tokens;
        std::size_t start = 0;
        while (start < bytes.size()) {
            std::size_t nl = bytes.find('\n', start);
            if (nl == std::string::npos) nl = bytes.size();
            tokens.push_back(bytes.substr(start, nl - start));
            start = nl + 1;
        }
        return Vocabulary(std::move(tokens));
    }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> id_of_;
};

// Frequency-based vocabulary: specials, then single-character fallback pieces
// (bare and "##" continuation forms), then the most frequent whole words, then
// frequent sub-word pieces for everything the word budget did not cover.
// Word/piece budget split and piece length bounds are fixed here.
inline Vocabulary build_vocab(const std::vector<std::string>& corpus,
                              std::size_t max_size) {
    if (max_size < 300) throw UsageError("vocabulary max_size must be >= 300");

    std::map<std::string, long long> word_freq;
    std::set<char> chars{'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k',
                         'l', 'm', 'n', 'o', 'p', 'q', 'r', 's', 't', 'u', 'v',
                         'w', 'x', 'y', 'z', '0', '1', '2', '3', '4', '5', '6',
                         '7', '8', '9'};
    for (const std::string& doc : corpus)
        for (const WordSpan& w : split_words(doc)) {
            ++word_freq[w.word];
            for (char c : w.word) chars.insert(c);
        }
    if (word_freq.empty()) throw EmptyCorpusError();

    std::vector<std::string> tokens{kPad, kUnk, kCls, kSep, kMask};
    std::set<std::string> present(tokens.begin(), tokens.end());
    auto push = [&](const std::string& t) {
        if (present.insert(t).second) tokens.push_back(t);
    };

    for (char c : chars) {
        push(std::string(1, c));
        push("##" + std::string(1, c));
    }
    if (tokens.size() >= max_size)
        throw UsageError("max_size too small for character fallback set");

    // words by frequency, ties alphabetical
    std::vector<std::pair<long long, std::string>> by_freq;
    by_freq.reserve(word_freq.size());
    for (const auto& [w, f] : word_freq)
        if (w.size() > 1) by_freq.push_back({-f, w});
    std::sort(by_freq.begin(), by_freq.end());

    const std::size_t budget = max_size - tokens.size();
    const std::size_t word_budget = budget - budget / 5;  // pieces get ~20%
    for (const auto& [negf, w] : by_freq) {
        if (tokens.size() >= max_size - (budget - word_budget)) break;
        push(w);
    }

    // sub-word pieces weighted by the frequency of the words containing them;
    // bare pieces only from word starts, "##" pieces from any later offset
    constexpr std::size_t kMaxPieceLen = 10;
    std::map<std::string, long long> piece_weight;
    for (const auto& [w, f] : word_freq) {
        if (present.count(w)) continue;  // already a whole token
        const std::size_t len = w.size();
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = i + 2; j <= std::min(len, i + kMaxPieceLen); ++j) {
                if (i == 0 && j == len) continue;  // that is the word itself
                const std::string frag = w.substr(i, j - i);
                piece_weight[i == 0 ? frag : "##" + frag] += f;
            }
    }
    std::vector<std::pair<long long, std::string>> pieces;
    pieces.reserve(piece_weight.size());
    for (const auto& [p, wgt] : piece_weight)
        if (!present.count(p)) pieces.push_back({-wgt, p});
    std::sort(pieces.begin(), pieces.end());
    for (const auto& [negw, p] : pieces) {
        if (tokens.size() >= max_size) break;
        push(p);
    }
    // top up with remaining whole words if pieces ran out first
    for (const auto& [negf, w] : by_freq) {
        if (tokens.size() >= max_size) break;
        push(w);
    }

    return Vocabulary(std::move(tokens));
}

}  // namespace cvsstext::text
