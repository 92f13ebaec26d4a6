#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvsstext/errors.hpp"
#include "cvsstext/vocab.hpp"

namespace cvsstext::text {

struct TokenSequence {
    std::vector<int> ids;                      // length == seq_len
    std::vector<unsigned char> mask;           // 1 on [CLS]..[SEP], 0 after
    std::vector<std::string> surfaces;         // aligned to ids
    std::vector<std::pair<int, int>> char_spans;  // (0,0) for specials/padding
    std::vector<int> word_index;               // source word per piece, -1 for specials
    std::size_t real_len = 0;                  // count of mask==1 positions

    bool is_special_position(const Vocabulary& vocab, std::size_t i) const {
        return vocab.is_special(ids[i]);
    }
};

namespace detail {

constexpr std::size_t kMaxWordChars = 100;

// greedy longest-match segmentation of one word; empty result means the word
// could not be covered and becomes a single [UNK]
inline std::vector<std::string> wordpiece_split(const Vocabulary& vocab,
                                                const std::string& word) {
    std::vector<std::string> pieces;
    if (word.size() > kMaxWordChars) return pieces;
    std::size_t start = 0;
    while (start < word.size()) {
        std::size_t end = word.size();
        std::string found;
        while (end > start) {
            std::string cand = word.substr(start, end - start);
            if (start > 0) cand = "##" + cand;
            if (vocab.contains(cand)) {
                found = std::move(cand);
                break;
            }
            --end;
        }
        if (found.empty()) return {};
        pieces.push_back(std::move(found));
        start = end;
    }
    return pieces;
}

}  // namespace detail

// Fixed-length encoding: [CLS] pieces... [SEP] [PAD]...; truncation keeps the
// head of the description.
inline TokenSequence tokenize(std::string_view description, const Vocabulary& vocab,
                              std::size_t seq_len = 128) {
    if (seq_len < 2) throw UsageError("sequence length must fit [CLS] and [SEP]");
    TokenSequence seq;
    seq.ids.assign(seq_len, vocab.pad_id());
    seq.mask.assign(seq_len, 0);
    seq.surfaces.assign(seq_len, kPad);
    seq.char_spans.assign(seq_len, {0, 0});
    seq.word_index.assign(seq_len, -1);

    seq.ids[0] = vocab.cls_id();
    seq.surfaces[0] = kCls;
    std::size_t pos = 1;

    const std::vector<WordSpan> words = split_words(description);
    const std::size_t limit = seq_len - 1;  // room for [SEP]
    for (std::size_t w = 0; w < words.size() && pos < limit; ++w) {
        std::vector<std::string> pieces = detail::wordpiece_split(vocab, words[w].word);
        if (pieces.empty()) {
            seq.ids[pos] = vocab.unk_id();
            seq.surfaces[pos] = kUnk;
            seq.char_spans[pos] = {words[w].start, words[w].end};
            seq.word_index[pos] = static_cast<int>(w);
            ++pos;
            continue;
        }
        int offset = words[w].start;
        for (const std::string& piece : pieces) {
            if (pos >= limit) break;
            const std::size_t chars =
                piece.rfind("##", 0) == 0 ? piece.size() - 2 : piece.size();
            seq.ids[pos] = vocab.id_of(piece);
            seq.surfaces[pos] = piece;
            seq.char_spans[pos] = {offset, offset + static_cast<int>(chars)};
            seq.word_index[pos] = static_cast<int>(w);
            offset += static_cast<int>(chars);
            ++pos;
        }
    }

    seq.ids[pos] = vocab.sep_id();
    seq.surfaces[pos] = kSep;
    ++pos;
    seq.real_len = pos;
    for (std::size_t i = 0; i < pos; ++i) seq.mask[i] = 1;
    return seq;
}

// merges "##" continuations back into words; distinct source words are joined
// with single spaces
inline std::string detokenize_span(const TokenSequence& seq, std::size_t first,
                                   std::size_t last) {
    if (first > last || last >= seq.ids.size() || seq.mask[first] == 0 ||
        seq.mask[last] == 0)
        throw SpanOutOfRangeError("detokenize_span: [" + std::to_string(first) + "," +
                                  std::to_string(last) + "] is not a real-token span");
    std::string out;
    int prev_word = -2;
    for (std::size_t i = first; i <= last; ++i) {
        if (seq.word_index[i] < 0)
            throw SpanOutOfRangeError("detokenize_span: position " + std::to_string(i) +
                                      " is a special token");
        std::string_view piece = seq.surfaces[i];
        if (piece.rfind("##", 0) == 0)
            piece.remove_prefix(2);
        else if (prev_word >= 0 && seq.word_index[i] != prev_word)
            out += ' ';
        out += piece;
        prev_word = seq.word_index[i];
    }
    return out;
}

// full merged word containing position i (all pieces with the same word index)
inline std::string merged_word_at(const TokenSequence& seq, std::size_t i) {
    const int w = seq.word_index[i];
    if (w < 0) return seq.surfaces[i];
    std::size_t first = i, last = i;
    while (first > 0 && seq.word_index[first - 1] == w) --first;
    while (last + 1 < seq.ids.size() && seq.word_index[last + 1] == w) ++last;
    return detokenize_span(seq, first, last);
}

}  // namespace cvsstext::text
