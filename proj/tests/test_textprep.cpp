#include "cvsstext/tokenizer.hpp"
#include "cvsstext/vocab.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

using namespace cvsstext;
using namespace cvsstext::text;

namespace {

Vocabulary tiny_vocab(std::vector<std::string> extra) {
    std::vector<std::string> tokens{kPad, kUnk, kCls, kSep, kMask};
    for (char c = 'a'; c <= 'z'; ++c) {
        tokens.push_back(std::string(1, c));
        tokens.push_back("##" + std::string(1, c));
    }
    for (const std::string& p : {".", ",", "!", "-", "(", ")"})
        tokens.push_back(p);
    for (auto& t : extra) tokens.push_back(std::move(t));
    return Vocabulary(std::move(tokens));
}

std::vector<std::string> synthetic_corpus() {
    const std::vector<std::string> subjects = {
        "buffer overflow", "use-after-free", "cross-site scripting", "sql injection",
        "directory traversal", "integer underflow", "race condition",
        "null pointer dereference"};
    const std::vector<std::string> components = {
        "kernel driver", "web interface", "image parser", "login handler",
        "configuration service", "network daemon", "update mechanism", "report module"};
    const std::vector<std::string> outcomes = {
        "execute arbitrary code", "cause a denial of service", "obtain sensitive information",
        "gain elevated privileges", "bypass authentication checks", "overwrite critical files"};
    std::vector<std::string> corpus;
    for (std::size_t i = 0; i < 400; ++i)
        corpus.push_back("A " + subjects[i % subjects.size()] + " in the " +
                         components[(i / 3) % components.size()] +
                         " allows remote attackers to " + outcomes[i % outcomes.size()] +
                         " via a crafted request (issue " + std::to_string(i) + ").");
    return corpus;
}

}  // namespace

TEST(Vocab, FrequentWholeWordIsSingleToken) {
    Vocabulary v = build_vocab(synthetic_corpus(), 400);
    EXPECT_TRUE(v.contains("overflow"));
    TokenSequence seq = tokenize("overflow", v, 8);
    EXPECT_EQ(seq.surfaces[1], "overflow");
}

TEST(Vocab, CharacterFallbackAvoidsUnk) {
    Vocabulary v = build_vocab(synthetic_corpus(), 300);
    TokenSequence seq = tokenize("zqxjkv wyvern", v, 32);
    for (std::size_t i = 0; i < seq.real_len; ++i)
        EXPECT_NE(seq.ids[i], v.unk_id()) << "position " << i;
}

TEST(Vocab, ExactSizeAtCap) {
    Vocabulary v = build_vocab(synthetic_corpus(), 300);
    EXPECT_EQ(v.size(), 300u);
    // ids dense, specials present and distinct
    std::set<int> specials{v.pad_id(), v.unk_id(), v.cls_id(), v.sep_id(), v.mask_id()};
    EXPECT_EQ(specials.size(), 5u);
    for (int id : specials) EXPECT_LT(id, 300);
}

TEST(Vocab, EmptyCorpusThrows) {
    EXPECT_THROW(build_vocab({}, 300), EmptyCorpusError);
    EXPECT_THROW(build_vocab({"", "   "}, 300), EmptyCorpusError);
}

TEST(Vocab, SaveLoadBitExact) {
    Vocabulary v = build_vocab(synthetic_corpus(), 350);
    const std::string path = std::filesystem::temp_directory_path() / "vocab_test.txt";
    v.save(path);
    Vocabulary loaded = Vocabulary::load(path);
    EXPECT_EQ(loaded.tokens(), v.tokens());
    EXPECT_EQ(loaded.digest(), v.digest());
    std::filesystem::remove(path);
}

TEST(Tokenize, GivenVocabulary) {
    Vocabulary v = tiny_vocab({"usb", "device"});
    TokenSequence seq = tokenize("USB device", v, 128);
    EXPECT_EQ(seq.ids.size(), 128u);
    EXPECT_EQ(seq.surfaces[0], kCls);
    EXPECT_EQ(seq.surfaces[1], "usb");
    EXPECT_EQ(seq.surfaces[2], "device");
    EXPECT_EQ(seq.surfaces[3], kSep);
    EXPECT_EQ(seq.real_len, 4u);
    for (std::size_t i = 4; i < 128; ++i) {
        EXPECT_EQ(seq.ids[i], v.pad_id());
        EXPECT_EQ(seq.mask[i], 0);
    }
}

TEST(Tokenize, SubwordPieces) {
    Vocabulary v = tiny_vocab({"##ss"});
    TokenSequence seq = tokenize("xss", v, 16);
    EXPECT_EQ(seq.surfaces[1], "x");
    EXPECT_EQ(seq.surfaces[2], "##ss");
    EXPECT_EQ(seq.word_index[1], 0);
    EXPECT_EQ(seq.word_index[2], 0);
}

TEST(Tokenize, TruncationAt128) {
    Vocabulary v = tiny_vocab({"word"});
    std::string text;
    for (int i = 0; i < 300; ++i) text += "word ";
    TokenSequence seq = tokenize(text, v, 128);
    EXPECT_EQ(seq.ids.size(), 128u);
    EXPECT_EQ(seq.real_len, 128u);
    EXPECT_EQ(seq.surfaces[126], "word");
    EXPECT_EQ(seq.surfaces[127], kSep);
    EXPECT_EQ(seq.mask[127], 1);
}

TEST(Tokenize, PunctuationIsOwnToken) {
    Vocabulary v = tiny_vocab({"kernel", "panic"});
    TokenSequence seq = tokenize("kernel panic.", v, 16);
    EXPECT_EQ(seq.surfaces[1], "kernel");
    EXPECT_EQ(seq.surfaces[2], "panic");
    EXPECT_EQ(seq.surfaces[3], ".");
    EXPECT_EQ(seq.surfaces[4], kSep);
}

TEST(Tokenize, UnknownMaterialBecomesUnk) {
    // vocab that lacks 'q' pieces entirely
    std::vector<std::string> tokens{kPad, kUnk, kCls, kSep, kMask, "a", "##a"};
    Vocabulary v{std::move(tokens)};
    TokenSequence seq = tokenize("qqq aaa", v, 16);
    EXPECT_EQ(seq.ids[1], v.unk_id());
    EXPECT_EQ(seq.surfaces[2], "a");
}

TEST(Tokenize, Deterministic) {
    Vocabulary v = build_vocab(synthetic_corpus(), 320);
    const std::string text = "Remote attackers execute arbitrary code via crafted input.";
    TokenSequence a = tokenize(text, v);
    TokenSequence b = tokenize(text, v);
    EXPECT_EQ(a.ids, b.ids);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.char_spans, b.char_spans);
}

TEST(Tokenize, WordLevelReversibility) {
    Vocabulary v = tiny_vocab({"remote", "code", "execution"});
    TokenSequence seq = tokenize("Remote code execution!", v, 32);
    EXPECT_EQ(detokenize_span(seq, 1, seq.real_len - 2), "remote code execution !");
}

TEST(Detokenize, MergesSubwords) {
    Vocabulary v = tiny_vocab({"##ss"});
    TokenSequence seq = tokenize("xss", v, 16);
    EXPECT_EQ(detokenize_span(seq, 1, 2), "xss");
    EXPECT_EQ(merged_word_at(seq, 2), "xss");
}

TEST(Detokenize, SingleTokenIdentity) {
    Vocabulary v = tiny_vocab({"device"});
    TokenSequence seq = tokenize("device", v, 8);
    EXPECT_EQ(detokenize_span(seq, 1, 1), "device");
}

TEST(Detokenize, CatalinaPieces) {
    Vocabulary v = tiny_vocab({"cat", "##al", "##ina", "macos"});
    TokenSequence seq = tokenize("macOS Catalina", v, 16);
    EXPECT_EQ(seq.surfaces[2], "cat");
    EXPECT_EQ(seq.surfaces[3], "##al");
    EXPECT_EQ(seq.surfaces[4], "##ina");
    EXPECT_EQ(detokenize_span(seq, 2, 4), "catalina");
    EXPECT_EQ(merged_word_at(seq, 3), "catalina");
    // char spans track the original bytes
    EXPECT_EQ(seq.char_spans[2].first, 6);
    EXPECT_EQ(seq.char_spans[4].second, 14);
}

TEST(Detokenize, SpanErrors) {
    Vocabulary v = tiny_vocab({"device"});
    TokenSequence seq = tokenize("device", v, 8);
    EXPECT_THROW(detokenize_span(seq, 1, 7), SpanOutOfRangeError);
    EXPECT_THROW(detokenize_span(seq, 0, 1), SpanOutOfRangeError);  // [CLS] special
}
