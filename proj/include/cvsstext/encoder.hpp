#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cvsstext/errors.hpp"
#include "cvsstext/optim.hpp"
#include "cvsstext/rng.hpp"
#include "cvsstext/tensor.hpp"
#include "cvsstext/tokenizer.hpp"

namespace cvsstext::model {

using num::Tensor;

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t seq_len = 128;
    std::size_t hidden_dim = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t ffn_dim = 128;
    std::size_t num_classes = 2;
    double dropout_rate = 0.1;
    std::uint64_t seed = 1;
    std::string activation = "gelu";  // or "relu"

    void validate() const {
        if (hidden_dim % num_heads != 0)
            throw ModelError("hidden_dim must be divisible by num_heads");
        if (vocab_size == 0 || num_classes < 2 || num_layers == 0)
            throw ModelError("incomplete model config");
    }

    // small configuration used by tests and CI
    static ModelConfig desk(std::size_t vocab, std::size_t classes) {
        ModelConfig c;
        c.vocab_size = vocab;
        c.hidden_dim = 64;
        c.num_layers = 2;
        c.num_heads = 4;
        c.ffn_dim = 128;
        c.num_classes = classes;
        return c;
    }

    // mirrors the 4-layer, hidden-512 encoder stack used at full scale
    static ModelConfig paper_small(std::size_t vocab, std::size_t classes) {
        ModelConfig c;
        c.vocab_size = vocab;
        c.hidden_dim = 512;
        c.num_layers = 4;
        c.num_heads = 8;
        c.ffn_dim = 2048;
        c.num_classes = classes;
        return c;
    }

    static ModelConfig preset(const std::string& name, std::size_t vocab,
                              std::size_t classes) {
        if (name == "desk") return desk(vocab, classes);
        if (name == "paper-small") return paper_small(vocab, classes);
        throw UsageError("unknown preset: " + name);
    }
};

struct ForwardResult {
    Tensor logits;            // 1 x num_classes
    Tensor input_embeddings;  // n x hidden, the gathered token embeddings
    std::vector<std::vector<Tensor>> attentions;  // [layer][head], rows sum to 1
    std::size_t real_len = 0;
};

struct Prediction {
    int class_index = 0;
    double confidence = 0.0;
};

class EncoderModel {
  public:
    explicit EncoderModel(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(cfg_.seed);
        auto weight = [&](std::size_t r, std::size_t c) {
            Tensor t = Tensor::zeros(r, c, true);
            for (std::size_t i = 0; i < t.size(); ++i)
                t.data()[i] = rng.truncated_normal(0.02);
            return t;
        };
        auto zeros_row = [](std::size_t c) { return Tensor::zeros(1, c, true); };
        auto ones_row = [](std::size_t c) {
            Tensor t = Tensor::zeros(1, c, true);
            for (std::size_t i = 0; i < c; ++i) t.data()[i] = 1.0;
            return t;
        };

        const std::size_t h = cfg_.hidden_dim;
        tok_emb_ = weight(cfg_.vocab_size, h);
        pos_emb_ = weight(cfg_.seq_len, h);
        emb_ln_gain_ = ones_row(h);
        emb_ln_bias_ = zeros_row(h);
        blocks_.resize(cfg_.num_layers);
        for (Block& b : blocks_) {
            b.wq = weight(h, h);
            b.bq = zeros_row(h);
            b.wk = weight(h, h);
            b.bk = zeros_row(h);
            b.wv = weight(h, h);
            b.bv = zeros_row(h);
            b.wo = weight(h, h);
            b.bo = zeros_row(h);
            b.ln1_gain = ones_row(h);
            b.ln1_bias = zeros_row(h);
            b.w1 = weight(h, cfg_.ffn_dim);
            b.b1 = zeros_row(cfg_.ffn_dim);
            b.w2 = weight(cfg_.ffn_dim, h);
            b.b2 = zeros_row(h);
            b.ln2_gain = ones_row(h);
            b.ln2_bias = zeros_row(h);
        }
        head_w_ = weight(h, cfg_.num_classes);
        head_b_ = zeros_row(cfg_.num_classes);
    }

    const ModelConfig& config() const { return cfg_; }

    // Runs the encoder over the real-token prefix of the sequence. When
    // full_length is set the whole padded sequence is computed instead and
    // [PAD] keys are excluded from attention by an additive -1e9 bias; both
    // paths produce bit-identical logits (the gemm kernel sums per output
    // element in a fixed order and exp(-1e9 + s) underflows to exactly 0).
    ForwardResult forward(const text::TokenSequence& seq, num::Tape* tape = nullptr,
                          bool training = false, Rng* dropout_rng = nullptr,
                          bool full_length = false) const {
        if (seq.ids.size() != cfg_.seq_len)
            throw ShapeMismatchError("forward: sequence length " +
                                     std::to_string(seq.ids.size()) + " != configured " +
                                     std::to_string(cfg_.seq_len));
        for (int id : seq.ids)
            if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size)
                throw VocabMismatchError("token id " + std::to_string(id) +
                                         " outside vocabulary of size " +
                                         std::to_string(cfg_.vocab_size));
        const std::size_t n = full_length ? cfg_.seq_len : seq.real_len;
        if (n == 0) throw ShapeMismatchError("forward: empty sequence");

        using namespace num;
        ForwardResult res;
        res.real_len = seq.real_len;

        std::span<const int> ids(seq.ids.data(), n);
        Tensor x = embedding_lookup(tape, tok_emb_, ids);
        res.input_embeddings = x;
        Tensor pos = slice_rows(tape, pos_emb_, 0, n);
        Tensor h = layer_norm(tape, add(tape, x, pos), emb_ln_gain_, emb_ln_bias_, kLnEps);

        // additive key mask, only needed when padded positions are computed
        Tensor key_bias;
        bool need_mask = false;
        if (full_length) {
            std::vector<double> bias(n, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                if (seq.mask[j] == 0) {
                    bias[j] = -1e9;
                    need_mask = true;
                }
            if (need_mask) key_bias = Tensor::row(std::move(bias));
        }

        const std::size_t dh = cfg_.hidden_dim / cfg_.num_heads;
        const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
        res.attentions.resize(cfg_.num_layers);

        for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
            const Block& b = blocks_[l];
            Tensor q = add(tape, matmul(tape, h, b.wq), b.bq);
            Tensor k = add(tape, matmul(tape, h, b.wk), b.bk);
            Tensor v = add(tape, matmul(tape, h, b.wv), b.bv);

            std::vector<Tensor> heads;
            heads.reserve(cfg_.num_heads);
            for (std::size_t hd = 0; hd < cfg_.num_heads; ++hd) {
                Tensor qh = slice_cols(tape, q, hd * dh, (hd + 1) * dh);
                Tensor kh = slice_cols(tape, k, hd * dh, (hd + 1) * dh);
                Tensor vh = slice_cols(tape, v, hd * dh, (hd + 1) * dh);
                Tensor scores = scale(tape, matmul_nt(tape, qh, kh), inv_sqrt_dh);
                if (need_mask) scores = add(tape, scores, key_bias);
                Tensor attn = softmax_rows(tape, scores);
                res.attentions[l].push_back(attn);
                heads.push_back(matmul(tape, attn, vh));
            }
            Tensor attn_out = add(tape, matmul(tape, concat_cols(tape, heads), b.wo), b.bo);
            attn_out = maybe_dropout(tape, attn_out, training, dropout_rng);
            h = layer_norm(tape, add(tape, h, attn_out), b.ln1_gain, b.ln1_bias, kLnEps);

            Tensor mid = add(tape, matmul(tape, h, b.w1), b.b1);
            mid = cfg_.activation == "relu" ? relu(tape, mid) : gelu(tape, mid);
            Tensor ffn_out = add(tape, matmul(tape, mid, b.w2), b.b2);
            ffn_out = maybe_dropout(tape, ffn_out, training, dropout_rng);
            h = layer_norm(tape, add(tape, h, ffn_out), b.ln2_gain, b.ln2_bias, kLnEps);
        }

        Tensor cls = slice_rows(tape, h, 0, 1);
        res.logits = add(tape, matmul(tape, cls, head_w_), head_b_);
        return res;
    }

    // argmax of softmax over the logits; exact ties go to the lowest index
    Prediction predict(const text::TokenSequence& seq) const {
        ForwardResult res = forward(seq);
        const std::vector<double> probs =
            num::softmax_row(res.logits.data(), cfg_.num_classes);
        Prediction p;
        for (std::size_t j = 1; j < probs.size(); ++j)
            if (probs[j] > probs[p.class_index]) p.class_index = static_cast<int>(j);
        p.confidence = probs[static_cast<std::size_t>(p.class_index)];
        return p;
    }

    Tensor loss(num::Tape* tape, const Tensor& logits, std::size_t target) const {
        if (target >= cfg_.num_classes)
            throw TargetOutOfRangeError("loss target " + std::to_string(target) +
                                        " for " + std::to_string(cfg_.num_classes) +
                                        " classes");
        return num::cross_entropy(tape, logits, target);
    }

    // parameters in checkpoint manifest order; "head." names form the
    // classifier, everything else is the encoder
    std::vector<num::Param> named_params() const {
        std::vector<num::Param> out;
        out.push_back({"embedding.token", tok_emb_, false});
        out.push_back({"embedding.position", pos_emb_, false});
        out.push_back({"embedding.ln.gain", emb_ln_gain_, false});
        out.push_back({"embedding.ln.bias", emb_ln_bias_, false});
        for (std::size_t l = 0; l < blocks_.size(); ++l) {
            const Block& b = blocks_[l];
            const std::string p = "encoder." + std::to_string(l) + ".";
            out.push_back({p + "attn.wq", b.wq, false});
            out.push_back({p + "attn.bq", b.bq, false});
            out.push_back({p + "attn.wk", b.wk, false});
            out.push_back({p + "attn.bk", b.bk, false});
            out.push_back({p + "attn.wv", b.wv, false});
            out.push_back({p + "attn.bv", b.bv, false});
            out.push_back({p + "attn.wo", b.wo, false});
            out.push_back({p + "attn.bo", b.bo, false});
            out.push_back({p + "ln1.gain", b.ln1_gain, false});
            out.push_back({p + "ln1.bias", b.ln1_bias, false});
            out.push_back({p + "ffn.w1", b.w1, false});
            out.push_back({p + "ffn.b1", b.b1, false});
            out.push_back({p + "ffn.w2", b.w2, false});
            out.push_back({p + "ffn.b2", b.b2, false});
            out.push_back({p + "ln2.gain", b.ln2_gain, false});
            out.push_back({p + "ln2.bias", b.ln2_bias, false});
        }
        out.push_back({"head.weight", head_w_, false});
        out.push_back({"head.bias", head_b_, false});
        return out;
    }

    static bool is_head_param(const std::string& name) {
        return name.rfind("head.", 0) == 0;
    }

    void zero_grads() {
        for (num::Param& p : params_cache()) p.value.zero_grad();
    }

    std::vector<num::Param>& params_cache() {
        if (params_cache_.empty()) params_cache_ = named_params();
        return params_cache_;
    }

  private:
    static constexpr double kLnEps = 1e-5;

    struct Block {
        Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        Tensor ln1_gain, ln1_bias;
        Tensor w1, b1, w2, b2;
        Tensor ln2_gain, ln2_bias;
    };

    Tensor maybe_dropout(num::Tape* tape, const Tensor& x, bool training,
                         Rng* rng) const {
        if (!training || cfg_.dropout_rate <= 0.0 || rng == nullptr) return x;
        const double keep = 1.0 - cfg_.dropout_rate;
        Tensor mask = Tensor::zeros(x.rows(), x.cols());
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask.data()[i] = rng->next_double() < keep ? 1.0 / keep : 0.0;
        return num::mul(tape, x, mask);
    }

    ModelConfig cfg_;
    Tensor tok_emb_, pos_emb_, emb_ln_gain_, emb_ln_bias_;
    std::vector<Block> blocks_;
    Tensor head_w_, head_b_;
    std::vector<num::Param> params_cache_;
};

}  // namespace cvsstext::model
