#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvsstext/checkpoint.hpp"
#include "cvsstext/cvss.hpp"
#include "cvsstext/encoder.hpp"
#include "cvsstext/errors.hpp"
#include "cvsstext/nvd.hpp"
#include "cvsstext/optim.hpp"
#include "cvsstext/tokenizer.hpp"

namespace cvsstext::train {

using nlohmann::json;

struct TrainConfig {
    cvss::Metric metric = cvss::Metric::AV;
    std::size_t epochs_frozen = 3;
    std::size_t epochs_joint = 3;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";  // or "sgd"
    std::uint64_t seed = 7;
    std::string manifest_digest;

    void validate() const {
        if (epochs_joint < 1) throw UsageError("epochs_joint must be >= 1");
        if (batch_size < 1) throw UsageError("batch_size must be >= 1");
        if (optimizer != "adam" && optimizer != "sgd")
            throw UsageError("unknown optimizer: " + optimizer);
    }
};

struct EpochLog {
    std::size_t epoch = 0;      // 1-based
    std::string phase;          // "frozen" or "joint"
    double loss = 0.0;          // mean per-sample loss
    double accuracy = 0.0;      // running train accuracy from the training passes

    json to_json() const {
        return json{{"epoch", epoch}, {"phase", phase}, {"loss", loss},
                    {"accuracy", accuracy}};
    }
};

struct TrainResult {
    std::shared_ptr<model::EncoderModel> model;
    std::vector<EpochLog> log;

    std::string log_bytes() const {
        std::string out;
        for (const EpochLog& e : log) {
            out += e.to_json().dump();
            out += '\n';
        }
        return out;
    }
};

inline int project_label(const nvd::VulnRecord& r, cvss::Metric metric,
                         std::size_t num_classes) {
    const int label = cvss::class_index(r.vector, metric);
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
        throw LabelProjectionError("label " + std::to_string(label) + " for metric " +
                                   cvss::metric_key(metric) + " does not fit " +
                                   std::to_string(num_classes) + " classes");
    return label;
}

using EpochCallback = std::function<void(std::size_t epoch, const model::EncoderModel&)>;

// Trains one per-metric classifier. The encoder stays frozen for the first
// epochs_frozen epochs (only the classification head updates), then all
// parameters train jointly. on_epoch_end, when set, observes the model after
// each epoch's optimizer steps.
inline TrainResult train_metric(const TrainConfig& cfg, const model::ModelConfig& mc,
                                const std::vector<nvd::VulnRecord>& train_set,
                                const text::Vocabulary& vocab,
                                const EpochCallback& on_epoch_end = nullptr) {
    cfg.validate();
    if (train_set.empty()) throw EmptyTrainSetError();
    if (mc.num_classes != static_cast<std::size_t>(cvss::num_classes(cfg.metric)))
        throw LabelProjectionError(
            std::string("model classes do not match metric ") +
            cvss::metric_key(cfg.metric));

    TrainResult result;
    result.model = std::make_shared<model::EncoderModel>(mc);
    model::EncoderModel& m = *result.model;

    // tokenize once up front; sequences are reused across epochs
    std::vector<text::TokenSequence> seqs;
    std::vector<std::size_t> labels;
    seqs.reserve(train_set.size());
    for (const nvd::VulnRecord& r : train_set) {
        seqs.push_back(text::tokenize(r.description, vocab, mc.seq_len));
        labels.push_back(static_cast<std::size_t>(
            project_label(r, cfg.metric, mc.num_classes)));
    }

    std::unique_ptr<num::Adam> adam;
    std::unique_ptr<num::Sgd> sgd;
    if (cfg.optimizer == "adam")
        adam = std::make_unique<num::Adam>(cfg.learning_rate);
    else
        sgd = std::make_unique<num::Sgd>(cfg.learning_rate);

    std::vector<num::Param>& params = m.params_cache();
    const std::size_t total_epochs = cfg.epochs_frozen + cfg.epochs_joint;
    std::vector<std::size_t> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
        const bool frozen = epoch <= cfg.epochs_frozen;
        for (num::Param& p : params)
            p.frozen = frozen && !model::EncoderModel::is_head_param(p.name);

        Rng shuffle_rng(Rng::mix(cfg.seed, epoch));
        shuffle_rng.shuffle(order);
        Rng dropout_rng(Rng::mix(cfg.seed, 1000 + epoch));

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch_end = std::min(done + cfg.batch_size, order.size());
            const double inv_batch = 1.0 / static_cast<double>(batch_end - done);
            m.zero_grads();
            for (std::size_t b = done; b < batch_end; ++b) {
                const std::size_t i = order[b];
                num::Tape tape;
                model::ForwardResult res = m.forward(seqs[i], &tape, true, &dropout_rng);
                num::Tensor loss = m.loss(&tape, res.logits, labels[i]);
                loss_sum += loss.item();
                std::size_t argmax = 0;
                for (std::size_t j = 1; j < mc.num_classes; ++j)
                    if (res.logits.data()[j] > res.logits.data()[argmax]) argmax = j;
                if (argmax == labels[i]) ++correct;
                tape.backward(num::scale(&tape, loss, inv_batch));
            }
            if (adam)
                adam->step(params);
            else
                sgd->step(params);
            done = batch_end;
        }

        result.log.push_back({epoch, frozen ? "frozen" : "joint",
                              loss_sum / static_cast<double>(order.size()),
                              static_cast<double>(correct) /
                                  static_cast<double>(order.size())});
        if (on_epoch_end) on_epoch_end(epoch, m);
    }
    for (num::Param& p : params) p.frozen = false;
    return result;
}

// digest over all non-head parameter bytes; constant while the encoder is frozen
inline std::string encoder_digest(const model::EncoderModel& m) {
    std::string bytes;
    for (const num::Param& p : m.named_params()) {
        if (model::EncoderModel::is_head_param(p.name)) continue;
        const char* raw = reinterpret_cast<const char*>(p.value.data());
        bytes.append(raw, p.value.size() * sizeof(double));
    }
    return content_digest(bytes);
}

}  // namespace cvsstext::train
