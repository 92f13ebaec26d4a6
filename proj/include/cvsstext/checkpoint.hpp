#pragma once

#include <cstring>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvsstext/digest.hpp"
#include "cvsstext/encoder.hpp"
#include "cvsstext/errors.hpp"
#include "cvsstext/io.hpp"

namespace cvsstext::model {

using nlohmann::json;

inline constexpr const char* kCheckpointMagic = "cvsstext-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    std::string metric;           // AV, AC, PR, UI, S, C, I, A
    std::string vocab_digest;
    std::string manifest_digest;  // dataset split manifest
    std::size_t epochs_frozen = 0;
    std::size_t epochs_joint = 0;
    std::uint64_t seed = 0;
    std::string optimizer;
    double learning_rate = 0.0;
    std::size_t batch_size = 0;
};

struct Checkpoint {
    EncoderModel model;
    CheckpointMeta meta;
};

namespace detail {

inline json config_to_json(const ModelConfig& c) {
    return json{{"vocab_size", c.vocab_size},   {"seq_len", c.seq_len},
                {"hidden_dim", c.hidden_dim},   {"num_layers", c.num_layers},
                {"num_heads", c.num_heads},     {"ffn_dim", c.ffn_dim},
                {"num_classes", c.num_classes}, {"dropout_rate", c.dropout_rate},
                {"seed", c.seed},               {"activation", c.activation}};
}

inline ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.seq_len = j.at("seq_len").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.num_heads = j.at("num_heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.activation = j.at("activation").get<std::string>();
    return c;
}

}  // namespace detail

// Self-describing container: one magic+version line, one decimal header
// length line, a JSON header, a newline, then raw little-endian float64
// blocks in manifest order.
inline void save_checkpoint(const EncoderModel& model, const CheckpointMeta& meta,
                            const std::string& path) {
    const std::vector<num::Param> params = model.named_params();

    std::string payload;
    json manifest = json::array();
    for (const num::Param& p : params) {
        manifest.push_back(
            {{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
        const std::size_t bytes = p.value.size() * sizeof(double);
        const std::size_t off = payload.size();
        payload.resize(off + bytes);
        std::memcpy(payload.data() + off, p.value.data(), bytes);
    }

    json header{{"format", kCheckpointVersion},
                {"metric", meta.metric},
                {"config", detail::config_to_json(model.config())},
                {"vocab_digest", meta.vocab_digest},
                {"manifest_digest", meta.manifest_digest},
                {"training",
                 {{"epochs_frozen", meta.epochs_frozen},
                  {"epochs_joint", meta.epochs_joint},
                  {"seed", meta.seed},
                  {"optimizer", meta.optimizer},
                  {"learning_rate", meta.learning_rate},
                  {"batch_size", meta.batch_size}}},
                {"tensors", manifest},
                {"payload_bytes", payload.size()},
                {"payload_digest", content_digest(payload)}};

    const std::string header_bytes = header.dump();
    std::string out = std::string(kCheckpointMagic) + "/" +
                      std::to_string(kCheckpointVersion) + "\n" +
                      std::to_string(header_bytes.size()) + "\n" + header_bytes + "\n";
    out += payload;
    atomic_write_file(path, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const IoError& e) {
        throw CorruptCheckpointError(e.what());
    }

    const std::size_t magic_end = bytes.find('\n');
    if (magic_end == std::string::npos)
        throw CorruptCheckpointError("checkpoint too short: " + path);
    const std::string magic_line = bytes.substr(0, magic_end);
    const std::size_t slash = magic_line.find('/');
    if (slash == std::string::npos || magic_line.substr(0, slash) != kCheckpointMagic)
        throw CorruptCheckpointError("not a checkpoint file: " + path);
    if (magic_line.substr(slash + 1) != std::to_string(kCheckpointVersion))
        throw VersionMismatchError("unsupported checkpoint version " +
                                   magic_line.substr(slash + 1) + " in " + path);

    const std::size_t len_end = bytes.find('\n', magic_end + 1);
    if (len_end == std::string::npos)
        throw CorruptCheckpointError("missing header length: " + path);
    std::size_t header_len = 0;
    try {
        header_len = std::stoull(bytes.substr(magic_end + 1, len_end - magic_end - 1));
    } catch (const std::exception&) {
        throw CorruptCheckpointError("bad header length: " + path);
    }

    const std::size_t header_start = len_end + 1;
    if (header_start + header_len + 1 > bytes.size())
        throw CorruptCheckpointError("truncated header: " + path);
    json header;
    try {
        header = json::parse(bytes.substr(header_start, header_len));
    } catch (const json::exception& e) {
        throw CorruptCheckpointError("bad header json: " + path + ": " + e.what());
    }

    const std::size_t payload_start = header_start + header_len + 1;
    const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (payload_start + payload_bytes != bytes.size())
        throw CorruptCheckpointError("truncated payload: " + path);
    const std::string_view payload(bytes.data() + payload_start, payload_bytes);
    if (content_digest(payload) != header.at("payload_digest").get<std::string>())
        throw CorruptCheckpointError("payload digest mismatch: " + path);

    Checkpoint ckpt{EncoderModel(detail::config_from_json(header.at("config"))), {}};
    ckpt.meta.metric = header.at("metric").get<std::string>();
    ckpt.meta.vocab_digest = header.at("vocab_digest").get<std::string>();
    ckpt.meta.manifest_digest = header.at("manifest_digest").get<std::string>();
    const json& tr = header.at("training");
    ckpt.meta.epochs_frozen = tr.at("epochs_frozen").get<std::size_t>();
    ckpt.meta.epochs_joint = tr.at("epochs_joint").get<std::size_t>();
    ckpt.meta.seed = tr.at("seed").get<std::uint64_t>();
    ckpt.meta.optimizer = tr.value("optimizer", "");
    ckpt.meta.learning_rate = tr.value("learning_rate", 0.0);
    ckpt.meta.batch_size = tr.value("batch_size", std::size_t{0});

    std::vector<num::Param> params = ckpt.model.named_params();
    const json& manifest = header.at("tensors");
    if (manifest.size() != params.size())
        throw CorruptCheckpointError("tensor manifest does not match architecture: " +
                                     path);
    std::size_t off = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const json& entry = manifest[i];
        if (entry.at("name").get<std::string>() != params[i].name ||
            entry.at("rows").get<std::size_t>() != params[i].value.rows() ||
            entry.at("cols").get<std::size_t>() != params[i].value.cols())
            throw CorruptCheckpointError("tensor manifest entry mismatch at " +
                                         params[i].name + ": " + path);
        const std::size_t nbytes = params[i].value.size() * sizeof(double);
        std::memcpy(params[i].value.data(), payload.data() + off, nbytes);
        off += nbytes;
    }
    if (off != payload_bytes)
        throw CorruptCheckpointError("payload length mismatch: " + path);
    return ckpt;
}

}  // namespace cvsstext::model
