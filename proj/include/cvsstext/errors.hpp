#pragma once

#include <stdexcept>
#include <string>

namespace cvsstext {

// Error categories map onto CLI exit codes: usage=2, data=3, model=4, io=5.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// cvss vector grammar
struct MissingMetricError : DataError {
    explicit MissingMetricError(const std::string& name)
        : DataError("missing metric: " + name), metric(name) {}
    std::string metric;
};
struct DuplicateMetricError : DataError {
    explicit DuplicateMetricError(const std::string& name)
        : DataError("duplicate metric: " + name), metric(name) {}
    std::string metric;
};
struct UnknownKeyError : DataError {
    explicit UnknownKeyError(const std::string& k)
        : DataError("unknown metric key: " + k), key(k) {}
    std::string key;
};
struct UnknownValueError : DataError {
    UnknownValueError(const std::string& k, const std::string& v)
        : DataError("unknown value '" + v + "' for metric " + k), key(k), value(v) {}
    std::string key;
    std::string value;
};
struct MalformedPairError : DataError {
    explicit MalformedPairError(const std::string& frag)
        : DataError("malformed metric pair: '" + frag + "'"), fragment(frag) {}
    std::string fragment;
};
struct OutOfRangeError : DataError {
    explicit OutOfRangeError(double s)
        : DataError("score out of range [0,10]: " + std::to_string(s)) {}
};

// ingest
struct UnreadableSourceError : IoError {
    using IoError::IoError;
};
struct SchemaViolationError : DataError {
    explicit SchemaViolationError(const std::string& path)
        : DataError("feed schema violation at " + path) {}
};
struct EmptyCorpusError : DataError {
    EmptyCorpusError() : DataError("corpus is empty") {}
};

// textprep
struct SpanOutOfRangeError : DataError {
    using DataError::DataError;
};

// numerics
struct ShapeMismatchError : ModelError {
    using ModelError::ModelError;
};
struct NonScalarOutputError : ModelError {
    NonScalarOutputError() : ModelError("backward requires a scalar output") {}
};

// encoder / checkpoints
struct VocabMismatchError : ModelError {
    using ModelError::ModelError;
};
struct TargetOutOfRangeError : ModelError {
    using ModelError::ModelError;
};
struct CorruptCheckpointError : ModelError {
    using ModelError::ModelError;
};
struct VersionMismatchError : ModelError {
    using ModelError::ModelError;
};
struct MissingCheckpointError : ModelError {
    explicit MissingCheckpointError(const std::string& metric)
        : ModelError("no checkpoint for metric " + metric) {}
};

// train/eval
struct EmptyTrainSetError : DataError {
    EmptyTrainSetError() : DataError("training set is empty") {}
};
struct LabelProjectionError : DataError {
    using DataError::DataError;
};
struct LengthMismatchError : DataError {
    using DataError::DataError;
};

}  // namespace cvsstext
