#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace fieldloom {

// Raised when a stage's upstream artifacts are absent (CLI exit code 3).
class MissingDependencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    nlohmann::json j;

    std::string workdir() const;
    int workers() const;
};

PipelineConfig load_config(const std::string& path);

// "a.b.c=value"; value parsed as JSON when possible, else taken as a string.
void apply_override(PipelineConfig& cfg, const std::string& key_equals_value);

// Line-delimited JSON log record on stdout.
void log_event(const std::string& stage, const std::string& event,
               const nlohmann::json& fields = nlohmann::json::object());

uint64_t fnv1a_file(const std::string& path);

// Stages: mosaic, segment, merge, filter, evaluate, aggregate; "scene"
// generates the synthetic fixture the verification pipeline runs on.
void run_stage(const std::string& stage, const PipelineConfig& cfg);

inline constexpr const char* kPipelineVersion = "0.1.0";

} // namespace fieldloom
