#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "taskarith/analysis.hpp"
#include "taskarith/synth_data.hpp"
#include "taskarith/task_vector.hpp"
#include "taskarith/transformer.hpp"

namespace taskarith {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// Datasets are stored as token ids; the spec supplies the vectors on load.
Json dataset_to_json(const Dataset& data, const TaskSpec& spec);
Dataset dataset_from_json(const Json& j, const TaskSpec& spec);

Json task_spec_to_json(const TaskSpec& spec);
TaskSpec task_spec_from_json(const Json& j);

Json params_to_json(const ModelParams& p);
ModelParams params_from_json(const Json& j);
std::string params_to_binary(const ModelParams& p);
ModelParams params_from_binary(const std::string& bytes);

Json task_vector_to_json(const TaskVector& tv);
TaskVector task_vector_from_json(const Json& j);
std::string task_vector_to_binary(const TaskVector& tv);
TaskVector task_vector_from_binary(const std::string& bytes);

Json to_json(const LambdaRegion& r);
Json to_json(const OodCheck& c);
Json to_json(const DiagnosticReport& r);

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace taskarith
