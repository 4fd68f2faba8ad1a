#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdgpd/core.hpp"

namespace mdgpd {

using Json = nlohmann::json;

// Field names are the snake_case names of the struct members. Missing
// optional fields keep their defaults; validation runs on every read.
void to_json(Json& j, const ModelParams& p);
void from_json(const Json& j, ModelParams& p);
void to_json(Json& j, const DeltaPmf& d);
DeltaPmf delta_pmf_from_json(const Json& j);
void to_json(Json& j, const GeneratorSpec& s);
void from_json(const Json& j, GeneratorSpec& s);

/// Parses a JSON file; failures raise Config (parse) or Io (open).
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// CSV with the given header, one row per sample row.
void write_count_csv(const std::filesystem::path& path, const CountSample& sample,
                     const std::vector<std::string>& header);
/// Integer CSV with a header row; the header fixes the column count.
CountSample read_count_csv(const std::filesystem::path& path);
std::string format_double(double x);

}  // namespace mdgpd
