#pragma once

#include "conclusive_forest/forest_model.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace cforest {

/// Parses a model exchange document (format_version "1"). Throws
/// ModelFormatError on any structural or invariant violation.
ForestModel load_model(std::string_view document);
ForestModel load_model_file(const std::filesystem::path& path);

/// Serializes to the exchange format. Doubles are written with the
/// shortest representation that parses back bit-exact.
std::string serialize_model(const ForestModel& model, int indent = -1);

/// Writes `contents` through a temporary sibling and a rename.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace cforest
