#pragma once

#include <string>

#include "json.hpp"

namespace sarnet::io {

std::string read_text(const std::string& path);
nlohmann::json read_json(const std::string& path);

// Writes through a sibling temp file and renames it into place.
void write_text_atomic(const std::string& path, const std::string& contents);
void write_json_atomic(const std::string& path, const nlohmann::json& doc);

}  // namespace sarnet::io
