#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace driftnet {

/// Parses a JSON file; syntax errors become ParseError carrying
/// "path:line:column" context.
nlohmann::json read_json_file(const std::string& path);

/// Parses JSON text; `origin` names the source in error messages.
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);

/// Writes `doc` pretty-printed with a trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& doc);

} // namespace driftnet
