#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace pgeq {

/// FNV-1a over the raw bytes; used to fingerprint config files in reports.
std::uint64_t fnv1a_hash(const std::string& bytes);

/// Writes via a temp file in the same directory, then renames into place.
void write_text_atomic(const std::string& path, const std::string& content);

/// Deterministic serialization (sorted keys, fixed float formatting).
std::string dump_report(const nlohmann::json& report);

void write_report(const std::string& path, const nlohmann::json& report);

/// Timestamp and friends live next to the report so the report itself stays
/// byte-identical across reruns.
void write_metadata(const std::string& report_path);

}  // namespace pgeq
