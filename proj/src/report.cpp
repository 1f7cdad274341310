#include "pgeq/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <filesystem>

namespace pgeq {

std::uint64_t fnv1a_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        fs::create_directories(target.parent_path());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open for writing: " + tmp.string());
        }
        out << content;
        if (!out.flush()) {
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, target);
}

std::string dump_report(const nlohmann::json& report) {
    // nlohmann objects keep keys sorted; double formatting is shortest
    // round-trip, so equal reports serialize to equal bytes.
    return report.dump(2) + "\n";
}

void write_report(const std::string& path, const nlohmann::json& report) {
    write_text_atomic(path, dump_report(report));
}

void write_metadata(const std::string& report_path) {
    const auto now = std::chrono::system_clock::now();
    const auto unix_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch())
            .count();
    nlohmann::json meta;
    meta["report"] = std::filesystem::path(report_path).filename().string();
    meta["written_unix_ms"] = unix_ms;
    write_text_atomic(report_path + ".meta.json", dump_report(meta));
}

}  // namespace pgeq
