#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pixelsne/core.hpp"

namespace pixelsne {

/// FNV-1a over a file's bytes; recorded in manifests to pin the exact input.
inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for digest: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

/// Resolved run configuration; with the input file it reproduces the run
/// bit-for-bit in single-threaded mode.
struct RunManifest {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(std::string key, std::string value) {
        entries.emplace_back(std::move(key), std::move(value));
    }
    void add(std::string key, double value) {
        std::ostringstream os;
        os << value;
        add(std::move(key), os.str());
    }
    void add(std::string key, std::uint64_t value) { add(std::move(key), std::to_string(value)); }

    std::string to_text() const {
        std::ostringstream os;
        for (const auto& [k, v] : entries) os << k << " = " << v << '\n';
        return os.str();
    }
};

}  // namespace pixelsne
