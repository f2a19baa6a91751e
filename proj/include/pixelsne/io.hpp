#pragma once

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pixelsne/core.hpp"

namespace pixelsne {

enum class FileFormat { tsv, csv, binary };

enum class LabelColumn { none, last };

struct LoadedMatrix {
    DataMatrix data;
    std::optional<LabelVector> labels;
};

namespace detail {

inline double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
    double out = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
        throw std::runtime_error("row " + std::to_string(row) + ": non-numeric cell '" +
                                 std::string(cell) + "' in column " + std::to_string(col));
    if (!std::isfinite(out))
        throw std::runtime_error("row " + std::to_string(row) + ": non-finite cell in column " +
                                 std::to_string(col));
    return out;
}

inline void split_fields(std::string_view line, char sep, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

/// Loads a delimited text matrix, one item per row. With LabelColumn::last the
/// final field of every row is taken as a categorical label.
inline LoadedMatrix load_matrix_text(const std::filesystem::path& path, char sep,
                                     LabelColumn label_col) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path.string());

    DataMatrix m;
    LabelVector labels;
    std::vector<std::string_view> fields;
    std::string line;
    std::size_t row = 0;
    std::size_t expected_fields = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        detail::split_fields(line, sep, fields);
        if (expected_fields == 0) {
            expected_fields = fields.size();
            const std::size_t label_fields = label_col == LabelColumn::last ? 1 : 0;
            if (expected_fields <= label_fields)
                throw std::runtime_error("row 0: no numeric columns");
            m.n_dims = expected_fields - label_fields;
        } else if (fields.size() != expected_fields) {
            throw std::runtime_error("row " + std::to_string(row) + ": expected " +
                                     std::to_string(expected_fields) + " fields, got " +
                                     std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < m.n_dims; ++c)
            m.values.push_back(detail::parse_cell(fields[c], row, c));
        if (label_col == LabelColumn::last) labels.emplace_back(fields.back());
        ++row;
    }
    if (row == 0) throw std::runtime_error("empty input file: " + path.string());
    m.n_items = row;
    m.validate();

    LoadedMatrix out;
    out.data = std::move(m);
    if (label_col == LabelColumn::last) out.labels = std::move(labels);
    return out;
}

// Binary layout: magic "PSNE", version 0x01, u32-LE n_items, u32-LE n_dims,
// then n_items*n_dims little-endian IEEE-754 binary32 values, row-major.
inline LoadedMatrix load_matrix_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.empty()) throw std::runtime_error("empty input file: " + path.string());
    if (bytes.size() < 13 || std::memcmp(bytes.data(), "PSNE", 4) != 0)
        throw std::runtime_error("not a PSNE binary file: " + path.string());
    if (bytes[4] != 0x01)
        throw std::runtime_error("unsupported PSNE version " + std::to_string(bytes[4]));

    DataMatrix m;
    m.n_items = detail::read_u32_le(bytes.data() + 5);
    m.n_dims = detail::read_u32_le(bytes.data() + 9);
    const std::size_t expected = 13 + std::size_t{4} * m.n_items * m.n_dims;
    if (bytes.size() != expected)
        throw std::runtime_error("truncated or oversized PSNE payload: expected " +
                                 std::to_string(expected) + " bytes, got " +
                                 std::to_string(bytes.size()));
    m.values.resize(m.n_items * m.n_dims);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const float f = std::bit_cast<float>(detail::read_u32_le(bytes.data() + 13 + 4 * i));
        if (!std::isfinite(f))
            throw std::runtime_error("row " + std::to_string(i / m.n_dims) +
                                     ": non-finite value in binary payload");
        m.values[i] = static_cast<double>(f);
    }
    m.validate();
    return {std::move(m), std::nullopt};
}

inline LoadedMatrix load_matrix(const std::filesystem::path& path, FileFormat format,
                                LabelColumn label_col = LabelColumn::none) {
    switch (format) {
        case FileFormat::tsv: return load_matrix_text(path, '\t', label_col);
        case FileFormat::csv: return load_matrix_text(path, ',', label_col);
        case FileFormat::binary: return load_matrix_binary(path);
    }
    throw std::invalid_argument("unknown file format");
}

inline void save_matrix_binary(const DataMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out.write("PSNE", 4);
    out.put(0x01);
    detail::write_u32_le(out, static_cast<std::uint32_t>(m.n_items));
    detail::write_u32_le(out, static_cast<std::uint32_t>(m.n_dims));
    for (double v : m.values)
        detail::write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Formats a double so that it parses back to the identical bit pattern.
inline std::string format_double(double v) {
    char buf[32];
    int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

/// Writes content to a sibling temp file, then renames into place so readers
/// never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open output file: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace pixelsne
