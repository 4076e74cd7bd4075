// SPDX-License-Identifier: Apache-2.0
#pragma once
// File formats shared by the modules.
//
//   matrix (binary): 8-byte magic "NFMATRX1", uint64 rows, uint64 cols, then
//                    rows*cols float64, all little-endian, row-major.
//   matrix (CSV):    header `node_id,c1,...,cC`, then `id,v1,...,vC`.
//   labels CSV:      `node_id,label` with an optional third `provenance` column.
//   trajectory CSV:  header `node_id,epoch_0,...,epoch_{E-1}`.
//
// All ids in files are 1-based.

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "noiseforge/core.hpp"
#include "noiseforge/graph.hpp"

namespace noiseforge::io {

namespace fs = std::filesystem;

inline std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

inline std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

inline std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("write failed: " + path.string());
}

/// True if the first field of a CSV line is not an integer, i.e. a header.
inline bool is_header(std::string_view line) {
    const auto fields = split(line, ',');
    return !parse_int(fields.front()).has_value();
}

// --- matrices --------------------------------------------------------------

inline constexpr char kMatrixMagic[8] = {'N', 'F', 'M', 'A', 'T', 'R', 'X', '1'};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
    return v;
}

}  // namespace detail

inline std::string encode_matrix_binary(const Matrix& m) {
    std::string out(kMatrixMagic, sizeof kMatrixMagic);
    detail::put_u64(out, m.rows());
    detail::put_u64(out, m.cols());
    for (double x : m.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
    return out;
}

inline Matrix decode_matrix_binary(const std::string& bytes, const std::string& origin = "<buffer>") {
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kMatrixMagic, 8) != 0)
        throw InputError(origin + ": not a binary matrix file (bad magic)");
    const std::uint64_t rows = detail::get_u64(bytes, 8);
    const std::uint64_t cols = detail::get_u64(bytes, 16);
    if (bytes.size() != 24 + rows * cols * 8)
        throw InputError(origin + ": binary matrix size does not match header " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < rows * cols; ++k) m.data()[k] = std::bit_cast<double>(detail::get_u64(bytes, 24 + 8 * k));
    return m;
}

inline std::string encode_matrix_csv(const Matrix& m, std::string_view column_prefix = "c") {
    std::string out = "node_id";
    for (std::size_t c = 0; c < m.cols(); ++c) out += "," + std::string(column_prefix) + std::to_string(c + 1);
    out += '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out += std::to_string(r + 1);
        for (double x : m.row(r)) {
            out += ',';
            out += format_double(x);
        }
        out += '\n';
    }
    return out;
}

/// Parses `node_id,v1,...` rows (header optional). Ids must cover 1..rows.
inline Matrix decode_matrix_csv(const std::vector<std::string>& lines, const fs::path& origin) {
    std::vector<std::pair<long long, std::vector<double>>> rows;
    std::size_t cols = 0;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = trim(lines[ln]);
        if (line.empty() || line.front() == '#') continue;
        if (rows.empty() && cols == 0 && is_header(line)) {
            cols = split(line, ',').size() - 1;
            continue;
        }
        const auto fields = split(line, ',');
        const auto id = parse_int(fields[0]);
        if (!id || *id < 1) throw InputError(where(origin, ln + 1) + ": malformed node id");
        std::vector<double> vals;
        for (std::size_t f = 1; f < fields.size(); ++f) {
            const auto v = parse_double(fields[f]);
            if (!v) throw InputError(where(origin, ln + 1) + ": malformed number '" + std::string(fields[f]) + "'");
            vals.push_back(*v);
        }
        if (cols == 0) cols = vals.size();
        if (vals.size() != cols) throw InputError(where(origin, ln + 1) + ": expected " + std::to_string(cols) + " values");
        rows.emplace_back(*id, std::move(vals));
    }
    Matrix m(rows.size(), cols);
    std::vector<bool> seen(rows.size(), false);
    for (auto& [id, vals] : rows) {
        const auto r = static_cast<std::size_t>(id - 1);
        if (r >= rows.size() || seen[r])
            throw InputError(origin.string() + ": node ids must cover 1.." + std::to_string(rows.size()) + " exactly once");
        seen[r] = true;
        std::copy(vals.begin(), vals.end(), m.row(r).begin());
    }
    return m;
}

inline void write_matrix(const fs::path& path, const Matrix& m) {
    if (path.extension() == ".bin")
        write_file(path, encode_matrix_binary(m));
    else
        write_file(path, encode_matrix_csv(m));
}

/// Reads `.bin` files as binary matrices and anything else as CSV.
inline Matrix read_matrix(const fs::path& path) {
    if (path.extension() == ".bin") return decode_matrix_binary(read_file(path), path.string());
    return decode_matrix_csv(read_lines(path), path);
}

// --- labels ----------------------------------------------------------------

inline std::string encode_labels_csv(const LabelSet& labels, bool with_provenance) {
    std::string out = with_provenance ? "node_id,label,provenance\n" : "node_id,label\n";
    const std::string prov = to_string(labels.provenance);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += std::to_string(i + 1) + "," + std::to_string(labels[i] + 1);
        if (with_provenance) out += "," + prov;
        out += '\n';
    }
    return out;
}

inline void write_labels(const fs::path& path, const LabelSet& labels, bool with_provenance = true) {
    write_file(path, encode_labels_csv(labels, with_provenance));
}

/// Reads a labels CSV. Also accepts a corruption realization file
/// (`node_id,clean_label,noisy_label,corrupted`), returning its noisy column.
/// When expected_n is 0 the node count is taken from the file.
inline LabelSet read_labels(const fs::path& path, std::size_t expected_n, int num_classes) {
    const auto lines = read_lines(path);
    std::size_t label_col = 1;
    int prov_col = -1;
    std::vector<std::pair<long long, int>> entries;
    std::optional<LabelProvenance> provenance;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = trim(lines[ln]);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (entries.empty() && is_header(line)) {
            for (std::size_t f = 0; f < fields.size(); ++f) {
                const auto name = trim(fields[f]);
                if (name == "noisy_label") label_col = f;
                if (name == "provenance") prov_col = static_cast<int>(f);
            }
            continue;
        }
        if (fields.size() <= label_col) throw InputError(where(path, ln + 1) + ": malformed row");
        const auto id = parse_int(fields[0]);
        const auto lab = parse_int(fields[label_col]);
        if (!id || !lab) throw InputError(where(path, ln + 1) + ": malformed row");
        if (*lab < 1 || *lab > num_classes) throw InputError(where(path, ln + 1) + ": label out of range");
        if (prov_col >= 0 && static_cast<std::size_t>(prov_col) < fields.size() && !provenance)
            provenance = provenance_from_string(trim(fields[static_cast<std::size_t>(prov_col)]));
        entries.emplace_back(*id, static_cast<int>(*lab - 1));
    }
    const std::size_t n = expected_n ? expected_n : entries.size();
    LabelSet out;
    out.provenance = provenance.value_or(LabelProvenance::clean);
    out.values.assign(n, -1);
    for (auto [id, lab] : entries) {
        if (id < 1 || static_cast<std::size_t>(id) > n) throw InputError(path.string() + ": node id " + std::to_string(id) + " out of range");
        if (out.values[static_cast<std::size_t>(id - 1)] != -1)
            throw InputError(path.string() + ": node id " + std::to_string(id) + " listed twice");
        out.values[static_cast<std::size_t>(id - 1)] = lab;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (out.values[i] < 0) throw InputError(path.string() + ": no label for node " + std::to_string(i + 1));
    return out;
}

// --- loss trajectories -----------------------------------------------------

inline std::string encode_trajectory_csv(const Matrix& losses) {
    std::string out = "node_id";
    for (std::size_t e = 0; e < losses.cols(); ++e) out += ",epoch_" + std::to_string(e);
    out += '\n';
    for (std::size_t r = 0; r < losses.rows(); ++r) {
        out += std::to_string(r + 1);
        for (double x : losses.row(r)) {
            out += ',';
            out += format_double(x);
        }
        out += '\n';
    }
    return out;
}

inline Matrix read_trajectory_csv(const fs::path& path) { return decode_matrix_csv(read_lines(path), path); }

}  // namespace noiseforge::io
