// SPDX-License-Identifier: Apache-2.0
#pragma once
// Dataset manifests and on-disk ingestion.
//
// manifest.json:
//   {
//     "name": "cora_ml",
//     "edges": "edges.tsv",            // src<TAB>dst, 1-based
//     "labels": "labels.csv",          // node_id,label (1-based)
//     "features": "features.csv",      // optional, one row of reals per node
//     "edge_features": "efeat.csv",    // optional, one row per edge line
//     "texts": "texts.jsonl",          // optional, {"id","title","description"}
//     "directed": false,
//     "num_classes": 7,
//     "class_names": ["..."],          // optional, required for LLM annotation
//     "split": {"ratios": [0.8, 0.1, 0.1], "seed": 0}
//         or   {"train": "train.txt", "val": "val.txt", "test": "test.txt"}
//   }
// Relative paths resolve against the manifest's directory.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noiseforge/graph.hpp"
#include "noiseforge/io.hpp"

namespace noiseforge {

namespace fs = std::filesystem;

struct DatasetManifest {
    std::string name;
    fs::path edges;
    fs::path labels;
    std::optional<fs::path> features;
    std::optional<fs::path> edge_features;
    std::optional<fs::path> texts;
    bool directed = false;
    int num_classes = 0;
    std::vector<std::string> class_names;
    std::optional<SplitRatios> split_ratios;
    std::uint64_t split_seed = 0;
    std::optional<fs::path> split_train, split_val, split_test;
};

inline void validate(const DatasetManifest& m) {
    if (m.num_classes < 1) throw InputError("manifest: num_classes must be >= 1");
    if (!m.class_names.empty() && m.class_names.size() != static_cast<std::size_t>(m.num_classes))
        throw InputError("manifest: class_names must have num_classes entries");
    if (m.split_ratios) detail::check_ratios(*m.split_ratios);
    const auto must_exist = [](const fs::path& p) {
        if (!fs::exists(p)) throw InputError("missing file: " + p.string());
    };
    must_exist(m.edges);
    must_exist(m.labels);
    for (const auto* p : {&m.features, &m.edge_features, &m.texts, &m.split_train, &m.split_val, &m.split_test})
        if (*p) must_exist(**p);
}

inline DatasetManifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir) {
    const auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    DatasetManifest m;
    try {
        m.name = j.value("name", std::string{});
        m.edges = resolve(j.at("edges").get<std::string>());
        m.labels = resolve(j.at("labels").get<std::string>());
        if (j.contains("features")) m.features = resolve(j["features"].get<std::string>());
        if (j.contains("edge_features")) m.edge_features = resolve(j["edge_features"].get<std::string>());
        if (j.contains("texts")) m.texts = resolve(j["texts"].get<std::string>());
        m.directed = j.value("directed", false);
        m.num_classes = j.at("num_classes").get<int>();
        m.class_names = j.value("class_names", std::vector<std::string>{});
        if (j.contains("split")) {
            const auto& s = j["split"];
            if (s.contains("ratios")) {
                const auto r = s["ratios"].get<std::vector<double>>();
                if (r.size() != 3) throw InputError("manifest: split.ratios needs three values");
                m.split_ratios = SplitRatios{r[0], r[1], r[2]};
            }
            m.split_seed = s.value("seed", std::uint64_t{0});
            if (s.contains("train")) m.split_train = resolve(s["train"].get<std::string>());
            if (s.contains("val")) m.split_val = resolve(s["val"].get<std::string>());
            if (s.contains("test")) m.split_test = resolve(s["test"].get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("manifest: ") + e.what());
    }
    validate(m);
    return m;
}

inline DatasetManifest load_manifest(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_manifest(j, path.parent_path());
}

namespace detail {

inline Matrix read_feature_rows(const fs::path& path) {
    const auto lines = io::read_lines(path);
    std::vector<std::vector<double>> rows;
    std::size_t cols = 0;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = trim(lines[ln]);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (rows.empty() && !io::parse_double(fields.front())) continue;  // header
        std::vector<double> vals;
        vals.reserve(fields.size());
        for (auto f : fields) {
            const auto v = io::parse_double(f);
            if (!v) throw InputError(io::where(path, ln + 1) + ": malformed number '" + std::string(f) + "'");
            vals.push_back(*v);
        }
        if (rows.empty()) cols = vals.size();
        if (vals.size() != cols)
            throw InputError(io::where(path, ln + 1) + ": expected " + std::to_string(cols) + " columns");
        rows.push_back(std::move(vals));
    }
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    return m;
}

inline std::vector<std::size_t> read_index_file(const fs::path& path, std::size_t n) {
    std::vector<std::size_t> out;
    const auto lines = io::read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = trim(lines[ln]);
        if (line.empty() || line.front() == '#') continue;
        const auto id = io::parse_int(line);
        if (!id || *id < 1 || static_cast<std::size_t>(*id) > n)
            throw InputError(io::where(path, ln + 1) + ": node id out of range");
        out.push_back(static_cast<std::size_t>(*id - 1));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

inline Graph load_dataset(const DatasetManifest& m) {
    validate(m);
    GraphData d;
    d.name = m.name;
    d.directed = m.directed;
    d.num_classes = m.num_classes;
    d.class_names = m.class_names;

    const auto labels = io::read_labels(m.labels, 0, m.num_classes);
    d.labels = labels.values;
    d.num_nodes = d.labels.size();

    const auto lines = io::read_lines(m.edges);
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    std::size_t edge_lines = 0;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = trim(lines[ln]);
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string_view> fields;
        for (auto f : split(line, line.find('\t') != std::string_view::npos ? '\t' : ' '))
            if (!trim(f).empty()) fields.push_back(f);
        if (fields.size() < 2) throw InputError(io::where(m.edges, ln + 1) + ": malformed row, expected 'src dst'");
        const auto s = io::parse_int(fields[0]);
        const auto t = io::parse_int(fields[1]);
        if (!s || !t) throw InputError(io::where(m.edges, ln + 1) + ": malformed row, expected integer ids");
        if (*s < 1 || *t < 1 || static_cast<std::size_t>(*s) > d.num_nodes || static_cast<std::size_t>(*t) > d.num_nodes)
            throw InputError(io::where(m.edges, ln + 1) + ": node id out of range 1.." + std::to_string(d.num_nodes));
        const auto a = static_cast<std::uint32_t>(*s - 1);
        const auto b = static_cast<std::uint32_t>(*t - 1);
        ++edge_lines;
        if (m.directed && !seen.insert({a, b}).second)
            throw InputError(io::where(m.edges, ln + 1) + ": duplicate edge (" + std::to_string(*s) + ", " +
                             std::to_string(*t) + ") in directed graph");
        d.edges.emplace_back(a, b);
    }

    if (m.features) {
        d.node_features = detail::read_feature_rows(*m.features);
        if (d.node_features.rows() != d.num_nodes)
            throw InputError(m.features->string() + ": " + std::to_string(d.node_features.rows()) +
                             " feature rows, expected " + std::to_string(d.num_nodes));
    }
    if (m.edge_features) {
        d.edge_features = detail::read_feature_rows(*m.edge_features);
        if (d.edge_features.rows() != edge_lines)
            throw InputError(m.edge_features->string() + ": expected one row per edge line");
    }
    if (m.texts) {
        d.texts.assign(d.num_nodes, NodeText{});
        const auto tl = io::read_lines(*m.texts);
        for (std::size_t ln = 0; ln < tl.size(); ++ln) {
            if (trim(tl[ln]).empty()) continue;
            try {
                const auto j = nlohmann::json::parse(tl[ln]);
                const auto id = j.at("id").get<long long>();
                if (id < 1 || static_cast<std::size_t>(id) > d.num_nodes)
                    throw InputError(io::where(*m.texts, ln + 1) + ": node id out of range");
                auto& t = d.texts[static_cast<std::size_t>(id - 1)];
                t.title = j.value("title", std::string{});
                t.description = j.value("description", std::string{});
            } catch (const nlohmann::json::exception& e) {
                throw InputError(io::where(*m.texts, ln + 1) + ": malformed JSON line: " + e.what());
            }
        }
    }
    return Graph(std::move(d));
}

inline Graph load_dataset(const fs::path& manifest_path) { return load_dataset(load_manifest(manifest_path)); }

/// Split requested by the manifest; defaults to seeded 8:1:1.
inline NodeSplit load_split(const DatasetManifest& m, std::size_t n) {
    if (m.split_train && m.split_val && m.split_test) {
        NodeSplit s{detail::read_index_file(*m.split_train, n), detail::read_index_file(*m.split_val, n),
                    detail::read_index_file(*m.split_test, n)};
        return s;
    }
    return split_nodes(n, m.split_ratios.value_or(SplitRatios{}), m.split_seed);
}

/// Writes the graph as a dataset directory with a manifest.json.
inline fs::path save_dataset(const Graph& g, const fs::path& dir) {
    fs::create_directories(dir);
    std::string edges;
    for (auto [s, t] : g.edge_list()) edges += std::to_string(s + 1) + "\t" + std::to_string(t + 1) + "\n";
    io::write_file(dir / "edges.tsv", edges);
    io::write_labels(dir / "labels.csv", g.label_set(), false);

    nlohmann::ordered_json j;
    j["name"] = g.name();
    j["edges"] = "edges.tsv";
    j["labels"] = "labels.csv";
    if (g.has_features()) {
        std::string feats;
        const auto& x = g.features();
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < x.cols(); ++c) {
                if (c) feats += ',';
                feats += format_double(x(r, c));
            }
            feats += '\n';
        }
        io::write_file(dir / "features.csv", feats);
        j["features"] = "features.csv";
    }
    if (g.has_texts()) {
        std::string texts;
        for (std::size_t i = 0; i < g.num_nodes(); ++i) {
            nlohmann::ordered_json t;
            t["id"] = i + 1;
            t["title"] = g.texts()[i].title;
            t["description"] = g.texts()[i].description;
            texts += t.dump() + "\n";
        }
        io::write_file(dir / "texts.jsonl", texts);
        j["texts"] = "texts.jsonl";
    }
    j["directed"] = g.directed();
    j["num_classes"] = g.num_classes();
    if (!g.class_names().empty()) j["class_names"] = g.class_names();
    const auto path = dir / "manifest.json";
    io::write_file(path, j.dump(2) + "\n");
    return path;
}

}  // namespace noiseforge
