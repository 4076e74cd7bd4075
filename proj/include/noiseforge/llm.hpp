// SPDX-License-Identifier: Apache-2.0
#pragma once
// LLM annotation: prompt construction, response parsing, an
// OpenAI-compatible chat-completions client with retry/backoff and a
// content-addressed disk cache, and the naive/reasoned/refined label rule.

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "noiseforge/core.hpp"
#include "noiseforge/graph.hpp"
#include "noiseforge/io.hpp"

namespace noiseforge::llm {

namespace fs = std::filesystem;

struct LLMConfig {
    std::string endpoint = "https://api.openai.com/v1";
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    int max_retries = 3;
    int backoff_base_ms = 500;
    int backoff_cap_ms = 8000;
    fs::path cache_dir;  // empty disables the cache
    int timeout_s = 60;
    int max_in_flight = 4;
};

inline void validate(const LLMConfig& cfg) {
    if (cfg.max_retries < 0) throw InputError("llm: max_retries must be >= 0");
    if (cfg.temperature < 0) throw InputError("llm: temperature must be >= 0");
    if (cfg.max_in_flight < 1) throw InputError("llm: max_in_flight must be >= 1");
}

enum class Mode { naive, reasoned };

inline std::string to_string(Mode m) { return m == Mode::naive ? "naive" : "reasoned"; }

/// Dataset-specific wording of the annotation prompt. Defaults describe a
/// citation graph of machine-learning papers.
struct PromptTemplate {
    std::string domain = "Machine Learning";
    std::string label_noun = "topic";
    std::string item_noun = "research paper";
};

struct Prompt {
    std::string system;
    std::string user;

    std::string canonical() const { return system + '\x1f' + user; }
};

inline constexpr std::string_view kNaiveInstruction =
    "Answer with the label only, written exactly as it appears in the list.";
inline constexpr std::string_view kReasonedInstruction =
    "Answer with the label on the first line, written exactly as it appears in the list, "
    "followed by a one-sentence justification on the next line.";

inline Prompt build_prompt(const NodeText& text, const std::vector<std::string>& class_names,
                           const PromptTemplate& tpl, Mode mode, std::size_t node = 0) {
    if (class_names.empty()) throw InputError("llm prompt: class_names are required");
    if (trim(text.title).empty() && trim(text.description).empty())
        throw InputError("llm prompt: node " + std::to_string(node + 1) + " has no text attributes");
    std::string labels;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        if (c) labels += ", ";
        labels += class_names[c];
    }
    Prompt p;
    p.system = "You are a domain expert in " + tpl.domain + ". Your task is to predict the most appropriate " +
               tpl.label_noun + " label for a " + tpl.item_noun + ". You must choose from the following " +
               tpl.label_noun + " labels only: " + labels + ".\n" +
               std::string(mode == Mode::naive ? kNaiveInstruction : kReasonedInstruction);
    p.user = "Title: " + text.title + "\nDescription: " + text.description;
    return p;
}

// --- parsing ---------------------------------------------------------------

enum class ParseStatus { exact, normalized, unparsed };

inline std::string to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::exact: return "exact";
        case ParseStatus::normalized: return "normalized";
        case ParseStatus::unparsed: return "unparsed";
    }
    return "unparsed";
}

struct ParsedLabel {
    std::optional<int> label;  // 0-based class id
    ParseStatus status = ParseStatus::unparsed;
};

/// Lowercase, non-alphanumerics to single spaces, trimmed.
inline std::string normalize_text(std::string_view s) {
    std::string out;
    bool space = false;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            if (space && !out.empty()) out += ' ';
            space = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            space = true;
        }
    }
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
    return true;
}

/// Matches the first non-empty line of a response against the class names:
/// case-insensitive equality first, then equality or whole-word containment
/// after normalization. A contained name nested in a longer contained name
/// yields to it; two unrelated contained names leave the reply unparsed.
inline ParsedLabel parse_label(std::string_view raw, const std::vector<std::string>& class_names) {
    std::string_view first;
    for (auto line : split(raw, '\n'))
        if (!trim(line).empty()) {
            first = trim(line);
            break;
        }
    if (first.empty()) return {};
    for (std::size_t c = 0; c < class_names.size(); ++c)
        if (iequals(first, trim(class_names[c]))) return {static_cast<int>(c), ParseStatus::exact};

    const std::string line = normalize_text(first);
    if (line.empty()) return {};
    const std::string padded = " " + line + " ";
    std::vector<std::pair<int, std::string>> hits;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        const std::string name = normalize_text(class_names[c]);
        if (name.empty()) continue;
        if (name == line) return {static_cast<int>(c), ParseStatus::normalized};
        if (padded.find(" " + name + " ") != std::string::npos) hits.emplace_back(static_cast<int>(c), name);
    }
    // names nested inside another hit ("learning" in "deep learning") drop out
    std::optional<int> best;
    for (const auto& [c, name] : hits) {
        bool nested = false;
        for (const auto& [o, other] : hits)
            if (o != c && other.size() > name.size() && (" " + other + " ").find(" " + name + " ") != std::string::npos)
                nested = true;
        if (nested) continue;
        if (best) return {};  // two unrelated names: ambiguous
        best = c;
    }
    if (best) return {best, ParseStatus::normalized};
    return {};
}

// --- transport -------------------------------------------------------------

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ChatReply {
    std::string content;
};

/// Chat-completions client. POSTs {model, messages, temperature} to
/// <endpoint>/chat/completions and returns choices[0].message.content.
class ChatClient {
public:
    explicit ChatClient(LLMConfig cfg) : cfg_(std::move(cfg)) {
        validate(cfg_);
        const auto scheme_end = cfg_.endpoint.find("://");
        if (scheme_end == std::string::npos) throw InputError("llm endpoint must include a scheme: " + cfg_.endpoint);
        const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
        origin_ = cfg_.endpoint.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : cfg_.endpoint.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
    }

    const LLMConfig& config() const noexcept { return cfg_; }
    std::size_t requests() const noexcept { return requests_.load(); }

    /// Sends one chat request, retrying transport errors, 429 and 5xx with
    /// capped exponential backoff. 401/403 throw AuthError; other failures
    /// throw ServiceError once retries are exhausted.
    ChatReply complete(const Prompt& prompt) {
        nlohmann::ordered_json body;
        body["model"] = cfg_.model;
        body["messages"] = nlohmann::ordered_json::array(
            {{{"role", "system"}, {"content", prompt.system}}, {{"role", "user"}, {"content", prompt.user}}});
        body["temperature"] = cfg_.temperature;
        const std::string payload = body.dump();

        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                const long long delay = std::min<long long>(cfg_.backoff_cap_ms, static_cast<long long>(cfg_.backoff_base_ms) << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            httplib::Client client(origin_);
            client.set_connection_timeout(cfg_.timeout_s, 0);
            client.set_read_timeout(cfg_.timeout_s, 0);
            client.set_write_timeout(cfg_.timeout_s, 0);
            ++requests_;
            auto res = client.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 401 || res->status == 403)
                throw AuthError("llm endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) throw ServiceError("llm endpoint returned HTTP " + std::to_string(res->status));
            try {
                const auto j = nlohmann::json::parse(res->body);
                return {j.at("choices").at(0).at("message").at("content").get<std::string>()};
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("malformed response: ") + e.what();
            }
        }
        throw ServiceError("llm request failed after " + std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error);
    }

private:
    LLMConfig cfg_;
    std::string origin_;
    std::string prefix_;
    std::string api_key_;
    std::atomic<std::size_t> requests_{0};
};

// --- cache -----------------------------------------------------------------

struct CacheEntry {
    std::string raw;
    std::string timestamp;
};

/// Append-only JSON-lines cache keyed by hash(model, prompt, ask index).
class AnnotationCache {
public:
    AnnotationCache() = default;
    explicit AnnotationCache(const fs::path& dir) : path_(dir / "llm_cache.jsonl") {
        fs::create_directories(dir);
        if (!fs::exists(path_)) return;
        for (const auto& line : io::read_lines(path_)) {
            if (trim(line).empty()) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                entries_[j.at("key").get<std::string>()] = {j.at("raw").get<std::string>(), j.value("timestamp", std::string{})};
            } catch (const nlohmann::json::exception&) {
                // a torn trailing line from an interrupted run is ignored
            }
        }
    }

    static std::string key(std::string_view model, const Prompt& p, int ask) {
        std::uint64_t h = fnv1a64(model);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(p.canonical(), h);
        h = fnv1a64("\x1f" + std::to_string(ask), h);
        return hex64(h);
    }

    std::optional<CacheEntry> find(const std::string& k) const {
        std::lock_guard lock(mu_);
        if (auto it = entries_.find(k); it != entries_.end()) return it->second;
        return std::nullopt;
    }

    void store(const std::string& k, const CacheEntry& e) {
        std::lock_guard lock(mu_);
        entries_[k] = e;
        if (path_.empty()) return;
        nlohmann::ordered_json j;
        j["key"] = k;
        j["raw"] = e.raw;
        j["timestamp"] = e.timestamp;
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        out << j.dump() << '\n';
    }

private:
    fs::path path_;
    mutable std::mutex mu_;
    std::map<std::string, CacheEntry> entries_;
};

// --- annotation ------------------------------------------------------------

struct AnnotationRecord {
    std::size_t node = 0;  // 0-based
    Mode mode = Mode::naive;
    std::string prompt_hash;
    std::string raw;
    std::optional<int> label;
    ParseStatus status = ParseStatus::unparsed;
    bool failed = false;  // request failed after retries
    std::string error;
    std::string timestamp;
    int asks = 0;
};

struct AnnotationStats {
    std::size_t cache_hits = 0;
    std::size_t network_calls = 0;
    std::size_t unparsed = 0;
    std::size_t failed = 0;
};

struct AnnotationRun {
    std::vector<AnnotationRecord> records;
    AnnotationStats stats;
};

/// Annotates `nodes` (all nodes when empty). Each node is asked once and
/// re-asked once if the reply does not parse; replies are cached per ask.
/// Authentication failures abort the run; other per-node failures are
/// recorded and the run continues.
inline AnnotationRun annotate(const Graph& g, ChatClient& client, AnnotationCache& cache, const PromptTemplate& tpl,
                              Mode mode, std::vector<std::size_t> nodes = {}) {
    if (!g.has_texts()) throw InputError("llm annotation requires node text attributes");
    if (g.class_names().empty()) throw InputError("llm annotation requires class_names in the manifest");
    if (nodes.empty()) {
        nodes.resize(g.num_nodes());
        for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = i;
    }
    std::vector<Prompt> prompts;
    prompts.reserve(nodes.size());
    for (auto v : nodes) prompts.push_back(build_prompt(g.texts()[v], g.class_names(), tpl, mode, v));

    AnnotationRun run;
    run.records.resize(nodes.size());
    std::atomic<std::size_t> next{0}, hits{0}, calls{0};
    std::atomic<bool> abort{false};
    std::exception_ptr auth_error;
    std::mutex err_mu;
    const auto& model = client.config().model;

    const auto worker = [&] {
        for (;;) {
            const std::size_t k = next++;
            if (k >= nodes.size() || abort) return;
            AnnotationRecord rec;
            rec.node = nodes[k];
            rec.mode = mode;
            rec.prompt_hash = AnnotationCache::key(model, prompts[k], 0);
            for (int ask = 0; ask < 2; ++ask) {
                const auto key = AnnotationCache::key(model, prompts[k], ask);
                CacheEntry entry;
                if (auto hit = cache.find(key)) {
                    entry = *hit;
                    ++hits;
                } else {
                    try {
                        ++calls;
                        entry = {client.complete(prompts[k]).content, utc_timestamp()};
                    } catch (const AuthError&) {
                        std::lock_guard lock(err_mu);
                        if (!auth_error) auth_error = std::current_exception();
                        abort = true;
                        return;
                    } catch (const Error& e) {
                        rec.failed = true;
                        rec.error = e.what();
                        rec.timestamp = utc_timestamp();
                        break;
                    }
                    cache.store(key, entry);
                }
                rec.asks = ask + 1;
                rec.raw = entry.raw;
                rec.timestamp = entry.timestamp;
                const auto parsed = parse_label(entry.raw, g.class_names());
                rec.label = parsed.label;
                rec.status = parsed.status;
                if (parsed.label) break;
            }
            run.records[k] = std::move(rec);
        }
    };
    const auto threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(client.config().max_in_flight), nodes.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (auth_error) std::rethrow_exception(auth_error);

    run.stats.cache_hits = hits;
    run.stats.network_calls = calls;
    for (const auto& r : run.records) {
        run.stats.unparsed += !r.label.has_value();
        run.stats.failed += r.failed;
    }
    return run;
}

inline nlohmann::ordered_json to_json(const AnnotationRecord& r) {
    nlohmann::ordered_json j;
    j["node_id"] = r.node + 1;
    j["mode"] = to_string(r.mode);
    j["prompt_hash"] = r.prompt_hash;
    j["raw"] = r.raw;
    j["label"] = r.label ? nlohmann::ordered_json(*r.label + 1) : nlohmann::ordered_json(nullptr);
    j["status"] = to_string(r.status);
    j["failed"] = r.failed;
    if (!r.error.empty()) j["error"] = r.error;
    j["timestamp"] = r.timestamp;
    j["asks"] = r.asks;
    return j;
}

/// Label set from annotation records; nodes without a parsed label keep
/// their true label. Returns the substitution count through `substituted`.
inline LabelSet labels_from_records(const std::vector<AnnotationRecord>& records, const LabelSet& truth,
                                    LabelProvenance provenance, std::size_t* substituted = nullptr) {
    LabelSet out{truth.values, provenance};
    std::size_t subs = 0;
    std::vector<char> covered(truth.size(), 0);
    for (const auto& r : records) {
        covered[r.node] = 1;
        if (r.label)
            out.values[r.node] = *r.label;
        else
            ++subs;
    }
    if (substituted) *substituted = subs;
    return out;
}

/// refined_i = reasoned_i where both naive_i and reasoned_i differ from
/// truth_i, otherwise truth_i.
inline LabelSet refine(const LabelSet& naive, const LabelSet& reasoned, const LabelSet& truth) {
    if (naive.size() != truth.size() || reasoned.size() != truth.size())
        throw InputError("refine: label sets differ in length");
    LabelSet out{truth.values, LabelProvenance::llm_refined};
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (naive[i] != truth[i] && reasoned[i] != truth[i]) out.values[i] = reasoned[i];
    return out;
}

inline double noise_rate(const LabelSet& labels, const LabelSet& truth) {
    if (labels.size() != truth.size()) throw InputError("noise_rate: label sets differ in length");
    if (truth.size() == 0) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) diff += labels[i] != truth[i];
    return static_cast<double>(diff) / static_cast<double>(truth.size());
}

struct NoiseRateReport {
    double naive = 0.0;
    double reasoned = 0.0;
    double refined = 0.0;
    bool refined_within_reasoned = true;
};

inline NoiseRateReport noise_rate_report(const LabelSet& naive, const LabelSet& reasoned, const LabelSet& refined,
                                         const LabelSet& truth) {
    NoiseRateReport r{noise_rate(naive, truth), noise_rate(reasoned, truth), noise_rate(refined, truth), true};
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (refined[i] != truth[i] && refined[i] != reasoned[i]) r.refined_within_reasoned = false;
    r.refined_within_reasoned = r.refined_within_reasoned && r.refined <= r.reasoned;
    return r;
}

}  // namespace noiseforge::llm
