#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikegram/error.hpp"
#include "spikegram/rng.hpp"

namespace spikegram {

inline constexpr const char* kArtifactVersion = "0.1.0";

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot hash missing file: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Snapshot of one run: the materialized config, the master seed, and a
/// content-hashed inventory of every emitted file. Written atomically at
/// run end. Timestamps live only here, never in data files, so data files
/// from identical (config, seed) runs are byte-identical.
class RunManifest {
  public:
    RunManifest(nlohmann::json config_snapshot, std::uint64_t master_seed,
                std::string started_at)
        : config_(std::move(config_snapshot)), seed_(master_seed),
          started_at_(std::move(started_at)) {}

    void add_output(const std::filesystem::path& path) {
        outputs_.push_back({path.filename().string(), hex64(fnv1a64_file(path))});
    }

    nlohmann::json to_json(const std::string& finished_at) const {
        nlohmann::json outputs = nlohmann::json::array();
        for (const auto& [name, hash] : outputs_)
            outputs.push_back({{"path", name}, {"fnv1a64", hash}});
        return nlohmann::json{{"artifact_version", kArtifactVersion},
                              {"master_seed", seed_},
                              {"started_at", started_at_},
                              {"finished_at", finished_at},
                              {"config", config_},
                              {"outputs", outputs}};
    }

    /// Write-then-rename so a crash never leaves a truncated manifest.
    void write(const std::filesystem::path& dir, const std::string& finished_at) const {
        const auto tmp = dir / "run_manifest.json.tmp";
        const auto final_path = dir / "run_manifest.json";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw ConfigError("cannot write manifest to " + tmp.string());
            out << to_json(finished_at).dump(2) << '\n';
        }
        std::filesystem::rename(tmp, final_path);
    }

    const std::vector<std::pair<std::string, std::string>>& outputs() const { return outputs_; }

  private:
    nlohmann::json config_;
    std::uint64_t seed_;
    std::string started_at_;
    std::vector<std::pair<std::string, std::string>> outputs_;
};

} // namespace spikegram
