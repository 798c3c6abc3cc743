#pragma once

/**
 * Run manifest embedded in every output file. Only reproducibility-relevant
 * fields (command, config, seed, inputs/outputs, version) go into the files
 * themselves so a rerun with the same inputs is byte-identical; the wall
 * clock goes to the log stream instead.
 */

#include <chrono>
#include <cstdint>
#include <ctime>
#include <ostream>
#include <string>
#include <vector>

#include "cavtomo/version.hpp"

namespace cavtomo {

struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string version = kVersion;

    // Comment lines recorded at the top of every output file. The output
    // path itself is left out: a file already knows its own name, and
    // keeping it in would break byte-identical reruns to another location.
    std::vector<std::string> comment_lines() const {
        std::vector<std::string> lines;
        lines.push_back("cavtomo " + version);
        lines.push_back("command: " + command);
        if (!config_path.empty()) lines.push_back("config: " + config_path);
        if (has_seed) lines.push_back("seed: " + std::to_string(seed));
        for (const auto& in : inputs) lines.push_back("input: " + in);
        return lines;
    }

    // Full manifest, wall clock included, for the log stream.
    void log(std::ostream& os) const {
        const auto now = std::chrono::system_clock::now();
        const std::time_t t = std::chrono::system_clock::to_time_t(now);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        os << "# run manifest: " << stamp;
        for (const auto& line : comment_lines()) os << " | " << line;
        for (const auto& out : outputs) os << " | output: " << out;
        os << "\n";
    }
};

} // namespace cavtomo
