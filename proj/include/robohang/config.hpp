#pragma once

#include "robohang/collect.hpp"

namespace robohang {

// Minimal TOML subset: [table] / [table.sub] headers, dotted keys,
// strings, integers, floats, booleans, and # comments.  Returns the nested
// key tree as JSON; malformed input throws std::runtime_error with the line.
json parseToml(const std::string& text);
json parseTomlFile(const std::string& path);

// Applies one "a.b.c=value" override on top of a parsed config tree.
// Values parse with the same literal rules as the file format.
void applyOverride(json& config, const std::string& assignment);

// Fully-resolved run settings: file config with flag overrides merged in.
struct RunConfig {
    uint64_t seed = 1;
    int workers = 1;
    std::string storePath = "data";
    std::string modelDir = "models";
    CollectConfig collect;
    TrainConfig train;
    json echo;  // the merged tree, recorded verbatim in manifests and logs

    void validate() const;
};

// Builds a RunConfig from a config tree; unknown keys throw
// std::invalid_argument so typos never silently fall back to defaults.
RunConfig resolveRunConfig(const json& fileConfig,
                           const std::vector<std::string>& overrides = {});

// Worker count after the ROBOHANGSIM_THREADS environment cap.
int capWorkers(int requested);

}  // namespace robohang
