#pragma once

#include "robohang/env.hpp"
#include "robohang/valuemap.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace robohang {

using json = nlohmann::json;

// Append-only on-disk dataset rooted at one directory:
//   manifest.json, samples/phase{1,2}/NNNNNNN.rhds, episodes/*.jsonl,
//   frames/<episode>/frame_%05d.obj
// Single writer; readers see only samples already published in the manifest.
struct DataStore {
    std::string root;
};

// Opens (creating directories and an empty manifest as needed).
DataStore openStore(const std::string& root);

json readManifest(const DataStore& store);
long sampleCount(const DataStore& store, int phase);

// Appends a provenance note (generator policy, round, seed range) to the manifest.
void noteProvenance(DataStore& store, const json& note);

// Writes the sample blob, then publishes it in the manifest.  Returns the
// per-phase index.
long writeSample(DataStore& store, const Sample& sample);

// Reads one published sample; throws on corrupt magic/version or truncation.
Sample readSample(const DataStore& store, int phase, long index);

std::vector<Sample> readAllSamples(const DataStore& store, int phase);

// Order-independent digest input: bit pattern hash of the cloth positions.
uint64_t clothDigest(const std::vector<Vec3>& x);

// EpisodeConfig <-> JSON echo (everything needed to re-run the episode).
json episodeConfigToJson(const EpisodeConfig& config);
EpisodeConfig episodeConfigFromJson(const json& j);

// One-line JSON episode record: config echo, params, outcomes, diagnostics,
// and the final cloth digest.
json episodeRecord(const Episode& ep);

// Throws std::runtime_error when a record is missing required fields.
void validateEpisodeRecord(const json& record);

// Writes the record as episodes/<name>.jsonl and returns the path.
std::string writeEpisodeLog(DataStore& store, const Episode& ep, const std::string& name);

json loadEpisodeRecord(const std::string& path);

// Re-runs the episode described by a record and returns it; the cloth digest
// of the replay must equal the recorded one on any machine.
Episode replayEpisode(const json& record);

}  // namespace robohang
