#include "robohang/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace robohang {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Strips a trailing # comment outside of string literals.
std::string stripComment(const std::string& line) {
    bool inString = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') inString = !inString;
        if (line[i] == '#' && !inString) return line.substr(0, i);
    }
    return line;
}

std::vector<std::string> splitDotted(const std::string& key, int lineNo) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = trim(part);
        if (part.empty())
            throw std::runtime_error("config line " + std::to_string(lineNo) + ": empty key part");
        parts.push_back(part);
    }
    if (parts.empty())
        throw std::runtime_error("config line " + std::to_string(lineNo) + ": empty key");
    return parts;
}

json parseValue(const std::string& raw, int lineNo) {
    std::string v = trim(raw);
    if (v.empty())
        throw std::runtime_error("config line " + std::to_string(lineNo) + ": missing value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw std::runtime_error("config line " + std::to_string(lineNo) +
                                     ": unterminated string");
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        size_t used = 0;
        if (v.find_first_of(".eE") == std::string::npos) {
            long long i = std::stoll(v, &used);
            if (used == v.size()) return i;
        } else {
            double d = std::stod(v, &used);
            if (used == v.size()) return d;
        }
    } catch (const std::exception&) {
    }
    throw std::runtime_error("config line " + std::to_string(lineNo) + ": bad value '" + v + "'");
}

void setPath(json& root, const std::vector<std::string>& parts, const json& value, int lineNo) {
    json* node = &root;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        json& next = (*node)[parts[i]];
        if (!next.is_null() && !next.is_object())
            throw std::runtime_error("config line " + std::to_string(lineNo) + ": key '" +
                                     parts[i] + "' is both a value and a table");
        node = &next;
    }
    (*node)[parts.back()] = value;
}

// Reads one config subtree into typed fields, rejecting unknown keys.
class Reader {
public:
    Reader(const json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {
        if (!node_.is_object())
            throw std::invalid_argument("config section '" + prefix_ + "' must be a table");
        for (auto it = node_.begin(); it != node_.end(); ++it) unused_.insert(it.key());
    }

    template <typename T>
    void get(const char* key, T& out) {
        auto it = node_.find(key);
        if (it == node_.end()) return;
        unused_.erase(key);
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw std::invalid_argument("config key '" + prefix_ + key + "' has the wrong type");
        }
    }

    const json* sub(const char* key) {
        auto it = node_.find(key);
        if (it == node_.end()) return nullptr;
        unused_.erase(key);
        return &*it;
    }

    void finish() const {
        if (!unused_.empty())
            throw std::invalid_argument("unknown config key '" + prefix_ + *unused_.begin() + "'");
    }

private:
    const json& node_;
    std::string prefix_;
    std::set<std::string> unused_;
};

PolicyKind policyFromString(const std::string& s) {
    if (s == "heuristic") return PolicyKind::Heuristic;
    if (s == "fixed") return PolicyKind::Fixed;
    if (s == "valuemap") return PolicyKind::ValueMap;
    throw std::invalid_argument("unknown policy '" + s + "'");
}

}  // namespace

json parseToml(const std::string& text) {
    json root = json::object();
    std::vector<std::string> table;
    std::stringstream ss(text);
    std::string line;
    int lineNo = 0;
    while (std::getline(ss, line)) {
        ++lineNo;
        line = trim(stripComment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineNo) +
                                         ": unterminated table header");
            table = splitDotted(line.substr(1, line.size() - 2), lineNo);
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineNo) + ": expected '='");
        std::vector<std::string> parts = table;
        for (const std::string& p : splitDotted(line.substr(0, eq), lineNo)) parts.push_back(p);
        setPath(root, parts, parseValue(line.substr(eq + 1), lineNo), lineNo);
    }
    return root;
}

json parseTomlFile(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parseToml(ss.str());
}

void applyOverride(json& config, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("override '" + assignment + "' must look like key=value");
    setPath(config, splitDotted(assignment.substr(0, eq), 0),
            parseValue(assignment.substr(eq + 1), 0), 0);
}

void RunConfig::validate() const {
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    collect.base.validate();
    train.validate();
}

RunConfig resolveRunConfig(const json& fileConfig, const std::vector<std::string>& overrides) {
    json merged = fileConfig.is_null() ? json::object() : fileConfig;
    for (const std::string& o : overrides) applyOverride(merged, o);

    RunConfig rc;
    Reader top(merged, "");
    top.get("seed", rc.seed);
    top.get("workers", rc.workers);
    top.get("store", rc.storePath);
    top.get("models", rc.modelDir);

    if (const json* n = top.sub("episode")) {
        Reader r(*n, "episode.");
        r.get("meshResolution", rc.collect.base.garment.meshResolution);
        r.get("dt", rc.collect.base.dt);
        r.get("controlTick", rc.collect.base.controlTick);
        r.get("settleTime", rc.collect.base.settleTime);
        r.get("gripperSpeed", rc.collect.base.gripperSpeed);
        r.get("poseNoiseTranslation", rc.collect.base.poseNoiseTranslation);
        r.get("poseNoiseYawDeg", rc.collect.base.poseNoiseYawDeg);
        r.get("logTickPoses", rc.collect.base.logTickPoses);
        int image = rc.collect.base.camera.width;
        r.get("imageSize", image);
        if (image != rc.collect.base.camera.width) {
            double scale = double(image) / double(rc.collect.base.camera.width);
            rc.collect.base.camera.width = rc.collect.base.camera.height = image;
            rc.collect.base.camera.cx = rc.collect.base.camera.cy = image / 2.0;
            rc.collect.base.camera.fx *= scale;
            rc.collect.base.camera.fy *= scale;
        }
        r.finish();
    }
    if (const json* n = top.sub("materials")) {
        Reader r(*n, "materials.");
        MaterialRanges& m = rc.collect.base.materials;
        r.get("youngLo", m.youngLo);
        r.get("youngHi", m.youngHi);
        r.get("densityLo", m.densityLo);
        r.get("densityHi", m.densityHi);
        r.get("muLo", m.muLo);
        r.get("muHi", m.muHi);
        r.finish();
    }
    if (const json* n = top.sub("geometry")) {
        Reader r(*n, "geometry.");
        PrimitiveGeometry& g = rc.collect.base.geometry;
        r.get("hoverHeight", g.hoverHeight);
        r.get("pressHeight", g.pressHeight);
        r.get("liftHeight", g.liftHeight);
        r.get("insertionDistance", g.insertionDistance);
        r.get("dragDistance", g.dragDistance);
        r.get("dragAngleDeg", g.dragAngleDeg);
        r.get("dragHeight", g.dragHeight);
        r.get("pullBackDistance", g.pullBackDistance);
        r.get("rotateDuration", g.rotateDuration);
        r.get("tiltDeg", g.tiltDeg);
        r.finish();
    }
    if (const json* n = top.sub("collect")) {
        Reader r(*n, "collect.");
        std::string policy = "heuristic";
        r.get("policy", policy);
        rc.collect.policy = policyFromString(policy);
        auto seedBase = static_cast<long long>(rc.collect.seedBase);
        r.get("seedBase", seedBase);
        rc.collect.seedBase = uint64_t(seedBase);
        r.get("garmentPool", rc.collect.garmentPool);
        r.get("hangerPool", rc.collect.hangerPool);
        r.get("explore", rc.collect.explore);
        r.get("epsilon", rc.collect.exploration.epsilon);
        r.get("temperature", rc.collect.exploration.temperature);
        r.get("zeroNecklineChannel", rc.collect.zeroNecklineChannel);
        r.get("fixedPressU", rc.collect.fixedPhase1.au);
        r.get("fixedPressV", rc.collect.fixedPhase1.av);
        r.get("fixedLiftU", rc.collect.fixedPhase1.bu);
        r.get("fixedLiftV", rc.collect.fixedPhase1.bv);
        r.get("fixedDragU", rc.collect.fixedPhase2.au);
        r.get("fixedDragV", rc.collect.fixedPhase2.av);
        r.get("fixedRotateU", rc.collect.fixedPhase2.bu);
        r.get("fixedRotateV", rc.collect.fixedPhase2.bv);
        r.finish();
    }
    if (const json* n = top.sub("train")) {
        Reader r(*n, "train.");
        r.get("learningRate", rc.train.learningRate);
        r.get("epochs", rc.train.epochs);
        r.get("batchSize", rc.train.batchSize);
        auto seed = static_cast<long long>(rc.train.seed);
        r.get("seed", seed);
        rc.train.seed = uint64_t(seed);
        std::string mode = "value";
        r.get("mode", mode);
        if (mode == "value")
            rc.train.mode = TrainMode::ValueBce;
        else if (mode == "il")
            rc.train.mode = TrainMode::IlCrossEntropy;
        else
            throw std::invalid_argument("unknown train mode '" + mode + "'");
        r.finish();
    }
    top.finish();

    rc.collect.workers = rc.workers;
    rc.echo = merged;
    rc.validate();
    return rc;
}

int capWorkers(int requested) {
    int capped = std::max(1, requested);
    if (const char* env = std::getenv("ROBOHANGSIM_THREADS")) {
        try {
            int cap = std::stoi(env);
            if (cap >= 1) capped = std::min(capped, cap);
        } catch (const std::exception&) {
            throw std::invalid_argument("ROBOHANGSIM_THREADS must be an integer");
        }
    }
    return capped;
}

}  // namespace robohang
