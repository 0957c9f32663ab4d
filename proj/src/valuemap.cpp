#include "robohang/valuemap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace robohang {

std::vector<float> stackChannels(const Observation& obs, int phase) {
    size_t np = size_t(obs.width) * size_t(obs.height);
    std::vector<float> out;
    out.reserve(3 * np);
    out.insert(out.end(), obs.depth.begin(), obs.depth.end());
    for (uint8_t m : obs.maskGarment) out.push_back(float(m));
    const auto& third = phase == 1 ? obs.maskNeckline : obs.maskHanger;
    for (uint8_t m : third) out.push_back(float(m));
    return out;
}

std::vector<float> withOneHot(const std::vector<float>& stack, int width, int height, int u, int v) {
    if (u < 0 || u >= width || v < 0 || v >= height)
        throw std::invalid_argument("one-hot pixel out of bounds");
    std::vector<float> out = stack;
    out.resize(stack.size() + size_t(width) * size_t(height), 0.0f);
    out[stack.size() + size_t(v) * size_t(width) + size_t(u)] = 1.0f;
    return out;
}

ScoreMapModel makeScoreMapModel(int channels, int height, int width) {
    if (channels < 1 || height < 1 || width < 1)
        throw std::invalid_argument("invalid score map shape");
    ScoreMapModel m;
    m.channels = channels;
    m.height = height;
    m.width = width;
    m.weights.assign(size_t(m.featureCount()), 0.0);
    return m;
}

namespace {

constexpr int kRadii[4] = {1, 3, 7, 15};

// per-channel summed-area tables, (H+1) x (W+1)
std::vector<double> integralsOf(const std::vector<float>& stack, int channels, int height,
                                int width) {
    size_t plane = size_t(height + 1) * size_t(width + 1);
    std::vector<double> sat(size_t(channels) * plane, 0.0);
    for (int c = 0; c < channels; ++c) {
        const float* src = stack.data() + size_t(c) * size_t(height) * size_t(width);
        double* dst = sat.data() + size_t(c) * plane;
        for (int v = 0; v < height; ++v)
            for (int u = 0; u < width; ++u) {
                size_t i = size_t(v + 1) * size_t(width + 1) + size_t(u + 1);
                dst[i] = double(src[size_t(v) * size_t(width) + size_t(u)]) +
                         dst[i - 1] + dst[i - size_t(width + 1)] -
                         dst[i - size_t(width + 1) - 1];
            }
    }
    return sat;
}

void featuresAt(const std::vector<float>& stack, const std::vector<double>& sat, int channels,
                int height, int width, int u, int v, double* f) {
    size_t plane = size_t(height + 1) * size_t(width + 1);
    int k = 0;
    for (int c = 0; c < channels; ++c) {
        const double* s = sat.data() + size_t(c) * plane;
        f[k++] = double(stack[(size_t(c) * size_t(height) + size_t(v)) * size_t(width) + size_t(u)]);
        for (int r : kRadii) {
            int u0 = std::max(0, u - r), u1 = std::min(width - 1, u + r);
            int v0 = std::max(0, v - r), v1 = std::min(height - 1, v + r);
            double sum = s[size_t(v1 + 1) * size_t(width + 1) + size_t(u1 + 1)] -
                         s[size_t(v0) * size_t(width + 1) + size_t(u1 + 1)] -
                         s[size_t(v1 + 1) * size_t(width + 1) + size_t(u0)] +
                         s[size_t(v0) * size_t(width + 1) + size_t(u0)];
            f[k++] = sum / (double(u1 - u0 + 1) * double(v1 - v0 + 1));
        }
    }
    double nu = width > 1 ? double(u) / double(width - 1) : 0.0;
    double nv = height > 1 ? double(v) / double(height - 1) : 0.0;
    f[k++] = nu;
    f[k++] = nv;
    // quadratic coordinate terms let the scorer carve ellipse-shaped regions,
    // not just half-planes
    f[k++] = nu * nu;
    f[k++] = nv * nv;
    f[k++] = nu * nv;
    f[k++] = 1.0;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double softplus(double z) { return z > 30 ? z : std::log1p(std::exp(z)); }

void checkStack(const ScoreMapModel& m, const std::vector<float>& stack) {
    if (int(stack.size()) != m.channels * m.height * m.width)
        throw std::invalid_argument("input stack does not match the model's channel shape");
}

// cached training row: features at the labeled pixel
struct Row {
    std::vector<double> f;
    double y = 0.0;
};

TrainStats sgd(ScoreMapModel& model, std::vector<Row>& rows, const TrainConfig& cfg) {
    cfg.validate();
    if (rows.empty()) throw std::invalid_argument("empty training set");
    const int nf = model.featureCount();
    std::vector<double> velocity(size_t(nf), 0.0);
    std::vector<size_t> order(rows.size());
    std::iota(order.begin(), order.end(), size_t(0));
    TrainStats stats;
    Rng rng = Rng::stream(cfg.seed, 0xbce);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[size_t(rng.uniformInt(0, int(i) - 1))]);
        double epochLoss = 0.0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batchSize)) {
            size_t end = std::min(order.size(), start + size_t(cfg.batchSize));
            std::vector<double> grad(size_t(nf), 0.0);
            for (size_t i = start; i < end; ++i) {
                const Row& r = rows[order[i]];
                double z = 0.0;
                for (int k = 0; k < nf; ++k) z += model.weights[size_t(k)] * r.f[size_t(k)];
                epochLoss += softplus(z) - r.y * z;
                double err = sigmoid(z) - r.y;
                for (int k = 0; k < nf; ++k) grad[size_t(k)] += err * r.f[size_t(k)];
            }
            for (int k = 0; k < nf; ++k) {
                velocity[size_t(k)] = 0.9 * velocity[size_t(k)] -
                                      cfg.learningRate * grad[size_t(k)] / double(end - start);
                model.weights[size_t(k)] += velocity[size_t(k)];
            }
            stats.steps++;
        }
        epochLoss /= double(rows.size());
        if (epoch == 0) stats.firstEpochLoss = epochLoss;
        stats.finalLoss = epochLoss;
    }
    return stats;
}

Row rowFor(const Sample& s, bool conditioned, double label) {
    std::vector<float> stack = conditioned
                                   ? withOneHot(s.obs, s.width, s.height, s.au, s.av)
                                   : s.obs;
    int channels = s.channels + (conditioned ? 1 : 0);
    auto sat = integralsOf(stack, channels, s.height, s.width);
    Row r;
    r.f.resize(size_t(5 * channels + 6));
    int u = conditioned ? s.bu : s.au;
    int v = conditioned ? s.bv : s.av;
    featuresAt(stack, sat, channels, s.height, s.width, u, v, r.f.data());
    r.y = label;
    return r;
}

void checkSamples(const ScoreMapModel& model, const std::vector<Sample>& samples,
                  bool conditioned) {
    if (samples.empty()) throw std::invalid_argument("empty training set");
    for (const Sample& s : samples) {
        if (s.phase != samples.front().phase)
            throw std::invalid_argument("mixed-phase training set");
        if (s.height != model.height || s.width != model.width ||
            s.channels + (conditioned ? 1 : 0) != model.channels)
            throw std::invalid_argument("sample shape does not match the model");
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learningRate > 0) || epochs < 1 || batchSize < 1)
        throw std::invalid_argument("training hyperparameters must be positive");
}

std::vector<float> predict(const ScoreMapModel& model, const std::vector<float>& stack) {
    checkStack(model, stack);
    auto sat = integralsOf(stack, model.channels, model.height, model.width);
    const int nf = model.featureCount();
    std::vector<double> f(static_cast<size_t>(nf));
    std::vector<float> out(size_t(model.height) * size_t(model.width));
    for (int v = 0; v < model.height; ++v)
        for (int u = 0; u < model.width; ++u) {
            featuresAt(stack, sat, model.channels, model.height, model.width, u, v, f.data());
            double z = 0.0;
            for (int k = 0; k < nf; ++k) z += model.weights[size_t(k)] * f[size_t(k)];
            out[size_t(v) * size_t(model.width) + size_t(u)] = float(sigmoid(z));
        }
    return out;
}

TrainStats trainConditional(ScoreMapModel& qb, const std::vector<Sample>& samples,
                            const TrainConfig& cfg) {
    checkSamples(qb, samples, true);
    std::vector<Row> rows;
    rows.reserve(samples.size());
    for (const Sample& s : samples) rows.push_back(rowFor(s, true, double(s.s)));
    return sgd(qb, rows, cfg);
}

void relabel(const ScoreMapModel& qb, std::vector<Sample>& samples) {
    for (Sample& s : samples) {
        auto map = predict(qb, withOneHot(s.obs, s.width, s.height, s.au, s.av));
        float peak = *std::max_element(map.begin(), map.end());
        s.sHat = peak > 0.5f ? 1 : 0;
    }
}

TrainStats trainUnconditional(ScoreMapModel& qa, const std::vector<Sample>& samples,
                              const TrainConfig& cfg) {
    checkSamples(qa, samples, false);
    std::vector<Row> rows;
    rows.reserve(samples.size());
    for (const Sample& s : samples) {
        if (s.sHat < 0) throw std::invalid_argument("sample lacks a relabeled S_hat");
        rows.push_back(rowFor(s, false, double(s.sHat)));
    }
    return sgd(qa, rows, cfg);
}

TrainStats trainILMode(ScoreMapModel& model, const std::vector<Sample>& samples,
                       const TrainConfig& cfg, bool conditioned) {
    cfg.validate();
    checkSamples(model, samples, conditioned);
    for (const Sample& s : samples)
        if (s.s != 1) throw std::invalid_argument("IL mode accepts positive samples only");

    const int nf = model.featureCount();
    const size_t np = size_t(model.height) * size_t(model.width);
    std::vector<double> velocity(size_t(nf), 0.0);
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t(0));
    TrainStats stats;
    Rng rng = Rng::stream(cfg.seed, 0x11f);
    std::vector<double> f(static_cast<size_t>(nf)), logits(np), probs(np);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[size_t(rng.uniformInt(0, int(i) - 1))]);
        double epochLoss = 0.0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batchSize)) {
            size_t end = std::min(order.size(), start + size_t(cfg.batchSize));
            std::vector<double> grad(size_t(nf), 0.0);
            for (size_t i = start; i < end; ++i) {
                const Sample& s = samples[order[i]];
                std::vector<float> stack = conditioned
                                               ? withOneHot(s.obs, s.width, s.height, s.au, s.av)
                                               : s.obs;
                auto sat = integralsOf(stack, model.channels, model.height, model.width);
                double zMax = -1e300;
                for (size_t p = 0; p < np; ++p) {
                    featuresAt(stack, sat, model.channels, model.height, model.width,
                               int(p % size_t(model.width)), int(p / size_t(model.width)),
                               f.data());
                    double z = 0.0;
                    for (int k = 0; k < nf; ++k) z += model.weights[size_t(k)] * f[size_t(k)];
                    logits[p] = z;
                    zMax = std::max(zMax, z);
                }
                double total = 0.0;
                for (size_t p = 0; p < np; ++p) total += std::exp(logits[p] - zMax);
                size_t target = (conditioned ? size_t(s.bv) : size_t(s.av)) * size_t(model.width) +
                                (conditioned ? size_t(s.bu) : size_t(s.au));
                epochLoss += std::log(total) + zMax - logits[target];
                for (size_t p = 0; p < np; ++p) {
                    probs[p] = std::exp(logits[p] - zMax) / total;
                    double coeff = probs[p] - (p == target ? 1.0 : 0.0);
                    if (std::abs(coeff) < 1e-12) continue;
                    featuresAt(stack, sat, model.channels, model.height, model.width,
                               int(p % size_t(model.width)), int(p / size_t(model.width)),
                               f.data());
                    for (int k = 0; k < nf; ++k) grad[size_t(k)] += coeff * f[size_t(k)];
                }
            }
            for (int k = 0; k < nf; ++k) {
                velocity[size_t(k)] = 0.9 * velocity[size_t(k)] -
                                      cfg.learningRate * grad[size_t(k)] / double(end - start);
                model.weights[size_t(k)] += velocity[size_t(k)];
            }
            stats.steps++;
        }
        epochLoss /= double(samples.size());
        if (epoch == 0) stats.firstEpochLoss = epochLoss;
        stats.finalLoss = epochLoss;
    }
    return stats;
}

namespace {

void putLe(std::ostream& f, uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}
uint32_t getLe(std::istream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace

void saveModel(const ScoreMapModel& model, TrainMode mode, const std::string& path,
               const std::string& configEcho) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write("RHQM", 4);
    putLe(f, 1);  // version
    putLe(f, uint32_t(model.channels));
    putLe(f, uint32_t(model.height));
    putLe(f, uint32_t(model.width));
    putLe(f, mode == TrainMode::ValueBce ? 0u : 1u);
    putLe(f, uint32_t(model.weights.size()));
    for (double w : model.weights) {
        float v = float(w);
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        putLe(f, bits);
    }
    putLe(f, uint32_t(configEcho.size()));
    f.write(configEcho.data(), std::streamsize(configEcho.size()));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

ScoreMapModel loadModel(const std::string& path, TrainMode* mode, std::string* configEcho) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "RHQM", 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint32_t version = getLe(f);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    ScoreMapModel m;
    m.channels = int(getLe(f));
    m.height = int(getLe(f));
    m.width = int(getLe(f));
    uint32_t modeBits = getLe(f);
    uint32_t count = getLe(f);
    if (!f || int(count) != m.featureCount())
        throw std::runtime_error("checkpoint parameter count mismatch");
    m.weights.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t bits = getLe(f);
        float v;
        std::memcpy(&v, &bits, 4);
        m.weights[i] = double(v);
    }
    uint32_t echoLen = getLe(f);
    std::string echo(echoLen, '\0');
    f.read(echo.data(), std::streamsize(echoLen));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    if (mode) *mode = modeBits == 0 ? TrainMode::ValueBce : TrainMode::IlCrossEntropy;
    if (configEcho) *configEcho = echo;
    return m;
}

PrimitiveParams valueMapAct(const PhaseModels& models, const std::vector<float>& stack, int width,
                            int height, const Exploration& exploration, Rng* rng) {
    auto mapA = predict(models.qa, stack);
    auto [au, av] = actFromMap(mapA, width, height, exploration, rng);
    auto mapB = predict(models.qb, withOneHot(stack, width, height, au, av));
    auto [bu, bv] = actFromMap(mapB, width, height, exploration, rng);
    PrimitiveParams p;
    p.au = au;
    p.av = av;
    p.bu = bu;
    p.bv = bv;
    return p;
}

void trainPhase(PhaseModels& models, std::vector<Sample>& samples, const TrainConfig& cfg) {
    trainConditional(models.qb, samples, cfg);
    relabel(models.qb, samples);
    trainUnconditional(models.qa, samples, cfg);
}

}  // namespace robohang
