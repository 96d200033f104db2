#pragma once

#include "deltak/points.hpp"
#include "deltak/rng.hpp"

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deltak {

/// Synthetic instance description: planted centers in the unit cube with a
/// minimum pairwise distance, Gaussian per-coordinate noise, independent
/// masking kept within the per-point budget.
struct GeneratorSpec {
    int k_true = 2;
    int n = 16;
    Eigen::Index d = 2;
    int delta = 1;          // per-point cap on masked coordinates
    double sigma = 0.05;    // noise standard deviation
    double miss_prob = 0.0; // per-coordinate masking probability
    double separation = 0.1;
    std::uint64_t seed = 0;
};

/// Parses "k=2,n=6,d=2,sigma=0.01,miss=0.2,delta=1,sep=0.5,seed=7".
/// Unknown keys and malformed values are input errors.
inline GeneratorSpec parse_generator_spec(std::string_view text) {
    GeneratorSpec spec;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view item = text.substr(pos, end - pos);
        pos = end + 1;
        if (item.empty()) continue;
        const std::size_t eq = item.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("generator spec item without '=': " + std::string(item));
        const std::string_view key = item.substr(0, eq);
        const std::string val(item.substr(eq + 1));
        try {
            if (key == "k") spec.k_true = std::stoi(val);
            else if (key == "n") spec.n = std::stoi(val);
            else if (key == "d") spec.d = std::stol(val);
            else if (key == "delta") spec.delta = std::stoi(val);
            else if (key == "sigma") spec.sigma = std::stod(val);
            else if (key == "miss") spec.miss_prob = std::stod(val);
            else if (key == "sep") spec.separation = std::stod(val);
            else if (key == "seed") spec.seed = std::stoull(val);
            else throw std::invalid_argument("unknown generator spec key: " + std::string(key));
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("bad generator spec value for '" + std::string(key) +
                                        "': " + val);
        }
    }
    return spec;
}

struct GeneratedInstance {
    Instance instance;
    std::vector<int> planted;     // true cluster of each point
    std::vector<Center> true_centers;
};

/// Deterministic under the seed.  Centers are redrawn as a set until the
/// pairwise separation holds (bounded retries); each point is its center plus
/// noise, then masked, with the mask resampled until at most delta coordinates
/// are missing and the domain stays nonempty.
inline GeneratedInstance generate(const GeneratorSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("generator: n must be >= 1");
    if (spec.d < 1) throw std::invalid_argument("generator: d must be >= 1");
    if (spec.k_true < 1) throw std::invalid_argument("generator: k must be >= 1");
    if (spec.delta < 0 || spec.delta >= spec.d)
        throw std::invalid_argument("generator: delta must satisfy 0 <= delta < d");
    if (spec.sigma < 0.0) throw std::invalid_argument("generator: sigma must be >= 0");
    if (spec.miss_prob < 0.0 || spec.miss_prob >= 1.0)
        throw std::invalid_argument("generator: miss must lie in [0, 1)");
    if (spec.separation < 0.0) throw std::invalid_argument("generator: sep must be >= 0");

    Rng rng = make_rng(spec.seed, 0);
    const double sep_sq = spec.separation * spec.separation;

    std::vector<Center> centers;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 10000)
            throw std::runtime_error("generator: could not place separated centers in 10000 tries");
        centers.clear();
        for (int c = 0; c < spec.k_true; ++c) {
            Eigen::ArrayXd v(spec.d);
            for (Eigen::Index j = 0; j < spec.d; ++j) v[j] = uniform_real(rng);
            centers.push_back(Center::full(std::move(v)));
        }
        bool ok = true;
        for (std::size_t a = 0; a < centers.size() && ok; ++a)
            for (std::size_t b = a + 1; b < centers.size() && ok; ++b)
                if ((centers[a].values - centers[b].values).square().sum() < sep_sq) ok = false;
        if (ok) break;
    }

    GeneratedInstance out;
    std::vector<DeltaPoint> pts;
    pts.reserve(static_cast<std::size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) {
        const int c = i % spec.k_true;
        out.planted.push_back(c);
        MaskedVector v(spec.d);
        for (Eigen::Index j = 0; j < spec.d; ++j)
            v.set(j, centers[static_cast<std::size_t>(c)].values[j] + spec.sigma * gaussian(rng));

        for (int tries = 0;; ++tries) {
            if (tries >= 1000000)
                throw std::runtime_error("generator: masking rejection did not terminate");
            Mask drop = Mask::Constant(spec.d, false);
            for (Eigen::Index j = 0; j < spec.d; ++j) drop[j] = uniform_real(rng) < spec.miss_prob;
            const Eigen::Index cnt = drop.count();
            if (cnt <= spec.delta && cnt < spec.d) {
                MaskedVector masked = v;
                for (Eigen::Index j = 0; j < spec.d; ++j)
                    if (drop[j]) masked.clear(j);
                pts.emplace_back(i, std::move(masked));
                break;
            }
        }
    }
    out.instance = make_instance(std::move(pts), spec.d);
    out.true_centers = std::move(centers);
    return out;
}

}  // namespace deltak
