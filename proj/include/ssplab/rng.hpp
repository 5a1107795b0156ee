#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ssplab {

/// Mixes a 64-bit value through the splitmix64 finalizer. Used to derive
/// independent substreams (per trial, per episode) from one root seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
    return mix_seed(root ^ mix_seed(stream));
}

/// Deterministic random source. All sampling goes through raw mt19937_64
/// draws so that results are bit-identical across platforms and standard
/// library versions (std::*_distribution makes no such guarantee).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index sampled proportionally to the (nonnegative) weights.
    /// A zero-sum weight vector yields index 0.
    int discrete(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) return 0;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    /// Standard exponential via inversion; used for Dirichlet sampling.
    double exponential() {
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return -std::log(u);
    }

    /// Dirichlet(1,...,1) sample of the given size.
    std::vector<double> simplex(std::size_t n) {
        std::vector<double> x(n);
        double total = 0.0;
        for (auto& v : x) { v = exponential(); total += v; }
        for (auto& v : x) v /= total;
        return x;
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace ssplab
