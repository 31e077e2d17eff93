#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace rilab {

// Seedable pseudo-random stream. Every run-level output records kRngAlgorithm
// so results can be matched to the generator that produced them.
class Rng {
public:
    static constexpr std::string_view kRngAlgorithm = "mt19937_64/seed_seq";

    explicit Rng(std::uint64_t seed);
    // Independent stream for (seed, stream); different streams never share state.
    Rng(std::uint64_t seed, std::uint64_t stream);

    double uniform();  // [0, 1)
    double normal(double mean, double stddev);
    std::size_t index(std::size_t n);  // uniform on {0, ..., n-1}
    bool bernoulli(double p);
    // Inverse-CDF draw from an (unnormalized-safe) probability vector.
    std::size_t categorical(std::span<const double> probs);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace rilab
