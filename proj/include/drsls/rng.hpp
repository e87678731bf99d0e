#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace drsls {

// Named sub-generator ids so every consumer of randomness owns a stream that
// is independent of evaluation order and thread schedule.
enum class RngPurpose : std::uint64_t {
  innovation_samples = 1,
  warmup = 2,
  process_noise = 3,
  model_perturbation = 4,
  mismatch_draw = 5,
  test_fixture = 6,
};

// Deterministic random stream. Substreams are derived by mixing the user
// seed with (stream, substream) through splitmix64, so draw d of a Monte
// Carlo run sees the same numbers no matter how work is scheduled.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static RngStream derive(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t substream = 0) {
    return RngStream(mix(mix(seed ^ mix(stream)) ^ mix(substream)));
  }
  static RngStream derive(std::uint64_t seed, RngPurpose purpose,
                          std::uint64_t substream = 0) {
    return derive(seed, static_cast<std::uint64_t>(purpose), substream);
  }

  // Uniform in [0, 1) with 53 random bits; avoids the library distribution
  // types whose sequences are implementation-defined.
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  Eigen::VectorXd uniform_vector(const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi) {
    Eigen::VectorXd out(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) out[i] = uniform(lo[i], hi[i]);
    return out;
  }

  Eigen::VectorXd uniform_vector(int n, double lo, double hi) {
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = uniform(lo, hi);
    return out;
  }

  // Row-major fill so the draw order matches the written matrix layout.
  Eigen::MatrixXd uniform_matrix(int rows, int cols, double lo, double hi) {
    Eigen::MatrixXd out(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) out(i, j) = uniform(lo, hi);
    return out;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace drsls
