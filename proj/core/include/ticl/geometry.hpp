#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ticl {

inline constexpr double kNormTolerance = 1e-6;
inline constexpr double kZeroNormThreshold = 1e-12;

/// Fixed-dimension embedding stored in single precision.
///
/// Construction rejects empty or non-finite input. A vector only carries the
/// normalized flag if its l2 norm is within kNormTolerance of 1; the flag is
/// set by l2_normalize or by the trusted constructor used when loading
/// already-normalized rows.
class EmbeddingVector {
  public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<float> values);

    /// Marks `values` as normalized after checking the norm.
    static EmbeddingVector normalized_from(std::vector<float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    bool normalized() const noexcept { return normalized_; }
    std::span<const float> values() const noexcept { return values_; }
    float operator[](std::size_t i) const { return values_[i]; }

    double norm() const noexcept;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

  private:
    std::vector<float> values_;
    bool normalized_ = false;
};

/// Position in a candidate store together with its distance to the query.
struct RankedCandidate {
    std::size_t candidate_index = 0;
    double distance = 0.0;

    friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

/// Strict weak order used everywhere a ranking is produced: distance
/// ascending, then candidate_index ascending.
inline bool ranks_before(const RankedCandidate& a, const RankedCandidate& b) noexcept {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.candidate_index < b.candidate_index;
}

double l2_norm(std::span<const float> values) noexcept;

/// Throws ZeroNorm when the norm is below kZeroNormThreshold.
EmbeddingVector l2_normalize(const EmbeddingVector& v);

/// ||u - v||_2 accumulated in double. Throws DimMismatch.
double euclidean_distance(const EmbeddingVector& u, const EmbeddingVector& v);
double euclidean_distance(std::span<const float> u, std::span<const float> v);

double inner_product(const EmbeddingVector& u, const EmbeddingVector& v);

/// Exact top-k under ranks_before. k larger than the input returns everything.
std::vector<RankedCandidate> top_k(std::vector<RankedCandidate> ranked, std::size_t k);

} // namespace ticl
