#include "ticl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ticl/error.hpp"

namespace ticl {

namespace {

void require_finite(std::span<const float> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorCode::NonFinite, "non-finite embedding coordinate at position " + std::to_string(i));
        }
    }
}

void require_same_dim(std::size_t a, std::size_t b) {
    if (a != b) {
        fail(ErrorCode::DimMismatch, "dimension " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

} // namespace

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
    if (values_.empty()) fail(ErrorCode::DimMismatch, "embedding must have dimension >= 1");
    require_finite(values_);
}

EmbeddingVector EmbeddingVector::normalized_from(std::vector<float> values) {
    EmbeddingVector v(std::move(values));
    const double n = v.norm();
    if (std::abs(n - 1.0) > kNormTolerance) {
        fail(ErrorCode::NotNormalized, "norm " + std::to_string(n) + " is not within tolerance of 1");
    }
    v.normalized_ = true;
    return v;
}

double EmbeddingVector::norm() const noexcept { return l2_norm(values_); }

double l2_norm(std::span<const float> values) noexcept {
    double sum = 0.0;
    for (float x : values) sum += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(sum);
}

EmbeddingVector l2_normalize(const EmbeddingVector& v) {
    if (v.empty()) fail(ErrorCode::DimMismatch, "cannot normalize an empty embedding");
    const double n = v.norm();
    if (n < kZeroNormThreshold) fail(ErrorCode::ZeroNorm, "embedding norm " + std::to_string(n));

    std::vector<float> out(v.dim());
    const auto in = v.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(in[i]) / n);
    }
    return EmbeddingVector::normalized_from(std::move(out));
}

double euclidean_distance(std::span<const float> u, std::span<const float> v) {
    require_same_dim(u.size(), v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = static_cast<double>(u[i]) - static_cast<double>(v[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

double euclidean_distance(const EmbeddingVector& u, const EmbeddingVector& v) {
    return euclidean_distance(u.values(), v.values());
}

double inner_product(const EmbeddingVector& u, const EmbeddingVector& v) {
    require_same_dim(u.dim(), v.dim());
    double sum = 0.0;
    const auto a = u.values();
    const auto b = v.values();
    for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

std::vector<RankedCandidate> top_k(std::vector<RankedCandidate> ranked, std::size_t k) {
    const std::size_t n = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(), ranks_before);
    ranked.resize(n);
    return ranked;
}

} // namespace ticl
