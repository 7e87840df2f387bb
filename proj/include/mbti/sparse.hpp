#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mbti {

/// Sparse row: strictly increasing indices, finite non-zero values.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
    std::size_t dim = 0;

    std::size_t nnz() const { return indices.size(); }
    double norm() const;
    /// Dot product with a dense vector of length >= dim.
    double dot(std::span<const double> dense) const;
    bool operator==(const SparseVector&) const = default;
};

/// Row-major sparse matrix.
struct SparseMatrix {
    std::vector<SparseVector> rows;
    std::size_t cols = 0;

    std::size_t size() const { return rows.size(); }
    /// Dense copy of one column.
    std::vector<double> column(std::uint32_t j) const;
};

} // namespace mbti
