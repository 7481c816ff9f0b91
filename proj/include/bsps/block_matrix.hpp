/*
 * Copyright 2026 The bsps Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

namespace bsps {

/// Dense square row-major matrix with the two-level blocking used by the
/// streamed Cannon multiply: M x M outer blocks, each split into N x N inner
/// blocks of order k = n / (N M). Block indices here are 0-based.
template <typename Scalar>
class BlockMatrix {
public:
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Index = Eigen::Index;

    BlockMatrix() = default;
    explicit BlockMatrix(Index order) : data_(Dense::Zero(order, order)) {}
    explicit BlockMatrix(Dense data) : data_(std::move(data)) {
        if (data_.rows() != data_.cols()) throw std::invalid_argument("BlockMatrix must be square");
    }

    /// Copies src into the top-left corner of a zero matrix whose order is
    /// the next multiple of `multiple`.
    static BlockMatrix padded(const Dense& src, Index multiple) {
        if (src.rows() != src.cols()) throw std::invalid_argument("BlockMatrix must be square");
        if (multiple < 1) throw std::invalid_argument("padding multiple must be positive");
        const Index order = (src.rows() + multiple - 1) / multiple * multiple;
        BlockMatrix out(order);
        out.data_.topLeftCorner(src.rows(), src.cols()) = src;
        return out;
    }

    Index order() const { return data_.rows(); }
    Dense& dense() { return data_; }
    const Dense& dense() const { return data_; }

    auto outer_block(Index i, Index j, Index outer) {
        const Index b = order() / outer;
        return data_.block(i * b, j * b, b, b);
    }
    auto outer_block(Index i, Index j, Index outer) const {
        const Index b = order() / outer;
        return data_.block(i * b, j * b, b, b);
    }

    /// Inner block (a, b) of outer block (i, j).
    auto inner_block(Index i, Index j, Index a, Index b, Index outer, Index grid) {
        const Index k = order() / (outer * grid);
        return data_.block((i * grid + a) * k, (j * grid + b) * k, k, k);
    }
    auto inner_block(Index i, Index j, Index a, Index b, Index outer, Index grid) const {
        const Index k = order() / (outer * grid);
        return data_.block((i * grid + a) * k, (j * grid + b) * k, k, k);
    }

private:
    Dense data_;
};

using BlockMatrixf = BlockMatrix<float>;

}  // namespace bsps
