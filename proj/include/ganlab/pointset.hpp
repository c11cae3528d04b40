#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ganlab/errors.hpp"
#include "ganlab/matrix.hpp"

namespace ganlab {

/// Contiguous slice of feature coordinates [offset, offset+width).
struct Block {
    std::size_t offset = 0;
    std::size_t width = 0;

    bool operator==(const Block&) const = default;
};

/// A batch of feature vectors (rows) with optional block structure and the
/// per-block scales that were applied to it.
struct PointSet {
    Matrix points;                     // [n x d]
    std::vector<Block> blocks;         // must tile [0, d) without overlap
    std::vector<double> block_scales;  // empty until normalization applied

    std::size_t size() const { return points.rows(); }
    std::size_t dim() const { return points.cols(); }

    static PointSet from_matrix(Matrix m) {
        PointSet ps;
        ps.blocks = {Block{0, m.cols()}};
        ps.points = std::move(m);
        return ps;
    }

    void validate() const {
        if (blocks.empty()) throw ContractError("PointSet: no blocks");
        std::size_t expect = 0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (blocks[b].offset != expect || blocks[b].width == 0)
                throw ContractError("PointSet: blocks must tile [0,d) contiguously (block " +
                                    std::to_string(b) + ")");
            expect += blocks[b].width;
        }
        if (expect != dim())
            throw ContractError("PointSet: blocks cover " + std::to_string(expect) +
                                " of " + std::to_string(dim()) + " dimensions");
        if (!block_scales.empty()) {
            if (block_scales.size() != blocks.size())
                throw ContractError("PointSet: block_scales size != block count");
            for (double s : block_scales)
                if (!(s > 0.0)) throw ContractError("PointSet: block scales must be positive");
        }
    }

    bool same_layout(const PointSet& other) const {
        return dim() == other.dim() && blocks == other.blocks;
    }
};

}  // namespace ganlab
