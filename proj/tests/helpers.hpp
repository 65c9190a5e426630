#pragma once

#include "abc/mathkit.hpp"
#include "oracles.hpp"

namespace testutil {

inline oracle::Mat to_mat(const abc::Matrix& m) {
    oracle::Mat out = oracle::zeros(m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i)
        for (std::size_t j = 0; j < m.dim(); ++j) out[i][j] = m(i, j);
    return out;
}

inline abc::Matrix from_mat(const oracle::Mat& m) {
    abc::Matrix out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) out(i, j) = m[i][j];
    return out;
}

}  // namespace testutil
