#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace ct {

// Large-but-finite cost used to forbid an assignment; pairs at or above it
// are reported as unassigned.
inline constexpr double kForbiddenCost = 1e12;

// Min-cost assignment by shortest augmenting paths (potentials form),
// O(n^2 m). Returns, per row, the assigned column or -1. Rectangular
// matrices are handled by padding internally; rows assigned only to
// forbidden-cost columns come back as -1.
inline std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int rows = static_cast<int>(cost.rows());
    const int cols = static_cast<int>(cost.cols());
    if (rows == 0 || cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
    const int n = std::max(rows, cols);

    auto at = [&](int r, int c) -> double {
        if (r >= rows || c >= cols) return kForbiddenCost;  // padding
        return cost(r, c);
    };

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays per the classic formulation.
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // column -> row
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            int i0 = match[static_cast<std::size_t>(j0)], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                double cur = at(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                             v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> result(static_cast<std::size_t>(rows), -1);
    for (int j = 1; j <= n; ++j) {
        int i = match[static_cast<std::size_t>(j)];
        if (i >= 1 && i <= rows && j <= cols && cost(i - 1, j - 1) < kForbiddenCost)
            result[static_cast<std::size_t>(i - 1)] = j - 1;
    }
    return result;
}

}  // namespace ct
