#pragma once

#include <limits>
#include <vector>

#include "auxdiff/common.hpp"

namespace auxdiff {

/// Exact solution of the square linear assignment problem by shortest
/// augmenting paths with dual potentials (Jonker-Volgenant style, O(n^3)).
/// Returns, for each row, the assigned column.
inline std::vector<int> solve_assignment(const Matd& cost) {
    if (cost.rows != cost.cols || cost.rows == 0)
        throw ConfigError("solve_assignment needs a nonempty square matrix");
    const int n = static_cast<int>(cost.rows);
    const double inf = std::numeric_limits<double>::infinity();

    // 1-based potentials/matching, column 0 is a virtual source.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0);  // match[col] = row
    std::vector<int> way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace auxdiff
