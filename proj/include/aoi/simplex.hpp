#pragma once

#include <string>
#include <utility>
#include <vector>

namespace aoi {

enum class RowSense { equal, less_equal };

/// min c^T x  s.t.  A x (= or <=) b,  x >= 0.  Columns are stored sparse.
struct LinearProgram {
    std::vector<double> rhs;
    std::vector<RowSense> sense;
    std::vector<double> cost;
    std::vector<std::vector<std::pair<int, double>>> columns;

    int rows() const noexcept { return static_cast<int>(rhs.size()); }
    int cols() const noexcept { return static_cast<int>(columns.size()); }

    int add_row(double b, RowSense s) {
        rhs.push_back(b);
        sense.push_back(s);
        return rows() - 1;
    }
    int add_column(double c) {
        cost.push_back(c);
        columns.emplace_back();
        return cols() - 1;
    }
    void set(int row, int col, double value) { columns[col].emplace_back(row, value); }
};

enum class SimplexStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

std::string to_string(SimplexStatus status);

struct SimplexOptions {
    int max_iterations = 500000;
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-7;
    int refactor_interval = 80;
    /// Consecutive non-improving pivots before switching to Bland's rule.
    int degenerate_limit = 200;
};

struct SimplexResult {
    SimplexStatus status = SimplexStatus::numerical_failure;
    std::vector<double> x;      // structural columns
    std::vector<double> duals;  // one per row, d(objective)/d(rhs)
    double objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;     // max |A x - b| over equality rows, max(A x - b, 0) over <= rows
    double dual_infeasibility = 0.0;  // max(-reduced cost, 0) over structural and slack columns
    std::string message;
};

/// Two-phase revised primal simplex. The basis is kept as a sparse LU
/// factorization plus a product-form eta file that is refactored periodically.
/// Pricing is Dantzig with a Harris ratio test; long runs of degenerate pivots
/// fall back to Bland's rule until the objective moves again. The pivoting
/// order is a deterministic function of the input.
SimplexResult solve_simplex(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace aoi
