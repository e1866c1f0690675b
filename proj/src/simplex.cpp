#include "aoi/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace aoi {

std::string to_string(SimplexStatus status) {
    switch (status) {
    case SimplexStatus::optimal: return "optimal";
    case SimplexStatus::infeasible: return "infeasible";
    case SimplexStatus::unbounded: return "unbounded";
    case SimplexStatus::iteration_limit: return "iteration-limit";
    case SimplexStatus::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Column = std::vector<std::pair<int, double>>;

struct Eta {
    int row = 0;
    double pivot = 1.0;
    std::vector<std::pair<int, double>> entries;  // off-pivot entries of the FTRAN'd column
};

enum class PhaseResult { optimal, unbounded, infeasible, iteration_limit, numerical_failure };

class RevisedSimplex {
public:
    RevisedSimplex(const LinearProgram& lp, const SimplexOptions& opt) : lp_(lp), opt_(opt) {
        m_ = lp.rows();
        n_struct_ = lp.cols();
        row_sign_.assign(m_, 1.0);
        for (int i = 0; i < m_; ++i)
            if (lp.rhs[i] < 0.0) row_sign_[i] = -1.0;
        b_.resize(m_);
        for (int i = 0; i < m_; ++i) b_[i] = row_sign_[i] * lp.rhs[i];
        b_orig_ = b_;

        cols_.reserve(n_struct_ + 2 * m_);
        cost_.reserve(n_struct_ + 2 * m_);
        for (int j = 0; j < n_struct_; ++j) {
            Column c;
            c.reserve(lp.columns[j].size());
            for (auto [i, v] : lp.columns[j])
                if (v != 0.0) c.emplace_back(i, row_sign_[i] * v);
            std::sort(c.begin(), c.end());
            cols_.push_back(std::move(c));
            cost_.push_back(lp.cost[j]);
            artificial_.push_back(0);
        }
        basis_.assign(m_, -1);
        slack_of_row_.assign(m_, -1);
        for (int i = 0; i < m_; ++i) {
            if (lp.sense[i] != RowSense::less_equal) continue;
            slack_of_row_[i] = add_column({{i, row_sign_[i]}}, 0.0, false);
            if (row_sign_[i] > 0.0) basis_[i] = slack_of_row_[i];
        }
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < 0) basis_[i] = add_column({{i, 1.0}}, 0.0, true);
        position_.assign(cols_.size(), -1);
        for (int i = 0; i < m_; ++i) position_[basis_[i]] = i;
        rejected_.assign(cols_.size(), 0);
    }

    SimplexResult run() {
        SimplexResult result;
        if (!refactor()) return fail(result, "initial basis is singular");

        bool any_artificial = false;
        for (int p = 0; p < m_; ++p) any_artificial |= artificial_[basis_[p]] != 0;

        if (any_artificial) {
            std::vector<double> phase1(cols_.size(), 0.0);
            for (std::size_t j = 0; j < cols_.size(); ++j) phase1[j] = artificial_[j] ? 1.0 : 0.0;
            const auto r = optimize(phase1);
            if (r == PhaseResult::iteration_limit) return finish(result, SimplexStatus::iteration_limit);
            if (r != PhaseResult::optimal) return fail(result, "phase 1 lost the basis factorization");
            double infeas = 0.0, scale = 1.0;
            for (int p = 0; p < m_; ++p)
                if (artificial_[basis_[p]]) infeas += std::max(xb_[p], 0.0);
            for (double v : b_) scale = std::max(scale, std::abs(v));
            if (infeas > 1e3 * opt_.feasibility_tol * scale) {
                result.message = "phase 1 ended with artificial mass " + std::to_string(infeas);
                return finish(result, SimplexStatus::infeasible);
            }
            if (!drive_out_artificials()) return fail(result, "basis lost while removing artificials");
        }

        const auto r = optimize(cost_);
        if (r == PhaseResult::unbounded) return finish(result, SimplexStatus::unbounded);
        if (r == PhaseResult::iteration_limit) return finish(result, SimplexStatus::iteration_limit);
        if (r != PhaseResult::optimal) return fail(result, "phase 2 lost the basis factorization");
        return finish(result, SimplexStatus::optimal);
    }

private:
    int add_column(Column c, double cost, bool artificial) {
        cols_.push_back(std::move(c));
        cost_.push_back(cost);
        artificial_.push_back(artificial ? 1 : 0);
        return static_cast<int>(cols_.size()) - 1;
    }

    bool refactor() {
        std::vector<Eigen::Triplet<double>> trip;
        for (int p = 0; p < m_; ++p)
            for (auto [i, v] : cols_[basis_[p]]) trip.emplace_back(i, p, v);
        basis_matrix_.resize(m_, m_);
        basis_matrix_.setFromTriplets(trip.begin(), trip.end());
        basis_matrix_.makeCompressed();
        lu_.compute(basis_matrix_);
        etas_.clear();
        if (lu_.info() != Eigen::Success) return false;
        Eigen::Map<const Eigen::VectorXd> b(b_.data(), m_);
        xb_ = lu_.solve(b);
        if (!xb_.allFinite()) return false;
        good_basis_ = basis_;
        const Eigen::VectorXd residual = b - basis_matrix_ * xb_;
        xb_ += lu_.solve(residual);
        for (int p = 0; p < m_; ++p)
            if (xb_[p] < 0.0 && xb_[p] > -opt_.feasibility_tol) xb_[p] = 0.0;
        return true;
    }

    // Falls back to the last basis that factorized. A handful of recoveries are
    // allowed per solve before the failure is reported.
    bool recover() {
        if (good_basis_.empty() || ++recoveries_ > 5) return false;
        for (int p = 0; p < m_; ++p) position_[basis_[p]] = -1;
        basis_ = good_basis_;
        for (int p = 0; p < m_; ++p) position_[basis_[p]] = p;
        return refactor();
    }

    bool refactor_or_recover() { return refactor() || recover(); }

    // A pivot is trusted only if the FTRAN'd entry is large and agrees with the
    // row-wise estimate.
    bool trusted_pivot(double d, double estimate) const {
        return std::abs(d) >= opt_.pivot_tol && std::abs(d - estimate) <= 1e-6 * (1.0 + std::abs(estimate));
    }

    Eigen::VectorXd ftran(int j) const {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
        for (auto [i, v] : cols_[j]) rhs[i] = v;
        Eigen::VectorXd v = lu_.solve(rhs);
        for (const auto& eta : etas_) {
            const double vr = v[eta.row] / eta.pivot;
            v[eta.row] = vr;
            if (vr == 0.0) continue;
            for (auto [i, d] : eta.entries) v[i] -= d * vr;
        }
        return v;
    }

    Eigen::VectorXd btran(Eigen::VectorXd w) const {
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            double acc = w[it->row];
            for (auto [i, d] : it->entries) acc -= w[i] * d;
            w[it->row] = acc / it->pivot;
        }
        return lu_.transpose().solve(w);
    }

    double dot(const Eigen::VectorXd& y, int j) const {
        double s = 0.0;
        for (auto [i, v] : cols_[j]) s += y[i] * v;
        return s;
    }

    void clear_rejected() {
        if (rejected_count_ == 0) return;
        std::fill(rejected_.begin(), rejected_.end(), 0);
        rejected_count_ = 0;
    }

    void pivot(int row, int entering, const Eigen::VectorXd& d, bool clamp = true) {
        const double theta = xb_[row] / d[row];
        if (theta != 0.0) {
            for (int i = 0; i < m_; ++i) xb_[i] -= theta * d[i];
        }
        xb_[row] = theta;
        if (clamp)
            for (int i = 0; i < m_; ++i)
                if (xb_[i] < 0.0) xb_[i] = 0.0;
        Eta eta;
        eta.row = row;
        eta.pivot = d[row];
        for (int i = 0; i < m_; ++i)
            if (i != row && std::abs(d[i]) > 1e-14) eta.entries.emplace_back(i, d[i]);
        etas_.push_back(std::move(eta));
        position_[basis_[row]] = -1;
        basis_[row] = entering;
        position_[entering] = row;
    }

    // Shifts b by B xi so every basic variable sits strictly inside its bound.
    // The current basis stays feasible and degenerate ties are broken.
    void perturb() {
        std::uniform_real_distribution<double> u(1.0, 2.0);
        for (int p = 0; p < m_; ++p) {
            const double xi = u(rng_) * perturbation_ * (1.0 + std::abs(xb_[p]));
            for (auto [i, v] : cols_[basis_[p]]) b_[i] += v * xi;
            xb_[p] += xi;
        }
        perturbed_ = true;
    }

    // Primal simplex on the perturbed problem, then removal of the shift. Basic
    // variables that turn negative are repaired with dual simplex pivots, which
    // keep the reduced costs optimal; a final unperturbed primal pass confirms.
    PhaseResult optimize(const std::vector<double>& cost) {
        for (int round = 0;; ++round) {
            const bool last = round >= 3;
            const auto r = run_phase(cost, !last);
            if (r != PhaseResult::optimal || !perturbed_) return r;
            b_ = b_orig_;
            perturbed_ = false;
            if (!refactor_or_recover()) return PhaseResult::numerical_failure;
            const auto c = dual_cleanup(cost);
            if (c != PhaseResult::optimal) return c;
        }
    }

    PhaseResult dual_cleanup(const std::vector<double>& cost) {
        for (;;) {
            int r = -1;
            double worst = -opt_.feasibility_tol;
            for (int p = 0; p < m_; ++p) {
                if (xb_[p] < worst) {
                    worst = xb_[p];
                    r = p;
                }
            }
            if (r < 0) {
                for (int p = 0; p < m_; ++p)
                    if (xb_[p] < 0.0) xb_[p] = 0.0;
                return PhaseResult::optimal;
            }
            if (iterations_ >= opt_.max_iterations) return PhaseResult::iteration_limit;

            Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
            e[r] = 1.0;
            const Eigen::VectorXd rho = btran(e);
            Eigen::VectorXd cb(m_);
            for (int p = 0; p < m_; ++p) cb[p] = cost[basis_[p]];
            const Eigen::VectorXd y = btran(cb);

            int entering = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            double best_alpha = 0.0;
            for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
                if (position_[j] >= 0 || artificial_[j] || rejected_[j]) continue;
                const double alpha = dot(rho, j);
                if (alpha >= -opt_.pivot_tol) continue;
                const double ratio = std::max(cost[j] - dot(y, j), 0.0) / -alpha;
                if (ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && -alpha > best_alpha)) {
                    best_ratio = std::min(best_ratio, ratio);
                    best_alpha = -alpha;
                    entering = j;
                }
            }
            if (entering < 0) {
                if (rejected_count_ > 0) {
                    clear_rejected();
                    if (!etas_.empty()) {
                        if (!refactor_or_recover()) return PhaseResult::numerical_failure;
                        continue;
                    }
                }
                return PhaseResult::infeasible;
            }
            const Eigen::VectorXd d = ftran(entering);
            if (!trusted_pivot(d[r], -best_alpha)) {
                rejected_[entering] = 1;
                ++rejected_count_;
                continue;
            }
            clear_rejected();
            pivot(r, entering, d, false);
            ++iterations_;
            if (static_cast<int>(etas_.size()) >= opt_.refactor_interval && !refactor_or_recover())
                return PhaseResult::numerical_failure;
        }
    }

    PhaseResult run_phase(const std::vector<double>& cost, bool allow_perturb) {
        bool bland = false;
        int stalled = 0;
        bool fresh = etas_.empty();
        for (;;) {
            if (iterations_ >= opt_.max_iterations) return PhaseResult::iteration_limit;
            if (static_cast<int>(etas_.size()) >= opt_.refactor_interval) {
                if (!refactor_or_recover()) return PhaseResult::numerical_failure;
                fresh = true;
            }

            Eigen::VectorXd cb(m_);
            for (int p = 0; p < m_; ++p) cb[p] = cost[basis_[p]];
            const Eigen::VectorXd y = btran(cb);

            int entering = -1;
            double best = -opt_.optimality_tol;
            for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
                if (position_[j] >= 0 || artificial_[j]) continue;
                const double dj = cost[j] - dot(y, j);
                if (dj < best) {
                    best = dj;
                    entering = j;
                    if (bland) break;
                }
            }
            if (entering < 0) {
                if (fresh) return PhaseResult::optimal;
                if (!refactor_or_recover()) return PhaseResult::numerical_failure;
                fresh = true;
                continue;
            }

            const Eigen::VectorXd d = ftran(entering);
            // Harris pass 1: the largest step that keeps every basic variable
            // above -feasibility_tol. Pass 2 picks among the rows blocking within
            // that step: the largest pivot, or under Bland's rule the smallest
            // basic column index among pivots of acceptable size.
            int leave = -1;
            double theta_max = std::numeric_limits<double>::infinity();
            double dmax = 0.0;
            for (int i = 0; i < m_; ++i) {
                if (d[i] > opt_.pivot_tol) {
                    theta_max = std::min(theta_max, (std::max(xb_[i], 0.0) + opt_.feasibility_tol) / d[i]);
                    dmax = std::max(dmax, d[i]);
                }
            }
            double best_pivot = 0.0;
            for (int i = 0; i < m_; ++i) {
                if (d[i] <= opt_.pivot_tol || std::max(xb_[i], 0.0) / d[i] > theta_max) continue;
                if (!bland) {
                    if (d[i] > best_pivot) {
                        best_pivot = d[i];
                        leave = i;
                    }
                } else if (d[i] >= 0.1 * dmax || d[i] >= 1e-3) {
                    if (leave < 0 || basis_[i] < basis_[leave]) leave = i;
                }
            }
            if (bland && leave < 0) {
                for (int i = 0; i < m_; ++i) {
                    if (d[i] > opt_.pivot_tol && std::max(xb_[i], 0.0) / d[i] <= theta_max && d[i] > best_pivot) {
                        best_pivot = d[i];
                        leave = i;
                    }
                }
            }
            if (leave < 0) {
                if (!fresh) {
                    if (!refactor_or_recover()) return PhaseResult::numerical_failure;
                    fresh = true;
                    continue;
                }
                return PhaseResult::unbounded;
            }

            const double step = std::max(xb_[leave], 0.0) / d[leave];
            pivot(leave, entering, d);
            fresh = false;
            ++iterations_;
            if (step * -best > 1e-11) {
                stalled = 0;
                bland = false;
            } else if (++stalled > perturb_after_ && allow_perturb && !perturbed_) {
                perturb();
                stalled = 0;
            } else if (stalled > opt_.degenerate_limit) {
                bland = true;
            }
        }
    }

    bool drive_out_artificials() {
        for (int p = 0; p < m_; ++p) {
            if (!artificial_[basis_[p]]) continue;
            Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
            e[p] = 1.0;
            const Eigen::VectorXd rho = btran(e);
            int best = -1;
            double best_abs = 1e-6, best_a = 0.0;
            for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
                if (position_[j] >= 0 || artificial_[j]) continue;
                const double a = dot(rho, j);
                if (std::abs(a) > best_abs) {
                    best_abs = std::abs(a);
                    best_a = a;
                    best = j;
                }
            }
            if (best < 0) continue;  // redundant row; the artificial stays basic at zero
            const Eigen::VectorXd d = ftran(best);
            if (!trusted_pivot(d[p], best_a)) continue;
            pivot(p, best, d);
            if (static_cast<int>(etas_.size()) >= opt_.refactor_interval && !refactor_or_recover()) return false;
        }
        return refactor_or_recover();
    }

    SimplexResult& fail(SimplexResult& r, const std::string& why) {
        r.status = SimplexStatus::numerical_failure;
        r.message = why;
        r.iterations = iterations_;
        return r;
    }

    SimplexResult& finish(SimplexResult& r, SimplexStatus status) {
        r.status = status;
        r.iterations = iterations_;
        if (status != SimplexStatus::optimal) return r;
        if (!refactor()) return fail(r, "final refactorization failed");

        std::vector<double> full(cols_.size(), 0.0);
        for (int p = 0; p < m_; ++p) full[basis_[p]] = xb_[p];
        r.x.assign(full.begin(), full.begin() + n_struct_);
        r.objective = 0.0;
        for (int j = 0; j < n_struct_; ++j) r.objective += cost_[j] * r.x[j];

        Eigen::VectorXd cb(m_);
        for (int p = 0; p < m_; ++p) cb[p] = cost_[basis_[p]];
        const Eigen::VectorXd y = btran(cb);
        r.duals.resize(m_);
        for (int i = 0; i < m_; ++i) r.duals[i] = row_sign_[i] * y[i];

        r.dual_infeasibility = 0.0;
        for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
            if (artificial_[j] || position_[j] >= 0) continue;
            r.dual_infeasibility = std::max(r.dual_infeasibility, -(cost_[j] - dot(y, j)));
        }

        std::vector<double> ax(m_, 0.0);
        for (int j = 0; j < n_struct_; ++j)
            for (auto [i, v] : lp_.columns[j]) ax[i] += v * r.x[j];
        r.primal_residual = 0.0;
        for (int i = 0; i < m_; ++i) {
            const double gap = ax[i] - lp_.rhs[i];
            r.primal_residual = std::max(
                r.primal_residual, lp_.sense[i] == RowSense::equal ? std::abs(gap) : std::max(gap, 0.0));
        }
        for (double v : r.x) r.primal_residual = std::max(r.primal_residual, -v);
        return r;
    }

    const LinearProgram& lp_;
    SimplexOptions opt_;
    int m_ = 0;
    int n_struct_ = 0;
    std::vector<double> row_sign_;
    std::vector<double> b_;
    std::vector<double> b_orig_;
    bool perturbed_ = false;
    static constexpr double perturbation_ = 1e-7;
    static constexpr int perturb_after_ = 10;
    std::mt19937_64 rng_{0x5eed};
    std::vector<Column> cols_;
    std::vector<double> cost_;
    std::vector<char> artificial_;
    std::vector<int> slack_of_row_;
    std::vector<int> basis_;
    std::vector<int> good_basis_;
    std::vector<int> position_;
    std::vector<char> rejected_;
    int rejected_count_ = 0;
    int recoveries_ = 0;
    SpMat basis_matrix_;
    mutable Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
    std::vector<Eta> etas_;
    Eigen::VectorXd xb_;
    int iterations_ = 0;
};

}  // namespace

SimplexResult solve_simplex(const LinearProgram& lp, const SimplexOptions& options) {
    if (static_cast<int>(lp.sense.size()) != lp.rows() || lp.cost.size() != lp.columns.size())
        throw std::invalid_argument("solve_simplex: inconsistent problem dimensions");
    for (const auto& col : lp.columns)
        for (auto [i, v] : col)
            if (i < 0 || i >= lp.rows()) throw std::invalid_argument("solve_simplex: row index out of range");
    RevisedSimplex solver(lp, options);
    return solver.run();
}

}  // namespace aoi
