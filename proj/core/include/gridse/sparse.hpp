#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace gridse {

class ThreadPool;

/// Symmetric matrix stored as its lower triangle in compressed columns.
/// Row indices inside a column are ascending and start with the diagonal.
class SparseSpd {
  public:
    SparseSpd() = default;
    SparseSpd(int order, std::vector<int> col_ptr, std::vector<int> row_idx, std::vector<double> values);

    struct Entry {
        int row;
        int col;
        double value;
    };
    /// Duplicates are summed in input order; entries above the diagonal are
    /// mirrored into the lower triangle.
    static SparseSpd from_entries(int order, std::span<const Entry> entries);
    static SparseSpd identity(int order);

    int order() const noexcept { return order_; }
    std::size_t nnz() const noexcept { return values_.size(); }
    const std::vector<int>& col_ptr() const noexcept { return col_ptr_; }
    const std::vector<int>& row_idx() const noexcept { return row_idx_; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// A(i, j) for either triangle.
    double at(int i, int j) const;
    std::vector<double> multiply(std::span<const double> x) const;
    std::vector<double> to_dense() const;  // row-major order x order
    double max_abs() const;

    friend bool operator==(const SparseSpd&, const SparseSpd&) = default;

  private:
    int order_ = 0;
    std::vector<int> col_ptr_{0};
    std::vector<int> row_idx_;
    std::vector<double> values_;
};

/// parent[j] > j, or -1 for a root.
struct EliminationTree {
    std::vector<int> parent;
};

/// Columns grouped by height in the elimination tree: leaves in level 0,
/// every column strictly above all of its descendants.
struct LevelSchedule {
    std::vector<std::vector<int>> levels;
    std::vector<int> level_of;
};

/// Everything that depends only on the sparsity pattern. Indices refer to
/// the permuted matrix C = P A P^T, with perm[new] = old.
struct SymbolicFactor {
    int order = 0;
    std::vector<int> perm;
    std::vector<int> inverse_perm;
    EliminationTree etree;
    LevelSchedule schedule;
    // Pattern of L by columns (diagonal first) and by rows (diagonal last).
    std::vector<int> col_ptr;
    std::vector<int> row_idx;
    std::vector<int> row_ptr;
    std::vector<int> col_idx;
    std::vector<int> row_to_col_entry;  // CSR slot -> CSC slot

    std::size_t factor_nnz() const { return row_idx.size(); }
    /// Entries of L that are not entries of C.
    std::size_t fill_count(const SparseSpd& a) const;
};

enum class Ordering { natural, approximate_minimum_degree };

/// Approximate minimum degree ordering (SuiteSparse AMD) of the pattern.
/// Deterministic for a given pattern. perm[new] = old.
std::vector<int> approximate_minimum_degree_ordering(const SparseSpd& a);

/// Fill pattern, elimination tree and level schedule. Throws
/// UnobservableError when a column has no diagonal entry.
SymbolicFactor symbolic_analyze(const SparseSpd& a, Ordering ordering = Ordering::approximate_minimum_degree);
SymbolicFactor symbolic_analyze(const SparseSpd& a, std::vector<int> perm);

/// Numeric Cholesky factor L with L L^T = P A P^T.
class CholeskyFactors {
  public:
    CholeskyFactors(std::shared_ptr<const SymbolicFactor> symbolic, std::vector<double> values)
        : symbolic_(std::move(symbolic)), values_(std::move(values)) {}

    const SymbolicFactor& symbolic() const noexcept { return *symbolic_; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// L(i, j) in permuted indices; zero outside the pattern.
    double at(int i, int j) const;
    std::vector<double> dense_lower() const;  // row-major, permuted indices

    /// Solves A x = b by level-scheduled forward and backward substitution.
    std::vector<double> solve(std::span<const double> b, ThreadPool* pool = nullptr) const;

  private:
    std::shared_ptr<const SymbolicFactor> symbolic_;
    std::vector<double> values_;
};

/// Relative pivot threshold: pivots at or below this times the largest
/// diagonal entry are rejected.
inline constexpr double kPivotTolerance = 1e-12;

/// Left-looking Cholesky, one elimination-tree level at a time. Columns of a
/// level are independent and may run on `pool`; every entry is accumulated
/// in ascending column order, so results do not depend on the worker count.
/// Throws UnobservableError naming the failing columns (original indices).
CholeskyFactors factorize(const SparseSpd& a, std::shared_ptr<const SymbolicFactor> symbolic,
                          ThreadPool* pool = nullptr);

/// Coordinate text: "%%MatrixMarket matrix coordinate real symmetric", a
/// size line, then 1-based "row col value" lines of the lower triangle.
void write_matrix_market(const SparseSpd& a, std::ostream& out);
SparseSpd read_matrix_market(std::istream& in);

}  // namespace gridse
