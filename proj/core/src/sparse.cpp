#include "gridse/sparse.hpp"

#include <suitesparse/amd.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <iterator>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "gridse/error.hpp"
#include "gridse/parallel.hpp"
#include "gridse/text.hpp"

namespace gridse {

SparseSpd::SparseSpd(int order, std::vector<int> col_ptr, std::vector<int> row_idx,
                     std::vector<double> values)
    : order_(order), col_ptr_(std::move(col_ptr)), row_idx_(std::move(row_idx)), values_(std::move(values)) {
    if (order_ < 0 || col_ptr_.size() != static_cast<std::size_t>(order_) + 1 || col_ptr_.front() != 0 ||
        static_cast<std::size_t>(col_ptr_.back()) != row_idx_.size() || row_idx_.size() != values_.size()) {
        throw InputError("inconsistent compressed-column arrays");
    }
    for (int j = 0; j < order_; ++j) {
        for (int p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
            const int i = row_idx_[p];
            if (i < j || i >= order_ || (p > col_ptr_[j] && row_idx_[p - 1] >= i)) {
                throw InputError("column " + std::to_string(j) + " is not a sorted lower triangle");
            }
        }
    }
}

SparseSpd SparseSpd::from_entries(int order, std::span<const Entry> entries) {
    std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(order));
    for (const Entry& e : entries) {
        if (e.row < 0 || e.col < 0 || e.row >= order || e.col >= order) {
            throw InputError("matrix entry out of range");
        }
        const int r = std::max(e.row, e.col);
        const int c = std::min(e.row, e.col);
        cols[static_cast<std::size_t>(c)].emplace_back(r, e.value);
    }
    std::vector<int> col_ptr{0};
    std::vector<int> row_idx;
    std::vector<double> values;
    for (auto& col : cols) {
        std::stable_sort(col.begin(), col.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t p = 0; p < col.size(); ++p) {
            if (!row_idx.empty() && static_cast<int>(row_idx.size()) > col_ptr.back() &&
                row_idx.back() == col[p].first) {
                values.back() += col[p].second;
            } else {
                row_idx.push_back(col[p].first);
                values.push_back(col[p].second);
            }
        }
        col_ptr.push_back(static_cast<int>(row_idx.size()));
    }
    return SparseSpd(order, std::move(col_ptr), std::move(row_idx), std::move(values));
}

SparseSpd SparseSpd::identity(int order) {
    std::vector<int> col_ptr(static_cast<std::size_t>(order) + 1);
    std::iota(col_ptr.begin(), col_ptr.end(), 0);
    std::vector<int> rows(static_cast<std::size_t>(order));
    std::iota(rows.begin(), rows.end(), 0);
    return SparseSpd(order, std::move(col_ptr), std::move(rows), std::vector<double>(static_cast<std::size_t>(order), 1.0));
}

double SparseSpd::at(int i, int j) const {
    const int r = std::max(i, j);
    const int c = std::min(i, j);
    const auto first = row_idx_.begin() + col_ptr_[c];
    const auto last = row_idx_.begin() + col_ptr_[c + 1];
    const auto it = std::lower_bound(first, last, r);
    return it != last && *it == r ? values_[static_cast<std::size_t>(it - row_idx_.begin())] : 0.0;
}

std::vector<double> SparseSpd::multiply(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(order_), 0.0);
    for (int j = 0; j < order_; ++j) {
        for (int p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
            const int i = row_idx_[p];
            y[i] += values_[p] * x[j];
            if (i != j) y[j] += values_[p] * x[i];
        }
    }
    return y;
}

std::vector<double> SparseSpd::to_dense() const {
    const auto n = static_cast<std::size_t>(order_);
    std::vector<double> d(n * n, 0.0);
    for (int j = 0; j < order_; ++j) {
        for (int p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
            const auto i = static_cast<std::size_t>(row_idx_[p]);
            d[i * n + j] = values_[p];
            d[j * n + i] = values_[p];
        }
    }
    return d;
}

double SparseSpd::max_abs() const {
    double m = 0.0;
    for (const double v : values_) m = std::max(m, std::abs(v));
    return m;
}

std::vector<int> approximate_minimum_degree_ordering(const SparseSpd& a) {
    const int n = a.order();
    std::vector<int> perm(static_cast<std::size_t>(n));
    if (a.nnz() == 0) {
        std::iota(perm.begin(), perm.end(), 0);
        return perm;
    }
    double control[AMD_CONTROL];
    double info[AMD_INFO];
    amd_defaults(control);
    const int status = amd_order(n, a.col_ptr().data(), a.row_idx().data(), perm.data(), control, info);
    if (status == AMD_OUT_OF_MEMORY) throw std::bad_alloc();
    if (status != AMD_OK && status != AMD_OK_BUT_JUMBLED) throw InputError("matrix pattern rejected by AMD ordering");
    return perm;
}

std::size_t SymbolicFactor::fill_count(const SparseSpd& a) const {
    std::size_t original = 0;
    for (int j = 0; j < a.order(); ++j) original += static_cast<std::size_t>(a.col_ptr()[j + 1] - a.col_ptr()[j]);
    return factor_nnz() - original;
}

SymbolicFactor symbolic_analyze(const SparseSpd& a, Ordering ordering) {
    if (ordering == Ordering::natural) {
        std::vector<int> perm(static_cast<std::size_t>(a.order()));
        std::iota(perm.begin(), perm.end(), 0);
        return symbolic_analyze(a, std::move(perm));
    }
    return symbolic_analyze(a, approximate_minimum_degree_ordering(a));
}

SymbolicFactor symbolic_analyze(const SparseSpd& a, std::vector<int> perm) {
    const int n = a.order();
    SymbolicFactor s;
    s.order = n;
    if (perm.size() != static_cast<std::size_t>(n)) throw InputError("permutation size mismatch");
    s.inverse_perm.assign(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < n; ++k) {
        const int old = perm[k];
        if (old < 0 || old >= n || s.inverse_perm[old] != -1) throw InputError("invalid permutation");
        s.inverse_perm[old] = k;
    }
    s.perm = std::move(perm);

    std::vector<int> missing_diagonal;
    for (int j = 0; j < n; ++j) {
        if (a.col_ptr()[j] == a.col_ptr()[j + 1] || a.row_idx()[a.col_ptr()[j]] != j) missing_diagonal.push_back(j);
    }
    if (!missing_diagonal.empty()) {
        throw UnobservableError("matrix is structurally singular", std::move(missing_diagonal));
    }

    // Upper pattern of C = P A P^T: for each column k, the rows i < k.
    std::vector<int> up_ptr(static_cast<std::size_t>(n) + 1, 0);
    for (int j = 0; j < n; ++j) {
        for (int p = a.col_ptr()[j] + 1; p < a.col_ptr()[j + 1]; ++p) {
            ++up_ptr[std::max(s.inverse_perm[a.row_idx()[p]], s.inverse_perm[j]) + 1];
        }
    }
    for (int k = 0; k < n; ++k) up_ptr[k + 1] += up_ptr[k];
    std::vector<int> up_idx(static_cast<std::size_t>(up_ptr[n]));
    {
        std::vector<int> fill(up_ptr.begin(), up_ptr.end() - 1);
        for (int j = 0; j < n; ++j) {
            for (int p = a.col_ptr()[j] + 1; p < a.col_ptr()[j + 1]; ++p) {
                const int x = s.inverse_perm[a.row_idx()[p]];
                const int y = s.inverse_perm[j];
                up_idx[fill[std::max(x, y)]++] = std::min(x, y);
            }
        }
    }

    // 1) elimination tree, with path-compressed ancestors
    s.etree.parent.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> ancestor(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < n; ++k) {
        for (int p = up_ptr[k]; p < up_ptr[k + 1]; ++p) {
            int i = up_idx[p];
            while (ancestor[i] != -1 && ancestor[i] != k) {
                const int next = ancestor[i];
                ancestor[i] = k;
                i = next;
            }
            if (ancestor[i] == -1) {
                ancestor[i] = k;
                s.etree.parent[i] = k;
            }
        }
    }

    // 2) fill: row k of L is the union of tree paths from its neighbours up
    // to k. One pass counts, a second writes the rows.
    std::vector<int> mark(static_cast<std::size_t>(n), -1);
    std::vector<int> col_count(static_cast<std::size_t>(n), 1);
    s.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int k = 0; k < n; ++k) {
        mark[k] = k;
        int count = 1;
        for (int p = up_ptr[k]; p < up_ptr[k + 1]; ++p) {
            for (int i = up_idx[p]; i != -1 && mark[i] != k; i = s.etree.parent[i]) {
                mark[i] = k;
                ++col_count[i];
                ++count;
            }
        }
        s.row_ptr[k + 1] = s.row_ptr[k] + count;
    }
    s.col_idx.resize(static_cast<std::size_t>(s.row_ptr[n]));
    std::fill(mark.begin(), mark.end(), -1);
    for (int k = 0; k < n; ++k) {
        mark[k] = k;
        int slot = s.row_ptr[k];
        for (int p = up_ptr[k]; p < up_ptr[k + 1]; ++p) {
            for (int i = up_idx[p]; i != -1 && mark[i] != k; i = s.etree.parent[i]) {
                mark[i] = k;
                s.col_idx[slot++] = i;
            }
        }
        std::sort(s.col_idx.begin() + s.row_ptr[k], s.col_idx.begin() + slot);
        s.col_idx[slot] = k;
    }

    s.col_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int j = 0; j < n; ++j) s.col_ptr[j + 1] = s.col_ptr[j] + col_count[j];
    s.row_idx.resize(static_cast<std::size_t>(s.col_ptr[n]));
    s.row_to_col_entry.resize(s.col_idx.size());
    std::vector<int> next(s.col_ptr.begin(), s.col_ptr.end() - 1);
    for (int k = 0; k < n; ++k) {
        for (int slot = s.row_ptr[k]; slot < s.row_ptr[k + 1]; ++slot) {
            const int j = s.col_idx[slot];
            s.row_idx[next[j]] = k;
            s.row_to_col_entry[slot] = next[j]++;
        }
    }

    // 3) levels by height in the tree
    s.schedule.level_of.assign(static_cast<std::size_t>(n), 0);
    int height = n > 0 ? 1 : 0;
    for (int j = 0; j < n; ++j) {
        const int p = s.etree.parent[j];
        if (p != -1) s.schedule.level_of[p] = std::max(s.schedule.level_of[p], s.schedule.level_of[j] + 1);
        height = std::max(height, s.schedule.level_of[j] + 1);
    }
    s.schedule.levels.assign(static_cast<std::size_t>(height), {});
    for (int j = 0; j < n; ++j) s.schedule.levels[s.schedule.level_of[j]].push_back(j);
    return s;
}

double CholeskyFactors::at(int i, int j) const {
    if (i < j) return 0.0;
    const SymbolicFactor& s = *symbolic_;
    const auto first = s.row_idx.begin() + s.col_ptr[j];
    const auto last = s.row_idx.begin() + s.col_ptr[j + 1];
    const auto it = std::lower_bound(first, last, i);
    return it != last && *it == i ? values_[static_cast<std::size_t>(it - s.row_idx.begin())] : 0.0;
}

std::vector<double> CholeskyFactors::dense_lower() const {
    const SymbolicFactor& s = *symbolic_;
    const auto n = static_cast<std::size_t>(s.order);
    std::vector<double> d(n * n, 0.0);
    for (int j = 0; j < s.order; ++j) {
        for (int p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p) d[static_cast<std::size_t>(s.row_idx[p]) * n + j] = values_[p];
    }
    return d;
}

namespace {

// Levels narrower than this run inline; the barrier costs more than it saves.
constexpr std::size_t kParallelLevelWidth = 64;

void for_level(ThreadPool* pool, const std::vector<int>& level,
               const std::function<void(std::size_t, std::size_t)>& fn) {
    if (level.size() < kParallelLevelWidth) {
        fn(0, level.size());
    } else {
        for_each_chunk(pool, level.size(), fn, kParallelLevelWidth / 4);
    }
}

}  // namespace

CholeskyFactors factorize(const SparseSpd& a, std::shared_ptr<const SymbolicFactor> symbolic, ThreadPool* pool) {
    const SymbolicFactor& s = *symbolic;
    const int n = s.order;
    if (a.order() != n) throw InputError("matrix order does not match its symbolic factor");

    double max_diag = 0.0;
    for (int j = 0; j < n; ++j) max_diag = std::max(max_diag, std::abs(a.at(j, j)));
    const double tolerance = kPivotTolerance * max_diag;
    std::vector<int> tiny;
    for (int j = 0; j < n; ++j) {
        if (!(a.at(j, j) > tolerance)) tiny.push_back(j);
    }
    if (!tiny.empty()) throw UnobservableError("zero or negative diagonal in gain matrix", std::move(tiny));

    // Scatter P A P^T into the factor pattern.
    std::vector<double> values(s.row_idx.size(), 0.0);
    for (int oj = 0; oj < n; ++oj) {
        for (int p = a.col_ptr()[oj]; p < a.col_ptr()[oj + 1]; ++p) {
            const int ni = s.inverse_perm[a.row_idx()[p]];
            const int nj = s.inverse_perm[oj];
            const int r = std::max(ni, nj);
            const int c = std::min(ni, nj);
            const auto first = s.row_idx.begin() + s.col_ptr[c];
            const auto last = s.row_idx.begin() + s.col_ptr[c + 1];
            values[static_cast<std::size_t>(std::lower_bound(first, last, r) - s.row_idx.begin())] += a.values()[p];
        }
    }

    std::vector<int> failed;
    std::mutex failed_mutex;
    for (const auto& level : s.schedule.levels) {
        for_level(pool, level, [&](std::size_t begin, std::size_t end) {
            thread_local std::vector<double> work;
            if (work.size() < static_cast<std::size_t>(n)) work.assign(static_cast<std::size_t>(n), 0.0);
            for (std::size_t li = begin; li < end; ++li) {
                const int j = level[li];
                for (int p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p) work[s.row_idx[p]] = values[p];
                // Row j of L, excluding the diagonal, in ascending column order.
                for (int q = s.row_ptr[j]; q < s.row_ptr[j + 1] - 1; ++q) {
                    const int k = s.col_idx[q];
                    const int pjk = s.row_to_col_entry[q];
                    const double ljk = values[pjk];
                    for (int p = pjk; p < s.col_ptr[k + 1]; ++p) work[s.row_idx[p]] -= values[p] * ljk;
                }
                const double pivot = work[j];
                if (!(pivot > tolerance)) {
                    for (int p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p) work[s.row_idx[p]] = 0.0;
                    std::lock_guard lock(failed_mutex);
                    failed.push_back(s.perm[j]);
                    continue;
                }
                const double ljj = std::sqrt(pivot);
                values[s.col_ptr[j]] = ljj;
                work[j] = 0.0;
                for (int p = s.col_ptr[j] + 1; p < s.col_ptr[j + 1]; ++p) {
                    const int i = s.row_idx[p];
                    values[p] = work[i] / ljj;
                    work[i] = 0.0;
                }
            }
        });
        if (!failed.empty()) {
            std::sort(failed.begin(), failed.end());
            throw UnobservableError("non-positive pivot during Cholesky factorization", std::move(failed));
        }
    }
    return CholeskyFactors(std::move(symbolic), std::move(values));
}

std::vector<double> CholeskyFactors::solve(std::span<const double> b, ThreadPool* pool) const {
    const SymbolicFactor& s = *symbolic_;
    const int n = s.order;
    if (b.size() != static_cast<std::size_t>(n)) throw InputError("right-hand side size mismatch");
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[i] = b[s.perm[i]];

    // L y = P b, rows of a level only read rows of earlier levels.
    for (const auto& level : s.schedule.levels) {
        for_level(pool, level, [&](std::size_t begin, std::size_t end) {
            for (std::size_t li = begin; li < end; ++li) {
                const int j = level[li];
                double sum = y[j];
                const int diag_slot = s.row_ptr[j + 1] - 1;
                for (int q = s.row_ptr[j]; q < diag_slot; ++q) sum -= values_[s.row_to_col_entry[q]] * y[s.col_idx[q]];
                y[j] = sum / values_[s.row_to_col_entry[diag_slot]];
            }
        });
    }
    // L^T x = y, ancestors first.
    for (auto level = s.schedule.levels.rbegin(); level != s.schedule.levels.rend(); ++level) {
        const auto& cols = *level;
        for_level(pool, cols, [&](std::size_t begin, std::size_t end) {
            for (std::size_t li = begin; li < end; ++li) {
                const int j = cols[li];
                double sum = y[j];
                for (int p = s.col_ptr[j] + 1; p < s.col_ptr[j + 1]; ++p) sum -= values_[p] * y[s.row_idx[p]];
                y[j] = sum / values_[s.col_ptr[j]];
            }
        });
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[s.perm[i]] = y[i];
    return x;
}

void write_matrix_market(const SparseSpd& a, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << a.order() << ' ' << a.order() << ' ' << a.nnz() << '\n';
    for (int j = 0; j < a.order(); ++j) {
        for (int p = a.col_ptr()[j]; p < a.col_ptr()[j + 1]; ++p) {
            out << a.row_idx()[p] + 1 << ' ' << j + 1 << ' ' << format_double(a.values()[p]) << '\n';
        }
    }
}

SparseSpd read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
        throw InputError("missing MatrixMarket header");
    }
    {
        std::istringstream header(line);
        std::string banner, object, format, field, symmetry;
        header >> banner >> object >> format >> field >> symmetry;
        if (object != "matrix" || format != "coordinate" || field != "real" || symmetry != "symmetric") {
            throw InputError("only coordinate real symmetric MatrixMarket files are supported");
        }
    }
    do {
        if (!std::getline(in, line)) throw InputError("missing MatrixMarket size line");
    } while (line.empty() || line[0] == '%');
    std::istringstream size_line(line);
    int rows = 0, cols = 0;
    std::size_t nnz = 0;
    if (!(size_line >> rows >> cols >> nnz) || rows != cols) throw InputError("bad MatrixMarket size line");
    std::vector<SparseSpd::Entry> entries;
    entries.reserve(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
        int i = 0, j = 0;
        double v = 0.0;
        if (!(in >> i >> j >> v)) throw InputError("truncated MatrixMarket data");
        entries.push_back({i - 1, j - 1, v});
    }
    return SparseSpd::from_entries(rows, entries);
}

}  // namespace gridse
