#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <sstream>

#include "gridse/error.hpp"
#include "gridse/estimator.hpp"
#include "gridse/parallel.hpp"
#include "gridse/sparse.hpp"
#include "support.hpp"

namespace gridse {
namespace {

using Entry = SparseSpd::Entry;

SparseSpd tridiagonal(int n) {
    std::vector<Entry> e;
    for (int i = 0; i < n; ++i) {
        e.push_back({i, i, 4.0});
        if (i + 1 < n) e.push_back({i + 1, i, -1.0});
    }
    return SparseSpd::from_entries(n, e);
}

// Random sparse SPD: random symmetric pattern, diagonally dominant values.
SparseSpd random_spd(int n, double density, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(density);
    std::vector<double> row_sum(static_cast<std::size_t>(n), 0.0);
    std::vector<Entry> e;
    for (int j = 0; j < n; ++j) {
        for (int i = j + 1; i < n; ++i) {
            if (!keep(rng)) continue;
            const double v = u(rng);
            e.push_back({i, j, v});
            row_sum[i] += std::abs(v);
            row_sum[j] += std::abs(v);
        }
    }
    for (int i = 0; i < n; ++i) e.push_back({i, i, row_sum[i] + 0.1 + std::abs(u(rng))});
    return SparseSpd::from_entries(n, e);
}

Eigen::MatrixXd dense(const SparseSpd& a) {
    const std::vector<double> d = a.to_dense();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(d.data(), a.order(),
                                                                                                   a.order());
}

Eigen::MatrixXd permuted(const SparseSpd& a, const std::vector<int>& perm) {
    const Eigen::MatrixXd full = dense(a);
    Eigen::MatrixXd c(a.order(), a.order());
    for (int i = 0; i < a.order(); ++i) {
        for (int j = 0; j < a.order(); ++j) c(i, j) = full(perm[i], perm[j]);
    }
    return c;
}

Eigen::MatrixXd lower(const CholeskyFactors& f) {
    const int n = f.symbolic().order;
    const std::vector<double> d = f.dense_lower();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(d.data(), n, n);
}

void expect_valid_schedule(const SymbolicFactor& s) {
    std::vector<int> seen(static_cast<std::size_t>(s.order), 0);
    for (std::size_t l = 0; l < s.schedule.levels.size(); ++l) {
        for (const int j : s.schedule.levels[l]) {
            ++seen[j];
            EXPECT_EQ(s.schedule.level_of[j], static_cast<int>(l));
        }
    }
    for (int j = 0; j < s.order; ++j) {
        EXPECT_EQ(seen[j], 1) << "column " << j;
        const int p = s.etree.parent[j];
        if (p != -1) {
            EXPECT_GT(p, j);
            EXPECT_LT(s.schedule.level_of[j], s.schedule.level_of[p]);
        }
    }
    // Every column a row of L depends on sits in an earlier level.
    for (int i = 0; i < s.order; ++i) {
        for (int q = s.row_ptr[i]; q < s.row_ptr[i + 1]; ++q) {
            const int j = s.col_idx[q];
            if (j != i) EXPECT_LT(s.schedule.level_of[j], s.schedule.level_of[i]);
        }
    }
}

// Exact Cholesky fill of the permuted pattern, by symbolic dense elimination.
std::vector<std::vector<bool>> dense_fill(const Eigen::MatrixXd& c) {
    const auto n = static_cast<std::size_t>(c.rows());
    std::vector<std::vector<bool>> nz(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) nz[i][j] = c(i, j) != 0.0;
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = k + 1; i < n; ++i) {
            if (!nz[i][k]) continue;
            for (std::size_t j = k + 1; j <= i; ++j) {
                if (nz[j][k]) nz[i][j] = true;
            }
        }
    }
    return nz;
}

TEST(Symbolic, TridiagonalChain) {
    const SymbolicFactor s = symbolic_analyze(tridiagonal(5), Ordering::natural);
    EXPECT_EQ(s.etree.parent, (std::vector<int>{1, 2, 3, 4, -1}));
    ASSERT_EQ(s.schedule.levels.size(), 5u);
    for (const auto& level : s.schedule.levels) EXPECT_EQ(level.size(), 1u);
    EXPECT_EQ(s.fill_count(tridiagonal(5)), 0u);
}

TEST(Symbolic, DiagonalIsAForestOfSingletons) {
    const SparseSpd a = SparseSpd::identity(6);
    const SymbolicFactor s = symbolic_analyze(a);
    ASSERT_EQ(s.schedule.levels.size(), 1u);
    EXPECT_EQ(s.schedule.levels[0].size(), 6u);
    EXPECT_EQ(s.fill_count(a), 0u);
}

TEST(Symbolic, StarLeavesFirstHasNoFill) {
    const int k = 6;
    std::vector<Entry> e{{0, 0, 10.0}};
    for (int i = 1; i <= k; ++i) {
        e.push_back({i, i, 2.0});
        e.push_back({i, 0, 1.0});
    }
    const SparseSpd a = SparseSpd::from_entries(k + 1, e);
    std::vector<int> perm;
    for (int i = 1; i <= k; ++i) perm.push_back(i);
    perm.push_back(0);
    const SymbolicFactor s = symbolic_analyze(a, perm);
    EXPECT_EQ(s.fill_count(a), 0u);
    EXPECT_EQ(s.schedule.levels.size(), 2u);
    // The ordering keeps the hub until at most one leaf remains.
    const std::vector<int> md = approximate_minimum_degree_ordering(a);
    EXPECT_GE(std::find(md.begin(), md.end(), 0) - md.begin(), k - 1);
    EXPECT_EQ(symbolic_analyze(a).fill_count(a), 0u);
    // Hub first fills the whole matrix.
    EXPECT_EQ(symbolic_analyze(a, Ordering::natural).fill_count(a), static_cast<std::size_t>(k * (k - 1) / 2));
}

TEST(Symbolic, MissingDiagonalIsStructurallySingular) {
    const SparseSpd a = SparseSpd::from_entries(3, std::vector<Entry>{{0, 0, 1.0}, {2, 1, 1.0}, {2, 2, 1.0}});
    try {
        symbolic_analyze(a);
        FAIL();
    } catch (const UnobservableError& e) {
        EXPECT_EQ(e.columns(), std::vector<int>{1});
    }
}

TEST(Symbolic, FillPatternIsExact) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const SparseSpd a = random_spd(30, 0.08, rng);
        const SymbolicFactor s = symbolic_analyze(a);
        const auto nz = dense_fill(permuted(a, s.perm));
        std::size_t expected = 0;
        for (int i = 0; i < s.order; ++i) {
            for (int j = 0; j <= i; ++j) expected += nz[i][j] ? 1 : 0;
        }
        EXPECT_EQ(s.factor_nnz(), expected);
        for (int j = 0; j < s.order; ++j) {
            for (int p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p) EXPECT_TRUE(nz[s.row_idx[p]][j]);
        }
        expect_valid_schedule(s);
    }
}

TEST(Factorize, IdentityAndTwoByTwo) {
    const SparseSpd eye = SparseSpd::identity(4);
    const CholeskyFactors fi = factorize(eye, std::make_shared<SymbolicFactor>(symbolic_analyze(eye)));
    EXPECT_TRUE(lower(fi).isApprox(Eigen::MatrixXd::Identity(4, 4)));

    const SparseSpd a = SparseSpd::from_entries(2, std::vector<Entry>{{0, 0, 4.0}, {1, 0, 2.0}, {1, 1, 3.0}});
    const CholeskyFactors f = factorize(a, std::make_shared<SymbolicFactor>(symbolic_analyze(a, Ordering::natural)));
    EXPECT_DOUBLE_EQ(f.at(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(f.at(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(f.at(1, 1), std::sqrt(2.0));
    EXPECT_EQ(f.at(0, 1), 0.0);
}

TEST(Factorize, NonPositivePivotNamesColumn) {
    const SparseSpd a =
        SparseSpd::from_entries(3, std::vector<Entry>{{0, 0, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
    try {
        factorize(a, std::make_shared<SymbolicFactor>(symbolic_analyze(a, Ordering::natural)));
        FAIL();
    } catch (const UnobservableError& e) {
        EXPECT_EQ(e.columns(), std::vector<int>{1});
    }
}

void check_factor_and_solve(const SparseSpd& a, std::mt19937_64& rng, ThreadPool* pool) {
    const auto s = std::make_shared<SymbolicFactor>(symbolic_analyze(a));
    expect_valid_schedule(*s);
    const CholeskyFactors f = factorize(a, s, pool);
    const Eigen::MatrixXd l = lower(f);
    const double recon = (l * l.transpose() - permuted(a, s->perm)).cwiseAbs().maxCoeff();
    EXPECT_LE(recon, 1e-12 * a.max_abs());

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> b(static_cast<std::size_t>(a.order()));
    for (double& v : b) v = normal(rng);
    const std::vector<double> x = f.solve(b, pool);
    const std::vector<double> ax = a.multiply(x);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        num += (ax[i] - b[i]) * (ax[i] - b[i]);
        den += b[i] * b[i];
    }
    EXPECT_LE(std::sqrt(num / den), 1e-10);
}

TEST(Factorize, RandomSpdInstances) {
    std::mt19937_64 rng(123);
    ThreadPool pool(4);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 60);
        check_factor_and_solve(random_spd(n, 0.1, rng), rng, trial % 2 ? &pool : nullptr);
    }
}

TEST(Factorize, GainMatricesOfBundledCases) {
    std::mt19937_64 rng(7);
    for (const char* name : {"case14", "case118"}) {
        const NetworkGraph g = test::load_case(name);
        const GainSystem gains =
            build_gain_system(MeasurementModel(g, test::exact_measurements(g)), StateVector::flat(g.bus_count()));
        check_factor_and_solve(gains.active.matrix, rng, nullptr);
        check_factor_and_solve(gains.reactive.matrix, rng, nullptr);
    }
}

TEST(Solve, ZeroAndIdentity) {
    const SparseSpd eye = SparseSpd::identity(5);
    const CholeskyFactors f = factorize(eye, std::make_shared<SymbolicFactor>(symbolic_analyze(eye)));
    const std::vector<double> b{1.0, -2.0, 3.5, 0.0, 7.25};
    EXPECT_EQ(f.solve(b), b);
    std::mt19937_64 rng(3);
    const SparseSpd a = random_spd(40, 0.1, rng);
    const CholeskyFactors fa = factorize(a, std::make_shared<SymbolicFactor>(symbolic_analyze(a)));
    for (const double v : fa.solve(std::vector<double>(40, 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(Solve, MatchesDenseOracle) {
    std::mt19937_64 rng(50);
    const SparseSpd a = random_spd(50, 0.1, rng);
    const CholeskyFactors f = factorize(a, std::make_shared<SymbolicFactor>(symbolic_analyze(a)));
    Eigen::VectorXd b = Eigen::VectorXd::Random(50);
    const Eigen::VectorXd want = dense(a).llt().solve(b);
    const std::vector<double> got = f.solve(std::vector<double>(b.data(), b.data() + b.size()));
    for (int i = 0; i < 50; ++i) EXPECT_NEAR(got[i], want[i], 1e-10 * want.cwiseAbs().maxCoeff());
}

TEST(Solve, WorkerCountDoesNotChangeResults) {
    std::mt19937_64 rng(8);
    const SparseSpd a = random_spd(400, 0.01, rng);
    const auto s = std::make_shared<SymbolicFactor>(symbolic_analyze(a));
    std::vector<double> b(400);
    for (double& v : b) v = std::normal_distribution<double>(0.0, 1.0)(rng);
    const CholeskyFactors serial = factorize(a, s);
    const std::vector<double> x = serial.solve(b);
    for (const std::size_t workers : {2u, 4u}) {
        ThreadPool pool(workers);
        const CholeskyFactors parallel = factorize(a, s, &pool);
        EXPECT_EQ(parallel.values(), serial.values());
        EXPECT_EQ(parallel.solve(b, &pool), x);
    }
}

TEST(MatrixMarket, RoundTrip) {
    std::mt19937_64 rng(4);
    const SparseSpd a = random_spd(25, 0.2, rng);
    std::stringstream text;
    write_matrix_market(a, text);
    EXPECT_EQ(text.str().rfind("%%MatrixMarket matrix coordinate real symmetric", 0), 0u);
    EXPECT_EQ(read_matrix_market(text), a);
    std::istringstream bad("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n");
    EXPECT_THROW(read_matrix_market(bad), InputError);
}

}  // namespace
}  // namespace gridse
