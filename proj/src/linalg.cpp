#include "isgd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace isgd {

bool is_symmetric(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol * scale) return false;
    return true;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

} // namespace

SymmetricEigen jacobi_eigen(const Matrix& input, double tol, int max_sweeps) {
    if (input.rows() != input.cols())
        throw std::invalid_argument("jacobi_eigen: matrix must be square");
    if (!is_symmetric(input, 1e-8))
        throw std::invalid_argument("jacobi_eigen: matrix must be symmetric");

    const Eigen::Index p = input.rows();
    Matrix a = 0.5 * (input + input.transpose());
    Matrix v = Matrix::Identity(p, p);
    const double norm = std::max(a.norm(), 1e-300);

    SymmetricEigen result;
    for (result.sweeps = 0; result.sweeps < max_sweeps; ++result.sweeps) {
        if (off_diagonal_norm(a) <= tol * norm) break;
        for (Eigen::Index r = 0; r < p - 1; ++r) {
            for (Eigen::Index c = r + 1; c < p; ++c) {
                const double apq = a(r, c);
                if (apq == 0.0) continue;
                // Rotation angle that zeroes a(r, c), in the numerically
                // stable t = s/c parameterization.
                const double theta = (a(c, c) - a(r, r)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cs = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * cs;
                const double tau = sn / (1.0 + cs);

                const double arr = a(r, r);
                const double acc = a(c, c);
                a(r, r) = arr - t * apq;
                a(c, c) = acc + t * apq;
                a(r, c) = 0.0;
                a(c, r) = 0.0;
                for (Eigen::Index k = 0; k < p; ++k) {
                    if (k != r && k != c) {
                        const double akr = a(k, r);
                        const double akc = a(k, c);
                        a(k, r) = a(r, k) = akr - sn * (akc + tau * akr);
                        a(k, c) = a(c, k) = akc + sn * (akr - tau * akc);
                    }
                    const double vkr = v(k, r);
                    const double vkc = v(k, c);
                    v(k, r) = vkr - sn * (vkc + tau * vkr);
                    v(k, c) = vkc + sn * (vkr - tau * vkc);
                }
            }
        }
    }
    if (off_diagonal_norm(a) > tol * norm)
        throw std::runtime_error("jacobi_eigen: did not converge");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    result.values.resize(p);
    result.vectors.resize(p, p);
    for (Eigen::Index k = 0; k < p; ++k) {
        result.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
        result.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
    }
    return result;
}

} // namespace isgd
