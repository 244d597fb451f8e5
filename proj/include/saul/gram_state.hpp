#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "saul/errors.hpp"
#include "saul/sample.hpp"

namespace saul {

// Regularized Gram matrix A = lambda*I + sum x x^T together with an explicitly
// maintained inverse, b = sum y x and w = A^{-1} b.
//
// Updates and downdates go through Sherman-Morrison in O(d^2). The inverse is
// recomputed from A by Cholesky every `refresh_period` downdates to bound drift.
// Single writer; concurrent const access is fine when no mutation is in flight.
class GramState {
public:
    static constexpr double kDenominatorTolerance = 1e-10;
    static constexpr std::size_t kDefaultRefreshPeriod = 1024;

    GramState(Eigen::Index dim, double lambda, std::size_t refresh_period = kDefaultRefreshPeriod)
        : lambda_(lambda), refresh_period_(refresh_period) {
        if (dim < 1) throw InvalidArgument("dimension must be positive");
        if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
        if (refresh_period == 0) throw InvalidArgument("refresh period must be positive");
        gram_ = lambda * Matrix::Identity(dim, dim);
        gram_inv_ = (1.0 / lambda) * Matrix::Identity(dim, dim);
        b_ = Vector::Zero(dim);
        w_ = Vector::Zero(dim);
    }

    // Rebuilds a state from stored parts (deserialization, fault injection in tests).
    static GramState from_parts(double lambda, Matrix gram, Matrix gram_inv, Vector b, Vector w,
                                std::size_t refresh_period = kDefaultRefreshPeriod,
                                std::size_t downdates_since_refresh = 0) {
        const auto d = gram.rows();
        if (gram.cols() != d || gram_inv.rows() != d || gram_inv.cols() != d || b.size() != d || w.size() != d) {
            throw InvalidArgument("GramState parts have inconsistent shapes");
        }
        GramState s(d, lambda, refresh_period);
        s.gram_ = std::move(gram);
        s.gram_inv_ = std::move(gram_inv);
        s.b_ = std::move(b);
        s.w_ = std::move(w);
        s.downdates_since_refresh_ = downdates_since_refresh;
        return s;
    }

    Eigen::Index dim() const { return gram_.rows(); }
    double lambda() const { return lambda_; }
    const Matrix& gram() const { return gram_; }
    const Matrix& gram_inv() const { return gram_inv_; }
    const Vector& b() const { return b_; }
    const Vector& weight() const { return w_; }
    std::size_t downdates_since_refresh() const { return downdates_since_refresh_; }
    std::size_t refresh_period() const { return refresh_period_; }

    // A += x x^T, b += y x
    void update(const Vector& x, double y) {
        check_dim(x);
        check_unit_ball(x);
        const Vector u = gram_inv_ * x;
        const double r = x.dot(u);
        gram_.noalias() += x * x.transpose();
        gram_inv_.noalias() -= (u * u.transpose()) / (1.0 + r);
        b_.noalias() += y * x;
        w_.noalias() = gram_inv_ * b_;
    }

    // A -= x x^T, b -= y x. The caller guarantees (x, y) was previously added.
    void downdate(const Vector& x, double y) {
        check_dim(x);
        const Vector u = gram_inv_ * x;
        const double denom = 1.0 - x.dot(u);
        if (!(denom > kDenominatorTolerance)) {
            throw SingularDowndate("downdate denominator " + std::to_string(denom) +
                                   " below tolerance; point not present in the Gram matrix");
        }
        gram_.noalias() -= x * x.transpose();
        gram_inv_.noalias() += (u * u.transpose()) / denom;
        b_.noalias() -= y * x;
        ++downdates_since_refresh_;
        if (downdates_since_refresh_ >= refresh_period_) {
            refresh_inverse();
        } else {
            w_.noalias() = gram_inv_ * b_;
        }
    }

    // x^T A^{-1} x
    double leverage(const Vector& x) const {
        check_dim(x);
        return x.dot(gram_inv_ * x);
    }

    // Bilinear form x1^T A^{-1} x2.
    double inner(const Vector& x1, const Vector& x2) const {
        check_dim(x1);
        check_dim(x2);
        return x1.dot(gram_inv_ * x2);
    }

    void refresh_inverse() {
        const auto d = dim();
        Eigen::LLT<Matrix> llt(gram_);
        if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0) {
            throw CorruptedState("Gram matrix is not positive definite");
        }
        gram_inv_ = llt.solve(Matrix::Identity(d, d));
        gram_inv_ = 0.5 * (gram_inv_ + gram_inv_.transpose()).eval();
        w_.noalias() = gram_inv_ * b_;
        downdates_since_refresh_ = 0;
    }

    // log det(A) - d log(lambda)
    double log_det_ratio() const {
        Eigen::LLT<Matrix> llt(gram_ / lambda_);
        if (llt.info() != Eigen::Success) throw CorruptedState("Gram matrix is not positive definite");
        return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }

    // Number of stored scalars: A, A^{-1}, b and w.
    std::size_t stored_scalars() const {
        const auto d = static_cast<std::size_t>(dim());
        return 2 * d * d + 2 * d;
    }

private:
    void check_dim(const Vector& x) const {
        if (x.size() != dim()) {
            throw InvalidArgument("vector dimension " + std::to_string(x.size()) + " does not match " +
                                  std::to_string(dim()));
        }
    }

    double lambda_;
    std::size_t refresh_period_;
    Matrix gram_;
    Matrix gram_inv_;
    Vector b_;
    Vector w_;
    std::size_t downdates_since_refresh_ = 0;
};

// Change in w^T probe caused by removing (x_i, y_i) from `s`, via the Sherman-Morrison
// expansion rather than by performing the downdate.
inline double deletion_drift(const GramState& s, const Vector& x_i, double y_i, const Vector& probe) {
    const double r_i = s.leverage(x_i);
    const double cross = s.inner(x_i, probe);
    const double wx_i = s.weight().dot(x_i);
    const double denom = 1.0 - r_i;
    return wx_i * cross / denom - y_i * cross - y_i * r_i * cross / denom;
}

}  // namespace saul
