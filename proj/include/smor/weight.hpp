#pragma once

#include <optional>

#include "smor/linalg.hpp"

namespace smor {

/// SPD weight X defining <x,y>_X = x^T X y. A default-constructed weight of
/// dimension m is the identity and performs no arithmetic.
class WeightMatrix {
public:
    WeightMatrix() = default;

    static WeightMatrix identity(Index m) {
        WeightMatrix w;
        w.dim_ = m;
        return w;
    }

    explicit WeightMatrix(SpdMatrix x) : dim_(x.size()), x_(std::move(x)) {}

    Index size() const { return dim_; }
    bool is_identity() const { return !x_.has_value(); }
    const SpdMatrix& spd() const { return *x_; }

    Matrix matrix() const { return is_identity() ? Matrix::Identity(dim_, dim_) : x_->matrix(); }

    /// X·v
    template <typename Derived>
    Matrix apply(const Eigen::MatrixBase<Derived>& v) const {
        require(v.rows() == dim_, "weight: dimension mismatch");
        if (is_identity()) return v;
        return x_->matrix() * v;
    }

    /// X^{-1}·v
    template <typename Derived>
    Matrix solve(const Eigen::MatrixBase<Derived>& v) const {
        require(v.rows() == dim_, "weight: dimension mismatch");
        if (is_identity()) return v;
        return x_->solve(v);
    }

    double inner(const Vector& x, const Vector& y) const {
        require(x.size() == dim_ && y.size() == dim_, "x_inner: dimension mismatch");
        if (is_identity()) return x.dot(y);
        return x.dot(x_->matrix() * y);
    }

    double norm(const Vector& x) const { return std::sqrt(std::max(inner(x, x), 0.0)); }

private:
    Index dim_ = 0;
    std::optional<SpdMatrix> x_;
};

}  // namespace smor
