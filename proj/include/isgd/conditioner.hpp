#pragma once

#include <stdexcept>
#include <string>

#include "isgd/linalg.hpp"

namespace isgd {

/// Condition matrix C_n. Identity and Fixed are the static choices the
/// 1/n-rate theory covers; AdaGradDiag and AmariFisher carry the mutable
/// state of the corresponding adaptive procedures.
struct Conditioner {
    enum class Kind { Identity, Fixed, AdaGradDiag, AmariFisher };

    Kind kind = Kind::Identity;

    Matrix fixed;         // Fixed: symmetric positive-definite
    Vector adagrad_accum; // AdaGradDiag: accumulated squared gradients, >= 0
    double epsilon = 0.0; // AdaGradDiag denominator offset
    Matrix amari_cinv;    // AmariFisher: running estimate of C^-1
    double a1 = 1.0;      // AmariFisher rate a_n = a1 / n
    double ridge = 1e-8;  // AmariFisher ridge when C^-1 is singular

    static Conditioner identity() { return {}; }

    static Conditioner make_fixed(const Matrix& c) {
        if (!is_symmetric(c)) throw std::invalid_argument("conditioner: fixed C must be symmetric");
        if (jacobi_eigen(c).values.minCoeff() <= 0)
            throw std::invalid_argument("conditioner: fixed C must be positive-definite");
        Conditioner cond;
        cond.kind = Kind::Fixed;
        cond.fixed = c;
        return cond;
    }

    static Conditioner adagrad(Eigen::Index p, double epsilon = 0.0) {
        if (epsilon < 0) throw std::invalid_argument("conditioner: adagrad epsilon must be >= 0");
        Conditioner cond;
        cond.kind = Kind::AdaGradDiag;
        cond.adagrad_accum = Vector::Zero(p);
        cond.epsilon = epsilon;
        return cond;
    }

    static Conditioner amari(Eigen::Index p, double a1 = 1.0, double ridge = 1e-8) {
        if (!(a1 > 0)) throw std::invalid_argument("conditioner: amari a1 must be positive");
        Conditioner cond;
        cond.kind = Kind::AmariFisher;
        cond.amari_cinv = Matrix::Identity(p, p);
        cond.a1 = a1;
        cond.ridge = ridge;
        return cond;
    }

    bool is_static() const { return kind == Kind::Identity || kind == Kind::Fixed; }

    /// C g for the static kinds.
    Vector apply(const Vector& g) const {
        switch (kind) {
        case Kind::Identity: return g;
        case Kind::Fixed: return fixed * g;
        default: throw std::logic_error("conditioner: apply() requires a static kind");
        }
    }

    /// x'Cx for the static kinds.
    double quad_form(const Vector& x) const {
        switch (kind) {
        case Kind::Identity: return x.squaredNorm();
        case Kind::Fixed: return x.dot(fixed * x);
        default: throw std::logic_error("conditioner: quad_form() requires a static kind");
        }
    }
};

} // namespace isgd
