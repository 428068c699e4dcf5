#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace isgd {

/// Learning-rate schedule gamma_n. PowerLaw is gamma1 * n^-exponent;
/// ExplicitSafeguard is the stabilized min(cap, gamma1 / (n + ||x_n||^2))
/// schedule used to keep explicit SGD alive at large gamma1.
struct LearningRate {
    enum class Mode { PowerLaw, Constant, ExplicitSafeguard };

    Mode mode = Mode::PowerLaw;
    double gamma1 = 1.0;
    double exponent = 1.0;
    double cap = 0.3; // ExplicitSafeguard only

    double at(long n, double xnorm2 = 0.0) const {
        switch (mode) {
        case Mode::Constant: return gamma1;
        case Mode::ExplicitSafeguard:
            return std::min(cap, gamma1 / (static_cast<double>(n) + xnorm2));
        case Mode::PowerLaw:
        default:
            return gamma1 * std::pow(static_cast<double>(n), -exponent);
        }
    }

    /// Averaged runs need exponent in [0.5, 1), plain power-law in (0.5, 1].
    void validate(bool averaged) const {
        if (!(gamma1 > 0)) throw std::invalid_argument("learning rate: gamma1 must be positive");
        if (mode == Mode::PowerLaw) {
            if (averaged) {
                if (exponent < 0.5 || exponent >= 1.0)
                    throw std::invalid_argument("learning rate: averaging needs exponent in [0.5, 1)");
            } else if (exponent <= 0.5 || exponent > 1.0) {
                throw std::invalid_argument("learning rate: exponent must be in (0.5, 1]");
            }
        }
        if (mode == Mode::ExplicitSafeguard && !(cap > 0))
            throw std::invalid_argument("learning rate: safeguard cap must be positive");
    }

    static LearningRate power_law(double gamma1, double exponent = 1.0) {
        return {Mode::PowerLaw, gamma1, exponent, 0.3};
    }
    static LearningRate constant(double gamma1) { return {Mode::Constant, gamma1, 0.0, 0.3}; }
    static LearningRate safeguard(double gamma1, double cap = 0.3) {
        return {Mode::ExplicitSafeguard, gamma1, 0.0, cap};
    }

    static Mode mode_from_token(const std::string& token) {
        if (token == "power") return Mode::PowerLaw;
        if (token == "constant") return Mode::Constant;
        if (token == "safeguard") return Mode::ExplicitSafeguard;
        throw std::invalid_argument("unknown lr_mode: " + token);
    }
};

} // namespace isgd
