#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace jgs {

// Deterministic random source. Distributions are implemented explicitly on
// top of the (standardized) mt19937_64 stream so seeded outputs are
// bit-identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t raw() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) {
        const int v = static_cast<int>(uniform() * n);
        return v < n ? v : n - 1;
    }

    // Box-Muller, no rejection.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double sigma) { return sigma * normal(); }

    Eigen::Vector3d normal3(double sigma) {
        return {normal(sigma), normal(sigma), normal(sigma)};
    }

    Eigen::Vector3d unit_vector() {
        // Uniform on the sphere via normalized Gaussian triple.
        Eigen::Vector3d v;
        do {
            v = normal3(1.0);
        } while (v.norm() < 1e-9);
        return v.normalized();
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace jgs
