#pragma once

#include <random>

#include "obstrade/linalg.hpp"

namespace testutil {

using obstrade::CMat;
using obstrade::CVec;
using obstrade::cplx;

inline CMat random_complex(int r, int c, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CMat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = cplx(g(rng), g(rng));
    return m;
}

inline CMat random_hermitian(int d, std::mt19937_64& rng) {
    const CMat a = random_complex(d, d, rng);
    return 0.5 * (a + a.adjoint());
}

inline CVec random_ket(int d, std::mt19937_64& rng) {
    CVec v = random_complex(d, 1, rng);
    return v / v.norm();
}

// Ginibre-style mixed state of the given rank.
inline CMat random_density(int d, std::mt19937_64& rng, int rank) {
    const CMat g = random_complex(d, rank, rng);
    CMat rho = g * g.adjoint();
    return rho / rho.trace().real();
}

inline CMat random_unitary(int d, std::mt19937_64& rng) {
    Eigen::HouseholderQR<CMat> qr(random_complex(d, d, rng));
    return qr.householderQ() * CMat::Identity(d, d);
}

}  // namespace testutil
