#include "obstrade/instances.hpp"

#include <cmath>

namespace obstrade::instances {

State spin1_state(double p) {
    if (p < 0.0 || p > 1.0) throw ValidationError("spin1_state: p must lie in [0, 1]");
    RVec d(3);
    d << p / 2, 1 - p, p / 2;
    return State(d.cast<cplx>().asDiagonal().toDenseMatrix());
}

ObservableSet spin1_observables() {
    const cplx i(0, 1);
    CMat x1(3, 3), x2(3, 3), x3(3, 3);
    x1 << 0, 1, 0, 1, 0, 1, 0, 1, 0;
    x2 << 0, -i, 0, i, 0, -i, 0, i, 0;
    x3 << 1, 0, 0, 0, 0, 0, 0, 0, -1;
    return ObservableSet({x1, x2, x3});
}

ObservableSet half_paulis() {
    return ObservableSet({0.5 * pauli_x(), 0.5 * pauli_y(), 0.5 * pauli_z()});
}

CVec rotated_qubit(double theta) {
    // R_y(theta)|0> = (cos(theta/2), sin(theta/2)); R_z(phi) = diag(e^{-i phi/2}, e^{i phi/2}).
    const cplx ph = std::polar(1.0, M_PI / 4);
    CVec v(2);
    v << std::conj(ph) * std::cos(theta / 2), ph * std::sin(theta / 2);
    return v;
}

State diagonal_qubit(double p) {
    if (p < 0.0 || p > 1.0) throw ValidationError("diagonal_qubit: p must lie in [0, 1]");
    CMat r = CMat::Zero(2, 2);
    r(0, 0) = p;
    r(1, 1) = 1 - p;
    return State(r);
}

State gap4_state(double p) {
    if (p < -1.0 || p > 1.0) throw ValidationError("gap4_state: p must lie in [-1, 1]");
    RVec d(4);
    d << (1 - p) / 3, 1.0 / 3, (1 + p) / 3, 0.0;
    return State(d.cast<cplx>().asDiagonal().toDenseMatrix());
}

ObservableSet gap4_observables() {
    CMat x1 = CMat::Zero(4, 4), x2 = CMat::Zero(4, 4);
    x1(0, 0) = 1;
    x1(1, 1) = 1;
    x1(2, 2) = -2;
    x1(1, 3) = x1(3, 1) = 0.5;
    x2(0, 1) = x2(1, 0) = 1;
    x2(1, 2) = x2(2, 1) = 1;
    x2(2, 3) = x2(3, 2) = -1.5;
    return ObservableSet({x1, x2});
}

}  // namespace obstrade::instances
