#pragma once

#include "obstrade/quantum.hpp"

// Fixed example instances used by the tests, the acceptance harness and the CLI.
namespace obstrade::instances {

// rho = diag(p/2, 1-p, p/2) with the spin-1 operators X1, X2, X3.
State spin1_state(double p);
ObservableSet spin1_observables();

// (sigma_x, sigma_y, sigma_z) / 2.
ObservableSet half_paulis();
// R_z(pi/2) R_y(theta) |0>.
CVec rotated_qubit(double theta);
// p|0><0| + (1-p)|1><1|.
State diagonal_qubit(double p);

// Four-level mixed example whose SDP bound is not attained.
State gap4_state(double p);
ObservableSet gap4_observables();

}  // namespace obstrade::instances
