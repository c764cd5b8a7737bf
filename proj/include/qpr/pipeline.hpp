// Bridges the parameter families to the quantum layer: the quadratic symbol
// of a family point in oscillator normal form.

#pragma once

#include "qpr/quantum.hpp"
#include "qpr/spectrum.hpp"

namespace qpr {

// Quantum symbol at E. GenericQuadratic is already in normal form; the
// embedded cocycle flow (generator 2 pi nu J + F) is conjugated by
// diag(1, -1) into [[0, nu_q], [-nu_q, 0]] + F_q with nu_q = 2 pi nu.
// Throws invalid_argument for families without an oscillator normal form.
QuadraticSymbol symbol_at(const ModelFamily& fam, double e, double embed_tol = 1e-10);

}  // namespace qpr
