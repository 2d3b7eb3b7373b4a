#pragma once

// Serial, deliberately naive versions of the hot kernels. They share no loop
// structure with the OpenMP code (scatter instead of gather, direct basis
// evaluation instead of axis tables) and exist to cross-check it in tests and
// benchmarks.

#include "regvar/image.hpp"
#include "regvar/loss.hpp"
#include "regvar/transform.hpp"

namespace regvar::reference {

DisplacementField densify(const ControlGrid& grid, int width, int height);
ControlGrid backproject(const DisplacementField& values, const ControlGrid& shape);

FieldTerm ngf_term(const Image2D& fixed, const Image2D& moving, const DisplacementField& field, double epsilon);
FieldTerm curvature(const DisplacementField& field, double spacing);
FieldTerm boundary_term(const OneHotStack& fixed, const OneHotStack& moving, const DisplacementField& field);

LossReport total_loss(const Image2D& fixed, const Image2D& moving, const OneHotStack* fixed_onehot,
                      const OneHotStack* moving_onehot, const ControlGrid& grid, const LossWeights& weights);

/// Brute-force metric oracles.
double dice(const LabelMap& a, const LabelMap& b, int label);
double boundary_ssd(const OneHotStack& fixed, const OneHotStack& warped);
double folding_fraction(const DisplacementField& field);

} // namespace regvar::reference
