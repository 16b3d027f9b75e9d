#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rawburst {

struct AdjointCase {
    std::string op;       // warp, blur, decimate, cfa, frame
    std::string layout;   // Bayer layout, empty for layout-free operators
    int size = 0;         // high-resolution side
    int scale = 1;
    double dot_error = 0.0;     // |<Ax, r> - <x, A^T r>| / (||Ax|| ||r||)
    double matrix_error = 0.0;  // max |A^T - dense(A)^T| / max |dense(A)|
    bool passed = false;
};

struct AdjointReport {
    double tolerance = 1e-5;
    std::vector<AdjointCase> cases;

    bool passed() const;
};

/// Builds every operator of the forward model on a size x size high-resolution grid, densifies
/// it column by column and checks the implemented adjoint against the dense transpose, for all
/// Bayer layouts. `size` must be a multiple of 2 * scale.
AdjointReport check_adjoints(int size, int scale, std::uint64_t seed, double tolerance = 1e-5);

} // namespace rawburst
