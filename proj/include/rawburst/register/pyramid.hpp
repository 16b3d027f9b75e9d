#pragma once

#include "rawburst/model/warp.hpp"
#include "rawburst/util/image.hpp"

#include <vector>

namespace rawburst {

/// Image pyramid with 5-tap binomial smoothing and factor-2 subsampling. Coarse pixel j
/// sits on fine pixel 2j, so a map estimated at level l + 1 becomes the level l init via
/// `upscale_affine`.
class GaussianPyramid {
public:
    GaussianPyramid(const Image& base, const Image& mask, int levels = 4);

    int levels() const { return static_cast<int>(images_.size()); }
    const Image& image(int level) const { return images_.at(level); }
    const Image& mask(int level) const { return masks_.at(level); }

    static Affine upscale_affine(const Affine& coarse) { return coarse.change_of_units(2.0, 0.0); }
    static Affine downscale_affine(const Affine& fine) { return fine.change_of_units(0.5, 0.0); }

private:
    std::vector<Image> images_;
    std::vector<Image> masks_;
};

/// [1 4 6 4 1] / 16 separable smoothing with reflected borders.
Image binomial_blur(const Image& img);
/// Blur then keep even rows and columns; output size floor(n / 2).
Image pyr_down(const Image& img);

} // namespace rawburst
