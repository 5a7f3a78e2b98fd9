#pragma once

#include "hma/imaging.hpp"
#include "hma/model.hpp"

namespace hma {

/// Upscales an image of any size. The input is reflect-padded to a grid of
/// tile x tile windows spaced tile - overlap apart, each window runs through
/// the model, overlapping outputs are averaged and the result is cropped to
/// scale * H x scale * W.
ImageF32 tiled_inference(const ImageF32& img, HmaModel<float>& model, int tile, int overlap);

}  // namespace hma
