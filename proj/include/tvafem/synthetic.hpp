#pragma once

#include <vector>

#include "tvafem/apps.hpp"
#include "tvafem/image.hpp"

namespace tvafem {

/// Smooth shading with a soft-edged disk and square. Geometry is laid out on a
/// 64 x 64 frame and stretched to the requested size; values stay in [0, 1].
ImageGrid synthetic_image(int n1, int n2);

/// Keep-mask with three vertical and two horizontal strokes of `width` pixels
/// (false on the strokes), laid out on the same 64 x 64 frame.
std::vector<bool> synthetic_stroke_mask(int n1, int n2, double width = 3.0);

/// Copy of `image` with masked pixels set to zero.
ImageGrid apply_mask(const ImageGrid& image, const std::vector<bool>& keep);

struct FlowPair {
  ImageGrid f0;
  ImageGrid f1;
  FlowRaster truth;
};

/// Smooth periodic texture f0 and f1(x) = f0(x - shift), so the flow carrying
/// f1 back onto f0 is the constant `shift`.
FlowPair synthetic_flow_pair(int n1, int n2, double shift_x, double shift_y);

}  // namespace tvafem
