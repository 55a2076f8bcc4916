#pragma once

#include <cstdint>

#include "ferns/image.hpp"

namespace ferns {

// One labelled training or test patch, with the view it was cut from.
struct PatchSample {
  GrayImage patch;
  std::uint32_t label = 0;
  AffineDeform deform;
  std::uint64_t view_id = 0;
};

}  // namespace ferns
