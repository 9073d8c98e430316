#pragma once

#include <string>
#include <vector>

#include "util/keyvalue.hpp"

namespace sephr {

// Complete run configurations covering data.*, model, train.* and
// ensemble.* keys:
//   desk   32x32, 8 frames, 4 bands, 6 classes; the benchmark setting
//   trend  a 16x16 reduction of desk for multi-seed comparisons
//   full   24x24, 71 frames, 48 classes, d_k 768 with 6 heads
KeyValues profile_config(const std::string& name);
std::vector<std::string> profile_names();

}  // namespace sephr
