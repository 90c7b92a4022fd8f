// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace rlpeft::util {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

}  // namespace rlpeft::util
