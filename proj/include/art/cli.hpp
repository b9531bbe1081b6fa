#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "art/property.hpp"

namespace art {

/// The two-input vehicle monitor used by `art demo`: inputs (speed v,
/// direction theta), outputs (Report, Ignore) scores, one hidden ReLU layer
/// of width 2, no biases.
Network monitor_network();

/// "Objects in front that are stationary or approaching must be reported":
/// v in [0, 5], theta in [0.5, 2.5]  =>  y_report > y_ignore.
CorrectnessProperty monitor_property();

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int not_certified = 1;
inline constexpr int usage = 2;
}  // namespace exit_code

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace art
