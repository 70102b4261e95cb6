#pragma once

#include "incsens/nuisance.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace incsens {

/// Comma list ("1,2,3"), or "geom:lo:hi:n" / "lin:lo:hi:n" for n points
/// spaced geometrically or linearly with both ends included.
std::vector<double> parse_grid(const std::string& text);

/// Names: kernel (default), knn, basis, full-kernel.
LearnerSpec learner_from_name(const std::string& name, double bandwidth, double bandwidth_scale,
                              std::size_t neighbors, int basis_degree);

/// Dispatches one command line (without the program name). Returns the exit
/// status; usage and parse errors go to `err`, summaries to `out`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, char** argv);

}  // namespace incsens
