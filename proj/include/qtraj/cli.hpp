#pragma once

#include <string>
#include <vector>

namespace qtraj {

/// Runs one CLI invocation. Exit codes: 0 success/pass, 1 usage or IO error,
/// 2 verdict failure (a science check ran and failed).
int dispatch(const std::vector<std::string>& args);

}  // namespace qtraj
