#pragma once

#include <filesystem>
#include <ostream>

#include "quadmpc/scenario.hpp"

namespace quadmpc {

void write_log(const ScenarioResult& result, std::ostream& out);
/// Throws Error naming the path when the file cannot be written.
void write_log(const ScenarioResult& result, const std::filesystem::path& path);

}  // namespace quadmpc
