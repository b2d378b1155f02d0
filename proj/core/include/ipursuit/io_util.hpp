#pragma once

#include <functional>
#include <ostream>
#include <string>

namespace ipursuit {

/// Writes through a temporary file and renames on success, so failed runs
/// never leave partial artifacts behind.
void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& body);

}  // namespace ipursuit
