#pragma once

#include <optional>
#include <string_view>

namespace objsearch::detail {

// Files under core/data/, compiled in at configure time. Keys are paths
// relative to that directory, e.g. "templates/p_minimal.txt".
std::optional<std::string_view> embedded_resource(std::string_view name);

} // namespace objsearch::detail
