#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "costroute/backend_client.hpp"
#include "costroute/io.hpp"

namespace costroute {

using TransportFactory = std::function<std::shared_ptr<Transport>()>;

/// Subcommand names in help order.
const std::vector<std::string>& command_names();

/// Runs one subcommand. `options` holds snake_case keys (flags without the
/// leading dashes); missing keys take built-in defaults. Returns the JSON
/// summary. Usage problems throw Errc::Usage.
ordered_json run_command(const std::string& command, const nlohmann::json& options,
                         const TransportFactory& transport_factory = {});

}  // namespace costroute
