#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hhws/aim.hpp"
#include "hhws/mars.hpp"
#include "hhws/mob.hpp"
#include "hhws/model.hpp"

namespace hhws {

using Json = nlohmann::ordered_json;

/// Shortest representation that round-trips; "NA" for NaN.
std::string format_number(double v);

/// Comma-joined fields, quoting any that contain a comma, quote or newline.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

std::uint64_t fnv1a(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

Json to_json(const ThresholdSet& t);
Json to_json(const MobTree& tree);
/// Knot list and term structure of a MARS model.
Json mars_json(const MarsModel& model, const std::vector<std::string>& names);
Json aim_json(const AimModel& model, const std::vector<std::string>& names);

}  // namespace hhws
