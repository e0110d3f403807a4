#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "graspkit/types.hpp"

namespace graspkit {

// ASCII PLY: one `vertex` element with double/float x, y, z and an optional
// integer `label` property. Other vertex properties are skipped; elements
// after the vertices are ignored.
PointCloud read_ply(std::istream& in);
void write_ply(std::ostream& out, const PointCloud& cloud);

// CSV: `x,y,z[,label]` per line. A first line that does not parse as numbers
// is taken as a header naming the columns.
PointCloud read_csv(std::istream& in);
void write_csv(std::ostream& out, const PointCloud& cloud);

/// Picks the format from the extension (.ply or .csv). Errors are kParseError
/// with the offending line number in the message.
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

}  // namespace graspkit
