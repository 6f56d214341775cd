#pragma once

#include <string>

#include "curvreg/geometry.hpp"

namespace curvreg {

enum class CloudFormat {
  XyzText,    // one "x y z" line per point
  PlyAscii,   // PLY 1.0, double vertex properties
  PlyBinary,  // PLY 1.0 binary_little_endian, double properties (bit-exact)
};

struct LoadReport {
  size_t dropped_records = 0;  // NaN/Inf points skipped during parsing
};

/// Picks a format from the file extension: .ply -> PlyBinary, .xyz/.txt ->
/// XyzText. Throws UnknownFormat otherwise.
CloudFormat format_from_extension(const std::string& path);

/// Reads a point cloud. PLY files are recognized by their header regardless
/// of extension (ascii and binary_little_endian, scalar vertex properties
/// with x/y/z present); anything else parses as xyz text. Point order is file
/// order; NaN/Inf records are dropped and counted in the report.
/// Throws UnknownFormat, ParseError (with line/offset), EmptyCloud.
PointCloud load_cloud(const std::string& path, LoadReport* report = nullptr);

/// Writes a cloud in the given format (atomic). Binary PLY round-trips
/// bit-exactly through load_cloud. Throws EmptyCloud for 0 points, IoError
/// on filesystem failures.
void write_cloud(const PointCloud& cloud, const std::string& path,
                 CloudFormat format);
void write_cloud(const PointCloud& cloud, const std::string& path);

}  // namespace curvreg
