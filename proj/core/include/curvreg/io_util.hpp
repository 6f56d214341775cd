#pragma once

#include <functional>
#include <ostream>
#include <string>

#include "curvreg/grid.hpp"

namespace curvreg {

/// Writes a file via a temporary in the same directory plus an atomic rename,
/// so readers never observe a partially written artifact. The writer receives
/// a binary-mode stream. Throws IoError on any filesystem failure.
void atomic_write(const std::string& path,
                  const std::function<void(std::ostream&)>& writer);

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples per the format).
/// Values are clamped to [0, 1] and scaled by 65535.
void write_pgm16(const Grid<double>& image, const std::string& path);

/// Reads a 16-bit binary PGM back to values in [0, 1].
/// Throws ParseError for malformed input, UnknownFormat for non-P5 files.
Grid<double> read_pgm16(const std::string& path);

}  // namespace curvreg
