#include "curvreg/io_util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "curvreg/error.hpp"

namespace curvreg {

void atomic_write(const std::string& path,
                  const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(ErrorCode::IoError, "cannot create directory " + dir.string());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.string().c_str());
      raise(ErrorCode::IoError, "write failed for " + path);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::remove(tmp.string().c_str());
    raise(ErrorCode::IoError, "cannot move temporary into place for " + path);
  }
}

void write_pgm16(const Grid<double>& image, const std::string& path) {
  if (image.empty()) raise(ErrorCode::IoError, "refusing to write empty image");
  atomic_write(path, [&](std::ostream& out) {
    out << "P5\n" << image.width() << " " << image.height() << "\n65535\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(image.size() * 2);
    for (const double v : image) {
      const double clamped = std::clamp(v, 0.0, 1.0);
      const auto q = static_cast<uint16_t>(clamped * 65535.0 + 0.5);
      bytes.push_back(static_cast<unsigned char>(q >> 8));  // big-endian
      bytes.push_back(static_cast<unsigned char>(q & 0xff));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  });
}

namespace {

// Reads the next PGM header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c) != 0) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && std::isspace(c) == 0) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

}  // namespace

Grid<double> read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  if (next_token(in) != "P5")
    raise(ErrorCode::UnknownFormat, path + " is not a binary PGM");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    raise(ErrorCode::ParseError, "malformed PGM header in " + path);
  }
  if (width <= 0 || height <= 0 || maxval != 65535)
    raise(ErrorCode::ParseError, "unsupported PGM header in " + path);

  Grid<double> image(width, height);
  std::vector<unsigned char> bytes(image.size() * 2);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) raise(ErrorCode::ParseError, "truncated PGM data in " + path);
  double* px = image.data();
  for (size_t i = 0; i < image.size(); ++i) {
    const uint16_t q = static_cast<uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    px[i] = q / 65535.0;
  }
  return image;
}

}  // namespace curvreg
