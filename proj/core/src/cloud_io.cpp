#include "curvreg/cloud_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"

namespace curvreg {

namespace {

std::string lower_extension(const std::string& path) {
  const size_t dot = path.find_last_of('.');
  const size_t sep = path.find_last_of("/\\");
  if (dot == std::string::npos || (sep != std::string::npos && dot < sep)) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

bool finite_point(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

[[noreturn]] void parse_fail(const std::string& path, size_t line, const std::string& what) {
  raise(ErrorCode::ParseError, path + ":" + std::to_string(line) + ": " + what);
}

// --------------------------- PLY ------------------------------------------

size_t ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

struct PlyProperty {
  std::string type;
  std::string name;
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::streampos data_start;
};

PlyHeader read_ply_header(std::istream& in, const std::string& path) {
  PlyHeader header;
  std::string line;
  size_t line_no = 0;

  auto next_line = [&]() {
    if (!std::getline(in, line)) parse_fail(path, line_no, "unterminated PLY header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
  };

  next_line();
  if (line != "ply") parse_fail(path, line_no, "missing ply magic");
  bool have_format = false;
  while (true) {
    next_line();
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, version;
      fields >> fmt >> version;
      if (fmt == "ascii")
        header.binary = false;
      else if (fmt == "binary_little_endian")
        header.binary = true;
      else
        raise(ErrorCode::UnknownFormat, path + ": unsupported PLY format " + fmt);
      have_format = true;
    } else if (word == "element") {
      PlyElement element;
      if (!(fields >> element.name >> element.count))
        parse_fail(path, line_no, "malformed element line");
      header.elements.push_back(element);
    } else if (word == "property") {
      if (header.elements.empty()) parse_fail(path, line_no, "property before element");
      PlyProperty prop;
      fields >> prop.type;
      if (prop.type == "list")
        raise(ErrorCode::UnknownFormat, path + ": list properties are not supported");
      if (!(fields >> prop.name)) parse_fail(path, line_no, "malformed property line");
      if (ply_type_size(prop.type) == 0)
        parse_fail(path, line_no, "unknown property type " + prop.type);
      header.elements.back().properties.push_back(prop);
    } else if (word == "end_header") {
      break;
    } else {
      parse_fail(path, line_no, "unexpected header line: " + line);
    }
  }
  if (!have_format) parse_fail(path, line_no, "missing format line");
  header.data_start = in.tellg();
  return header;
}

double decode_scalar(const unsigned char* bytes, const std::string& type) {
  // Little-endian fields on a little-endian host: memcpy suffices.
  if (type == "float" || type == "float32") {
    float v;
    std::memcpy(&v, bytes, 4);
    return v;
  }
  if (type == "double" || type == "float64") {
    double v;
    std::memcpy(&v, bytes, 8);
    return v;
  }
  if (type == "char" || type == "int8") return static_cast<signed char>(bytes[0]);
  if (type == "uchar" || type == "uint8") return bytes[0];
  if (type == "short" || type == "int16") {
    int16_t v;
    std::memcpy(&v, bytes, 2);
    return v;
  }
  if (type == "ushort" || type == "uint16") {
    uint16_t v;
    std::memcpy(&v, bytes, 2);
    return v;
  }
  if (type == "int" || type == "int32") {
    int32_t v;
    std::memcpy(&v, bytes, 4);
    return v;
  }
  uint32_t v;
  std::memcpy(&v, bytes, 4);
  return v;
}

PointCloud load_ply(std::ifstream& in, const std::string& path, LoadReport* report) {
  const PlyHeader header = read_ply_header(in, path);

  PointCloud cloud;
  for (const PlyElement& element : header.elements) {
    size_t record_size = 0;
    for (const PlyProperty& p : element.properties)
      record_size += ply_type_size(p.type);

    if (element.name != "vertex") {
      // Skip foreign elements wholesale.
      if (header.binary) {
        in.seekg(static_cast<std::streamoff>(element.count * record_size),
                 std::ios::cur);
      } else {
        std::string line;
        for (size_t i = 0; i < element.count; ++i)
          if (!std::getline(in, line))
            parse_fail(path, 0, "truncated element " + element.name);
      }
      continue;
    }

    int ix = -1, iy = -1, iz = -1;
    for (size_t p = 0; p < element.properties.size(); ++p) {
      if (element.properties[p].name == "x") ix = static_cast<int>(p);
      if (element.properties[p].name == "y") iy = static_cast<int>(p);
      if (element.properties[p].name == "z") iz = static_cast<int>(p);
    }
    if (ix < 0 || iy < 0 || iz < 0)
      raise(ErrorCode::ParseError, path + ": vertex element lacks x/y/z properties");

    cloud.points.reserve(element.count);
    if (header.binary) {
      std::vector<unsigned char> record(record_size);
      for (size_t i = 0; i < element.count; ++i) {
        in.read(reinterpret_cast<char*>(record.data()),
                static_cast<std::streamsize>(record_size));
        if (!in)
          raise(ErrorCode::ParseError,
                path + ": truncated at vertex " + std::to_string(i) + " (offset " +
                    std::to_string(static_cast<long>(in.tellg())) + ")");
        double coords[3] = {0, 0, 0};
        size_t offset = 0;
        for (size_t p = 0; p < element.properties.size(); ++p) {
          const auto& prop = element.properties[p];
          const double v = decode_scalar(record.data() + offset, prop.type);
          if (static_cast<int>(p) == ix) coords[0] = v;
          if (static_cast<int>(p) == iy) coords[1] = v;
          if (static_cast<int>(p) == iz) coords[2] = v;
          offset += ply_type_size(prop.type);
        }
        const Point3 point(coords[0], coords[1], coords[2]);
        if (!finite_point(point)) {
          if (report != nullptr) ++report->dropped_records;
          continue;
        }
        cloud.points.push_back(point);
      }
    } else {
      std::string line;
      for (size_t i = 0; i < element.count; ++i) {
        if (!std::getline(in, line))
          parse_fail(path, 0, "truncated at vertex " + std::to_string(i));
        std::istringstream fields(line);
        std::vector<double> values(element.properties.size());
        for (double& v : values)
          if (!(fields >> v))
            parse_fail(path, 0, "malformed vertex line: " + line);
        const Point3 point(values[static_cast<size_t>(ix)],
                           values[static_cast<size_t>(iy)],
                           values[static_cast<size_t>(iz)]);
        if (!finite_point(point)) {
          if (report != nullptr) ++report->dropped_records;
          continue;
        }
        cloud.points.push_back(point);
      }
    }
  }
  return cloud;
}

// --------------------------- xyz text --------------------------------------

PointCloud load_xyz(std::ifstream& in, const std::string& path, LoadReport* report) {
  PointCloud cloud;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip comments and blank lines.
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    bool blank = true;
    for (const char c : line)
      if (std::isspace(static_cast<unsigned char>(c)) == 0) {
        blank = false;
        break;
      }
    if (blank) continue;

    // strtod instead of stream extraction: "nan"/"inf" records must parse
    // (and then count as dropped) rather than fail the file.
    const char* cursor = line.c_str();
    double coords[3];
    for (double& value : coords) {
      char* end = nullptr;
      value = std::strtod(cursor, &end);
      if (end == cursor) parse_fail(path, line_no, "expected 3 numbers: " + line);
      cursor = end;
    }
    while (std::isspace(static_cast<unsigned char>(*cursor)) != 0) ++cursor;
    if (*cursor != '\0')
      parse_fail(path, line_no, "trailing characters: " + line);
    const Point3 point(coords[0], coords[1], coords[2]);
    if (!finite_point(point)) {
      if (report != nullptr) ++report->dropped_records;
      continue;
    }
    cloud.points.push_back(point);
  }
  return cloud;
}

}  // namespace

CloudFormat format_from_extension(const std::string& path) {
  const std::string ext = lower_extension(path);
  if (ext == "ply") return CloudFormat::PlyBinary;
  if (ext == "xyz" || ext == "txt") return CloudFormat::XyzText;
  raise(ErrorCode::UnknownFormat, "no cloud format for extension ." + ext);
}

PointCloud load_cloud(const std::string& path, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);

  // Header sniff: a PLY magic wins over any extension.
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 3);
  in.seekg(0);
  const bool is_ply = std::memcmp(magic, "ply", 3) == 0;

  const std::string ext = lower_extension(path);
  if (!is_ply && ext != "" && ext != "xyz" && ext != "txt" && ext != "ply")
    raise(ErrorCode::UnknownFormat, path + ": unrecognized cloud file");

  PointCloud cloud = is_ply ? load_ply(in, path, report) : load_xyz(in, path, report);
  if (cloud.points.empty())
    raise(ErrorCode::EmptyCloud, path + " contains no usable points");
  return cloud;
}

void write_cloud(const PointCloud& cloud, const std::string& path,
                 CloudFormat format) {
  if (cloud.points.empty())
    raise(ErrorCode::EmptyCloud, "refusing to write an empty cloud to " + path);

  atomic_write(path, [&](std::ostream& out) {
    switch (format) {
      case CloudFormat::XyzText: {
        char line[128];
        for (const Point3& p : cloud.points) {
          std::snprintf(line, sizeof(line), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
          out << line;
        }
        break;
      }
      case CloudFormat::PlyAscii:
      case CloudFormat::PlyBinary: {
        const bool binary = format == CloudFormat::PlyBinary;
        out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
            << " 1.0\nelement vertex " << cloud.points.size()
            << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
        if (binary) {
          for (const Point3& p : cloud.points) {
            const double coords[3] = {p.x(), p.y(), p.z()};
            out.write(reinterpret_cast<const char*>(coords), sizeof(coords));
          }
        } else {
          char line[128];
          for (const Point3& p : cloud.points) {
            std::snprintf(line, sizeof(line), "%.17g %.17g %.17g\n", p.x(), p.y(),
                          p.z());
            out << line;
          }
        }
        break;
      }
    }
  });
}

void write_cloud(const PointCloud& cloud, const std::string& path) {
  write_cloud(cloud, path, format_from_extension(path));
}

}  // namespace curvreg
