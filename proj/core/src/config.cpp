#include "curvreg/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"

namespace curvreg {

void RunConfig::validate() const {
  pipeline.validate();
  if (voxel_size < 0.0)
    raise(ErrorCode::InvalidConfig, "voxel_size_m must be non-negative");
  if (stride < 1) raise(ErrorCode::InvalidConfig, "stride must be >= 1");
  if (!(rotation_failure_threshold > 0.0))
    raise(ErrorCode::InvalidConfig, "rotation_failure_threshold_rad must be positive");
}

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string trim(const std::string& s) {
  size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin])) != 0) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1])) != 0) --end;
  return s.substr(begin, end - begin);
}

class Parser {
public:
  Parser(const std::string& path, const std::string& key, const std::string& value)
      : path_(path), key_(key), value_(value) {}

  double number() const {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value_, &used);
    } catch (const std::exception&) {
      fail("not a number");
    }
    if (used != value_.size()) fail("trailing characters after number");
    return v;
  }

  long integer() const {
    size_t used = 0;
    long v = 0;
    try {
      v = std::stol(value_, &used);
    } catch (const std::exception&) {
      fail("not an integer");
    }
    if (used != value_.size()) fail("trailing characters after integer");
    return v;
  }

  bool boolean() const {
    if (value_ == "true" || value_ == "1") return true;
    if (value_ == "false" || value_ == "0") return false;
    fail("expected true/false");
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    raise(ErrorCode::ParseError, path_ + ": key " + key_ + ": " + what + " ('" +
                                     value_ + "')");
  }

  const std::string& path_;
  const std::string& key_;
  const std::string& value_;
};

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open config " + path);

  RunConfig cfg;
  bool version_seen = false;

  // One setter per documented key; anything else is rejected.
  std::map<std::string, std::function<void(const Parser&)>> keys;
  keys["config_version"] = [&](const Parser& p) {
    if (p.integer() != 1)
      raise(ErrorCode::InvalidConfig, path + ": unsupported config_version");
    version_seen = true;
  };
  keys["az_res_deg"] = [&](const Parser& p) {
    cfg.pipeline.projection.az_res = p.number() * kDegToRad;
  };
  keys["el_res_deg"] = [&](const Parser& p) {
    cfg.pipeline.projection.el_res = p.number() * kDegToRad;
  };
  keys["az_start_deg"] = [&](const Parser& p) {
    cfg.pipeline.projection.az_start = p.number() * kDegToRad;
  };
  keys["az_end_deg"] = [&](const Parser& p) {
    cfg.pipeline.projection.az_end = p.number() * kDegToRad;
  };
  keys["el_start_deg"] = [&](const Parser& p) {
    cfg.pipeline.projection.el_start = p.number() * kDegToRad;
  };
  keys["el_end_deg"] = [&](const Parser& p) {
    cfg.pipeline.projection.el_end = p.number() * kDegToRad;
  };
  keys["range_min_m"] = [&](const Parser& p) { cfg.pipeline.range_min = p.number(); };
  keys["range_max_m"] = [&](const Parser& p) { cfg.pipeline.range_max = p.number(); };
  keys["n_scales"] = [&](const Parser& p) {
    cfg.pipeline.curvelet.n_scales = static_cast<int>(p.integer());
  };
  keys["n_angles_coarse"] = [&](const Parser& p) {
    cfg.pipeline.curvelet.n_angles_coarse = static_cast<int>(p.integer());
  };
  keys["finest_is_curvelets"] = [&](const Parser& p) {
    cfg.pipeline.curvelet.finest_is_curvelets = p.boolean();
  };
  keys["contrast_threshold"] = [&](const Parser& p) {
    cfg.pipeline.features.contrast_threshold = p.number();
  };
  keys["range_margin_m"] = [&](const Parser& p) {
    cfg.pipeline.features.range_margin = p.number();
  };
  keys["mutual_matching"] = [&](const Parser& p) {
    cfg.pipeline.matcher.mutual = p.boolean();
  };
  keys["use_kdtree"] = [&](const Parser& p) {
    cfg.pipeline.matcher.use_kdtree = p.boolean();
  };
  keys["ransac_threshold_m"] = [&](const Parser& p) {
    cfg.pipeline.ransac.inlier_threshold = p.number();
  };
  keys["ransac_max_iterations"] = [&](const Parser& p) {
    cfg.pipeline.ransac.max_iterations = static_cast<int>(p.integer());
  };
  keys["ransac_min_inliers"] = [&](const Parser& p) {
    cfg.pipeline.ransac.min_inliers = static_cast<int>(p.integer());
  };
  keys["voxel_size_m"] = [&](const Parser& p) { cfg.voxel_size = p.number(); };
  keys["stride"] = [&](const Parser& p) { cfg.stride = static_cast<int>(p.integer()); };
  keys["rotation_failure_threshold_rad"] = [&](const Parser& p) {
    cfg.rotation_failure_threshold = p.number();
  };
  keys["seed"] = [&](const Parser& p) {
    cfg.seed = static_cast<uint64_t>(p.integer());
    cfg.pipeline.ransac.rng_seed = cfg.seed;
  };

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end())
      raise(ErrorCode::InvalidConfig,
            path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(Parser(path, key, value));
  }

  if (!version_seen)
    raise(ErrorCode::InvalidConfig, path + ": missing required config_version");
  cfg.validate();
  return cfg;
}

void write_run_config(const RunConfig& cfg, const std::string& path) {
  constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
  atomic_write(path, [&](std::ostream& out) {
    char line[96];
    auto num = [&](const char* key, double v) {
      std::snprintf(line, sizeof(line), "%s=%.17g\n", key, v);
      out << line;
    };
    auto integer = [&](const char* key, long v) {
      std::snprintf(line, sizeof(line), "%s=%ld\n", key, v);
      out << line;
    };
    auto boolean = [&](const char* key, bool v) {
      out << key << "=" << (v ? "true" : "false") << "\n";
    };

    integer("config_version", 1);
    num("az_res_deg", cfg.pipeline.projection.az_res * kRadToDeg);
    num("el_res_deg", cfg.pipeline.projection.el_res * kRadToDeg);
    num("az_start_deg", cfg.pipeline.projection.az_start * kRadToDeg);
    num("az_end_deg", cfg.pipeline.projection.az_end * kRadToDeg);
    num("el_start_deg", cfg.pipeline.projection.el_start * kRadToDeg);
    num("el_end_deg", cfg.pipeline.projection.el_end * kRadToDeg);
    num("range_min_m", cfg.pipeline.range_min);
    num("range_max_m", cfg.pipeline.range_max);
    integer("n_scales", cfg.pipeline.curvelet.n_scales);
    integer("n_angles_coarse", cfg.pipeline.curvelet.n_angles_coarse);
    boolean("finest_is_curvelets", cfg.pipeline.curvelet.finest_is_curvelets);
    num("contrast_threshold", cfg.pipeline.features.contrast_threshold);
    num("range_margin_m", cfg.pipeline.features.range_margin);
    boolean("mutual_matching", cfg.pipeline.matcher.mutual);
    boolean("use_kdtree", cfg.pipeline.matcher.use_kdtree);
    num("ransac_threshold_m", cfg.pipeline.ransac.inlier_threshold);
    integer("ransac_max_iterations", cfg.pipeline.ransac.max_iterations);
    integer("ransac_min_inliers", cfg.pipeline.ransac.min_inliers);
    num("voxel_size_m", cfg.voxel_size);
    integer("stride", cfg.stride);
    num("rotation_failure_threshold_rad", cfg.rotation_failure_threshold);
    integer("seed", static_cast<long>(cfg.seed));
  });
}

}  // namespace curvreg
