#include "ischem/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ischem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::check() const {
  geometry.check();
  ionic.check();
  if (!(h_coarse > 0 && dt_coarse > 0 && horizon > 0)) {
    throw ConfigError("discretization sizes must be positive");
  }
  if (!(h_fine < h_coarse && dt_fine < dt_coarse)) {
    throw ConfigError("the fine discretization must be strictly finer than the coarse one");
  }
  if (!(healthy_parallel >= healthy_transverse && healthy_transverse > 0)) {
    throw ConfigError("healthy conductivity eigenvalues must satisfy parallel >= transverse > 0");
  }
  if (!(ischemic_parallel >= ischemic_transverse && ischemic_transverse > 0)) {
    throw ConfigError("ischemic conductivity eigenvalues must satisfy parallel >= transverse > 0");
  }
  if (ischemic_parallel > healthy_parallel || ischemic_transverse > healthy_transverse) {
    throw ConfigError("ischemic eigenvalues must not exceed the healthy ones");
  }
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) {
    throw ConfigError("noise level must lie in [0,1]");
  }
  if (measurement.empty()) throw ConfigError("measurement region set is empty");
  if (!(mask_d0 > 0)) throw ConfigError("mask separation d0 must be positive");
  if (minima_count < 1) throw ConfigError("minima count must be >= 1");
  if (!(min_separation > 0)) throw ConfigError("minima separation must be positive");
  for (const auto& inc : inclusions) {
    if (!(inc.radius > 0)) throw ConfigError("inclusion radius must be positive");
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& name) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> raw;
  std::string line, section;
  int line_no = 0;
  int inclusion_count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError(name + ":" + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
    raw[key] = trim(line.substr(eq + 1));
  }

  auto take = [&](const std::string& key, auto& target) {
    auto it = raw.find(key);
    if (it == raw.end()) return;
    std::istringstream ss(it->second);
    using T = std::decay_t<decltype(target)>;
    if constexpr (std::is_same_v<T, std::string>) {
      target = it->second;
    } else {
      T value{};
      if (!(ss >> value)) throw ParseError("config key '" + key + "' has a malformed value");
      target = value;
    }
    raw.erase(it);
  };

  take("geometry.outer_center_a_x", cfg.geometry.outer_center_a.x());
  take("geometry.outer_center_a_y", cfg.geometry.outer_center_a.y());
  take("geometry.outer_radius_a", cfg.geometry.outer_radius_a);
  take("geometry.outer_center_b_x", cfg.geometry.outer_center_b.x());
  take("geometry.outer_center_b_y", cfg.geometry.outer_center_b.y());
  take("geometry.outer_radius_b", cfg.geometry.outer_radius_b);
  take("geometry.lv_center_x", cfg.geometry.lv_center.x());
  take("geometry.lv_center_y", cfg.geometry.lv_center.y());
  take("geometry.lv_radius", cfg.geometry.lv_radius);
  take("geometry.rv_center_x", cfg.geometry.rv_center.x());
  take("geometry.rv_center_y", cfg.geometry.rv_center.y());
  take("geometry.rv_radius", cfg.geometry.rv_radius);

  take("discretization.h_coarse", cfg.h_coarse);
  take("discretization.h_fine", cfg.h_fine);
  take("discretization.dt_coarse", cfg.dt_coarse);
  take("discretization.dt_fine", cfg.dt_fine);
  take("discretization.T", cfg.horizon);

  take("ionic.A", cfg.ionic.excitation);
  take("ionic.a", cfg.ionic.threshold);
  take("ionic.eps", cfg.ionic.recovery_rate);

  take("conductivity.healthy_parallel", cfg.healthy_parallel);
  take("conductivity.healthy_transverse", cfg.healthy_transverse);
  take("conductivity.ischemic_parallel", cfg.ischemic_parallel);
  take("conductivity.ischemic_transverse", cfg.ischemic_transverse);

  take("stimulus.center_x", cfg.stimulus.center.x());
  take("stimulus.center_y", cfg.stimulus.center.y());
  take("stimulus.radius", cfg.stimulus.radius);
  take("stimulus.amplitude", cfg.stimulus.amplitude);

  take("inclusion.count", inclusion_count);
  for (int k = 1; k <= inclusion_count; ++k) {
    Inclusion inc;
    const std::string prefix = "inclusion." + std::to_string(k) + ".";
    take(prefix + "center_x", inc.center.x());
    take(prefix + "center_y", inc.center.y());
    take(prefix + "radius", inc.radius);
    cfg.inclusions.push_back(inc);
  }

  {
    std::string regions;
    take("measurement.regions", regions);
    if (!regions.empty()) cfg.measurement = RegionSet::parse(regions);
  }

  take("noise.level", cfg.noise_level);
  take("seed", cfg.seed);

  take("reconstruction.mask_d0", cfg.mask_d0);
  take("reconstruction.minima_count", cfg.minima_count);
  take("reconstruction.min_separation", cfg.min_separation);

  take("output.dir", cfg.output_dir);

  if (!raw.empty()) {
    throw ParseError(name + ": unknown config key '" + raw.begin()->first + "'");
  }
  cfg.check();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string());
}

std::string canonical_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "config v1\n";
  out << "geometry.outer_center_a_x = " << fmt(c.geometry.outer_center_a.x()) << "\n";
  out << "geometry.outer_center_a_y = " << fmt(c.geometry.outer_center_a.y()) << "\n";
  out << "geometry.outer_radius_a = " << fmt(c.geometry.outer_radius_a) << "\n";
  out << "geometry.outer_center_b_x = " << fmt(c.geometry.outer_center_b.x()) << "\n";
  out << "geometry.outer_center_b_y = " << fmt(c.geometry.outer_center_b.y()) << "\n";
  out << "geometry.outer_radius_b = " << fmt(c.geometry.outer_radius_b) << "\n";
  out << "geometry.lv_center_x = " << fmt(c.geometry.lv_center.x()) << "\n";
  out << "geometry.lv_center_y = " << fmt(c.geometry.lv_center.y()) << "\n";
  out << "geometry.lv_radius = " << fmt(c.geometry.lv_radius) << "\n";
  out << "geometry.rv_center_x = " << fmt(c.geometry.rv_center.x()) << "\n";
  out << "geometry.rv_center_y = " << fmt(c.geometry.rv_center.y()) << "\n";
  out << "geometry.rv_radius = " << fmt(c.geometry.rv_radius) << "\n";
  out << "discretization.h_coarse = " << fmt(c.h_coarse) << "\n";
  out << "discretization.h_fine = " << fmt(c.h_fine) << "\n";
  out << "discretization.dt_coarse = " << fmt(c.dt_coarse) << "\n";
  out << "discretization.dt_fine = " << fmt(c.dt_fine) << "\n";
  out << "discretization.T = " << fmt(c.horizon) << "\n";
  out << "ionic.A = " << fmt(c.ionic.excitation) << "\n";
  out << "ionic.a = " << fmt(c.ionic.threshold) << "\n";
  out << "ionic.eps = " << fmt(c.ionic.recovery_rate) << "\n";
  out << "conductivity.healthy_parallel = " << fmt(c.healthy_parallel) << "\n";
  out << "conductivity.healthy_transverse = " << fmt(c.healthy_transverse) << "\n";
  out << "conductivity.ischemic_parallel = " << fmt(c.ischemic_parallel) << "\n";
  out << "conductivity.ischemic_transverse = " << fmt(c.ischemic_transverse) << "\n";
  out << "stimulus.center_x = " << fmt(c.stimulus.center.x()) << "\n";
  out << "stimulus.center_y = " << fmt(c.stimulus.center.y()) << "\n";
  out << "stimulus.radius = " << fmt(c.stimulus.radius) << "\n";
  out << "stimulus.amplitude = " << fmt(c.stimulus.amplitude) << "\n";
  out << "inclusion.count = " << c.inclusions.size() << "\n";
  for (size_t k = 0; k < c.inclusions.size(); ++k) {
    const std::string prefix = "inclusion." + std::to_string(k + 1) + ".";
    out << prefix << "center_x = " << fmt(c.inclusions[k].center.x()) << "\n";
    out << prefix << "center_y = " << fmt(c.inclusions[k].center.y()) << "\n";
    out << prefix << "radius = " << fmt(c.inclusions[k].radius) << "\n";
  }
  out << "measurement.regions = " << c.measurement.str() << "\n";
  out << "noise.level = " << fmt(c.noise_level) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "reconstruction.mask_d0 = " << fmt(c.mask_d0) << "\n";
  out << "reconstruction.minima_count = " << c.minima_count << "\n";
  out << "reconstruction.min_separation = " << fmt(c.min_separation) << "\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = canonical_config_text(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace ischem
