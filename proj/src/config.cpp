#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "revfilt/harness.hpp"

namespace revfilt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

int parse_int(int line, const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) fail(line, key + " expects an integer, got '" + v + "'");
  return static_cast<int>(n);
}

double parse_real(int line, const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) fail(line, key + " expects a number, got '" + v + "'");
  return d;
}

bool parse_bool(int line, const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  fail(line, key + " expects true or false, got '" + v + "'");
}

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pgm" || ext == ".png";
}

}  // namespace

int RunConfig::budget_for(const NamedFilter& f) const {
  if (f.budget) return *f.budget;
  if (budget) return *budget;
  return f.spec.kind == FilterKind::motion ? 200 : 100;
}

void RunConfig::validate() const {
  if (images.empty()) throw ConfigError("config lists no images");
  if (filters.empty()) throw ConfigError("config lists no filters");
  if (methods.empty()) throw ConfigError("config lists no methods");
  if (accels.empty()) throw ConfigError("config lists no accelerations");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  for (const auto& f : filters) {
    if (budget_for(f) < 1) throw ConfigError("budget for filter '" + f.name + "' must be >= 1");
  }
  for (const auto& m : methods) m.validate();
  std::vector<std::string> names;
  for (const auto& f : filters) names.push_back(f.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw ConfigError("duplicate filter names in config");
  }
}

std::optional<int> jobs_from_env() {
  const char* env = std::getenv("REVFILT_JOBS");
  if (env == nullptr || *env == '\0') return std::nullopt;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) {
    throw ConfigError(std::string("REVFILT_JOBS must be a positive integer, got '") + env + "'");
  }
  return static_cast<int>(v);
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::map<Method, std::map<std::string, std::pair<int, std::string>>> method_overrides;
  std::map<std::string, std::size_t> filter_index;
  std::optional<std::filesystem::path> image_dir;

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  auto filter_slot = [&](const std::string& name) -> NamedFilter& {
    const auto it = filter_index.find(name);
    if (it != filter_index.end()) return cfg.filters[it->second];
    filter_index[name] = cfg.filters.size();
    cfg.filters.push_back({name, FilterSpec{}, std::nullopt});
    return cfg.filters.back();
  };

  std::set<std::string> filters_with_spec;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      const bool known = section == "experiment" || section == "filters" ||
                         section.rfind("filter.", 0) == 0 || section.rfind("method.", 0) == 0;
      if (!known) fail(line, "unknown section [" + section + "]");
      if (section.rfind("method.", 0) == 0) {
        try {
          parse_method(section.substr(7));
        } catch (const ConfigError& e) {
          fail(line, e.what());
        }
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (section.empty()) fail(line, "key '" + key + "' outside of a section");

    try {
      if (section == "experiment") {
        if (key == "images") {
          for (const auto& w : words(val)) cfg.images.push_back(resolve(w));
        } else if (key == "image_dir") {
          image_dir = resolve(val);
        } else if (key == "budget") {
          cfg.budget = parse_int(line, key, val);
        } else if (key == "jobs") {
          cfg.jobs = parse_int(line, key, val);
        } else if (key == "timing") {
          cfg.record_timing = parse_bool(line, key, val);
        } else if (key == "residual_tol") {
          cfg.residual_tol = parse_real(line, key, val);
        } else if (key == "methods") {
          for (const auto& w : words(val)) cfg.methods.push_back(MethodKind{parse_method(w)});
        } else if (key == "accels") {
          for (const auto& w : words(val)) cfg.accels.push_back(parse_accel_spec(w));
        } else if (key == "out") {
          cfg.out_dir = resolve(val);
        } else {
          fail(line, "unknown key '" + key + "' in [experiment]");
        }
      } else if (section == "filters") {
        NamedFilter& f = filter_slot(key);
        f.spec = parse_filter_spec(val);
        filters_with_spec.insert(key);
      } else if (section.rfind("filter.", 0) == 0) {
        NamedFilter& f = filter_slot(section.substr(7));
        if (key == "spec") {
          f.spec = parse_filter_spec(val);
          filters_with_spec.insert(f.name);
        } else if (key == "budget") {
          f.budget = parse_int(line, key, val);
        } else {
          fail(line, "unknown key '" + key + "' in [" + section + "]");
        }
      } else {
        if (key != "lambda" && key != "alpha") {
          fail(line, "unknown key '" + key + "' in [" + section + "] (expected lambda or alpha)");
        }
        method_overrides[parse_method(section.substr(7))][key] = {line, val};
      }
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      if (what.rfind("config line", 0) == 0) throw;
      fail(line, what);
    }
  }

  for (const auto& f : cfg.filters) {
    if (!filters_with_spec.contains(f.name)) {
      throw ConfigError("filter '" + f.name + "' has no spec");
    }
  }
  if (image_dir) {
    std::vector<std::filesystem::path> found;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(*image_dir, ec)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) found.push_back(entry.path());
    }
    if (ec) throw ConfigError("cannot list image_dir '" + image_dir->string() + "': " + ec.message());
    std::sort(found.begin(), found.end());
    cfg.images.insert(cfg.images.end(), found.begin(), found.end());
  }
  for (auto& m : cfg.methods) {
    const auto it = method_overrides.find(m.tag);
    if (it == method_overrides.end()) continue;
    for (const auto& [k, lv] : it->second) {
      (k == "lambda" ? m.lambda : m.alpha) = parse_real(lv.first, k, lv.second);
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace revfilt
