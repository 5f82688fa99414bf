#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "semhash/cli.hpp"
#include "semhash/error.hpp"

namespace semhash::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    throw UsageError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw UsageError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::vector<std::filesystem::path> parse_paths(const std::string& key, const std::string& v,
                                               const std::filesystem::path& base) {
  std::vector<std::filesystem::path> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw UsageError("config key '" + key + "': empty path in list");
    std::filesystem::path p(item);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  if (out.empty()) throw UsageError("config key '" + key + "': no paths given");
  for (const auto& p : out) {
    if (!std::filesystem::exists(p)) {
      throw UsageError("config key '" + key + "': '" + p.string() + "' does not exist");
    }
  }
  return out;
}

}  // namespace

TauSetting TauSetting::parse(const std::string& text) {
  TauSetting tau;
  std::string body = trim(text);
  tau.per_concept = !body.empty() && body.back() == 'm';
  if (tau.per_concept) body.pop_back();
  if (body.empty() && tau.per_concept) body = "1";
  tau.value = parse_real("tau", body);
  if (!(tau.value > 0.0)) throw UsageError("tau must be positive, got '" + text + "'");
  return tau;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw UsageError("config line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    }
  }

  RunConfig cfg;
  // a preset is a baseline; explicit keys override it wherever they appear
  if (auto it = kv.find("preset"); it != kv.end()) {
    hashnet::apply_preset(cfg.train, it->second);
    kv.erase(it);
  }

  auto& t = cfg.train;
  for (const auto& [key, value] : kv) {
    if (key == "bits" || key == "k") {
      t.bits = parse_count(key, value);
    } else if (key == "alpha") {
      t.alpha = parse_real(key, value);
    } else if (key == "beta") {
      t.beta = parse_real(key, value);
    } else if (key == "gamma") {
      t.gamma = parse_real(key, value);
    } else if (key == "lambda") {
      t.lambda = parse_real(key, value);
    } else if (key == "lr") {
      t.lr = parse_real(key, value);
    } else if (key == "momentum") {
      t.momentum = parse_real(key, value);
    } else if (key == "weight_decay") {
      t.weight_decay = parse_real(key, value);
    } else if (key == "batch") {
      t.batch = parse_count(key, value);
    } else if (key == "epochs") {
      t.epochs = parse_count(key, value);
    } else if (key == "seed") {
      t.seed = parse_count(key, value);
    } else if (key == "hidden") {
      t.hidden = parse_count(key, value);
    } else if (key == "scores_path") {
      cfg.scores_paths = parse_paths(key, value, base_dir);
    } else if (key == "distributions_path") {
      cfg.distributions_paths = parse_paths(key, value, base_dir);
    } else if (key == "features_path") {
      auto paths = parse_paths(key, value, base_dir);
      if (paths.size() != 1) throw UsageError("features_path takes a single path");
      cfg.features_path = paths.front();
    } else if (key == "labels_path") {
      cfg.labels_paths = parse_paths(key, value, base_dir);
    } else if (key == "sim_mode") {
      cfg.sim_mode = conceptsim::parse_similarity_mode(value);
    } else if (key == "tau") {
      cfg.tau = TauSetting::parse(value);
    } else if (key == "tau_second_pass") {
      if (value == "scaled") {
        cfg.second_pass = conceptsim::SecondPassTemperature::kScaled;
      } else if (value == "same") {
        cfg.second_pass = conceptsim::SecondPassTemperature::kSame;
      } else {
        throw UsageError("tau_second_pass must be 'scaled' or 'same', got '" + value + "'");
      }
    } else if (key == "output_dir") {
      std::filesystem::path p(value);
      cfg.output_dir = p.is_absolute() ? p : base_dir / p;
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  t.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace semhash::cli
