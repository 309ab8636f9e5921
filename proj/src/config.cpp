#include "edt/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "edt/hash.hpp"

namespace edt::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw ConfigError("config key '" + std::string(key) + "': cannot use '" + std::string(value) + "' (" +
                    std::string(why) + ")");
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad(key, v, "expected a non-negative integer");
  return x;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(std::string_view key, std::string_view v) {
  // from_chars for double is not available everywhere; strtod on a copy is.
  const std::string s(v);
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(x)) bad(key, v, "expected a finite number");
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, v, "expected true or false");
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + f(v[k]);
  return s;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  const char* key;
  Setter set;
  Getter get;
  bool path = false;  // excluded from the digest
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"roster",
       [](RunConfig& c, auto k, auto v) {
         try {
           parse_roster(v);
         } catch (const std::exception& e) {
           bad(k, v, e.what());
         }
         c.roster = std::string(v);
       },
       [](const RunConfig& c) { return c.roster; }},
      {"palette",
       [](RunConfig& c, auto k, auto v) {
         RunConfig probe;
         probe.palette = std::string(v);
         try {
           render_params(probe);
         } catch (const std::exception& e) {
           bad(k, v, e.what());
         }
         c.palette = std::string(v);
       },
       [](const RunConfig& c) { return c.palette; }},
      {"split",
       [](RunConfig& c, auto k, auto v) {
         try {
           c.split = splits::parse_split_spec(std::string(v));
         } catch (const std::exception& e) {
           bad(k, v, e.what());
         }
       },
       [](const RunConfig& c) { return splits::format_split_spec(c.split); }},
      {"seed", [](RunConfig& c, auto k, auto v) { c.seed = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"seeds",
       [](RunConfig& c, auto k, auto v) {
         std::vector<std::uint64_t> s;
         for (auto part : split_on(v, ',')) s.push_back(to_u64(k, part));
         c.seeds = std::move(s);
       },
       [](const RunConfig& c) {
         return join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
       }},
      {"arms",
       [](RunConfig& c, auto k, auto v) {
         try {
           c.arms = eval::parse_arms(v);
         } catch (const std::exception& e) {
           bad(k, v, e.what());
         }
       },
       [](const RunConfig& c) {
         return join<eval::Arm>(c.arms, [](const eval::Arm& a) { return std::string(eval::key(a)); });
       }},
      {"workers", [](RunConfig& c, auto k, auto v) { c.workers = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.workers); }},
      {"law_cells", [](RunConfig& c, auto k, auto v) { c.law_cells = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.law_cells); }},
      {"lambda0", [](RunConfig& c, auto k, auto v) { c.edt.lambda0 = to_double(k, v); },
       [](const RunConfig& c) { return fmt_double(c.edt.lambda0); }},
      {"lambda1", [](RunConfig& c, auto k, auto v) { c.edt.lambda1 = to_double(k, v); },
       [](const RunConfig& c) { return fmt_double(c.edt.lambda1); }},
      {"lambda2", [](RunConfig& c, auto k, auto v) { c.edt.lambda2 = to_double(k, v); },
       [](const RunConfig& c) { return fmt_double(c.edt.lambda2); }},
      {"lambda3", [](RunConfig& c, auto k, auto v) { c.edt.lambda3 = to_double(k, v); },
       [](const RunConfig& c) { return fmt_double(c.edt.lambda3); }},
      {"distance",
       [](RunConfig& c, auto k, auto v) {
         if (v == "bce") c.edt.distance = diff::PixelDistance::Bce;
         else if (v == "mse") c.edt.distance = diff::PixelDistance::Mse;
         else bad(k, v, "expected bce or mse");
       },
       [](const RunConfig& c) { return std::string(c.edt.distance == diff::PixelDistance::Bce ? "bce" : "mse"); }},
      {"lr_aug", [](RunConfig& c, auto k, auto v) { c.edt.lr_aug = to_double(k, v); },
       [](const RunConfig& c) { return fmt_double(c.edt.lr_aug); }},
      {"lr_pred", [](RunConfig& c, auto k, auto v) { c.edt.lr_pred = to_double(k, v); },
       [](const RunConfig& c) { return fmt_double(c.edt.lr_pred); }},
      {"batch", [](RunConfig& c, auto k, auto v) { c.edt.batch = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.batch); }},
      {"reg_batch", [](RunConfig& c, auto k, auto v) { c.edt.reg_batch = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.reg_batch); }},
      {"aug_iters", [](RunConfig& c, auto k, auto v) { c.edt.aug_iters = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.aug_iters); }},
      {"pred_iters", [](RunConfig& c, auto k, auto v) { c.edt.pred_iters = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.pred_iters); }},
      {"aug_hidden", [](RunConfig& c, auto k, auto v) { c.edt.aug_hidden = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.aug_hidden); }},
      {"pred_hidden",
       [](RunConfig& c, auto k, auto v) {
         std::vector<std::size_t> h;
         for (auto part : split_on(v, ',')) h.push_back(to_size(k, part));
         c.edt.pred_hidden = std::move(h);
       },
       [](const RunConfig& c) {
         return join<std::size_t>(c.edt.pred_hidden, [](const std::size_t& s) { return std::to_string(s); });
       }},
      {"chain_max", [](RunConfig& c, auto k, auto v) { c.edt.chain_max = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.chain_max); }},
      {"aug_depth", [](RunConfig& c, auto k, auto v) { c.edt.aug_depth = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.aug_depth); }},
      {"use_aug", [](RunConfig& c, auto k, auto v) { c.edt.use_aug = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.edt.use_aug ? "true" : "false"); }},
      {"oracle", [](RunConfig& c, auto k, auto v) { c.edt.oracle = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.edt.oracle ? "true" : "false"); }},
      {"log_every", [](RunConfig& c, auto k, auto v) { c.edt.log_every = to_size(k, v); },
       [](const RunConfig& c) { return std::to_string(c.edt.log_every); }},
      {"dataset", [](RunConfig& c, auto, auto v) { c.dataset = std::string(v); },
       [](const RunConfig& c) { return c.dataset; }, true},
      {"out", [](RunConfig& c, auto, auto v) { c.out = std::string(v); },
       [](const RunConfig& c) { return c.out; }, true},
  };
  return f;
}

}  // namespace

void apply(RunConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply(base, s.substr(0, eq), s.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(f, std::move(base));
}

std::string echo(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << " = " << f.get(cfg) << '\n';
  return os.str();
}

std::uint64_t digest(const RunConfig& cfg) {
  Fnv1a h;
  for (const auto& f : fields()) {
    if (f.path) continue;
    h.update(std::string(f.key) + "=" + f.get(cfg) + "\n");
  }
  return h.digest();
}

std::string digest_hex(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

factors::ProductLabelSpace parse_roster(std::string_view text) {
  std::vector<factors::FactorSpec> specs;
  for (auto entry : split_on(text, ',')) {
    auto parts = split_on(entry, ':');
    if (parts.size() != 3 || parts[0].empty()) {
      throw ConfigError("roster entry '" + std::string(entry) + "' is not name:kind:cardinality");
    }
    std::uint32_t card = 0;
    auto [p, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), card);
    if (ec != std::errc{} || p != parts[2].data() + parts[2].size() || card == 0) {
      throw ConfigError("roster entry '" + std::string(entry) + "' needs a positive cardinality");
    }
    specs.push_back(factors::make_factor(std::string(parts[0]), factors::parse_factor_kind(parts[1]), card));
  }
  return factors::ProductLabelSpace(std::move(specs));
}

std::string format_roster(const factors::ProductLabelSpace& space) {
  std::string s;
  for (std::size_t i = 0; i < space.num_factors(); ++i) {
    const auto& f = space.factor(i);
    s += (i ? "," : "") + f.name + ":" + std::string(factors::to_string(f.kind)) + ":" + std::to_string(f.cardinality);
  }
  return s;
}

scenes::RenderParams render_params(const RunConfig& cfg) {
  scenes::RenderParams p;
  if (trim(cfg.palette).empty()) return p;
  const auto colours = split_on(cfg.palette, ';');
  if (colours.size() > p.palette.size()) throw ConfigError("palette holds more than 5 colours");
  for (std::size_t k = 0; k < colours.size(); ++k) {
    std::istringstream is{std::string(colours[k])};
    float r, g, b;
    std::string rest;
    if (!(is >> r >> g >> b) || (is >> rest)) throw ConfigError("palette colour '" + std::string(colours[k]) + "' is not 'r g b'");
    for (float c : {r, g, b})
      if (!(c >= 0.0f && c <= 1.0f)) throw ConfigError("palette intensities must lie in [0, 1]");
    p.palette[k] = {r, g, b};
  }
  return p;
}

eval::AblationConfig ablation_config(const RunConfig& cfg) {
  eval::AblationConfig a;
  a.base = cfg.edt;
  a.split = cfg.split;
  a.arms = cfg.arms;
  a.seeds = cfg.seeds;
  a.workers = cfg.workers;
  a.params = render_params(cfg);
  a.law_cells = cfg.law_cells;
  return a;
}

}  // namespace edt::config
