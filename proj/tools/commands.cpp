#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "edt/algebra.hpp"
#include "edt/config.hpp"
#include "edt/eval.hpp"
#include "edt/io.hpp"
#include "edt/rng.hpp"
#include "edt/scenes.hpp"
#include "edt/splits.hpp"
#include "edt/training.hpp"

namespace edt::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Context {
  config::RunConfig cfg;
  std::uint64_t digest = 0;
  fs::path out;
};

config::RunConfig resolve(const std::string& command, const Options& opt) {
  config::RunConfig c;
  if (!opt.config_path.empty()) c = config::load_config(opt.config_path);
  for (const auto& s : opt.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw config::ConfigError("--set expects key=value, got '" + s + "'");
    config::apply(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (opt.seed) c.seed = *opt.seed;
  if (opt.out) c.out = *opt.out;
  if (opt.dataset) c.dataset = *opt.dataset;
  if (opt.split) config::apply(c, "split", *opt.split);
  if (opt.arms) config::apply(c, "arms", *opt.arms);
  if (opt.workers) c.workers = *opt.workers;
  if (opt.seed_count) {
    if (*opt.seed_count == 0) throw config::ConfigError("--seeds must be at least 1");
    c.seeds.clear();
    for (std::size_t k = 0; k < *opt.seed_count; ++k) c.seeds.push_back(c.seed + k);
  }

  if (command == "train-aug" || command == "train-pred") {
    if (opt.arm != "edt") {
      eval::Arm arm;
      try {
        arm = eval::parse_arm(opt.arm);
      } catch (const std::exception& e) {
        throw config::ConfigError(e.what());
      }
      c.edt = eval::arm_config(arm, c.edt);
    }
  }
  if (opt.l0) c.edt.lambda0 = *opt.l0;
  if (opt.l1) c.edt.lambda1 = *opt.l1;
  if (opt.l2) c.edt.lambda2 = *opt.l2;
  if (opt.l3) c.edt.lambda3 = *opt.l3;
  if (opt.no_aug) c.edt.use_aug = false;

  try {
    training::validate(c.edt);
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError(e.what());
  }
  return c;
}

Context make_context(const std::string& command, const Options& opt) {
  Context ctx;
  ctx.cfg = resolve(command, opt);
  ctx.digest = config::digest(ctx.cfg);
  ctx.out = ctx.cfg.out;
  fs::create_directories(ctx.out);
  std::ofstream echo(ctx.out / (command + ".config.txt"));
  echo << "# " << command << " config digest " << config::digest_hex(ctx.digest) << "\n" << config::echo(ctx.cfg);
  return ctx;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

fs::path dataset_path(const Context& ctx) {
  return ctx.cfg.dataset.empty() ? ctx.out / "dataset.edt1" : fs::path(ctx.cfg.dataset);
}

fs::path artifact(const std::optional<std::string>& flag, const Context& ctx, const char* name) {
  return flag ? fs::path(*flag) : ctx.out / name;
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw MissingArtifact(std::string(what) + " not found at " + p.string());
}

scenes::Dataset load_dataset(const Context& ctx) {
  const auto p = dataset_path(ctx);
  require_file(p, "dataset");
  auto data = io::load_dataset(p);
  if (config::format_roster(data.space()) != config::format_roster(config::parse_roster(ctx.cfg.roster))) {
    throw config::ConfigError("dataset " + p.string() + " was generated for a different roster");
  }
  return data;
}

splits::SplitMask make_split(const Context& ctx, const scenes::Dataset& data) {
  try {
    return splits::make_split(data.space(), ctx.cfg.split, ctx.cfg.seed);
  } catch (const splits::SplitError& e) {
    throw config::ConfigError(std::string("split: ") + e.what());
  }
}

std::string with_provenance(const std::string& json_line, const Context& ctx) {
  auto j = ordered_json::parse(json_line);
  j["seed"] = ctx.cfg.seed;
  j["config_digest"] = config::digest_hex(ctx.digest);
  return j.dump();
}

std::string log_lines(const std::vector<training::LogRecord>& log, const Context& ctx) {
  std::string s;
  for (const auto& r : log) s += with_provenance(training::to_json_line(r), ctx) + "\n";
  return s;
}

ordered_json laws_json(const training::LawReport& rep, const factors::ProductLabelSpace& space) {
  ordered_json j;
  j["oracle_gap"] = rep.oracle_gap;
  j["compositionality"] = rep.compositionality;
  j["commutativity"] = rep.commutativity;
  ordered_json leak;
  for (std::size_t i = 0; i < space.num_factors(); ++i) leak[space.factor(i).name] = rep.leakage.at(i);
  j["leakage"] = leak;
  ordered_json augs = ordered_json::array();
  for (const auto& a : rep.augmenters) {
    ordered_json e;
    e["factor"] = space.factor(a.factor).name;
    e["element"] = a.element;
    e["oracle_gap"] = a.oracle_gap;
    e["composition"] = a.composition;
    e["target_accuracy"] = a.target_accuracy;
    ordered_json drift;
    for (std::size_t i = 0; i < space.num_factors(); ++i)
      if (i != a.factor) drift[space.factor(i).name] = a.drift.at(i);
    e["drift"] = drift;
    augs.push_back(e);
  }
  j["augmenters"] = augs;
  return j;
}

std::string tuple_text(const factors::ProductLabelSpace& space, factors::CellId c) {
  const auto y = space.tuple_of(c);
  std::string s = "(";
  for (std::size_t i = 0; i < space.num_factors(); ++i)
    s += (i ? ", " : "") + space.factor(i).name + "=" + std::to_string(y[i]);
  return s + ")";
}

std::string witness_text(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t k = 0; k < w.size(); ++k) s += (k ? "," : "") + std::to_string(w[k]);
  return "[" + s + "]";
}

// ---------------------------------------------------------------------------

int cmd_gen(const Options& opt, std::ostream& out, std::ostream& err) {
  Context ctx = make_context("gen", opt);
  const auto space = config::parse_roster(ctx.cfg.roster);
  const auto params = config::render_params(ctx.cfg);
  try {
    scenes::validate_renderable(space, params);
  } catch (const scenes::RenderError& e) {
    throw config::ConfigError(e.what());
  }
  const auto inj = scenes::injectivity_check(space, params);
  if (!inj.injective) {
    const auto [a, b] = *inj.collision;
    err << "collision: cells " << a << " " << tuple_text(space, a) << " and " << b << " " << tuple_text(space, b)
        << " render to the same image\n";
    return kLawViolation;
  }
  const auto data = scenes::render_grid(space, params);
  const auto path = dataset_path(ctx);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::save_dataset(path, data);
  out << "dataset " << path.string() << ": " << data.size() << " instances, injective, config "
      << config::digest_hex(ctx.digest) << "\n";
  return kOk;
}

int cmd_verify_algebra(const Options& opt, std::ostream& out, std::ostream& err) {
  Context ctx = make_context("verify-algebra", opt);
  out << "config " << config::digest_hex(ctx.digest) << " seed " << ctx.cfg.seed << "\n";
  bool ok = true;
  auto report = [&](const std::string& what, const algebra::LawReport& r) {
    out << (r.holds() ? "ok   " : "FAIL ") << what << ": " << r.law << " " << r.checked << " checked, "
        << r.violations << " violations";
    if (!r.holds()) {
      out << ", witness " << witness_text(r.witness);
      err << what << ": " << r.law << " violated at " << witness_text(r.witness) << "\n";
      ok = false;
    }
    out << "\n";
  };

  if (opt.table) {
    std::ifstream f(*opt.table);
    if (!f) throw MissingArtifact("algebra table not found at " + *opt.table);
    algebra::AlgebraText t = [&] {
      try {
        return algebra::parse_algebra_text(f);
      } catch (const algebra::StructuralError& e) {
        throw config::ConfigError(std::string("algebra table: ") + e.what());
      }
    }();
    const auto mv = algebra::monoid_verify(t.monoid);
    report("table", mv.associativity);
    report("table", mv.identity);
    if (t.action) {
      const auto av = algebra::action_verify(*t.action);
      report("table action", av.composition);
      report("table action", av.identity);
    }
    return ok ? kOk : kLawViolation;
  }

  const auto space = config::parse_roster(ctx.cfg.roster);
  for (std::size_t i = 0; i < space.num_factors(); ++i) {
    const auto& f = space.factor(i);
    const auto mv = algebra::monoid_verify(f.monoid());
    report(f.name, mv.associativity);
    report(f.name, mv.identity);
    const auto av = algebra::action_verify(f.action);
    report(f.name, av.composition);
    report(f.name, av.identity);
    const auto gens = space.generators(i);
    const auto closure = algebra::closure_from_generators(f.monoid(), gens);
    const bool generated = closure.size() == f.monoid().size();
    out << (generated ? "ok   " : "FAIL ") << f.name << ": generators " << witness_text({gens.begin(), gens.end()})
        << " close to " << closure.size() << " of " << f.monoid().size() << " elements\n";
    if (!generated) {
      err << f.name << ": generators do not generate the monoid\n";
      ok = false;
    }
  }

  for (std::size_t i = 0; i < space.num_factors(); ++i) {
    for (std::size_t j = i + 1; j < space.num_factors(); ++j) {
      const auto& fi = space.factor(i);
      const auto& fj = space.factor(j);
      const auto prod = algebra::product_action(fi.action, fj.action);
      report(fi.name + " x " + fj.name, algebra::check_decomposition(prod, fi.monoid(), fj.monoid()));
      const auto pi = algebra::action_properties(fi.action), pj = algebra::action_properties(fj.action);
      const auto pp = algebra::action_properties(prod);
      out << "     " << fi.name << " x " << fj.name << ": " << pp.image_size
          << " distinct product endofunctions; single-factor forms give at most "
          << pi.image_size + pj.image_size - 1 << " (|A1| + |A2| = " << fi.monoid().size() + fj.monoid().size()
          << ")\n";
    }
  }

  // Exact action on images, on random tuples.
  const auto params = config::render_params(ctx.cfg);
  try {
    scenes::validate_renderable(space, params);
  } catch (const scenes::RenderError& e) {
    out << "skip image laws: " << e.what() << "\n";
    return ok ? kOk : kLawViolation;
  }
  Rng rng(ctx.cfg.seed);
  constexpr std::size_t kTuples = 100;
  algebra::LawReport comp{"image composition", 0, 0, {}, 0.0};
  algebra::LawReport comm{"image commutativity", 0, 0, {}, 0.0};
  algebra::LawReport ident{"image identity", 0, 0, {}, 0.0};
  const std::size_t nf = space.num_factors();
  for (std::size_t t = 0; t < kTuples; ++t) {
    const auto y = space.tuple_of(rng.index(space.grid_size()));
    const scenes::LabeledImage x{y, scenes::render(space, params, y)};
    std::vector<factors::Element> a(nf), b(nf), ab(nf), e(nf);
    for (std::size_t i = 0; i < nf; ++i) {
      const auto& m = space.factor(i).monoid();
      a[i] = static_cast<factors::Element>(rng.index(m.size()));
      b[i] = static_cast<factors::Element>(rng.index(m.size()));
      ab[i] = m.compose(a[i], b[i]);
      e[i] = m.identity();
    }
    const auto bx = scenes::oracle_augment(space, params, b, x);
    const auto a_bx = scenes::oracle_augment(space, params, a, {factors::act_tuple(space, b, y), bx});
    ++comp.checked;
    if (a_bx != scenes::oracle_augment(space, params, ab, x) && comp.violations++ == 0) comp.witness = {t};
    ++ident.checked;
    if (scenes::oracle_augment(space, params, e, x) != x.image && ident.violations++ == 0) ident.witness = {t};
    for (std::size_t i = 0; i < nf; ++i) {
      for (std::size_t j = i + 1; j < nf; ++j) {
        auto only = [&](std::size_t k) {
          auto v = e;
          v[k] = a[k];
          return v;
        };
        const auto ai = only(i), aj = only(j);
        const auto yi = factors::act_tuple(space, ai, y), yj = factors::act_tuple(space, aj, y);
        const auto ij = scenes::oracle_augment(space, params, aj, {yi, scenes::render(space, params, yi)});
        const auto ji = scenes::oracle_augment(space, params, ai, {yj, scenes::render(space, params, yj)});
        ++comm.checked;
        if (ij != ji && comm.violations++ == 0) comm.witness = {t, i, j};
      }
    }
  }
  report("images", comp);
  report("images", comm);
  report("images", ident);
  return ok ? kOk : kLawViolation;
}

int cmd_train_aug(const Options& opt, std::ostream& out, std::ostream&) {
  Context ctx = make_context("train-aug", opt);
  const auto data = load_dataset(ctx);
  const auto mask = make_split(ctx, data);
  {
    std::ostringstream s;
    splits::write_split_text(s, mask);
    write_text(ctx.out / "split.txt", s.str());
  }
  auto cfg = ctx.cfg.edt;
  cfg.seed = ctx.cfg.seed;
  const auto run = training::train_augmenters(data, mask, cfg);
  const io::Provenance prov{ctx.cfg.seed, ctx.digest};
  const auto path = artifact(opt.augmenters, ctx, "augmenters.edtw");
  io::save_augmenters(path, run.augmenters, prov);
  write_text(ctx.out / "train_aug.jsonl", log_lines(run.log, ctx));
  out << run.augmenters.size() << " augmenters trained on " << mask.train_count() << " train cells -> "
      << path.string() << "\n";
  return kOk;
}

int cmd_train_pred(const Options& opt, std::ostream& out, std::ostream&) {
  Context ctx = make_context("train-pred", opt);
  const auto data = load_dataset(ctx);
  const auto mask = make_split(ctx, data);
  {
    std::ostringstream s;
    splits::write_split_text(s, mask);
    write_text(ctx.out / "split.txt", s.str());
  }
  auto cfg = ctx.cfg.edt;
  cfg.seed = ctx.cfg.seed;
  std::vector<training::Augmenter> augs;
  if (training::augments_predictor(cfg) && !cfg.oracle) {
    const auto p = artifact(opt.augmenters, ctx, "augmenters.edtw");
    require_file(p, "augmenters");
    augs = io::load_augmenters(p);
  }
  const auto run = training::train_predictor(data, mask, augs, cfg, config::render_params(ctx.cfg));
  const auto path = artifact(opt.predictor, ctx, "predictor.edtw");
  io::save_predictor(path, run.predictor, {ctx.cfg.seed, ctx.digest});
  write_text(ctx.out / "train_pred.jsonl", log_lines(run.log, ctx));
  out << "predictor trained on " << mask.train_count() << " train cells -> " << path.string() << "\n";
  return kOk;
}

int cmd_eval(const Options& opt, std::ostream& out, std::ostream&) {
  Context ctx = make_context("eval", opt);
  const auto data = load_dataset(ctx);
  const auto mask = make_split(ctx, data);
  const auto p = artifact(opt.predictor, ctx, "predictor.edtw");
  require_file(p, "predictor");
  const auto pred = io::load_predictor(p);
  if (pred.model.heads.size() != data.space().num_factors()) {
    throw config::ConfigError("predictor " + p.string() + " does not match the roster");
  }
  eval::Arm arm;
  try {
    arm = eval::parse_arm(opt.arm);
  } catch (const std::exception& e) {
    throw config::ConfigError(e.what());
  }
  std::string lines;
  for (auto side : {eval::Side::Train, eval::Side::Test}) {
    auto rec = eval::evaluate(pred.model, data, mask, side);
    rec.arm = std::string(eval::key(arm));
    rec.seed = ctx.cfg.seed;
    lines += eval::to_json_line(rec, ctx.digest) + "\n";
    out << eval::to_string(side) << " (" << rec.count << " cells):";
    for (const auto& m : rec.metrics) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " %s %.2f%s", m.factor.c_str(), m.value, m.is_rate ? "%" : "");
      out << buf;
    }
    out << "\n";
  }
  write_text(ctx.out / "metrics.jsonl", lines);
  return kOk;
}

int cmd_ablate(const Options& opt, std::ostream& out, std::ostream& err) {
  Context ctx = make_context("ablate", opt);
  const auto data = load_dataset(ctx);
  const auto acfg = config::ablation_config(ctx.cfg);
  eval::AblationResult res;
  try {
    res = eval::run_ablation(data, acfg);
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError(e.what());
  }

  std::string results, laws;
  for (const auto& r : res.runs) {
    if (r.failed) {
      ordered_json j;
      j["arm"] = std::string(eval::key(r.arm));
      j["seed"] = r.seed;
      j["failed"] = true;
      j["error"] = r.error;
      j["config_digest"] = config::digest_hex(ctx.digest);
      results += j.dump() + "\n";
      err << "run " << eval::key(r.arm) << " seed " << r.seed << " failed: " << r.error << "\n";
      continue;
    }
    results += eval::to_json_line(r.train, ctx.digest) + "\n";
    results += eval::to_json_line(r.test, ctx.digest) + "\n";
    if (r.laws) {
      ordered_json j;
      j["arm"] = std::string(eval::key(r.arm));
      j["seed"] = r.seed;
      j["config_digest"] = config::digest_hex(ctx.digest);
      j["laws"] = laws_json(*r.laws, data.space());
      laws += j.dump() + "\n";
    }
    err << "run " << eval::key(r.arm) << " seed " << r.seed << " done in " << r.seconds << " s\n";
  }
  std::string table = "# config " + config::digest_hex(ctx.digest) + ", split " +
                      splits::format_split_spec(ctx.cfg.split) + ", " + std::to_string(acfg.seeds.size()) +
                      " seeds; test error (%) / mse x100, mean (std)\n" + eval::render_table(res.table);
  for (const auto& c : eval::check_ordering(res.table)) table += (c.holds ? "holds:  " : "fails:  ") + c.description + "\n";

  write_text(ctx.out / "results.jsonl", results);
  write_text(ctx.out / "laws.jsonl", laws);
  write_text(ctx.out / "table.txt", table);
  out << table;
  return kOk;
}

int cmd_law_report(const Options& opt, std::ostream& out, std::ostream&) {
  Context ctx = make_context("law-report", opt);
  const auto data = load_dataset(ctx);
  const auto mask = make_split(ctx, data);
  const auto p = artifact(opt.augmenters, ctx, "augmenters.edtw");
  require_file(p, "augmenters");
  const auto augs = io::load_augmenters(p);
  for (const auto& a : augs) {
    if (a.factor >= data.space().num_factors()) throw config::ConfigError("augmenters do not match the roster");
  }
  auto cells = mask.train_cells();
  Rng rng = training::stream(ctx.cfg.seed, 21);
  rng.shuffle(cells);
  cells.resize(std::min(cells.size(), std::max<std::size_t>(1, ctx.cfg.law_cells)));
  std::sort(cells.begin(), cells.end());
  const scenes::NearestDecoder decoder(data.space(), config::render_params(ctx.cfg));
  const auto rep = training::law_report(data, decoder, augs, cells);
  ordered_json j;
  j["seed"] = ctx.cfg.seed;
  j["config_digest"] = config::digest_hex(ctx.digest);
  j["cells"] = cells.size();
  j["laws"] = laws_json(rep, data.space());
  write_text(ctx.out / "law_report.json", j.dump(2) + "\n");
  char buf[160];
  std::snprintf(buf, sizeof buf, "oracle gap %.6f  compositionality %.6f  commutativity %.6f  (%zu train cells)\n",
                rep.oracle_gap, rep.compositionality, rep.commutativity, cells.size());
  out << buf;
  return kOk;
}

}  // namespace

int run_command(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, int (*)(const Options&, std::ostream&, std::ostream&)> table = {
      {"gen", cmd_gen},
      {"verify-algebra", cmd_verify_algebra},
      {"train-aug", cmd_train_aug},
      {"train-pred", cmd_train_pred},
      {"eval", cmd_eval},
      {"ablate", cmd_ablate},
      {"law-report", cmd_law_report},
  };
  auto it = table.find(command);
  if (it == table.end()) {
    err << "unknown command '" << command << "'\n";
    return kConfigError;
  }
  try {
    return it->second(opt, out, err);
  } catch (const config::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const MissingArtifact& e) {
    err << "missing artifact: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const io::FormatError& e) {
    err << "unusable artifact: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace edt::cli
