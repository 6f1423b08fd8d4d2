#include "nikodym/cli.hpp"

#include "nikodym/curve.hpp"
#include "nikodym/cutoffs.hpp"
#include "nikodym/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace nikodym {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_scalar_token(const std::string& tok) {
  const auto caret = tok.find('^');
  if (caret != std::string::npos) {
    const double base = std::stod(tok.substr(0, caret));
    const double expn = std::stod(tok.substr(caret + 1));
    return std::pow(base, expn);
  }
  return std::stod(tok);
}

std::string join_deltas(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i)
    os << (i ? ";" : "") << format_double(v[i]);
  return os.str();
}

}  // namespace

std::vector<double> parse_delta_spec(const std::string& spec) {
  std::vector<double> out;
  const auto range = spec.find("..");
  if (range != std::string::npos) {
    const std::string lo_tok = trim(spec.substr(0, range));
    const std::string hi_tok = trim(spec.substr(range + 2));
    const double lo = parse_scalar_token(lo_tok);
    const double hi = parse_scalar_token(hi_tok);
    double big = std::max(lo, hi), small = std::min(lo, hi);
    for (double v = big; v >= small * (1.0 - 1e-12); v /= 2.0) out.push_back(v);
    return out;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_scalar_token(tok));
  }
  if (out.empty()) throw ConfigurationError("empty delta spec: " + spec);
  return out;
}

void apply_config_key(RunConfig& config, const std::string& key,
                      const std::string& value, int line) {
  auto bad = [&](const std::string& why) {
    std::ostringstream os;
    os << "line " << line << ": " << why << " (key '" << key << "', value '"
       << value << "')";
    throw ConfigurationError(os.str());
  };
  try {
    if (key == "experiment" || key == "preset") config.experiment = value;
    else if (key == "curve") config.curve = value;
    else if (key == "d") config.d = std::stoi(value);
    else if (key == "delta" || key == "deltas") config.deltas = parse_delta_spec(value);
    else if (key == "lambda") config.lambda = parse_scalar_token(value);
    else if (key == "n" || key == "N" || key == "order") config.order = std::stoi(value);
    else if (key == "p") config.p = std::stod(value);
    else if (key == "q") config.q = std::stod(value);
    else if (key == "grid.X" || key == "grid.x") config.grid_X = std::stod(value);
    else if (key == "grid.nx") config.grid_nx = std::stoi(value);
    else if (key == "grid.nt") config.grid_nt = std::stoi(value);
    else if (key == "seed") config.seed = std::stoull(value);
    else if (key == "out" || key == "output_dir") config.out_dir = value;
    else if (key == "workers") config.workers = std::stoi(value);
    else if (key == "slack") config.slack = std::stod(value);
    else if (key == "samples") config.samples = std::stoi(value);
    else if (key == "fields") config.fields = std::stoi(value);
    else if (key == "trials") config.trials = std::stoi(value);
    else if (key == "mc_samples") config.mc_samples = std::stoll(value);
    else bad("unknown key");
  } catch (const ConfigurationError&) {
    throw;
  } catch (const std::exception&) {
    bad("malformed value");
  }
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file: " + path);
  RunConfig config;
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        std::ostringstream os;
        os << "line " << line << ": unterminated section header";
        throw ConfigurationError(os.str());
      }
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << "line " << line << ": expected key = value";
      throw ConfigurationError(os.str());
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    apply_config_key(config, full, value, line);
  }
  return config;
}

std::vector<std::pair<std::string, std::string>> RunConfig::canonical_params()
    const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("experiment", experiment);
  kv.emplace_back("curve", curve);
  kv.emplace_back("d", std::to_string(d));
  kv.emplace_back("deltas", join_deltas(deltas));
  kv.emplace_back("lambda", format_double(lambda));
  kv.emplace_back("order", std::to_string(order));
  kv.emplace_back("p", format_double(p));
  kv.emplace_back("q", format_double(q));
  kv.emplace_back("grid.X", format_double(grid_X));
  kv.emplace_back("grid.nx", std::to_string(grid_nx));
  kv.emplace_back("grid.nt", std::to_string(grid_nt));
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("slack", format_double(slack));
  kv.emplace_back("samples", std::to_string(samples));
  kv.emplace_back("fields", std::to_string(fields));
  kv.emplace_back("trials", std::to_string(trials));
  kv.emplace_back("mc_samples", std::to_string(mc_samples));
  return kv;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : canonical_params()) {
    h = fnv1a(k, h);
    h = fnv1a("=", h);
    h = fnv1a(v, h);
    h = fnv1a(";", h);
  }
  return hash_hex(h).substr(0, 12);
}

std::vector<PresetInfo> list_presets(const std::string& filter) {
  std::vector<PresetInfo> all = {
      {"aniso-admissibility", "deltas, curve, samples", "seconds"},
      {"lemma-audit", "curve, lambda, N, samples", "minutes"},
      {"sharpness-log", "curve, deltas, p", "minutes"},
      {"sharpness-range", "curve, deltas, p", "minutes"},
      {"sobolev-check", "curve, deltas, fields", "minutes"},
      {"theorem1-scaling", "curve, deltas, slack", "minutes"},
      {"tube-volume", "mc_samples", "seconds"},
  };
  if (filter.empty()) return all;
  std::string f = filter;
  std::transform(f.begin(), f.end(), f.begin(), ::tolower);
  std::vector<PresetInfo> out;
  for (auto& preset : all) {
    std::string n = preset.name;
    std::transform(n.begin(), n.end(), n.begin(), ::tolower);
    if (n.find(f) != std::string::npos) out.push_back(preset);
  }
  return out;
}

namespace {

struct Artifacts {
  std::string report_json;
  std::vector<std::string> csv_lines;  // header first
  int exit_code = 0;
  std::string failed_stage;
};

std::vector<double> default_deltas(const RunConfig& config,
                                   std::initializer_list<double> exps) {
  if (!config.deltas.empty()) return config.deltas;
  std::vector<double> out;
  for (double e : exps) out.push_back(std::pow(2.0, e));
  return out;
}

Artifacts run_theorem1(const RunConfig& config, const ParallelContext& ctx) {
  const Curve curve = curve_from_name(config.curve, config.d);
  const auto deltas = default_deltas(config, {-3, -4, -5, -6, -7});
  const auto rep = theorem1_trend(curve, deltas, config.d / 2.0, config.slack,
                                  config.seed, ctx);
  Artifacts art;
  art.report_json = rep.to_json();
  art.csv_lines.push_back("delta,log_inv_delta,value,witness,tube,ball");
  for (const auto& pt : rep.points) {
    std::ostringstream os;
    os << format_double(pt.delta) << ","
       << format_double(std::log(1.0 / pt.delta)) << ","
       << format_double(pt.value) << "," << pt.witness << ","
       << format_double(pt.tube_value) << "," << format_double(pt.ball_value);
    art.csv_lines.push_back(os.str());
  }
  return art;
}

Artifacts run_sharpness_log(const RunConfig& config, const ParallelContext& ctx) {
  const Curve curve = curve_from_name(config.curve, config.d);
  const auto deltas = default_deltas(config, {-4, -5, -6, -7});
  const auto sweep =
      sharpness_log_sweep(curve, deltas, config.p, config.seed, ctx);
  Artifacts art;
  art.report_json = sweep.to_json();
  art.csv_lines.push_back("delta,k,measure,c");
  for (const auto& rep : sweep.reports)
    for (std::size_t k = 0; k < rep.level_measure.size(); ++k) {
      std::ostringstream os;
      os << format_double(rep.delta) << "," << k << ","
         << format_double(rep.level_measure[k]) << ","
         << format_double(rep.level_c[k]);
      art.csv_lines.push_back(os.str());
    }
  return art;
}

Artifacts run_sharpness_range(const RunConfig& config,
                              const ParallelContext& ctx) {
  const Curve curve = curve_from_name(config.curve, config.d);
  const auto deltas = default_deltas(config, {-4, -5, -6, -7});
  const auto rep =
      sharpness_range_experiment(curve, deltas, config.p, config.seed, ctx);
  Artifacts art;
  art.report_json = rep.to_json();
  art.csv_lines.push_back(
      "delta,level,measure,measure_ratio,hit_rate,max_value");
  for (const auto& pt : rep.points) {
    std::ostringstream os;
    os << format_double(pt.delta) << "," << format_double(pt.level) << ","
       << format_double(pt.superlevel_measure) << ","
       << format_double(pt.measure_ratio) << ","
       << format_double(pt.neighborhood_hit_rate) << ","
       << format_double(pt.max_value);
    art.csv_lines.push_back(os.str());
  }
  return art;
}

Artifacts run_lemma_audit(const RunConfig& config, const ParallelContext& ctx) {
  const Curve curve = curve_from_name(config.curve, config.d);
  auto lib = std::make_shared<CutoffLibrary>(build_cutoffs());
  PipelineOptions opt;
  opt.samples = config.samples;
  opt.seed = config.seed;
  const int order = config.order > 0 ? config.order : config.d;
  const auto rep =
      decomposition_audit_pipeline(curve, config.lambda, order, lib, opt, ctx);
  Artifacts art;
  art.report_json = rep.to_json();
  art.csv_lines.push_back("stage,ran,pass");
  for (const auto& stage : rep.stages) {
    art.csv_lines.push_back(stage.name + "," + (stage.ran ? "1" : "0") + "," +
                            (stage.pass ? "1" : "0"));
  }
  if (!rep.all_pass) {
    art.exit_code = 1;
    art.failed_stage = rep.failed_stage;
  }
  return art;
}

Artifacts run_sobolev(const RunConfig& config, const ParallelContext& ctx) {
  const Curve curve = curve_from_name(config.curve, config.d);
  auto lib = std::make_shared<CutoffLibrary>(build_cutoffs());
  const auto deltas = default_deltas(config, {-3, -4, -5, -6});
  const auto rep = sobolev_embedding_check(curve, lib, deltas, config.fields,
                                           config.seed, ctx);
  Artifacts art;
  art.report_json = rep.to_json();
  art.csv_lines.push_back("delta,field,lhs,dnorm,gnorm,c_fit");
  for (const auto& row : rep.rows) {
    std::ostringstream os;
    os << format_double(row.delta) << "," << row.field_index << ","
       << format_double(row.lhs) << "," << format_double(row.dnorm) << ","
       << format_double(row.gnorm) << "," << format_double(row.c_fit);
    art.csv_lines.push_back(os.str());
  }
  return art;
}

Artifacts run_aniso(const RunConfig& config, const ParallelContext&) {
  const Curve curve = curve_from_name(config.curve, config.d);
  std::vector<double> deltas = config.deltas;
  if (deltas.empty())
    for (int k = 1; k <= 10; ++k) deltas.push_back(std::pow(2.0, -k));
  const auto rep = aniso_admissibility_report(curve, deltas, std::pow(2.0, -5),
                                              std::max(100, config.samples),
                                              config.seed);
  Artifacts art;
  art.report_json = rep.to_json();
  art.csv_lines.push_back("family,delta,admissible,violation");
  for (const auto& row : rep.rows) {
    art.csv_lines.push_back(row.family + "," + format_double(row.delta) + "," +
                            (row.admissible ? "1" : "0") + "," + row.violation);
  }
  return art;
}

Artifacts run_tube_volume(const RunConfig& config, const ParallelContext& ctx) {
  const auto rep = tube_volume_report(config.mc_samples, config.seed, ctx);
  Artifacts art;
  art.report_json = rep.to_json();
  art.csv_lines.push_back("pair,d,delta,gap,mc,se,predicted,ratio");
  for (const auto& r : rep.rows) {
    std::ostringstream os;
    os << r.pair << "," << r.d << "," << format_double(r.delta) << ","
       << format_double(r.gap) << "," << format_double(r.mc) << ","
       << format_double(r.se) << "," << format_double(r.predicted) << ","
       << format_double(r.ratio);
    art.csv_lines.push_back(os.str());
  }
  return art;
}

}  // namespace

RunResult run(const RunConfig& config) {
  const auto known = list_presets();
  const bool valid = std::any_of(known.begin(), known.end(),
                                 [&](const PresetInfo& preset) {
                                   return preset.name == config.experiment;
                                 });
  if (!valid)
    throw ConfigurationError("line 0: unknown experiment '" +
                             config.experiment + "'");

  ParallelContext ctx =
      config.workers > 0 ? ParallelContext{config.workers}
                         : ParallelContext::hardware();

  const auto t0 = std::chrono::steady_clock::now();
  Artifacts art;
  if (config.experiment == "theorem1-scaling") art = run_theorem1(config, ctx);
  else if (config.experiment == "sharpness-log") art = run_sharpness_log(config, ctx);
  else if (config.experiment == "sharpness-range") art = run_sharpness_range(config, ctx);
  else if (config.experiment == "lemma-audit") art = run_lemma_audit(config, ctx);
  else if (config.experiment == "sobolev-check") art = run_sobolev(config, ctx);
  else if (config.experiment == "aniso-admissibility") art = run_aniso(config, ctx);
  else if (config.experiment == "tube-volume") art = run_tube_volume(config, ctx);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const fs::path dir = fs::path(config.out_dir) / config.hash();
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "data.csv", std::ios::binary);
    for (const auto& line : art.csv_lines) csv << line << "\n";
  }
  {
    std::ofstream rpt(dir / "report.json", std::ios::binary);
    rpt << "{\"schema\":1,\"experiment\":\"" << config.experiment
        << "\",\"report\":" << art.report_json << "}\n";
  }
  {
    std::ofstream mf(dir / "manifest.json", std::ios::binary);
    mf << "{\"schema\":1,\"config_hash\":\"" << config.hash()
       << "\",\"library_version\":\"0.1.0\",\"wall_time_s\":"
       << format_double(wall) << ",\"params\":{";
    const auto kv = config.canonical_params();
    for (std::size_t i = 0; i < kv.size(); ++i)
      mf << (i ? "," : "") << "\"" << kv[i].first << "\":\"" << kv[i].second
         << "\"";
    mf << "},\"artifacts\":[\"data.csv\",\"report.json\"]}\n";
  }
  RunResult res;
  res.exit_code = art.exit_code;
  res.output_dir = dir.string();
  res.failed_stage = art.failed_stage;
  return res;
}

}  // namespace nikodym
