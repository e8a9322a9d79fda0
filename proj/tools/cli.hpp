#pragma once

// Command-line front end.  run_cli is the whole program; main() only binds
// it to the process streams so tests can drive it in-process.
//
// Exit codes: 0 ok, 1 verification failure, 2 validation error,
// 3 integration step failure, 4 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nhb/brackets.hpp"
#include "nhb/catalog.hpp"
#include "nhb/dsl/system_file.hpp"
#include "nhb/dynamics.hpp"
#include "nhb/format.hpp"
#include "nhb/verify.hpp"

namespace nhb::cli {

enum Exit : int { kOk = 0, kVerifyFailed = 1, kValidation = 2, kStepFailure = 3, kIo = 4 };

using json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedSystem {
  SystemDefinition sys;
  std::vector<std::pair<double, double>> region;
  double momentum_scale = 1.0;
};

inline LoadedSystem load_system(const std::string& spec) {
  constexpr std::string_view prefix = "catalog:";
  if (spec.rfind(prefix, 0) == 0) {
    const auto& e = catalog_entry(spec.substr(prefix.size()));
    return {dsl::parse_system(e.text), e.sample_region, e.momentum_scale};
  }
  std::ifstream in(spec, std::ios::binary);
  if (!in) throw IoError("cannot read system file '" + spec + "'");
  std::ostringstream text;
  text << in.rdbuf();
  auto sys = dsl::parse_system(text.str());
  auto region = default_sample_region(sys);
  return {std::move(sys), std::move(region), 1.0};
}

inline std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    std::string_view item(text.data() + start, (comma == std::string::npos ? text.size() : comma) - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size() || !std::isfinite(v))
      throw Error(flag + ": '" + std::string(item) + "' is not a finite number");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline PhasePoint parse_point(const SystemDefinition& sys, const std::string& text) {
  auto v = parse_numbers(text, "--point");
  if (v.size() != 2 * sys.dim())
    throw Error("--point needs 2n = " + std::to_string(2 * sys.dim()) + " numbers (q then p), got " +
                std::to_string(v.size()));
  return PhasePoint::from_flat(v);
}

/// Output sink: --output path or the output stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot open output file '" + path + "'");
      out_ = &file_;
    }
  }
  std::ostream& stream() { return *out_; }
  void finish() {
    out_->flush();
    if (!*out_) throw IoError("write to output failed");
  }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

inline std::string json_text(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Trajectory emission

inline std::vector<std::string> trajectory_columns(const SystemDefinition& sys) {
  std::vector<std::string> cols{"t"};
  for (std::size_t i = 1; i <= sys.dim(); ++i) cols.push_back("q" + std::to_string(i));
  for (std::size_t i = 1; i <= sys.dim(); ++i) cols.push_back("p" + std::to_string(i));
  cols.push_back("H");
  for (std::size_t a = 1; a <= sys.constraint_count(); ++a) cols.push_back("c" + std::to_string(a));
  for (std::size_t a = 1; a <= sys.constraint_count(); ++a) cols.push_back("lambda" + std::to_string(a));
  return cols;
}

inline std::vector<double> trajectory_row(const TrajectoryRecord& r) {
  std::vector<double> row{r.t};
  row.insert(row.end(), r.x.q.begin(), r.x.q.end());
  row.insert(row.end(), r.x.p.begin(), r.x.p.end());
  row.push_back(r.H);
  row.insert(row.end(), r.c.begin(), r.c.end());
  row.insert(row.end(), r.lambda.begin(), r.lambda.end());
  return row;
}

inline void write_trajectory(std::ostream& os, const SystemDefinition& sys, const Trajectory& traj,
                             const std::string& format) {
  const auto cols = trajectory_columns(sys);
  if (format == "json") {
    json rows = json::array();
    for (const auto& r : traj.records) {
      json o = json::object();
      auto v = trajectory_row(r);
      for (std::size_t i = 0; i < cols.size(); ++i) o[cols[i]] = v[i];
      rows.push_back(std::move(o));
    }
    os << json_text(rows);
    return;
  }
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : traj.records) {
    auto v = trajectory_row(r);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_double(v[i]);
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json bracket_report_json(const SystemDefinition& sys, const BracketReport& r) {
  json j;
  j["system"] = sys.name();
  j["f"] = r.f;
  j["g"] = r.g;
  j["q"] = r.point.q;
  j["p"] = r.point.p;
  j["value_nh"] = r.value_nh;
  j["value_nh2"] = r.value_nh2;
  j["value_eden"] = r.value_eden;
  j["value_dstar"] = r.value_dstar;
  j["max_pairwise_gap"] = r.max_pairwise_gap;
  return j;
}

inline json verify_report_json(const VerifyReport& rep) {
  json j;
  j["system"] = rep.system;
  j["seed"] = rep.seed;
  j["count"] = rep.count;
  j["integrable"] = rep.integrable;
  j["passed"] = rep.passed();
  json suites = json::array();
  for (const auto& s : rep.suites) {
    json o;
    o["name"] = s.name;
    o["check"] = s.check;
    if (s.check != "report") o["tolerance"] = s.tolerance;
    o["value"] = s.value;
    o["passed"] = s.passed;
    if (!s.details.empty()) {
      json d = json::object();
      for (const auto& [k, v] : s.details) d[k] = v;
      o["details"] = std::move(d);
    }
    suites.push_back(std::move(o));
  }
  j["suites"] = std::move(suites);
  return j;
}

inline void write_csv_object(std::ostream& os, const json& j) {
  bool first = true;
  for (const auto& [k, v] : j.items()) {
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) os << (first ? "" : ",") << k << (i + 1), first = false;
    } else {
      os << (first ? "" : ",") << k, first = false;
    }
  }
  os << "\n";
  first = true;
  auto cell = [&](const json& v) {
    os << (first ? "" : ",");
    first = false;
    if (v.is_number_float()) os << format_double(v.get<double>());
    else if (v.is_string()) os << v.get<std::string>();
    else os << v.dump();
  };
  for (const auto& [k, v] : j.items()) {
    if (v.is_array()) {
      for (const auto& e : v) cell(e);
    } else {
      cell(v);
    }
  }
  os << "\n";
}

// ---------------------------------------------------------------------------

struct Common {
  std::string system;
  std::optional<double> tol;
  std::uint64_t seed = 1;
  std::string format;
  std::string output;
};

inline void add_common(CLI::App* cmd, Common& c, const std::string& default_format) {
  c.format = default_format;
  cmd->add_option("--system", c.system, "system file path or catalog:<id>")->required();
  cmd->add_option("--tol", c.tol, "tolerance (positive)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "seed of the sample stream");
  cmd->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--output", c.output, "output file (default: standard output)");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonholonomic mechanics: constrained dynamics and almost-Poisson brackets", "nhb"};
  app.require_subcommand(1);

  // simulate
  Common sim;
  std::string q0, p0, v0;
  double t0 = 0.0, t1 = 1.0, dt = 1e-3;
  bool no_project = false;
  auto* simulate = app.add_subcommand("simulate", "integrate the nonholonomic flow from a point of M");
  add_common(simulate, sim, "csv");
  simulate->add_option("--q0", q0, "initial configuration, comma-separated")->required();
  auto* p0_opt = simulate->add_option("--p0", p0, "initial momentum (projected onto M if off it)");
  auto* v0_opt = simulate->add_option("--v0", v0, "initial velocity (mapped through the Legendre map)");
  p0_opt->excludes(v0_opt);
  simulate->add_option("--t0", t0, "start time");
  simulate->add_option("--t1", t1, "end time");
  simulate->add_option("--dt", dt, "step size")->check(CLI::PositiveNumber);
  simulate->add_flag("--no-project", no_project, "skip the post-step projection onto M");

  // brackets
  Common br;
  std::string bf, bg, bpoint;
  auto* brackets = app.add_subcommand("brackets", "evaluate the four constrained brackets at a point of M");
  add_common(brackets, br, "json");
  brackets->add_option("--f", bf, "first observable")->required();
  brackets->add_option("--g", bg, "second observable")->required();
  brackets->add_option("--point", bpoint, "q1..qn,p1..pn")->required();

  // verify
  Common ver;
  std::size_t count = 100, workers = 1, jac_points = 20, dyn_points = 200;
  auto* verify = app.add_subcommand("verify", "run the property suites over seeded points of M");
  add_common(verify, ver, "json");
  verify->add_option("--count", count, "number of sample points")->check(CLI::PositiveNumber);
  verify->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  verify->add_option("--jacobiator-points", jac_points, "sample points probed for Jacobiators");
  verify->add_option("--dynamics-points", dyn_points, "sample points for the two-route dynamics check")
      ->check(CLI::PositiveNumber);

  // jacobiator
  Common jac;
  std::string jf, jg, jh, jpoint, kind = "eden";
  auto* jacob = app.add_subcommand("jacobiator", "evaluate {f,{g,h}} + {g,{h,f}} + {h,{f,g}}");
  jacob->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  add_common(jacob, jac, "json");
  jacob->add_option("--f", jf, "first observable")->required();
  jacob->add_option("--g", jg, "second observable")->required();
  jacob->add_option("--h", jh, "third observable")->required();
  jacob->add_option("--point", jpoint, "q1..qn,p1..pn")->required();
  jacob->add_option("--kind", kind, "eden, nh, dstar or canonical")
      ->check(CLI::IsMember({"eden", "nh", "dstar", "canonical"}));

  // catalog
  auto* catalog = app.add_subcommand("catalog", "list or show the built-in systems");
  catalog->require_subcommand(1);
  catalog->add_subcommand("list", "ids and notes");
  std::string show_id;
  auto* show = catalog->add_subcommand("show", "exact system-file text");
  show->add_option("id", show_id, "catalog id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kValidation;
  }

  try {
    if (catalog->parsed()) {
      if (show->parsed()) {
        const auto* e = find_catalog_entry(show_id);
        if (!e) {
          err << "error: unknown catalog id '" << show_id << "'\n";
          return kValidation;
        }
        out << e->text;
      } else {
        for (const auto& e : catalog_systems()) out << e.label << "  " << e.id << "  " << e.notes << "\n";
      }
      return kOk;
    }

    if (simulate->parsed()) {
      if (!(t1 > t0)) throw Error("--t1 must be greater than --t0");
      if (!p0_opt->count() && !v0_opt->count()) throw Error("simulate needs --p0 or --v0");
      auto loaded = load_system(sim.system);
      const auto& sys = loaded.sys;
      Settings settings;
      if (sim.tol) settings.on_manifold_tolerance = *sim.tol;
      PhasePoint x;
      x.q = parse_numbers(q0, "--q0");
      check_dimension(sys, x.q.size(), "--q0");
      if (p0_opt->count()) {
        x.p = parse_numbers(p0, "--p0");
        check_dimension(sys, x.p.size(), "--p0");
      } else {
        auto v = parse_numbers(v0, "--v0");
        check_dimension(sys, v.size(), "--v0");
        x = legendre(sys, x.q, v);
      }
      const double off = on_manifold_distance(sys, x);
      if (!(off <= settings.on_manifold_tolerance)) {
        err << "warning: initial state is off M (max |c| = " << format_double(off) << "); projected onto M\n";
      }
      x.p = eden_project(sys, x.q, x.p);
      IntegrateOptions opts;
      opts.project_each_step = !no_project;
      opts.settings = settings;
      Sink sink(sim.output, out);
      try {
        auto traj = integrate(sys, x, t0, t1, dt, opts);
        write_trajectory(sink.stream(), sys, traj, sim.format);
        sink.finish();
      } catch (const StepFailure& e) {
        write_trajectory(sink.stream(), sys, e.partial(), sim.format);
        sink.finish();
        err << "error: " << e.what() << "\n";
        return kStepFailure;
      }
      return kOk;
    }

    if (brackets->parsed()) {
      auto loaded = load_system(br.system);
      const auto& sys = loaded.sys;
      auto x = parse_point(sys, bpoint);
      auto f = Observable::expression(sys, bf);
      auto g = Observable::expression(sys, bg);
      Settings settings;
      if (br.tol) settings.on_manifold_tolerance = *br.tol;
      auto rep = compare_brackets(sys, f, g, x, settings);
      Sink sink(br.output, out);
      auto j = bracket_report_json(sys, rep);
      if (br.format == "json") sink.stream() << json_text(j);
      else write_csv_object(sink.stream(), j);
      sink.finish();
      return kOk;
    }

    if (jacob->parsed()) {
      auto loaded = load_system(jac.system);
      const auto& sys = loaded.sys;
      auto x = parse_point(sys, jpoint);
      auto f = Observable::expression(sys, jf);
      auto g = Observable::expression(sys, jg);
      auto h = Observable::expression(sys, jh);
      Settings settings;
      if (jac.tol) settings.on_manifold_tolerance = *jac.tol;
      BracketKind k = kind == "canonical" ? BracketKind::Canonical
                      : kind == "nh"      ? BracketKind::Nonholonomic
                      : kind == "dstar"   ? BracketKind::DStar
                                          : BracketKind::Eden;
      const double value = jacobiator(sys, k, f, g, h, x, settings);
      json j;
      j["system"] = sys.name();
      j["kind"] = kind;
      j["f"] = f.id();
      j["g"] = g.id();
      j["h"] = h.id();
      j["q"] = x.q;
      j["p"] = x.p;
      j["jacobiator"] = value;
      Sink sink(jac.output, out);
      if (jac.format == "json") sink.stream() << json_text(j);
      else write_csv_object(sink.stream(), j);
      sink.finish();
      return kOk;
    }

    if (verify->parsed()) {
      auto loaded = load_system(ver.system);
      VerifyOptions opts;
      opts.count = count;
      opts.seed = ver.seed;
      opts.workers = workers;
      opts.tolerance = ver.tol;
      opts.jacobiator_points = jac_points;
      opts.dynamics_points = dyn_points;
      auto rep = verify_system(loaded.sys, loaded.region, loaded.momentum_scale, opts);
      Sink sink(ver.output, out);
      if (ver.format == "json") {
        sink.stream() << json_text(verify_report_json(rep));
      } else {
        sink.stream() << "suite,check,tolerance,value,passed\n";
        for (const auto& s : rep.suites)
          sink.stream() << s.name << "," << s.check << "," << (s.check == "report" ? "" : format_double(s.tolerance)) << ","
                        << format_double(s.value) << "," << (s.passed ? "true" : "false") << "\n";
      }
      sink.finish();
      if (!rep.passed()) {
        for (const auto& s : rep.suites)
          if (!s.passed) err << "suite failed: " << s.name << " (" << format_double(s.value) << ")\n";
        return kVerifyFailed;
      }
      return kOk;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}

}  // namespace nhb::cli
