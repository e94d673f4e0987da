#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage or input error,
// 2 numeric failure. Every run that knows where its output goes writes a
// manifest next to it.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "basinforge/autoseq.hpp"
#include "basinforge/basin.hpp"
#include "basinforge/curves.hpp"
#include "basinforge/jet2.hpp"
#include "basinforge/normalform.hpp"
#include "basinforge/trains.hpp"

namespace basinforge::cli {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline SequenceSpec load_spec(const std::string& path) {
  try {
    return spec_from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

/// "a,b,c,d" -> (a + bi, c + di).
inline Point parse_point(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in point '" + s + "'");
    }
  }
  if (v.size() != 4) throw UsageError("a point needs four numbers re1,im1,re2,im2: '" + s + "'");
  return {{v[0], v[1]}, {v[2], v[3]}};
}

/// One point per line, four comma-separated numbers; a non-numeric first line is a header.
inline std::vector<Point> read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::vector<Point> pts;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first && line.find_first_of("abcdfghijklmnopqrstuvwxyz_") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    pts.push_back(parse_point(line));
  }
  return pts;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Collected while a command runs; written once at the end.
struct Manifest {
  std::string command;
  std::string spec_hash;
  json params = json::object();
  json summary = json::object();
  std::string status = "ok";
  std::string error;
  double wall_clock = 0.0;

  json to_json() const {
    json j{{"command", command},  {"spec_hash", spec_hash}, {"params", params}, {"version", kVersion},
           {"status", status},    {"summary", summary},     {"wall_clock_seconds", wall_clock}};
    if (!error.empty()) j["error"] = error;
    return j;
  }
};

inline fs::path manifest_path_for_file(const std::string& out) { return fs::path(out + ".manifest.json"); }

// ---------------------------------------------------------------------------
// Commands. Each returns the manifest path it wants (may be empty).

struct BasinArgs {
  std::string spec, slice, out;
  std::size_t width = 256, height = 256, max_iter = kDefaultMaxIter;
  double radius = 0.0;
  unsigned threads = 0;
};

inline void run_basin(const BasinArgs& a, Manifest& m) {
  const SequenceSpec spec = load_spec(a.spec);
  m.spec_hash = spec_hash(spec);
  Slice slice;
  try {
    slice = slice_from_json(read_json(a.slice));
  } catch (const json::exception& e) {
    throw UsageError(a.slice + ": " + e.what());
  }
  const double radius = a.radius > 0.0 ? a.radius : default_membership_radius(spec);
  m.params = {{"spec", a.spec},       {"slice", a.slice},   {"width", a.width}, {"height", a.height},
              {"max_iter", a.max_iter}, {"radius", radius}};
  Sequence seq(spec);
  const BasinRaster r = raster(seq, slice, a.width, a.height, a.max_iter, radius, a.threads);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  {
    std::ofstream pgm(dir / "basin.pgm", std::ios::binary);
    write_pgm(pgm, r);
  }
  std::ostringstream csv;
  write_csv(csv, r);
  write_text(dir / "basin.csv", csv.str());
  const json side = raster_sidecar(r, spec, a.max_iter, radius);
  write_json(dir / "basin.json", side);
  m.summary = {{"members", side["members"]}, {"pixels", r.data.size()}};
}

inline JetMap2 load_map(const std::string& path) {
  const json j = read_json(path);
  try {
    if (j.contains("kind")) return spec_from_json(j).steps.at(0);
    return jet_from_json(j);
  } catch (const std::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

inline void run_normalform(const std::string& map, int k, const std::string& out, Manifest& m) {
  const JetMap2 F = load_map(map);
  m.spec_hash = hex64(fnv1a64(to_json(F).dump()));
  m.params = {{"map", map}, {"k", k}};
  const AutonomousNormalForm nf = rosay_rudin(F, k);
  const json j = to_json(nf);
  write_json(out, j);
  m.summary = {{"residual", j["residual"]}};
}

inline void run_trains(const std::string& spec_path, int k, std::size_t n_max, bool wold, const std::string& out,
                       Manifest& m) {
  const SequenceSpec spec = load_spec(spec_path);
  m.spec_hash = spec_hash(spec);
  m.params = {{"spec", spec_path}, {"k", k}, {"nmax", n_max}, {"wold", wold}};
  Sequence seq(spec);
  const ConjugacyChain ch = wold ? wold_fastpath(seq, k, n_max) : build_chain(seq, k, n_max);
  json j = to_json(ch);
  if (!wold) {
    const auto steps = sigma_steps(seq, n_max);
    const PartitionReport pr = check_partition(ch.partition, steps, spec.C);
    const SparseReport sp = sparse_check(ch.partition, spec.C, spec.D);
    json sums = json::array();
    for (const auto& t : sp.terms) sums.push_back(t.partial_sum);
    j["diagnostics"] = {{"partition_violations", pr.violations()}, {"sparse_meaningful", sp.meaningful}, {"partial_sums", sums}};
  }
  write_json(out, j);
  const auto [sa, sb] = ch.shear_sup();
  m.summary = {{"trains", ch.partition.trains.size()}, {"horizon", ch.horizon},
               {"max_residual", ch.max_residual()}, {"sup_alpha", sa}, {"sup_beta", sb}};
}

inline bool run_biholo(const std::string& spec_path, const std::string& chain_path, const std::string& points,
                       std::size_t n, const std::string& out, Manifest& m, std::ostream& err) {
  const SequenceSpec spec = load_spec(spec_path);
  m.spec_hash = spec_hash(spec);
  m.params = {{"spec", spec_path}, {"chain", chain_path}, {"points", points}, {"n", n}};
  ConjugacyChain ch;
  try {
    ch = chain_from_json(read_json(chain_path));
  } catch (const std::exception& e) {
    throw UsageError(chain_path + ": " + e.what());
  }
  const auto pts = read_points_csv(points);
  Sequence seq(spec);
  std::ostringstream csv;
  csv << "point,n,re1,im1,re2,im2,increment\n";
  std::size_t flagged = 0;
  double worst_last = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const BiholoTrajectory tr = biholo_trajectory(seq, ch, pts[i], n);
    for (std::size_t t = 0; t < tr.n.size(); ++t) {
      const Point v = tr.value[t];
      csv << i << ',' << tr.n[t] << ',' << fmt(v.z.real()) << ',' << fmt(v.z.imag()) << ',' << fmt(v.w.real()) << ','
          << fmt(v.w.imag()) << ',' << (std::isnan(tr.increment[t]) ? std::string("nan") : fmt(tr.increment[t])) << '\n';
    }
    if (tr.nonconvergent) {
      ++flagged;
      err << "biholo: point " << i << " shows non-decreasing increments over " << kNonconvergenceRun
          << " consecutive steps\n";
    }
    if (tr.increment.size() > 1) worst_last = std::max(worst_last, tr.last_increment());
  }
  write_text(out, csv.str());
  m.summary = {{"points", pts.size()}, {"nonconvergent", flagged}, {"max_last_increment", worst_last}};
  return flagged == 0;
}

inline void run_curve(const std::string& spec_path, const std::string& point, const std::string& dir, double radius,
                      double eps, double r, const std::string& out, Manifest& m) {
  const SequenceSpec spec = load_spec(spec_path);
  m.spec_hash = spec_hash(spec);
  m.params = {{"spec", spec_path}, {"point", point}, {"dir", dir}, {"radius", radius}, {"eps", eps}, {"r", r}};
  Sequence seq(spec);
  const CurveResult c = entire_curve(seq, parse_point(point), parse_point(dir), radius, eps, r);
  write_json(out, to_json(c));
  m.summary = {{"rounds", c.rounds.size()}, {"members", c.members}, {"samples", c.samples},
               {"pin_derivative", c.pin_derivative}};
  if (c.members != c.samples) throw NumericError("curve: sampled image points left the basin");
}

inline json run_verify(const SequenceSpec& spec, std::size_t n_max, std::size_t samples) {
  return to_json(verify_uniform_bounds(spec, n_max, samples));
}

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

/// "name=a:b:step" with an inclusive end point.
inline SweepAxis parse_axis(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw UsageError("--param expects name=start:stop:step, got '" + s + "'");
  SweepAxis ax;
  ax.name = s.substr(0, eq);
  std::vector<double> v;
  std::stringstream ss(s.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in '" + s + "'");
    }
  }
  if (v.size() == 1) v = {v[0], v[0], 1.0};
  if (v.size() != 3 || !(v[2] > 0.0) || v[1] < v[0]) throw UsageError("--param range must be start:stop:step with step > 0");
  const auto count = static_cast<std::size_t>(std::floor((v[1] - v[0]) / v[2] + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) ax.values.push_back(v[0] + static_cast<double>(i) * v[2]);
  static const std::vector<std::string> known{"C", "D", "k", "seed", "coeff_bound", "short_a0"};
  if (std::find(known.begin(), known.end(), ax.name) == known.end())
    throw UsageError("--param: unknown parameter '" + ax.name + "'");
  return ax;
}

inline void set_param(json& spec, const std::string& name, double v) {
  if (name == "k" || name == "seed")
    spec[name] = static_cast<std::int64_t>(std::llround(v));
  else
    spec[name] = v;
}

inline std::size_t run_sweep(const std::string& tmpl, const std::vector<std::string>& params, std::size_t n_max,
                             std::size_t samples, const std::string& out, unsigned threads, Manifest& m) {
  const json base = read_json(tmpl);
  std::vector<SweepAxis> axes;
  for (const auto& p : params) axes.push_back(parse_axis(p));
  std::vector<json> points{base};
  std::vector<json> echoes{json::object()};
  for (const auto& ax : axes) {
    std::vector<json> np, ne;
    for (std::size_t i = 0; i < points.size(); ++i)
      for (double v : ax.values) {
        json s = points[i];
        set_param(s, ax.name, v);
        json e = echoes[i];
        e[ax.name] = s[ax.name];
        np.push_back(std::move(s));
        ne.push_back(std::move(e));
      }
    points = std::move(np);
    echoes = std::move(ne);
  }
  m.params = {{"template", tmpl}, {"param", params}, {"nmax", n_max}, {"samples", samples}, {"grid_points", points.size()}};
  m.spec_hash = hex64(fnv1a64(base.dump()));

  const fs::path dir(out);
  fs::create_directories(dir);
  std::vector<std::string> status(points.size());
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= points.size()) return;
        i = next++;
      }
      std::ostringstream name;
      name << "point_" << std::setw(4) << std::setfill('0') << i;
      const fs::path sub = dir / name.str();
      Manifest pm;
      pm.command = "verify";
      pm.params = {{"grid", echoes[i]}, {"nmax", n_max}, {"samples", samples}};
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const SequenceSpec spec = spec_from_json(points[i]);
        pm.spec_hash = spec_hash(spec);
        const json rep = run_verify(spec, n_max, samples);
        write_json(sub / "spec.json", to_json(spec));
        write_json(sub / "report.json", rep);
        pm.summary = {{"clean_radius", rep.contains("clean_radius") ? rep["clean_radius"] : json(nullptr)}};
      } catch (const std::exception& e) {
        pm.status = "failed";
        pm.error = e.what();
      }
      pm.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_json(sub / "manifest.json", pm.to_json());
      status[i] = pm.status;
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  const auto failed = static_cast<std::size_t>(std::count(status.begin(), status.end(), "failed"));
  m.summary = {{"grid_points", points.size()}, {"failed", failed}};
  return failed;
}

// ---------------------------------------------------------------------------

inline int dispatch(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Basins of attraction, normal forms and train conjugacies for sequences of automorphisms of C^2",
               "basinforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  BasinArgs ba;
  auto* basin = app.add_subcommand("basin", "Rasterize a 2-D slice of the basin");
  basin->add_option("--spec", ba.spec, "Sequence spec JSON")->required();
  basin->add_option("--slice", ba.slice, "Slice JSON")->required();
  basin->add_option("--out", ba.out, "Output directory")->required();
  basin->add_option("--width", ba.width, "Raster width")->check(CLI::PositiveNumber);
  basin->add_option("--height", ba.height, "Raster height")->check(CLI::PositiveNumber);
  basin->add_option("--max-iter", ba.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  basin->add_option("--radius", ba.radius, "Membership radius (default: from uniform bounds)");
  basin->add_option("--threads", ba.threads, "Worker threads (default: BASINFORGE_THREADS or all cores)");

  std::string map_path, out_path, spec_path, chain_path, points_path, point_s, dir_s, tmpl;
  int k = 2;
  std::size_t n_max = 10000, n_eval = 200, samples = 64;
  bool wold = false;
  double radius = 4.0, eps = 1e-3, r = 0.5;
  unsigned threads = 0;
  std::vector<std::string> params;

  auto* nf = app.add_subcommand("normalform", "Triangular normal form of an attracting germ");
  nf->add_option("--map", map_path, "Map JSON (jet or constant spec)")->required();
  nf->add_option("--k", k, "Jet order")->check(CLI::Range(1, 64));
  nf->add_option("--out", out_path, "Output JSON")->required();

  auto* tr = app.add_subcommand("trains", "Select, direct and connect trains");
  tr->add_option("--spec", spec_path, "Sequence spec JSON")->required();
  tr->add_option("--k", k, "Order of contact")->check(CLI::Range(2, 16));
  tr->add_option("--nmax", n_max, "Number of steps")->check(CLI::PositiveNumber);
  tr->add_option("--out", out_path, "Chain JSON")->required();
  tr->add_flag("--wold", wold, "Single-train fast path (requires D^k < C)");

  auto* bh = app.add_subcommand("biholo", "Evaluate Phi_n along sample points");
  bh->add_option("--spec", spec_path, "Sequence spec JSON")->required();
  bh->add_option("--chain", chain_path, "Chain JSON from `trains`")->required();
  bh->add_option("--points", points_path, "CSV of points re1,im1,re2,im2")->required();
  bh->add_option("--n", n_eval, "Last n")->check(CLI::PositiveNumber);
  bh->add_option("--out", out_path, "Trajectory CSV")->required();

  auto* cv = app.add_subcommand("curve", "Entire curve through a point");
  cv->add_option("--spec", spec_path, "Sequence spec JSON")->required();
  cv->add_option("--point", point_s, "re1,im1,re2,im2")->required();
  cv->add_option("--dir", dir_s, "Tangent re1,im1,re2,im2")->required();
  cv->add_option("--radius", radius, "Target radius")->check(CLI::PositiveNumber);
  cv->add_option("--eps", eps, "First-round tolerance")->check(CLI::PositiveNumber);
  cv->add_option("--r", r, "Inner certification radius")->check(CLI::Range(1e-6, 0.999999));
  cv->add_option("--out", out_path, "Curve JSON")->required();

  auto* vf = app.add_subcommand("verify", "Check C|z| <= |f_n(z)| <= D|z| on sampled spheres");
  vf->add_option("--spec", spec_path, "Sequence spec JSON")->required();
  vf->add_option("--nmax", n_max, "Number of steps")->check(CLI::PositiveNumber);
  vf->add_option("--samples", samples, "Samples per sphere")->check(CLI::PositiveNumber);
  vf->add_option("--out", out_path, "Report JSON (default: stdout)");

  auto* sw = app.add_subcommand("sweep", "Run verify over a parameter grid");
  sw->add_option("--template", tmpl, "Spec template JSON")->required();
  sw->add_option("--param", params, "name=start:stop:step (repeatable)")->required();
  sw->add_option("--nmax", n_max, "Steps per verify run")->check(CLI::PositiveNumber);
  sw->add_option("--samples", samples, "Samples per sphere")->check(CLI::PositiveNumber);
  sw->add_option("--out", out_path, "Output directory")->required();
  sw->add_option("--threads", threads, "Worker threads");

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  Manifest m;
  fs::path manifest_path;
  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    if (*basin) {
      m.command = "basin";
      manifest_path = fs::path(ba.out) / "manifest.json";
      run_basin(ba, m);
    } else if (*nf) {
      m.command = "normalform";
      manifest_path = manifest_path_for_file(out_path);
      run_normalform(map_path, k, out_path, m);
    } else if (*tr) {
      m.command = "trains";
      manifest_path = manifest_path_for_file(out_path);
      run_trains(spec_path, k, n_max, wold, out_path, m);
    } else if (*bh) {
      m.command = "biholo";
      manifest_path = manifest_path_for_file(out_path);
      if (!run_biholo(spec_path, chain_path, points_path, n_eval, out_path, m, err)) {
        m.status = "nonconvergent";
        code = 2;
      }
    } else if (*cv) {
      m.command = "curve";
      manifest_path = manifest_path_for_file(out_path);
      run_curve(spec_path, point_s, dir_s, radius, eps, r, out_path, m);
    } else if (*vf) {
      m.command = "verify";
      const SequenceSpec spec = load_spec(spec_path);
      m.spec_hash = spec_hash(spec);
      m.params = {{"spec", spec_path}, {"nmax", n_max}, {"samples", samples}};
      const json rep = run_verify(spec, n_max, samples);
      m.summary = {{"clean_radius", rep.contains("clean_radius") ? rep["clean_radius"] : json(nullptr)}};
      if (out_path.empty()) {
        out << rep.dump(2) << "\n";
      } else {
        manifest_path = manifest_path_for_file(out_path);
        write_json(out_path, rep);
      }
    } else if (*sw) {
      m.command = "sweep";
      manifest_path = fs::path(out_path) / "manifest.json";
      if (run_sweep(tmpl, params, n_max, samples, out_path, threads, m) > 0) {
        m.status = "failed";
        code = 2;
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    m.status = "usage_error";
    m.error = e.what();
    code = 1;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    m.status = "failed";
    m.error = e.what();
    code = 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    m.status = "usage_error";
    m.error = e.what();
    code = 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!manifest_path.empty()) {
    try {
      write_json(manifest_path, m.to_json());
    } catch (const std::exception& e) {
      err << "error: cannot write manifest: " << e.what() << "\n";
      if (code == 0) code = 1;
    }
  }
  return code;
}

inline int dispatch(int argc, char** argv) { return dispatch(std::vector<std::string>(argv, argv + argc)); }

}  // namespace basinforge::cli
