#include "cosserat/harness.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "cosserat/constitutive.hpp"
#include "cosserat/errors.hpp"
#include "cosserat/parallel.hpp"
#include "cosserat/rng.hpp"
#include "cosserat/vtk_io.hpp"

namespace cosserat {

using nlohmann::json;

std::string to_string(MediaKind m) {
  switch (m) {
    case MediaKind::Perforated: return "perforated";
    case MediaKind::Composite: return "composite";
    default: return "stochastic";
  }
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Fine: return "fine";
    case Method::Offline: return "offline";
    default: return "online";
  }
}

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

MediaKind parse_media(const std::string& s) {
  if (s == "perforated") return MediaKind::Perforated;
  if (s == "composite") return MediaKind::Composite;
  if (s == "stochastic") return MediaKind::Stochastic;
  throw ConfigError("unknown media kind: " + s);
}

Method parse_method(const std::string& s) {
  if (s == "fine") return Method::Fine;
  if (s == "offline") return Method::Offline;
  if (s == "online") return Method::Online;
  throw ConfigError("unknown method: " + s);
}

double parse_delta_value(const json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError("delta must be a number or \"inf\"");
  }
  return v.get<double>();
}

template <class T, class F>
std::vector<T> parse_axis(const json& j, const char* key, std::vector<T> fallback, F get_one) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  std::vector<T> out;
  if (v.is_array())
    for (const auto& e : v) out.push_back(get_one(e));
  else
    out.push_back(get_one(v));
  if (out.empty()) throw ConfigError(std::string(key) + ": empty sweep axis");
  return out;
}

std::vector<Disk> parse_disks(const json& v) {
  std::vector<Disk> out;
  for (const auto& d : v) {
    if (!d.is_array() || d.size() != 3) throw ConfigError("disk entries must be [cx, cy, r]");
    out.push_back({d[0].get<double>(), d[1].get<double>(), d[2].get<double>()});
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.media = parse_media(j.value("media", std::string("perforated")));
    cfg.case_id = j.value("case", 1);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.nx = j.value("nx", 50);
    cfg.Nx = j.value("Nx", 10);
    cfg.Ny = j.value("Ny", cfg.Nx);
    cfg.method = parse_method(j.value("method", std::string("fine")));
    cfg.N_b = parse_axis<int>(j, "N_b", {4}, [](const json& v) { return v.get<int>(); });
    cfg.N_it = parse_axis<int>(j, "N_it", {3}, [](const json& v) { return v.get<int>(); });
    cfg.theta = parse_axis<double>(j, "theta", {1.0}, [](const json& v) { return v.get<double>(); });
    cfg.delta = parse_axis<double>(j, "delta", {0.1}, parse_delta_value);
    cfg.delta0 = j.value("delta0", 1e-5);
    std::string dn = j.value("dual_norm", std::string("energy"));
    if (dn == "energy")
      cfg.dual_norm = DualNorm::Energy;
    else if (dn == "laplacian")
      cfg.dual_norm = DualNorm::Laplacian;
    else
      throw ConfigError("unknown dual_norm: " + dn);
    cfg.sum_components = j.value("sum_components", false);
    cfg.max_picard = j.value("max_picard", 100);
    cfg.out_dir = j.value("out_dir", std::string());

    if (j.contains("perforations")) {
      const json& p = j.at("perforations");
      if (p.is_string()) {
        std::string s = p.get<std::string>();
        if (s == "default")
          cfg.perforations = default_perforations();
        else if (s != "none")
          throw ConfigError("perforations: expected \"default\", \"none\", or a disk list");
      } else {
        cfg.perforations = parse_disks(p);
      }
    } else if (cfg.media == MediaKind::Perforated) {
      cfg.perforations = default_perforations();
    }

    if (j.contains("inclusions")) {
      const json& p = j.at("inclusions");
      if (p.is_string()) {
        std::string s = p.get<std::string>();
        if (s == "default")
          cfg.inclusions = default_inclusions();
        else if (s != "none")
          throw ConfigError("inclusions: expected \"default\", \"none\", or a disk list");
      } else {
        cfg.inclusions = parse_disks(p);
      }
    } else if (cfg.media == MediaKind::Composite) {
      cfg.inclusions = default_inclusions();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }

  if (cfg.case_id != 1 && cfg.case_id != 2) throw ConfigError("case must be 1 or 2");
  if (cfg.nx < 2) throw ConfigError("nx too small");
  if (cfg.Nx < 1 || cfg.Ny < 1) throw ConfigError("coarse grid must have at least one block");
  if (cfg.delta0 <= 0) throw ConfigError("delta0 must be positive");
  if (cfg.max_picard < 1) throw ConfigError("max_picard must be positive");
  for (int nb : cfg.N_b)
    if (nb < 1) throw ConfigError("N_b must be positive");
  for (int ni : cfg.N_it)
    if (ni < 0) throw ConfigError("N_it must be nonnegative");
  for (double t : cfg.theta)
    if (!(t > 0 && t <= 1)) throw ConfigError("theta must lie in (0, 1]");
  for (double d : cfg.delta)
    if (!(d >= 0)) throw ConfigError("delta must be nonnegative or \"inf\"");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ErrorReport relative_errors(const SystemState& ref, const SystemState& ms,
                            const KappaField& ref_kappa, const TriMesh& mesh,
                            const MaterialField& field) {
  int na = mesh.n_active_nodes();
  auto nodal = [&](const SystemState& s, int comp, int node) {
    return s.dofs[comp * na + mesh.node_to_active[node]];
  };
  double nuL2 = 0, duL2 = 0, npL2 = 0, dpL2 = 0;
  double nuH1 = 0, duH1 = 0, npH1 = 0, dpH1 = 0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const auto& g = mesh.grad[t];
    double w = mesh.area[t] / 3.0;
    double e[3][3], r[3][3];  // [comp][vertex]
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < 3; ++a) {
        r[c][a] = nodal(ref, c, tri[a]);
        e[c][a] = r[c][a] - nodal(ms, c, tri[a]);
      }
    double kint = 0;
    for (int q = 0; q < 3; ++q) {
      const double* L = kQuadBary[q];
      double kq = ref_kappa.k[3 * t + q];
      kint += w * kq;
      double eq[3], rq[3];
      for (int c = 0; c < 3; ++c) {
        eq[c] = L[0] * e[c][0] + L[1] * e[c][1] + L[2] * e[c][2];
        rq[c] = L[0] * r[c][0] + L[1] * r[c][1] + L[2] * r[c][2];
      }
      nuL2 += w * (eq[0] * eq[0] + eq[1] * eq[1]);
      duL2 += w * (rq[0] * rq[0] + rq[1] * rq[1]);
      npL2 += w * eq[2] * eq[2];
      dpL2 += w * rq[2] * rq[2];
      double xi2 = field.xi[t] * field.xi[t];
      npH1 += 2 * xi2 * w * kq * eq[2] * eq[2];
      dpH1 += 2 * xi2 * w * kq * rq[2] * rq[2];
    }
    double ge[3][2] = {}, gr[3][2] = {};
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < 3; ++a) {
        ge[c][0] += g[a][0] * e[c][a];
        ge[c][1] += g[a][1] * e[c][a];
        gr[c][0] += g[a][0] * r[c][a];
        gr[c][1] += g[a][1] * r[c][a];
      }
    double xi2 = field.xi[t] * field.xi[t];
    double al2 = field.alpha[t] * field.alpha[t];
    nuH1 += xi2 * kint *
            (ge[0][0] * ge[0][0] + ge[0][1] * ge[0][1] + ge[1][0] * ge[1][0] + ge[1][1] * ge[1][1]);
    duH1 += xi2 * kint *
            (gr[0][0] * gr[0][0] + gr[0][1] * gr[0][1] + gr[1][0] * gr[1][0] + gr[1][1] * gr[1][1]);
    npH1 += al2 * kint * (ge[2][0] * ge[2][0] + ge[2][1] * ge[2][1]);
    dpH1 += al2 * kint * (gr[2][0] * gr[2][0] + gr[2][1] * gr[2][1]);
  }
  if (duL2 <= 0 || dpL2 <= 0 || duH1 <= 0 || dpH1 <= 0)
    throw ConfigError("degenerate reference");
  ErrorReport rep;
  rep.e_u_L2 = std::sqrt(nuL2 / duL2);
  rep.e_u_H1 = std::sqrt(nuH1 / duH1);
  rep.e_phi_L2 = std::sqrt(npL2 / dpL2);
  rep.e_phi_H1 = std::sqrt(npH1 / dpH1);
  return rep;
}

Problem build_problem(const ExperimentConfig& cfg) {
  Problem p;
  p.mesh = build_fine_mesh(cfg.nx, cfg.perforations);
  p.grid = build_coarse_grid(p.mesh, cfg.Nx, cfg.Ny);
  switch (cfg.media) {
    case MediaKind::Perforated:
      p.field = perforated_field(cfg.case_id, p.mesh);
      break;
    case MediaKind::Composite:
      p.field = composite_field(cfg.case_id, p.mesh, inclusion_mask(p.mesh, cfg.inclusions));
      break;
    case MediaKind::Stochastic:
      p.field = stochastic_field(cfg.case_id, cfg.seed, p.mesh);
      break;
  }
  p.dm = make_dof_map(p.mesh);
  return p;
}

const char* kCsvHeader =
    "method,media,case,N_b,N_it,theta,delta,DOF_H,e_u_L2,e_u_H1,e_phi_L2,e_phi_H1,"
    "picard_iters,wall_ms";

std::string csv_table(const std::vector<RunRow>& rows) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const RunRow& r : rows) {
    out << to_string(r.method) << ',' << to_string(r.media) << ',' << r.case_id << ',' << r.N_b
        << ',' << r.N_it << ',' << format_double(r.theta) << ',' << format_double(r.delta) << ','
        << r.dof_h << ',' << format_double(r.err.e_u_L2) << ',' << format_double(r.err.e_u_H1)
        << ',' << format_double(r.err.e_phi_L2) << ',' << format_double(r.err.e_phi_H1) << ','
        << r.picard_iters << ',' << format_double(r.wall_ms) << "\n";
  }
  return out.str();
}

void export_vtk(const SystemState& state, const TriMesh& mesh, const std::string& path) {
  VtkWriter w(mesh, "cosserat fields");
  std::vector<double> u1 = per_node_component(state, mesh, 0);
  std::vector<double> u2 = per_node_component(state, mesh, 1);
  std::vector<double> phi = per_node_component(state, mesh, 2);
  w.add_point_scalars("u1", u1);
  w.add_point_scalars("u2", u2);
  w.add_point_scalars("Phi", phi);
  w.add_point_vectors("displacement", u1, u2);
  w.write(path);
}

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string run_tag(const RunRow& r) {
  std::ostringstream s;
  s << to_string(r.method);
  if (r.method != Method::Fine) s << "_Nb" << r.N_b;
  if (r.method == Method::Online)
    s << "_Nit" << r.N_it << "_th" << format_double(r.theta) << "_d" << format_double(r.delta);
  return s.str();
}

void strip_vals(std::vector<BasisColumn>& cols) {
  for (auto& c : cols) {
    c.rows.clear();
    c.rows.shrink_to_fit();
    c.vals.clear();
    c.vals.shrink_to_fit();
  }
}

std::vector<BasisColumn> meta_of(const MultiscaleSpace& space) {
  std::vector<BasisColumn> meta;
  meta.reserve(space.cols.size());
  for (const auto& c : space.cols) {
    BasisColumn m;
    m.kind = c.kind;
    m.nbhd = c.nbhd;
    m.comp = c.comp;
    m.k = c.k;
    m.level = c.level;
    m.lambda = c.lambda;
    m.rows.resize(c.rows.size());  // nnz via rows.size(); squeezed below
    meta.push_back(std::move(m));
  }
  return meta;
}

}  // namespace

SuiteResult run_suite(const ExperimentConfig& cfg, bool quiet) {
  Problem p = build_problem(cfg);
  PicardOptions opts;
  opts.delta0 = cfg.delta0;
  opts.max_iter = cfg.max_picard;

  SuiteResult out;
  double t0 = now_ms();
  out.reference = picard_solve_fine(p.mesh, p.field, p.dm, opts);
  out.reference_wall_ms = now_ms() - t0;
  if (!quiet)
    std::cerr << "fine reference: " << out.reference.iterations << " picard iterations, "
              << format_double(out.reference_wall_ms) << " ms\n";

  if (cfg.method == Method::Fine) {
    RunRow row;
    row.method = Method::Fine;
    row.media = cfg.media;
    row.case_id = cfg.case_id;
    row.dof_h = p.dm.n_dofs();
    row.picard_iters = out.reference.iterations;
    row.wall_ms = out.reference_wall_ms;
    row.converged = out.reference.converged;
    row.trace = out.reference.trace;
    row.state = out.reference.state;
    out.rows.push_back(std::move(row));
  } else {
    int max_nb = *std::max_element(cfg.N_b.begin(), cfg.N_b.end());
    SystemState guess = constant_state(p.mesh, 1e-6, 1e-6);
    KappaField kappa0 = kappa_field(guess, p.mesh, p.field, opts.policy);
    OfflineBank bank = build_offline_bank(p.mesh, p.grid, p.field, kappa0, max_nb);
    if (!quiet) std::cerr << "offline bank built (max N_b " << max_nb << ")\n";

    for (int nb : cfg.N_b) {
      if (cfg.method == Method::Offline) {
        RunRow row;
        row.method = Method::Offline;
        row.media = cfg.media;
        row.case_id = cfg.case_id;
        row.N_b = nb;
        double s0 = now_ms();
        OfflineSolveResult os = picard_solve_offline(p.mesh, p.grid, p.field, p.dm, nb, opts, &bank);
        row.wall_ms = now_ms() - s0;
        row.dof_h = os.space.dof_h();
        row.picard_iters = os.picard.iterations;
        row.converged = os.picard.converged;
        row.trace = os.picard.trace;
        row.err = relative_errors(out.reference.state, os.picard.state,
                                  out.reference.kappa_final, p.mesh, p.field);
        row.basis_meta = meta_of(os.space);
        strip_vals(row.basis_meta);
        row.state = os.picard.state;
        if (!quiet) std::cerr << "offline N_b=" << nb << ": e_u_L2 " << format_double(row.err.e_u_L2) << "\n";
        out.rows.push_back(std::move(row));
      } else {
        for (int nit : cfg.N_it)
          for (double th : cfg.theta)
            for (double dl : cfg.delta) {
              RunRow row;
              row.method = Method::Online;
              row.media = cfg.media;
              row.case_id = cfg.case_id;
              row.N_b = nb;
              row.N_it = nit;
              row.theta = th;
              row.delta = dl;
              EnrichmentConfig ec;
              ec.N_b = nb;
              ec.N_it = nit;
              ec.theta = th;
              ec.delta = dl;
              ec.dual_norm = cfg.dual_norm;
              ec.sum_components = cfg.sum_components;
              double s0 = now_ms();
              OnlineSolveResult ons =
                  picard_solve_online(p.mesh, p.grid, p.field, p.dm, ec, opts, &bank);
              row.wall_ms = now_ms() - s0;
              row.dof_h = ons.space.dof_h();
              row.picard_iters = ons.picard.iterations;
              row.converged = ons.picard.converged;
              row.trace = ons.picard.trace;
              row.enrich_log = std::move(ons.log);
              row.err = relative_errors(out.reference.state, ons.picard.state,
                                        out.reference.kappa_final, p.mesh, p.field);
              row.basis_meta = meta_of(ons.space);
              strip_vals(row.basis_meta);
              row.state = ons.picard.state;
              if (!quiet)
                std::cerr << "online N_b=" << nb << " N_it=" << nit << " theta="
                          << format_double(th) << ": e_u_L2 " << format_double(row.err.e_u_L2)
                          << ", DOF_H " << row.dof_h << "\n";
              out.rows.push_back(std::move(row));
            }
      }
    }
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    auto path = [&](const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); };

    std::ofstream(path("results.csv")) << csv_table(out.rows);

    std::ostringstream tr;
    tr << "run,iter,rel_change,max_sqrt_q,inner\n";
    for (const TraceRow& t : out.reference.trace)
      tr << "fine," << t.iter << ',' << format_double(t.rel_change) << ','
         << format_double(t.max_sqrt_q) << ',' << t.inner_iters << "\n";
    for (const RunRow& r : out.rows) {
      if (r.method == Method::Fine) continue;
      std::string tag = run_tag(r);
      for (const TraceRow& t : r.trace)
        tr << tag << ',' << t.iter << ',' << format_double(t.rel_change) << ','
           << format_double(t.max_sqrt_q) << ',' << t.inner_iters << "\n";
    }
    std::ofstream(path("picard_trace.csv")) << tr.str();

    bool any_online = false;
    std::ostringstream el;
    el << "run,picard_iter,level,nbhd,r,selected,DOF_H\n";
    for (const RunRow& r : out.rows)
      for (const EnrichmentLogRow& e : r.enrich_log) {
        any_online = true;
        el << run_tag(r) << ',' << e.picard_iter << ',' << e.level << ',' << e.nbhd << ','
           << format_double(e.r) << ',' << (e.selected ? 1 : 0) << ',' << e.dof_after << "\n";
      }
    if (any_online) std::ofstream(path("enrichment_log.csv")) << el.str();

    bool any_meta = false;
    std::ostringstream bm;
    bm << "run,idx,kind,nbhd,comp,k,level,lambda,nnz\n";
    for (const RunRow& r : out.rows) {
      for (size_t i = 0; i < r.basis_meta.size(); ++i) {
        const BasisColumn& c = r.basis_meta[i];
        any_meta = true;
        bm << run_tag(r) << ',' << i << ','
           << (c.kind == BasisColumn::Kind::Offline ? "offline" : "online") << ',' << c.nbhd << ','
           << c.comp << ',' << c.k << ',' << c.level << ',' << format_double(c.lambda) << ','
           << c.rows.size() << "\n";
      }
    }
    if (any_meta) std::ofstream(path("basis_meta.csv")) << bm.str();

    export_vtk(out.reference.state, p.mesh, path("reference.vtk"));
    for (const RunRow& r : out.rows)
      if (r.method != Method::Fine) export_vtk(r.state, p.mesh, path("solution_" + run_tag(r) + ".vtk"));
  }
  return out;
}

namespace {

// quick self-checks behind the `verify` subcommand

KinematicState random_state(SplitMix64& rng, double scale) {
  KinematicState s;
  s.chi = {rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s.gamma[i][j] = rng.uniform(-scale, scale);
  return s;
}

bool verify_round_trip() {
  SplitMix64 rng{20260814};
  for (int it = 0; it < 1000; ++it) {
    double al = rng.uniform(0.5, 10), be = rng.uniform(0.5, 10), xi = rng.uniform(0.5, 10);
    KinematicState s = random_state(rng, 0.6);
    double q = quad_form_Q(s, al, be, xi);
    if (q >= 0.99 || q <= 0) continue;
    StressState st = stress_from_strain(s, al, be, xi);
    KinematicState back = strain_from_stress(st, al, be, xi);
    for (int c = 0; c < 2; ++c)
      if (std::abs(back.chi[c] - s.chi[c]) > 1e-10 * std::max(1.0, std::abs(s.chi[c])))
        return false;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (std::abs(back.gamma[i][j] - s.gamma[i][j]) >
            1e-10 * std::max(1.0, std::abs(s.gamma[i][j])))
          return false;
  }
  return true;
}

bool verify_hessian_psd() {
  SplitMix64 rng{77};
  int done = 0;
  while (done < 200) {
    double al = rng.uniform(0.5, 5), be = rng.uniform(0.5, 5), xi = rng.uniform(0.5, 5);
    KinematicState s = random_state(rng, 0.5);
    double q = quad_form_Q(s, al, be, xi);
    if (q <= 1e-4 || q >= 1 - 1e-4) continue;
    ++done;
    Eigen::Matrix<double, 6, 6> H = hessian_W(s, al, be, xi);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(H);
    if (es.eigenvalues().minCoeff() < -1e-9) return false;
  }
  return true;
}

bool verify_gradient() {
  SplitMix64 rng{99};
  int done = 0;
  while (done < 50) {
    double al = rng.uniform(0.5, 3), be = rng.uniform(0.5, 3), xi = rng.uniform(0.5, 3);
    KinematicState s = random_state(rng, 0.4);
    double q = quad_form_Q(s, al, be, xi);
    if (q <= 1e-3 || q >= 0.9) continue;
    ++done;
    StressState st = stress_from_strain(s, al, be, xi);
    const double h = 1e-6;
    auto fd = [&](auto set, double analytic) {
      KinematicState sp = s, sm = s;
      set(sp, h);
      set(sm, -h);
      double d = (energy_W(sp, al, be, xi) - energy_W(sm, al, be, xi)) / (2 * h);
      return std::abs(d - analytic) <= 1e-5 * std::max(1.0, std::abs(analytic));
    };
    for (int c = 0; c < 2; ++c)
      if (!fd([c](KinematicState& k, double dh) { k.chi[c] += dh; }, st.m[c])) return false;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (!fd([i, j](KinematicState& k, double dh) { k.gamma[i][j] += dh; }, st.tau[i][j]))
          return false;
  }
  return true;
}

struct SmallProblem {
  Problem p;
  PicardResult ref;
};

SmallProblem small_problem() {
  ExperimentConfig cfg;
  cfg.media = MediaKind::Perforated;
  cfg.case_id = 1;
  cfg.nx = 16;
  cfg.Nx = cfg.Ny = 4;
  cfg.perforations = {{1.0, 1.0, 0.2}};
  SmallProblem sp;
  sp.p = build_problem(cfg);
  sp.ref = picard_solve_fine(sp.p.mesh, sp.p.field, sp.p.dm);
  return sp;
}

bool verify_fine(const SmallProblem& sp) {
  if (!sp.ref.converged) return false;
  if (!(sp.ref.kappa_final.max_sqrt_q < 1)) return false;
  SparseOperator op = assemble_operator(sp.ref.state, sp.p.mesh, sp.p.field, sp.p.dm);
  return op.A.max_asymmetry() <= 1e-12 * op.A.norm_inf();
}

bool verify_offline(const SmallProblem& sp, ErrorReport* off_err) {
  OfflineSolveResult os = picard_solve_offline(sp.p.mesh, sp.p.grid, sp.p.field, sp.p.dm, 2);
  int nv = (sp.p.grid.Nx + 1) * (sp.p.grid.Ny + 1);
  if (os.space.dof_h() != 3 * 2 * nv) return false;
  *off_err = relative_errors(sp.ref.state, os.picard.state, sp.ref.kappa_final, sp.p.mesh,
                             sp.p.field);
  return off_err->e_u_L2 < 1 && off_err->e_phi_L2 < 1;
}

bool verify_online(const SmallProblem& sp, const ErrorReport& off_err) {
  EnrichmentConfig ec;
  ec.N_b = 2;
  ec.N_it = 2;
  ec.theta = 1.0;
  ec.delta = std::numeric_limits<double>::infinity();
  OnlineSolveResult ons = picard_solve_online(sp.p.mesh, sp.p.grid, sp.p.field, sp.p.dm, ec);
  ErrorReport err = relative_errors(sp.ref.state, ons.picard.state, sp.ref.kappa_final,
                                    sp.p.mesh, sp.p.field);
  return err.e_u_L2 <= off_err.e_u_L2 && err.e_phi_L2 <= off_err.e_phi_L2;
}

int run_verify(bool quiet) {
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    if (!ok) ++failures;
    if (!quiet || !ok) std::cout << (ok ? "[ok]   " : "[fail] ") << name << "\n";
  };
  try {
    report("constitutive round trip", verify_round_trip());
    report("hessian positive semidefinite", verify_hessian_psd());
    report("energy gradient consistency", verify_gradient());
    SmallProblem sp = small_problem();
    report("fine solve converges, operator symmetric", verify_fine(sp));
    ErrorReport off_err;
    report("offline space dofs and accuracy", verify_offline(sp, &off_err));
    report("online enrichment improves on offline", verify_online(sp, off_err));
  } catch (const std::exception& e) {
    std::cout << "[fail] exception: " << e.what() << "\n";
    ++failures;
  }
  if (!quiet) std::cout << (failures ? "verify: FAILED\n" : "verify: all checks passed\n");
  return failures ? 1 : 0;
}

int resolve_threads(int cli_threads) {
  if (cli_threads > 0) return cli_threads;
  if (const char* env = std::getenv("COSSERAT_MSFEM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"strain-limiting Cosserat elasticity: fine FEM and multiscale solvers"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  bool quiet = false;

  auto add_common = [&](CLI::App* sc, bool need_config) {
    auto* c = sc->add_option("--config", config_path, "experiment JSON config");
    if (need_config) c->required();
    sc->add_option("--out", out_dir, "output directory (overrides config)");
    sc->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
      seed_given = true;
    });
    sc->add_option("--threads", threads, "worker threads (default: COSSERAT_MSFEM_THREADS or all)");
    sc->add_flag("--quiet", quiet, "suppress progress output");
  };

  CLI::App* solve = app.add_subcommand("solve", "run one experiment against the fine reference");
  add_common(solve, true);
  CLI::App* sweep = app.add_subcommand("sweep", "run the sweep axes of a config");
  add_common(sweep, true);
  CLI::App* verify = app.add_subcommand("verify", "run the built-in self checks");
  add_common(verify, false);
  CLI::App* mesh_cmd = app.add_subcommand("mesh", "emit the mesh and media fields");
  add_common(mesh_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  int nt = resolve_threads(threads);
  if (nt > 0) set_threads(nt);

  try {
    if (verify->parsed()) return run_verify(quiet);

    ExperimentConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_given) cfg.seed = seed;

    if (mesh_cmd->parsed()) {
      if (cfg.out_dir.empty()) cfg.out_dir = ".";
      std::filesystem::create_directories(cfg.out_dir);
      Problem p = build_problem(cfg);
      std::string path = (std::filesystem::path(cfg.out_dir) / "mesh.vtk").string();
      write_mesh_vtk(p.mesh, path,
                     {{"xi", p.field.xi}, {"alpha", p.field.alpha}, {"beta", p.field.beta}});
      if (!quiet)
        std::cout << "mesh: " << p.mesh.n_tris() << " triangles, " << p.mesh.n_active_nodes()
                  << " active nodes -> " << path << "\n";
      return 0;
    }

    if (solve->parsed()) {
      if (cfg.N_b.size() > 1 || cfg.N_it.size() > 1 || cfg.theta.size() > 1 ||
          cfg.delta.size() > 1)
        throw ConfigError("solve expects scalar axes; use `sweep` for arrays");
    }

    SuiteResult res = run_suite(cfg, quiet);
    std::cout << csv_table(res.rows);
    for (const RunRow& r : res.rows)
      if (!r.converged && r.method != Method::Fine)
        throw SolverError("picard iteration did not converge for " + run_tag(r));
    if (!res.reference.converged) throw SolverError("fine reference did not converge");
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cosserat
