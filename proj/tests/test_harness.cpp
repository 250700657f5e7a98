#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cosserat/errors.hpp"
#include "cosserat/harness.hpp"

using namespace cosserat;
namespace fs = std::filesystem;

namespace {

MaterialField unit_field(const TriMesh& m) {
  MaterialField f;
  f.xi.assign(m.n_tris(), 1.0);
  f.alpha.assign(m.n_tris(), 1.0);
  f.beta.assign(m.n_tris(), 1.0);
  f.f_v = 1;
  f.g_v = 1;
  return f;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("cosserat_harness_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("relative errors: perturbations of a linear reference match closed forms") {
  TriMesh m = build_fine_mesh(2);  // h = 1, single interior node
  MaterialField f = unit_field(m);
  KappaField kap = kappa_field(constant_state(m, 0, 0), m, f, LimitPolicy::Strict);
  CHECK(kap.k[0] == 1.0);

  // reference u = (x, x), Phi = x keeps every error denominator positive
  int na = m.n_active_nodes();
  SystemState ref;
  ref.dofs.assign(3 * na, 0.0);
  for (int nd = 0; nd < m.n_nodes(); ++nd) {
    int a = m.node_to_active[nd];
    ref.dofs[a] = m.x[nd];
    ref.dofs[na + a] = m.x[nd];
    ref.dofs[2 * na + a] = m.x[nd];
  }

  ErrorReport zero = relative_errors(ref, ref, kap, m, f);
  CHECK(zero.e_u_L2 == 0.0);
  CHECK(zero.e_u_H1 == 0.0);
  CHECK(zero.e_phi_L2 == 0.0);
  CHECK(zero.e_phi_H1 == 0.0);

  int center = m.node_to_active[m.node_id(1, 1)];
  double eps = 1e-3;

  // center hat function: int hat^2 = 1/2, |hat|_H1^2 = 4 (both exact under the
  // degree-2 rule); int x^2 over the square = 16/3, |x|_H1^2 = 4.
  SystemState mu = ref;
  mu.dofs[center] += eps;
  ErrorReport eu = relative_errors(ref, mu, kap, m, f);
  CHECK(eu.e_u_L2 == doctest::Approx(eps * std::sqrt(0.5 / (32.0 / 3))).epsilon(1e-12));
  CHECK(eu.e_u_H1 == doctest::Approx(eps * std::sqrt(4.0 / 8.0)).epsilon(1e-12));
  CHECK(eu.e_phi_L2 == 0.0);
  CHECK(eu.e_phi_H1 == 0.0);

  // rotation form carries the 2 xi^2 kappa mass on top of alpha^2 gradients
  SystemState mp = ref;
  mp.dofs[2 * na + center] += eps;
  ErrorReport ep = relative_errors(ref, mp, kap, m, f);
  CHECK(ep.e_phi_L2 == doctest::Approx(eps * std::sqrt(0.5 / (16.0 / 3))).epsilon(1e-12));
  CHECK(ep.e_phi_H1 ==
        doctest::Approx(eps * std::sqrt((4.0 + 2 * 0.5) / (4.0 + 2 * 16.0 / 3))).epsilon(1e-12));
  CHECK(ep.e_u_L2 == 0.0);
  CHECK(ep.e_u_H1 == 0.0);

  // an identically zero reference has no scale to divide by
  SystemState null_ref;
  null_ref.dofs.assign(3 * na, 0.0);
  CHECK_THROWS_AS(relative_errors(null_ref, mu, kap, m, f), ConfigError);
}

TEST_CASE("config parsing: defaults, overrides, and rejects") {
  ExperimentConfig c = parse_config(R"({"media":"perforated","case":1})");
  CHECK(c.media == MediaKind::Perforated);
  CHECK(c.case_id == 1);
  CHECK(c.nx == 50);
  CHECK(c.Nx == 10);
  CHECK(c.Ny == 10);
  CHECK(c.method == Method::Fine);
  CHECK(c.N_b == std::vector<int>{4});
  CHECK(c.theta == std::vector<double>{1.0});
  CHECK(c.perforations.size() == 16);
  CHECK(c.inclusions.empty());

  ExperimentConfig s = parse_config(
      R"({"media":"stochastic","case":2,"seed":7,"nx":20,"Nx":5,"Ny":5,
          "method":"online","N_b":[2,4],"N_it":[3],"theta":[0.8,1.0],"delta":["inf"]})");
  CHECK(s.media == MediaKind::Stochastic);
  CHECK(s.seed == 7);
  CHECK(s.method == Method::Online);
  CHECK(s.N_b == std::vector<int>{2, 4});
  CHECK(std::isinf(s.delta.at(0)));
  CHECK(s.perforations.empty());

  ExperimentConfig comp = parse_config(
      R"({"media":"composite","case":1,"inclusions":[[0.5,0.5,0.1]]})");
  REQUIRE(comp.inclusions.size() == 1);
  CHECK(comp.inclusions[0].cx == 0.5);
  CHECK(comp.inclusions[0].r == 0.1);
  ExperimentConfig comp2 = parse_config(R"({"media":"composite","case":2})");
  CHECK(comp2.inclusions.size() == 4);
  CHECK(comp2.perforations.empty());
  ExperimentConfig none = parse_config(
      R"({"media":"perforated","case":1,"perforations":"none"})");
  CHECK(none.perforations.empty());

  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"granular","case":1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":3})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"nx":1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"theta":[0]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"theta":[1.5]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"delta":[-1]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"delta":["soon"]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"N_b":[]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"N_b":[0]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"method":"magic"})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"perforations":"bogus"})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"media":"perforated","case":1,"perforations":[[0.5,0.5]]})"),
                  ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("csv table formatting and double round-trip") {
  CHECK(std::string(kCsvHeader) ==
        "method,media,case,N_b,N_it,theta,delta,DOF_H,e_u_L2,e_u_H1,e_phi_L2,e_phi_H1,"
        "picard_iters,wall_ms");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(0.0) == "0");
  for (double v : {1.0 / 3, 6.02e23, 1e-300, 0.30000000000000004}) {
    CHECK(std::stod(format_double(v)) == v);
  }

  RunRow r;
  r.method = Method::Offline;
  r.media = MediaKind::Composite;
  r.case_id = 2;
  r.N_b = 4;
  r.dof_h = 1452;
  r.err = {0.25, 0.5, 0.125, 0.75};
  r.picard_iters = 9;
  r.wall_ms = 12.5;
  std::string table = csv_table({r});
  std::istringstream in(table);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == kCsvHeader);
  CHECK(line == "offline,composite,2,4,0,0,0,1452,0.25,0.5,0.125,0.75,9,12.5");
}

TEST_CASE("vtk export writes parseable nodal fields") {
  TempDir tmp;
  TriMesh m = build_fine_mesh(4);
  SystemState s = constant_state(m, 1.5, -2.5);
  std::string path = (tmp.path / "out.vtk").string();
  export_vtk(s, m, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line.find("# vtk DataFile") == 0);

  int points = -1, cells = -1;
  bool saw_u1 = false, saw_disp = false;
  int phi_count = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "POINTS") ls >> points;
    if (tok == "CELLS") ls >> cells;
    if (tok == "VECTORS") {
      std::string name;
      ls >> name;
      if (name == "displacement") {
        saw_disp = true;
        for (int n = 0; n < m.n_nodes(); ++n) {
          double vx, vy, vz;
          in >> vx >> vy >> vz;
          CHECK(vx == 1.5);
          CHECK(vz == 0.0);
        }
      }
    }
    if (tok == "SCALARS") {
      std::string name;
      ls >> name;
      if (name == "u1") saw_u1 = true;
      if (name == "Phi") {
        std::getline(in, line);  // LOOKUP_TABLE default
        for (int n = 0; n < m.n_nodes(); ++n) {
          double v;
          in >> v;
          CHECK(v == -2.5);
          ++phi_count;
        }
      }
    }
  }
  CHECK(points == m.n_nodes());
  CHECK(cells == m.n_tris());
  CHECK(saw_u1);
  CHECK(saw_disp);
  CHECK(phi_count == m.n_nodes());
}

TEST_CASE("run_suite: artifacts, sweep rows, determinism") {
  TempDir tmp;
  // blocks must span a few cells: at nx/Nx = 2 the corner-vertex columns all
  // live on one free node and the coarse operator goes singular
  ExperimentConfig cfg = parse_config(R"({"media":"perforated","case":1,"perforations":"none",
      "nx":20,"Nx":5,"Ny":5,"method":"offline","N_b":[1,2]})");
  cfg.out_dir = (tmp.path / "run").string();
  SuiteResult res = run_suite(cfg, true);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.reference.converged);
  for (const RunRow& r : res.rows) {
    CHECK(r.converged);
    CHECK(r.err.e_u_L2 > 0);
    CHECK(r.err.e_u_L2 < 1);
    CHECK(std::isfinite(r.err.e_phi_H1));
  }
  CHECK(res.rows[0].dof_h == 3 * 1 * 36);
  CHECK(res.rows[1].dof_h == 3 * 2 * 36);
  CHECK(res.rows[1].err.e_u_L2 < res.rows[0].err.e_u_L2);

  for (const char* name : {"results.csv", "picard_trace.csv", "reference.vtk"})
    CHECK(fs::exists(tmp.path / "run" / name));

  SuiteResult res2 = run_suite(cfg, true);
  CHECK(res2.rows[0].err.e_u_L2 == res.rows[0].err.e_u_L2);
  CHECK(res2.rows[1].err.e_phi_L2 == res.rows[1].err.e_phi_L2);

  ExperimentConfig on = parse_config(R"({"media":"perforated","case":1,"perforations":"none",
      "nx":20,"Nx":5,"Ny":5,"method":"online","N_b":[1],"N_it":[1],"theta":[1.0],"delta":[0.1]})");
  on.out_dir = (tmp.path / "on").string();
  SuiteResult ron = run_suite(on, true);
  REQUIRE(ron.rows.size() == 1);
  CHECK(ron.rows[0].converged);
  CHECK_FALSE(ron.rows[0].enrich_log.empty());
  CHECK(ron.rows[0].dof_h > 3 * 1 * 36);  // enrichment grew the space
  CHECK(ron.rows[0].err.e_u_L2 < res.rows[0].err.e_u_L2);
  CHECK(fs::exists(tmp.path / "on" / "enrichment_log.csv"));
  CHECK(fs::exists(tmp.path / "on" / "basis_meta.csv"));
}

TEST_CASE("cli entry: exit codes and mesh output") {
  TempDir tmp;
  auto run = [](std::vector<std::string> args) {
    args.insert(args.begin(), "cosserat-msfem");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli_main((int)argv.size(), argv.data());
  };

  CHECK(run({"nope"}) == 2);
  CHECK(run({"solve"}) == 2);
  CHECK(run({"solve", "--config", "/definitely/missing.json"}) == 2);

  std::string bad = (tmp.path / "bad.json").string();
  std::ofstream(bad) << R"({"media":"perforated","case":9})";
  CHECK(run({"solve", "--config", bad}) == 2);

  std::string sweep_cfg = (tmp.path / "sweep.json").string();
  std::ofstream(sweep_cfg) << R"({"media":"perforated","case":1,"perforations":"none",
      "nx":10,"Nx":5,"Ny":5,"method":"offline","N_b":[1,2]})";
  CHECK(run({"solve", "--config", sweep_cfg}) == 2);  // arrays require `sweep`

  std::string mesh_cfg = (tmp.path / "mesh.json").string();
  std::ofstream(mesh_cfg) << R"({"media":"perforated","case":1,"nx":10})";
  std::string mesh_out = (tmp.path / "meshout").string();
  CHECK(run({"mesh", "--config", mesh_cfg, "--out", mesh_out, "--quiet"}) == 0);
  CHECK(fs::exists(fs::path(mesh_out) / "mesh.vtk"));
}
