// Config loading and validation, scenario sampling, Hoeffding margins and the
// coupling polyhedron.

#include "catch_amalgamated.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <string>

using namespace sbgame;
using Catch::Approx;

namespace {

const std::string kReference = std::string(SBGAME_SOURCE_DIR) + "/examples/paper_sec6.cfg";

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool has_message(const ValidationReport& r, const std::string& needle) {
  for (const auto& v : r.violations)
    if (v.message.find(needle) != std::string::npos) return true;
  return false;
}

const char* kMinimal = R"({
  "agents": 2, "horizon": 2,
  "battery": {"x0": 0.5, "x_min": 0.1, "x_max": 0.9, "capacity": 10},
  "chance": {"delta_x": 0.8, "delta_x_tilde": 0.05, "delta_final": 0.9, "delta_final_tilde": 0.05,
             "delta_g": 0.8, "delta_g_tilde": 0.05, "r_target": 0.6, "epsilon": 0.05, "g_max": 10},
  "tariff": {"k_tou": [1, 2], "k_c": 0.1, "alpha_dch": 1, "beta_dch": 1},
  "renewable": {"mean": [1, 2], "deviation": 0.25},
  "demand": [{"mean": [3, 4], "deviation": 0.25}]
})";

}  // namespace

TEST_CASE("reference config loads with the documented parameters", "[model]") {
  const auto c = load_config(kReference);
  CHECK(c.n_agents == 20);
  CHECK(c.horizon == 24);
  CHECK(c.tariff.alpha_dch == 8.0);
  CHECK(c.tariff.beta_dch == 10.0);
  CHECK(c.tariff.k_c == 0.015);
  CHECK(c.battery.rho() == Approx(5e-5).epsilon(1e-14));
  CHECK(c.battery.u_max[0] == Approx(1000.0));
  CHECK(c.tariff.k_tou[0] == 29.45);
  CHECK(c.tariff.k_tou[19] == 30.5);
  CHECK(c.solver.alpha[2] == Approx(0.0317));
  CHECK(c.demand[7][17].lower == Approx(0.75 * 33));
  CHECK(c.demand[7][17].upper == Approx(1.25 * 33));
  CHECK(validate(c).ok());
}

TEST_CASE("defaults fill omitted optional fields", "[model]") {
  const auto c = load_config_text(kMinimal);
  CHECK(c.battery.eta == Approx(0.1));
  CHECK(c.battery.dt == 1.0);
  CHECK(c.battery.u_max == std::vector<double>{5.0, 5.0});
  CHECK(c.demand.size() == 2);
  CHECK(c.demand[1][1].mean == 4.0);
  CHECK(c.chance.nu_r.empty());
  CHECK(c.renewable_dependency.edges.empty());
  CHECK(c.solver.eps_u == 1e-6);
  CHECK(c.solver.max_iters == 100000);
  CHECK(c.experiment.validation_samples == 100000);
  CHECK(c.experiment.cost_samples == 1000);
}

TEST_CASE("config errors name the offending key", "[model]") {
  std::string text = kMinimal;
  const auto pos = text.find(R"("demand": [{)");
  const auto end = text.rfind("]");
  text.replace(pos, end - pos + 1, R"("demand": [])");
  try {
    load_config_text(text);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "demand");
  }
  CHECK_THROWS_AS(load_config("does/not/exist.cfg"), ConfigError);
  CHECK_THROWS_AS(load_config_text("{ not json"), ConfigError);
  try {
    load_config_text(R"({"agents": 2})");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "horizon");
  }
}

TEST_CASE("inverted SoC bounds are rejected", "[model]") {
  std::string text = kMinimal;
  text.replace(text.find(R"("x_min": 0.1, "x_max": 0.9)"), 26, R"("x_min": 0.9, "x_max": 0.1)");
  try {
    load_config_text(text);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(has_message(e.report(), "x_min < x_max violated"));
  }
}

TEST_CASE("validate reports each broken invariant", "[model]") {
  const auto base = load_config(kReference);
  REQUIRE(validate(base).ok());

  auto c = base;
  c.chance.epsilon = 0.6;
  CHECK(has_message(validate(c), "epsilon < min(r_target - x_min, x_max - r_target) violated"));

  c = base;
  c.chance.delta_x_tilde[3] = 0.9;
  c.chance.delta_x[3] = 0.8;
  CHECK(has_message(validate(c), "delta_x - delta_x_tilde > 0 required"));

  using Mutator = std::function<void(MicrogridConfig&)>;
  const std::vector<std::pair<std::string, Mutator>> perturbations = {
      {"agents", [](auto& x) { x.n_agents = 0; }},
      {"battery.x0", [](auto& x) { x.battery.x0 = 0.95; }},
      {"battery.eta", [](auto& x) { x.battery.eta = 0.0; }},
      {"battery.dt", [](auto& x) { x.battery.dt = -1.0; }},
      {"battery.u_max[4]", [](auto& x) { x.battery.u_max[4] = 0.0; }},
      {"chance.delta_g_tilde[0]", [](auto& x) { x.chance.delta_g_tilde[0] = 0.0; }},
      {"chance.delta_final", [](auto& x) { x.chance.delta_final = 0.05; }},
      {"chance.r_target", [](auto& x) { x.chance.r_target = 0.95; }},
      {"chance.g_max", [](auto& x) { x.chance.g_max = -1.0; }},
      {"dependencies.nu_r", [](auto& x) { x.chance.nu_r.pop_back(); }},
      {"dependencies.nu_d[2]", [](auto& x) { x.chance.nu_d[2] = 0.0; }},
      {"tariff.k_c", [](auto& x) { x.tariff.k_c = 0.0; }},
      {"tariff.alpha_dch", [](auto& x) { x.tariff.alpha_dch = -8.0; }},
      {"tariff.beta_dch", [](auto& x) { x.tariff.beta_dch = 0.0; }},
      {"tariff.k_tou", [](auto& x) { x.tariff.k_tou.pop_back(); }},
      {"renewable[5]", [](auto& x) { x.renewable[5].mean = x.renewable[5].upper + 1.0; }},
      {"demand[2][3]", [](auto& x) { x.demand[2][3].lower = x.demand[2][3].upper + 1.0; }},
      {"dependencies.demand_edges", [](auto& x) { x.demand_dependency.edges.emplace_back(3, 3); }},
      {"solver.alpha", [](auto& x) { x.solver.alpha.pop_back(); }},
      {"solver.max_iters", [](auto& x) { x.solver.max_iters = 0; }},
  };
  for (const auto& [key, mutate] : perturbations) {
    INFO(key);
    auto p = base;
    mutate(p);
    const auto report = validate(p);
    REQUIRE_FALSE(report.ok());
    CHECK(report.violations.front().key == key);
  }
}

TEST_CASE("exported configs reload identically", "[model]") {
  const auto c = load_config(kReference);
  const auto again = load_config_text(export_config(c));
  CHECK(again == c);
  std::mt19937_64 gen(3);
  for (int k = 0; k < 20; ++k) {
    auto f = oracle::fuzz_config(gen);
    f.demand_dependency.edges = {{0, f.n_agents - 1}};
    if (f.n_agents == 1) f.demand_dependency.edges.clear();
    f.solver.gamma = 0.01;
    CHECK(load_config_text(export_config(f), false) == f);
  }
}

TEST_CASE("scenario sampling", "[model]") {
  auto c = oracle::basic_config(3, 4);
  for (auto& r : c.renewable) r = {5.0, 5.0, 5.0};
  for (auto& row : c.demand)
    for (auto& d : row) d = {5.0, 5.0, 5.0};
  const auto d0 = sample_scenario(c, 11);
  CHECK((d0.renewable.array() == 5.0).all());
  CHECK((d0.demand.array() == 5.0).all());

  const auto ref = load_config(kReference);
  const auto a = sample_scenario(ref, 42), b = sample_scenario(ref, 42);
  CHECK(a.renewable == b.renewable);
  CHECK(a.demand == b.demand);
  CHECK(sample_scenario(ref, 43).demand != a.demand);

  SECTION("law of large numbers on a 25% support") {
    auto one = oracle::basic_config(1, 1);
    one.demand[0][0] = BoundedRV::around(40.0, 0.25);
    double sum = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) sum += sample_scenario(one, scenario_seed(8, k)).demand(0, 0);
    CHECK(std::abs(sum / n - 40.0) <= 0.005 * 40.0);
  }

  SECTION("every draw stays inside its support") {
    std::mt19937_64 gen(17);
    long values = 0;
    bool inside = true;
    while (values < 1000000) {
      const auto f = oracle::fuzz_config(gen);
      for (int k = 0; k < 500; ++k) {
        const auto d = sample_scenario(f, gen());
        for (int t = 0; t < f.horizon; ++t) {
          inside = inside && d.renewable(t) >= f.renewable[t].lower && d.renewable(t) <= f.renewable[t].upper;
          for (int i = 0; i < f.n_agents; ++i)
            inside = inside && d.demand(i, t) >= f.demand[i][t].lower && d.demand(i, t) <= f.demand[i][t].upper;
        }
        values += static_cast<long>(f.horizon) * (f.n_agents + 1);
      }
    }
    CHECK(inside);
  }
}

TEST_CASE("greedy colouring bound", "[chance]") {
  CHECK(chromatic_upper_bound(DependencyGraph::edgeless(5)) == 1);
  CHECK(chromatic_upper_bound(DependencyGraph::complete(4)) == 4);
  DependencyGraph cycle = DependencyGraph::edgeless(5);
  for (int v = 0; v < 5; ++v) cycle.edges.emplace_back(v, (v + 1) % 5);
  CHECK(chromatic_upper_bound(cycle) == 3);
  CHECK(oracle::chromatic_number(cycle) == 3);

  std::mt19937_64 gen(5);
  for (int k = 0; k < 300; ++k) {
    const int n = 1 + static_cast<int>(gen() % 8);
    DependencyGraph g = DependencyGraph::edgeless(n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (gen() % 3 == 0) g.edges.emplace_back(a, b);
    const int bound = chromatic_upper_bound(g);
    CHECK(bound >= oracle::chromatic_number(g));
    CHECK(bound >= 1);
  }
}

TEST_CASE("Hoeffding margin", "[chance]") {
  const std::vector<double> two = {2.0};
  CHECK(hoeffding_margin(two, 1.0, std::exp(-1.0)) == Approx(2.0).epsilon(1e-14));
  CHECK(hoeffding_margin(std::vector<double>{1.0, 3.0}, 0.5, 1.0) == 0.0);
  CHECK(hoeffding_margin(std::vector<double>{0.0, 0.0}, 1.0, 0.05) == 0.0);
  CHECK_THROWS_AS(hoeffding_margin(two, 1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(hoeffding_margin(two, 1.0, 1.2), std::domain_error);
  CHECK_THROWS_AS(hoeffding_margin(two, 0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(hoeffding_margin(std::vector<double>{-1.0}, 1.0, 0.5), std::domain_error);
  for (double d = 0.05; d < 0.95; d += 0.05) CHECK(hoeffding_margin(two, 1.0, d) > hoeffding_margin(two, 1.0, d + 0.05));
}

TEST_CASE("sampled one-sided tail stays within the confidence level", "[chance]") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int set = 0; set < 20; ++set) {
    const int n = 1 + static_cast<int>(gen() % 6);
    std::vector<double> lo(n), hi(n), w(n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      lo[i] = 4.0 * unit(gen) - 2.0;
      hi[i] = lo[i] + 0.1 + 3.0 * unit(gen);
      w[i] = hi[i] - lo[i];
      mean += 0.5 * (lo[i] + hi[i]);
    }
    const double delta = 0.02 + 0.5 * unit(gen);
    const double q = hoeffding_margin(w, 0.5, delta);  // independent: chi = 1
    const int samples = 20000;
    int hits = 0;
    for (int k = 0; k < samples; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += std::uniform_real_distribution<double>(lo[i], hi[i])(gen);
      if (s - mean <= -q) ++hits;
    }
    const double rate = static_cast<double>(hits) / samples;
    CHECK(rate <= delta + 3.0 * std::sqrt(delta * (1 - delta) / samples));
  }
}

TEST_CASE("SoC, final and grid margins", "[chance]") {
  SECTION("single step SoC margin") {
    auto c = oracle::basic_config(1, 1, 1.0);
    c.renewable[0] = {0.0, 2.0, 1.0};
    c.chance.nu_r = {1.0};
    c.chance.delta_x_tilde = {std::exp(-1.0)};
    CHECK(soc_margins(c).first[0] == Approx(2.0).epsilon(1e-14));
    c.chance.delta_x_tilde = {1.0};
    c.chance.delta_x = {2.0};  // keeps delta - tilde = 1 for the test
    const auto [q1, q2] = soc_margins(c);
    CHECK(q1[0] == 0.0);
    CHECK(q2[0] == 0.0);
  }
  SECTION("final margin over the whole horizon") {
    auto c = oracle::basic_config(1, 2, 1.0);
    c.renewable = {{0.0, 1.0, 0.5}, {0.0, 1.0, 0.5}};
    c.chance.nu_r = {1.0, 1.0};
    c.chance.delta_final_tilde = std::exp(-2.0);
    CHECK(final_soc_margins(c).first == Approx(2.0).epsilon(1e-14));
    c.chance.delta_final_tilde = 1.0;
    c.chance.delta_final = 2.0;
    CHECK(final_soc_margins(c).first == 0.0);
  }
  SECTION("reference final margins differ by the log ratio") {
    const auto c = load_config(kReference);
    const auto [f1, f2] = final_soc_margins(c);
    CHECK(f1 / f2 == Approx(std::sqrt(std::log(0.05) / std::log(0.85))).epsilon(1e-12));
  }
  SECTION("grid margins have no rho factor") {
    auto c = oracle::basic_config(1, 3, 0.01);
    c.demand[0][1] = {0.0, 2.0, 1.0};
    c.chance.nu_d = {1.0, 1.0, 1.0};
    c.chance.delta_g_tilde = {0.5, std::exp(-1.0), 0.5};
    const auto [g1, g2] = grid_margins(c);
    CHECK(g1[0] == 0.0);
    CHECK(g1[1] == Approx(2.0).epsilon(1e-14));
    CHECK(g2[2] == 0.0);

    auto four = oracle::basic_config(4, 1);
    const double w = 0.7;
    for (auto& row : four.demand) row[0] = {1.0 - w / 2, 1.0 + w / 2, 1.0};
    four.chance.nu_d = {1.0};
    CHECK(grid_margins(four).first[0] == Approx(2 * w * std::sqrt(-std::log(0.05))).epsilon(1e-12));
  }
  SECTION("nu derived from the dependency graphs") {
    auto c = oracle::basic_config(3, 3);
    CHECK(effective_nu_d(c) == std::vector<double>{0.5, 0.5, 0.5});
    c.demand_dependency = DependencyGraph::complete(3);
    CHECK(effective_nu_d(c)[0] == 1.5);
    c.renewable_dependency.edges = {{1, 2}};
    CHECK(effective_nu_r(c) == std::vector<double>{0.5, 0.5, 1.0});
  }
  SECTION("margins grow along the horizon and with widths and nu") {
    const auto c = load_config(kReference);
    const auto q = compute_margins(c);
    for (int t = 1; t < c.horizon; ++t) {
      CHECK(q.q_x1[t] >= q.q_x1[t - 1]);
      CHECK(q.q_x2[t] >= q.q_x2[t - 1]);
    }
    auto wider = c;
    for (auto& r : wider.renewable) r = BoundedRV::around(r.mean, 0.3);
    for (auto& row : wider.demand)
      for (auto& d : row) d = BoundedRV::around(d.mean, 0.3);
    const auto qw = compute_margins(wider);
    auto more_nu = c;
    more_nu.chance.nu_r.assign(c.horizon, 2.0);
    more_nu.chance.nu_d.assign(c.horizon, 2.0);
    const auto qn = compute_margins(more_nu);
    for (int t = 0; t < c.horizon; ++t) {
      CHECK(qw.q_x1[t] >= q.q_x1[t]);
      CHECK(qw.q_g2[t] >= q.q_g2[t]);
      CHECK(qn.q_x2[t] >= q.q_x2[t]);
      CHECK(qn.q_g1[t] >= q.q_g1[t]);
    }
    CHECK(qw.q_final1 >= q.q_final1);
    CHECK(qn.q_final2 >= q.q_final2);
  }
}

TEST_CASE("coupling rows", "[constraints]") {
  auto c = oracle::basic_config(1, 1, 1.0);
  c.renewable[0] = BoundedRV::around(0.2, 0.0);
  const auto cc = build_coupling(c, compute_margins(c), ConstraintMode::stochastic);
  CHECK(cc.rows() == 6);
  CHECK(cc.A(0, 0) == 1.0);
  CHECK(cc.b(0) == Approx(0.6).epsilon(1e-14));
  CHECK(cc.block_index[0] == RowBlock::soc_lower);
  CHECK(cc.block_index[5] == RowBlock::grid_upper);
  CHECK(std::string(to_string(cc.block_index[3])) == "final-upper");

  MarginSet bad = compute_margins(c);
  bad.q_g1.push_back(0.0);
  bad.q_x1.push_back(0.0);
  CHECK_THROWS_AS(build_coupling(c, bad, ConstraintMode::stochastic), std::invalid_argument);

  SECTION("stochastic rows tighten the zero-margin rows by exactly the margins") {
    const auto ref = load_config(kReference);
    const auto q = compute_margins(ref);
    MarginSet zero = q;
    for (auto* v : {&zero.q_x1, &zero.q_x2, &zero.q_g1, &zero.q_g2}) std::fill(v->begin(), v->end(), 0.0);
    zero.q_final1 = zero.q_final2 = 0.0;
    const auto s = build_coupling(ref, q, ConstraintMode::stochastic);
    const auto z = build_coupling(ref, zero, ConstraintMode::stochastic);
    const int tau = ref.horizon;
    CHECK(s.rows() == 98);
    for (int t = 0; t < tau; ++t) {
      CHECK(z.b(t) - s.b(t) == Approx(q.q_x1[t]).margin(1e-15));
      CHECK(z.b(tau + t) - s.b(tau + t) == Approx(q.q_x2[t]).margin(1e-15));
      CHECK(z.b(2 * tau + 2 + t) - s.b(2 * tau + 2 + t) == Approx(q.q_g1[t]).epsilon(1e-12));
      CHECK(z.b(3 * tau + 2 + t) - s.b(3 * tau + 2 + t) == Approx(q.q_g2[t]).epsilon(1e-12));
    }
    CHECK(z.b(2 * tau) - s.b(2 * tau) == Approx(q.q_final1).margin(1e-15));
    CHECK(z.b(2 * tau + 1) - s.b(2 * tau + 1) == Approx(q.q_final2).margin(1e-15));
    CHECK(s.A == z.A);
  }

  SECTION("deterministic modes use the demand bounds and zero margins") {
    const auto ref = load_config(kReference);
    const auto q = compute_margins(ref);
    const auto lo = build_coupling(ref, q, ConstraintMode::det_lower);
    const auto hi = build_coupling(ref, q, ConstraintMode::det_upper);
    const int tau = ref.horizon;
    double sum_lower = 0.0, sum_upper = 0.0;
    for (int i = 0; i < ref.n_agents; ++i) {
      sum_lower += ref.demand[i][18].lower;
      sum_upper += ref.demand[i][18].upper;
    }
    CHECK(lo.b(2 * tau + 2 + 18) == Approx(sum_lower));
    CHECK(hi.b(3 * tau + 2 + 18) == Approx(ref.chance.g_max - sum_upper));
    CHECK(lo.b.head(2 * tau + 2) == hi.b.head(2 * tau + 2));
  }
}

TEST_CASE("projections", "[constraints]") {
  const LocalBox unit1{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  CHECK(project_box(Eigen::VectorXd::Constant(1, 1.5), unit1)(0) == 1.0);
  CHECK(project_box(Eigen::VectorXd::Constant(1, 0.25), unit1)(0) == 0.25);
  const LocalBox unit3{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)};
  CHECK(project_box(Eigen::Vector3d(-0.3, 0.5, 2.0), unit3) == Eigen::Vector3d(0.0, 0.5, 1.0));
  CHECK(project_nonneg(Eigen::Vector2d(-1.0, 2.0)) == Eigen::Vector2d(0.0, 2.0));
  CHECK(project_nonneg(Eigen::Vector2d(3.0, 0.0)) == Eigen::Vector2d(3.0, 0.0));

  // Brute force: the nearest point of the orthant, componentwise over {0, v_k}.
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd v(4);
    for (int j = 0; j < 4; ++j) v(j) = normal(gen);
    Eigen::VectorXd best;
    double best_d = 1e300;
    for (int mask = 0; mask < 16; ++mask) {
      Eigen::VectorXd cand(4);
      bool ok = true;
      for (int j = 0; j < 4; ++j) {
        cand(j) = (mask >> j & 1) ? v(j) : 0.0;
        ok = ok && cand(j) >= 0.0;
      }
      if (ok && (cand - v).squaredNorm() < best_d) {
        best_d = (cand - v).squaredNorm();
        best = cand;
      }
    }
    CHECK(project_nonneg(v) == best);
  }
}

TEST_CASE("aggregate violation", "[constraints]") {
  const auto c = load_config(kReference);
  const auto q = compute_margins(c);
  const auto cc = build_coupling(c, q, ConstraintMode::stochastic);
  const Strategy zero = Strategy::Zero(c.n_agents, c.horizon);
  const auto v = aggregate_violation(cc, zero);
  const auto mu = c.total_demand_mean();
  for (int t = 0; t < c.horizon; ++t) CHECK(v(2 * c.horizon + 2 + t) == Approx(-(mu(t) - q.q_g1[t])));

  Strategy one = Strategy::Zero(1, c.horizon);
  one.setConstant(3.0);
  Strategy two(2, c.horizon);
  two << one, one;
  CHECK(((cc.A * aggregate(two)) - 2.0 * (cc.A * aggregate(one))).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(aggregate_violation(cc, Strategy::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("strict feasibility search", "[constraints]") {
  SECTION("slack everywhere returns the midpoint") {
    auto c = oracle::basic_config(2, 3, 0.01);
    auto cc = build_coupling(c, compute_margins(c), ConstraintMode::stochastic);
    cc.b.setConstant(1e6);
    const auto boxes = local_boxes(c);
    const auto rep = feasibility_search(cc, boxes);
    REQUIRE(rep.strictly_feasible);
    REQUIRE(rep.witness);
    CHECK(rep.witness->row(0).transpose() == boxes[0].midpoint());
    CHECK(rep.min_max_violation < 0.0);
  }
  SECTION("unreachable grid-lower row is reported infeasible") {
    auto c = oracle::basic_config(1, 1, 0.01);
    c.demand[0][0] = BoundedRV::around(1.0, 1.0);  // width 2, q_g1 = 2 sqrt(-ln 0.05) > 1
    c.battery.u_max = {0.1};
    const auto cc = build_coupling(c, compute_margins(c), ConstraintMode::stochastic);
    const int row = CouplingConstraint::block_offset(RowBlock::grid_lower, 1);
    REQUIRE(cc.b(row) < 0.0);
    const auto rep = feasibility_search(cc, local_boxes(c), {20000, 1e-8, false});
    CHECK_FALSE(rep.strictly_feasible);
    CHECK_FALSE(rep.witness);
    // Grid enumeration over [0, 0.1] agrees that no point is strictly feasible.
    double best = 1e300;
    for (int k = 0; k <= 1000; ++k) {
      Strategy u(1, 1);
      u(0, 0) = 0.1 * k / 1000.0;
      best = std::min(best, aggregate_violation(cc, u).maxCoeff());
    }
    CHECK(best > 0.0);
    CHECK(rep.min_max_violation == Approx(best).margin(1e-6));
  }
  SECTION("reference instance is strictly feasible in every mode") {
    const auto c = load_config(kReference);
    for (auto m : {ConstraintMode::stochastic, ConstraintMode::det_lower, ConstraintMode::det_upper}) {
      const auto rep = feasibility_search(build_coupling(c, compute_margins(c), m), local_boxes(c));
      CHECK(rep.strictly_feasible);
    }
  }
  SECTION("stochastic-feasible points satisfy the zero-margin mean rows") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int checked = 0;
    for (int inst = 0; inst < 30; ++inst) {
      auto c = oracle::fuzz_config(gen, 3, 3);
      const auto q = compute_margins(c);
      MarginSet zero = q;
      for (auto* v : {&zero.q_x1, &zero.q_x2, &zero.q_g1, &zero.q_g2}) std::fill(v->begin(), v->end(), 0.0);
      zero.q_final1 = zero.q_final2 = 0.0;
      const auto s = build_coupling(c, q, ConstraintMode::stochastic);
      const auto z = build_coupling(c, zero, ConstraintMode::stochastic);
      for (int k = 0; k < 2000; ++k) {
        Strategy u(c.n_agents, c.horizon);
        for (int i = 0; i < c.n_agents; ++i)
          for (int t = 0; t < c.horizon; ++t) u(i, t) = unit(gen) * c.battery.u_max[i];
        if ((aggregate_violation(s, u).array() <= 0.0).all()) {
          ++checked;
          CHECK((aggregate_violation(z, u).array() <= 1e-12).all());
        }
      }
    }
    CHECK(checked > 0);
  }
}
