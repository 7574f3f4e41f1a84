#include <doctest.h>

#include <set>

#include "quadfit/errors.hpp"
#include "quadfit/gradcheck.hpp"

using namespace quadfit;

TEST_CASE("every loss passes") {
  GradcheckOptions o;
  const GradcheckResult r = run_gradcheck(o);
  const auto names = gradcheck_loss_names();
  CHECK(r.cases.size() == names.size() * 20);
  CHECK(r.passed());
  std::set<std::string> meshes;
  for (const GradcheckCase& c : r.cases) {
    CAPTURE(c.loss);
    CAPTURE(c.index);
    CHECK(c.passed);
    CHECK(c.error <= 1e-4);
    CHECK(c.redraws <= o.max_redraws);
    meshes.insert(c.mesh);
  }
  // grids from 4x4 to 8x8 plus a tube
  for (const char* m : {"grid 4x4", "grid 5x5", "grid 6x6", "grid 7x7", "grid 8x8", "tube 6x3"}) {
    CHECK(meshes.count(m) == 1);
  }
}

TEST_CASE("seeded and selectable") {
  GradcheckOptions o;
  o.losses = {"chamfer", "aspect"};
  o.cases_per_loss = 4;
  o.seed = 11;
  const GradcheckResult a = run_gradcheck(o), b = run_gradcheck(o);
  REQUIRE(a.cases.size() == 8);
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    CHECK(a.cases[i].value == b.cases[i].value);
    CHECK(a.cases[i].error == b.cases[i].error);
  }
  o.seed = 12;
  CHECK(run_gradcheck(o).cases[0].value != a.cases[0].value);
}

TEST_CASE("a corrupted gradient is caught") {
  for (const std::string& name : gradcheck_loss_names()) {
    CAPTURE(name);
    GradcheckOptions o;
    o.losses = {name};
    o.cases_per_loss = 2;
    o.corrupt = name;
    const GradcheckResult r = run_gradcheck(o);
    CHECK_FALSE(r.passed());
    for (const GradcheckCase& c : r.cases) CHECK(c.error > 1e-4);
  }
}

TEST_CASE("bad options") {
  GradcheckOptions o;
  o.losses = {"curvature"};
  CHECK_THROWS_AS(run_gradcheck(o), ConfigError);
  o = GradcheckOptions{};
  o.corrupt = "nope";
  CHECK_THROWS_AS(run_gradcheck(o), ConfigError);
  o = GradcheckOptions{};
  o.cases_per_loss = 0;
  CHECK_THROWS_AS(run_gradcheck(o), ConfigError);
  o = GradcheckOptions{};
  o.h = -1.0;
  CHECK_THROWS_AS(run_gradcheck(o), ConfigError);
}
