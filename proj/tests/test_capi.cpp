// Exercises the shared library through its C header only.
#include <cmath>
#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "mmlin/mmlin.h"

namespace {

mmlin_sample* Toy(size_t n) {
  std::vector<double> y(n), x(n);
  std::vector<int> d(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i) / static_cast<double>(n);
    d[i] = static_cast<int>(i % 2);
    y[i] = std::sin(3 * x[i]) + 0.5 * d[i] + 0.1 * std::cos(17.0 * static_cast<double>(i));
  }
  mmlin_sample* s = nullptr;
  REQUIRE(mmlin_sample_from_arrays(n, 1, y.data(), d.data(), x.data(), &s) == MMLIN_OK);
  return s;
}

std::string Take(char* p) {
  std::string s(p);
  mmlin_string_free(p);
  return s;
}

}  // namespace

TEST_CASE("estimate through the C API") {
  mmlin_sample* s = Toy(40);
  CHECK(mmlin_sample_n(s) == 40);
  CHECK(mmlin_sample_p(s) == 1);
  mmlin_estimate_options o;
  mmlin_estimate_options_init(&o);
  CHECK(o.target == MMLIN_TARGET_ATT);
  CHECK(std::isnan(o.sigma_bar));
  mmlin_estimate* e = nullptr;
  REQUIRE(mmlin_estimate_run(s, &o, &e) == MMLIN_OK);
  CHECK(std::isfinite(mmlin_estimate_psi_hat(e)));
  CHECK(mmlin_estimate_se(e) > 0.0);
  CHECK(mmlin_estimate_maxbias(e) >= 0.0);
  std::vector<double> k(40);
  CHECK(mmlin_estimate_weights(e, k.data(), k.size()) == 40);
  double t = 0.0;
  for (size_t i = 1; i < 40; i += 2) t += k[i];
  CHECK(t == doctest::Approx(1.0).epsilon(1e-6));
  char* json = nullptr;
  REQUIRE(mmlin_estimate_report_json(e, &json) == MMLIN_OK);
  CHECK(Take(json).find("\"schema_version\"") != std::string::npos);
  char* csv = nullptr;
  REQUIRE(mmlin_estimate_weights_csv(e, &csv) == MMLIN_OK);
  CHECK(Take(csv).rfind("unit,d,k", 0) == 0);
  mmlin_estimate_free(e);
  mmlin_sample_free(s);
}

TEST_CASE("errors map to status codes") {
  mmlin_sample* s = nullptr;
  CHECK(mmlin_sample_read_csv("/nonexistent.csv", &s) == MMLIN_IO_ERROR);
  CHECK(std::strlen(mmlin_last_error()) > 0);
  double y[2] = {1, 2}, x[2] = {0, std::nan("")};
  int d[2] = {1, 0};
  CHECK(mmlin_sample_from_arrays(2, 1, y, d, x, &s) == MMLIN_DATA_ERROR);
  CHECK(mmlin_sample_from_arrays(2, 1, y, d, x, nullptr) == MMLIN_INVALID_ARGUMENT);

  int all_treated[2] = {1, 1};
  x[1] = 1.0;
  REQUIRE(mmlin_sample_from_arrays(2, 1, y, all_treated, x, &s) == MMLIN_OK);
  mmlin_estimate_options o;
  mmlin_estimate_options_init(&o);
  mmlin_estimate* e = nullptr;
  CHECK(mmlin_estimate_run(s, &o, &e) == MMLIN_MISSING_ARM);
  CHECK(e == nullptr);
  o.alpha = 2.0;
  CHECK(mmlin_estimate_run(s, &o, &e) == MMLIN_CONFIG_ERROR);
  mmlin_sample_free(s);
  CHECK(std::string(mmlin_status_name(MMLIN_SOLVER_STALLED)).size() > 0);
  CHECK(std::string(mmlin_version()).size() > 0);
}

TEST_CASE("sweep and curve") {
  mmlin_sample* s = Toy(30);
  mmlin_estimate_options o;
  mmlin_estimate_options_init(&o);
  double* grid = nullptr;
  size_t count = 0;
  REQUIRE(mmlin_parse_grid("0:2:5", &grid, &count) == MMLIN_OK);
  CHECK(count == 5);
  mmlin_sweep* w = nullptr;
  REQUIRE(mmlin_sweep_c(s, &o, grid, count, &w) == MMLIN_OK);
  CHECK(mmlin_sweep_failed_rows(w) == 0);
  char* csv = nullptr;
  REQUIRE(mmlin_sweep_csv(w, &csv) == MMLIN_OK);
  std::string text = Take(csv);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  char* svg = nullptr;
  REQUIRE(mmlin_sweep_svg(w, &svg) == MMLIN_OK);
  CHECK(Take(svg).find("<svg") != std::string::npos);
  mmlin_sweep_free(w);
  mmlin_array_free(grid);
  CHECK(mmlin_parse_grid("3:1:2", &grid, &count) == MMLIN_CONFIG_ERROR);

  double deltas[3] = {0.5, 1.0, 2.0};
  mmlin_curve* c = nullptr;
  REQUIRE(mmlin_modulus_curve(s, &o, deltas, 3, &c) == MMLIN_OK);
  char* ccsv = nullptr;
  REQUIRE(mmlin_curve_csv(c, &ccsv) == MMLIN_OK);
  CHECK(Take(ccsv).rfind("delta,omega", 0) == 0);
  mmlin_curve_free(c);
  mmlin_sample_free(s);
}

TEST_CASE("simulation is reproducible") {
  int cases[1] = {1};
  int64_t ns[1] = {40};
  mmlin_sim_options o;
  mmlin_sim_options_init(&o);
  o.cases = cases;
  o.n_cases = 1;
  o.n_grid = ns;
  o.n_n = 1;
  o.reps = 2;
  std::string first;
  for (int threads : {1, 2}) {
    o.threads = threads;
    mmlin_sim* r = nullptr;
    REQUIRE(mmlin_simulate(&o, &r) == MMLIN_OK);
    char* p = nullptr;
    REQUIRE(mmlin_sim_reps_csv(r, &p) == MMLIN_OK);
    std::string text = Take(p);
    if (first.empty())
      first = text;
    else
      CHECK(text == first);
    mmlin_sim_free(r);
  }
  o.reps = 0;
  mmlin_sim* r = nullptr;
  CHECK(mmlin_simulate(&o, &r) != MMLIN_OK);
}
