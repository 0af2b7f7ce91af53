#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "phigeo/error.hpp"
#include "phigeo/io.hpp"
#include "phigeo/random.hpp"
#include "phigeo/report.hpp"

using namespace phigeo;
using Eigen::MatrixXd;

namespace {

template <typename Fn>
std::string code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return std::string(error_code_name(e.code()));
  }
  return "none";
}

std::string uniform_probs_json() {
  std::string s = "[";
  for (int i = 0; i < 16; ++i) s += std::string(i ? "," : "") + "0.0625";
  return s + "]";
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("phigeo_test_io_" + std::to_string(::getpid()) + "_" + name);
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bitwise_equal(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), std::size_t(a.size()) * sizeof(double)) == 0;
}

// Pairs (x_t, x_{t+1}) centered by their own means, covariance over T - 1.
MatrixXd empirical_pair_covariance(const MatrixXd& data) {
  const Eigen::Index t = data.rows(), n = data.cols();
  MatrixXd z(t - 1, 2 * n);
  z << data.topRows(t - 1), data.bottomRows(t - 1);
  z.rowwise() -= z.colwise().mean();
  return z.transpose() * z / double(t - 1);
}

}  // namespace

TEST_CASE("loading system configs") {
  SUBCASE("minimal discrete config") {
    const SystemConfig c =
        parse_system(R"({"type":"discrete","n":2,"probs":)" + uniform_probs_json() + "}");
    CHECK(c.type == SystemType::kDiscrete);
    CHECK(c.n == 2);
    CHECK(c.warnings.empty());
    CHECK(c.discrete_joint()[5] == 0.0625);
  }
  SUBCASE("prior and kernel") {
    const SystemConfig c = parse_system(R"({"type":"discrete","n":1,"prior":[0.25,0.75],
        "kernel":[[0.9,0.1],[0.2,0.8]],"label":"chan","seed":7})");
    const DiscreteJoint p = c.discrete_joint();
    CHECK(p.at(0, 0) == doctest::Approx(0.225));
    CHECK(p.at(1, 0) == doctest::Approx(0.15));
    CHECK(*c.label == "chan");
    CHECK(*c.seed == 7);
  }
  SUBCASE("gaussian config") {
    const SystemConfig c = parse_system(R"({"type":"gaussian","n":2,
        "sigma_x":[[1,0],[0,1]],"a":[[0,0.5],[0.5,0]],"sigma_e":[[1,0],[0,1]]})");
    CHECK(c.gaussian_system().a(0, 1) == 0.5);
  }
  SUBCASE("small normalization error is repaired with a warning") {
    std::string probs = "[0.0625000005";
    for (int i = 1; i < 16; ++i) probs += ",0.0625";
    const SystemConfig c =
        parse_system(R"({"type":"discrete","n":2,"probs":)" + probs + "]}");
    REQUIRE(c.warnings.size() == 1);
    double total = 0;
    for (double v : *c.probs) total += v;
    CHECK(std::abs(total - 1.0) < 1e-15);
  }
  SUBCASE("error codes") {
    CHECK(code_of([] {
            parse_system(R"({"type":"gaussian","n":2,"sigma_x":[[1,0],[0,1]],
              "a":[[0,0],[0,0]],"sigma_e":[[1,0.3],[0.2,1]]})");
          }) == "E_NOT_SYMMETRIC");
    CHECK(code_of([] {
            std::string probs = "[";
            for (int i = 0; i < 16; ++i) probs += std::string(i ? "," : "") + "0.09375";
            parse_system(R"({"type":"discrete","n":2,"probs":)" + probs + "]}");
          }) == "E_NOT_NORMALIZED");
    CHECK(code_of([] {
            parse_system(R"({"type":"gaussian","n":2,"sigma_x":[[1,2],[2,1]],
              "a":[[0,0],[0,0]],"sigma_e":[[1,0],[0,1]]})");
          }) == "E_NOT_SPD");
    CHECK(code_of([] {
            parse_system(R"({"type":"discrete","n":2,"probs":[0.5,0.5]})");
          }) == "E_BAD_DIMENSION");
    CHECK(code_of([] {
            parse_system(R"({"type":"gaussian","n":2,"sigma_x":[[1]],
              "a":[[0,0],[0,0]],"sigma_e":[[1,0],[0,1]]})");
          }) == "E_BAD_DIMENSION");
    CHECK(code_of([] { parse_system(R"({"type":"discrete","n":2})"); }) == "E_SCHEMA");
    CHECK(code_of([] {
            parse_system(R"({"type":"discrete","n":2,"probs":)" + uniform_probs_json() +
                         R"(,"extra":1})");
          }) == "E_SCHEMA");
    CHECK(code_of([] {
            parse_system(R"({"type":"discrete","n":1,"probs":[0.25,0.25,0.25,0.25],
              "prior":[0.5,0.5],"kernel":[[1,0],[0,1]]})");
          }) == "E_SCHEMA");
    CHECK(code_of([] { parse_system(R"({"type":"markov","n":2})"); }) == "E_SCHEMA");
    CHECK(code_of([] { parse_system(R"({"type":"discrete","n":"two"})"); }) == "E_SCHEMA");
    CHECK(code_of([] { parse_system("{\"type\": ") ; }) == "E_PARSE");
    CHECK(code_of([] { load_system("/nonexistent/phigeo/config.json"); }) == "E_IO");
  }
}

TEST_CASE("config round trip") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SystemConfig d = config_from(random_discrete_joint(1 + int(seed % 3), seed));
    d.label = "table " + std::to_string(seed);
    d.seed = seed * 0x9E3779B97F4A7C15ull;
    const std::string text = emit_system(d);
    const SystemConfig back = parse_system(text);
    CHECK(back.warnings.empty());
    CHECK(bitwise_equal(*back.probs, *d.probs));
    CHECK(*back.seed == *d.seed);
    CHECK(emit_system(back) == text);

    const SystemConfig g = config_from(random_gaussian_system(2 + int(seed % 3), seed));
    const SystemConfig gb = parse_system(emit_system(g));
    CHECK(bitwise_equal(gb.gaussian_system().sigma_x, g.gaussian_system().sigma_x));
    CHECK(bitwise_equal(gb.gaussian_system().a, g.gaussian_system().a));
    CHECK(bitwise_equal(gb.gaussian_system().sigma_e, g.gaussian_system().sigma_e));
  }
  SUBCASE("prior and kernel survive") {
    const std::string text = R"({"type":"discrete","n":1,"prior":[0.3,0.7],
        "kernel":[[0.1,0.9],[0.6,0.4]]})";
    const SystemConfig c = parse_system(text);
    const SystemConfig back = parse_system(emit_system(c));
    CHECK(*back.prior == *c.prior);
    CHECK(*back.kernel == *c.kernel);
    CHECK_FALSE(back.probs.has_value());
  }
  SUBCASE("through a file") {
    const auto path = temp_path("roundtrip.json");
    const SystemConfig c = config_from(random_gaussian_system(3, 99));
    save_system(path, c);
    const SystemConfig back = load_system(path);
    CHECK(emit_system(back) == emit_system(c));
    std::filesystem::remove(path);
  }
}

TEST_CASE("time-series CSV") {
  const TimeSeries ts = parse_timeseries_csv("a, b\n1.5,2\r\n-3e-2,4\n\n5,6\n");
  CHECK(ts.names == std::vector<std::string>{"a", "b"});
  CHECK(ts.length() == 3);
  CHECK(ts.data(1, 0) == -0.03);
  CHECK(parse_timeseries_csv(emit_timeseries_csv(ts)).data == ts.data);

  CHECK(code_of([] { parse_timeseries_csv("a,b\n1,2\n3\n"); }) == "E_PARSE");
  CHECK(code_of([] { parse_timeseries_csv("a\n1\nfoo\n"); }) == "E_PARSE");
  CHECK(code_of([] { parse_timeseries_csv("a\n1\nnan\n"); }) == "E_PARSE");
  CHECK(code_of([] { parse_timeseries_csv("a\n1\n"); }) == "E_INVALID_ARGUMENT");
  CHECK(code_of([] { parse_timeseries_csv(""); }) == "E_PARSE");
}

TEST_CASE("stationary covariance and simulation") {
  MatrixXd a(2, 2), se(2, 2);
  a << 0.5, 0.2, -0.1, 0.3;
  se << 1.0, 0.3, 0.3, 0.5;
  const MatrixXd s = stationary_covariance(a, se);
  CHECK((s - (a * s * a.transpose() + se)).cwiseAbs().maxCoeff() < 1e-12);

  const TimeSeries t1 = simulate_ar(a, se, 100, 3);
  const TimeSeries t2 = simulate_ar(a, se, 100, 3);
  CHECK(t1.data == t2.data);
  CHECK(code_of([&] { stationary_covariance(2.0 * MatrixXd::Identity(2, 2), se); }) ==
        "E_INVALID_ARGUMENT");
}

TEST_CASE("AR fit") {
  SUBCASE("recovers a known system") {
    MatrixXd a0(2, 2), se0(2, 2);
    a0 << 0.6, 0.3, -0.2, 0.4;
    se0 << 1.0, 0.2, 0.2, 0.7;
    const TimeSeries ts = simulate_ar(a0, se0, 10000, 2024);
    const GaussianSystem fit = fit_ar(ts);
    CHECK((fit.a - a0).cwiseAbs().maxCoeff() < 0.05);
    CHECK((fit.sigma_e - se0).cwiseAbs().maxCoeff() < 0.1);

    // The fitted model reproduces the sample covariance of the pairs.
    const MatrixXd emp = empirical_pair_covariance(ts.data);
    CHECK((joint_covariance(fit).cov - emp).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("scalar channel") {
    MatrixXd a0(1, 1), se0(1, 1);
    a0 << 0.5;
    se0 << 1.0;
    const GaussianSystem fit = fit_ar(simulate_ar(a0, se0, 20000, 5));
    CHECK(std::abs(fit.a(0, 0) - 0.5) < 0.05);
  }
  SUBCASE("independent white noise") {
    const TimeSeries ts =
        simulate_ar(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2), 10000, 8);
    CHECK(fit_ar(ts).a.cwiseAbs().maxCoeff() < 0.05);
  }
  SUBCASE("channel relabeling permutes the fit") {
    MatrixXd a0(3, 3);
    a0 << 0.5, 0.1, 0.0, -0.2, 0.3, 0.2, 0.1, 0.0, 0.4;
    const TimeSeries ts = simulate_ar(a0, MatrixXd::Identity(3, 3), 2000, 1);
    const int perm[3] = {2, 0, 1};
    TimeSeries permuted = ts;
    for (int c = 0; c < 3; ++c) permuted.data.col(c) = ts.data.col(perm[c]);
    const GaussianSystem f = fit_ar(ts), g = fit_ar(permuted);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(g.a(i, j) - f.a(perm[i], perm[j])) < 1e-10);
        CHECK(std::abs(g.sigma_e(i, j) - f.sigma_e(perm[i], perm[j])) < 1e-10);
      }
    }
  }
  SUBCASE("errors") {
    TimeSeries constant;
    constant.names = {"a", "b"};
    constant.data = MatrixXd::Constant(100, 2, 3.0);
    CHECK(code_of([&] { fit_ar(constant); }) == "E_RANK_DEFICIENT");

    TimeSeries collinear = simulate_ar(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1), 100, 1);
    collinear.data.conservativeResize(Eigen::NoChange, 2);
    collinear.data.col(1) = 2.0 * collinear.data.col(0);
    collinear.names = {"a", "b"};
    CHECK(code_of([&] { fit_ar(collinear); }) == "E_RANK_DEFICIENT");

    const TimeSeries short_ts =
        simulate_ar(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2), 19, 1);
    CHECK(code_of([&] { fit_ar(short_ts); }) == "E_INVALID_ARGUMENT");
  }
}

TEST_CASE("empirical joint") {
  SUBCASE("single sample is a point mass") {
    const EmpiricalJoint e = empirical_joint(2, {{0, 0}}, {{1, 1}});
    CHECK(e.joint[0b1100] == 1.0);
    CHECK(e.samples == 1);
  }
  SUBCASE("Laplace smoothing") {
    const EmpiricalJoint e = empirical_joint(2, {PairedState{0, 3}}, 1.0);
    CHECK(e.joint.full_support());
    CHECK(e.joint[0b1100] == doctest::Approx(2.0 / 17.0));
    CHECK(e.joint[0] == doctest::Approx(1.0 / 17.0));
    CHECK(e.alpha == 1.0);
  }
  SUBCASE("frequencies converge to the sampling table") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::uint32_t> bits(0, 3);
    std::vector<PairedState> samples(1000000);
    for (auto& s : samples) s = {bits(rng), bits(rng)};
    const EmpiricalJoint e = empirical_joint(2, samples);
    double worst = 0;
    for (std::size_t c = 0; c < 16; ++c) worst = std::max(worst, std::abs(e.joint[c] - 0.0625));
    CHECK(worst < 0.005);
  }
  SUBCASE("errors") {
    CHECK(code_of([] { empirical_joint(2, {{0, 2}}, {{1, 1}}); }) == "E_INVALID_ARGUMENT");
    CHECK(code_of([] { empirical_joint(2, {PairedState{4, 0}}); }) == "E_INVALID_ARGUMENT");
    CHECK(code_of([] { empirical_joint(2, std::vector<PairedState>{}); }) ==
          "E_INVALID_ARGUMENT");
    CHECK(code_of([] { empirical_joint(2, {{0}}, {{1, 1}}); }) == "E_BAD_DIMENSION");
    CHECK(code_of([] { empirical_joint(2, {PairedState{0, 0}}, -1.0); }) ==
          "E_INVALID_ARGUMENT");
  }
}

TEST_CASE("reports") {
  SUBCASE("swap system") {
    SystemConfig c = config_from(oracle::swap_system());
    c.label = "swap";
    const PhiReport r = compute_report(c, {});
    CHECK(report_csv_header() == "label,I,phi_fs,phi_ds,phi_md,phi_g,flags");
    CHECK(report_csv_row(r) == "swap,1.386294,1.386294,1.386294,1.386294,0.693147,");

    ComputeOptions bits;
    bits.units = Units::kBits;
    CHECK(report_csv_row(compute_report(c, bits)) ==
          "swap,2.000000,2.000000,2.000000,2.000000,1.000000,");
  }
  SUBCASE("uniform system") {
    SystemConfig c = config_from(DiscreteJoint::uniform(2));
    c.label = "uniform";
    CHECK(report_csv_row(compute_report(c, {})) ==
          "uniform,0.000000,0.000000,0.000000,0.000000,0.000000,");
  }
  SUBCASE("shared-noise system") {
    SystemConfig c = config_from(oracle::shared_noise_system());
    c.label = "shared";
    const PhiReport r = compute_report(c, {});
    CHECK(report_csv_row(r) == "shared,0.000000,0.693147,0.000000,0.000000,0.000000,"
                               "fs_exceeds_mi");
  }
  SUBCASE("JSON layout") {
    const PhiReport r = compute_report(config_from(random_discrete_joint(2, 3)), {});
    const auto doc = nlohmann::ordered_json::parse(report_json(r));
    std::vector<std::string> keys;
    for (const auto& [k, v] : doc.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"label", "units", "n", "type", "I", "phi_fs",
                                           "phi_ds", "phi_md", "phi_g", "hierarchy",
                                           "diagnostics", "version", "seed"});
    CHECK(doc["units"] == "nats");
    CHECK(doc["hierarchy"]["passed"] == true);
    CHECK(report_json(r) == report_json(compute_report(config_from(random_discrete_joint(2, 3)), {})));

    // Every value agrees with the KL recomputed from its projection.
    for (const char* m : {"fs", "ds", "md", "g"}) {
      const double phi = doc[std::string("phi_") + m].get<double>();
      const double kl = doc["diagnostics"]["measures"][m]["kl"].get<double>();
      CAPTURE(m);
      CHECK(std::abs(phi - kl) < 1e-8);
    }
  }
  SUBCASE("gaussian report") {
    SystemConfig c = config_from(make_gaussian_system(
        MatrixXd::Identity(2, 2), (MatrixXd(2, 2) << 0, 0.3, 0.3, 0).finished(),
        MatrixXd::Identity(2, 2)));
    const PhiReport r = compute_report(c, {});
    const auto doc = nlohmann::ordered_json::parse(report_json(r));
    CHECK(doc["phi_md"].is_null());
    CHECK(doc["phi_g"].get<double>() == doctest::Approx(std::log(1.09)).epsilon(1e-8));
    for (const char* m : {"fs", "ds", "g"}) {
      CHECK(std::abs(doc[std::string("phi_") + m].get<double>() -
                     doc["diagnostics"]["measures"][m]["kl"].get<double>()) < 1e-8);
    }
    ComputeOptions md;
    md.measures = {SplitModelKind::kMD};
    CHECK(code_of([&] { compute_report(c, md); }) == "E_INVALID_ARGUMENT");

    const SystemConfig diag = config_from(make_gaussian_system(
        MatrixXd::Identity(2, 2), 0.5 * MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)));
    const PhiReport z = compute_report(diag, {});
    CHECK(std::abs(*z.values.fs) < 1e-8);
    CHECK(std::abs(*z.values.ds) < 1e-8);
    CHECK(std::abs(*z.values.g) < 1e-8);
  }
  SUBCASE("measure subset") {
    ComputeOptions opt;
    opt.measures = {SplitModelKind::kFS};
    const PhiReport r = compute_report(config_from(random_discrete_joint(2, 1)), opt);
    CHECK(r.values.fs.has_value());
    CHECK_FALSE(r.values.i.has_value());
    CHECK_FALSE(r.values.ds.has_value());
    CHECK(report_csv_row(r).find(",,") != std::string::npos);
  }
  SUBCASE("fixed notation") {
    CHECK(format_fixed6(-1e-12) == "0.000000");
    CHECK(format_fixed6(std::nan("")) == "nan");
    CHECK(format_fixed6(std::log(2.0)) == "0.693147");
  }
}
