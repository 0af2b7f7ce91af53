// phi: command-line front end for the integrated-information measures.
//
// Exit codes: 0 success, 1 computation failure, 2 usage error.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "phigeo/error.hpp"
#include "phigeo/gaussian.hpp"
#include "phigeo/io.hpp"
#include "phigeo/phi_discrete.hpp"
#include "phigeo/random.hpp"
#include "phigeo/report.hpp"

namespace {

using namespace phigeo;

constexpr int kOk = 0;
constexpr int kComputationFailure = 1;
constexpr int kUsageError = 2;

// Thrown for bad invocations that CLI11 cannot detect on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool is_usage_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kNotNormalized:
    case ErrorCode::kNotSymmetric:
    case ErrorCode::kNotPositiveDefinite:
    case ErrorCode::kSchema:
    case ErrorCode::kParse:
    case ErrorCode::kIo:
      return true;
    default:
      return false;
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Worker count: hardware concurrency, capped by PHI_THREADS when set.
unsigned thread_count(std::size_t jobs) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PHI_THREADS")) {
    unsigned v = 0;
    const char* end = env + std::strlen(env);
    const auto res = std::from_chars(env, end, v);
    if (res.ec != std::errc() || res.ptr != end || v == 0) {
      throw UsageError("PHI_THREADS must be a positive integer");
    }
    cap = v;
  }
  return unsigned(std::min<std::size_t>(cap, std::max<std::size_t>(jobs, 1)));
}

// Runs fn(0..count-1) on a small pool. Results must be stored by index so
// the output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = thread_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<SplitModelKind> parse_measure_list(const std::string& list) {
  std::vector<SplitModelKind> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto kind = parse_split_model(item);
    if (!kind) throw UsageError("unknown measure \"" + item + "\" (expected i,fs,ds,md,g)");
    if (std::find(out.begin(), out.end(), *kind) == out.end()) out.push_back(*kind);
  }
  if (out.empty()) throw UsageError("--measures needs at least one measure");
  return out;
}

bool report_failed(const PhiReport& r) {
  for (const MeasureDiagnostics& d : r.diagnostics) {
    if (d.status == "error") return true;
  }
  for (const auto& v : {r.values.i, r.values.fs, r.values.ds, r.values.md, r.values.g}) {
    if (v && !std::isfinite(*v)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// compute
// ---------------------------------------------------------------------------

struct ComputeArgs {
  std::string input;
  std::string measures;
  std::string units = "nats";
  std::string output;
};

int run_compute(const ComputeArgs& args) {
  SystemConfig cfg = load_system(args.input);
  if (!cfg.label) cfg.label = std::filesystem::path(args.input).stem().string();
  ComputeOptions opt;
  if (!args.measures.empty()) opt.measures = parse_measure_list(args.measures);
  opt.units = *parse_units(args.units);

  const PhiReport report = compute_report(cfg, opt);
  std::cout << report_table(report);
  if (!args.output.empty()) {
    if (ends_with(args.output, ".csv")) {
      write_text(args.output, report_csv_header() + "\n" + report_csv_row(report) + "\n");
    } else {
      write_text(args.output, report_json(report));
    }
  }
  return report_failed(report) ? kComputationFailure : kOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string templ;
  std::string param;
  std::string range;
  std::string output;
};

std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::size_t start = 0;
  for (int k = 0; k < 3; ++k) {
    const std::size_t colon = text.find(':', start);
    if ((k < 2) == (colon == std::string::npos)) {
      throw UsageError("--range must look like LO:HI:STEP");
    }
    const std::string piece = text.substr(start, colon - start);
    double v = 0;
    const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (res.ec != std::errc() || res.ptr != piece.data() + piece.size() || !std::isfinite(v)) {
      throw UsageError("bad number \"" + piece + "\" in --range");
    }
    parts.push_back(v);
    start = colon + 1;
  }
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(step > 0.0)) throw UsageError("--range STEP must be positive");
  if (hi < lo) throw UsageError("--range HI must not be below LO");
  const double span = (hi - lo) / step;
  if (span > 1e6) throw UsageError("--range has too many points");
  // Inclusive of HI up to rounding in the step count.
  const auto count = std::size_t(std::floor(span + 1e-9)) + 1;
  std::vector<double> values;
  for (std::size_t k = 0; k < count; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", lo + double(k) * step);
    values.push_back(std::strtod(buf, nullptr));
  }
  return values;
}

// Replaces every string "$<param>" in the template by `value`.
std::size_t substitute(nlohmann::json& node, const std::string& token, double value) {
  std::size_t hits = 0;
  if (node.is_string() && node.get<std::string>() == token) {
    node = value;
    return 1;
  }
  if (node.is_array() || node.is_object()) {
    for (auto& child : node) hits += substitute(child, token, value);
  }
  return hits;
}

int run_sweep(const SweepArgs& args) {
  std::ifstream in(args.templ, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + args.templ);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json templ;
  try {
    templ = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  const std::string token = "$" + args.param;
  {
    nlohmann::json probe = templ;
    if (substitute(probe, token, 0.0) == 0) {
      throw UsageError("template has no \"" + token + "\" placeholder");
    }
  }
  const std::vector<double> values = parse_range(args.range);

  struct Row {
    std::string line;
    bool failed = false;
  };
  std::vector<Row> rows(values.size());
  parallel_for(values.size(), [&](std::size_t k) {
    char head[32];
    std::snprintf(head, sizeof(head), "%.12g", values[k]);
    nlohmann::json doc = templ;
    substitute(doc, token, values[k]);
    try {
      SystemConfig cfg = parse_system(doc.dump());
      const PhiReport r = compute_report(cfg, {});
      const std::string row = report_csv_row(r);
      // Swap the label column for the parameter value.
      rows[k].line = std::string(head) + row.substr(row.find(',', r.label.size()));
      rows[k].failed = report_failed(r);
    } catch (const Error& e) {
      rows[k].line = std::string(head) + ",,,,,,error:" +
                     std::string(error_code_name(e.code()));
      rows[k].failed = true;
    }
  });

  std::string csv = args.param + ",I,phi_fs,phi_ds,phi_md,phi_g,flags\n";
  bool any_failed = false;
  for (const Row& r : rows) {
    csv += r.line + "\n";
    any_failed |= r.failed;
  }
  write_text(args.output, csv);
  std::cout << "wrote " << rows.size() << " rows to " << args.output << "\n";
  return any_failed ? kComputationFailure : kOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::uint64_t seeds = 100;
  std::string kind = "discrete";
  double tol = 1e-6;
};

int run_verify(const VerifyArgs& args) {
  if (!(args.tol >= 0.0)) throw UsageError("--tol must be nonnegative");
  const bool discrete = args.kind == "discrete";
  const std::size_t count = std::size_t(args.seeds);
  std::vector<HierarchyReport> reports(count);
  std::vector<std::vector<std::string>> failures(count);
  std::vector<char> smoothed(count, 0);

  parallel_for(count, [&](std::size_t k) {
    const std::uint64_t seed = k;
    if (discrete) {
      const PhiSuite s = phi_all(random_verify_system(2, seed), args.tol, seed);
      reports[k] = s.hierarchy;
      for (const MeasureOutcome& m : s.measures) {
        if (!m.result) failures[k].push_back(m.error);
        else if (m.result->diagnostics.smoothed) smoothed[k] = 1;
      }
    } else {
      const GaussianSuite s = gaussian_phi_all(random_gaussian_system(2, seed), args.tol);
      reports[k] = s.hierarchy;
      for (const GaussianMeasureOutcome& m : s.measures) {
        if (!m.result) failures[k].push_back(m.error);
      }
    }
  });

  std::size_t violating = 0, failing = 0, smoothed_count = 0;
  std::map<std::string, double> worst;
  for (std::size_t k = 0; k < count; ++k) {
    if (!reports[k].all_passed()) ++violating;
    if (!failures[k].empty()) ++failing;
    smoothed_count += smoothed[k];
    for (const HierarchyCheck& c : reports[k].checks) {
      auto it = worst.find(c.name);
      if (it == worst.end() || c.margin < it->second) worst[c.name] = c.margin;
    }
  }

  std::printf("kind: %s, systems: %zu, tol: %g\n", args.kind.c_str(), count, args.tol);
  std::printf("violations: %zu\n", violating);
  std::printf("solver failures: %zu\n", failing);
  if (discrete) std::printf("smoothed inputs: %zu\n", smoothed_count);
  std::printf("worst margins:\n");
  for (const auto& [name, margin] : worst) {
    std::printf("  %-8s %+.6e\n", name.c_str(), margin);
  }
  for (std::size_t k = 0; k < count; ++k) {
    for (const std::string& f : failures[k]) {
      std::printf("seed %zu: %s\n", k, f.c_str());
    }
    if (!reports[k].all_passed()) {
      for (const HierarchyCheck& c : reports[k].checks) {
        if (!c.passed) std::printf("seed %zu: %s violated by %.6e\n", k, c.name.c_str(), -c.margin);
      }
    }
  }
  return violating == 0 ? kOk : kComputationFailure;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string timeseries;
  std::string output;
};

int run_fit(const FitArgs& args) {
  const TimeSeries ts = load_timeseries_csv(args.timeseries);
  if (ts.length() < 10 * Eigen::Index(ts.channels())) {
    throw UsageError("time series too short: T = " + std::to_string(ts.length()) +
                     " needs at least 10 n = " + std::to_string(10 * ts.channels()));
  }
  GaussianSystem sys;
  try {
    sys = fit_ar(ts);
  } catch (const Error& e) {
    // Anything beyond the length check is a property of the data.
    std::cerr << "phi: " << e.what() << "\n";
    return kComputationFailure;
  }
  SystemConfig cfg = config_from(sys);
  cfg.label = std::filesystem::path(args.timeseries).stem().string();
  save_system(args.output, cfg);

  std::printf("fitted %d channels from %lld steps\n", sys.n, static_cast<long long>(ts.length()));
  for (int i = 0; i < sys.n; ++i) {
    std::printf("  %-12s residual variance %.6f\n", ts.names[std::size_t(i)].c_str(),
                sys.sigma_e(i, i));
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// random
// ---------------------------------------------------------------------------

struct RandomArgs {
  std::string kind = "discrete";
  int n = 2;
  std::uint64_t seed = 0;
  std::string output;
};

int run_random(const RandomArgs& args) {
  SystemConfig cfg;
  if (args.kind == "discrete") {
    if (args.n < 1 || args.n > kMaxElements) {
      throw UsageError("discrete systems need 1 <= n <= " + std::to_string(kMaxElements));
    }
    cfg = config_from(random_discrete_joint(args.n, args.seed));
  } else {
    if (args.n < 1 || args.n > 64) throw UsageError("gaussian systems need 1 <= n <= 64");
    cfg = config_from(random_gaussian_system(args.n, args.seed));
  }
  cfg.label = "random-" + args.kind + "-n" + std::to_string(args.n) + "-seed" +
              std::to_string(args.seed);
  cfg.seed = args.seed;
  const std::string text = emit_system(cfg);
  if (args.output.empty()) {
    std::cout << text;
  } else {
    write_text(args.output, text);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrated-information measures for binary Markov and Gaussian AR systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(phigeo::version()));

  ComputeArgs compute;
  auto* c = app.add_subcommand("compute", "Compute measures for one system");
  c->add_option("--input", compute.input, "System config (JSON)")->required();
  c->add_option("--measures", compute.measures,
                "Comma-separated subset of i,fs,ds,md,g (default: all applicable)");
  c->add_option("--units", compute.units, "nats or bits")
      ->check(CLI::IsMember({"nats", "bits"}));
  c->add_option("--output", compute.output, "Report path (.json, or .csv for one row)");

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Evaluate a template over a parameter range");
  s->add_option("--template", sweep.templ, "Config with \"$NAME\" placeholders")->required();
  s->add_option("--param", sweep.param, "Placeholder name")->required();
  s->add_option("--range", sweep.range, "LO:HI:STEP, inclusive")->required();
  s->add_option("--output", sweep.output, "CSV output path")->required();

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Check the hierarchy on seeded random systems");
  v->add_option("--seeds", verify.seeds, "Number of systems (seeds 0..N-1)")
      ->check(CLI::PositiveNumber);
  v->add_option("--kind", verify.kind, "discrete or gaussian")
      ->check(CLI::IsMember({"discrete", "gaussian"}));
  v->add_option("--tol", verify.tol, "Slack for each inequality");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit y = A x + e to a time series");
  f->add_option("--timeseries", fit.timeseries, "CSV with a header row")->required();
  f->add_option("--output", fit.output, "Gaussian config output path")->required();

  RandomArgs random;
  auto* r = app.add_subcommand("random", "Write a seeded random system config");
  r->add_option("--kind", random.kind, "discrete or gaussian")
      ->check(CLI::IsMember({"discrete", "gaussian"}));
  r->add_option("--n", random.n, "Number of elements");
  r->add_option("--seed", random.seed, "64-bit seed");
  r->add_option("--output", random.output, "Output path (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*c) return run_compute(compute);
    if (*s) return run_sweep(sweep);
    if (*v) return run_verify(verify);
    if (*f) return run_fit(fit);
    if (*r) return run_random(random);
  } catch (const UsageError& e) {
    std::cerr << "phi: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "phi: " << e.what() << "\n";
    return is_usage_code(e.code()) ? kUsageError : kComputationFailure;
  } catch (const std::exception& e) {
    std::cerr << "phi: " << e.what() << "\n";
    return kComputationFailure;
  }
  return kUsageError;
}
