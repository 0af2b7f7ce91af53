#include "phigeo/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "phigeo/error.hpp"
#include "phigeo/random.hpp"
#include "phigeo/tolerances.hpp"

namespace phigeo {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Deviations below this are treated as rounding and left untouched so that
// emitted configs round-trip bit for bit.
constexpr double kSilentDeviation = 1e-12;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

double number_at(const Json& v, const std::string& where) {
  if (!v.is_number()) throw Error(ErrorCode::kSchema, where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(ErrorCode::kSchema, where + " is not finite");
  return d;
}

std::vector<double> number_array(const Json& v, std::size_t expected,
                                 const std::string& where) {
  if (!v.is_array()) throw Error(ErrorCode::kSchema, where + " must be an array");
  if (v.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                where + " needs " + std::to_string(expected) + " entries, got " +
                    std::to_string(v.size()));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(number_at(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Eigen::MatrixXd matrix_at(const Json& v, int n, const std::string& where) {
  if (!v.is_array()) throw Error(ErrorCode::kSchema, where + " must be an array of rows");
  if (v.size() != std::size_t(n)) {
    throw Error(ErrorCode::kDimensionMismatch,
                where + " needs " + std::to_string(n) + " rows, got " +
                    std::to_string(v.size()));
  }
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    const auto row = number_array(v[std::size_t(i)], std::size_t(n),
                                  where + "[" + std::to_string(i) + "]");
    for (int j = 0; j < n; ++j) m(i, j) = row[std::size_t(j)];
  }
  return m;
}

// Checks that `values` is a distribution; small deviations are renormalized
// in place with a warning.
void check_distribution(std::vector<double>& values, const std::string& where,
                        std::vector<std::string>& warnings) {
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) {
      throw Error(ErrorCode::kNotNormalized,
                  where + "[" + std::to_string(i) + "] is negative");
    }
    total += values[i];
  }
  const double deviation = std::abs(total - 1.0);
  if (deviation > default_tolerances().input_normalization) {
    std::ostringstream msg;
    msg << where << " sums to " << total;
    throw Error(ErrorCode::kNotNormalized, msg.str());
  }
  if (deviation > kSilentDeviation) {
    for (double& v : values) v /= total;
    std::ostringstream msg;
    msg << where << " renormalized (sum was " << total << ")";
    warnings.push_back(msg.str());
  }
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void require_spd(const Eigen::MatrixXd& m, const std::string& what) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300))) {
    throw Error(ErrorCode::kRankDeficient, what + " is rank deficient");
  }
}

}  // namespace

std::string_view system_type_name(SystemType type) {
  return type == SystemType::kDiscrete ? "discrete" : "gaussian";
}

DiscreteJoint SystemConfig::discrete_joint() const {
  if (type != SystemType::kDiscrete) {
    throw Error(ErrorCode::kInvalidArgument, "config is not a discrete system");
  }
  if (probs) return DiscreteJoint(n, *probs);
  return joint_from_transition(*prior, TransitionKernel(n, *kernel));
}

const GaussianSystem& SystemConfig::gaussian_system() const {
  if (type != SystemType::kGaussian || !gaussian) {
    throw Error(ErrorCode::kInvalidArgument, "config is not a gaussian system");
  }
  return *gaussian;
}

SystemConfig parse_system(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text.begin(), json_text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kSchema, "config must be a JSON object");

  static const char* const kKeys[] = {"type",    "n",       "probs", "prior",
                                      "kernel",  "sigma_x", "a",     "sigma_e",
                                      "label",   "seed"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw Error(ErrorCode::kSchema, "unknown key \"" + key + "\"");
    }
  }

  SystemConfig cfg;
  if (!doc.contains("type") || !doc["type"].is_string()) {
    throw Error(ErrorCode::kSchema, "\"type\" must be \"discrete\" or \"gaussian\"");
  }
  const std::string type = doc["type"].get<std::string>();
  if (type == "discrete") {
    cfg.type = SystemType::kDiscrete;
  } else if (type == "gaussian") {
    cfg.type = SystemType::kGaussian;
  } else {
    throw Error(ErrorCode::kSchema, "unknown system type \"" + type + "\"");
  }

  if (!doc.contains("n") || !doc["n"].is_number_integer()) {
    throw Error(ErrorCode::kSchema, "\"n\" must be an integer");
  }
  const auto n = doc["n"].get<std::int64_t>();
  if (n < 1 || (cfg.type == SystemType::kDiscrete && n > kMaxElements) || n > 64) {
    throw Error(ErrorCode::kDimensionMismatch,
                "n = " + std::to_string(n) + " is out of range");
  }
  cfg.n = int(n);

  if (doc.contains("label")) {
    if (!doc["label"].is_string()) throw Error(ErrorCode::kSchema, "\"label\" must be a string");
    cfg.label = doc["label"].get<std::string>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      throw Error(ErrorCode::kSchema, "\"seed\" must be a nonnegative integer");
    }
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }

  const bool has_probs = doc.contains("probs");
  const bool has_prior = doc.contains("prior");
  const bool has_kernel = doc.contains("kernel");
  const bool has_gauss =
      doc.contains("sigma_x") || doc.contains("a") || doc.contains("sigma_e");

  if (cfg.type == SystemType::kDiscrete) {
    if (has_gauss) throw Error(ErrorCode::kSchema, "discrete config with gaussian fields");
    if (has_probs == (has_prior || has_kernel)) {
      throw Error(ErrorCode::kSchema,
                  "discrete config needs exactly one of \"probs\" or \"prior\"+\"kernel\"");
    }
    const std::size_t states = std::size_t{1} << cfg.n;
    if (has_probs) {
      auto probs = number_array(doc["probs"], states * states, "probs");
      check_distribution(probs, "probs", cfg.warnings);
      cfg.probs = std::move(probs);
    } else {
      if (!has_prior || !has_kernel) {
        throw Error(ErrorCode::kSchema, "\"prior\" and \"kernel\" must appear together");
      }
      auto prior = number_array(doc["prior"], states, "prior");
      check_distribution(prior, "prior", cfg.warnings);
      const Json& k = doc["kernel"];
      if (!k.is_array()) throw Error(ErrorCode::kSchema, "\"kernel\" must be an array of rows");
      if (k.size() != states) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "kernel needs " + std::to_string(states) + " rows, got " +
                        std::to_string(k.size()));
      }
      std::vector<std::vector<double>> rows;
      for (std::size_t x = 0; x < states; ++x) {
        const std::string where = "kernel[" + std::to_string(x) + "]";
        auto row = number_array(k[x], states, where);
        check_distribution(row, where, cfg.warnings);
        rows.push_back(std::move(row));
      }
      cfg.prior = std::move(prior);
      cfg.kernel = std::move(rows);
    }
    // Surface any remaining problem (e.g. an empty table) at load time.
    (void)cfg.discrete_joint();
  } else {
    if (has_probs || has_prior || has_kernel) {
      throw Error(ErrorCode::kSchema, "gaussian config with discrete fields");
    }
    for (const char* key : {"sigma_x", "a", "sigma_e"}) {
      if (!doc.contains(key)) {
        throw Error(ErrorCode::kSchema, std::string("missing \"") + key + "\"");
      }
    }
    cfg.gaussian = make_gaussian_system(matrix_at(doc["sigma_x"], cfg.n, "sigma_x"),
                                        matrix_at(doc["a"], cfg.n, "a"),
                                        matrix_at(doc["sigma_e"], cfg.n, "sigma_e"));
  }
  return cfg;
}

SystemConfig load_system(const std::filesystem::path& path) {
  return parse_system(read_file(path));
}

std::string emit_system(const SystemConfig& config) {
  OrderedJson doc;
  doc["type"] = std::string(system_type_name(config.type));
  doc["n"] = config.n;
  if (config.label) doc["label"] = *config.label;
  if (config.seed) doc["seed"] = *config.seed;
  if (config.type == SystemType::kDiscrete) {
    if (config.probs) {
      doc["probs"] = *config.probs;
    } else {
      doc["prior"] = *config.prior;
      doc["kernel"] = *config.kernel;
    }
  } else {
    const GaussianSystem& g = config.gaussian_system();
    doc["sigma_x"] = matrix_json(g.sigma_x);
    doc["a"] = matrix_json(g.a);
    doc["sigma_e"] = matrix_json(g.sigma_e);
  }
  return doc.dump(2) + "\n";
}

void save_system(const std::filesystem::path& path, const SystemConfig& config) {
  write_file(path, emit_system(config));
}

SystemConfig config_from(const DiscreteJoint& p) {
  SystemConfig cfg;
  cfg.type = SystemType::kDiscrete;
  cfg.n = p.n();
  cfg.probs = std::vector<double>(p.probs().begin(), p.probs().end());
  return cfg;
}

SystemConfig config_from(const GaussianSystem& sys) {
  validate(sys);
  SystemConfig cfg;
  cfg.type = SystemType::kGaussian;
  cfg.n = sys.n;
  cfg.gaussian = sys;
  return cfg;
}

TimeSeries parse_timeseries_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) throw Error(ErrorCode::kParse, "empty time series");

  TimeSeries ts;
  for (std::string_view name : split_fields(lines[0])) {
    if (name.empty()) throw Error(ErrorCode::kParse, "empty channel name in header");
    ts.names.emplace_back(name);
  }
  const std::size_t cols = ts.names.size();
  const std::size_t rows = lines.size() - 1;
  if (rows < 2) throw Error(ErrorCode::kInvalidArgument, "time series needs at least 2 rows");

  ts.data.resize(Eigen::Index(rows), Eigen::Index(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto fields = split_fields(lines[r + 1]);
    const std::string where = "line " + std::to_string(r + 2);
    if (fields.size() != cols) {
      throw Error(ErrorCode::kParse, where + ": expected " + std::to_string(cols) +
                                         " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      const auto f = fields[c];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::kParse, where + ": bad number \"" + std::string(f) + "\"");
      }
      ts.data(Eigen::Index(r), Eigen::Index(c)) = v;
    }
  }
  return ts;
}

TimeSeries load_timeseries_csv(const std::filesystem::path& path) {
  return parse_timeseries_csv(read_file(path));
}

std::string emit_timeseries_csv(const TimeSeries& ts) {
  std::string out;
  for (std::size_t c = 0; c < ts.names.size(); ++c) {
    if (c) out += ',';
    out += ts.names[c];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < ts.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < ts.data.cols(); ++c) {
      if (c) out += ',';
      out += shortest(ts.data(r, c));
    }
    out += '\n';
  }
  return out;
}

GaussianSystem fit_ar(const TimeSeries& ts) {
  const Eigen::Index t = ts.length();
  const int n = ts.channels();
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "time series has no channels");
  if (t < 10 * Eigen::Index(n)) {
    throw Error(ErrorCode::kInvalidArgument,
                "time series too short: T = " + std::to_string(t) + " < 10 n = " +
                    std::to_string(10 * n));
  }
  const Eigen::Index pairs = t - 1;
  Eigen::MatrixXd x = ts.data.topRows(pairs);
  Eigen::MatrixXd y = ts.data.bottomRows(pairs);
  x.rowwise() -= x.colwise().mean();
  y.rowwise() -= y.colwise().mean();

  const double denom = double(t - 1);
  const Eigen::MatrixXd sxx = (x.transpose() * x) / denom;
  require_spd(sxx, "input covariance");
  const Eigen::MatrixXd syx = (y.transpose() * x) / denom;
  // A = syx sxx^-1, solved as sxx A^T = sxy.
  const Eigen::MatrixXd a = sxx.llt().solve(syx.transpose()).transpose();
  const Eigen::MatrixXd resid = y - x * a.transpose();
  const Eigen::MatrixXd see = (resid.transpose() * resid) / denom;
  require_spd(see, "residual covariance");

  const Eigen::MatrixXd sx = 0.5 * (sxx + sxx.transpose());
  const Eigen::MatrixXd se = 0.5 * (see + see.transpose());
  return make_gaussian_system(sx, a, se);
}

Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& a,
                                      const Eigen::MatrixXd& sigma_e) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || sigma_e.rows() != n || sigma_e.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "stationary covariance shapes");
  }
  const double radius =
      Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "A is not stable (spectral radius >= 1)");
  }
  // vec(S) = (I - A kron A)^-1 vec(sigma_e), column-major vec.
  const Eigen::Index m = n * n;
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(m, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      lhs.block(i * n, j * n, n, n) -= a(i, j) * a;
    }
  }
  const Eigen::VectorXd vec_e = Eigen::Map<const Eigen::VectorXd>(sigma_e.data(), m);
  const Eigen::VectorXd vec_s = lhs.partialPivLu().solve(vec_e);
  const Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(vec_s.data(), n, n);
  return 0.5 * (s + s.transpose());
}

TimeSeries simulate_ar(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma_e,
                       Eigen::Index length, std::uint64_t seed) {
  if (length < 2) throw Error(ErrorCode::kInvalidArgument, "length must be >= 2");
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd s = stationary_covariance(a, sigma_e);
  const Eigen::LLT<Eigen::MatrixXd> ls(s), le(sigma_e);
  if (ls.info() != Eigen::Success || le.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite, "noise covariance is not SPD");
  }
  const Eigen::MatrixXd l_s = ls.matrixL();
  const Eigen::MatrixXd l_e = le.matrixL();

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    return z;
  };

  TimeSeries ts;
  ts.data.resize(length, n);
  for (Eigen::Index i = 0; i < n; ++i) ts.names.push_back("x" + std::to_string(i + 1));
  Eigen::VectorXd x = l_s * draw();
  for (Eigen::Index t = 0; t < length; ++t) {
    ts.data.row(t) = x.transpose();
    x = a * x + l_e * draw();
  }
  return ts;
}

EmpiricalJoint empirical_joint(int n, const std::vector<PairedState>& samples,
                               double alpha) {
  if (n < 1 || n > kMaxElements) {
    throw Error(ErrorCode::kDimensionMismatch, "n = " + std::to_string(n) + " is out of range");
  }
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "no samples");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "smoothing alpha must be finite and >= 0");
  }
  const std::uint32_t states = std::uint32_t{1} << n;
  std::vector<double> counts(std::size_t(states) * states, alpha);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const PairedState& st = samples[s];
    if (st.x >= states || st.y >= states) {
      throw Error(ErrorCode::kInvalidArgument,
                  "sample " + std::to_string(s) + " is outside {0,1}^" + std::to_string(n));
    }
    counts[st.x | (std::size_t(st.y) << n)] += 1.0;
  }
  return EmpiricalJoint{DiscreteJoint::from_weights(n, std::move(counts)), samples.size(),
                        alpha};
}

EmpiricalJoint empirical_joint(int n, const std::vector<std::vector<int>>& xs,
                               const std::vector<std::vector<int>>& ys, double alpha) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "input and output sample counts differ");
  }
  auto pack = [n](const std::vector<int>& bits, std::size_t s) {
    if (bits.size() != std::size_t(n)) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "sample " + std::to_string(s) + " has " + std::to_string(bits.size()) +
                      " elements, expected " + std::to_string(n));
    }
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) {
      if (bits[std::size_t(i)] != 0 && bits[std::size_t(i)] != 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    "sample " + std::to_string(s) + " has a non-binary state");
      }
      v |= std::uint32_t(bits[std::size_t(i)]) << i;
    }
    return v;
  };
  std::vector<PairedState> samples;
  samples.reserve(xs.size());
  for (std::size_t s = 0; s < xs.size(); ++s) {
    samples.push_back({pack(xs[s], s), pack(ys[s], s)});
  }
  return empirical_joint(n, samples, alpha);
}

}  // namespace phigeo
