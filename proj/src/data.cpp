#include "dgp/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/zeta.hpp>

#include "dgp/errors.hpp"

namespace dgp {

namespace {

constexpr int kTaylorTerms = 80;

bool is_integer(double s) { return std::abs(s - std::round(s)) < 1e-12; }

std::vector<double> polylog_taylor(double s) {
  std::vector<double> c(kTaylorTerms, 0.0);
  const bool integral = is_integer(s);
  const long n = std::lround(s);
  double fact = 1.0;
  for (int k = 0; k < kTaylorTerms; ++k) {
    if (k > 0) fact *= k;
    if (integral && k == n - 1) continue;  // pole of zeta at 1, handled by the log term
    c[k] = boost::math::zeta(s - k) / fact;
  }
  return c;
}

std::string trim(std::string_view v) {
  auto b = v.find_first_not_of(" \t\r\n\"");
  auto e = v.find_last_not_of(" \t\r\n\"");
  if (b == std::string_view::npos) return {};
  return std::string(v.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

std::complex<double> polylog_unit_circle(double s, double theta, const std::vector<double>* taylor) {
  if (!(s > 0.0)) throw DomainError("polylog order must be positive");
  std::vector<double> local;
  if (taylor == nullptr) {
    local = polylog_taylor(s);
    taylor = &local;
  }
  const double th = std::remainder(theta, 2.0 * std::numbers::pi);
  const std::complex<double> mu(0.0, th);

  std::complex<double> series = 0.0;
  std::complex<double> power = 1.0;
  for (double ck : *taylor) {
    series += ck * power;
    power *= mu;
  }

  std::complex<double> singular = 0.0;
  if (is_integer(s)) {
    const long n = std::lround(s);
    if (th == 0.0) {
      if (n == 1) return {std::numeric_limits<double>::infinity(), 0.0};
    } else {
      double harmonic = 0.0, fact = 1.0;
      for (long j = 1; j <= n - 1; ++j) {
        harmonic += 1.0 / j;
        fact *= j;
      }
      singular = std::pow(mu, static_cast<double>(n - 1)) / fact * (harmonic - std::log(-mu));
    }
  } else {
    if (th == 0.0) {
      if (s < 1.0) return {std::numeric_limits<double>::infinity(), 0.0};
    } else {
      singular = std::tgamma(1.0 - s) * std::pow(-mu, s - 1.0);
    }
  }
  return singular + series;
}

TrueFunction::TrueFunction(double c, double beta, long truncation)
    : c_(c), beta_(beta), truncation_(truncation), s_(0.5 + beta) {
  if (!std::isfinite(c)) throw DomainError("amplitude must be finite");
  if (!(beta > 0.0)) throw DomainError("smoothness must be positive");
  if (truncation < 0) throw DomainError("truncation must be non-negative");
  if (truncation == 0) {
    if (!(beta > 0.5)) throw DomainError("closed-form evaluation needs beta > 1/2");
    taylor_ = polylog_taylor(s_);
  }
}

double TrueFunction::coefficient(long i) const {
  if (i <= 3) return 0.0;
  return c_ * std::pow(static_cast<double>(i), -s_) * std::sin(static_cast<double>(i));
}

double TrueFunction::series_truncated(double x, long n_max) const {
  double sum = 0.0;
  for (long i = 4; i <= n_max; ++i)
    sum += coefficient(i) * std::cos(std::numbers::pi * (static_cast<double>(i) - 0.5) * x);
  return std::numbers::sqrt2 * sum;
}

double TrueFunction::series_exact(double x) const {
  // sin(i) cos(pi (i - 1/2) x) = [sin(i t1 + p1) + sin(i t2 + p2)] / 2.
  const double px = std::numbers::pi * x;
  const double thetas[2] = {1.0 + px, 1.0 - px};
  const double phases[2] = {-0.5 * px, 0.5 * px};
  double total = 0.0;
  for (int b = 0; b < 2; ++b) {
    const std::complex<double> li = polylog_unit_circle(s_, thetas[b], &taylor_);
    double sum = (std::polar(1.0, phases[b]) * li).imag();
    for (int i = 1; i <= 3; ++i) sum -= std::pow(i, -s_) * std::sin(i * thetas[b] + phases[b]);
    total += sum;
  }
  return c_ * std::numbers::sqrt2 * 0.5 * total;
}

double TrueFunction::operator()(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("true function is defined on [0, 1]");
  if (c_ == 0.0) return 0.0;
  return truncation_ > 0 ? series_truncated(x, truncation_) : series_exact(x);
}

Eigen::VectorXd TrueFunction::operator()(const Points& xs) const {
  if (xs.cols() != 1) throw DomainError("true function is one-dimensional");
  Eigen::VectorXd out(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) out[i] = (*this)(xs(i, 0));
  return out;
}

double eval_true_function(const TrueFunction& tf, double x) { return tf(x); }

Dataset generate_synthetic(const TrueFunction& tf, Eigen::Index n, double sigma, Rng& rng) {
  if (n < 1) throw DomainError("sample size must be positive");
  if (!(sigma > 0.0)) throw DomainError("noise sd must be positive");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, sigma);
  Dataset d;
  d.x.resize(n, 1);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) d.x(i, 0) = unif(rng);
  for (Eigen::Index i = 0; i < n; ++i) d.y[i] = tf(d.x(i, 0)) + noise(rng);
  d.source = "synthetic";
  return d;
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  if (data.dim() != 1) throw ContractError("CSV dump supports one-dimensional data");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "x,y\n";
  char buf[64];
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", data.x(i, 0), data.y[i]);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "x,y") throw IoError("expected header x,y in " + path.string());
  std::vector<double> xs, ys;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    double x = 0, y = 0;
    if (f.size() != 2 || !parse_double(f[0], x) || !parse_double(f[1], y))
      throw IoError("malformed row " + std::to_string(lineno) + " in " + path.string());
    xs.push_back(x);
    ys.push_back(y);
  }
  return Dataset::one_dimensional(xs, ys, path.filename().string());
}

FlightSchema FlightSchema::defaults() {
  FlightSchema s;
  s.columns = {{"age", "PlaneAge"},          {"distance", "Distance"},
               {"airtime", "AirTime"},       {"dep_time", "DepTime"},
               {"arr_time", "ArrTime"},      {"month", "Month"},
               {"day_of_week", "DayOfWeek"}, {"day_of_month", "DayofMonth"},
               {"target", "ArrDelay"}};
  return s;
}

FlightSchema FlightSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read schema " + path.string());
  FlightSchema s = defaults();
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("schema line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    if (!s.columns.count(key)) throw IoError("unknown schema key '" + key + "'");
    s.columns[key] = trim(line.substr(eq + 1));
  }
  return s;
}

FlightData ingest_flights(const std::filesystem::path& path, const FlightSchema& schema,
                          Eigen::Index train_size, Eigen::Index test_size, Rng& rng) {
  if (train_size < 1 || test_size < 0) throw ContractError("invalid train/test sizes");
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InsufficientData("flight file is empty", 0, train_size + test_size);
  const auto header = split_csv(line);

  constexpr int kSlots = static_cast<int>(kFlightFeatures.size()) + 1;
  std::array<std::size_t, kSlots> col{};
  for (int j = 0; j < kSlots; ++j) {
    const std::string key = j < 8 ? kFlightFeatures[j] : "target";
    const auto it = schema.columns.find(key);
    if (it == schema.columns.end()) throw IoError("schema has no column for '" + key + "'");
    const auto pos = std::find(header.begin(), header.end(), it->second);
    if (pos == header.end()) throw IoError("column '" + it->second + "' not in " + path.string());
    col[j] = static_cast<std::size_t>(pos - header.begin());
  }

  std::vector<std::array<double, kSlots>> rows;
  FlightData out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++out.rows_read;
    const auto f = split_csv(line);
    std::array<double, kSlots> r{};
    bool ok = true;
    for (int j = 0; j < kSlots && ok; ++j) ok = col[j] < f.size() && parse_double(f[col[j]], r[j]);
    if (ok) {
      rows.push_back(r);
    } else {
      ++out.rows_dropped;
    }
  }
  const auto valid = static_cast<Eigen::Index>(rows.size());
  if (valid < train_size + test_size)
    throw InsufficientData("not enough valid flight rows", valid, train_size + test_size);

  std::vector<Eigen::Index> perm(valid);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  auto take = [&](Eigen::Index offset, Eigen::Index count, const char* tag) {
    Dataset d;
    d.x.resize(count, 8);
    d.y.resize(count);
    for (Eigen::Index r = 0; r < count; ++r) {
      const auto& row = rows[perm[offset + r]];
      for (int j = 0; j < 8; ++j) d.x(r, j) = row[j];
      d.y[r] = row[8];
    }
    d.source = path.filename().string() + ":" + tag;
    return d;
  };
  out.train = take(0, train_size, "train");
  out.test = take(train_size, test_size, "test");

  out.feature_mean = out.train.x.colwise().mean();
  const Eigen::MatrixXd centered = out.train.x.rowwise() - out.feature_mean;
  out.feature_sd =
      (centered.colwise().squaredNorm() / static_cast<double>(train_size)).cwiseSqrt();
  for (Eigen::Index j = 0; j < 8; ++j)
    if (!(out.feature_sd[j] > 0.0)) out.feature_sd[j] = 1.0;
  auto standardize = [&](Points& x) {
    x = (x.rowwise() - out.feature_mean).array().rowwise() / out.feature_sd.array();
  };
  standardize(out.train.x);
  standardize(out.test.x);
  return out;
}

}  // namespace dgp
