#include "gcf/modes/modes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "gcf/errors.hpp"
#include "gcf/numerics/kernels.hpp"

namespace gcf::modes {

namespace kern = num::kernels;

Tensor MotionModeBank::flat() const {
  Tensor t({k, static_cast<std::size_t>(2 * t_pre)});
  for (std::size_t i = 0; i < k; ++i) {
    const auto v = flatten_future(modes[i], t_pre);
    std::copy(v.begin(), v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * v.size()));
  }
  return t;
}

std::vector<double> flatten_future(const Trajectory& traj, int t_pre) {
  if (static_cast<int>(traj.size()) != t_pre) {
    throw ShapeError("future has " + std::to_string(traj.size()) + " points, expected " + std::to_string(t_pre));
  }
  std::vector<double> v;
  v.reserve(2 * traj.size());
  for (const auto& p : traj) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return v;
}

Trajectory unflatten_future(const double* v, int t_pre) {
  Trajectory tr(static_cast<std::size_t>(t_pre));
  for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = {v[2 * i], v[2 * i + 1]};
  return tr;
}

double kmeans_objective(const Tensor& x, const Tensor& c, const std::vector<std::size_t>& assignment) {
  const std::size_t d = x.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x(i, j) - c(assignment[i], j);
      total += diff * diff;
    }
  }
  return total;
}

namespace {

// Slack for rounding in the recomputed means.
bool increased(double now, double before) { return now > before + 1e-12 * std::max(1.0, std::abs(before)); }

// Assigns each point to its nearest centroid (ties to the lower index).
// Returns whether any assignment changed; fills per-point distances.
bool assign(const Tensor& x, const Tensor& c, std::vector<std::size_t>& a, std::vector<double>& best,
            std::vector<double>& scratch) {
  const std::size_t m = x.rows(), k = c.rows(), d = x.cols();
  scratch.resize(m * k);
  kern::pairwise_sq_dist(x.data().data(), c.data().data(), scratch.data(), m, k, d);
  bool changed = false;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (scratch[i * k + j] < scratch[i * k + arg]) arg = j;
    if (a[i] != arg) changed = true;
    a[i] = arg;
    best[i] = scratch[i * k + arg];
  }
  return changed;
}

Tensor plus_plus(const Tensor& x, std::size_t k, std::mt19937_64& rng) {
  const std::size_t m = x.rows(), d = x.cols();
  Tensor c({k, d});
  std::vector<double> d2(m, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
  for (std::size_t j = 0; j < k; ++j) {
    if (j > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        double r = unit(rng) * total;
        // Fallback for rounding at the top end: last point with positive weight.
        pick = m - 1;
        while (d2[pick] == 0.0) --pick;
        for (std::size_t i = 0; i < m; ++i) {
          if (r < d2[i]) {
            pick = i;
            break;
          }
          r -= d2[i];
        }
      } else {
        pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
      }
    }
    for (std::size_t t = 0; t < d; ++t) c(j, t) = x(pick, t);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = x(i, t) - c(j, t);
        acc += diff * diff;
      }
      d2[i] = std::min(d2[i], acc);
    }
  }
  return c;
}

// Recomputes means; an empty cluster takes the point farthest from its own
// centroid among clusters with at least two members.
void update(const Tensor& x, Tensor& c, std::vector<std::size_t>& a, const std::vector<double>& dist) {
  const std::size_t m = x.rows(), k = c.rows(), d = x.cols();
  std::vector<std::size_t> count(k, 0);
  for (auto j : a) ++count[j];
  std::vector<bool> taken(m, false);
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] > 0) continue;
    std::size_t far = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (taken[i] || count[a[i]] < 2) continue;
      if (far == m || dist[i] > dist[far]) far = i;
    }
    if (far == m) throw NumericError("k-means: no point available to reseed an empty cluster");
    --count[a[far]];
    a[far] = j;
    count[j] = 1;
    taken[far] = true;
  }
  c = Tensor({k, d});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < d; ++t) c(a[i], t) += x(i, t);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t t = 0; t < d; ++t) c(j, t) /= static_cast<double>(count[j]);
}

std::uint64_t restart_seed(std::uint64_t seed, std::size_t r) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(r)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

void check_inputs(const Tensor& x, std::size_t k) {
  if (x.shape().size() != 2) throw ShapeError("k-means features must be rank 2");
  if (k == 0) throw ConfigError("k-means needs K >= 1");
  if (x.rows() < k) {
    throw ConfigError("k-means needs at least K points (M = " + std::to_string(x.rows()) +
                      ", K = " + std::to_string(k) + ")");
  }
  for (double v : x.data())
    if (!std::isfinite(v)) throw NumericError("k-means features contain non-finite values");
}

}  // namespace

KMeansResult kmeans_single(const Tensor& x, std::size_t k, std::uint64_t seed, const KMeansOptions& opts) {
  check_inputs(x, k);
  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centroids = plus_plus(x, k, rng);
  const std::size_t m = x.rows();
  r.assignment.assign(m, k);
  std::vector<double> dist(m), scratch;
  assign(x, r.centroids, r.assignment, dist, scratch);
  double obj = kmeans_objective(x, r.centroids, r.assignment);
  r.initial_objective = obj;
  r.history.push_back(obj);
  for (int it = 1; it <= opts.max_iter; ++it) {
    update(x, r.centroids, r.assignment, dist);
    const double after_update = kmeans_objective(x, r.centroids, r.assignment);
    if (increased(after_update, obj)) throw NumericError("k-means objective increased in the update step");
    const bool changed = assign(x, r.centroids, r.assignment, dist, scratch);
    const double after_assign = kmeans_objective(x, r.centroids, r.assignment);
    if (increased(after_assign, after_update)) throw NumericError("k-means objective increased in the assignment step");
    r.history.push_back(after_update);
    r.history.push_back(after_assign);
    const double rel = obj > 0.0 ? (obj - after_assign) / obj : 0.0;
    obj = after_assign;
    r.iterations = it;
    if (!changed || rel < opts.tol) break;
  }
  r.objective = obj;
  return r;
}

KMeansResult kmeans_fit(const Tensor& x, std::size_t k, std::uint64_t seed, const KMeansOptions& opts) {
  check_inputs(x, k);
  if (opts.restarts < 1) throw ConfigError("k-means needs at least one restart");
  const auto n = static_cast<std::ptrdiff_t>(opts.restarts);
  std::vector<KMeansResult> runs(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic) if (kern::threads() > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    try {
      runs[r] = kmeans_single(x, k, restart_seed(seed, r), opts);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericError(e);
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].objective < runs[best].objective) best = r;
  KMeansResult out = std::move(runs[best]);
  out.best_restart = best;
  for (const auto& run : runs) out.restart_objectives.push_back(run.objective);
  out.restart_objectives[best] = out.objective;
  return out;
}

MotionModeBank modes_from_training(const std::vector<data::Scene>& train, std::size_t k, std::uint64_t seed,
                                   const KMeansOptions& opts) {
  if (train.size() < k) {
    throw ConfigError("need at least K = " + std::to_string(k) + " training scenes, got " +
                      std::to_string(train.size()));
  }
  if (train.empty()) throw ConfigError("no training scenes");
  const int t_pre = static_cast<int>(train.front().target_future.size());
  if (t_pre == 0) throw DataError("training scenes carry no future");
  Tensor x({train.size(), static_cast<std::size_t>(2 * t_pre)});
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!train[i].has_future()) throw DataError("training scene without a future");
    const auto v = flatten_future(train[i].target_future, t_pre);
    for (std::size_t j = 0; j < v.size(); ++j) x(i, j) = v[j];
  }
  const auto fit = kmeans_fit(x, k, seed, opts);
  MotionModeBank bank;
  bank.k = k;
  bank.t_pre = t_pre;
  bank.seed = seed;
  bank.iterations = fit.iterations;
  bank.objective = fit.objective;
  bank.initial_objective = fit.initial_objective;
  for (std::size_t j = 0; j < k; ++j) bank.modes.push_back(unflatten_future(fit.centroids.data().data() + j * x.cols(), t_pre));
  return bank;
}

nlohmann::json bank_to_json(const MotionModeBank& bank) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : bank.modes) {
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& p : m) tr.push_back({p.x, p.y});
    modes.push_back(tr);
  }
  return {{"k", bank.k},
          {"t_pre", bank.t_pre},
          {"modes", modes},
          {"seed", bank.seed},
          {"objective", bank.objective},
          {"initial_objective", bank.initial_objective},
          {"iterations", bank.iterations}};
}

MotionModeBank bank_from_json(const nlohmann::json& j) {
  MotionModeBank b;
  try {
    b.k = j.at("k").get<std::size_t>();
    b.t_pre = j.at("t_pre").get<int>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.objective = j.at("objective").get<double>();
    b.initial_objective = j.value("initial_objective", b.objective);
    b.iterations = j.value("iterations", 0);
    for (const auto& m : j.at("modes")) {
      Trajectory tr;
      for (const auto& p : m) {
        if (!p.is_array() || p.size() != 2) throw FormatError("mode point must be [x, y]");
        tr.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      b.modes.push_back(std::move(tr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed mode bank: ") + e.what());
  }
  try {
    validate_bank(b);
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return b;
}

void validate_bank(const MotionModeBank& b) {
  if (b.k == 0 || b.modes.size() != b.k) throw FormatError("mode bank holds a wrong number of modes");
  if (b.t_pre <= 0) throw FormatError("mode bank t_pre must be positive");
  for (const auto& m : b.modes) {
    if (m.size() != static_cast<std::size_t>(b.t_pre)) throw FormatError("mode has a wrong number of points");
    for (const auto& p : m)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw FormatError("mode has non-finite coordinates");
  }
  if (!std::isfinite(b.objective) || increased(b.objective, b.initial_objective)) {
    throw FormatError("mode bank objective must be finite and not above the initial objective");
  }
}

void save_bank(const MotionModeBank& bank, const std::string& path) {
  validate_bank(bank);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << bank_to_json(bank).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

MotionModeBank load_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("mode bank '" + path + "': " + e.what());
  }
  return bank_from_json(j);
}

}  // namespace gcf::modes
