#include "subq/sde.hpp"

#include "json.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace subq::sde {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

constexpr std::uint32_t kW32A = 0x9E3779B9u;
constexpr std::uint32_t kW32B = 0xBB67AE85u;
constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> c,
                                           std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW32A;
    k[1] += kW32B;
  }
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double to_open_unit(std::uint32_t v) {
  return (static_cast<double>(v) + 0.5) * (1.0 / 4294967296.0);
}

}  // namespace

std::array<double, 4> normal_block(std::uint64_t seed, std::uint64_t stream, std::uint64_t path,
                                   std::uint32_t block) {
  const std::uint64_t key64 = splitmix64(seed ^ splitmix64(stream + 1));
  const std::array<std::uint32_t, 4> ctr{
      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), block, 0x53514c41u};
  const auto r = philox4x32_10(
      ctr, {static_cast<std::uint32_t>(key64), static_cast<std::uint32_t>(key64 >> 32)});
  const double u0 = to_open_unit(r[0]), u1 = to_open_unit(r[1]);
  const double u2 = to_open_unit(r[2]), u3 = to_open_unit(r[3]);
  const double r0 = std::sqrt(-2.0 * std::log(u0)), a0 = kTwoPi * u1;
  const double r1 = std::sqrt(-2.0 * std::log(u2)), a1 = kTwoPi * u3;
  return {r0 * std::cos(a0), r0 * std::sin(a0), r1 * std::cos(a1), r1 * std::sin(a1)};
}

namespace {

// sequential view over one path's normal draws
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t path)
      : seed_(seed), stream_(stream), path_(path) {}

  double next() {
    const std::uint32_t block = static_cast<std::uint32_t>(index_ >> 2);
    const int slot = static_cast<int>(index_ & 3u);
    if (block != cached_block_ || !have_block_) {
      cache_ = normal_block(seed_, stream_, path_, block);
      cached_block_ = block;
      have_block_ = true;
    }
    ++index_;
    return cache_[static_cast<std::size_t>(slot)];
  }

 private:
  std::uint64_t seed_, stream_, path_;
  std::uint64_t index_ = 0;
  std::uint32_t cached_block_ = 0;
  bool have_block_ = false;
  std::array<double, 4> cache_{};
};

}  // namespace

PathBatch simulate(const DiffusionSpec& spec, double t0, const Vec& x0, double horizon_end,
                   int n_steps, int n_paths, std::uint64_t seed, std::uint64_t stream_id) {
  if (n_steps < 1 || n_paths < 1) throw std::domain_error("simulate: need n_steps, n_paths >= 1");
  if (!(horizon_end > t0)) throw std::domain_error("simulate: horizon must exceed t0");
  if (x0.size() != spec.dim_x) throw std::invalid_argument("simulate: x0 has wrong dimension");

  PathBatch batch;
  batch.seed = seed;
  batch.stream_id = stream_id;
  batch.time_grid.resize(n_steps + 1);
  const double dt = (horizon_end - t0) / n_steps;
  for (int i = 0; i <= n_steps; ++i) batch.time_grid(i) = t0 + dt * i;
  batch.time_grid(n_steps) = horizon_end;

  batch.states.assign(n_steps + 1, Mat(spec.dim_x, n_paths));
  batch.increments.assign(n_steps, Mat(spec.dim_w, n_paths));
  const double sqrt_dt = std::sqrt(dt);

  Vec x(spec.dim_x), dw(spec.dim_w);
  for (int j = 0; j < n_paths; ++j) {
    NormalStream rng(seed, stream_id, static_cast<std::uint64_t>(j));
    x = x0;
    batch.states[0].col(j) = x;
    for (int i = 0; i < n_steps; ++i) {
      for (int c = 0; c < spec.dim_w; ++c) dw(c) = sqrt_dt * rng.next();
      batch.increments[static_cast<std::size_t>(i)].col(j) = dw;
      const double t = batch.time_grid(i);
      x += spec.drift(t, x) * dt + spec.diffusion(t, x) * dw;
      if (!x.allFinite()) {
        std::ostringstream os;
        os << "simulate: non-finite state at step " << i + 1 << ", path " << j;
        throw InstabilityError(os.str());
      }
      batch.states[static_cast<std::size_t>(i) + 1].col(j) = x;
    }
  }
  return batch;
}

ExpMomentDiagnostic exp_moment_diagnostic(const PathBatch& batch, double q, double lambda,
                                          double cap) {
  if (!(q >= 1.0 && q < 2.0))
    throw std::domain_error("exp_moment_diagnostic: q must lie in [1,2)");
  const int paths = batch.n_paths();
  Vec vals(paths);
  std::size_t sat = 0;
  for (int j = 0; j < paths; ++j) {
    double sup_norm = 0.0;
    for (const Mat& st : batch.states) sup_norm = std::max(sup_norm, st.col(j).norm());
    const SatValue v = sat_exp(lambda * std::pow(sup_norm, q), cap);
    vals(j) = v.value;
    sat += v.saturated ? 1 : 0;
  }
  if (sat == static_cast<std::size_t>(paths))
    throw InstabilityError("exp_moment_diagnostic: every path saturated the exponent cap");
  const double mean = vals.mean();
  const double var = paths > 1 ? (vals.array() - mean).square().sum() / (paths - 1) : 0.0;
  return {mean, std::sqrt(var / paths), sat};
}

gen::AssumptionReport check_A1(const DiffusionSpec& spec, double t_max, double x_radius,
                               int n_samples) {
  gen::AssumptionReport rep;
  rep.which = gen::Assumption::A1;
  const double K = spec.lipschitz_K;
  std::uint64_t state = 0x9d2c5680u;
  auto unif = [&]() {
    state = splitmix64(state);
    return 2.0 * (static_cast<double>(state >> 11) * 0x1.0p-53) - 1.0;
  };
  const Vec zero = Vec::Zero(spec.dim_x);
  for (int s = 0; s < n_samples; ++s) {
    const double t = t_max * 0.5 * (unif() + 1.0);
    Vec x(spec.dim_x), xp(spec.dim_x);
    for (int c = 0; c < spec.dim_x; ++c) {
      x(c) = x_radius * unif();
      xp(c) = x_radius * unif();
    }
    const double bound = spec.drift(t, zero).norm() + spec.diffusion(t, x).norm();
    ++rep.sampled_nodes;
    rep.margin = std::min(rep.margin, K - bound);
    if (bound > K * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "bound t=" << t << " x=" << x(0);
      rep.violations.push_back({os.str(), bound, K});
    }
    const double dist = (x - xp).norm();
    if (dist < 1e-12) continue;
    const double quot = ((spec.drift(t, x) - spec.drift(t, xp)).norm() +
                         (spec.diffusion(t, x) - spec.diffusion(t, xp)).norm()) /
                        dist;
    ++rep.sampled_nodes;
    rep.margin = std::min(rep.margin, K - quot);
    if (quot > K * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "lipschitz t=" << t << " x=" << x(0) << " x'=" << xp(0);
      rep.violations.push_back({os.str(), quot, K});
    }
  }
  return rep;
}

void save_path_batch(const PathBatch& batch, const std::string& path) {
  nlohmann::json header;
  header["magic"] = "subq-paths";
  header["version"] = 1;
  header["n_steps"] = batch.n_steps();
  header["n_paths"] = batch.n_paths();
  header["dim_x"] = batch.dim_x();
  header["dim_w"] = batch.dim_w();
  header["seed"] = batch.seed;
  header["stream_id"] = batch.stream_id;
  header["t0"] = batch.time_grid(0);
  header["t_end"] = batch.time_grid(batch.time_grid.size() - 1);
  const std::string htxt = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_path_batch: cannot open " + path);
  const std::uint64_t hlen = htxt.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
  auto dump = [&out](const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  };
  dump(batch.time_grid.data(), static_cast<std::size_t>(batch.time_grid.size()));
  for (const Mat& m : batch.states) dump(m.data(), static_cast<std::size_t>(m.size()));
  for (const Mat& m : batch.increments) dump(m.data(), static_cast<std::size_t>(m.size()));
  if (!out) throw std::runtime_error("save_path_batch: write failed for " + path);
}

PathBatch load_path_batch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_path_batch: cannot open " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htxt(hlen, '\0');
  in.read(htxt.data(), static_cast<std::streamsize>(hlen));
  const nlohmann::json header = nlohmann::json::parse(htxt);
  if (header.at("magic").get<std::string>() != "subq-paths")
    throw std::runtime_error("load_path_batch: bad magic in " + path);

  PathBatch batch;
  const int n_steps = header.at("n_steps").get<int>();
  const int n_paths = header.at("n_paths").get<int>();
  const int dim_x = header.at("dim_x").get<int>();
  const int dim_w = header.at("dim_w").get<int>();
  batch.seed = header.at("seed").get<std::uint64_t>();
  batch.stream_id = header.at("stream_id").get<std::uint64_t>();
  batch.time_grid.resize(n_steps + 1);
  batch.states.assign(n_steps + 1, Mat(dim_x, n_paths));
  batch.increments.assign(n_steps, Mat(dim_w, n_paths));
  auto slurp = [&in, &path](double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("load_path_batch: truncated file " + path);
  };
  slurp(batch.time_grid.data(), static_cast<std::size_t>(batch.time_grid.size()));
  for (Mat& m : batch.states) slurp(m.data(), static_cast<std::size_t>(m.size()));
  for (Mat& m : batch.increments) slurp(m.data(), static_cast<std::size_t>(m.size()));
  return batch;
}

DiffusionSpec make_diffusion(const std::string& name,
                             const std::map<std::string, double>& params, int dim) {
  auto param = [&params](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  DiffusionSpec spec;
  spec.name = name;
  spec.dim_x = spec.dim_w = dim;
  const double sn = std::sqrt(static_cast<double>(dim));
  if (name == "brownian") {
    const double s0 = param("sigma", 1.0);
    spec.drift = [dim](double, const Vec&) { return Vec::Zero(dim); };
    spec.diffusion = [dim, s0](double, const Vec&) { return Mat(s0 * Mat::Identity(dim, dim)); };
    spec.lipschitz_K = std::max(1e-12, s0 * sn);
    return spec;
  }
  if (name == "const_drift") {
    const double b0 = param("b", 1.0);
    const double s0 = param("sigma", 1.0);
    spec.drift = [dim, b0](double, const Vec&) { return Vec(b0 * Vec::Ones(dim)); };
    spec.diffusion = [dim, s0](double, const Vec&) { return Mat(s0 * Mat::Identity(dim, dim)); };
    spec.lipschitz_K = std::abs(b0) * sn + s0 * sn + 1e-12;
    return spec;
  }
  if (name == "ou") {
    const double kappa = param("kappa", 1.0);
    const double s0 = param("sigma", 1.0);
    spec.drift = [kappa](double, const Vec& x) { return Vec(-kappa * x); };
    spec.diffusion = [dim, s0](double, const Vec&) { return Mat(s0 * Mat::Identity(dim, dim)); };
    spec.lipschitz_K = std::max(kappa, s0 * sn) + 1e-12;
    return spec;
  }
  if (name == "geometric") {
    const double a = param("a", 0.5);
    const double b = param("b", 0.2);
    spec.drift = [a](double, const Vec& x) { return Vec(a * x); };
    spec.diffusion = [b](double, const Vec& x) {
      Mat s(x.size(), x.size());
      s.setZero();
      for (int i = 0; i < x.size(); ++i) s(i, i) = b * x(i);
      return s;
    };
    spec.lipschitz_K = std::abs(a) + std::abs(b);
    spec.a1_expected = false;  // sigma is unbounded
    return spec;
  }
  throw std::invalid_argument("make_diffusion: unknown diffusion name '" + name + "'");
}

std::vector<std::string> diffusion_names() { return {"brownian", "const_drift", "ou", "geometric"}; }

}  // namespace subq::sde
