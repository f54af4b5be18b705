#include "inmerge/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "inmerge/error.hpp"

namespace inmerge {

AblationAxis parse_ablation_axis(std::string_view s) {
  if (s == "alpha") return AblationAxis::kAlpha;
  if (s == "p") return AblationAxis::kP;
  if (s == "tau") return AblationAxis::kTau;
  if (s == "l_s") return AblationAxis::kLs;
  if (s == "sim_inverted") return AblationAxis::kSimInverted;
  throw ConfigError("unknown ablation axis '" + std::string(s) +
                    "' (expected alpha|p|tau|l_s|sim_inverted)");
}

std::string_view ablation_axis_name(AblationAxis a) {
  switch (a) {
    case AblationAxis::kAlpha:
      return "alpha";
    case AblationAxis::kP:
      return "p";
    case AblationAxis::kTau:
      return "tau";
    case AblationAxis::kLs:
      return "l_s";
    case AblationAxis::kSimInverted:
      break;
  }
  return "sim_inverted";
}

RunConfig ablation_cell_config(const RunConfig& base, AblationAxis axis,
                               double value, std::uint64_t seed) {
  RunConfig cfg = base;
  cfg.train.seed = seed;
  MergeConfig m = base.train.merge.value_or(MergeConfig{});
  m.seed = seed;
  switch (axis) {
    case AblationAxis::kAlpha:
      m.alpha = value;
      break;
    case AblationAxis::kP:
      m.p = value;
      break;
    case AblationAxis::kTau:
      m.tau = value;
      break;
    case AblationAxis::kLs:
      if (value < 0.0 || value != std::floor(value)) {
        throw ConfigError("l_s values must be non-negative integers");
      }
      m.l_s = static_cast<std::size_t>(value);
      break;
    case AblationAxis::kSimInverted:
      m.tau = value;
      m.inverted_gate = true;
      break;
  }
  m.validate();
  cfg.train.merge = m;
  return cfg;
}

CellResult run_cell(const RunConfig& cfg, const Dataset& data, double value) {
  const ArchConfig arch = arch_for_dataset(cfg.arch, data);
  ProtocolResult r = run_protocol(arch, data, cfg.train);
  const MetricBundle test = evaluate(r.best_model, data, SplitName::kTest);
  CellResult c{value,
               cfg.train.seed,
               r.log.best_epoch.value_or(0),
               r.log.best_val_metric,
               primary_metric(test, data.task),
               0,
               std::move(r.best_model),
               std::move(r.log)};
  for (const auto& e : c.log.epochs) c.merges_applied += e.stats.merges_applied;
  return c;
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("INMERGE_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

AblationResult run_ablation(const RunConfig& base, const Dataset& data,
                            AblationAxis axis, const std::vector<double>& values,
                            const std::vector<std::uint64_t>& seeds,
                            std::size_t threads) {
  if (values.empty() || seeds.empty()) {
    throw ConfigError("ablation needs at least one value and one seed");
  }
  std::vector<RunConfig> configs;
  std::vector<double> cell_values;
  for (double v : values) {
    for (std::uint64_t s : seeds) {
      configs.push_back(ablation_cell_config(base, axis, v, s));
      cell_values.push_back(v);
    }
  }

  std::vector<std::optional<CellResult>> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run_cell(configs[i], data, cell_values[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_workers =
      std::clamp<std::size_t>(threads, 1, configs.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  AblationResult out{axis, {}, {}};
  for (auto& r : results) out.cells.push_back(std::move(*r));
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<double> test, val;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const CellResult& c = out.cells[v * seeds.size() + s];
      test.push_back(c.test_metric);
      val.push_back(c.best_val_metric);
    }
    out.summary.push_back({values[v], seeds.size(), mean_of(test),
                           sample_std(test), mean_of(val), sample_std(val)});
  }
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string cells_csv(const AblationResult& r) {
  std::ostringstream os;
  os << "axis,value,seed,best_epoch,best_val_metric,test_metric,merges_applied\n";
  for (const auto& c : r.cells) {
    os << ablation_axis_name(r.axis) << ',' << fmt(c.value) << ',' << c.seed
       << ',' << c.best_epoch << ',' << fmt(c.best_val_metric) << ','
       << fmt(c.test_metric) << ',' << c.merges_applied << '\n';
  }
  return os.str();
}

std::string summary_csv(const AblationResult& r) {
  std::ostringstream os;
  os << "axis,value,n_seeds,test_mean,test_std,val_mean,val_std\n";
  for (const auto& s : r.summary) {
    os << ablation_axis_name(r.axis) << ',' << fmt(s.value) << ',' << s.n << ','
       << fmt(s.test_mean) << ',' << fmt(s.test_std) << ',' << fmt(s.val_mean)
       << ',' << fmt(s.val_std) << '\n';
  }
  return os.str();
}

}  // namespace inmerge
