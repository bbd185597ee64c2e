#pragma once

// Tabulated limit CDFs with monotone (PCHIP) interpolation and an optional
// JSON cache keyed by the kernel fingerprint.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

// pchip in Boost 1.74 calls isnan unqualified; fpclassify declares it.
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>
#include <nlohmann/json.hpp>

#include "qtasep/errors.hpp"
#include "qtasep/limits.hpp"

namespace qtasep {

struct TableGrid {
  double lo = -8.0;
  double hi = 6.0;
  double step = 0.05;

  std::vector<double> points() const {
    if (!(step > 0.0) || !(hi > lo)) throw DomainError("bad table grid");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = lo + static_cast<double>(i) * step;
    return x;
  }
};

class CdfTable {
 public:
  static constexpr double kSlack = 1e-9;

  CdfTable(std::string fingerprint, std::vector<double> x, std::vector<double> F,
           std::vector<double> err)
      : fingerprint_(std::move(fingerprint)), x_(std::move(x)), F_(std::move(F)), err_(std::move(err)) {
    if (x_.size() < 4 || x_.size() != F_.size() || x_.size() != err_.size()) {
      throw ValidationError("CdfTable: need at least 4 points and matching array sizes");
    }
    for (std::size_t i = 0; i < F_.size(); ++i) {
      if (!(F_[i] >= -kSlack && F_[i] <= 1.0 + kSlack)) {
        throw ToleranceError("CdfTable: value outside [0,1] at x=" + std::to_string(x_[i]));
      }
      if (i > 0 && !(x_[i] > x_[i - 1])) throw ValidationError("CdfTable: grid not increasing");
      if (i > 0 && F_[i] < F_[i - 1] - kSlack) {
        throw ToleranceError("CdfTable: values decrease at x=" + std::to_string(x_[i]));
      }
    }
    // PCHIP is monotone for monotone data; clip the slack first.
    std::vector<double> xs = x_;
    std::vector<double> ys(F_.size());
    double running = 0.0;
    for (std::size_t i = 0; i < F_.size(); ++i) {
      running = std::max(running, std::clamp(F_[i], 0.0, 1.0));
      ys[i] = running;
    }
    interp_ = std::make_shared<Interp>(std::move(xs), std::move(ys));
  }

  /// Interpolated F(x); constant extension outside the grid.
  double operator()(double x) const {
    if (x <= x_.front()) return std::clamp(F_.front(), 0.0, 1.0);
    if (x >= x_.back()) return std::clamp(F_.back(), 0.0, 1.0);
    return std::clamp((*interp_)(x), 0.0, 1.0);
  }

  const std::string& fingerprint() const { return fingerprint_; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& values() const { return F_; }
  const std::vector<double>& errors() const { return err_; }
  double max_error() const { return *std::max_element(err_.begin(), err_.end()); }

  nlohmann::json to_json() const {
    return {{"fingerprint", fingerprint_}, {"grid", x_}, {"values", F_}, {"err", err_}};
  }

  static CdfTable from_json(const nlohmann::json& j) {
    return CdfTable(j.at("fingerprint").get<std::string>(), j.at("grid").get<std::vector<double>>(),
                    j.at("values").get<std::vector<double>>(), j.at("err").get<std::vector<double>>());
  }

 private:
  using Interp = boost::math::interpolators::pchip<std::vector<double>>;
  std::string fingerprint_;
  std::vector<double> x_;
  std::vector<double> F_;
  std::vector<double> err_;
  std::shared_ptr<Interp> interp_;
};

inline std::string table_fingerprint(const KernelSpec& spec, const TableGrid& grid) {
  std::ostringstream os;
  os << spec.fingerprint() << std::hexfloat << ";grid=" << grid.lo << ":" << grid.hi << ":" << grid.step;
  return os.str();
}

/// Evaluates fredholm_eval at every grid point, spread over `threads` workers.
inline CdfTable build_cdf_table(const KernelSpec& spec, const TableGrid& grid = {}, unsigned threads = 1) {
  const std::vector<double> x = grid.points();
  std::vector<double> F(x.size());
  std::vector<double> err(x.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < x.size(); i = next++) {
        const FredholmValue v = fredholm_eval(spec, x[i]);
        F[i] = v.value;
        err[i] = v.err_est;
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = x.size();
    }
  };
  const unsigned nt = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return CdfTable(table_fingerprint(spec, grid), x, std::move(F), std::move(err));
}

/// Loads `path` when it holds a table with the matching fingerprint;
/// otherwise builds the table and writes it there.
inline CdfTable cached_cdf_table(const KernelSpec& spec, const std::filesystem::path& path,
                                 const TableGrid& grid = {}, unsigned threads = 1) {
  const std::string fp = table_fingerprint(spec, grid);
  if (std::filesystem::exists(path)) {
    try {
      std::ifstream in(path);
      const auto j = nlohmann::json::parse(in);
      if (j.at("fingerprint").get<std::string>() == fp) return CdfTable::from_json(j);
    } catch (const nlohmann::json::exception&) {
      // unreadable cache: rebuild
    }
  }
  CdfTable t = build_cdf_table(spec, grid, threads);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << t.to_json().dump() << "\n";
  return t;
}

}  // namespace qtasep
