#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "pcmea/autodiff.hpp"
#include "pcmea/matrix.hpp"
#include "pcmea/params.hpp"
#include "pcmea/random.hpp"

namespace pcmea::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
  return m;
}

inline Matrix random_unit_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m = random_matrix(rng, rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i).normalize();
  return m;
}

/// Builds a scalar from variables bound to `inputs`.
using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Largest norm-wise relative error between the tape gradient and central
/// differences (step h) over all inputs.
inline double gradient_error(const ScalarFn& f, std::vector<Matrix> inputs, double h = 1e-5) {
  std::vector<Matrix> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.variable(x));
    const auto out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Matrix>& xs) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return f(tape, vars).scalar();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix numeric(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k].data()[i];
      inputs[k].data()[i] = orig + h;
      const double up = eval(inputs);
      inputs[k].data()[i] = orig - h;
      const double down = eval(inputs);
      inputs[k].data()[i] = orig;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const double diff = (numeric - analytic[k]).norm();
    const double scale = numeric.norm() + analytic[k].norm();
    const double err = scale < 1e-10 ? diff : diff / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

// Compares tape gradients of a store-parameterized scalar against central
// differences on every entry.
inline double store_gradient_error(const ParameterStore& store,
                            const std::function<ad::Var(ad::Tape&, const BoundParameters&)>& f, double h = 1e-5) {
  ad::Tape tape;
  BoundParameters bound(tape, store, true);
  tape.backward(f(tape, bound));
  const auto grads = bound.gradients();
  auto eval = [&](const ParameterStore& s) {
    ad::Tape t;
    BoundParameters b(t, s, false);
    return f(t, b).scalar();
  };
  double worst = 0.0;
  for (const auto& entry : store.entries()) {
    Matrix numeric(entry.value.rows(), entry.value.cols());
    for (Eigen::Index i = 0; i < entry.value.size(); ++i) {
      ParameterStore up = store, down = store;
      up.at(entry.name).data()[i] += h;
      down.at(entry.name).data()[i] -= h;
      numeric.data()[i] = (eval(up) - eval(down)) / (2.0 * h);
    }
    const auto& analytic = grads.at(entry.name);
    const double scale = numeric.norm() + analytic.norm();
    const double diff = (numeric - analytic).norm();
    worst = std::max(worst, scale < 1e-10 ? diff : diff / scale);
  }
  return worst;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pcmea_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace pcmea::testing
