#include "apanet/whitening.hpp"

#include "apanet/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

namespace apanet {

WhiteningModel WhiteningModel::identity(int dim) {
  WhiteningModel m;
  m.dim = dim;
  m.mean = Eigen::VectorXd::Zero(dim);
  m.rotation = Eigen::MatrixXd::Identity(dim, dim);
  m.eigenvalues = Eigen::VectorXd::Ones(dim);
  m.alpha = 0.5;
  m.out_dim = dim;
  return m;
}

WhiteningModel fit_pca(const Eigen::MatrixXd& samples, double alpha,
                       int out_dim) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index d = samples.cols();
  if (m < 2) throw std::invalid_argument("fit_pca: need at least 2 samples");
  if (!samples.allFinite())
    throw std::invalid_argument("fit_pca: non-finite samples");

  WhiteningModel model;
  model.dim = static_cast<int>(d);
  model.mean = samples.colwise().mean();

  Eigen::MatrixXd centered = samples.rowwise() - model.mean.transpose();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(m - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("fit_pca: eigendecomposition failed");

  // Eigen returns ascending order; flip to descending.
  Eigen::VectorXd evals = solver.eigenvalues().reverse();
  Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

  bool deficient = false;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (evals(i) < kEigenvalueFloor) deficient = true;
    if (evals(i) < 0.0) evals(i) = 0.0;
  }
  if (deficient)
    std::cerr << "warning: rank-deficient covariance in fit_pca; "
                 "small eigenvalues clamped\n";

  model.eigenvalues = evals;
  model.rotation = evecs;
  model.alpha = alpha;
  model.out_dim = (out_dim > 0 && out_dim <= model.dim) ? out_dim : model.dim;
  return model;
}

Eigen::VectorXd power_whiten_raw(const Eigen::VectorXd& x,
                                 const WhiteningModel& model, double alpha) {
  if (x.size() != model.dim)
    throw std::invalid_argument("power_whiten_raw: dimension mismatch");
  Eigen::VectorXd rotated = model.rotation.transpose() * (x - model.mean);
  for (Eigen::Index i = 0; i < rotated.size(); ++i) {
    const double lambda = std::max(model.eigenvalues(i), kEigenvalueFloor);
    rotated(i) *= std::pow(lambda, -0.5 * alpha);
  }
  return rotated;
}

Descriptor apply_power_whitening(const Descriptor& x,
                                 const WhiteningModel& model) {
  return apply_power_whitening(x, model, model.alpha);
}

Descriptor apply_power_whitening(const Descriptor& x,
                                 const WhiteningModel& model, double alpha) {
  Eigen::VectorXd y = power_whiten_raw(x.values, model, alpha);
  return l2_normalize(y.head(model.out_dim).eval());
}

Eigen::MatrixXd apply_power_whitening_rows(const Eigen::MatrixXd& rows,
                                           const WhiteningModel& model,
                                           double alpha) {
  Eigen::MatrixXd out(rows.rows(), model.out_dim);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Descriptor d;
    d.values = rows.row(i).transpose();
    out.row(i) = apply_power_whitening(d, model, alpha).values.transpose();
  }
  return out;
}

std::vector<VarianceRow> variance_report(const Eigen::MatrixXd& samples,
                                         const WhiteningModel& model,
                                         const std::vector<double>& alphas) {
  const Eigen::Index m = samples.rows();
  if (m < 2)
    throw std::invalid_argument("variance_report: need at least 2 samples");
  std::vector<VarianceRow> rows;
  rows.reserve(alphas.size() * static_cast<std::size_t>(model.dim));
  for (double alpha : alphas) {
    Eigen::MatrixXd transformed(m, model.dim);
    for (Eigen::Index i = 0; i < m; ++i)
      transformed.row(i) =
          power_whiten_raw(samples.row(i).transpose(), model, alpha).transpose();
    Eigen::RowVectorXd mean = transformed.colwise().mean();
    for (int dim = 0; dim < model.dim; ++dim) {
      const double var =
          (transformed.col(dim).array() - mean(dim)).square().sum() /
          static_cast<double>(m - 1);
      rows.push_back({alpha, dim, var, model.eigenvalues(dim)});
    }
  }
  return rows;
}

void write_variance_csv(const std::filesystem::path& path,
                        const std::vector<VarianceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "alpha,dim,variance,eigenvalue\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g\n", r.alpha, r.dim,
                  r.variance, r.eigenvalue);
    out << buf;
  }
}

void save_whitening_model(const std::filesystem::path& path,
                          const WhiteningModel& model) {
  detail::BinaryWriter w(path);
  w.magic("APAW");
  w.u32(static_cast<std::uint32_t>(model.dim));
  w.u32(static_cast<std::uint32_t>(model.out_dim));
  w.f64(model.alpha);
  for (int i = 0; i < model.dim; ++i) w.f64(model.mean(i));
  for (int i = 0; i < model.dim; ++i) w.f64(model.eigenvalues(i));
  for (int i = 0; i < model.dim; ++i)
    for (int j = 0; j < model.dim; ++j) w.f64(model.rotation(i, j));
}

WhiteningModel load_whitening_model(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic("APAW", "APAW whitening model");
  WhiteningModel model;
  model.dim = static_cast<int>(r.u32());
  model.out_dim = static_cast<int>(r.u32());
  model.alpha = r.f64();
  if (model.dim < 1 || model.out_dim < 1 || model.out_dim > model.dim)
    throw FormatError("inconsistent dimensions in " + path.string());
  model.mean.resize(model.dim);
  model.eigenvalues.resize(model.dim);
  model.rotation.resize(model.dim, model.dim);
  for (int i = 0; i < model.dim; ++i) model.mean(i) = r.f64();
  for (int i = 0; i < model.dim; ++i) model.eigenvalues(i) = r.f64();
  for (int i = 0; i < model.dim; ++i)
    for (int j = 0; j < model.dim; ++j) model.rotation(i, j) = r.f64();
  return model;
}

}  // namespace apanet
