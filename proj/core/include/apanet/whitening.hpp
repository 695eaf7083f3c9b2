#pragma once

#include "apanet/types.hpp"

#include <filesystem>
#include <vector>

namespace apanet {

// PCA model for the descriptor post-processing family: rotation,
// whitening and power whitening are all the same transform
//   y = diag(lambda_i^(-alpha/2)) P^T (x - mean)
// with alpha = 0, 1 and values in between. Columns of P are eigenvectors
// in descending eigenvalue order.
struct WhiteningModel {
  int dim = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd rotation;     // D x D, orthonormal columns
  Eigen::VectorXd eigenvalues;  // descending, >= 0
  double alpha = 0.5;
  int out_dim = 0;              // <= dim; leading components kept

  static WhiteningModel identity(int dim);
};

// Eigenvalues below this floor are clamped before exponentiation.
inline constexpr double kEigenvalueFloor = 1e-12;

// Column mean + eigendecomposition of the sample covariance (1/(M-1)
// normalization) of the zero-centered rows. Emits a warning on
// rank-deficient covariance; eigenvalues are clamped non-negative.
WhiteningModel fit_pca(const Eigen::MatrixXd& samples, double alpha = 0.5,
                       int out_dim = 0);

// Transform before truncation and re-normalization; used by the
// variance diagnostic and the SNW path.
Eigen::VectorXd power_whiten_raw(const Eigen::VectorXd& x,
                                 const WhiteningModel& model, double alpha);

// Full pipeline transform: rotate/scale, truncate to out_dim leading
// components, L2-normalize.
Descriptor apply_power_whitening(const Descriptor& x, const WhiteningModel& model);
Descriptor apply_power_whitening(const Descriptor& x, const WhiteningModel& model,
                                 double alpha);

// Applies the model transform to every row of a descriptor matrix.
Eigen::MatrixXd apply_power_whitening_rows(const Eigen::MatrixXd& rows,
                                           const WhiteningModel& model,
                                           double alpha);

// Per-dimension empirical variance of the transformed (pre-normalization)
// samples for each alpha. One row per (alpha, dimension).
struct VarianceRow {
  double alpha;
  int dim;
  double variance;
  double eigenvalue;
};
std::vector<VarianceRow> variance_report(const Eigen::MatrixXd& samples,
                                         const WhiteningModel& model,
                                         const std::vector<double>& alphas);
void write_variance_csv(const std::filesystem::path& path,
                        const std::vector<VarianceRow>& rows);

// Model file: magic "APAW", u32 D, u32 out_dim, f64 alpha, f64 mean[D],
// f64 eigenvalues[D], f64 P[DxD] row-major, little-endian.
void save_whitening_model(const std::filesystem::path& path,
                          const WhiteningModel& model);
WhiteningModel load_whitening_model(const std::filesystem::path& path);

}  // namespace apanet
