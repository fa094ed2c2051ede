#include "msfda/cli/embeddings.hpp"

#include <sstream>

#include <Eigen/Dense>

#include "msfda/data/csv.hpp"
#include "msfda/error.hpp"

namespace msfda::cli {

Projection principal_components_2d(const Matrix& features) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n < 2) throw ValidationError("cli", "projection needs at least two rows");
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = features(i, j);
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // eigenvalues ascending; take the two largest
  const std::size_t k = std::min<std::size_t>(2, d);
  Projection p{Matrix(n, 2, 0.0), Matrix(d, 2, 0.0)};
  for (std::size_t c = 0; c < k; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (std::abs(v(j)) > 1e-12) {
        if (v(j) < 0) v = -v;
        break;
      }
    }
    const Eigen::VectorXd proj = x * v;
    for (std::size_t j = 0; j < d; ++j) p.components(j, c) = v(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < n; ++i) p.coordinates(i, c) = proj(static_cast<Eigen::Index>(i));
  }
  return p;
}

std::string export_embeddings(std::span<const SourceModel> models, const Dataset& dataset,
                              const Partition& partition, const HiddenTruth* truth) {
  const std::size_t n = dataset.size();
  if (partition.size() != n) throw ValidationError("cli", "partition size differs from the dataset");
  if (truth && truth->labels.size() != n) throw ValidationError("cli", "truth size differs from the dataset");
  std::vector<char> in_labeled(n, 0);
  for (std::size_t i : partition.labeled) in_labeled[i] = 1;

  std::ostringstream out;
  out << "index,model,pc1,pc2,subset,pseudo_label,true_label\n";
  for (std::size_t j = 0; j < models.size(); ++j) {
    const Projection p = principal_components_2d(models[j].features(dataset.features));
    for (std::size_t i = 0; i < n; ++i) {
      out << i << ',' << j + 1 << ',' << format_double(p.coordinates(i, 0)) << ','
          << format_double(p.coordinates(i, 1)) << ',' << (in_labeled[i] ? "L" : "U") << ','
          << partition.fused_labels[i] + 1 << ',';
      if (truth) out << truth->labels[i] + 1;
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace msfda::cli
