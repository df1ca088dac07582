#include "dapc/apc_expansion.hpp"

#include <string>

#include "dapc/error.hpp"
#include "dapc/trainer.hpp"

namespace dapc {

double ApcExpansion::operator()(std::span<const double> point) const {
  const auto psi = eval_multivariate(bases, terms, point);
  double r = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) r += coeffs[static_cast<Eigen::Index>(i)] * psi[i];
  return r;
}

Eigen::VectorXd ApcExpansion::predict(const RowMatrix& inputs) const {
  Eigen::VectorXd out(inputs.rows());
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    out[t] = (*this)(std::span<const double>(inputs.row(t).data(), inputs.cols()));
  }
  return out;
}

InputSensitivity ApcExpansion::sensitivity() const {
  const auto terms_s = sobol_indices(std::span<const double>(coeffs.data(), coeffs.size()), terms);
  return aggregate_sobol(terms_s, n_inputs);
}

ApcExpansion fit_apc(const Dataset& data, int degree, double ridge,
                     const std::optional<std::vector<MomentSet>>& input_moments) {
  if (data.size() == 0) throw Error(ErrorCode::empty_dataset, "aPC fit on an empty dataset");
  validate_dataset(data);
  if (degree < 0) throw Error(ErrorCode::invalid_argument, "degree must be >= 0");

  ApcExpansion e;
  e.n_inputs = static_cast<int>(data.inputs.cols());
  e.degree = degree;
  if (input_moments && input_moments->size() != static_cast<std::size_t>(e.n_inputs)) {
    throw Error(ErrorCode::dimension_mismatch, "need one moment set per input");
  }
  for (int j = 0; j < e.n_inputs; ++j) {
    if (input_moments) {
      e.bases.push_back(univariate_basis((*input_moments)[j], degree));
    } else {
      const Eigen::VectorXd col = data.inputs.col(j);
      e.bases.push_back(univariate_basis(raw_moments(std::span<const double>(col.data(), col.size()), 2 * degree),
                                         degree));
    }
  }
  e.terms = enumerate_total_degree(e.n_inputs, degree);

  Eigen::MatrixXd design(data.inputs.rows(), static_cast<Eigen::Index>(e.terms.size()));
  for (Eigen::Index t = 0; t < data.inputs.rows(); ++t) {
    const auto psi = eval_multivariate(e.bases, e.terms,
                                       std::span<const double>(data.inputs.row(t).data(), data.inputs.cols()));
    for (std::size_t i = 0; i < psi.size(); ++i) design(t, static_cast<Eigen::Index>(i)) = psi[i];
  }
  if (ridge < 0.0) ridge = default_ridge(data.size(), e.terms.size());
  e.coeffs = fit_least_squares(design, data.response(0), ridge);
  return e;
}

}  // namespace dapc
