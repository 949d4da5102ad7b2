#include "protobank/arcface.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "detail/dot_kernel.hpp"
#include "protobank/embedding.hpp"
#include "protobank/errors.hpp"
#include "protobank/rng.hpp"

namespace protobank {

namespace {

constexpr double kCosClamp = 1.0 - 1e-7;

double clamp_cos(double c) { return std::clamp(c, -kCosClamp, kCosClamp); }

void check_finite(const Matrix& m, const char* what) {
  const double* p = m.data();
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i)
    if (!std::isfinite(p[i])) throw NonFiniteInput(what);
}

}  // namespace

void ArcFaceConfig::validate() const {
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2.0))
    throw ConfigInvalid("margin must be in [0, pi/2)");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigInvalid("scale must be > 0");
  if (!std::isfinite(margin)) throw ConfigInvalid("margin must be finite");
}

LossResult arcface_forward_backward(const Matrix& embeddings,
                                    const std::vector<std::int64_t>& labels,
                                    const Matrix& prototypes, const ArcFaceConfig& config,
                                    const std::vector<bool>& embedding_grad_mask) {
  config.validate();
  std::size_t batch = embeddings.rows(), classes = prototypes.rows(), dim = embeddings.cols();
  if (prototypes.cols() != dim) throw DimensionMismatch(prototypes.cols(), dim);
  if (labels.size() != batch) throw LengthMismatch("labels", labels.size(), batch);
  if (!embedding_grad_mask.empty() && embedding_grad_mask.size() != batch)
    throw LengthMismatch("embedding_grad_mask", embedding_grad_mask.size(), batch);
  if (batch == 0) throw ValidationError("batch must be non-empty");
  check_finite(embeddings, "embeddings");
  check_finite(prototypes, "prototypes");
  for (std::size_t i = 0; i < batch; ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw LabelOutOfRange(labels[i], static_cast<long long>(classes));

  std::vector<double> enorm = row_norms(embeddings), wnorm = row_norms(prototypes);
  for (std::size_t i = 0; i < batch; ++i)
    if (enorm[i] <= 1e-12) throw ZeroNormRow(i, "embeddings");
  for (std::size_t j = 0; j < classes; ++j)
    if (wnorm[j] <= 1e-12) throw ZeroNormRow(j, "prototypes");

  Matrix ehat = normalize_rows(embeddings), what = normalize_rows(prototypes);
  Matrix cosm = cosine_block(ehat, what);
  for (std::size_t i = 0; i < batch * classes; ++i) cosm.data()[i] = clamp_cos(cosm.data()[i]);

  const double cm = std::cos(config.margin), sm = std::sin(config.margin);
  const double fallback_shift = config.margin * sm;
  const double s = config.scale;

  LossResult out;
  out.logits = Matrix(batch, classes);
  out.grad_embeddings = Matrix(batch, dim);
  out.grad_prototypes = Matrix(classes, dim);

  // d(mean loss)/d(cos_ij), filled batch row by batch row.
  Matrix gcos(batch, classes);
  double loss_sum = 0.0;

  for (std::size_t i = 0; i < batch; ++i) {
    std::size_t y = static_cast<std::size_t>(labels[i]);
    const double* ci = cosm.row(i);
    double* zi = out.logits.row(i);
    double cy = ci[y];

    // theta + m <= pi  <=>  cos(theta) >= cos(pi - m) = -cos(m)
    bool main_branch = cy >= -cm;
    double psi = main_branch ? cy * cm - std::sqrt(1.0 - cy * cy) * sm : cy - fallback_shift;
    double dpsi = main_branch ? cm + sm * cy / std::sqrt(1.0 - cy * cy) : 1.0;

    for (std::size_t j = 0; j < classes; ++j) zi[j] = s * ci[j];
    zi[y] = s * psi;

    double zmax = *std::max_element(zi, zi + classes);
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) sum += std::exp(zi[j] - zmax);
    double lse = zmax + std::log(sum);
    loss_sum += lse - zi[y];

    double* gi = gcos.row(i);
    for (std::size_t j = 0; j < classes; ++j) {
      double p = std::exp(zi[j] - lse);
      double g = (p - (j == y ? 1.0 : 0.0)) * s / static_cast<double>(batch);
      gi[j] = (j == y) ? g * dpsi : g;
    }
  }
  out.loss = loss_sum / static_cast<double>(batch);

  // grad_e_i = (sum_j g_ij w_hat_j - (sum_j g_ij cos_ij) e_hat_i) / |e_i|
  for (std::size_t i = 0; i < batch; ++i) {
    if (!embedding_grad_mask.empty() && !embedding_grad_mask[i]) continue;
    const double* gi = gcos.row(i);
    const double* ci = cosm.row(i);
    double* out_i = out.grad_embeddings.row(i);
    double gc = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      gc += gi[j] * ci[j];
      const double* wj = what.row(j);
      double g = gi[j];
      for (std::size_t t = 0; t < dim; ++t) out_i[t] += g * wj[t];
    }
    const double* ei = ehat.row(i);
    double inv = 1.0 / enorm[i];
    for (std::size_t t = 0; t < dim; ++t) out_i[t] = (out_i[t] - gc * ei[t]) * inv;
  }

  // grad_w_j = (sum_i g_ij e_hat_i - (sum_i g_ij cos_ij) w_hat_j) / |w_j|
  std::vector<double> colgc(classes, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* gi = gcos.row(i);
    const double* ci = cosm.row(i);
    const double* ei = ehat.row(i);
    for (std::size_t j = 0; j < classes; ++j) {
      double g = gi[j];
      colgc[j] += g * ci[j];
      double* out_j = out.grad_prototypes.row(j);
      for (std::size_t t = 0; t < dim; ++t) out_j[t] += g * ei[t];
    }
  }
  for (std::size_t j = 0; j < classes; ++j) {
    const double* wj = what.row(j);
    double* out_j = out.grad_prototypes.row(j);
    double inv = 1.0 / wnorm[j];
    for (std::size_t t = 0; t < dim; ++t) out_j[t] = (out_j[t] - colgc[j] * wj[t]) * inv;
  }

  return out;
}

GradCheckInstance make_gradcheck_instance(std::size_t batch, std::size_t classes,
                                          std::size_t dim, std::uint64_t seed) {
  if (batch < 1 || classes < 1 || dim < 2)
    throw ValidationError("gradcheck instance needs batch >= 1, classes >= 1, dim >= 2");
  GradCheckInstance inst;
  inst.labels.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) inst.labels[i] = static_cast<std::int64_t>(i % classes);
  std::normal_distribution<double> normal(0.0, 1.0);
  // The loss clamps cosines at +-(1 - 1e-7) and is flat past the clamp, so a
  // pair that lands there has no derivative for a finite difference to find.
  // Resample until every cosine sits safely inside the differentiable region
  // (low dimensions make near-collinear pairs common).
  constexpr double kGuard = 1.0 - 1e-4;
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt == 256) throw ValidationError("gradcheck instance resampling did not converge");
    auto eng = make_engine(derive_seed(seed, 17 + attempt));
    inst.embeddings = Matrix(batch, dim);
    inst.prototypes = Matrix(classes, dim);
    for (std::size_t i = 0; i < batch * dim; ++i) inst.embeddings.data()[i] = normal(eng);
    for (std::size_t i = 0; i < classes * dim; ++i) inst.prototypes.data()[i] = normal(eng);
    inst.embeddings = normalize_rows(inst.embeddings);
    inst.prototypes = normalize_rows(inst.prototypes);
    double worst = 0.0;
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < classes; ++j) {
        double c = detail::dot_pair(inst.embeddings.row(i), inst.prototypes.row(j), dim);
        worst = std::max(worst, std::abs(c));
      }
    if (worst < kGuard) return inst;
  }
}

double gradient_check(const GradCheckInstance& instance, const ArcFaceConfig& config,
                      double step) {
  if (!(step >= 1e-7 && step <= 1e-4)) throw ConfigInvalid("step must be in [1e-7, 1e-4]");
  LossResult base =
      arcface_forward_backward(instance.embeddings, instance.labels, instance.prototypes, config);
  if (!std::isfinite(base.loss)) throw NonFiniteInput("loss");

  auto loss_at = [&](const Matrix& e, const Matrix& w) {
    return arcface_forward_backward(e, instance.labels, w, config).loss;
  };

  double worst = 0.0;
  auto probe = [&](Matrix& m, std::size_t idx, double analytic, bool is_embedding) {
    double saved = m.data()[idx];
    m.data()[idx] = saved + step;
    double up = is_embedding ? loss_at(m, instance.prototypes) : loss_at(instance.embeddings, m);
    m.data()[idx] = saved - step;
    double dn = is_embedding ? loss_at(m, instance.prototypes) : loss_at(instance.embeddings, m);
    m.data()[idx] = saved;
    double numeric = (up - dn) / (2.0 * step);
    if (!std::isfinite(numeric)) throw NonFiniteInput("finite-difference probe");
    double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, rel);
  };

  Matrix e = instance.embeddings;
  for (std::size_t idx = 0; idx < e.rows() * e.cols(); ++idx)
    probe(e, idx, base.grad_embeddings.data()[idx], true);
  Matrix w = instance.prototypes;
  for (std::size_t idx = 0; idx < w.rows() * w.cols(); ++idx)
    probe(w, idx, base.grad_prototypes.data()[idx], false);
  return worst;
}

}  // namespace protobank
