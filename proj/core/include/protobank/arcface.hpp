#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "protobank/matrix.hpp"

namespace protobank {

// Additive angular margin softmax. `margin` is radians added to the target
// angle; `scale` multiplies every cosine logit.
struct ArcFaceConfig {
  double margin = 0.5;
  double scale = 30.0;

  void validate() const;  // ConfigInvalid unless 0 <= margin < pi/2 and scale > 0

  friend bool operator==(const ArcFaceConfig&, const ArcFaceConfig&) = default;
};

struct LossResult {
  double loss = 0.0;        // mean over the batch
  Matrix grad_embeddings;   // B x D; rows masked out are exactly zero
  Matrix grad_prototypes;   // C x D
  Matrix logits;            // B x C scaled logits, margin applied in the label column
};

// Forward + backward in one pass.
//
// Per row i with target y: logits z_ij = s * cos(theta_ij) except
// z_iy = s * psi(cos(theta_iy)) where psi(c) = c*cos(m) - sqrt(1-c^2)*sin(m)
// (i.e. cos(theta+m)) while theta + m <= pi, and psi(c) = c - m*sin(m) past
// that bound. Cosines are clamped to [-1+1e-7, 1-1e-7] before psi; the
// softmax uses max-shifted log-sum-exp. Loss is the mean cross entropy.
//
// Gradients use psi'(c) = cos(m) + sin(m)*c/sqrt(1-c^2) on the main branch
// (1 on the fallback) and d cos/d e = w_hat/|e| - cos*e/|e|^2 (symmetric for
// w). `embedding_grad_mask`, when non-empty, must have one entry per batch
// row; rows with mask false still shape the loss but report an exactly zero
// embedding gradient (their prototype gradients are unaffected).
LossResult arcface_forward_backward(const Matrix& embeddings,
                                    const std::vector<std::int64_t>& labels,
                                    const Matrix& prototypes, const ArcFaceConfig& config,
                                    const std::vector<bool>& embedding_grad_mask = {});

// Fixture for gradient checking: unit-ish random embeddings and prototypes.
struct GradCheckInstance {
  Matrix embeddings;
  std::vector<std::int64_t> labels;
  Matrix prototypes;
};

GradCheckInstance make_gradcheck_instance(std::size_t batch, std::size_t classes,
                                          std::size_t dim, std::uint64_t seed);

// Max relative error between analytic gradients and central differences over
// every embedding and prototype coordinate. `step` must be in [1e-7, 1e-4].
// Relative error is |a - n| / max(1, |n|).
double gradient_check(const GradCheckInstance& instance, const ArcFaceConfig& config,
                      double step);

}  // namespace protobank
