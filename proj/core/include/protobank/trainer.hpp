#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "protobank/arcface.hpp"
#include "protobank/embedding.hpp"
#include "protobank/matrix.hpp"

namespace protobank {

// (n_real + k_virtual) x D prototype rows; the first n_real rows belong to
// real classes, the rest to virtual ones. Rows are finite and never
// zero-norm; they are not kept unit-norm during training (gradients are
// tangential, norms only grow).
class PrototypeBank {
 public:
  PrototypeBank(Matrix matrix, std::size_t n_real, std::size_t k_virtual);

  // Entries drawn N(0, 1)/sqrt(dim).
  static PrototypeBank random_init(std::size_t n_real, std::size_t k_virtual, std::size_t dim,
                                   std::uint64_t seed);

  const Matrix& matrix() const { return matrix_; }
  Matrix& matrix() { return matrix_; }
  std::size_t n_real() const { return n_real_; }
  std::size_t k_virtual() const { return k_virtual_; }
  std::size_t rows() const { return matrix_.rows(); }
  std::size_t dim() const { return matrix_.cols(); }

  Matrix real_rows() const;     // copy of rows [0, n_real)
  Matrix virtual_rows() const;  // copy of rows [n_real, n_real + k_virtual)

 private:
  Matrix matrix_;
  std::size_t n_real_ = 0;
  std::size_t k_virtual_ = 0;
};

// Exponentially averaged per-dimension residual spread of real embeddings
// around their prototypes. The first update copies the batch value; later
// updates blend sigma_new = alpha * sigma_batch + (1 - alpha) * sigma_old.
class SigmaTracker {
 public:
  explicit SigmaTracker(std::size_t dim, double alpha = 0.9);
  SigmaTracker(std::vector<double> sigma, double alpha, std::uint64_t iteration);

  const std::vector<double>& sigma() const { return sigma_; }
  double alpha() const { return alpha_; }
  std::uint64_t iteration() const { return iteration_; }
  bool initialized() const { return iteration_ > 0; }

  void ema_update(const std::vector<double>& batch_sigma);

 private:
  std::vector<double> sigma_;
  double alpha_ = 0.9;
  std::uint64_t iteration_ = 0;
};

// Virtual rows per step: 0 when k == 0, else round(k * b_r / n) floored at 1.
std::size_t virtual_batch_size(std::size_t n_real, std::size_t k_virtual, std::size_t batch_real);

// Per-dimension residual spread of a real batch around its class prototypes:
// sigma_d = sqrt(mean_i (e_id - w_{y_i, d})^2). Labels index bank real rows.
std::vector<double> batch_residual_sigma(const Matrix& embeddings,
                                         const std::vector<std::int64_t>& labels,
                                         const PrototypeBank& bank);

// One synthetic embedding per entry of virtual_ids (ids are bank-relative,
// in [n_real, n_real + k_virtual)): row = prototype + N(0,1) * sigma,
// element-wise. Requires an initialized tracker.
Matrix synth_virtual_embeddings(const PrototypeBank& bank, const SigmaTracker& tracker,
                                const std::vector<std::int64_t>& virtual_ids,
                                std::uint64_t seed);

// Piecewise-constant step decay: lr(t) = initial * factor^(#decay points <= t).
struct LearningRateSchedule {
  double initial = 0.1;
  std::vector<std::uint64_t> decay_iterations;  // strictly increasing
  double decay_factor = 0.1;                    // in (0, 1]

  double at(std::uint64_t iteration) const;
  void validate() const;

  friend bool operator==(const LearningRateSchedule&, const LearningRateSchedule&) = default;
};

struct TrainRunConfig {
  std::size_t k_virtual = 0;
  std::size_t batch_real = 128;
  std::uint64_t iterations = 2000;
  LearningRateSchedule lr;
  double momentum = 0.9;
  double margin = 0.5;
  double scale = 30.0;
  double sigma_alpha = 0.9;
  bool ablation_no_virtual_embeddings = false;  // drop virtual sample rows entirely
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_interval = 100;

  void validate() const;

  friend bool operator==(const TrainRunConfig&, const TrainRunConfig&) = default;
};

// The batch a training step feeds to the loss: real embeddings stacked on
// synthesized virtual ones. Virtual rows carry mask false (their "feature"
// is a sample, not a learnable input) and labels pointing at virtual rows.
// With ablation_no_virtual_embeddings set no virtual rows are added at all, so
// virtual prototypes are updated only as negative classes — the regime where
// they collapse toward a single direction.
struct ComposedBatch {
  Matrix embeddings;
  std::vector<std::int64_t> labels;
  std::vector<bool> grad_mask;
  std::vector<std::int64_t> virtual_ids;
};

// Deterministic batch composition given the tracker state after this step's
// sigma update. Virtual ids are drawn without replacement when b_v <= k.
ComposedBatch compose_stage1_batch(const PrototypeBank& bank, const SigmaTracker& tracker,
                                   const Matrix& real_embeddings,
                                   const std::vector<std::int64_t>& real_labels,
                                   const TrainRunConfig& config, std::uint64_t step_seed);

// Joint real+virtual prototype training: sigma EMA update, batch
// composition, margin loss, momentum SGD on the prototype rows.
class Stage1Trainer {
 public:
  Stage1Trainer(PrototypeBank bank, TrainRunConfig config);

  // One step on the given real batch; returns the batch loss.
  double step(const Matrix& real_embeddings, const std::vector<std::int64_t>& real_labels,
              std::uint64_t step_seed);

  const PrototypeBank& bank() const { return bank_; }
  const SigmaTracker& tracker() const { return tracker_; }
  std::uint64_t iteration() const { return iteration_; }

  void replace_state(PrototypeBank bank, SigmaTracker tracker);  // resume support

 private:
  PrototypeBank bank_;
  SigmaTracker tracker_;
  TrainRunConfig config_;
  Matrix velocity_;
  std::uint64_t iteration_ = 0;
};

struct CheckpointStats {
  std::uint64_t iteration = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
  CosineStats real_real;        // off-diagonal pairs among real prototypes
  CosineStats real_virtual;     // all real x virtual pairs
  CosineStats virtual_virtual;  // off-diagonal pairs among virtual prototypes
};

struct TrainReport {
  std::vector<CheckpointStats> checkpoints;  // iteration strictly increasing
  PrototypeBank bank;
  SigmaTracker tracker;
};

CheckpointStats bank_similarity_stats(const PrototypeBank& bank, std::uint64_t iteration,
                                      double loss, double learning_rate);

// Full run over a labeled real dataset: random bank init (or the provided
// `resume` state), per-step uniform-with-replacement real batches, stats
// recorded at every checkpoint_interval and at the final iteration.
TrainReport train_stage1(const LabeledEmbeddingSet& data, const TrainRunConfig& config);
TrainReport train_stage1(const LabeledEmbeddingSet& data, const TrainRunConfig& config,
                         PrototypeBank resume_bank, SigmaTracker resume_tracker);

}  // namespace protobank
