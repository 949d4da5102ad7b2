#include "protobank/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "detail/dot_kernel.hpp"
#include "protobank/errors.hpp"
#include "protobank/rng.hpp"

namespace protobank {

namespace {

void check_bank_matrix(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i)
    if (!std::isfinite(m.data()[i])) throw NonFiniteInput("prototype bank");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double n = std::sqrt(detail::dot_pair(m.row(i), m.row(i), m.cols()));
    if (n <= 1e-12) throw ZeroNormRow(i, "prototype bank");
  }
}

Matrix copy_rows(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(count, m.cols());
  for (std::size_t i = 0; i < count; ++i)
    std::copy(m.row(begin + i), m.row(begin + i) + m.cols(), out.row(i));
  return out;
}

}  // namespace

PrototypeBank::PrototypeBank(Matrix matrix, std::size_t n_real, std::size_t k_virtual)
    : matrix_(std::move(matrix)), n_real_(n_real), k_virtual_(k_virtual) {
  if (matrix_.rows() != n_real_ + k_virtual_)
    throw LengthMismatch("prototype rows", matrix_.rows(), n_real_ + k_virtual_);
  if (n_real_ < 1) throw ValidationError("bank needs n_real >= 1");
  if (matrix_.cols() < 1) throw ValidationError("bank needs dim >= 1");
  check_bank_matrix(matrix_);
}

PrototypeBank PrototypeBank::random_init(std::size_t n_real, std::size_t k_virtual,
                                         std::size_t dim, std::uint64_t seed) {
  Matrix m(n_real + k_virtual, dim);
  auto eng = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double inv = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) m.data()[i] = normal(eng) * inv;
  return PrototypeBank(std::move(m), n_real, k_virtual);
}

Matrix PrototypeBank::real_rows() const { return copy_rows(matrix_, 0, n_real_); }

Matrix PrototypeBank::virtual_rows() const { return copy_rows(matrix_, n_real_, k_virtual_); }

SigmaTracker::SigmaTracker(std::size_t dim, double alpha) : sigma_(dim, 0.0), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigInvalid("alpha must be in (0, 1]");
  if (dim < 1) throw ValidationError("tracker needs dim >= 1");
}

SigmaTracker::SigmaTracker(std::vector<double> sigma, double alpha, std::uint64_t iteration)
    : sigma_(std::move(sigma)), alpha_(alpha), iteration_(iteration) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigInvalid("alpha must be in (0, 1]");
  if (sigma_.empty()) throw ValidationError("tracker needs dim >= 1");
  for (double v : sigma_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("sigma entries must be >= 0");
}

void SigmaTracker::ema_update(const std::vector<double>& batch_sigma) {
  if (batch_sigma.size() != sigma_.size())
    throw LengthMismatch("batch_sigma", batch_sigma.size(), sigma_.size());
  for (double v : batch_sigma)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("sigma entries must be >= 0 and finite");
  if (iteration_ == 0) {
    sigma_ = batch_sigma;
  } else {
    for (std::size_t d = 0; d < sigma_.size(); ++d)
      sigma_[d] = alpha_ * batch_sigma[d] + (1.0 - alpha_) * sigma_[d];
  }
  ++iteration_;
}

std::size_t virtual_batch_size(std::size_t n_real, std::size_t k_virtual,
                               std::size_t batch_real) {
  if (n_real < 1) throw ValidationError("virtual_batch_size needs n_real >= 1");
  if (batch_real < 1) throw ValidationError("virtual_batch_size needs batch_real >= 1");
  if (k_virtual == 0) return 0;
  double exact = static_cast<double>(k_virtual) * static_cast<double>(batch_real) /
                 static_cast<double>(n_real);
  auto rounded = static_cast<std::size_t>(std::llround(exact));
  return std::max<std::size_t>(1, rounded);
}

std::vector<double> batch_residual_sigma(const Matrix& embeddings,
                                         const std::vector<std::int64_t>& labels,
                                         const PrototypeBank& bank) {
  std::size_t batch = embeddings.rows(), dim = embeddings.cols();
  if (batch == 0) throw ValidationError("batch must be non-empty");
  if (dim != bank.dim()) throw DimensionMismatch(dim, bank.dim());
  if (labels.size() != batch) throw LengthMismatch("labels", labels.size(), batch);
  for (std::int64_t y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= bank.n_real())
      throw LabelOutOfRange(y, static_cast<long long>(bank.n_real()));

  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* e = embeddings.row(i);
    const double* w = bank.matrix().row(static_cast<std::size_t>(labels[i]));
    for (std::size_t d = 0; d < dim; ++d) {
      double r = e[d] - w[d];
      acc[d] += r * r;
    }
  }
  for (std::size_t d = 0; d < dim; ++d)
    acc[d] = std::sqrt(acc[d] / static_cast<double>(batch));
  return acc;
}

namespace {

Matrix synth_with_sigma(const PrototypeBank& bank, const std::vector<double>& sigma,
                        const std::vector<std::int64_t>& virtual_ids, std::uint64_t seed) {
  Matrix out(virtual_ids.size(), bank.dim());
  auto eng = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < virtual_ids.size(); ++i) {
    std::int64_t id = virtual_ids[i];
    if (id < static_cast<std::int64_t>(bank.n_real()) ||
        id >= static_cast<std::int64_t>(bank.rows()))
      throw LabelOutOfRange(id, static_cast<long long>(bank.rows()));
    const double* w = bank.matrix().row(static_cast<std::size_t>(id));
    double* o = out.row(i);
    for (std::size_t d = 0; d < bank.dim(); ++d) o[d] = w[d] + normal(eng) * sigma[d];
  }
  return out;
}

}  // namespace

Matrix synth_virtual_embeddings(const PrototypeBank& bank, const SigmaTracker& tracker,
                                const std::vector<std::int64_t>& virtual_ids,
                                std::uint64_t seed) {
  if (!tracker.initialized()) throw TrackerUninitialized();
  if (tracker.sigma().size() != bank.dim())
    throw DimensionMismatch(tracker.sigma().size(), bank.dim());
  return synth_with_sigma(bank, tracker.sigma(), virtual_ids, seed);
}

double LearningRateSchedule::at(std::uint64_t iteration) const {
  double lr = initial;
  for (std::uint64_t t : decay_iterations)
    if (t <= iteration) lr *= decay_factor;
  return lr;
}

void LearningRateSchedule::validate() const {
  if (!(initial > 0.0) || !std::isfinite(initial))
    throw ConfigInvalid("learning rate must be > 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0))
    throw ConfigInvalid("decay_factor must be in (0, 1]");
  for (std::size_t i = 1; i < decay_iterations.size(); ++i)
    if (decay_iterations[i] <= decay_iterations[i - 1])
      throw ConfigInvalid("decay_iterations must be strictly increasing");
}

void TrainRunConfig::validate() const {
  lr.validate();
  ArcFaceConfig{margin, scale}.validate();
  if (batch_real < 1) throw ConfigInvalid("batch_real must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigInvalid("momentum must be in [0, 1)");
  if (!(sigma_alpha > 0.0 && sigma_alpha <= 1.0))
    throw ConfigInvalid("sigma_alpha must be in (0, 1]");
  if (checkpoint_interval < 1) throw ConfigInvalid("checkpoint_interval must be >= 1");
}

ComposedBatch compose_stage1_batch(const PrototypeBank& bank, const SigmaTracker& tracker,
                                   const Matrix& real_embeddings,
                                   const std::vector<std::int64_t>& real_labels,
                                   const TrainRunConfig& config, std::uint64_t step_seed) {
  std::size_t b_r = real_embeddings.rows(), dim = real_embeddings.cols();
  if (b_r == 0) throw ValidationError("real batch must be non-empty");
  if (dim != bank.dim()) throw DimensionMismatch(dim, bank.dim());
  if (real_labels.size() != b_r) throw LengthMismatch("real_labels", real_labels.size(), b_r);

  // The ablation removes virtual sample rows altogether: virtual prototypes
  // then receive gradients only as negative classes of the real rows, the
  // regime where they all drift to one direction.
  std::size_t b_v = config.ablation_no_virtual_embeddings
                        ? 0
                        : virtual_batch_size(bank.n_real(), bank.k_virtual(), b_r);
  ComposedBatch out;
  out.embeddings = Matrix(b_r + b_v, dim);
  out.labels.resize(b_r + b_v);
  out.grad_mask.assign(b_r + b_v, true);
  for (std::size_t i = 0; i < b_r; ++i) {
    std::copy(real_embeddings.row(i), real_embeddings.row(i) + dim, out.embeddings.row(i));
    out.labels[i] = real_labels[i];
  }
  if (b_v == 0) return out;

  // Draw virtual ids: a partial shuffle when they fit without replacement,
  // uniform draws otherwise.
  auto id_eng = make_engine(derive_seed(step_seed, 0));
  std::size_t k = bank.k_virtual();
  out.virtual_ids.resize(b_v);
  if (b_v <= k) {
    std::vector<std::int64_t> pool(k);
    for (std::size_t i = 0; i < k; ++i) pool[i] = static_cast<std::int64_t>(bank.n_real() + i);
    for (std::size_t i = 0; i < b_v; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, k - 1);
      std::swap(pool[i], pool[pick(id_eng)]);
      out.virtual_ids[i] = pool[i];
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    for (std::size_t i = 0; i < b_v; ++i)
      out.virtual_ids[i] = static_cast<std::int64_t>(bank.n_real() + pick(id_eng));
  }

  Matrix synth =
      synth_virtual_embeddings(bank, tracker, out.virtual_ids, derive_seed(step_seed, 1));
  for (std::size_t i = 0; i < b_v; ++i) {
    std::copy(synth.row(i), synth.row(i) + dim, out.embeddings.row(b_r + i));
    out.labels[b_r + i] = out.virtual_ids[i];
    out.grad_mask[b_r + i] = false;
  }
  return out;
}

Stage1Trainer::Stage1Trainer(PrototypeBank bank, TrainRunConfig config)
    : bank_(std::move(bank)), tracker_(bank_.dim(), config.sigma_alpha),
      config_(std::move(config)), velocity_(bank_.rows(), bank_.dim()) {
  config_.validate();
  if (bank_.k_virtual() != config_.k_virtual)
    throw ConfigInvalid("bank k_virtual does not match config");
}

void Stage1Trainer::replace_state(PrototypeBank bank, SigmaTracker tracker) {
  if (bank.dim() != bank_.dim() || bank.rows() != bank_.rows())
    throw DimensionMismatch(bank.dim(), bank_.dim());
  if (tracker.sigma().size() != bank.dim())
    throw DimensionMismatch(tracker.sigma().size(), bank.dim());
  bank_ = std::move(bank);
  tracker_ = std::move(tracker);
  velocity_ = Matrix(bank_.rows(), bank_.dim());
}

double Stage1Trainer::step(const Matrix& real_embeddings,
                           const std::vector<std::int64_t>& real_labels,
                           std::uint64_t step_seed) {
  tracker_.ema_update(batch_residual_sigma(real_embeddings, real_labels, bank_));
  ComposedBatch batch = compose_stage1_batch(bank_, tracker_, real_embeddings, real_labels,
                                             config_, step_seed);
  LossResult res = arcface_forward_backward(batch.embeddings, batch.labels, bank_.matrix(),
                                            ArcFaceConfig{config_.margin, config_.scale},
                                            batch.grad_mask);
  double lr = config_.lr.at(iteration_);
  double mu = config_.momentum;
  double* v = velocity_.data();
  double* w = bank_.matrix().data();
  const double* g = res.grad_prototypes.data();
  for (std::size_t i = 0; i < bank_.rows() * bank_.dim(); ++i) {
    v[i] = mu * v[i] + g[i];
    w[i] -= lr * v[i];
  }
  ++iteration_;
  return res.loss;
}

CheckpointStats bank_similarity_stats(const PrototypeBank& bank, std::uint64_t iteration,
                                      double loss, double learning_rate) {
  CheckpointStats st;
  st.iteration = iteration;
  st.loss = loss;
  st.learning_rate = learning_rate;
  double nan = std::nan("");
  st.real_real = st.real_virtual = st.virtual_virtual = CosineStats{nan, nan};
  Matrix real = bank.real_rows();
  if (bank.n_real() >= 2) st.real_real = cosine_stats(real, real, true);
  if (bank.k_virtual() >= 1) {
    Matrix virt = bank.virtual_rows();
    st.real_virtual = cosine_stats(real, virt, false);
    if (bank.k_virtual() >= 2) st.virtual_virtual = cosine_stats(virt, virt, true);
  }
  return st;
}

TrainReport train_stage1(const LabeledEmbeddingSet& data, const TrainRunConfig& config) {
  config.validate();
  PrototypeBank bank = PrototypeBank::random_init(
      static_cast<std::size_t>(data.class_count()), config.k_virtual, data.dim(),
      derive_seed(config.seed, 0xB0A71));
  return train_stage1(data, config, std::move(bank),
                      SigmaTracker(data.dim(), config.sigma_alpha));
}

TrainReport train_stage1(const LabeledEmbeddingSet& data, const TrainRunConfig& config,
                         PrototypeBank resume_bank, SigmaTracker resume_tracker) {
  config.validate();
  if (resume_bank.n_real() != static_cast<std::size_t>(data.class_count()))
    throw ConfigInvalid("bank n_real must equal the dataset class count");
  if (resume_bank.dim() != data.dim())
    throw DimensionMismatch(resume_bank.dim(), data.dim());

  Stage1Trainer trainer(std::move(resume_bank), config);
  if (resume_tracker.initialized()) {
    PrototypeBank b = trainer.bank();
    trainer.replace_state(std::move(b), std::move(resume_tracker));
  }

  TrainReport report{{},
                     trainer.bank(),
                     trainer.tracker()};
  report.checkpoints.push_back(
      bank_similarity_stats(trainer.bank(), 0, std::nan(""), config.lr.at(0)));

  std::size_t rows = data.size();
  if (rows == 0) throw ValidationError("training dataset is empty");
  Matrix batch_emb(config.batch_real, data.dim());
  std::vector<std::int64_t> batch_labels(config.batch_real);
  for (std::uint64_t t = 0; t < config.iterations; ++t) {
    auto data_eng = make_engine(derive_seed(config.seed, 2 * t));
    std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
    for (std::size_t i = 0; i < config.batch_real; ++i) {
      std::size_t r = pick(data_eng);
      std::copy(data.matrix().row(r), data.matrix().row(r) + data.dim(), batch_emb.row(i));
      batch_labels[i] = data.labels()[r];
    }
    double loss = trainer.step(batch_emb, batch_labels, derive_seed(config.seed, 2 * t + 1));
    bool last = (t + 1 == config.iterations);
    if ((t + 1) % config.checkpoint_interval == 0 || last) {
      CheckpointStats st = bank_similarity_stats(trainer.bank(), t + 1, loss,
                                                 config.lr.at(t));
      if (report.checkpoints.empty() || report.checkpoints.back().iteration != st.iteration)
        report.checkpoints.push_back(st);
    }
  }
  report.bank = trainer.bank();
  report.tracker = trainer.tracker();
  return report;
}

}  // namespace protobank
