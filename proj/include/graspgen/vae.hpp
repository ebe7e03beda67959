#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graspgen/dataset.hpp"
#include "graspgen/math_core.hpp"
#include "graspgen/objects.hpp"
#include "graspgen/rng.hpp"

namespace graspgen {

/// HGG generates grasps; QGG additionally predicts a quality for each.
enum class ModelKind { hgg, qgg };
const char* model_kind_name(ModelKind k);

/// Network widths. Defaults give about 12k trainable parameters. The
/// encoder main path runs (4 * subnet_width) -> hidden1 -> hidden2; the
/// decoder mirrors it: (2 * subnet_width) -> hidden1 -> (4 * subnet_width).
struct ArchSpec {
  int subnet_width = 16;
  int encoder_hidden1 = 32;
  int encoder_hidden2 = 32;
};

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double kl_weight = 1.0;
  /// Fraction of the epochs over which the KL weight ramps linearly from
  /// 0 to kl_weight. Without the warm-up a one-dimensional latent tends
  /// to collapse (the encoder means pinch to zero before the decoder
  /// starts using the latent). 0 disables the ramp.
  double kl_warmup_frac = 0.3;
  /// Free-bits floor in nats: during training each record's KL term
  /// contributes max(KL, floor), so posteriors inside the floor feel no
  /// KL pull. Keeps the latent informative; 0 disables it. Reported and
  /// evaluated losses always use the plain unfloored formula.
  double kl_free_bits = 0.35;
  std::uint64_t seed = 1;
};

/// Conditional VAE over normalized grasp records. The input splits into
/// per-field sub-networks (position, orientation, spread, tabletop plane);
/// the decoder is conditioned on the tabletop plane and emits the grasp
/// fields through sigmoid heads plus a quaternion normalizer. All
/// parameters live in one flat vector; the layer layout is derived from
/// (kind, arch) deterministically.
struct VaeModel {
  ModelKind kind = ModelKind::hgg;
  ArchSpec arch;
  NormStats stats;
  std::vector<double> params;
};

int param_count(ModelKind kind, const ArchSpec& arch);

/// Fresh model with Xavier-uniform weights and zero biases.
VaeModel make_model(ModelKind kind, const ArchSpec& arch, const NormStats& stats,
                    std::uint64_t seed);

struct Encoding {
  double mean = 0.0;
  double logvar = 0.0;  // clamped to [-10, 10]
};

/// Deterministic encoder pass on a record normalized with the model's
/// stats (layout as produced by normalize()).
Encoding encode(const VaeModel& model, const std::array<double, 12>& normalized);

/// l = mean + exp(logvar / 2) * eps with eps drawn from the rng. The
/// logvar is clamped to [-10, 10] first.
double reparameterize(double mean, double logvar, Rng& rng);

struct Decoded {
  /// Normalized record layout; the plane slots hold the conditioning
  /// plane unchanged, so the array feeds denormalize() directly.
  std::array<double, 12> fields{};
  /// Predicted quality in (0, 1); present iff the model is a QGG.
  std::optional<double> quality;
};

/// Decoder pass. The orientation head divides by the raw norm, so the
/// output quaternion is exactly unit; position and spread are sigmoids in
/// (0, 1) normalized space. Throws std::invalid_argument for a non-unit
/// plane normal and std::runtime_error when the raw quaternion is
/// degenerate (norm < 1e-12).
Decoded decode(const VaeModel& model, double latent, const PlaneEq& tabletop);

double kl_divergence(double mean, double logvar);

struct LossBreakdown {
  double total = 0.0;
  double position = 0.0;
  double orientation = 0.0;
  double spread = 0.0;
  double quality = 0.0;  // zero for HGG
  double kl = 0.0;
};

/// Deterministic loss at the mean latent (no sampling). Each scalar
/// output contributes its batch-averaged squared error; group fields sum
/// their components and total adds kl_weight times the mean KL
/// divergence. QGG batches must carry a quality on every record.
LossBreakdown vae_loss(const VaeModel& model, const std::vector<GraspRecord>& batch,
                       double kl_weight);

/// Loss with per-record latent noise eps (one value per record) and,
/// when grad is non-null, the exact analytic gradient of the total with
/// respect to every parameter (resized and overwritten).
LossBreakdown vae_loss_grad(const VaeModel& model, const std::vector<GraspRecord>& batch,
                            const std::vector<double>& eps, double kl_weight,
                            std::vector<double>* grad);

/// Trains a fresh model on the dataset (normalization stats are fitted
/// here and stored in the model). Returns the model and the per-epoch
/// mean total loss. Deterministic per cfg.seed. Throws on invalid
/// arguments, on QGG records without quality, and with a divergence
/// error naming the epoch if the loss stops being finite.
std::pair<VaeModel, std::vector<double>> train(ModelKind kind, const ArchSpec& arch,
                                               const GraspDataset& dataset,
                                               const TrainConfig& cfg);

enum class SampleMode { prior, sweep };

/// Draws n grasps for the given stable pose: prior mode samples l from
/// N(0, 1); sweep mode spaces l evenly over [sweep_lo, sweep_hi]. Decoded
/// fields are denormalized into records carrying the stable pose's plane
/// and id; QGG models fill each record's quality with the prediction.
std::vector<GraspRecord> sample_grasps(const VaeModel& model, const StablePose& stable, int n,
                                       SampleMode mode, Rng& rng, double sweep_lo = -4.5,
                                       double sweep_hi = 4.5);

/// Versioned JSON serialization. load_model checks the format and, when
/// `require` is set, that the stored kind matches; reloaded models decode
/// bit-identically.
void save_model(const VaeModel& model, const std::string& path);
VaeModel load_model(const std::string& path,
                    std::optional<ModelKind> require = std::nullopt);

}  // namespace graspgen
