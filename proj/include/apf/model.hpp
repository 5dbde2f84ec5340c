#pragma once

#include "apf/domain.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace apf {

/// Width of the per-action node feature vector.
inline constexpr int kNodeFeatures = 13;

/// Node features are lengths divided by this scale (m).
inline constexpr double kLengthScale = 0.1;

enum class Connectivity : std::uint8_t {
  TGN,   ///< node i receives from every j < i
  FCGN,  ///< every ordered pair j != i
};

/// Which quantity a model is trained to predict.
enum class ModelClass : std::uint8_t {
  Comp,  ///< whole-plan feasibility
  SS,    ///< per-step feasibility given a successful prefix
};

const char* to_string(Connectivity c);
const char* to_string(ModelClass c);
Connectivity connectivity_from_string(const std::string& s);
ModelClass model_class_from_string(const std::string& s);

struct ModelConfig {
  Connectivity connectivity = Connectivity::TGN;
  int hidden = 64;
  /// Plan readout: sigmoid(mean logits) when false, mean(sigmoid(logits)) when true.
  bool plan_mean_of_probs = false;
  /// Step readout: last node when false, plan readout of the prefix when true.
  bool step_uses_plan_readout = false;
  /// Message-passing rounds; the edge and update networks are shared across rounds.
  int rounds = 1;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Directed edges (sender, receiver) of an n-node graph.
std::vector<std::pair<int, int>> make_edges(Connectivity c, int n);

/// One feature column per action.
Eigen::MatrixXd encode(const Plan& plan);

/// Parameters of one graph network, stored as a single flat vector with typed
/// views into it.
///
/// Layout: node encoder (H x F, H), edge network split as sender and receiver
/// halves (H x H each, H), node update split as self and aggregate halves
/// (H x H each, H), readout (H, 1).
template <typename Scalar>
class GnnParams {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using MatMap = Eigen::Map<Matrix>;
  using ConstMatMap = Eigen::Map<const Matrix>;
  using VecMap = Eigen::Map<Vector>;
  using ConstVecMap = Eigen::Map<const Vector>;

  GnnParams() = default;
  explicit GnnParams(int hidden) : hidden_(hidden), flat_(Vector::Zero(size_for(hidden))) {}

  static Eigen::Index size_for(int hidden) {
    const Eigen::Index h = hidden;
    return h * kNodeFeatures + h + 2 * h * h + h + 2 * h * h + h + h + 1;
  }

  /// Glorot-uniform weights, zero biases.
  static GnnParams glorot(int hidden, Rng& rng);

  int hidden() const { return hidden_; }
  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }

  ConstMatMap enc_w() const { return {ptr(0), hidden_, kNodeFeatures}; }
  ConstVecMap enc_b() const { return {ptr(off_enc_b()), hidden_}; }
  ConstMatMap send_w() const { return {ptr(off_send()), hidden_, hidden_}; }
  ConstMatMap recv_w() const { return {ptr(off_recv()), hidden_, hidden_}; }
  ConstVecMap msg_b() const { return {ptr(off_msg_b()), hidden_}; }
  ConstMatMap self_w() const { return {ptr(off_self()), hidden_, hidden_}; }
  ConstMatMap agg_w() const { return {ptr(off_agg()), hidden_, hidden_}; }
  ConstVecMap upd_b() const { return {ptr(off_upd_b()), hidden_}; }
  ConstVecMap out_w() const { return {ptr(off_out()), hidden_}; }
  Scalar out_b() const { return flat_(off_out() + hidden_); }

  MatMap enc_w() { return {mptr(0), hidden_, kNodeFeatures}; }
  VecMap enc_b() { return {mptr(off_enc_b()), hidden_}; }
  MatMap send_w() { return {mptr(off_send()), hidden_, hidden_}; }
  MatMap recv_w() { return {mptr(off_recv()), hidden_, hidden_}; }
  VecMap msg_b() { return {mptr(off_msg_b()), hidden_}; }
  MatMap self_w() { return {mptr(off_self()), hidden_, hidden_}; }
  MatMap agg_w() { return {mptr(off_agg()), hidden_, hidden_}; }
  VecMap upd_b() { return {mptr(off_upd_b()), hidden_}; }
  VecMap out_w() { return {mptr(off_out()), hidden_}; }
  Scalar& out_b() { return flat_(off_out() + hidden_); }

  bool finite() const { return flat_.allFinite(); }

 private:
  Eigen::Index h() const { return hidden_; }
  Eigen::Index off_enc_b() const { return h() * kNodeFeatures; }
  Eigen::Index off_send() const { return off_enc_b() + h(); }
  Eigen::Index off_recv() const { return off_send() + h() * h(); }
  Eigen::Index off_msg_b() const { return off_recv() + h() * h(); }
  Eigen::Index off_self() const { return off_msg_b() + h(); }
  Eigen::Index off_agg() const { return off_self() + h() * h(); }
  Eigen::Index off_upd_b() const { return off_agg() + h() * h(); }
  Eigen::Index off_out() const { return off_upd_b() + h(); }
  const Scalar* ptr(Eigen::Index off) const { return flat_.data() + off; }
  Scalar* mptr(Eigen::Index off) { return flat_.data() + off; }

  int hidden_ = 0;
  Vector flat_;
};

using GnnParamsd = GnnParams<double>;

/// Several graphs packed side by side: node columns are concatenated and the
/// edges carry global column indices.
struct GraphBatch {
  Eigen::MatrixXd features;                // F x total_nodes
  std::vector<std::pair<int, int>> edges;  // (sender, receiver)
  std::vector<int> offsets;                // first column of each graph
  std::vector<int> sizes;

  std::size_t graphs() const { return sizes.size(); }
  int total_nodes() const { return static_cast<int>(features.cols()); }

  void add(const Eigen::MatrixXd& graph_features, Connectivity c);
  static GraphBatch from_plans(std::span<const Plan> plans, Connectivity c);
};

/// Per-node readout logits for every graph in the batch.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> node_logits(const GnnParams<Scalar>& params, const GraphBatch& batch,
                                                     int rounds = 1);

struct ForwardOutput {
  std::vector<double> node_probs;
  double plan_prob = 0.0;
};

/// Single-graph forward pass.
ForwardOutput forward(const GnnParamsd& params, const Plan& plan, const ModelConfig& cfg);

/// Plan-level probability from one graph's node logits.
double plan_readout(std::span<const double> logits, const ModelConfig& cfg);

struct TrainItem {
  Plan plan;
  bool label = false;
  ModelClass model_class = ModelClass::SS;
};

/// Pre-encoded training example.
struct EncodedItem {
  Eigen::MatrixXd features;
  double label = 0.0;
  ModelClass model_class = ModelClass::SS;
};

EncodedItem encode_item(const TrainItem& item);

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy over the batch and its exact gradient.
std::pair<double, Eigen::VectorXd> bce_loss_and_grad(const GnnParamsd& params, std::span<const EncodedItem> items,
                                                     const ModelConfig& cfg);
std::pair<double, Eigen::VectorXd> bce_loss_and_grad(const GnnParamsd& params, std::span<const TrainItem> items,
                                                     const ModelConfig& cfg);
/// Loss only.
double bce_loss(const GnnParamsd& params, std::span<const EncodedItem> items, const ModelConfig& cfg);

/// N independently initialized networks.
struct Ensemble {
  ModelConfig config;
  std::vector<GnnParamsd> members;

  std::size_t size() const { return members.size(); }
  /// Member i is seeded from (seed, i).
  static Ensemble create(const ModelConfig& cfg, std::size_t n, std::uint64_t seed);
};

/// Per-member plan-level probabilities.
std::vector<double> member_plan_probs(const Ensemble& ens, const Plan& plan);

/// N x n matrix: entry (m, i) is member m's probability that step i+1
/// succeeds given the prefix succeeded. Column 0 is exactly 1.
Eigen::MatrixXd member_step_probs(const Ensemble& ens, const Plan& plan);

/// Batched versions over many plans.
std::vector<std::vector<double>> member_plan_probs(const Ensemble& ens, std::span<const Plan> plans);
std::vector<Eigen::MatrixXd> member_step_probs(const Ensemble& ens, std::span<const Plan> plans);

double predict_comp(const Ensemble& ens, const Plan& plan);
/// Ensemble-mean probability that the last action of `prefix` succeeds.
double predict_step(const Ensemble& ens, const Plan& prefix);
/// Product of predict_step over every prefix.
double plan_feasibility_ss(const Ensemble& ens, const Plan& plan);
double plan_feasibility_ss(const Eigen::MatrixXd& member_steps);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Worker threads for member-parallel training.
  int threads = 1;

  void validate() const;
};

struct MemberTrainLog {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double final_val_loss = 0.0;
};

/// Trains one network with Adam and best-checkpoint early stopping. Epoch 0 is
/// the starting point, so the result is never worse on validation than the
/// input.
MemberTrainLog train_member(GnnParamsd& params, const ModelConfig& mcfg, std::span<const EncodedItem> train_set,
                            std::span<const EncodedItem> val_set, const TrainConfig& cfg, std::uint64_t member_seed);

std::vector<MemberTrainLog> train(Ensemble& ens, std::span<const TrainItem> train_set,
                                  std::span<const TrainItem> val_set, const TrainConfig& cfg);

/// Original plus its 90, 180 and 270 degree global rotations; labels copied.
std::vector<LabeledPlan> augment(const LabeledPlan& lp);

}  // namespace apf
