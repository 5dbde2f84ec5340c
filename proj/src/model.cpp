#include "apf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace apf {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Rng seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

template <typename Scalar>
void fill_glorot(Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> w, int fan_in, int fan_out,
                 Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(u(rng));
}

/// Intermediate activations kept for the backward pass.
struct Round {
  Eigen::MatrixXd messages;  // H x E, after tanh
  Eigen::MatrixXd agg;       // H x N
  Eigen::MatrixXd out;       // H x N, after tanh
};

struct Activations {
  Eigen::MatrixXd embed;  // H x N, after tanh
  std::vector<Round> rounds;
  Eigen::RowVectorXd logits;

  const Eigen::MatrixXd& input_of(std::size_t r) const { return r == 0 ? embed : rounds[r - 1].out; }
};

Activations run_forward(const GnnParamsd& p, const GraphBatch& batch, int rounds) {
  Activations a;
  const Eigen::Index n = batch.total_nodes();
  const Eigen::Index h = p.hidden();
  a.embed = ((p.enc_w() * batch.features).colwise() + p.enc_b()).array().tanh().matrix();
  a.rounds.resize(static_cast<std::size_t>(rounds));
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    const Eigen::MatrixXd& x = a.input_of(r);
    Round& rd = a.rounds[r];
    const Eigen::MatrixXd send = p.send_w() * x;
    Eigen::MatrixXd recv = p.recv_w() * x;
    recv.colwise() += p.msg_b();
    rd.messages.resize(h, static_cast<Eigen::Index>(batch.edges.size()));
    rd.agg = Eigen::MatrixXd::Zero(h, n);
    for (std::size_t e = 0; e < batch.edges.size(); ++e) {
      const auto [s, t] = batch.edges[e];
      const auto ei = static_cast<Eigen::Index>(e);
      rd.messages.col(ei) = (send.col(s) + recv.col(t)).array().tanh();
      rd.agg.col(t) += rd.messages.col(ei);
    }
    rd.out = (((p.self_w() * x + p.agg_w() * rd.agg).colwise() + p.upd_b()).array().tanh()).matrix();
  }
  a.logits = (p.out_w().transpose() * a.input_of(a.rounds.size())).array() + p.out_b();
  return a;
}

/// Backpropagates d(loss)/d(logits) through the network into `grad`.
void run_backward(const GnnParamsd& p, const GraphBatch& batch, const Activations& a,
                  const Eigen::RowVectorXd& dlogits, Eigen::VectorXd& grad) {
  GnnParamsd g(p.hidden());
  const Eigen::MatrixXd& top = a.input_of(a.rounds.size());
  g.out_b() = dlogits.sum();
  g.out_w() = top * dlogits.transpose();
  Eigen::MatrixXd dx = p.out_w() * dlogits;

  const Eigen::Index h = p.hidden();
  for (std::size_t r = a.rounds.size(); r-- > 0;) {
    const Round& rd = a.rounds[r];
    const Eigen::MatrixXd& x = a.input_of(r);
    const Eigen::MatrixXd dupd_pre = (dx.array() * (1.0 - rd.out.array().square())).matrix();
    g.self_w() += dupd_pre * x.transpose();
    g.agg_w() += dupd_pre * rd.agg.transpose();
    g.upd_b() += dupd_pre.rowwise().sum();
    dx = p.self_w().transpose() * dupd_pre;
    const Eigen::MatrixXd dagg = p.agg_w().transpose() * dupd_pre;

    Eigen::MatrixXd dsend = Eigen::MatrixXd::Zero(h, batch.total_nodes());
    Eigen::MatrixXd drecv = Eigen::MatrixXd::Zero(h, batch.total_nodes());
    for (std::size_t e = 0; e < batch.edges.size(); ++e) {
      const auto [s, t] = batch.edges[e];
      const auto ei = static_cast<Eigen::Index>(e);
      const Eigen::VectorXd dpre = (dagg.col(t).array() * (1.0 - rd.messages.col(ei).array().square())).matrix();
      dsend.col(s) += dpre;
      drecv.col(t) += dpre;
    }
    g.msg_b() += drecv.rowwise().sum();
    g.send_w() += dsend * x.transpose();
    g.recv_w() += drecv * x.transpose();
    dx.noalias() += p.send_w().transpose() * dsend;
    dx.noalias() += p.recv_w().transpose() * drecv;
  }

  const Eigen::MatrixXd denc_pre = (dx.array() * (1.0 - a.embed.array().square())).matrix();
  g.enc_w() = denc_pre * batch.features.transpose();
  g.enc_b() = denc_pre.rowwise().sum();
  grad += g.flat();
}

struct Prediction {
  double prob = 0.5;
  // d(prob)/d(logit_k) for each node of the graph.
  Eigen::RowVectorXd dprob;
};

// Probability targeted by a training item, from one graph's node logits.
Prediction item_prediction(const Eigen::Ref<const Eigen::RowVectorXd>& logits, ModelClass cls,
                           const ModelConfig& cfg) {
  const Eigen::Index n = logits.size();
  Prediction out;
  out.dprob = Eigen::RowVectorXd::Zero(n);
  const bool plan_readout = cls == ModelClass::Comp || cfg.step_uses_plan_readout;
  if (!plan_readout) {
    out.prob = sigmoid(logits(n - 1));
    out.dprob(n - 1) = out.prob * (1.0 - out.prob);
  } else if (cfg.plan_mean_of_probs) {
    out.prob = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double s = sigmoid(logits(k));
      out.prob += s / static_cast<double>(n);
      out.dprob(k) = s * (1.0 - s) / static_cast<double>(n);
    }
  } else {
    out.prob = sigmoid(logits.mean());
    out.dprob.setConstant(out.prob * (1.0 - out.prob) / static_cast<double>(n));
  }
  return out;
}

using ItemRefs = std::vector<const EncodedItem*>;

ItemRefs refs_of(std::span<const EncodedItem> items) {
  ItemRefs out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(&it);
  return out;
}

GraphBatch batch_of(const ItemRefs& items, Connectivity c) {
  GraphBatch b;
  Eigen::Index total = 0;
  for (const auto* it : items) total += it->features.cols();
  b.features.resize(kNodeFeatures, total);
  int offset = 0;
  for (const auto* it : items) {
    const int n = static_cast<int>(it->features.cols());
    b.features.middleCols(offset, n) = it->features;
    for (auto [s, r] : make_edges(c, n)) b.edges.emplace_back(s + offset, r + offset);
    b.offsets.push_back(offset);
    b.sizes.push_back(n);
    offset += n;
  }
  return b;
}

double loss_impl(const GnnParamsd& params, const ItemRefs& items, const ModelConfig& cfg, Eigen::VectorXd* grad) {
  if (items.empty()) return 0.0;
  const GraphBatch batch = batch_of(items, cfg.connectivity);
  const Activations act = run_forward(params, batch, cfg.rounds);
  const double scale = 1.0 / static_cast<double>(items.size());
  Eigen::RowVectorXd dlogits = Eigen::RowVectorXd::Zero(batch.total_nodes());
  double loss = 0.0;
  for (std::size_t g = 0; g < items.size(); ++g) {
    const auto& item = *items[g];
    const Prediction pred = item_prediction(act.logits.segment(batch.offsets[g], batch.sizes[g]), item.model_class, cfg);
    const double p = std::clamp(pred.prob, kProbClamp, 1.0 - kProbClamp);
    loss -= scale * (item.label * std::log(p) + (1.0 - item.label) * std::log(1.0 - p));
    if (grad && p == pred.prob) {
      const double dl_dp = scale * (p - item.label) / (p * (1.0 - p));
      dlogits.segment(batch.offsets[g], batch.sizes[g]) = dl_dp * pred.dprob;
    }
  }
  if (grad) {
    *grad = Eigen::VectorXd::Zero(params.flat().size());
    run_backward(params, batch, act, dlogits, *grad);
  }
  return loss;
}

// Step-probability matrices for plans whose steps are read from the last node
// of each prefix graph. TGN is causal (node i only hears from j < i), so one
// pass over the full plan yields every prefix's last-node output.
bool causal_steps(const ModelConfig& cfg) {
  return cfg.connectivity == Connectivity::TGN && !cfg.step_uses_plan_readout;
}

}  // namespace

const char* to_string(Connectivity c) { return c == Connectivity::TGN ? "tgn" : "fcgn"; }
const char* to_string(ModelClass c) { return c == ModelClass::Comp ? "comp" : "ss"; }

Connectivity connectivity_from_string(const std::string& s) {
  if (s == "tgn") return Connectivity::TGN;
  if (s == "fcgn") return Connectivity::FCGN;
  throw ConfigError("unknown architecture '" + s + "' (expected tgn or fcgn)");
}

ModelClass model_class_from_string(const std::string& s) {
  if (s == "comp") return ModelClass::Comp;
  if (s == "ss") return ModelClass::SS;
  throw ConfigError("unknown model class '" + s + "' (expected comp or ss)");
}

std::vector<std::pair<int, int>> make_edges(Connectivity c, int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (c == Connectivity::TGN && j > i) continue;
      edges.emplace_back(j, i);
    }
  }
  return edges;
}

Eigen::MatrixXd encode(const Plan& plan) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(kNodeFeatures, static_cast<Eigen::Index>(plan.size()));
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Action& a = plan.actions[i];
    const auto col = static_cast<Eigen::Index>(i);
    x.block<3, 1>(0, col) = rotate(a.pose.rot, a.block.dims).cwiseAbs() / kLengthScale;
    x.block<3, 1>(3, col) = rotate(a.pose.rot, a.block.com_offset) / kLengthScale;
    x(6, col) = a.block.mass;
    x(7, col) = a.pose.dx / kLengthScale;
    x(8, col) = a.pose.dy / kLengthScale;
    x(9 + quarter_turns(a.pose.rot), col) = 1.0;
  }
  return x;
}

template <typename Scalar>
GnnParams<Scalar> GnnParams<Scalar>::glorot(int hidden, Rng& rng) {
  GnnParams p(hidden);
  fill_glorot<Scalar>(p.enc_w(), kNodeFeatures, hidden, rng);
  fill_glorot<Scalar>(p.send_w(), 2 * hidden, hidden, rng);
  fill_glorot<Scalar>(p.recv_w(), 2 * hidden, hidden, rng);
  fill_glorot<Scalar>(p.self_w(), 2 * hidden, hidden, rng);
  fill_glorot<Scalar>(p.agg_w(), 2 * hidden, hidden, rng);
  fill_glorot<Scalar>(Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>(p.out_w().data(), hidden, 1),
                      hidden, 1, rng);
  return p;
}

template class GnnParams<double>;
template class GnnParams<float>;

void GraphBatch::add(const Eigen::MatrixXd& graph_features, Connectivity c) {
  const int offset = total_nodes();
  const int n = static_cast<int>(graph_features.cols());
  if (features.size() == 0) {
    features = graph_features;
  } else {
    features.conservativeResize(Eigen::NoChange, offset + n);
    features.rightCols(n) = graph_features;
  }
  for (auto [s, r] : make_edges(c, n)) edges.emplace_back(s + offset, r + offset);
  offsets.push_back(offset);
  sizes.push_back(n);
}

GraphBatch GraphBatch::from_plans(std::span<const Plan> plans, Connectivity c) {
  GraphBatch b;
  Eigen::Index total = 0;
  for (const auto& p : plans) total += static_cast<Eigen::Index>(p.size());
  b.features.resize(kNodeFeatures, total);
  int offset = 0;
  for (const auto& p : plans) {
    const int n = static_cast<int>(p.size());
    b.features.middleCols(offset, n) = encode(p);
    for (auto [s, r] : make_edges(c, n)) b.edges.emplace_back(s + offset, r + offset);
    b.offsets.push_back(offset);
    b.sizes.push_back(n);
    offset += n;
  }
  return b;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> node_logits(const GnnParams<Scalar>& params, const GraphBatch& batch,
                                                     int rounds) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return run_forward(params, batch, rounds).logits;
  } else {
    GnnParamsd wide(params.hidden());
    wide.flat() = params.flat().template cast<double>();
    return run_forward(wide, batch, rounds).logits.template cast<Scalar>();
  }
}

template Eigen::Matrix<double, 1, Eigen::Dynamic> node_logits(const GnnParams<double>&, const GraphBatch&, int);
template Eigen::Matrix<float, 1, Eigen::Dynamic> node_logits(const GnnParams<float>&, const GraphBatch&, int);

double plan_readout(std::span<const double> logits, const ModelConfig& cfg) {
  const Eigen::Map<const Eigen::RowVectorXd> z(logits.data(), static_cast<Eigen::Index>(logits.size()));
  return item_prediction(z, ModelClass::Comp, cfg).prob;
}

ForwardOutput forward(const GnnParamsd& params, const Plan& plan, const ModelConfig& cfg) {
  GraphBatch batch;
  batch.add(encode(plan), cfg.connectivity);
  const Eigen::RowVectorXd z = node_logits(params, batch, cfg.rounds);
  ForwardOutput out;
  out.node_probs.resize(static_cast<std::size_t>(z.size()));
  for (Eigen::Index k = 0; k < z.size(); ++k) out.node_probs[static_cast<std::size_t>(k)] = sigmoid(z(k));
  out.plan_prob = plan_readout(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())), cfg);
  return out;
}

EncodedItem encode_item(const TrainItem& item) {
  return {encode(item.plan), item.label ? 1.0 : 0.0, item.model_class};
}

std::pair<double, Eigen::VectorXd> bce_loss_and_grad(const GnnParamsd& params, std::span<const EncodedItem> items,
                                                     const ModelConfig& cfg) {
  Eigen::VectorXd grad;
  const double loss = loss_impl(params, refs_of(items), cfg, &grad);
  return {loss, std::move(grad)};
}

std::pair<double, Eigen::VectorXd> bce_loss_and_grad(const GnnParamsd& params, std::span<const TrainItem> items,
                                                     const ModelConfig& cfg) {
  std::vector<EncodedItem> enc;
  enc.reserve(items.size());
  for (const auto& it : items) enc.push_back(encode_item(it));
  return bce_loss_and_grad(params, std::span<const EncodedItem>(enc), cfg);
}

double bce_loss(const GnnParamsd& params, std::span<const EncodedItem> items, const ModelConfig& cfg) {
  return loss_impl(params, refs_of(items), cfg, nullptr);
}

Ensemble Ensemble::create(const ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("ensemble size must be at least 1");
  Ensemble ens;
  ens.config = cfg;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = seeded(seed, i);
    ens.members.push_back(GnnParamsd::glorot(cfg.hidden, rng));
  }
  return ens;
}

std::vector<std::vector<double>> member_plan_probs(const Ensemble& ens, std::span<const Plan> plans) {
  std::vector<std::vector<double>> out(plans.size(), std::vector<double>(ens.size()));
  if (plans.empty()) return out;
  const GraphBatch batch = GraphBatch::from_plans(plans, ens.config.connectivity);
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const Eigen::RowVectorXd z = node_logits(ens.members[m], batch, ens.config.rounds);
    for (std::size_t g = 0; g < plans.size(); ++g) {
      out[g][m] = plan_readout(
          std::span<const double>(z.data() + batch.offsets[g], static_cast<std::size_t>(batch.sizes[g])), ens.config);
    }
  }
  return out;
}

std::vector<double> member_plan_probs(const Ensemble& ens, const Plan& plan) {
  return member_plan_probs(ens, std::span<const Plan>(&plan, 1)).front();
}

std::vector<Eigen::MatrixXd> member_step_probs(const Ensemble& ens, std::span<const Plan> plans) {
  const auto n_members = static_cast<Eigen::Index>(ens.size());
  std::vector<Eigen::MatrixXd> out;
  out.reserve(plans.size());
  for (const auto& p : plans) {
    Eigen::MatrixXd m(n_members, static_cast<Eigen::Index>(p.size()));
    if (m.cols() > 0) m.col(0).setOnes();
    out.push_back(std::move(m));
  }
  if (plans.empty()) return out;

  if (causal_steps(ens.config)) {
    const GraphBatch batch = GraphBatch::from_plans(plans, ens.config.connectivity);
    for (Eigen::Index m = 0; m < n_members; ++m) {
      const Eigen::RowVectorXd z = node_logits(ens.members[static_cast<std::size_t>(m)], batch, ens.config.rounds);
      for (std::size_t g = 0; g < plans.size(); ++g) {
        for (int i = 1; i < batch.sizes[g]; ++i) out[g](m, i) = sigmoid(z(batch.offsets[g] + i));
      }
    }
    return out;
  }

  // One graph per prefix of length >= 2.
  GraphBatch batch;
  std::vector<std::pair<std::size_t, int>> owner;
  for (std::size_t g = 0; g < plans.size(); ++g) {
    const Eigen::MatrixXd x = encode(plans[g]);
    for (Eigen::Index len = 2; len <= x.cols(); ++len) {
      batch.add(x.leftCols(len), ens.config.connectivity);
      owner.emplace_back(g, static_cast<int>(len - 1));
    }
  }
  if (owner.empty()) return out;
  for (Eigen::Index m = 0; m < n_members; ++m) {
    const Eigen::RowVectorXd z = node_logits(ens.members[static_cast<std::size_t>(m)], batch, ens.config.rounds);
    for (std::size_t k = 0; k < owner.size(); ++k) {
      const Eigen::RowVectorXd zk = z.segment(batch.offsets[k], batch.sizes[k]);
      out[owner[k].first](m, owner[k].second) = item_prediction(zk, ModelClass::SS, ens.config).prob;
    }
  }
  return out;
}

Eigen::MatrixXd member_step_probs(const Ensemble& ens, const Plan& plan) {
  return member_step_probs(ens, std::span<const Plan>(&plan, 1)).front();
}

double predict_comp(const Ensemble& ens, const Plan& plan) {
  const auto probs = member_plan_probs(ens, plan);
  return std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
}

double predict_step(const Ensemble& ens, const Plan& prefix) {
  if (prefix.size() <= 1) return 1.0;
  const Eigen::MatrixXd steps = member_step_probs(ens, prefix);
  return steps.col(steps.cols() - 1).mean();
}

double plan_feasibility_ss(const Eigen::MatrixXd& member_steps) {
  double p = 1.0;
  for (Eigen::Index i = 1; i < member_steps.cols(); ++i) p *= member_steps.col(i).mean();
  return p;
}

double plan_feasibility_ss(const Ensemble& ens, const Plan& plan) {
  return plan_feasibility_ss(member_step_probs(ens, plan));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
}

MemberTrainLog train_member(GnnParamsd& params, const ModelConfig& mcfg, std::span<const EncodedItem> train_set,
                            std::span<const EncodedItem> val_set, const TrainConfig& cfg, std::uint64_t member_seed) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw ConfigError("training and validation sets must be non-empty");

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double adam_eps = 1e-8;

  Rng rng = seeded(cfg.seed, member_seed);
  const Eigen::Index dim = params.flat().size();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(dim);
  long step = 0;

  MemberTrainLog log;
  const ItemRefs val_refs = refs_of(val_set);
  log.best_val_loss = loss_impl(params, val_refs, mcfg, nullptr);
  log.final_val_loss = log.best_val_loss;
  Eigen::VectorXd best = params.flat();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ItemRefs chunk;
  Eigen::VectorXd grad;
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      chunk.clear();
      for (std::size_t k = start; k < stop; ++k) chunk.push_back(&train_set[order[k]]);
      loss_impl(params, chunk, mcfg, &grad);
      ++step;
      m1 = beta1 * m1 + (1 - beta1) * grad;
      m2 = beta2 * m2 + (1 - beta2) * grad.cwiseAbs2();
      const double c1 = 1 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1 - std::pow(beta2, static_cast<double>(step));
      params.flat().array() -=
          cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps);
    }
    log.epochs_run = epoch;
    log.final_val_loss = loss_impl(params, val_refs, mcfg, nullptr);
    if (log.final_val_loss < log.best_val_loss) {
      log.best_val_loss = log.final_val_loss;
      log.best_epoch = epoch;
      best = params.flat();
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  params.flat() = best;
  return log;
}

std::vector<MemberTrainLog> train(Ensemble& ens, std::span<const TrainItem> train_set,
                                  std::span<const TrainItem> val_set, const TrainConfig& cfg) {
  std::vector<EncodedItem> tr, va;
  tr.reserve(train_set.size());
  va.reserve(val_set.size());
  for (const auto& it : train_set) tr.push_back(encode_item(it));
  for (const auto& it : val_set) va.push_back(encode_item(it));

  std::vector<MemberTrainLog> logs(ens.size());
  auto work = [&](std::size_t m) { logs[m] = train_member(ens.members[m], ens.config, tr, va, cfg, m); };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.threads, 1)), 1, ens.size());
  if (threads == 1) {
    for (std::size_t m = 0; m < ens.size(); ++m) work(m);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t m = t; m < ens.size(); m += threads) work(m);
      });
    }
  }
  return logs;
}

std::vector<LabeledPlan> augment(const LabeledPlan& lp) {
  std::vector<LabeledPlan> out;
  out.reserve(4);
  for (Yaw y : {Yaw::k0, Yaw::k90, Yaw::k180, Yaw::k270}) {
    LabeledPlan r = lp;
    r.plan = rotate_plan(lp.plan, y);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace apf
