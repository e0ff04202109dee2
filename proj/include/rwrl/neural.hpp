#pragma once
// Tree neural network policy: per-operator nets folded bottom-up over the
// term, a cursor net wrapping the focused subtree, and a three-layer
// predictor head with an optional value head. Gradients are computed by an
// explicit reverse pass over a forward tape.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rwrl/envs.hpp"
#include "rwrl/term.hpp"

namespace rwrl {

enum class PredictorOrder {
  kSigmoidThenRelu,  // linear -> sigmoid -> linear -> relu -> linear
  kReluThenSigmoid,
};

PredictorOrder parse_predictor_order(std::string_view s);
const char* predictor_order_string(PredictorOrder o);

struct ModelConfig {
  EnvName env = EnvName::kRA;
  int n = 16;         // internal representation size
  int hidden = 64;    // predictor hidden width
  int actions = 9;
  bool value_head = false;
  PredictorOrder order = PredictorOrder::kSigmoidThenRelu;

  // n = 16 for RA, 32 otherwise; action count from the env table.
  static ModelConfig defaults(EnvName env, bool value_head = false);
};

// Flat parameter storage: every tensor is a row-major slice of `values`.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    int rows;
    int cols;
    std::size_t offset;
    bool trainable;
  };

  int add(std::string name, int rows, int cols, bool trainable = true);
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(int index) const { return entries_[index]; }
  // Index of a named tensor, or -1.
  int find(std::string_view name) const;

  std::size_t size() const { return values.size(); }
  double* data(int index) { return values.data() + entries_[index].offset; }
  const double* data(int index) const {
    return values.data() + entries_[index].offset;
  }

  std::vector<double> values;
  std::vector<unsigned char> trainable_mask;  // per scalar

 private:
  std::vector<Entry> entries_;
};

// Two-layer net: Linear(in -> n), ReLU, Linear(n -> n).
struct TwoLayerNet {
  int w1, b1, w2, b2;
  int in_dim;
};

class Model {
 public:
  // Builds the architecture for config.env and initialises it from `seed`.
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const EnvSpec& env() const { return *env_; }

  // Architecture lookup, used by the forward pass.
  const TwoLayerNet* op_net(Symbol s) const;
  int leaf_param(Symbol s) const;  // -1 if none
  const TwoLayerNet& cursor_net() const { return cursor_net_; }
  const TwoLayerNet* projection_net() const {
    return projection_net_ ? &*projection_net_ : nullptr;
  }
  int pred_w1() const { return pred_[0]; }
  int pred_b1() const { return pred_[1]; }
  int pred_w2() const { return pred_[2]; }
  int pred_b2() const { return pred_[3]; }
  int pred_w3() const { return pred_[4]; }
  int pred_b3() const { return pred_[5]; }
  int value_w() const { return value_[0]; }  // -1 without value head
  int value_b() const { return value_[1]; }

 private:
  TwoLayerNet add_net(const std::string& name, int in_dim);

  ModelConfig config_;
  const EnvSpec* env_;
  ParamStore params_;
  std::unordered_map<Symbol, TwoLayerNet> op_nets_;
  std::unordered_map<Symbol, int> leaves_;
  TwoLayerNet cursor_net_{};
  std::optional<TwoLayerNet> projection_net_;
  int pred_[6]{};
  int value_[2]{-1, -1};
};

// Random vectors for proof-introduced (fresh) variables. Deterministic in
// (seed, variable index); a new seed is drawn per episode.
class EpisodeContext {
 public:
  explicit EpisodeContext(std::uint64_t seed = 0) : seed_(seed) {}
  std::uint64_t seed() const { return seed_; }
  std::vector<double> fresh_vector(int index, int n) const;

 private:
  std::uint64_t seed_;
};

std::vector<double> embed(const Model& model, const EnvState& s,
                          const EpisodeContext& ctx);

struct PolicyOutput {
  std::vector<double> logits;
  std::vector<double> probs;  // exactly 0 outside the legal set
  std::optional<double> value;
};

// Throws std::invalid_argument for an empty or out-of-range legal set.
PolicyOutput policy_forward(const Model& model, const EnvState& s,
                            const EpisodeContext& ctx,
                            std::span<const int> legal);

// Softmax restricted to `legal`; the rest is exactly 0.
std::vector<double> masked_softmax(std::span<const double> logits,
                                   std::span<const int> legal);
// Highest-probability legal action; ties go to the lowest id.
int argmax_action(std::span<const double> probs, std::span<const int> legal);

enum class LossKind { kCrossEntropy, kA2C, kSilPaac, kPpoClip, kValueMse };
LossKind parse_loss_kind(std::string_view s);
const char* loss_kind_string(LossKind k);

struct Sample {
  EnvState state;
  std::uint64_t ctx_seed = 0;
  std::vector<int> legal;
  int action = 0;
  double advantage = 0.0;  // treated as a constant
  double target = 0.0;     // n-step return for the value head
  double old_prob = 1.0;   // behaviour probability (PPO)
};

struct LossOptions {
  double sil_value_weight = 0.01;
  double ppo_clip = 0.2;
};

struct LossResult {
  double loss = 0.0;
  // Hash of every piecewise-linear branch taken (ReLU signs, clip and max
  // branches). Equal signatures mean the loss is smooth between two points.
  std::uint64_t branch_signature = 0;
};

// Cross-entropy, A2C, SIL and value losses are summed over the batch; the
// PPO loss is the batch mean. When `grad` is non-null it is overwritten with
// d loss / d params; entries of untrainable parameters are exactly 0.
LossResult loss_and_grad(const Model& model, std::span<const Sample> batch,
                         LossKind kind, const LossOptions& options,
                         std::vector<double>* grad);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(std::size_t size = 0, AdamConfig config = {});
  // Returns false (and leaves everything untouched) for a non-finite grad.
  bool step(ParamStore& params, std::span<const double> grad);
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  long long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

// Versioned binary container: magic, version, JSON metadata, raw doubles.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::string& extra_metadata_json = "{}");
struct LoadedCheckpoint {
  Model model;
  std::string metadata_json;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rwrl
