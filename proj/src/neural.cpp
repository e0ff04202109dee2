#include "rwrl/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "rwrl/kernels.hpp"

namespace rwrl {

namespace kn = kernels;

PredictorOrder parse_predictor_order(std::string_view s) {
  if (s == "sigmoid_relu") return PredictorOrder::kSigmoidThenRelu;
  if (s == "relu_sigmoid") return PredictorOrder::kReluThenSigmoid;
  throw std::invalid_argument("unknown predictor order '" + std::string(s) +
                              "'");
}

const char* predictor_order_string(PredictorOrder o) {
  return o == PredictorOrder::kSigmoidThenRelu ? "sigmoid_relu"
                                               : "relu_sigmoid";
}

ModelConfig ModelConfig::defaults(EnvName env, bool value_head) {
  ModelConfig c;
  c.env = env;
  c.n = env == EnvName::kRA ? 16 : 32;
  c.actions = default_env(env).action_count();
  c.value_head = value_head;
  return c;
}

int ParamStore::add(std::string name, int rows, int cols, bool trainable) {
  if (find(name) >= 0) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
  const std::size_t offset = values.size();
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  values.resize(offset + count, 0.0);
  trainable_mask.resize(offset + count, trainable ? 1 : 0);
  entries_.push_back(Entry{std::move(name), rows, cols, offset, trainable});
  return static_cast<int>(entries_.size()) - 1;
}

int ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::span<const double> tensor(const ParamStore& p, int index) {
  const auto& e = p.entry(index);
  return {p.data(index), static_cast<std::size_t>(e.rows) * e.cols};
}

std::span<double> grad_slice(std::vector<double>& g, const ParamStore& p,
                             int index) {
  const auto& e = p.entry(index);
  return {g.data() + e.offset, static_cast<std::size_t>(e.rows) * e.cols};
}

}  // namespace

TwoLayerNet Model::add_net(const std::string& name, int in_dim) {
  const int n = config_.n;
  TwoLayerNet net{};
  net.in_dim = in_dim;
  net.w1 = params_.add(name + ".w1", n, in_dim);
  net.b1 = params_.add(name + ".b1", n, 1);
  net.w2 = params_.add(name + ".w2", n, n);
  net.b2 = params_.add(name + ".b2", n, 1);
  return net;
}

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config), env_(&default_env(config.env)) {
  if (config.actions != env_->action_count()) {
    throw std::invalid_argument("model action count " +
                                std::to_string(config.actions) +
                                " does not match env table size " +
                                std::to_string(env_->action_count()));
  }
  if (config.n <= 0 || config.hidden <= 0) {
    throw std::invalid_argument("model sizes must be positive");
  }
  const Signature& sig = env_->signature;
  const int n = config.n;
  for (Symbol s : sig.symbols()) {
    if (s->arity > 0) {
      op_nets_.emplace(s, add_net("op:" + s->name, s->arity * n));
    } else {
      const bool frozen = config.env == EnvName::kRA && s->name == "0";
      leaves_.emplace(s, params_.add("leaf:" + s->name, n, 1, !frozen));
    }
  }
  cursor_net_ = add_net("cursor", n);
  if (sig.allows_fresh_variables()) projection_net_ = add_net("project", n);
  const int h = config.hidden;
  pred_[0] = params_.add("pred.w1", h, n);
  pred_[1] = params_.add("pred.b1", h, 1);
  pred_[2] = params_.add("pred.w2", h, h);
  pred_[3] = params_.add("pred.b2", h, 1);
  pred_[4] = params_.add("pred.w3", config.actions, h);
  pred_[5] = params_.add("pred.b3", config.actions, 1);
  if (config.value_head) {
    value_[0] = params_.add("value.w", 1, h);
    value_[1] = params_.add("value.b", 1, 1);
  }

  // Leaves ~ N(0,1); weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  // where fan_in is the column count of the layer's weight matrix.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    double* p = params_.data(static_cast<int>(i));
    const std::size_t count = static_cast<std::size_t>(e.rows) * e.cols;
    if (e.name.rfind("leaf:", 0) == 0) {
      for (std::size_t j = 0; j < count; ++j) p[j] = normal(rng);
      continue;
    }
    // A bias follows its weight matrix; reuse that matrix's fan-in.
    const bool is_bias = e.name[e.name.rfind('.') + 1] == 'b';
    const int fan_in = is_bias ? entries[i - 1].cols : e.cols;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (std::size_t j = 0; j < count; ++j) p[j] = uni(rng);
  }
}

const TwoLayerNet* Model::op_net(Symbol s) const {
  auto it = op_nets_.find(s);
  return it == op_nets_.end() ? nullptr : &it->second;
}

int Model::leaf_param(Symbol s) const {
  auto it = leaves_.find(s);
  return it == leaves_.end() ? -1 : it->second;
}

std::vector<double> EpisodeContext::fresh_vector(int index, int n) const {
  std::mt19937_64 rng(splitmix(seed_ ^ splitmix(static_cast<std::uint64_t>(index))));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Rec {
  int leaf = -1;                   // parameter index for leaf records
  const TwoLayerNet* net = nullptr;
  std::vector<int> inputs;         // child record ids feeding `in`
  std::vector<double> in, z, h, out;
};

struct Tape {
  std::vector<Rec> recs;
  int root = -1;
  std::vector<double> z1, a1, z2, a2, logits, probs;
  double value = 0.0;
  std::uint64_t signature = 0;
};

void mix_bit(std::uint64_t& sig, bool bit) {
  sig = splitmix(sig ^ (bit ? 0x5bd1e995ULL : 0x1b873593ULL));
}

void run_net(const ParamStore& p, const TwoLayerNet& net, Rec& r, int n) {
  r.z.assign(n, 0.0);
  kn::gemv(tensor(p, net.w1), tensor(p, net.b1), r.in, r.z);
  r.h.resize(n);
  for (int i = 0; i < n; ++i) r.h[i] = r.z[i] > 0.0 ? r.z[i] : 0.0;
  r.out.assign(n, 0.0);
  kn::gemv(tensor(p, net.w2), tensor(p, net.b2), r.h, r.out);
}

class Folder {
 public:
  Folder(const Model& m, const EpisodeContext& ctx, Tape& tape)
      : m_(m), ctx_(ctx), tape_(tape), n_(m.config().n) {}

  int fold(const Term& t, const Path* cursor, std::size_t depth) {
    int id;
    if (t.is_leaf()) {
      id = leaf(t.symbol());
    } else {
      const TwoLayerNet* net = m_.op_net(t.symbol());
      if (!net || net->in_dim != static_cast<int>(t.arity()) * n_) {
        throw std::invalid_argument("no network for symbol '" +
                                    t.symbol()->name + "'");
      }
      std::vector<int> kids;
      kids.reserve(t.arity());
      for (std::size_t i = 0; i < t.arity(); ++i) {
        const bool on_path = cursor && depth < cursor->size() &&
                             (*cursor)[depth] == static_cast<int>(i);
        kids.push_back(fold(t.child(i), on_path ? cursor : nullptr, depth + 1));
      }
      Rec r;
      r.net = net;
      r.in.reserve(net->in_dim);
      for (int k : kids) {
        const auto& o = tape_.recs[k].out;
        r.in.insert(r.in.end(), o.begin(), o.end());
      }
      r.inputs = std::move(kids);
      id = push_net(std::move(r));
    }
    if (cursor && depth == cursor->size()) {
      Rec r;
      r.net = &m_.cursor_net();
      r.in = tape_.recs[id].out;
      r.inputs = {id};
      id = push_net(std::move(r));
    }
    return id;
  }

 private:
  int leaf(Symbol s) {
    const int fresh = fresh_variable_index(s);
    if (fresh >= 0) {
      const TwoLayerNet* proj = m_.projection_net();
      if (!proj) {
        throw std::invalid_argument("fresh variable '" + s->name +
                                    "' in an environment without them");
      }
      Rec r;
      r.net = proj;
      r.in = ctx_.fresh_vector(fresh, n_);
      return push_net(std::move(r));
    }
    const int idx = m_.leaf_param(s);
    if (idx < 0) {
      throw std::invalid_argument("no vector for symbol '" + s->name + "'");
    }
    Rec r;
    r.leaf = idx;
    const double* v = m_.params().data(idx);
    r.out.assign(v, v + n_);
    tape_.recs.push_back(std::move(r));
    return static_cast<int>(tape_.recs.size()) - 1;
  }

  int push_net(Rec r) {
    run_net(m_.params(), *r.net, r, n_);
    for (double z : r.z) mix_bit(tape_.signature, z > 0.0);
    tape_.recs.push_back(std::move(r));
    return static_cast<int>(tape_.recs.size()) - 1;
  }

  const Model& m_;
  const EpisodeContext& ctx_;
  Tape& tape_;
  int n_;
};

void check_legal(std::span<const int> legal, int actions) {
  if (legal.empty()) throw std::invalid_argument("empty legal-action mask");
  for (int a : legal) {
    if (a < 0 || a >= actions) {
      throw std::invalid_argument("legal action " + std::to_string(a) +
                                  " out of range");
    }
  }
}

void activate(bool use_sigmoid, const std::vector<double>& z,
              std::vector<double>& a, std::uint64_t& sig) {
  a.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (use_sigmoid) {
      a[i] = sigmoid(z[i]);
    } else {
      a[i] = z[i] > 0.0 ? z[i] : 0.0;
      mix_bit(sig, z[i] > 0.0);
    }
  }
}

void forward(const Model& m, const EnvState& s, const EpisodeContext& ctx,
             std::span<const int> legal, Tape& tape) {
  const ModelConfig& c = m.config();
  check_legal(legal, c.actions);
  tape.recs.clear();
  tape.signature = 0;
  Folder folder(m, ctx, tape);
  tape.root = folder.fold(s.term, &s.cursor, 0);
  const ParamStore& p = m.params();
  const auto& e = tape.recs[tape.root].out;
  const bool sig_first = c.order == PredictorOrder::kSigmoidThenRelu;
  tape.z1.assign(c.hidden, 0.0);
  kn::gemv(tensor(p, m.pred_w1()), tensor(p, m.pred_b1()), e, tape.z1);
  activate(sig_first, tape.z1, tape.a1, tape.signature);
  tape.z2.assign(c.hidden, 0.0);
  kn::gemv(tensor(p, m.pred_w2()), tensor(p, m.pred_b2()), tape.a1, tape.z2);
  activate(!sig_first, tape.z2, tape.a2, tape.signature);
  tape.logits.assign(c.actions, 0.0);
  kn::gemv(tensor(p, m.pred_w3()), tensor(p, m.pred_b3()), tape.a2,
           tape.logits);
  tape.probs = masked_softmax(tape.logits, legal);
  if (c.value_head) {
    tape.value = kn::dot(tensor(p, m.value_w()), tape.a2) +
                 p.data(m.value_b())[0];
  }
}

void activation_grad(bool use_sigmoid, const std::vector<double>& z,
                     const std::vector<double>& a, std::vector<double>& d) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    d[i] *= use_sigmoid ? a[i] * (1.0 - a[i]) : (z[i] > 0.0 ? 1.0 : 0.0);
  }
}

void backward(const Model& m, Tape& tape, std::span<const double> dlogits,
              double dvalue, std::vector<double>& g) {
  const ModelConfig& c = m.config();
  const ParamStore& p = m.params();
  const bool sig_first = c.order == PredictorOrder::kSigmoidThenRelu;

  std::vector<double> da2(c.hidden, 0.0);
  kn::gemv_t_acc(tensor(p, m.pred_w3()), dlogits, da2);
  kn::ger_acc(dlogits, tape.a2, grad_slice(g, p, m.pred_w3()));
  kn::axpy(1.0, dlogits, grad_slice(g, p, m.pred_b3()));
  if (c.value_head && dvalue != 0.0) {
    kn::axpy(dvalue, tensor(p, m.value_w()), da2);
    kn::axpy(dvalue, tape.a2, grad_slice(g, p, m.value_w()));
    g[p.entry(m.value_b()).offset] += dvalue;
  }
  activation_grad(!sig_first, tape.z2, tape.a2, da2);
  std::vector<double> da1(c.hidden, 0.0);
  kn::gemv_t_acc(tensor(p, m.pred_w2()), da2, da1);
  kn::ger_acc(da2, tape.a1, grad_slice(g, p, m.pred_w2()));
  kn::axpy(1.0, da2, grad_slice(g, p, m.pred_b2()));
  activation_grad(sig_first, tape.z1, tape.a1, da1);

  const int n = c.n;
  std::vector<std::vector<double>> dout(tape.recs.size());
  dout[tape.root].assign(n, 0.0);
  kn::gemv_t_acc(tensor(p, m.pred_w1()), da1, dout[tape.root]);
  kn::ger_acc(da1, tape.recs[tape.root].out, grad_slice(g, p, m.pred_w1()));
  kn::axpy(1.0, da1, grad_slice(g, p, m.pred_b1()));

  std::vector<double> dh(n), din;
  for (int id = static_cast<int>(tape.recs.size()) - 1; id >= 0; --id) {
    if (dout[id].empty()) continue;
    const Rec& r = tape.recs[id];
    const auto& d = dout[id];
    if (r.leaf >= 0) {
      if (p.entry(r.leaf).trainable) kn::axpy(1.0, d, grad_slice(g, p, r.leaf));
      continue;
    }
    const TwoLayerNet& net = *r.net;
    std::fill(dh.begin(), dh.end(), 0.0);
    kn::gemv_t_acc(tensor(p, net.w2), d, dh);
    kn::ger_acc(d, r.h, grad_slice(g, p, net.w2));
    kn::axpy(1.0, d, grad_slice(g, p, net.b2));
    for (int i = 0; i < n; ++i) {
      if (r.z[i] <= 0.0) dh[i] = 0.0;
    }
    kn::ger_acc(dh, r.in, grad_slice(g, p, net.w1));
    kn::axpy(1.0, dh, grad_slice(g, p, net.b1));
    if (r.inputs.empty()) continue;  // fresh vector: nothing upstream
    din.assign(net.in_dim, 0.0);
    kn::gemv_t_acc(tensor(p, net.w1), dh, din);
    for (std::size_t k = 0; k < r.inputs.size(); ++k) {
      auto& target = dout[r.inputs[k]];
      if (target.empty()) target.assign(n, 0.0);
      for (int i = 0; i < n; ++i) target[i] += din[k * n + i];
    }
  }
}

}  // namespace

std::vector<double> embed(const Model& model, const EnvState& s,
                          const EpisodeContext& ctx) {
  Tape tape;
  Folder folder(model, ctx, tape);
  const int root = folder.fold(s.term, &s.cursor, 0);
  return tape.recs[root].out;
}

std::vector<double> masked_softmax(std::span<const double> logits,
                                   std::span<const int> legal) {
  std::vector<double> probs(logits.size(), 0.0);
  if (legal.empty()) throw std::invalid_argument("empty legal-action mask");
  double mx = -INFINITY;
  for (int a : legal) mx = std::max(mx, logits[a]);
  double total = 0.0;
  for (int a : legal) {
    probs[a] = std::exp(logits[a] - mx);
    total += probs[a];
  }
  for (int a : legal) probs[a] /= total;
  return probs;
}

int argmax_action(std::span<const double> probs, std::span<const int> legal) {
  int best = -1;
  for (int a : legal) {
    if (best < 0 || probs[a] > probs[best] ||
        (probs[a] == probs[best] && a < best)) {
      best = a;
    }
  }
  return best;
}

PolicyOutput policy_forward(const Model& model, const EnvState& s,
                            const EpisodeContext& ctx,
                            std::span<const int> legal) {
  Tape tape;
  forward(model, s, ctx, legal, tape);
  PolicyOutput out;
  out.logits = std::move(tape.logits);
  out.probs = std::move(tape.probs);
  if (model.config().value_head) out.value = tape.value;
  return out;
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "cross-entropy") return LossKind::kCrossEntropy;
  if (s == "a2c") return LossKind::kA2C;
  if (s == "sil-paac") return LossKind::kSilPaac;
  if (s == "ppo-clip") return LossKind::kPpoClip;
  if (s == "value-mse") return LossKind::kValueMse;
  throw std::invalid_argument("unknown loss kind '" + std::string(s) + "'");
}

const char* loss_kind_string(LossKind k) {
  switch (k) {
    case LossKind::kCrossEntropy: return "cross-entropy";
    case LossKind::kA2C: return "a2c";
    case LossKind::kSilPaac: return "sil-paac";
    case LossKind::kPpoClip: return "ppo-clip";
    case LossKind::kValueMse: return "value-mse";
  }
  return "?";
}

LossResult loss_and_grad(const Model& model, std::span<const Sample> batch,
                         LossKind kind, const LossOptions& options,
                         std::vector<double>* grad) {
  const ModelConfig& c = model.config();
  const bool needs_value = kind == LossKind::kA2C ||
                           kind == LossKind::kSilPaac ||
                           kind == LossKind::kValueMse;
  if (needs_value && !c.value_head) {
    throw std::invalid_argument(std::string(loss_kind_string(kind)) +
                                " loss needs a value head");
  }
  if (grad) grad->assign(model.params().size(), 0.0);
  LossResult result;
  const double scale =
      kind == LossKind::kPpoClip && !batch.empty() ? 1.0 / batch.size() : 1.0;
  Tape tape;
  std::vector<double> dlogits(c.actions);
  for (const Sample& s : batch) {
    const EpisodeContext ctx(s.ctx_seed);
    forward(model, s.state, ctx, s.legal, tape);
    if (std::find(s.legal.begin(), s.legal.end(), s.action) == s.legal.end()) {
      throw std::invalid_argument("sample action " + std::to_string(s.action) +
                                  " is not in its legal set");
    }
    std::uint64_t sig = tape.signature;
    const double pa = tape.probs[s.action];
    const double V = tape.value;
    // d(-log p_a)/d logits = p - onehot(a); `policy_weight` scales it.
    double policy_weight = 0.0;
    double dvalue = 0.0;
    double loss = 0.0;
    switch (kind) {
      case LossKind::kCrossEntropy:
        loss = -std::log(pa);
        policy_weight = 1.0;
        break;
      case LossKind::kA2C:
        loss = -std::log(pa) * s.advantage + 0.5 * (s.target - V) * (s.target - V);
        policy_weight = s.advantage;
        dvalue = V - s.target;
        break;
      case LossKind::kSilPaac: {
        const double a = std::max(s.advantage, 0.0);
        const double gap = std::max(s.target - V, 0.0);
        mix_bit(sig, s.target - V > 0.0);
        loss = -std::log(pa) * a + options.sil_value_weight * 0.5 * gap * gap;
        policy_weight = a;
        dvalue = -options.sil_value_weight * gap;
        break;
      }
      case LossKind::kPpoClip: {
        if (!(s.old_prob > 0.0)) {
          throw std::invalid_argument("PPO sample with zero old probability");
        }
        const double rho = pa / s.old_prob;
        const double eps = options.ppo_clip;
        const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
        const double unclipped_obj = rho * s.advantage;
        const double clipped_obj = clipped * s.advantage;
        const bool use_unclipped = unclipped_obj <= clipped_obj;
        const bool inside = rho > 1.0 - eps && rho < 1.0 + eps;
        mix_bit(sig, use_unclipped);
        mix_bit(sig, inside);
        loss = -std::min(unclipped_obj, clipped_obj);
        // d(-rho A)/d logits = rho A (p - onehot(a)).
        if (use_unclipped || inside) policy_weight = rho * s.advantage;
        if (c.value_head) {
          loss += 0.5 * (s.target - V) * (s.target - V);
          dvalue = V - s.target;
        }
        break;
      }
      case LossKind::kValueMse:
        loss = 0.5 * (s.target - V) * (s.target - V);
        dvalue = V - s.target;
        break;
    }
    result.loss += scale * loss;
    result.branch_signature = splitmix(result.branch_signature ^ sig);
    if (!grad) continue;
    std::fill(dlogits.begin(), dlogits.end(), 0.0);
    if (policy_weight != 0.0) {
      for (int a : s.legal) dlogits[a] = scale * policy_weight * tape.probs[a];
      dlogits[s.action] -= scale * policy_weight;
    }
    backward(model, tape, dlogits, scale * dvalue, *grad);
  }
  if (grad) {
    const auto& mask = model.params().trainable_mask;
    for (std::size_t i = 0; i < grad->size(); ++i) {
      if (!mask[i]) (*grad)[i] = 0.0;
    }
  }
  return result;
}

Adam::Adam(std::size_t size, AdamConfig config)
    : config_(config), m_(size, 0.0), v_(size, 0.0) {}

bool Adam::step(ParamStore& params, std::span<const double> grad) {
  if (grad.size() != params.size()) {
    throw std::invalid_argument("gradient size does not match parameters");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) return false;
  }
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match parameters");
  }
  ++t_;
  const kn::AdamCoefficients c{
      config_.lr,
      config_.beta1,
      config_.beta2,
      config_.eps,
      1.0 - std::pow(config_.beta1, static_cast<double>(t_)),
      1.0 - std::pow(config_.beta2, static_cast<double>(t_))};
  kn::adam_update(params.values, grad, m_, v_, params.trainable_mask, c);
  return true;
}

namespace {

constexpr char kMagic[8] = {'R', 'W', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::string& extra_metadata_json) {
  using nlohmann::json;
  const ModelConfig& c = model.config();
  json meta;
  meta["env"] = env_name_string(c.env);
  meta["n"] = c.n;
  meta["hidden"] = c.hidden;
  meta["actions"] = c.actions;
  meta["value_head"] = c.value_head;
  meta["predictor_order"] = predictor_order_string(c.order);
  json tensors = json::array();
  for (const auto& e : model.params().entries()) {
    tensors.push_back({{"name", e.name},
                       {"shape", {e.rows, e.cols}},
                       {"trainable", e.trainable}});
  }
  meta["tensors"] = std::move(tensors);
  meta["extra"] = json::parse(extra_metadata_json);
  const std::string text = meta.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  write_raw(os, kVersion);
  write_raw(os, static_cast<std::uint64_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& values = model.params().values;
  write_raw(os, static_cast<std::uint64_t>(values.size()));
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  const auto version = read_raw<std::uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  const auto len = read_raw<std::uint64_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("truncated checkpoint metadata");
  const json meta = json::parse(text);

  ModelConfig c;
  c.env = parse_env_name(meta.at("env").get<std::string>());
  c.n = meta.at("n").get<int>();
  c.hidden = meta.at("hidden").get<int>();
  c.actions = meta.at("actions").get<int>();
  c.value_head = meta.at("value_head").get<bool>();
  c.order = parse_predictor_order(meta.at("predictor_order").get<std::string>());
  Model model(c, 0);
  const auto& tensors = meta.at("tensors");
  const auto& entries = model.params().entries();
  if (tensors.size() != entries.size()) {
    throw std::runtime_error("checkpoint tensor list does not match model");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != entries[i].name ||
        t.at("shape")[0].get<int>() != entries[i].rows ||
        t.at("shape")[1].get<int>() != entries[i].cols) {
      throw std::runtime_error("checkpoint tensor '" +
                               t.at("name").get<std::string>() +
                               "' does not match model");
    }
  }
  const auto count = read_raw<std::uint64_t>(is);
  auto& values = model.params().values;
  if (count != values.size()) {
    throw std::runtime_error("checkpoint parameter count mismatch");
  }
  is.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw std::runtime_error("truncated checkpoint data");
  return LoadedCheckpoint{std::move(model), meta.at("extra").dump()};
}

}  // namespace rwrl
