// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "e2c/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace e2c::seq2seq {

using Eigen::ArrayXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

// ---------------------------------------------------------------- vocab

Vocab::Vocab()
    : Vocab(std::vector<std::string>{std::string(kPad), std::string(kBos), std::string(kEos),
                                     std::string(kUnk), std::string(kSep)}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  static const std::vector<std::string_view> reserved = {kPad, kBos, kEos, kUnk, kSep};
  if (tokens_.size() < reserved.size()) throw Error("seq2seq vocab: missing reserved tokens");
  for (std::size_t i = 0; i < reserved.size(); ++i) {
    if (tokens_[i] != reserved[i]) throw Error("seq2seq vocab: reserved tokens out of order");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error("seq2seq vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::build(const std::vector<corpus::DialogPair>& pairs, int min_count) {
  std::map<std::string, long> counts;
  for (const auto& p : pairs) {
    for (const auto& t : p.post) ++counts[t];
    for (const auto& t : p.response) ++counts[t];
  }
  Vocab base;
  std::vector<std::string> tokens = base.tokens_;
  for (const auto& [t, n] : counts) {
    if (n >= min_count && !base.ids_.count(t)) tokens.push_back(t);
  }
  return Vocab(std::move(tokens));
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

std::vector<int> Vocab::encode(const Tokens& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

// --------------------------------------------------------------- params

Params Params::shaped(const ModelConfig& c, int vocab_size) {
  if (c.embedding_dim < 1 || c.hidden_dim < 1 || c.num_layers < 1) {
    throw ConfigError("seq2seq: dimensions and layer count must be positive");
  }
  const Index d = c.embedding_dim, h = c.hidden_dim, v = vocab_size;
  Params p;
  p.embedding = MatrixXd::Zero(d, v);
  for (int l = 0; l < c.num_layers; ++l) {
    const Index in = l == 0 ? d : h;
    p.encoder.push_back({MatrixXd::Zero(3 * h, in), MatrixXd::Zero(3 * h, h), VectorXd::Zero(3 * h)});
    p.decoder.push_back({MatrixXd::Zero(3 * h, in), MatrixXd::Zero(3 * h, h), VectorXd::Zero(3 * h)});
  }
  if (c.attention) {
    p.attn_w = MatrixXd::Zero(h, 2 * h);
    p.attn_b = VectorXd::Zero(h);
  }
  p.out_w = MatrixXd::Zero(v, h);
  p.out_b = VectorXd::Zero(v);
  return p;
}

std::vector<ParamBlock> Params::blocks() {
  std::vector<ParamBlock> out;
  auto add_m = [&](std::string name, MatrixXd& m) {
    out.push_back({std::move(name), m.data(), m.rows(), m.cols()});
  };
  auto add_v = [&](std::string name, VectorXd& v) {
    out.push_back({std::move(name), v.data(), v.size(), 1});
  };
  add_m("embedding", embedding);
  auto add_stack = [&](const std::string& prefix, std::vector<GruLayer>& layers) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string base = prefix + "." + std::to_string(l) + ".";
      add_m(base + "wx", layers[l].wx);
      add_m(base + "wh", layers[l].wh);
      add_v(base + "b", layers[l].b);
    }
  };
  add_stack("encoder", encoder);
  add_stack("decoder", decoder);
  if (attn_w.size() > 0) {
    add_m("attn_w", attn_w);
    add_v("attn_b", attn_b);
  }
  add_m("out_w", out_w);
  add_v("out_b", out_b);
  return out;
}

std::size_t Params::count() const {
  std::size_t n = 0;
  for (const auto& b : const_cast<Params*>(this)->blocks()) n += static_cast<std::size_t>(b.rows * b.cols);
  return n;
}

void Params::set_zero() {
  for (auto& b : blocks()) std::fill(b.data, b.data + b.rows * b.cols, 0.0);
}

// ----------------------------------------------------------- GRU kernels

namespace {

VectorXd logistic(const VectorXd& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

VectorXd log_softmax(const VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

struct GruCache {
  VectorXd x, h_prev, z, r, n, un;
};

VectorXd gru_forward(const GruLayer& layer, const VectorXd& x, const VectorXd& h_prev,
                     GruCache* cache) {
  const Index h = h_prev.size();
  const VectorXd a = layer.wx * x + layer.b;
  const VectorXd u = layer.wh * h_prev;
  VectorXd z = logistic(a.segment(0, h) + u.segment(0, h));
  VectorXd r = logistic(a.segment(h, h) + u.segment(h, h));
  VectorXd un = u.segment(2 * h, h);
  VectorXd n = (a.segment(2 * h, h).array() + r.array() * un.array()).tanh();
  VectorXd out = (1.0 - z.array()) * n.array() + z.array() * h_prev.array();
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->un = std::move(un);
  }
  return out;
}

// dh: gradient w.r.t. the layer output. Writes dx and dh_prev, accumulates
// parameter gradients into `grad`.
void gru_backward(const GruLayer& layer, const GruCache& c, const VectorXd& dh, GruLayer& grad,
                  VectorXd& dx, VectorXd& dh_prev) {
  const Index h = dh.size();
  const ArrayXd z = c.z.array(), r = c.r.array(), n = c.n.array();
  const ArrayXd dn = dh.array() * (1.0 - z);
  const ArrayXd dz = dh.array() * (c.h_prev.array() - n);
  const ArrayXd dn_pre = dn * (1.0 - n.square());
  const ArrayXd dr = dn_pre * c.un.array();
  const ArrayXd dz_pre = dz * z * (1.0 - z);
  const ArrayXd dr_pre = dr * r * (1.0 - r);

  VectorXd da(3 * h), du(3 * h);
  da << dz_pre, dr_pre, dn_pre;
  du << dz_pre, dr_pre, dn_pre * r;

  grad.wx.noalias() += da * c.x.transpose();
  grad.b += da;
  grad.wh.noalias() += du * c.h_prev.transpose();
  dx.noalias() = layer.wx.transpose() * da;
  dh_prev = (dh.array() * z).matrix();
  dh_prev.noalias() += layer.wh.transpose() * du;
}

}  // namespace

// ---------------------------------------------------------------- model

struct Seq2SeqModel::EncoderOutput {
  MatrixXd top;                 // H x m, top-layer states
  std::vector<VectorXd> final;  // per layer
};

struct Seq2SeqModel::DecoderState {
  std::vector<VectorXd> h;  // per layer
};

Seq2SeqModel::Seq2SeqModel(ModelConfig config, Vocab vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  params_ = Params::shaped(config_, vocab_.size());
  Rng rng(seed);
  const double a = 1.0 / std::sqrt(static_cast<double>(config_.hidden_dim));
  for (auto& b : params_.blocks()) {
    for (Index i = 0; i < b.rows * b.cols; ++i) b.data[i] = rng.uniform(-a, a);
  }
}

Example Seq2SeqModel::encode(const corpus::DialogPair& pair) const {
  return {vocab_.encode(pair.post), vocab_.encode(pair.response)};
}

Seq2SeqModel::EncoderOutput Seq2SeqModel::run_encoder(const std::vector<int>& post) const {
  const Index h = config_.hidden_dim;
  EncoderOutput out;
  out.final.assign(params_.encoder.size(), VectorXd::Zero(h));
  out.top.resize(h, static_cast<Index>(post.size()));
  for (std::size_t t = 0; t < post.size(); ++t) {
    VectorXd x = params_.embedding.col(post[t]);
    for (std::size_t l = 0; l < params_.encoder.size(); ++l) {
      out.final[l] = gru_forward(params_.encoder[l], x, out.final[l], nullptr);
      x = out.final[l];
    }
    out.top.col(static_cast<Index>(t)) = x;
  }
  return out;
}

Eigen::VectorXd Seq2SeqModel::decoder_step(int token, DecoderState& state,
                                           const EncoderOutput& enc) const {
  VectorXd x = params_.embedding.col(token);
  for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
    state.h[l] = gru_forward(params_.decoder[l], x, state.h[l], nullptr);
    x = state.h[l];
  }
  VectorXd feature;
  if (config_.attention && enc.top.cols() > 0) {
    const VectorXd alpha = log_softmax(enc.top.transpose() * x).array().exp();
    VectorXd sc(2 * x.size());
    sc << x, enc.top * alpha;
    feature = (params_.attn_w * sc + params_.attn_b).array().tanh();
  } else if (config_.attention) {
    VectorXd sc = VectorXd::Zero(2 * x.size());
    sc.head(x.size()) = x;
    feature = (params_.attn_w * sc + params_.attn_b).array().tanh();
  } else {
    feature = x;
  }
  return log_softmax(params_.out_w * feature + params_.out_b);
}

namespace {

struct StepCache {
  std::vector<GruCache> gru;
  VectorXd s, alpha, sc, g, probs;
};

}  // namespace

double Seq2SeqModel::loss(const Example& example) const {
  const EncoderOutput enc = run_encoder(example.post);
  DecoderState state{enc.final};
  double nll = 0.0;
  int input = Vocab::kBosId;
  for (std::size_t t = 0; t <= example.response.size(); ++t) {
    const int target = t < example.response.size() ? example.response[t] : Vocab::kEosId;
    nll -= decoder_step(input, state, enc)(target);
    input = target;
  }
  return nll;
}

std::vector<Eigen::VectorXd> Seq2SeqModel::step_distributions(const Example& example) const {
  const EncoderOutput enc = run_encoder(example.post);
  DecoderState state{enc.final};
  std::vector<VectorXd> out;
  int input = Vocab::kBosId;
  for (std::size_t t = 0; t <= example.response.size(); ++t) {
    out.push_back(decoder_step(input, state, enc).array().exp());
    input = t < example.response.size() ? example.response[t] : Vocab::kEosId;
  }
  return out;
}

double Seq2SeqModel::loss_and_gradient(const Example& ex, Params& grad) const {
  const auto& p = params_;
  const Index h = config_.hidden_dim;
  const std::size_t layers = p.encoder.size();
  const std::size_t m = ex.post.size();
  const bool attend = config_.attention;

  // Encoder forward.
  std::vector<std::vector<GruCache>> enc_cache(m, std::vector<GruCache>(layers));
  std::vector<VectorXd> state(layers, VectorXd::Zero(h));
  MatrixXd top(h, static_cast<Index>(m));
  for (std::size_t t = 0; t < m; ++t) {
    VectorXd x = p.embedding.col(ex.post[t]);
    for (std::size_t l = 0; l < layers; ++l) {
      state[l] = gru_forward(p.encoder[l], x, state[l], &enc_cache[t][l]);
      x = state[l];
    }
    top.col(static_cast<Index>(t)) = x;
  }

  // Decoder forward with teacher forcing.
  const std::size_t steps = ex.response.size() + 1;
  std::vector<int> inputs(steps), targets(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    inputs[t] = t == 0 ? Vocab::kBosId : ex.response[t - 1];
    targets[t] = t < ex.response.size() ? ex.response[t] : Vocab::kEosId;
  }
  std::vector<StepCache> dec(steps);
  double nll = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    auto& sc = dec[t];
    sc.gru.resize(layers);
    VectorXd x = p.embedding.col(inputs[t]);
    for (std::size_t l = 0; l < layers; ++l) {
      state[l] = gru_forward(p.decoder[l], x, state[l], &sc.gru[l]);
      x = state[l];
    }
    sc.s = x;
    const VectorXd* feature = &sc.s;
    if (attend) {
      sc.alpha = m > 0 ? VectorXd(log_softmax(top.transpose() * sc.s).array().exp())
                       : VectorXd();
      sc.sc.resize(2 * h);
      sc.sc << sc.s, (m > 0 ? VectorXd(top * sc.alpha) : VectorXd(VectorXd::Zero(h)));
      sc.g = (p.attn_w * sc.sc + p.attn_b).array().tanh();
      feature = &sc.g;
    }
    const VectorXd logp = log_softmax(p.out_w * *feature + p.out_b);
    nll -= logp(targets[t]);
    sc.probs = logp.array().exp();
  }

  // Decoder backward.
  MatrixXd dtop = MatrixXd::Zero(h, static_cast<Index>(m));
  std::vector<VectorXd> dstate(layers, VectorXd::Zero(h));
  VectorXd dx(h), dh_prev(h);
  for (std::size_t t = steps; t-- > 0;) {
    const auto& sc = dec[t];
    VectorXd dlogits = sc.probs;
    dlogits(targets[t]) -= 1.0;
    const VectorXd& feature = attend ? sc.g : sc.s;
    grad.out_w.noalias() += dlogits * feature.transpose();
    grad.out_b += dlogits;
    VectorXd dfeature = p.out_w.transpose() * dlogits;

    VectorXd ds;
    if (attend) {
      const VectorXd dg_pre = dfeature.array() * (1.0 - sc.g.array().square());
      grad.attn_w.noalias() += dg_pre * sc.sc.transpose();
      grad.attn_b += dg_pre;
      const VectorXd dsc = p.attn_w.transpose() * dg_pre;
      ds = dsc.head(h);
      if (m > 0) {
        const VectorXd dc = dsc.tail(h);
        dtop.noalias() += dc * sc.alpha.transpose();
        const VectorXd dalpha = top.transpose() * dc;
        const VectorXd de = sc.alpha.array() * (dalpha.array() - sc.alpha.dot(dalpha));
        ds.noalias() += top * de;
        dtop.noalias() += sc.s * de.transpose();
      }
    } else {
      ds = std::move(dfeature);
    }
    dstate[layers - 1] += ds;

    for (std::size_t l = layers; l-- > 0;) {
      gru_backward(p.decoder[l], sc.gru[l], dstate[l], grad.decoder[l], dx, dh_prev);
      dstate[l] = dh_prev;
      if (l > 0) {
        dstate[l - 1] += dx;
      } else {
        grad.embedding.col(inputs[t]) += dx;
      }
    }
  }

  // Encoder backward; dstate now holds the gradient w.r.t. the final
  // encoder states.
  for (std::size_t t = m; t-- > 0;) {
    dstate[layers - 1] += dtop.col(static_cast<Index>(t));
    for (std::size_t l = layers; l-- > 0;) {
      gru_backward(p.encoder[l], enc_cache[t][l], dstate[l], grad.encoder[l], dx, dh_prev);
      dstate[l] = dh_prev;
      if (l > 0) {
        dstate[l - 1] += dx;
      } else {
        grad.embedding.col(ex.post[t]) += dx;
      }
    }
  }
  return nll;
}

gen::GeneratorOutput Seq2SeqModel::greedy(const Tokens& post, int max_length) const {
  if (!trained_) throw Error("seq2seq model is not trained");
  if (max_length < 1) throw Error("seq2seq: max_length must be >= 1");
  const EncoderOutput enc = run_encoder(vocab_.encode(post));
  DecoderState state{enc.final};
  gen::GeneratorOutput out;
  double total = 0.0;
  int steps = 0;
  int token = Vocab::kBosId;
  while (static_cast<int>(out.tokens.size()) < max_length) {
    const VectorXd logp = decoder_step(token, state, enc);
    Index best = 0;
    logp.maxCoeff(&best);  // first maximum on ties
    total += logp(best);
    ++steps;
    if (best == Vocab::kEosId) break;
    token = static_cast<int>(best);
    out.tokens.push_back(vocab_.token(token));
  }
  out.confidence = total / steps;
  return out;
}

gen::GeneratorOutput Seq2SeqModel::beam(const Tokens& post, int beam_width,
                                        int max_length) const {
  if (!trained_) throw Error("seq2seq model is not trained");
  if (beam_width < 1) throw Error("seq2seq: beam_width must be >= 1");
  if (max_length < 1) throw Error("seq2seq: max_length must be >= 1");
  const EncoderOutput enc = run_encoder(vocab_.encode(post));

  struct Hyp {
    std::vector<int> tokens;
    double logp = 0.0;
    int steps = 0;
    DecoderState state;
    double score() const { return steps == 0 ? 0.0 : logp / steps; }
  };
  struct Expansion {
    std::size_t parent;
    int token;
    double logp;
    int steps;
    double score() const { return logp / steps; }
  };

  std::vector<Hyp> live{{{}, 0.0, 0, DecoderState{enc.final}}};
  std::vector<Hyp> finished;
  const auto width = static_cast<std::size_t>(beam_width);

  for (int depth = 0; !live.empty() && finished.size() < width; ++depth) {
    if (depth == max_length) break;
    std::vector<Expansion> expansions;
    std::vector<DecoderState> next_states;
    for (std::size_t i = 0; i < live.size(); ++i) {
      DecoderState st = live[i].state;
      const int last = live[i].tokens.empty() ? Vocab::kBosId : live[i].tokens.back();
      const VectorXd logp = decoder_step(last, st, enc);
      next_states.push_back(std::move(st));
      std::vector<int> order(static_cast<std::size_t>(logp.size()));
      std::iota(order.begin(), order.end(), 0);
      const auto k = std::min<std::size_t>(width, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](int a, int b) { return logp(a) > logp(b) || (logp(a) == logp(b) && a < b); });
      for (std::size_t j = 0; j < k; ++j) {
        expansions.push_back({i, order[j], live[i].logp + logp(order[j]), live[i].steps + 1});
      }
    }
    std::stable_sort(expansions.begin(), expansions.end(),
                     [](const Expansion& a, const Expansion& b) { return a.score() > b.score(); });
    if (expansions.size() > width) expansions.resize(width);

    std::vector<Hyp> next;
    for (const auto& e : expansions) {
      Hyp hyp{live[e.parent].tokens, e.logp, e.steps, next_states[e.parent]};
      if (e.token == Vocab::kEosId) {
        finished.push_back(std::move(hyp));
      } else {
        hyp.tokens.push_back(e.token);
        next.push_back(std::move(hyp));
      }
    }
    live = std::move(next);
  }

  const Hyp* best = nullptr;
  for (const auto* pool : {&finished, &live}) {
    for (const auto& h : *pool) {
      if (!best || h.score() > best->score()) best = &h;
    }
  }
  gen::GeneratorOutput out;
  for (int id : best->tokens) out.tokens.push_back(vocab_.token(id));
  out.confidence = best->score();
  return out;
}

gen::GeneratorOutput Seq2SeqModel::decode(const Tokens& post, const DecodeConfig& config) const {
  if (config.beam_width <= 1) return greedy(post, config.max_length);
  return beam(post, config.beam_width, config.max_length);
}

// ---------------------------------------------------------- persistence

std::string Seq2SeqModel::to_json() const {
  json blocks = json::array();
  for (const auto& b : const_cast<Params&>(params_).blocks()) {
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(b.rows * b.cols));
    for (Index r = 0; r < b.rows; ++r) {
      for (Index c = 0; c < b.cols; ++c) row_major.push_back(b.data[r + c * b.rows]);
    }
    blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"data", row_major}});
  }
  json j = {{"format", "e2c.seq2seq"},
            {"version", 1},
            {"config",
             {{"embedding_dim", config_.embedding_dim},
              {"hidden_dim", config_.hidden_dim},
              {"num_layers", config_.num_layers},
              {"attention", config_.attention},
              {"min_count", config_.min_count}}},
            {"trained", trained_},
            {"vocab", vocab_.tokens()},
            {"params", blocks}};
  return j.dump();
}

Seq2SeqModel Seq2SeqModel::from_json(std::string_view text) {
  json j = json::parse(text);
  if (j.value("format", "") != "e2c.seq2seq" || j.value("version", 0) != 1) {
    throw Error("not an e2c.seq2seq v1 model");
  }
  ModelConfig config;
  const auto& c = j.at("config");
  config.embedding_dim = c.at("embedding_dim");
  config.hidden_dim = c.at("hidden_dim");
  config.num_layers = c.at("num_layers");
  config.attention = c.at("attention");
  config.min_count = c.at("min_count");
  Seq2SeqModel model(config, Vocab(j.at("vocab").get<std::vector<std::string>>()), 0);
  auto blocks = model.params_.blocks();
  const auto& stored = j.at("params");
  if (stored.size() != blocks.size()) throw Error("seq2seq model: parameter block count mismatch");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    const auto& s = stored[i];
    if (s.at("name") != b.name || s.at("rows") != b.rows || s.at("cols") != b.cols) {
      throw Error("seq2seq model: unexpected parameter block '" + s.at("name").get<std::string>() + "'");
    }
    const auto& data = s.at("data");
    for (Index r = 0; r < b.rows; ++r) {
      for (Index col = 0; col < b.cols; ++col) {
        double v = data.at(static_cast<std::size_t>(r * b.cols + col));
        if (!std::isfinite(v)) throw Error("seq2seq model: non-finite parameter in " + b.name);
        b.data[r + col * b.rows] = v;
      }
    }
  }
  model.trained_ = j.value("trained", false);
  return model;
}

void Seq2SeqModel::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

Seq2SeqModel Seq2SeqModel::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

// -------------------------------------------------------------- training

double mean_token_loss(const Seq2SeqModel& model, const std::vector<corpus::DialogPair>& pairs) {
  double nll = 0.0;
  double tokens = 0.0;
  for (const auto& p : pairs) {
    const auto ex = model.encode(p);
    nll += model.loss(ex);
    tokens += static_cast<double>(ex.response.size() + 1);
  }
  return tokens > 0 ? nll / tokens : 0.0;
}

Seq2SeqModel train_seq2seq(const ModelConfig& model_config,
                           const std::vector<corpus::DialogPair>& pairs, const TrainConfig& train,
                           TrainingLog* log, const EpochCallback& on_epoch) {
  if (pairs.empty()) throw Error("seq2seq: no training pairs");
  if (train.batch_size < 1) throw ConfigError("seq2seq: batch_size must be >= 1");
  if (train.epochs < 0) throw ConfigError("seq2seq: epochs must be >= 0");

  Seq2SeqModel model(model_config, Vocab::build(pairs, model_config.min_count), train.seed);
  std::vector<Example> examples;
  examples.reserve(pairs.size());
  for (const auto& p : pairs) examples.push_back(model.encode(p));

  TrainingLog local;
  TrainingLog& out = log ? *log : local;
  out.loss_history.clear();
  out.loss_history.push_back(mean_token_loss(model, pairs));

  Params grad = Params::shaped(model_config, model.vocab().size());
  Params m1 = grad, m2 = grad;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  Rng rng(splitmix64(train.seed));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_nll = 0.0, epoch_tokens = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train.batch_size));
      grad.set_zero();
      double batch_nll = 0.0, batch_tokens = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[order[i]];
        batch_nll += model.loss_and_gradient(ex, grad);
        batch_tokens += static_cast<double>(ex.response.size() + 1);
      }
      if (!std::isfinite(batch_nll)) {
        std::ostringstream msg;
        msg << "seq2seq: non-finite loss at epoch " << epoch << ", batch starting at " << start;
        throw Error(msg.str());
      }
      epoch_nll += batch_nll;
      epoch_tokens += batch_tokens;

      auto gblocks = grad.blocks();
      double sq = 0.0;
      for (const auto& b : gblocks) {
        for (Index i = 0; i < b.rows * b.cols; ++i) {
          b.data[i] /= batch_tokens;
          sq += b.data[i] * b.data[i];
        }
      }
      const double norm = std::sqrt(sq);
      const double clip = (train.clip_norm > 0 && norm > train.clip_norm) ? train.clip_norm / norm : 1.0;

      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto pblocks = model.params().blocks();
      auto b1 = m1.blocks(), b2 = m2.blocks();
      for (std::size_t k = 0; k < pblocks.size(); ++k) {
        const Index n = pblocks[k].rows * pblocks[k].cols;
        for (Index i = 0; i < n; ++i) {
          const double g = gblocks[k].data[i] * clip;
          b1[k].data[i] = beta1 * b1[k].data[i] + (1 - beta1) * g;
          b2[k].data[i] = beta2 * b2[k].data[i] + (1 - beta2) * g * g;
          pblocks[k].data[i] -=
              train.learning_rate * (b1[k].data[i] / c1) / (std::sqrt(b2[k].data[i] / c2) + eps);
        }
      }
    }
    const double mean = epoch_nll / epoch_tokens;
    out.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  model.mark_trained();
  out.final_loss = mean_token_loss(model, pairs);
  return model;
}

}  // namespace e2c::seq2seq
