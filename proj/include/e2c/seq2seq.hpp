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

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "e2c/common.hpp"
#include "e2c/corpus.hpp"
#include "e2c/generator.hpp"

namespace e2c::seq2seq {

struct ModelConfig {
  int embedding_dim = 32;
  int hidden_dim = 64;
  int num_layers = 1;
  bool attention = true;
  int min_count = 1;  // vocabulary threshold over training pairs
};

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.01;  // Adam step size
  double clip_norm = 5.0;       // global gradient norm
  int batch_size = 8;
  std::uint64_t seed = 1;
};

struct DecodeConfig {
  int beam_width = 1;  // 1 = greedy
  int max_length = 30;
};

/// Dense token ids. The reserved tokens occupy ids 0..4 in the order
/// `<pad> <s> </s> <unk> <sep>`; the rest follow in lexicographic order.
class Vocab {
 public:
  static constexpr int kPadId = 0, kBosId = 1, kEosId = 2, kUnkId = 3, kSepId = 4;

  Vocab();
  static Vocab build(const std::vector<corpus::DialogPair>& pairs, int min_count);
  explicit Vocab(std::vector<std::string> tokens);

  int id(const std::string& token) const;  // kUnkId when absent
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> encode(const Tokens& tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Input-to-hidden, hidden-to-hidden and bias blocks of one GRU layer,
/// stacked as [update; reset; candidate] (3H rows).
struct GruLayer {
  Eigen::MatrixXd wx;
  Eigen::MatrixXd wh;
  Eigen::VectorXd b;
};

struct ParamBlock {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
};

struct Params {
  Eigen::MatrixXd embedding;  // D x V, one column per token
  std::vector<GruLayer> encoder;
  std::vector<GruLayer> decoder;
  Eigen::MatrixXd attn_w;  // H x 2H, empty without attention
  Eigen::VectorXd attn_b;
  Eigen::MatrixXd out_w;  // V x H
  Eigen::VectorXd out_b;

  static Params shaped(const ModelConfig& config, int vocab_size);
  /// Every parameter tensor, in a fixed documented order.
  std::vector<ParamBlock> blocks();
  std::size_t count() const;
  void set_zero();
};

/// Token ids of one training pair.
struct Example {
  std::vector<int> post;
  std::vector<int> response;  // without boundary tokens
};

/// GRU encoder-decoder with optional dot-product attention over the
/// encoder's top-layer states:
///
///   g = tanh(A [s; c] + a),  logits = W g + b
///
/// where s is the top decoder state and c the attention context. Without
/// attention, logits = W s + b. The decoder is initialised with the final
/// encoder state of each layer.
class Seq2SeqModel {
 public:
  Seq2SeqModel(ModelConfig config, Vocab vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  Params& params() { return params_; }
  const Params& params() const { return params_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  Example encode(const corpus::DialogPair& pair) const;

  /// Summed negative log-likelihood of the response and its `</s>`.
  double loss(const Example& example) const;
  /// Same value; accumulates d(loss)/d(params) into `grad` (same shapes).
  double loss_and_gradient(const Example& example, Params& grad) const;

  /// Teacher-forced next-token distributions, one column per step.
  std::vector<Eigen::VectorXd> step_distributions(const Example& example) const;

  /// Greedy or beam decode. Throws when the model is untrained.
  gen::GeneratorOutput decode(const Tokens& post, const DecodeConfig& config = {}) const;
  gen::GeneratorOutput greedy(const Tokens& post, int max_length) const;
  gen::GeneratorOutput beam(const Tokens& post, int beam_width, int max_length) const;

  std::string to_json() const;
  static Seq2SeqModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Seq2SeqModel load(const std::filesystem::path& path);

 private:
  struct EncoderOutput;
  struct DecoderState;

  EncoderOutput run_encoder(const std::vector<int>& post) const;
  /// One decoder step from `state` fed `token`; returns log-probabilities.
  Eigen::VectorXd decoder_step(int token, DecoderState& state, const EncoderOutput& enc) const;

  ModelConfig config_;
  Vocab vocab_;
  Params params_;
  bool trained_ = false;
};

struct TrainingLog {
  /// [0] is the corpus loss at initialisation; [e] for e >= 1 is the mean
  /// token loss observed during epoch e. Units: nats per target token.
  std::vector<double> loss_history;
  double final_loss = 0.0;  // full-corpus mean token loss after training
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Teacher-forced cross-entropy, Adam, global-norm clipping. All randomness
/// comes from train.seed. Throws Error on empty pairs or a non-finite loss.
Seq2SeqModel train_seq2seq(const ModelConfig& model, const std::vector<corpus::DialogPair>& pairs,
                           const TrainConfig& train, TrainingLog* log = nullptr,
                           const EpochCallback& on_epoch = {});

/// Mean token loss over a set of pairs.
double mean_token_loss(const Seq2SeqModel& model, const std::vector<corpus::DialogPair>& pairs);

class Seq2SeqGenerator final : public gen::Generator {
 public:
  Seq2SeqGenerator(std::shared_ptr<const Seq2SeqModel> model, DecodeConfig decode)
      : model_(std::move(model)), decode_(decode) {}

  gen::GeneratorOutput generate(const Tokens& post) const override {
    return model_->decode(post, decode_);
  }
  std::string kind() const override { return "seq2seq"; }
  const Seq2SeqModel& model() const { return *model_; }

 private:
  std::shared_ptr<const Seq2SeqModel> model_;
  DecodeConfig decode_;
};

}  // namespace e2c::seq2seq
