#pragma once

#include <array>
#include <memory>

#include "tide/backbone.hpp"

namespace tide {

/// Bottleneck width of the colour attention, r = max(4, C/16).
int color_reduction(int channels);
/// Groups of the denoising convolution, max(1, min(C/8, C)).
int denoise_groups(int channels);

/// Per-level specialized processing. One instance per decoder level.
template <typename T>
class SpecializedBlock {
 public:
  virtual ~SpecializedBlock() = default;
  virtual ag::Var<T> operator()(const ag::Var<T>& x) const = 0;
};

/// x * sigmoid(W2 relu(W1 gap(x))).
template <typename T>
class ColorBlock final : public SpecializedBlock<T> {
 public:
  ColorBlock(nn::ParamStore<T>& ps, const std::string& name, int channels);
  ag::Var<T> operator()(const ag::Var<T>& x) const override { return gate_(x); }
  const nn::ChannelGate<T>& gate() const { return gate_; }

 private:
  nn::ChannelGate<T> gate_;
};

/// x + phi_c(x).
template <typename T>
class ContrastBlock final : public SpecializedBlock<T> {
 public:
  ContrastBlock(nn::ParamStore<T>& ps, const std::string& name, int channels, double slope);
  ag::Var<T> operator()(const ag::Var<T>& x) const override { return x + branch_(x); }
  const nn::ResidualBranch<T>& branch() const { return branch_; }

 private:
  nn::ResidualBranch<T> branch_;
};

/// x + sum_j phi_{d,j}(x); every branch sees the same x.
template <typename T>
class DetailBlock final : public SpecializedBlock<T> {
 public:
  DetailBlock(nn::ParamStore<T>& ps, const std::string& name, int channels, int branches, double slope);
  ag::Var<T> operator()(const ag::Var<T>& x) const override;
  const std::vector<nn::ResidualBranch<T>>& branches() const { return branches_; }

 private:
  std::vector<nn::ResidualBranch<T>> branches_;
};

/// Conv1x1(GConv3x3(phi_n(x))).
template <typename T>
class DenoiseBlock final : public SpecializedBlock<T> {
 public:
  DenoiseBlock(nn::ParamStore<T>& ps, const std::string& name, int channels, double slope);
  ag::Var<T> operator()(const ag::Var<T>& x) const override { return mix_(grouped_(pre_(x))); }
  const nn::Conv<T>& grouped() const { return grouped_; }

 private:
  nn::ConvBlock<T> pre_;
  nn::Conv<T> grouped_;
  nn::Conv<T> mix_;
};

/// Specialized restoration decoder: from the bottleneck upward, each level
/// upsamples 2x, concatenates the skip f_i, calibrates to c_i channels and
/// applies the kind's block. Output H = (tanh(conv(x)) + 1) / 2.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg, DegradationKind kind);
  ag::Var<T> decode(const FeatureHierarchy<T>& feats) const;

  DegradationKind kind() const { return kind_; }
  const SpecializedBlock<T>& block(int level) const { return *blocks_.at(level); }
  const nn::Conv<T>& output() const { return out_; }

 private:
  ModelConfig cfg_;
  DegradationKind kind_ = DegradationKind::Color;
  std::vector<nn::ConvBlock<T>> calibrate_;                 // index = level i
  std::vector<std::shared_ptr<SpecializedBlock<T>>> blocks_;  // index = level i
  nn::Conv<T> out_;
};

}  // namespace tide
