#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "perminv/mat.hpp"
#include "perminv/mlp.hpp"
#include "perminv/tape.hpp"

namespace perminv {

/// A state as per-class object collections plus a non-exchangeable ego
/// vector. Class j is an m_j x n_j matrix, one object per row; m_j may be 0.
struct ObjectSet {
  std::vector<Mat> classes;
  std::vector<double> ego;

  std::size_t object_count() const;
  friend bool operator==(const ObjectSet&, const ObjectSet&) = default;
};

struct ClassSpec {
  std::size_t input_dim = 2;
  std::size_t abstract_dim = 1;
  std::vector<std::size_t> filter_hidden{64};
  std::vector<std::size_t> abstraction_hidden{64};

  friend bool operator==(const ClassSpec&, const ClassSpec&) = default;
};

struct EncoderSpec {
  std::vector<ClassSpec> classes;
  std::size_t ego_dim = 0;

  std::size_t abstract_dim() const;
  std::size_t output_dim() const { return abstract_dim() + ego_dim; }
  void validate() const;

  /// ceil(average_count * input_dim), at least 1.
  static std::size_t default_abstract_dim(double average_count, std::size_t input_dim);

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

/// Filter network (n -> 1) scoring each object and abstraction network
/// (n -> k) projecting it. Both run row-wise with shared weights.
struct ClassEncoder {
  Mlp filter;
  Mlp abstraction;

  ClassEncoder() = default;
  ClassEncoder(const ClassSpec& spec, std::uint64_t seed);
  ClassEncoder(Mlp filter_net, Mlp abstraction_net);

  std::size_t input_dim() const { return filter.spec().input_dim(); }
  std::size_t abstract_dim() const { return abstraction.spec().output_dim(); }
  std::vector<Mat*> parameters();

  friend bool operator==(const ClassEncoder&, const ClassEncoder&) = default;
};

class SetEncoder {
 public:
  SetEncoder() = default;
  SetEncoder(EncoderSpec spec, std::uint64_t seed);
  SetEncoder(EncoderSpec spec, std::vector<ClassEncoder> classes);

  const EncoderSpec& spec() const { return spec_; }
  std::size_t class_count() const { return classes_.size(); }
  std::size_t output_dim() const { return spec_.output_dim(); }
  ClassEncoder& class_encoder(std::size_t j) { return classes_.at(j); }
  const ClassEncoder& class_encoder(std::size_t j) const { return classes_.at(j); }
  std::vector<Mat*> parameters();

  friend bool operator==(const SetEncoder&, const SetEncoder&) = default;

 private:
  EncoderSpec spec_;
  std::vector<ClassEncoder> classes_;
};

/// Softmax of the filter scores. Throws std::invalid_argument for m = 0.
std::vector<double> attention_weights(const ClassEncoder& enc, const Mat& objects);

/// Attention-weighted sum of abstracted objects (length k). The empty set
/// maps to the zero vector.
std::vector<double> encode_class(const ClassEncoder& enc, const Mat& objects);

/// Same quantity through the sum-decomposition rho(sum_j phi(s_j)) with
/// phi(s) = abstraction(s) * exp(filter(s) - c) and rho dividing by
/// sum_j exp(filter(s_j) - c), c the max score. Throws for m = 0.
std::vector<double> encode_phi_rho(const ClassEncoder& enc, const Mat& objects);

/// Per-class encodings concatenated in class order, then the ego vector.
std::vector<double> encode_state(const SetEncoder& enc, const ObjectSet& state);

/// Batched encode_state on a tape: one output row per state.
Var encode_batch(const SetEncoder& enc, Tape& tape, std::span<const ObjectSet* const> states);

/// Gradients of dot(encode_state(state), upstream) with respect to every
/// encoder parameter.
Gradients encoder_gradients(const SetEncoder& enc, const ObjectSet& state,
                            std::span<const double> upstream);

}  // namespace perminv
