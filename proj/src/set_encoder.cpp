#include "perminv/set_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace perminv {

namespace {

MlpSpec net_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  MlpSpec spec;
  spec.widths.push_back(in);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(out);
  spec.activation = Activation::relu;
  return spec;
}

void check_objects(const ClassEncoder& enc, const Mat& objects) {
  if (objects.cols() != enc.input_dim()) {
    throw ShapeError("encoder: objects have dimension " + std::to_string(objects.cols()) +
                     ", class expects " + std::to_string(enc.input_dim()));
  }
}

void check_state(const SetEncoder& enc, const ObjectSet& state) {
  if (state.classes.size() != enc.class_count()) {
    throw ShapeError("encoder: state has " + std::to_string(state.classes.size()) +
                     " classes, encoder has " + std::to_string(enc.class_count()));
  }
  for (std::size_t j = 0; j < enc.class_count(); ++j) {
    check_objects(enc.class_encoder(j), state.classes[j]);
  }
  if (state.ego.size() != enc.spec().ego_dim) {
    throw ShapeError("encoder: ego has dimension " + std::to_string(state.ego.size()) +
                     ", expected " + std::to_string(enc.spec().ego_dim));
  }
}

}  // namespace

std::size_t ObjectSet::object_count() const {
  std::size_t n = 0;
  for (const Mat& c : classes) n += c.rows();
  return n;
}

std::size_t EncoderSpec::abstract_dim() const {
  std::size_t k = 0;
  for (const auto& c : classes) k += c.abstract_dim;
  return k;
}

void EncoderSpec::validate() const {
  for (const auto& c : classes) {
    if (c.input_dim == 0 || c.abstract_dim == 0) {
      throw std::invalid_argument("EncoderSpec: input and abstract dims must be >= 1");
    }
  }
}

std::size_t EncoderSpec::default_abstract_dim(double average_count, std::size_t input_dim) {
  const double k = std::ceil(average_count * static_cast<double>(input_dim) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

ClassEncoder::ClassEncoder(const ClassSpec& spec, std::uint64_t seed)
    : filter(net_spec(spec.input_dim, spec.filter_hidden, 1), derive_seed(seed, "filter")),
      abstraction(net_spec(spec.input_dim, spec.abstraction_hidden, spec.abstract_dim),
                  derive_seed(seed, "abstraction")) {}

ClassEncoder::ClassEncoder(Mlp filter_net, Mlp abstraction_net)
    : filter(std::move(filter_net)), abstraction(std::move(abstraction_net)) {
  if (filter.spec().output_dim() != 1) {
    throw ShapeError("ClassEncoder: filter network must output one score per object");
  }
  if (filter.spec().input_dim() != abstraction.spec().input_dim()) {
    throw ShapeError("ClassEncoder: filter and abstraction input dims differ");
  }
}

std::vector<Mat*> ClassEncoder::parameters() {
  auto out = filter.parameters();
  auto more = abstraction.parameters();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

SetEncoder::SetEncoder(EncoderSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t j = 0; j < spec_.classes.size(); ++j) {
    classes_.emplace_back(spec_.classes[j], derive_seed(seed, "class" + std::to_string(j)));
  }
}

SetEncoder::SetEncoder(EncoderSpec spec, std::vector<ClassEncoder> classes)
    : spec_(std::move(spec)), classes_(std::move(classes)) {
  if (classes_.size() != spec_.classes.size()) {
    throw ShapeError("SetEncoder: class count does not match spec");
  }
  for (std::size_t j = 0; j < classes_.size(); ++j) {
    if (classes_[j].input_dim() != spec_.classes[j].input_dim ||
        classes_[j].abstract_dim() != spec_.classes[j].abstract_dim) {
      throw ShapeError("SetEncoder: class " + std::to_string(j) + " networks do not match spec");
    }
  }
}

std::vector<Mat*> SetEncoder::parameters() {
  std::vector<Mat*> out;
  for (auto& c : classes_) {
    auto p = c.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<double> attention_weights(const ClassEncoder& enc, const Mat& objects) {
  check_objects(enc, objects);
  if (objects.rows() == 0) {
    throw std::invalid_argument("attention_weights: empty object set");
  }
  const Mat scores = enc.filter.forward(objects);
  return softmax_column(scores.data());
}

std::vector<double> encode_class(const ClassEncoder& enc, const Mat& objects) {
  check_objects(enc, objects);
  std::vector<double> out(enc.abstract_dim(), 0.0);
  if (objects.rows() == 0) return out;
  const auto w = attention_weights(enc, objects);
  const Mat z = enc.abstraction.forward(objects);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zi = z.row_span(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[i] * zi[c];
  }
  return out;
}

std::vector<double> encode_phi_rho(const ClassEncoder& enc, const Mat& objects) {
  check_objects(enc, objects);
  if (objects.rows() == 0) throw std::invalid_argument("encode_phi_rho: empty object set");
  const Mat scores = enc.filter.forward(objects);
  const Mat z = enc.abstraction.forward(objects);
  const double c = *std::max_element(scores.data().begin(), scores.data().end());

  std::vector<double> phi_sum(z.cols(), 0.0);
  double normalizer = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double e = std::exp(scores(i, 0) - c);
    normalizer += e;
    auto zi = z.row_span(i);
    for (std::size_t k = 0; k < phi_sum.size(); ++k) phi_sum[k] += zi[k] * e;
  }
  for (double& v : phi_sum) v /= normalizer;
  return phi_sum;
}

std::vector<double> encode_state(const SetEncoder& enc, const ObjectSet& state) {
  check_state(enc, state);
  std::vector<double> out;
  out.reserve(enc.output_dim());
  for (std::size_t j = 0; j < enc.class_count(); ++j) {
    auto part = encode_class(enc.class_encoder(j), state.classes[j]);
    out.insert(out.end(), part.begin(), part.end());
  }
  out.insert(out.end(), state.ego.begin(), state.ego.end());
  return out;
}

Var encode_batch(const SetEncoder& enc, Tape& tape, std::span<const ObjectSet* const> states) {
  if (states.empty()) throw std::invalid_argument("encode_batch: no states");
  for (const ObjectSet* s : states) check_state(enc, *s);

  std::vector<Var> parts;
  for (std::size_t j = 0; j < enc.class_count(); ++j) {
    const ClassEncoder& ce = enc.class_encoder(j);
    std::vector<std::size_t> offsets{0};
    for (const ObjectSet* s : states) offsets.push_back(offsets.back() + s->classes[j].rows());
    Mat stacked(offsets.back(), ce.input_dim());
    std::size_t row = 0;
    for (const ObjectSet* s : states) {
      const auto src = s->classes[j].data();
      std::copy(src.begin(), src.end(), stacked.data().begin() + row * ce.input_dim());
      row += s->classes[j].rows();
    }
    const Var x = tape.constant(std::move(stacked));
    const Var scores = ce.filter.forward(tape, x);
    const Var weights = tape.segment_softmax(scores, offsets);
    const Var z = ce.abstraction.forward(tape, x);
    parts.push_back(tape.segment_weighted_sum(z, weights, std::move(offsets)));
  }
  const std::size_t ego_dim = enc.spec().ego_dim;
  if (ego_dim > 0) {
    Mat ego(states.size(), ego_dim);
    for (std::size_t b = 0; b < states.size(); ++b) {
      std::copy(states[b]->ego.begin(), states[b]->ego.end(), ego.row_span(b).begin());
    }
    parts.push_back(tape.constant(std::move(ego)));
  }
  if (parts.empty()) throw std::invalid_argument("encode_batch: encoder has no outputs");
  return parts.size() == 1 ? parts.front() : tape.concat_cols(parts);
}

Gradients encoder_gradients(const SetEncoder& enc, const ObjectSet& state,
                            std::span<const double> upstream) {
  if (upstream.size() != enc.output_dim()) {
    throw ShapeError("encoder_gradients: upstream has length " +
                     std::to_string(upstream.size()) + ", output has " +
                     std::to_string(enc.output_dim()));
  }
  Tape tape;
  const ObjectSet* batch[] = {&state};
  const Var out = encode_batch(enc, tape, batch);
  return tape.backward(out, Mat::row(upstream));
}

}  // namespace perminv
