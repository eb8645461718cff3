#include "tide/fusion.hpp"

namespace tide {

namespace {

template <typename T>
void check_counts(const ag::Var<T>& maps, const std::vector<ag::Var<T>>& hyps) {
  if (static_cast<int>(hyps.size()) != maps.shape().c)
    throw Error(ErrorCode::CountMismatch,
                std::to_string(maps.shape().c) + " maps but " + std::to_string(hyps.size()) + " hypotheses");
  for (const auto& h : hyps) {
    if (h.shape().n != maps.shape().n || h.shape().h != maps.shape().h || h.shape().w != maps.shape().w)
      throw Error(ErrorCode::BadShape, "hypothesis " + h.shape().str() + " does not match maps " + maps.shape().str());
  }
}

}  // namespace

template <typename T>
ag::Var<T> weighted_sum(const ag::Var<T>& weights, const std::vector<ag::Var<T>>& images) {
  check_counts(weights, images);
  ag::Var<T> acc;
  for (int k = 0; k < static_cast<int>(images.size()); ++k) {
    ag::Var<T> term = ag::slice_channels(weights, k, 1) * images[k];
    acc = acc.defined() ? acc + term : term;
  }
  return acc;
}

template <typename T>
ag::Var<T> fuse_direct(const ag::Var<T>& maps, const std::vector<ag::Var<T>>& hyps) {
  check_counts(maps, hyps);
  const Tensor<T>& m = maps.value();
  bool all_zero = true;
  for (std::size_t i = 0; i < m.size() && all_zero; ++i) all_zero = m[i] == T(0);
  if (all_zero) warn(Warning::DegenerateMaps, "direct fusion received all-zero degradation maps");
  const ag::Var<T> norm = ag::add_scalar(ag::sum_channels(maps), static_cast<T>(kDirectFusionFloor));
  return weighted_sum(maps / norm, hyps);
}

template <typename T>
LearnedFusion<T>::LearnedFusion(nn::ParamStore<T>& ps, const std::string& scope, int k_types, int hidden,
                                double slope)
    : in_(ps, nn::join(scope, "in"), k_types, hidden, 3),
      mid_(ps, nn::join(scope, "mid"), hidden, hidden, 3),
      out_(ps, nn::join(scope, "out"), hidden, k_types, 1),
      slope_(static_cast<T>(slope)) {}

template <typename T>
ag::Var<T> LearnedFusion<T>::logits(const ag::Var<T>& maps) const {
  ag::Var<T> h = ag::leaky_relu(in_(maps), slope_);
  h = h + ag::leaky_relu(mid_(h), slope_);
  return out_(h);
}

template <typename T>
typename LearnedFusion<T>::Result LearnedFusion<T>::fuse(const ag::Var<T>& maps,
                                                         const std::vector<ag::Var<T>>& hyps) const {
  check_counts(maps, hyps);
  Result r;
  r.weights = weights(maps);
  r.image = weighted_sum(r.weights, hyps);
  return r;
}

template class LearnedFusion<float>;
template class LearnedFusion<double>;
template ag::Var<float> fuse_direct(const ag::Var<float>&, const std::vector<ag::Var<float>>&);
template ag::Var<double> fuse_direct(const ag::Var<double>&, const std::vector<ag::Var<double>>&);
template ag::Var<float> weighted_sum(const ag::Var<float>&, const std::vector<ag::Var<float>>&);
template ag::Var<double> weighted_sum(const ag::Var<double>&, const std::vector<ag::Var<double>>&);

}  // namespace tide
