#include "actlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "actlab/error.hpp"

namespace actlab {

namespace {

struct Layer {
  const double* w;
  const double* b;
  std::size_t out;
  std::size_t in;
  std::size_t w_offset;
  std::size_t b_offset;
};

std::vector<Layer> layers_of(const FlatParams& p, std::string_view net, const MlpSpec& spec) {
  std::vector<Layer> layers;
  const std::size_t n = spec.hidden.size() + 1;
  layers.reserve(n);
  std::size_t in = spec.input_dim;
  for (std::size_t l = 0; l < n; ++l) {
    const std::size_t out = l + 1 < n ? spec.hidden[l] : spec.output_dim;
    const std::string prefix = std::string(net) + "." + std::to_string(l);
    const ParamBlock& w = p.layout.at(prefix + ".weight");
    const ParamBlock& b = p.layout.at(prefix + ".bias");
    if (w.shape != std::vector<std::size_t>{out, in} || b.shape != std::vector<std::size_t>{out})
      throw ConfigError("parameter layout does not match network '" + std::string(net) + "'");
    layers.push_back({p.data.data() + w.offset, p.data.data() + b.offset, out, in, w.offset,
                      b.offset});
    in = out;
  }
  return layers;
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("mlp: dims must be >= 1");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("mlp: hidden widths must be >= 1");
}

std::size_t ParamBlock::size() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void ParamLayout::add(std::string name, std::vector<std::size_t> shape) {
  ParamBlock b{std::move(name), std::move(shape), total};
  total += b.size();
  blocks.push_back(std::move(b));
}

const ParamBlock& ParamLayout::at(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw ConfigError("no parameter block named '" + std::string(name) + "'");
}

FlatParams FlatParams::zeros(const ParamLayout& layout) {
  return {layout, std::vector<double>(layout.total, 0.0)};
}

std::span<double> FlatParams::block(std::string_view name) {
  const auto& b = layout.at(name);
  return {data.data() + b.offset, b.size()};
}

std::span<const double> FlatParams::block(std::string_view name) const {
  const auto& b = layout.at(name);
  return {data.data() + b.offset, b.size()};
}

double dot(const FlatParams& a, const FlatParams& b) {
  if (a.size() != b.size()) throw ConfigError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double norm(const FlatParams& a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, const FlatParams& x, FlatParams& y) {
  if (x.size() != y.size()) throw ConfigError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

bool all_finite(const FlatParams& p) {
  return std::all_of(p.data.begin(), p.data.end(), [](double x) { return std::isfinite(x); });
}

std::map<std::string, std::vector<double>> unflatten(const FlatParams& p) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& b : p.layout.blocks)
    out[b.name] = std::vector<double>(p.data.begin() + b.offset,
                                      p.data.begin() + b.offset + b.size());
  return out;
}

FlatParams flatten(const ParamLayout& layout,
                   const std::map<std::string, std::vector<double>>& blocks) {
  FlatParams p = FlatParams::zeros(layout);
  for (const auto& b : layout.blocks) {
    auto it = blocks.find(b.name);
    if (it == blocks.end()) throw ConfigError("flatten: missing block '" + b.name + "'");
    if (it->second.size() != b.size()) throw ConfigError("flatten: block '" + b.name + "' has wrong size");
    std::copy(it->second.begin(), it->second.end(), p.data.begin() + b.offset);
  }
  if (blocks.size() != layout.blocks.size()) throw ConfigError("flatten: unexpected extra blocks");
  return p;
}

ParamLayout PolicySpec::layout() const {
  ParamLayout layout;
  for (const char* net : {"pi", "vf"}) {
    const MlpSpec m = std::string_view(net) == "pi" ? policy_net() : value_net();
    m.validate();
    std::size_t in = m.input_dim;
    for (std::size_t l = 0; l <= m.hidden.size(); ++l) {
      const std::size_t out = l < m.hidden.size() ? m.hidden[l] : m.output_dim;
      const std::string prefix = std::string(net) + "." + std::to_string(l);
      layout.add(prefix + ".weight", {out, in});
      layout.add(prefix + ".bias", {out});
      in = out;
    }
  }
  layout.add("log_std", {act_dim});
  return layout;
}

FlatParams init_params(const PolicySpec& spec, Rng& rng) {
  FlatParams p = FlatParams::zeros(spec.layout());
  const std::size_t n_layers = spec.hidden.size() + 1;
  for (const char* net : {"pi", "vf"}) {
    for (std::size_t l = 0; l < n_layers; ++l) {
      const std::string prefix = std::string(net) + "." + std::to_string(l);
      const ParamBlock& w = p.layout.at(prefix + ".weight");
      double gain = std::sqrt(2.0);
      if (l + 1 == n_layers) gain = std::string_view(net) == "pi" ? 0.01 : 1.0;
      const double a = gain * std::sqrt(3.0 / static_cast<double>(w.shape[1]));
      for (std::size_t i = 0; i < w.size(); ++i) p.data[w.offset + i] = rng.uniform(-a, a);
    }
  }
  return p;
}

Matrix mlp_forward(const FlatParams& params, std::string_view net, const MlpSpec& spec,
                   const Eigen::Ref<const Matrix>& x, MlpTape* tape) {
  const auto layers = layers_of(params, net, spec);
  if (static_cast<std::size_t>(x.rows()) != spec.input_dim)
    throw ConfigError("mlp_forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                      std::to_string(spec.input_dim));
  if (tape) {
    tape->activations.clear();
    tape->activations.reserve(layers.size() + 1);
    tape->activations.emplace_back(x);
  }
  Matrix a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    Eigen::Map<const RowMatrix> w(L.w, L.out, L.in);
    Eigen::Map<const Eigen::VectorXd> b(L.b, L.out);
    Matrix z = w * a;
    z.colwise() += b;
    if (l + 1 < layers.size()) z = z.array().tanh().matrix();
    a = std::move(z);
    if (tape) tape->activations.push_back(a);
  }
  return a;
}

void mlp_backward(const FlatParams& params, std::string_view net, const MlpSpec& spec,
                  const MlpTape& tape, const Eigen::Ref<const Matrix>& grad_out,
                  FlatParams& grad) {
  const auto layers = layers_of(params, net, spec);
  if (tape.activations.size() != layers.size() + 1)
    throw ConfigError("mlp_backward: tape does not match network");
  if (grad.size() != params.size()) throw ConfigError("mlp_backward: gradient has wrong size");
  Matrix g = grad_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& L = layers[l];
    const Matrix& a_in = tape.activations[l];
    Eigen::Map<RowMatrix> dw(grad.data.data() + L.w_offset, L.out, L.in);
    Eigen::Map<Eigen::VectorXd> db(grad.data.data() + L.b_offset, L.out);
    dw.noalias() += g * a_in.transpose();
    db += g.rowwise().sum();
    if (l == 0) break;
    Eigen::Map<const RowMatrix> w(L.w, L.out, L.in);
    Matrix prev = w.transpose() * g;
    g = prev.array() * (1.0 - a_in.array().square());
  }
}

PolicyOutput forward_policy(const FlatParams& params, const PolicySpec& spec,
                            std::span<const double> obs) {
  if (obs.size() != spec.obs_dim) throw ConfigError("forward_policy: observation has wrong dimension");
  Eigen::Map<const Matrix> x(obs.data(), obs.size(), 1);
  const Matrix mean = mlp_forward(params, "pi", spec.policy_net(), x);
  const auto ls = params.block("log_std");
  return {Vec(mean.data(), mean.data() + mean.size()), Vec(ls.begin(), ls.end())};
}

double forward_value(const FlatParams& params, const PolicySpec& spec,
                     std::span<const double> obs) {
  if (obs.size() != spec.obs_dim) throw ConfigError("forward_value: observation has wrong dimension");
  Eigen::Map<const Matrix> x(obs.data(), obs.size(), 1);
  return mlp_forward(params, "vf", spec.value_net(), x)(0, 0);
}

double log_prob(std::span<const double> mean, std::span<const double> log_std,
                std::span<const double> a) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
    s += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return s;
}

double gaussian_entropy(std::span<const double> log_std) {
  const double c = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double s = 0.0;
  for (double ls : log_std) s += ls + c;
  return s;
}

ActionSample sample_action(std::span<const double> mean, std::span<const double> log_std,
                           Rng& rng) {
  ActionSample s;
  s.raw.resize(mean.size());
  s.clipped.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    s.raw[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
    s.clipped[i] = std::clamp(s.raw[i], -1.0, 1.0);
  }
  return s;
}

}  // namespace actlab
