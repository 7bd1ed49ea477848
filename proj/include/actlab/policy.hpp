#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actlab/envs.hpp"
#include "actlab/rng.hpp"

namespace actlab {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t output_dim = 1;

  void validate() const;
};

struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;

  std::size_t size() const;
  bool operator==(const ParamBlock&) const = default;
};

// Ordered blocks whose offsets partition the flat vector exactly.
struct ParamLayout {
  std::vector<ParamBlock> blocks;
  std::size_t total = 0;

  void add(std::string name, std::vector<std::size_t> shape);
  const ParamBlock& at(std::string_view name) const;
  bool operator==(const ParamLayout&) const = default;
};

// Flat parameter vector: the coordinate system shared by checkpoints,
// landscape directions and gradients.
struct FlatParams {
  ParamLayout layout;
  std::vector<double> data;

  static FlatParams zeros(const ParamLayout& layout);

  std::size_t size() const { return data.size(); }
  std::span<double> block(std::string_view name);
  std::span<const double> block(std::string_view name) const;
  bool same_layout(const FlatParams& other) const { return layout == other.layout; }
  bool operator==(const FlatParams&) const = default;
};

double dot(const FlatParams& a, const FlatParams& b);
double norm(const FlatParams& a);
// y += alpha * x
void axpy(double alpha, const FlatParams& x, FlatParams& y);
bool all_finite(const FlatParams& p);

std::map<std::string, std::vector<double>> unflatten(const FlatParams& p);
FlatParams flatten(const ParamLayout& layout,
                   const std::map<std::string, std::vector<double>>& blocks);

// Separate tanh MLPs for the Gaussian mean ("pi.*") and the value ("vf.*"),
// plus a state-independent "log_std" block.
struct PolicySpec {
  std::size_t obs_dim = 1;
  std::size_t act_dim = 1;
  std::vector<std::size_t> hidden{64, 64};

  MlpSpec policy_net() const { return {obs_dim, hidden, act_dim}; }
  MlpSpec value_net() const { return {obs_dim, hidden, 1}; }
  ParamLayout layout() const;
  bool operator==(const PolicySpec&) const = default;
};

// Scaled uniform init with variance gain^2 / fan_in: gain sqrt(2) for hidden
// layers, 0.01 for the policy head, 1 for the value head. Biases and log_std 0.
FlatParams init_params(const PolicySpec& spec, Rng& rng);

struct MlpTape {
  std::vector<Matrix> activations;  // input, hidden outputs (post-tanh), output
};

// Batched forward pass; columns are samples. Pure: nothing is mutated except
// the optional tape.
Matrix mlp_forward(const FlatParams& params, std::string_view net, const MlpSpec& spec,
                   const Eigen::Ref<const Matrix>& x, MlpTape* tape = nullptr);

// Reverse-mode pass for a recorded forward. grad_out is dLoss/dOutput
// (output_dim x N). Gradients are accumulated into `grad`.
void mlp_backward(const FlatParams& params, std::string_view net, const MlpSpec& spec,
                  const MlpTape& tape, const Eigen::Ref<const Matrix>& grad_out,
                  FlatParams& grad);

struct PolicyOutput {
  Vec mean;
  Vec log_std;
};

PolicyOutput forward_policy(const FlatParams& params, const PolicySpec& spec,
                            std::span<const double> obs);
double forward_value(const FlatParams& params, const PolicySpec& spec,
                     std::span<const double> obs);

// Diagonal Gaussian log density.
double log_prob(std::span<const double> mean, std::span<const double> log_std,
                std::span<const double> a);
double gaussian_entropy(std::span<const double> log_std);

struct ActionSample {
  Vec raw;      // a = mean + std * z; its log-prob is what gets stored
  Vec clipped;  // raw clipped to [-1, 1], sent to the environment
};

ActionSample sample_action(std::span<const double> mean, std::span<const double> log_std,
                           Rng& rng);

}  // namespace actlab
