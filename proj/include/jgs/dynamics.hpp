#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "jgs/core_math.hpp"

namespace jgs {

class Rng;

struct FrequencyEncoderConfig {
    int L = 4;  // octaves; 4 for time, 6 when used as a position encoder
};

// [sin(2^l pi x), cos(2^l pi x)] per octave per component.
void frequency_encode(const double* x, int dim, int L, double* out);
std::vector<double> frequency_encode(const Eigen::VectorXd& x, int L);

struct HashGridConfig {
    int levels = 8;
    int table_size = 1 << 14;  // entries per level
    int features = 2;          // per entry
    double base_resolution = 16.0;
    double growth = 1.5;
    Eigen::Vector3d bbox_min = Eigen::Vector3d::Constant(-1.0);
    Eigen::Vector3d bbox_max = Eigen::Vector3d::Constant(1.0);

    int out_dim() const { return levels * features; }
    int resolution(int level) const;
    void validate() const;
};

struct HashGridCache {
    // per level: integer cell, fractional coordinate, 8 corner table offsets
    std::vector<double> frac;     // levels * 3
    std::vector<int> corner;      // levels * 8 (entry index within the level)
    std::vector<double> dnorm;    // 3, d(p01)/dp per axis (0 where clamped)
};

// Multi-resolution hash encoding with trilinear interpolation. Gradients flow
// to the table entries with the interpolation weights and to the query point
// through the (piecewise-linear) interpolation.
void hash_encode(const HashGridConfig& cfg, const std::vector<double>& table,
                 const Eigen::Vector3d& p, double* out, HashGridCache* cache);
void hash_encode_backward(const HashGridConfig& cfg, const std::vector<double>& table,
                          const HashGridCache& cache, const double* grad_out,
                          std::vector<double>* grad_table, Eigen::Vector3d* grad_p);

// Two hidden layers with GELU; the time features enter at the second layer.
// Prediction heads are zero-initialized so every residual starts at exactly
// zero.
class DecoderMlp {
public:
    void configure(int in_dim, int time_dim, int hidden, std::vector<int> head_dims);
    void init_weights(Rng& rng);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    std::size_t weight_count() const { return weights.size(); }

    struct Cache {
        int n = 0;
        int in_dim = 0, hidden = 0;
        std::vector<double> input, z1, h1, z2, h2;
        std::vector<double> time_feat;  // shared across slots
        void resize(int n, int in_dim, int hidden, int time_dim);
    };

    void forward(const double* pos_feat, const double* time_feat, double* out,
                 Cache* cache = nullptr, int slot = 0) const;
    // Accumulates into grad_weights (same layout as `weights`) and
    // grad_pos_feat; either may be null.
    void backward(const Cache& cache, int slot, const double* grad_out,
                  std::vector<double>* grad_weights, double* grad_pos_feat) const;

    std::vector<double> weights;

private:
    int in_dim_ = 0, time_dim_ = 0, hidden_ = 0, out_dim_ = 0;
    std::vector<int> head_dims_;
    std::size_t off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;
    std::vector<std::size_t> off_head_w_, off_head_b_;
};

enum class PositionEncoding { hash, frequency };

struct TemporalNetConfig {
    HashGridConfig grid;
    PositionEncoding position_encoding = PositionEncoding::hash;
    int freq_time_L = 4;
    int freq_pos_L = 6;
    int hidden = 64;

    int pos_dim() const;
    int time_dim() const { return 2 * freq_time_L; }
};

// Shared position/time encoder feeding two decoders: geometry offsets
// (position delta + rotation delta as axis-angle) and a color residual.
struct TemporalNet {
    TemporalNetConfig cfg;
    std::vector<double> hash_table;
    DecoderMlp offset_mlp;  // heads: delta_mu (3), delta_rot axis-angle (3)
    DecoderMlp color_mlp;   // head: delta_color (3)

    void init(uint64_t seed);
};

struct NetOutputs {
    Eigen::Vector3d delta_mu = Eigen::Vector3d::Zero();
    Eigen::Vector3d delta_rot_aa = Eigen::Vector3d::Zero();
    Eigen::Vector3d delta_color = Eigen::Vector3d::Zero();
};

struct NetForwardCache {
    int n = 0;
    std::vector<double> pos_feat;  // n * pos_dim
    std::vector<double> time_feat;
    std::vector<HashGridCache> hash;
    DecoderMlp::Cache offset, color;
    std::vector<NetOutputs> outputs;
};

// Evaluates both decoders for a batch of canonical positions at normalized
// time t. Cache retains everything the backward pass needs.
void net_forward(const TemporalNet& net, const std::vector<Eigen::Vector3d>& mu_c,
                 double t_norm, NetForwardCache& cache);

struct NetGrads {
    std::vector<double>* offset_weights = nullptr;
    std::vector<double>* color_weights = nullptr;
    std::vector<double>* hash_table = nullptr;
};

// Reverse mode for one batch element; grad_mu_c (optional) receives the
// gradient through the position encoding.
void net_backward(const TemporalNet& net, const NetForwardCache& cache, int slot,
                  const Eigen::Vector3d& grad_delta_mu, const Eigen::Vector3d& grad_delta_rot_aa,
                  const Eigen::Vector3d& grad_delta_color, const NetGrads& grads,
                  Eigen::Vector3d* grad_mu_c);

// Convenience single-point forms of the residual predictions.
std::pair<Eigen::Vector3d, Rotation> predict_offsets(const TemporalNet& net,
                                                     const Eigen::Vector3d& mu_c, double t_norm);
Eigen::Vector3d predict_color_residual(const TemporalNet& net, const Eigen::Vector3d& mu_c,
                                       double t_norm);

// mu' = mu + delta_mu, R' = R * delta_R.
void apply_offsets(Eigen::Vector3d& mu, Eigen::Matrix3d& rot, const Eigen::Vector3d& delta_mu,
                   const Eigen::Matrix3d& delta_rot);

}  // namespace jgs
