#include "jgs/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "jgs/rng.hpp"

namespace jgs {

namespace {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

inline uint32_t spatial_hash(uint32_t x, uint32_t y, uint32_t z) {
    return (x * 1u) ^ (y * 2654435761u) ^ (z * 805459861u);
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapVecC = Eigen::Map<const Eigen::VectorXd>;

}  // namespace

void frequency_encode(const double* x, int dim, int L, double* out) {
    int o = 0;
    for (int c = 0; c < dim; ++c) {
        if (!std::isfinite(x[c]))
            throw std::invalid_argument("frequency_encode: non-finite input");
        double freq = M_PI;
        for (int l = 0; l < L; ++l) {
            out[o++] = std::sin(freq * x[c]);
            out[o++] = std::cos(freq * x[c]);
            freq *= 2.0;
        }
    }
}

std::vector<double> frequency_encode(const Eigen::VectorXd& x, int L) {
    std::vector<double> out(static_cast<std::size_t>(2 * L) * x.size());
    frequency_encode(x.data(), static_cast<int>(x.size()), L, out.data());
    return out;
}

int HashGridConfig::resolution(int level) const {
    return static_cast<int>(std::floor(base_resolution * std::pow(growth, level)));
}

void HashGridConfig::validate() const {
    if (levels < 1 || table_size < 1 || features < 1 || base_resolution < 1.0 || growth <= 1.0)
        throw std::invalid_argument("HashGridConfig: all sizes must be positive, growth > 1");
    if (!((bbox_max - bbox_min).minCoeff() > 0.0))
        throw std::invalid_argument("HashGridConfig: bounding box must have positive extent");
}

void hash_encode(const HashGridConfig& cfg, const std::vector<double>& table,
                 const Eigen::Vector3d& p, double* out, HashGridCache* cache) {
    if (!p.allFinite()) throw std::invalid_argument("hash_encode: non-finite point");
    const Eigen::Vector3d extent = cfg.bbox_max - cfg.bbox_min;
    Eigen::Vector3d p01;
    Eigen::Vector3d dnorm;
    for (int a = 0; a < 3; ++a) {
        const double raw = (p[a] - cfg.bbox_min[a]) / extent[a];
        p01[a] = std::min(1.0, std::max(0.0, raw));
        dnorm[a] = (raw > 0.0 && raw < 1.0) ? 1.0 / extent[a] : 0.0;
    }
    if (cache) {
        cache->frac.resize(static_cast<std::size_t>(cfg.levels) * 3);
        cache->corner.resize(static_cast<std::size_t>(cfg.levels) * 8);
        cache->dnorm = {dnorm[0], dnorm[1], dnorm[2]};
    }

    const int f = cfg.features;
    for (int l = 0; l < cfg.levels; ++l) {
        const int res = cfg.resolution(l);
        int cell[3];
        double frac[3];
        for (int a = 0; a < 3; ++a) {
            const double scaled = p01[a] * res;
            cell[a] = std::min(static_cast<int>(scaled), res - 1);
            frac[a] = scaled - cell[a];
        }
        for (int ff = 0; ff < f; ++ff) out[l * f + ff] = 0.0;
        for (int c = 0; c < 8; ++c) {
            const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
            const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                             (dz ? frac[2] : 1.0 - frac[2]);
            const uint32_t idx = spatial_hash(cell[0] + dx, cell[1] + dy, cell[2] + dz) %
                                 static_cast<uint32_t>(cfg.table_size);
            const std::size_t base =
                (static_cast<std::size_t>(l) * cfg.table_size + idx) * f;
            for (int ff = 0; ff < f; ++ff) out[l * f + ff] += w * table[base + ff];
            if (cache) cache->corner[static_cast<std::size_t>(l) * 8 + c] = static_cast<int>(idx);
        }
        if (cache)
            for (int a = 0; a < 3; ++a) cache->frac[static_cast<std::size_t>(l) * 3 + a] = frac[a];
    }
}

void hash_encode_backward(const HashGridConfig& cfg, const std::vector<double>& table,
                          const HashGridCache& cache, const double* grad_out,
                          std::vector<double>* grad_table, Eigen::Vector3d* grad_p) {
    const int f = cfg.features;
    for (int l = 0; l < cfg.levels; ++l) {
        const double* frac = &cache.frac[static_cast<std::size_t>(l) * 3];
        const double res = cfg.resolution(l);
        for (int c = 0; c < 8; ++c) {
            const int d[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
            const double m[3] = {d[0] ? frac[0] : 1.0 - frac[0], d[1] ? frac[1] : 1.0 - frac[1],
                                 d[2] ? frac[2] : 1.0 - frac[2]};
            const double w = m[0] * m[1] * m[2];
            const std::size_t base =
                (static_cast<std::size_t>(l) * cfg.table_size +
                 cache.corner[static_cast<std::size_t>(l) * 8 + c]) * f;
            double gdot = 0.0;
            for (int ff = 0; ff < f; ++ff) {
                if (grad_table) (*grad_table)[base + ff] += w * grad_out[l * f + ff];
                gdot += table[base + ff] * grad_out[l * f + ff];
            }
            if (grad_p) {
                for (int a = 0; a < 3; ++a) {
                    const double others = m[(a + 1) % 3] * m[(a + 2) % 3];
                    const double dw = (d[a] ? 1.0 : -1.0) * others;
                    (*grad_p)[a] += gdot * dw * res * cache.dnorm[a];
                }
            }
        }
    }
}

void DecoderMlp::Cache::resize(int n_, int in_dim_, int hidden_, int time_dim_) {
    n = n_;
    in_dim = in_dim_;
    hidden = hidden_;
    input.resize(static_cast<std::size_t>(n) * in_dim);
    z1.resize(static_cast<std::size_t>(n) * hidden);
    h1.resize(static_cast<std::size_t>(n) * hidden);
    z2.resize(static_cast<std::size_t>(n) * hidden);
    h2.resize(static_cast<std::size_t>(n) * hidden);
    time_feat.resize(time_dim_);
}

void DecoderMlp::configure(int in_dim, int time_dim, int hidden, std::vector<int> head_dims) {
    in_dim_ = in_dim;
    time_dim_ = time_dim;
    hidden_ = hidden;
    head_dims_ = std::move(head_dims);
    out_dim_ = 0;
    for (int d : head_dims_) out_dim_ += d;

    std::size_t off = 0;
    off_w1_ = off;
    off += static_cast<std::size_t>(hidden_) * in_dim_;
    off_b1_ = off;
    off += hidden_;
    off_w2_ = off;
    off += static_cast<std::size_t>(hidden_) * (hidden_ + time_dim_);
    off_b2_ = off;
    off += hidden_;
    off_head_w_.clear();
    off_head_b_.clear();
    for (int d : head_dims_) {
        off_head_w_.push_back(off);
        off += static_cast<std::size_t>(d) * hidden_;
        off_head_b_.push_back(off);
        off += d;
    }
    weights.assign(off, 0.0);
}

void DecoderMlp::init_weights(Rng& rng) {
    // Trunk: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)). Heads stay zero.
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim_));
    for (std::size_t i = off_w1_; i < off_b1_; ++i) weights[i] = rng.uniform(-s1, s1);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_ + time_dim_));
    for (std::size_t i = off_w2_; i < off_b2_; ++i) weights[i] = rng.uniform(-s2, s2);
}

void DecoderMlp::forward(const double* pos_feat, const double* time_feat, double* out,
                         Cache* cache, int slot) const {
    Eigen::VectorXd z1(hidden_), h1v(hidden_), z2(hidden_), h2v(hidden_);
    {
        MapRowC w1(&weights[off_w1_], hidden_, in_dim_);
        MapVecC b1(&weights[off_b1_], hidden_);
        MapVecC in(pos_feat, in_dim_);
        z1 = w1 * in + b1;
    }
    for (int i = 0; i < hidden_; ++i) h1v[i] = gelu(z1[i]);
    {
        MapRowC w2(&weights[off_w2_], hidden_, hidden_ + time_dim_);
        MapVecC b2(&weights[off_b2_], hidden_);
        MapVecC tf(time_feat, time_dim_);
        z2 = w2.leftCols(hidden_) * h1v + w2.rightCols(time_dim_) * tf + b2;
    }
    for (int i = 0; i < hidden_; ++i) h2v[i] = gelu(z2[i]);

    int o = 0;
    for (std::size_t h = 0; h < head_dims_.size(); ++h) {
        MapRowC wh(&weights[off_head_w_[h]], head_dims_[h], hidden_);
        MapVecC bh(&weights[off_head_b_[h]], head_dims_[h]);
        MapVec(out + o, head_dims_[h]) = wh * h2v + bh;
        o += head_dims_[h];
    }

    if (cache) {
        std::copy(pos_feat, pos_feat + in_dim_,
                  cache->input.begin() + static_cast<std::size_t>(slot) * in_dim_);
        const std::size_t base = static_cast<std::size_t>(slot) * hidden_;
        for (int i = 0; i < hidden_; ++i) {
            cache->z1[base + i] = z1[i];
            cache->h1[base + i] = h1v[i];
            cache->z2[base + i] = z2[i];
            cache->h2[base + i] = h2v[i];
        }
        std::copy(time_feat, time_feat + time_dim_, cache->time_feat.begin());
    }
}

void DecoderMlp::backward(const Cache& cache, int slot, const double* grad_out,
                          std::vector<double>* grad_weights, double* grad_pos_feat) const {
    const std::size_t base = static_cast<std::size_t>(slot) * hidden_;
    MapVecC h2v(&cache.h2[base], hidden_);
    MapVecC h1v(&cache.h1[base], hidden_);
    MapVecC in(&cache.input[static_cast<std::size_t>(slot) * in_dim_], in_dim_);
    MapVecC tf(cache.time_feat.data(), time_dim_);

    Eigen::VectorXd d_h2 = Eigen::VectorXd::Zero(hidden_);
    int o = 0;
    for (std::size_t h = 0; h < head_dims_.size(); ++h) {
        MapRowC wh(&weights[off_head_w_[h]], head_dims_[h], hidden_);
        MapVecC go(grad_out + o, head_dims_[h]);
        d_h2.noalias() += wh.transpose() * go;
        if (grad_weights) {
            MapRow gwh(&(*grad_weights)[off_head_w_[h]], head_dims_[h], hidden_);
            gwh.noalias() += go * h2v.transpose();
            MapVec(&(*grad_weights)[off_head_b_[h]], head_dims_[h]) += go;
        }
        o += head_dims_[h];
    }

    Eigen::VectorXd d_z2(hidden_);
    for (int i = 0; i < hidden_; ++i) d_z2[i] = d_h2[i] * gelu_grad(cache.z2[base + i]);

    MapRowC w2(&weights[off_w2_], hidden_, hidden_ + time_dim_);
    Eigen::VectorXd d_h1 = w2.leftCols(hidden_).transpose() * d_z2;
    if (grad_weights) {
        MapRow gw2(&(*grad_weights)[off_w2_], hidden_, hidden_ + time_dim_);
        gw2.leftCols(hidden_).noalias() += d_z2 * h1v.transpose();
        gw2.rightCols(time_dim_).noalias() += d_z2 * tf.transpose();
        MapVec(&(*grad_weights)[off_b2_], hidden_) += d_z2;
    }

    Eigen::VectorXd d_z1(hidden_);
    for (int i = 0; i < hidden_; ++i) d_z1[i] = d_h1[i] * gelu_grad(cache.z1[base + i]);
    if (grad_weights) {
        MapRow gw1(&(*grad_weights)[off_w1_], hidden_, in_dim_);
        gw1.noalias() += d_z1 * in.transpose();
        MapVec(&(*grad_weights)[off_b1_], hidden_) += d_z1;
    }
    if (grad_pos_feat) {
        MapRowC w1(&weights[off_w1_], hidden_, in_dim_);
        MapVec(grad_pos_feat, in_dim_).noalias() += w1.transpose() * d_z1;
    }
}

int TemporalNetConfig::pos_dim() const {
    return position_encoding == PositionEncoding::hash ? grid.out_dim() : 2 * freq_pos_L * 3;
}

void TemporalNet::init(uint64_t seed) {
    cfg.grid.validate();
    Rng rng(seed);
    hash_table.resize(static_cast<std::size_t>(cfg.grid.levels) * cfg.grid.table_size *
                      cfg.grid.features);
    for (auto& v : hash_table) v = rng.uniform(-1e-4, 1e-4);
    offset_mlp.configure(cfg.pos_dim(), cfg.time_dim(), cfg.hidden, {3, 3});
    offset_mlp.init_weights(rng);
    color_mlp.configure(cfg.pos_dim(), cfg.time_dim(), cfg.hidden, {3});
    color_mlp.init_weights(rng);
}

namespace {

void encode_position(const TemporalNet& net, const Eigen::Vector3d& mu_c, double* out,
                     HashGridCache* cache) {
    if (net.cfg.position_encoding == PositionEncoding::hash) {
        hash_encode(net.cfg.grid, net.hash_table, mu_c, out, cache);
    } else {
        const Eigen::Vector3d extent = net.cfg.grid.bbox_max - net.cfg.grid.bbox_min;
        Eigen::Vector3d p01 = (mu_c - net.cfg.grid.bbox_min).cwiseQuotient(extent);
        frequency_encode(p01.data(), 3, net.cfg.freq_pos_L, out);
        if (cache) cache->dnorm = {1.0 / extent[0], 1.0 / extent[1], 1.0 / extent[2]};
    }
}

}  // namespace

void net_forward(const TemporalNet& net, const std::vector<Eigen::Vector3d>& mu_c,
                 double t_norm, NetForwardCache& cache) {
    const int n = static_cast<int>(mu_c.size());
    const int pd = net.cfg.pos_dim();
    const int td = net.cfg.time_dim();
    cache.n = n;
    cache.pos_feat.resize(static_cast<std::size_t>(n) * pd);
    cache.time_feat.resize(td);
    frequency_encode(&t_norm, 1, net.cfg.freq_time_L, cache.time_feat.data());
    cache.hash.resize(n);
    cache.offset.resize(n, pd, net.cfg.hidden, td);
    cache.color.resize(n, pd, net.cfg.hidden, td);
    cache.outputs.resize(n);

    double out_offset[6];
    double out_color[3];
    for (int i = 0; i < n; ++i) {
        double* pf = &cache.pos_feat[static_cast<std::size_t>(i) * pd];
        encode_position(net, mu_c[i], pf, &cache.hash[i]);
        net.offset_mlp.forward(pf, cache.time_feat.data(), out_offset, &cache.offset, i);
        net.color_mlp.forward(pf, cache.time_feat.data(), out_color, &cache.color, i);
        cache.outputs[i].delta_mu = {out_offset[0], out_offset[1], out_offset[2]};
        cache.outputs[i].delta_rot_aa = {out_offset[3], out_offset[4], out_offset[5]};
        cache.outputs[i].delta_color = {out_color[0], out_color[1], out_color[2]};
    }
}

void net_backward(const TemporalNet& net, const NetForwardCache& cache, int slot,
                  const Eigen::Vector3d& grad_delta_mu, const Eigen::Vector3d& grad_delta_rot_aa,
                  const Eigen::Vector3d& grad_delta_color, const NetGrads& grads,
                  Eigen::Vector3d* grad_mu_c) {
    const int pd = net.cfg.pos_dim();
    const bool is_hash = net.cfg.position_encoding == PositionEncoding::hash;
    const bool need_pos =
        grad_mu_c != nullptr || (is_hash && grads.hash_table != nullptr);
    std::vector<double> d_pos(need_pos ? pd : 0, 0.0);
    double* d_pos_ptr = need_pos ? d_pos.data() : nullptr;

    double go[6] = {grad_delta_mu[0],     grad_delta_mu[1],     grad_delta_mu[2],
                    grad_delta_rot_aa[0], grad_delta_rot_aa[1], grad_delta_rot_aa[2]};
    if (grads.offset_weights || need_pos)
        net.offset_mlp.backward(cache.offset, slot, go, grads.offset_weights, d_pos_ptr);
    double gc[3] = {grad_delta_color[0], grad_delta_color[1], grad_delta_color[2]};
    if (grads.color_weights || need_pos)
        net.color_mlp.backward(cache.color, slot, gc, grads.color_weights, d_pos_ptr);
    if (!need_pos) return;

    if (is_hash) {
        hash_encode_backward(net.cfg.grid, net.hash_table, cache.hash[slot], d_pos.data(),
                             grads.hash_table, grad_mu_c);
    } else if (grad_mu_c) {
        // d(sin/cos(2^l pi p01))/dp, p01 normalized by the bbox extent.
        const double* pf = &cache.pos_feat[static_cast<std::size_t>(slot) * pd];
        int o = 0;
        for (int a = 0; a < 3; ++a) {
            double freq = M_PI;
            for (int l = 0; l < net.cfg.freq_pos_L; ++l) {
                const double s = pf[o], c = pf[o + 1];
                (*grad_mu_c)[a] +=
                    (d_pos[o] * c - d_pos[o + 1] * s) * freq * cache.hash[slot].dnorm[a];
                o += 2;
                freq *= 2.0;
            }
        }
    }
}

std::pair<Eigen::Vector3d, Rotation> predict_offsets(const TemporalNet& net,
                                                     const Eigen::Vector3d& mu_c, double t_norm) {
    NetForwardCache cache;
    net_forward(net, {mu_c}, t_norm, cache);
    return {cache.outputs[0].delta_mu, so3_exp(cache.outputs[0].delta_rot_aa)};
}

Eigen::Vector3d predict_color_residual(const TemporalNet& net, const Eigen::Vector3d& mu_c,
                                       double t_norm) {
    NetForwardCache cache;
    net_forward(net, {mu_c}, t_norm, cache);
    return cache.outputs[0].delta_color;
}

void apply_offsets(Eigen::Vector3d& mu, Eigen::Matrix3d& rot, const Eigen::Vector3d& delta_mu,
                   const Eigen::Matrix3d& delta_rot) {
    mu += delta_mu;
    rot = rot * delta_rot;
}

}  // namespace jgs
