#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jgs/dynamics.hpp"
#include "jgs/rng.hpp"

using namespace jgs;

namespace {

TemporalNet small_net(uint64_t seed, bool randomize_heads = false) {
    TemporalNet net;
    net.cfg.grid.levels = 3;
    net.cfg.grid.table_size = 128;
    net.cfg.grid.features = 2;
    net.cfg.grid.base_resolution = 4.0;
    net.cfg.grid.growth = 1.5;
    net.cfg.grid.bbox_min = Eigen::Vector3d(-1, -1, -1);
    net.cfg.grid.bbox_max = Eigen::Vector3d(1, 1, 1);
    net.cfg.hidden = 8;
    net.init(seed);
    if (randomize_heads) {
        Rng rng(seed ^ 0xFEED);
        for (auto& w : net.offset_mlp.weights) w += rng.uniform(-0.1, 0.1);
        for (auto& w : net.color_mlp.weights) w += rng.uniform(-0.1, 0.1);
        for (auto& w : net.hash_table) w += rng.uniform(-0.3, 0.3);
    }
    return net;
}

}  // namespace

TEST_CASE("frequency_encode closed forms") {
    SUBCASE("x = 0") {
        const double x = 0.0;
        double out[4];
        frequency_encode(&x, 1, 2, out);
        CHECK(out[0] == 0.0);
        CHECK(out[1] == 1.0);
        CHECK(out[2] == 0.0);
        CHECK(out[3] == 1.0);
    }
    SUBCASE("x = 1, one octave") {
        const double x = 1.0;
        double out[2];
        frequency_encode(&x, 1, 1, out);
        CHECK(std::abs(out[0] - 0.0) < 1e-12);  // sin(pi)
        CHECK(std::abs(out[1] + 1.0) < 1e-12);  // cos(pi)
    }
    SUBCASE("zero octaves gives an empty encoding") {
        const auto out = frequency_encode(Eigen::VectorXd::Constant(3, 0.5), 0);
        CHECK(out.empty());
    }
    SUBCASE("outputs stay in [-1, 1]") {
        Rng rng(61);
        for (int i = 0; i < 200; ++i) {
            const double x = rng.uniform(-40.0, 40.0);
            double out[12];
            frequency_encode(&x, 1, 6, out);
            for (double v : out) {
                CHECK(v <= 1.0);
                CHECK(v >= -1.0);
            }
        }
    }
}

TEST_CASE("hash encoding returns the corner feature exactly on grid corners") {
    TemporalNet net = small_net(3, true);
    net.cfg.grid.growth = 2.0;  // resolutions 4, 8, 16: dyadic corners align at every level
    const HashGridConfig& cfg = net.cfg.grid;
    const Eigen::Vector3d p01(0.25, 0.5, 0.75);
    const Eigen::Vector3d p =
        cfg.bbox_min + p01.cwiseProduct(cfg.bbox_max - cfg.bbox_min);
    std::vector<double> out(cfg.out_dim());
    hash_encode(cfg, net.hash_table, p, out.data(), nullptr);

    for (int l = 0; l < cfg.levels; ++l) {
        const int res = cfg.resolution(l);
        const uint32_t ix = static_cast<uint32_t>(p01.x() * res);
        const uint32_t iy = static_cast<uint32_t>(p01.y() * res);
        const uint32_t iz = static_cast<uint32_t>(p01.z() * res);
        const uint32_t idx =
            (ix * 1u ^ iy * 2654435761u ^ iz * 805459861u) % static_cast<uint32_t>(cfg.table_size);
        for (int f = 0; f < cfg.features; ++f) {
            const double expected =
                net.hash_table[(static_cast<std::size_t>(l) * cfg.table_size + idx) * cfg.features + f];
            CHECK(out[l * cfg.features + f] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("hash encoding is deterministic and continuous within a cell") {
    const TemporalNet net = small_net(4, true);
    const HashGridConfig& cfg = net.cfg.grid;
    const Eigen::Vector3d p(0.137, -0.221, 0.493);
    std::vector<double> a(cfg.out_dim()), b(cfg.out_dim());
    hash_encode(cfg, net.hash_table, p, a.data(), nullptr);
    hash_encode(cfg, net.hash_table, p, b.data(), nullptr);
    CHECK(a == b);

    // Lipschitz bound within a cell: per level, |dout/dp| <= 8 * max|f| * res / extent
    double max_f = 0.0;
    for (double v : net.hash_table) max_f = std::max(max_f, std::abs(v));
    const double extent = 2.0;
    const double eps = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Vector3d q = p + Eigen::Vector3d::Constant(eps * trial / 20.0);
        std::vector<double> c(cfg.out_dim());
        hash_encode(cfg, net.hash_table, q, c.data(), nullptr);
        for (int l = 0; l < cfg.levels; ++l) {
            const double bound =
                3.0 * 8.0 * max_f * cfg.resolution(l) / extent * (q - p).lpNorm<Eigen::Infinity>();
            for (int f = 0; f < cfg.features; ++f)
                CHECK(std::abs(c[l * cfg.features + f] - a[l * cfg.features + f]) <=
                      bound + 1e-15);
        }
    }
}

TEST_CASE("hash encoding backward matches finite differences") {
    TemporalNet net = small_net(5, true);
    const HashGridConfig& cfg = net.cfg.grid;
    Rng rng(62);
    const Eigen::Vector3d p(0.1371, -0.2212, 0.4931);

    std::vector<double> out(cfg.out_dim());
    HashGridCache cache;
    hash_encode(cfg, net.hash_table, p, out.data(), &cache);

    std::vector<double> gout(cfg.out_dim());
    for (auto& g : gout) g = rng.normal();

    std::vector<double> d_table(net.hash_table.size(), 0.0);
    Eigen::Vector3d d_p = Eigen::Vector3d::Zero();
    hash_encode_backward(cfg, net.hash_table, cache, gout.data(), &d_table, &d_p);

    const double h = 1e-6;
    // table entries touched by the encoding
    int checked = 0;
    for (std::size_t i = 0; i < d_table.size() && checked < 30; ++i) {
        if (d_table[i] == 0.0) continue;
        ++checked;
        const double saved = net.hash_table[i];
        std::vector<double> tmp(cfg.out_dim());
        net.hash_table[i] = saved + h;
        hash_encode(cfg, net.hash_table, p, tmp.data(), nullptr);
        double up = 0.0;
        for (int j = 0; j < cfg.out_dim(); ++j) up += tmp[j] * gout[j];
        net.hash_table[i] = saved - h;
        hash_encode(cfg, net.hash_table, p, tmp.data(), nullptr);
        double down = 0.0;
        for (int j = 0; j < cfg.out_dim(); ++j) down += tmp[j] * gout[j];
        net.hash_table[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        CHECK(std::abs(fd - d_table[i]) < 1e-6);
    }
    CHECK(checked > 0);

    // position path
    for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d hi = p, lo = p;
        hi[a] += h;
        lo[a] -= h;
        std::vector<double> oh(cfg.out_dim()), ol(cfg.out_dim());
        hash_encode(cfg, net.hash_table, hi, oh.data(), nullptr);
        hash_encode(cfg, net.hash_table, lo, ol.data(), nullptr);
        double fd = 0.0;
        for (int j = 0; j < cfg.out_dim(); ++j) fd += (oh[j] - ol[j]) / (2.0 * h) * gout[j];
        const double denom = std::max({std::abs(fd), std::abs(d_p[a]), 1e-8});
        CHECK(std::abs(fd - d_p[a]) / denom < 1e-5);
    }
}

TEST_CASE("zero-initialized heads produce exactly zero residuals") {
    const TemporalNet net = small_net(6);
    Rng rng(63);
    for (int i = 0; i < 20; ++i) {
        const Eigen::Vector3d mu = rng.normal3(0.5);
        const double t = rng.uniform();
        const auto [dmu, drot] = predict_offsets(net, mu, t);
        CHECK(dmu.x() == 0.0);
        CHECK(dmu.y() == 0.0);
        CHECK(dmu.z() == 0.0);
        CHECK(drot.w == 1.0);
        CHECK(drot.x == 0.0);
        const Eigen::Vector3d dc = predict_color_residual(net, mu, t);
        CHECK(dc.x() == 0.0);
        CHECK(dc.y() == 0.0);
        CHECK(dc.z() == 0.0);
    }
}

TEST_CASE("a nonzero net is sensitive to the time input") {
    const TemporalNet net = small_net(7, true);
    const Eigen::Vector3d mu(0.2, 0.1, -0.3);
    const auto [dmu_a, rot_a] = predict_offsets(net, mu, 0.1);
    const auto [dmu_b, rot_b] = predict_offsets(net, mu, 0.8);
    CHECK((dmu_a - dmu_b).norm() > 1e-9);
}

TEST_CASE("constant table and zero first layer make the residual position independent") {
    TemporalNet net = small_net(8);
    // constant encoder output regardless of position
    for (auto& v : net.hash_table) v = 0.37;
    Rng rng(64);
    for (auto& w : net.color_mlp.weights) w = rng.uniform(-0.2, 0.2);
    const Eigen::Vector3d a = predict_color_residual(net, {0.1, 0.2, 0.3}, 0.4);
    const Eigen::Vector3d c = predict_color_residual(net, {-0.5, 0.1, 0.9}, 0.4);
    CHECK((a - c).norm() < 1e-12);
}

TEST_CASE("decoder gradients match finite differences") {
    TemporalNet net = small_net(9, true);
    const Eigen::Vector3d mu(0.21, -0.43, 0.11);
    const double t = 0.37;

    NetForwardCache cache;
    net_forward(net, {mu}, t, cache);

    Rng rng(65);
    const Eigen::Vector3d g_mu = rng.normal3(1.0);
    const Eigen::Vector3d g_rot = rng.normal3(1.0);
    const Eigen::Vector3d g_col = rng.normal3(1.0);

    std::vector<double> d_offset(net.offset_mlp.weights.size(), 0.0);
    std::vector<double> d_color(net.color_mlp.weights.size(), 0.0);
    std::vector<double> d_table(net.hash_table.size(), 0.0);
    NetGrads sinks;
    sinks.offset_weights = &d_offset;
    sinks.color_weights = &d_color;
    sinks.hash_table = &d_table;
    Eigen::Vector3d d_mu_c = Eigen::Vector3d::Zero();
    net_backward(net, cache, 0, g_mu, g_rot, g_col, sinks, &d_mu_c);

    auto loss_of = [&]() {
        NetForwardCache c;
        net_forward(net, {mu}, t, c);
        return g_mu.dot(c.outputs[0].delta_mu) + g_rot.dot(c.outputs[0].delta_rot_aa) +
               g_col.dot(c.outputs[0].delta_color);
    };

    const double h = 1e-6;
    Rng pick(66);
    auto check_param = [&](std::vector<double>& params, const std::vector<double>& grads,
                           int samples) {
        for (int s = 0; s < samples; ++s) {
            const int idx = pick.uniform_int(static_cast<int>(params.size()));
            const double saved = params[idx];
            params[idx] = saved + h;
            const double up = loss_of();
            params[idx] = saved - h;
            const double down = loss_of();
            params[idx] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(grads[idx]), 1e-8});
            CHECK(std::abs(fd - grads[idx]) / denom < 1e-4);
        }
    };
    check_param(net.offset_mlp.weights, d_offset, 30);
    check_param(net.color_mlp.weights, d_color, 30);
    check_param(net.hash_table, d_table, 20);
}

TEST_CASE("frequency position encoding drives the decoders like the hash grid") {
    TemporalNet net;
    net.cfg.position_encoding = PositionEncoding::frequency;
    net.cfg.freq_pos_L = 4;
    net.cfg.hidden = 8;
    net.cfg.grid.levels = 1;
    net.cfg.grid.table_size = 16;
    net.cfg.grid.bbox_min = Eigen::Vector3d(-1, -1, -1);
    net.cfg.grid.bbox_max = Eigen::Vector3d(1, 1, 1);
    net.init(21);
    Rng rng(67);
    for (auto& w : net.offset_mlp.weights) w += rng.uniform(-0.1, 0.1);
    for (auto& w : net.color_mlp.weights) w += rng.uniform(-0.1, 0.1);

    const Eigen::Vector3d mu(0.17, -0.52, 0.33);
    const double t = 0.41;
    NetForwardCache cache;
    net_forward(net, {mu}, t, cache);
    CHECK(cache.outputs[0].delta_mu.norm() > 0.0);

    // gradient through the encoding back to the position
    const Eigen::Vector3d g_mu = rng.normal3(1.0);
    const Eigen::Vector3d g_rot = rng.normal3(1.0);
    const Eigen::Vector3d g_col = rng.normal3(1.0);
    NetGrads sinks;  // weight sinks off: only the position path
    Eigen::Vector3d d_mu_c = Eigen::Vector3d::Zero();
    net_backward(net, cache, 0, g_mu, g_rot, g_col, sinks, &d_mu_c);

    const double h = 1e-6;
    for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d hi = mu, lo = mu;
        hi[a] += h;
        lo[a] -= h;
        NetForwardCache ch, cl;
        net_forward(net, {hi}, t, ch);
        net_forward(net, {lo}, t, cl);
        const double fd = (g_mu.dot(ch.outputs[0].delta_mu - cl.outputs[0].delta_mu) +
                           g_rot.dot(ch.outputs[0].delta_rot_aa - cl.outputs[0].delta_rot_aa) +
                           g_col.dot(ch.outputs[0].delta_color - cl.outputs[0].delta_color)) /
                          (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(d_mu_c[a]), 1e-8});
        CHECK(std::abs(fd - d_mu_c[a]) / denom < 1e-4);
    }
}

TEST_CASE("apply_offsets composes on the right") {
    Eigen::Vector3d mu(1, 2, 3);
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();

    SUBCASE("identity leaves inputs unchanged") {
        apply_offsets(mu, rot, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity());
        CHECK(mu == Eigen::Vector3d(1, 2, 3));
        CHECK(rot.isIdentity(0.0));
    }
    SUBCASE("translation shifts the mean exactly") {
        apply_offsets(mu, rot, Eigen::Vector3d(1, 0, 0), Eigen::Matrix3d::Identity());
        CHECK(mu == Eigen::Vector3d(2, 2, 3));
    }
    SUBCASE("rotation delta post-multiplies") {
        const Eigen::Matrix3d quarter = so3_exp_matrix({0, 0, M_PI / 2});
        apply_offsets(mu, rot, Eigen::Vector3d::Zero(), quarter);
        CHECK((rot * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-12);
    }
}
