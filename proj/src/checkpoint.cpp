#include "jgs/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace jgs {

uint32_t crc32(const void* data, std::size_t len) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t c = 0xFFFFFFFFu;
    const auto* p = static_cast<const uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

namespace {

// ---- little-endian primitive encoding ----

class Writer {
public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void bytes(const void* p, std::size_t n) {
        buf_.append(static_cast<const char*>(p), n);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void f64_vec(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void i32_vec(const std::vector<int>& v) {
        u64(v.size());
        for (int x : v) u32(static_cast<uint32_t>(x));
    }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const char* p, std::size_t n, std::string section)
        : p_(p), end_(p + n), section_(std::move(section)) {}

    uint8_t u8() { return static_cast<uint8_t>(*take(1)); }
    uint32_t u32() {
        const char* p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(p[i])) << (8 * i);
        return v;
    }
    uint64_t u64() {
        const char* p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(p[i])) << (8 * i);
        return v;
    }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const uint64_t n = u64();
        const char* p = take(n);
        return std::string(p, n);
    }
    std::vector<double> f64_vec() {
        const uint64_t n = u64();
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    std::vector<int> i32_vec() {
        const uint64_t n = u64();
        std::vector<int> v(n);
        for (auto& x : v) x = static_cast<int>(u32());
        return v;
    }
    bool done() const { return p_ == end_; }
    void expect_done() const {
        if (!done())
            throw std::runtime_error("checkpoint: trailing bytes in section " + section_);
    }

private:
    const char* take(std::size_t n) {
        if (static_cast<std::size_t>(end_ - p_) < n)
            throw std::runtime_error("checkpoint: truncated section " + section_);
        const char* out = p_;
        p_ += n;
        return out;
    }
    const char* p_;
    const char* end_;
    std::string section_;
};

// ---- container framing ----

class Container {
public:
    explicit Container(uint32_t kind) {
        out_.bytes("JGS1", 4);
        out_.u32(kCheckpointVersion);
        out_.u32(kind);
    }
    void section(const char tag[5], const Writer& w) {
        out_.bytes(tag, 4);
        out_.u64(w.data().size());
        out_.u32(crc32(w.data().data(), w.data().size()));
        out_.bytes(w.data().data(), w.data().size());
    }
    const std::string& data() const { return out_.data(); }

private:
    Writer out_;
};

struct Section {
    std::string tag;
    std::string payload;
};

std::vector<Section> parse_container(const std::string& data, uint32_t expected_kind,
                                     const std::string& what) {
    if (data.size() < 12 || data.compare(0, 4, "JGS1") != 0)
        throw std::runtime_error(what + ": not a JGS1 container");
    auto rd_u32 = [&](std::size_t at) {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(data[at + i])) << (8 * i);
        return v;
    };
    auto rd_u64 = [&](std::size_t at) {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<uint8_t>(data[at + i])) << (8 * i);
        return v;
    };
    const uint32_t version = rd_u32(4);
    if (version != kCheckpointVersion)
        throw std::runtime_error(what + ": incompatible format version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
    const uint32_t kind = rd_u32(8);
    if (kind != expected_kind)
        throw std::runtime_error(what + ": wrong container kind");

    std::vector<Section> sections;
    std::size_t at = 12;
    while (at < data.size()) {
        if (at + 16 > data.size()) throw std::runtime_error(what + ": truncated section header");
        Section s;
        s.tag = data.substr(at, 4);
        const uint64_t len = rd_u64(at + 4);
        const uint32_t crc = rd_u32(at + 12);
        at += 16;
        if (at + len > data.size())
            throw std::runtime_error(what + ": truncated section " + s.tag);
        s.payload = data.substr(at, len);
        at += len;
        if (crc32(s.payload.data(), s.payload.size()) != crc)
            throw std::runtime_error(what + ": CRC mismatch in section " + s.tag);
        sections.push_back(std::move(s));
    }
    return sections;
}

const Section& find_section(const std::vector<Section>& sections, const std::string& tag,
                            const std::string& what) {
    for (const auto& s : sections)
        if (s.tag == tag) return s;
    throw std::runtime_error(what + ": missing section " + tag);
}

// ---- domain encodings ----

void put_gaussians(Writer& w, const GaussianSet& g) {
    w.u8(g.kind == GaussianKind::human ? 1 : 0);
    w.u32(static_cast<uint32_t>(g.count));
    w.u32(static_cast<uint32_t>(g.sh_degree));
    w.u32(static_cast<uint32_t>(g.num_joints));
    w.f64_vec(g.mu);
    w.f64_vec(g.rot);
    w.f64_vec(g.log_scale);
    w.f64_vec(g.opacity_logit);
    w.f64_vec(g.sh);
    w.f64_vec(g.lbs_logit);
    w.f64_vec(g.lbs_init);
}

GaussianSet get_gaussians(Reader& r) {
    GaussianSet g;
    g.kind = r.u8() ? GaussianKind::human : GaussianKind::background;
    g.count = static_cast<int>(r.u32());
    g.sh_degree = static_cast<int>(r.u32());
    g.num_joints = static_cast<int>(r.u32());
    g.mu = r.f64_vec();
    g.rot = r.f64_vec();
    g.log_scale = r.f64_vec();
    g.opacity_logit = r.f64_vec();
    g.sh = r.f64_vec();
    g.lbs_logit = r.f64_vec();
    g.lbs_init = r.f64_vec();
    return g;
}

void put_skeleton(Writer& w, const Skeleton& s) {
    w.u32(static_cast<uint32_t>(s.num_joints));
    w.i32_vec(s.parent);
    w.u64(s.rest_offset.size());
    for (const auto& v : s.rest_offset)
        for (int a = 0; a < 3; ++a) w.f64(v[a]);
    w.u64(s.capsules.size());
    for (const auto& c : s.capsules) {
        w.u32(static_cast<uint32_t>(c.joint_a));
        w.u32(static_cast<uint32_t>(c.joint_b));
        for (int a = 0; a < 3; ++a) w.f64(c.a[a]);
        for (int a = 0; a < 3; ++a) w.f64(c.b[a]);
        w.f64(c.radius);
    }
    w.u64(s.vertices.size());
    for (const auto& v : s.vertices)
        for (int a = 0; a < 3; ++a) w.f64(v[a]);
    w.f64_vec(s.vertex_weights);
    w.u64(s.vertex_albedo.size());
    for (const auto& v : s.vertex_albedo)
        for (int a = 0; a < 3; ++a) w.f64(v[a]);
}

Skeleton get_skeleton(Reader& r) {
    Skeleton s;
    s.num_joints = static_cast<int>(r.u32());
    s.parent = r.i32_vec();
    s.rest_offset.resize(r.u64());
    for (auto& v : s.rest_offset)
        for (int a = 0; a < 3; ++a) v[a] = r.f64();
    s.capsules.resize(r.u64());
    for (auto& c : s.capsules) {
        c.joint_a = static_cast<int>(r.u32());
        c.joint_b = static_cast<int>(r.u32());
        for (int a = 0; a < 3; ++a) c.a[a] = r.f64();
        for (int a = 0; a < 3; ++a) c.b[a] = r.f64();
        c.radius = r.f64();
    }
    s.vertices.resize(r.u64());
    for (auto& v : s.vertices)
        for (int a = 0; a < 3; ++a) v[a] = r.f64();
    s.vertex_weights = r.f64_vec();
    s.vertex_albedo.resize(r.u64());
    for (auto& v : s.vertex_albedo)
        for (int a = 0; a < 3; ++a) v[a] = r.f64();
    s.finalize();
    return s;
}

void put_camera(Writer& w, const CameraState& c) {
    w.f64(c.intrinsics.fx);
    w.f64(c.intrinsics.fy);
    w.f64(c.intrinsics.cx);
    w.f64(c.intrinsics.cy);
    w.u32(static_cast<uint32_t>(c.intrinsics.width));
    w.u32(static_cast<uint32_t>(c.intrinsics.height));
    w.f64(c.base.rotation.w);
    w.f64(c.base.rotation.x);
    w.f64(c.base.rotation.y);
    w.f64(c.base.rotation.z);
    for (int a = 0; a < 3; ++a) w.f64(c.base.translation[a]);
    for (int a = 0; a < 6; ++a) w.f64(c.correction[a]);
}

CameraState get_camera(Reader& r) {
    CameraState c;
    c.intrinsics.fx = r.f64();
    c.intrinsics.fy = r.f64();
    c.intrinsics.cx = r.f64();
    c.intrinsics.cy = r.f64();
    c.intrinsics.width = static_cast<int>(r.u32());
    c.intrinsics.height = static_cast<int>(r.u32());
    // direct member assignment on purpose: reconstruct bits exactly,
    // renormalizing would perturb them
    c.base.rotation.w = r.f64();
    c.base.rotation.x = r.f64();
    c.base.rotation.y = r.f64();
    c.base.rotation.z = r.f64();
    for (int a = 0; a < 3; ++a) c.base.translation[a] = r.f64();
    for (int a = 0; a < 6; ++a) c.correction[a] = r.f64();
    return c;
}

void put_cameras(Writer& w, const std::vector<CameraState>& cams) {
    w.u64(cams.size());
    for (const auto& c : cams) put_camera(w, c);
}

std::vector<CameraState> get_cameras(Reader& r) {
    std::vector<CameraState> cams(r.u64());
    for (auto& c : cams) c = get_camera(r);
    return cams;
}

void put_theta(Writer& w, const std::vector<std::vector<double>>& theta) {
    w.u64(theta.size());
    for (const auto& t : theta) w.f64_vec(t);
}

std::vector<std::vector<double>> get_theta(Reader& r) {
    std::vector<std::vector<double>> theta(r.u64());
    for (auto& t : theta) t = r.f64_vec();
    return theta;
}

void put_net(Writer& w, const TemporalNet& net) {
    w.u32(static_cast<uint32_t>(net.cfg.grid.levels));
    w.u32(static_cast<uint32_t>(net.cfg.grid.table_size));
    w.u32(static_cast<uint32_t>(net.cfg.grid.features));
    w.f64(net.cfg.grid.base_resolution);
    w.f64(net.cfg.grid.growth);
    for (int a = 0; a < 3; ++a) w.f64(net.cfg.grid.bbox_min[a]);
    for (int a = 0; a < 3; ++a) w.f64(net.cfg.grid.bbox_max[a]);
    w.u8(net.cfg.position_encoding == PositionEncoding::hash ? 1 : 0);
    w.u32(static_cast<uint32_t>(net.cfg.freq_time_L));
    w.u32(static_cast<uint32_t>(net.cfg.freq_pos_L));
    w.u32(static_cast<uint32_t>(net.cfg.hidden));
    w.f64_vec(net.hash_table);
    w.f64_vec(net.offset_mlp.weights);
    w.f64_vec(net.color_mlp.weights);
}

TemporalNet get_net(Reader& r) {
    TemporalNet net;
    net.cfg.grid.levels = static_cast<int>(r.u32());
    net.cfg.grid.table_size = static_cast<int>(r.u32());
    net.cfg.grid.features = static_cast<int>(r.u32());
    net.cfg.grid.base_resolution = r.f64();
    net.cfg.grid.growth = r.f64();
    for (int a = 0; a < 3; ++a) net.cfg.grid.bbox_min[a] = r.f64();
    for (int a = 0; a < 3; ++a) net.cfg.grid.bbox_max[a] = r.f64();
    net.cfg.position_encoding = r.u8() ? PositionEncoding::hash : PositionEncoding::frequency;
    net.cfg.freq_time_L = static_cast<int>(r.u32());
    net.cfg.freq_pos_L = static_cast<int>(r.u32());
    net.cfg.hidden = static_cast<int>(r.u32());
    net.init(0);  // configure shapes, then overwrite the weights
    const std::size_t table_size = net.hash_table.size();
    const std::size_t offset_size = net.offset_mlp.weights.size();
    const std::size_t color_size = net.color_mlp.weights.size();
    net.hash_table = r.f64_vec();
    net.offset_mlp.weights = r.f64_vec();
    net.color_mlp.weights = r.f64_vec();
    if (net.hash_table.size() != table_size || net.offset_mlp.weights.size() != offset_size ||
        net.color_mlp.weights.size() != color_size)
        throw std::runtime_error("checkpoint: temporal net weights do not match configuration");
    return net;
}

void put_image(Writer& w, const ImageBuffer& img) {
    w.u32(static_cast<uint32_t>(img.width));
    w.u32(static_cast<uint32_t>(img.height));
    w.f64_vec(img.rgb);
    w.f64_vec(img.alpha);
    w.f64_vec(img.depth);
}

ImageBuffer get_image(Reader& r) {
    ImageBuffer img;
    img.width = static_cast<int>(r.u32());
    img.height = static_cast<int>(r.u32());
    img.rgb = r.f64_vec();
    img.alpha = r.f64_vec();
    img.depth = r.f64_vec();
    return img;
}

void put_nonrigid(Writer& w, const NonRigidField& f) {
    w.f64(f.amplitude);
    w.f64(f.spatial_freq);
    w.f64(f.temporal_freq);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) w.f64(f.directions(a, b));
    for (int a = 0; a < 3; ++a) w.f64(f.phase[a]);
}

NonRigidField get_nonrigid(Reader& r) {
    NonRigidField f;
    f.amplitude = r.f64();
    f.spatial_freq = r.f64();
    f.temporal_freq = r.f64();
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) f.directions(a, b) = r.f64();
    for (int a = 0; a < 3; ++a) f.phase[a] = r.f64();
    return f;
}

void write_file(const std::string& path, const std::string& data) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("save: cannot open " + tmp);
        f.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!f) throw std::runtime_error("save: short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("save: cannot move temporary file onto " + path);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

constexpr uint32_t kKindCheckpoint = 1;
constexpr uint32_t kKindBundle = 2;

}  // namespace

std::string checkpoint_bytes(const Checkpoint& ckpt) {
    Container c(kKindCheckpoint);
    {
        Writer w;
        w.str(ckpt.config.serialize());
        c.section("CONF", w);
    }
    {
        Writer w;
        put_gaussians(w, ckpt.model.human);
        c.section("GSHU", w);
    }
    {
        Writer w;
        put_gaussians(w, ckpt.model.background);
        c.section("GSBG", w);
    }
    {
        Writer w;
        put_skeleton(w, ckpt.model.skeleton);
        c.section("SKEL", w);
    }
    {
        Writer w;
        put_theta(w, ckpt.model.theta);
        w.f64_vec(ckpt.model.beta);
        c.section("BODY", w);
    }
    {
        Writer w;
        put_cameras(w, ckpt.model.cameras);
        c.section("CAMS", w);
    }
    {
        Writer w;
        put_net(w, ckpt.model.net);
        w.u8(ckpt.model.dynamics_enabled ? 1 : 0);
        c.section("TNET", w);
    }
    {
        Writer w;
        w.u64(ckpt.adam.size());
        for (const auto& group : ckpt.adam) {
            w.u64(group.size());
            for (const auto& st : group) {
                w.f64_vec(st.m);
                w.f64_vec(st.v);
                w.i64(st.step);
            }
        }
        c.section("ADAM", w);
    }
    {
        Writer w;
        w.i64(ckpt.iteration);
        c.section("ITER", w);
    }
    return c.data();
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_file(path, checkpoint_bytes(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string data = read_file(path);
    const auto sections = parse_container(data, kKindCheckpoint, "checkpoint " + path);
    Checkpoint ckpt;
    {
        const auto& s = find_section(sections, "CONF", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "CONF");
        ckpt.config = RunConfig::parse(r.str());
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "GSHU", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "GSHU");
        ckpt.model.human = get_gaussians(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "GSBG", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "GSBG");
        ckpt.model.background = get_gaussians(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "SKEL", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "SKEL");
        ckpt.model.skeleton = get_skeleton(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "BODY", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "BODY");
        ckpt.model.theta = get_theta(r);
        ckpt.model.beta = r.f64_vec();
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "CAMS", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "CAMS");
        ckpt.model.cameras = get_cameras(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "TNET", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "TNET");
        ckpt.model.net = get_net(r);
        ckpt.model.dynamics_enabled = r.u8() != 0;
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "ADAM", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "ADAM");
        ckpt.adam.resize(r.u64());
        for (auto& group : ckpt.adam) {
            group.resize(r.u64());
            for (auto& st : group) {
                st.m = r.f64_vec();
                st.v = r.f64_vec();
                st.step = r.i64();
            }
        }
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "ITER", "checkpoint");
        Reader r(s.payload.data(), s.payload.size(), "ITER");
        ckpt.iteration = r.i64();
        r.expect_done();
    }
    return ckpt;
}

std::string bundle_bytes(const SceneBundle& b) {
    Container c(kKindBundle);
    {
        Writer w;
        w.str(b.config.serialize());
        w.u32(static_cast<uint32_t>(b.frames));
        w.f64(b.scene_radius);
        w.u64(b.seed);
        c.section("CONF", w);
    }
    {
        Writer w;
        put_skeleton(w, b.skeleton);
        c.section("SKEL", w);
    }
    {
        Writer w;
        put_gaussians(w, b.gt_human);
        put_gaussians(w, b.gt_background);
        c.section("GSET", w);
    }
    {
        Writer w;
        put_theta(w, b.gt_theta);
        w.f64_vec(b.gt_beta);
        put_cameras(w, b.gt_cameras);
        put_nonrigid(w, b.nonrigid);
        c.section("GTPR", w);
    }
    {
        Writer w;
        w.u64(b.images.size());
        for (const auto& img : b.images) put_image(w, img);
        c.section("IMGS", w);
    }
    {
        Writer w;
        w.u64(b.masks.size());
        for (const auto& m : b.masks) w.f64_vec(m);
        c.section("MASK", w);
    }
    {
        Writer w;
        put_theta(w, b.init_theta);
        w.f64_vec(b.init_beta);
        put_cameras(w, b.init_cameras);
        c.section("INIT", w);
    }
    return c.data();
}

void save_bundle(const SceneBundle& bundle, const std::string& path) {
    write_file(path, bundle_bytes(bundle));
}

SceneBundle load_bundle(const std::string& path) {
    const std::string data = read_file(path);
    const auto sections = parse_container(data, kKindBundle, "bundle " + path);
    SceneBundle b;
    {
        const auto& s = find_section(sections, "CONF", "bundle");
        Reader r(s.payload.data(), s.payload.size(), "CONF");
        b.config = RunConfig::parse(r.str());
        b.frames = static_cast<int>(r.u32());
        b.scene_radius = r.f64();
        b.seed = r.u64();
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "SKEL", "bundle");
        Reader r(s.payload.data(), s.payload.size(), "SKEL");
        b.skeleton = get_skeleton(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "GSET", "bundle");
        Reader r(s.payload.data(), s.payload.size(), "GSET");
        b.gt_human = get_gaussians(r);
        b.gt_background = get_gaussians(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "GTPR", "bundle");
        Reader r(s.payload.data(), s.payload.size(), "GTPR");
        b.gt_theta = get_theta(r);
        b.gt_beta = r.f64_vec();
        b.gt_cameras = get_cameras(r);
        b.nonrigid = get_nonrigid(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "IMGS", "bundle");
        Reader r(s.payload.data(), s.payload.size(), "IMGS");
        b.images.resize(r.u64());
        for (auto& img : b.images) img = get_image(r);
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "MASK", "bundle");
        Reader r(s.payload.data(), s.payload.size(), "MASK");
        b.masks.resize(r.u64());
        for (auto& m : b.masks) m = r.f64_vec();
        r.expect_done();
    }
    {
        const auto& s = find_section(sections, "INIT", "bundle");
        Reader r(s.payload.data(), s.payload.size(), "INIT");
        b.init_theta = get_theta(r);
        b.init_beta = r.f64_vec();
        b.init_cameras = get_cameras(r);
        r.expect_done();
    }
    return b;
}

}  // namespace jgs
