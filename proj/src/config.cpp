#include "jgs/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace jgs {

namespace {

using Member = std::variant<int64_t RunConfig::*, int RunConfig::*, double RunConfig::*,
                            bool RunConfig::*, std::string RunConfig::*>;

struct Binding {
    const char* key;
    Member member;
};

#define BIND(member) {#member, &RunConfig::member}

// Single field table so parse and serialize cannot drift apart.
const std::vector<Binding>& bindings() {
    static const std::vector<Binding> b = {
        BIND(seed),
        BIND(frames),
        BIND(image_width),
        BIND(image_height),
        BIND(joints),
        BIND(n_human),
        BIND(n_background),
        BIND(n_surface_vertices),
        BIND(body_height),
        BIND(capsule_radius_scale),
        BIND(motion_amplitude),
        BIND(nonrigid_amplitude),
        BIND(nonrigid_spatial_freq),
        BIND(nonrigid_temporal_freq),
        BIND(camera_orbit_deg),
        BIND(camera_distance),
        BIND(camera_height),
        BIND(fov_deg),
        BIND(texture_freq),
        BIND(noise_sigma),
        BIND(perturb_beta),
        BIND(sh_degree),
        BIND(hash_levels),
        BIND(hash_table_size),
        BIND(hash_features),
        BIND(hash_base_resolution),
        BIND(hash_growth),
        BIND(freq_time_L),
        BIND(freq_pos_L),
        BIND(mlp_hidden),
        BIND(use_hash_encoding),
        BIND(mask_binary),
        BIND(lambda_rgb),
        BIND(lambda_ssim),
        BIND(lambda_lpips),
        BIND(lambda_mask),
        BIND(lambda_lbs),
        BIND(lambda_smpl),
        BIND(lambda_dyn),
        BIND(lambda_bg),
        BIND(lambda_human),
        BIND(iters_warmup),
        BIND(iters_independent),
        BIND(iters_joint),
        BIND(lr_bg_position),
        BIND(lr_bg_rotation),
        BIND(lr_bg_scale),
        BIND(lr_bg_opacity),
        BIND(lr_bg_color),
        BIND(lr_human_position),
        BIND(lr_human_attr),
        BIND(lr_net),
        BIND(lr_camera),
        BIND(lr_theta),
        BIND(lr_beta),
        BIND(disable_dynamics),
        BIND(disable_synergistic),
        BIND(checkpoint_interval),
        BIND(psnr_interval),
        BIND(sigmas),
        BIND(sweep_modes),
        BIND(sweep_seeds),
        BIND(out_dir),
    };
    return b;
}

#undef BIND

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void RunConfig::validate() const {
    if (frames < 1) throw std::invalid_argument("config: frames must be >= 1");
    if (image_width < 1 || image_height < 1)
        throw std::invalid_argument("config: image size must be >= 1");
    if (joints < 1) throw std::invalid_argument("config: joints must be >= 1");
    if (n_background < 1) throw std::invalid_argument("config: n_background must be >= 1");
    if (n_human < 0) throw std::invalid_argument("config: n_human must be >= 0");
    if (sh_degree < 0 || sh_degree > 3)
        throw std::invalid_argument("config: sh_degree must be in [0, 3]");
    if (noise_sigma < 0.0) throw std::invalid_argument("config: noise_sigma must be >= 0");
    if (iters_warmup < 0 || iters_independent < 0 || iters_joint < 0)
        throw std::invalid_argument("config: stage lengths must be >= 0");
    const double lrs[] = {lr_bg_position, lr_bg_rotation, lr_bg_scale, lr_bg_opacity,
                          lr_bg_color,    lr_human_position, lr_human_attr, lr_net,
                          lr_camera,      lr_theta,        lr_beta};
    for (double v : lrs)
        if (!(v > 0.0)) throw std::invalid_argument("config: learning rates must be > 0");
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os << "# jgs run configuration\n";
    for (const Binding& b : bindings()) {
        os << b.key << " = ";
        std::visit(
            [&](auto member) {
                using T = std::remove_cvref_t<decltype(this->*member)>;
                if constexpr (std::is_same_v<T, double>)
                    os << format_double(this->*member);
                else if constexpr (std::is_same_v<T, bool>)
                    os << (this->*member ? "true" : "false");
                else if constexpr (std::is_same_v<T, std::string>)
                    os << '"' << this->*member << '"';
                else
                    os << this->*member;
            },
            b.member);
        os << "\n";
    }
    return os.str();
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));

        const Binding* binding = nullptr;
        for (const Binding& b : bindings())
            if (key == b.key) {
                binding = &b;
                break;
            }
        if (!binding) throw std::runtime_error("config: unknown key '" + key + "'");

        try {
            std::visit(
                [&](auto member) {
                    using T = std::remove_cvref_t<decltype(cfg.*member)>;
                    if constexpr (std::is_same_v<T, int64_t>)
                        cfg.*member = std::stoll(value);
                    else if constexpr (std::is_same_v<T, int>)
                        cfg.*member = std::stoi(value);
                    else if constexpr (std::is_same_v<T, double>)
                        cfg.*member = std::stod(value);
                    else if constexpr (std::is_same_v<T, bool>) {
                        if (value == "true")
                            cfg.*member = true;
                        else if (value == "false")
                            cfg.*member = false;
                        else
                            throw std::runtime_error("expected true or false");
                    } else {
                        std::string v = value;
                        if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
                            v = v.substr(1, v.size() - 2);
                        cfg.*member = v;
                    }
                },
                binding->member);
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key + "': bad value '" + value + "'");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("config: cannot write " + path);
    f << serialize();
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream is(csv);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<std::string> parse_string_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream is(csv);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

}  // namespace jgs
