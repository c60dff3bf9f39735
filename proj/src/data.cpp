#include "bidvl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bidvl {

GradMode parse_grad_mode(const std::string& name) {
    if (name == "non-offset") return GradMode::NonOffset;
    if (name == "offset") return GradMode::Offset;
    throw ConfigError("unknown grad_mode '" + name + "'");
}

EnergyLoss parse_energy_loss(const std::string& name) {
    if (name == "plain") return EnergyLoss::Plain;
    if (name == "hinge") return EnergyLoss::Hinge;
    throw ConfigError("unknown energy_loss '" + name + "'");
}

std::string grad_mode_name(GradMode m) { return m == GradMode::Offset ? "offset" : "non-offset"; }
std::string energy_loss_name(EnergyLoss m) { return m == EnergyLoss::Plain ? "plain" : "hinge"; }

void TrainConfig::validate() const {
    if (n_ll_steps < 1) throw ConfigError("n_ll_steps must be >= 1");
    if (!(lr_var > 0.0) || !(lr_energy > 0.0)) throw ConfigError("learning rates must be > 0");
    if (batch < 2) throw ConfigError("batch must be >= 2");
    if (!(ratio.r_basic > 0.0)) throw ConfigError("r_basic must be > 0");
    if (d_h < 1) throw ConfigError("d_h must be >= 1");
    if (lambda_rec < 0.0) throw ConfigError("lambda_rec must be >= 0");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (dataset_n < 1) throw ConfigError("dataset_n must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in [0,1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

void clip_box(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::min(1.0, std::max(-1.0, t[i]));
}

Tensor gen_eight_gaussians(std::size_t n, Rng& rng) {
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = rng.below(8);
        const double ang = 2.0 * kPi * static_cast<double>(k) / 8.0;
        out[i * 2 + 0] = 0.8 * std::cos(ang) + 0.05 * rng.normal();
        out[i * 2 + 1] = 0.8 * std::sin(ang) + 0.05 * rng.normal();
    }
    clip_box(out);
    return out;
}

Tensor gen_two_rings(std::size_t n, Rng& rng) {
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (rng.below(2) == 0 ? 0.4 : 0.8) + 0.02 * rng.normal();
        const double a = rng.uniform(0.0, 2.0 * kPi);
        out[i * 2 + 0] = r * std::cos(a);
        out[i * 2 + 1] = r * std::sin(a);
    }
    clip_box(out);
    return out;
}

Tensor gen_checkerboard(std::size_t n, Rng& rng) {
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        // rejection onto the dark squares of a 4x4 board
        for (;;) {
            const double x = rng.uniform(-1.0, 1.0);
            const double y = rng.uniform(-1.0, 1.0);
            const int cx = static_cast<int>(std::floor((x + 1.0) * 2.0));
            const int cy = static_cast<int>(std::floor((y + 1.0) * 2.0));
            if ((cx + cy) % 2 == 0) {
                out[i * 2 + 0] = x;
                out[i * 2 + 1] = y;
                break;
            }
        }
    }
    return out;
}

Tensor gen_two_moons(std::size_t n, Rng& rng) {
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.uniform(0.0, kPi);
        double x, y;
        if (rng.below(2) == 0) {
            x = std::cos(t);
            y = std::sin(t);
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
        }
        out[i * 2 + 0] = (x - 0.5) * 0.62 + 0.04 * rng.normal();
        out[i * 2 + 1] = (y - 0.25) * 0.82 + 0.04 * rng.normal();
    }
    clip_box(out);
    return out;
}

Tensor gen_swiss_roll(std::size_t n, Rng& rng) {
    Tensor out({n, 2});
    const double t_max = 4.5 * kPi;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 1.5 * kPi * (1.0 + 2.0 * rng.uniform());
        out[i * 2 + 0] = (t * std::cos(t)) / t_max * 0.95 + 0.01 * rng.normal();
        out[i * 2 + 1] = (t * std::sin(t)) / t_max * 0.95 + 0.01 * rng.normal();
    }
    clip_box(out);
    return out;
}

}  // namespace

std::vector<std::pair<double, double>> eight_gaussian_centers() {
    std::vector<std::pair<double, double>> c;
    for (int k = 0; k < 8; ++k) {
        const double ang = 2.0 * kPi * k / 8.0;
        c.emplace_back(0.8 * std::cos(ang), 0.8 * std::sin(ang));
    }
    return c;
}

Tensor make_dataset(const DatasetSpec& spec) {
    if (spec.n < 1) throw ConfigError("dataset size must be >= 1");
    Rng rng(spec.seed, 3);
    if (spec.kind == "eight_gaussians") return gen_eight_gaussians(spec.n, rng);
    if (spec.kind == "two_rings") return gen_two_rings(spec.n, rng);
    if (spec.kind == "checkerboard") return gen_checkerboard(spec.n, rng);
    if (spec.kind == "two_moons") return gen_two_moons(spec.n, rng);
    if (spec.kind == "swiss_roll") return gen_swiss_roll(spec.n, rng);
    if (spec.kind == "idx_images") {
        if (spec.path.empty()) throw ConfigError("idx_images dataset needs a file path");
        return load_idx_images(spec.path);
    }
    throw ConfigError("unknown dataset kind '" + spec.kind + "'");
}

namespace {
std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}
}  // namespace

Tensor load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 16) throw FormatError("idx file too short for header");
    if (read_be32(bytes.data()) != 0x00000803u) {
        throw FormatError("bad idx magic, expected 0x00000803");
    }
    const std::size_t n = read_be32(bytes.data() + 4);
    const std::size_t rows = read_be32(bytes.data() + 8);
    const std::size_t cols = read_be32(bytes.data() + 12);
    const std::size_t expected = 16 + n * rows * cols;
    if (bytes.size() != expected) {
        throw FormatError("idx payload: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
    }
    Tensor out({n, rows * cols});
    for (std::size_t i = 0; i < n * rows * cols; ++i) {
        out[i] = static_cast<double>(bytes[16 + i]) / 127.5 - 1.0;
    }
    return out;
}

BatchIterator::BatchIterator(const Tensor& samples, std::size_t batch, std::uint64_t seed)
    : samples_(samples), n_(samples.dim(0)), batch_(batch), rng_(seed, 4) {
    if (batch_ > n_) throw ConfigError("batch size exceeds dataset size");
    if (batch_ < 1) throw ConfigError("batch size must be >= 1");
    reshuffle();
}

void BatchIterator::reshuffle() {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    for (std::size_t i = n_ - 1; i > 0; --i) {
        std::swap(order_[i], order_[rng_.below(i + 1)]);
    }
    cursor_ = 0;
}

Tensor BatchIterator::next() {
    if (cursor_ + batch_ > n_) reshuffle();  // drop the partial tail
    const std::size_t d = samples_.dim(1);
    Tensor out({batch_, d});
    for (std::size_t i = 0; i < batch_; ++i) {
        const std::size_t src = order_[cursor_ + i];
        std::memcpy(out.data() + i * d, samples_.data() + src * d, d * sizeof(double));
    }
    cursor_ += batch_;
    return out;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static std::uint32_t table[256];
    static bool built = false;
    if (!built) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        built = true;
    }
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
    // little-endian on-disk layout
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
}

void put_f64(std::vector<std::uint8_t>& buf, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put(buf, bits);
}

struct Reader {
    const std::uint8_t* p;
    std::size_t remaining;

    void need(std::size_t n) {
        if (remaining < n) throw FormatError("checkpoint truncated");
    }
    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(p[i]) << (8 * i);
        p += sizeof(T);
        remaining -= sizeof(T);
        return static_cast<T>(v);
    }
    double get_f64() {
        const std::uint64_t bits = get<std::uint64_t>();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Param*>& params,
                     std::uint64_t iteration) {
    std::vector<std::uint8_t> buf;
    buf.push_back('B');
    buf.push_back('D');
    buf.push_back('V');
    buf.push_back('L');
    put<std::uint32_t>(buf, kCheckpointVersion);
    put<std::uint64_t>(buf, iteration);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
    for (const Param* p : params) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p->name.size()));
        for (char c : p->name) buf.push_back(static_cast<std::uint8_t>(c));
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p->value.rank()));
        for (std::size_t d : p->value.shape()) put<std::uint64_t>(buf, d);
        for (std::size_t i = 0; i < p->value.size(); ++i) put_f64(buf, p->value[i]);
    }
    put<std::uint32_t>(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
}

std::uint64_t load_checkpoint(const std::string& path, const std::vector<Param*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 8) throw FormatError("checkpoint too short");
    const std::uint32_t stored_crc =
        std::uint32_t(buf[buf.size() - 4]) | (std::uint32_t(buf[buf.size() - 3]) << 8) |
        (std::uint32_t(buf[buf.size() - 2]) << 16) | (std::uint32_t(buf[buf.size() - 1]) << 24);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc) {
        throw FormatError("checkpoint corruption: CRC mismatch");
    }

    Reader r{buf.data(), buf.size() - 4};
    r.need(4);
    if (std::memcmp(r.p, "BDVL", 4) != 0) throw FormatError("bad checkpoint magic");
    r.p += 4;
    r.remaining -= 4;

    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
    }
    const auto iteration = r.get<std::uint64_t>();
    const auto count = r.get<std::uint32_t>();
    if (count != params.size()) {
        throw FormatError("checkpoint has " + std::to_string(count) + " params, expected " +
                          std::to_string(params.size()));
    }
    for (Param* p : params) {
        const auto name_len = r.get<std::uint32_t>();
        r.need(name_len);
        const std::string name(reinterpret_cast<const char*>(r.p), name_len);
        r.p += name_len;
        r.remaining -= name_len;
        if (name != p->name) {
            throw FormatError("checkpoint param '" + name + "' does not match '" + p->name + "'");
        }
        const auto rank = r.get<std::uint32_t>();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
        if (shape != p->value.shape()) {
            throw FormatError("checkpoint shape mismatch for '" + name + "'");
        }
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = r.get_f64();
    }
    return iteration;
}

namespace {

[[noreturn]] void config_fail(int line, const std::string& msg) {
    throw ConfigError(msg + (line > 0 ? " (line " + std::to_string(line) + ")" : ""));
}

double to_double(const std::string& s, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        config_fail(line, "unparsable value '" + s + "' for " + key);
    }
}

std::uint64_t to_u64(const std::string& s, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
        const std::uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        config_fail(line, "unparsable value '" + s + "' for " + key);
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void set_key(TrainConfig& cfg, const std::string& key, const std::string& val, int line) {
    if (key == "grad_mode") cfg.grad_mode = parse_grad_mode(val);
    else if (key == "energy_loss") cfg.energy_loss = parse_energy_loss(val);
    else if (key == "ratio_mode") cfg.ratio.variant = parse_ratio_variant(val);
    else if (key == "r_basic") cfg.ratio.r_basic = to_double(val, key, line);
    else if (key == "n_ll_steps") cfg.n_ll_steps = static_cast<int>(to_u64(val, key, line));
    else if (key == "lr_var") cfg.lr_var = to_double(val, key, line);
    else if (key == "lr_energy") cfg.lr_energy = to_double(val, key, line);
    else if (key == "adam_beta1") cfg.adam_beta1 = to_double(val, key, line);
    else if (key == "adam_beta2") cfg.adam_beta2 = to_double(val, key, line);
    else if (key == "adam_eps") cfg.adam_eps = to_double(val, key, line);
    else if (key == "batch") cfg.batch = static_cast<std::size_t>(to_u64(val, key, line));
    else if (key == "seed") cfg.seed = to_u64(val, key, line);
    else if (key == "d_h") cfg.d_h = static_cast<std::size_t>(to_u64(val, key, line));
    else if (key == "lambda_rec") cfg.lambda_rec = to_double(val, key, line);
    else if (key == "max_iters") cfg.max_iters = to_u64(val, key, line);
    else if (key == "eval_every") cfg.eval_every = to_u64(val, key, line);
    else if (key == "dataset") cfg.dataset = val;
    else if (key == "dataset_n") cfg.dataset_n = static_cast<std::size_t>(to_u64(val, key, line));
    else config_fail(line, "unknown key '" + key + "'");
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) config_fail(line, "expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        const std::string val = trim(s.substr(eq + 1));
        if (key.empty() || val.empty()) config_fail(line, "expected 'key = value'");
        set_key(cfg, key, val, line);
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_override(TrainConfig& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: '" + kv + "'");
    const std::string key = trim(kv.substr(0, eq));
    const std::string val = trim(kv.substr(eq + 1));
    if (key.empty() || val.empty()) throw ConfigError("override must be key=value: '" + kv + "'");
    set_key(cfg, key, val, 0);
    cfg.validate();
}

}  // namespace bidvl
