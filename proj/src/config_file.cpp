#include "rotadapt/config_file.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rotadapt/errors.hpp"

namespace rotadapt {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
    }
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

uint64_t fnv1a64(const void* data, size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xCBF29CE484222325ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string serialize_config(const TrainConfig& c) {
    std::ostringstream o;
    o << "lambda_s=" << fmt(c.weights.lambda_s) << "\n";
    o << "lambda_t=" << fmt(c.weights.lambda_t) << "\n";
    o << "lambda_ssl=" << fmt(c.weights.lambda_ssl) << "\n";
    o << "lambda_ent=" << fmt(c.weights.lambda_ent) << "\n";
    o << "lambda_vat=" << fmt(c.weights.lambda_vat) << "\n";
    o << "total_iterations=" << c.total_iterations << "\n";
    o << "lr_trunk=" << fmt(c.lr_trunk) << "\n";
    o << "lr_heads=" << fmt(c.lr_heads) << "\n";
    o << "momentum=" << fmt(c.momentum) << "\n";
    o << "weight_decay=" << fmt(c.weight_decay) << "\n";
    o << "schedule_alpha=" << fmt(c.schedule_alpha) << "\n";
    o << "schedule_beta=" << fmt(c.schedule_beta) << "\n";
    o << "batch_source=" << c.batch_source << "\n";
    o << "batch_target=" << c.batch_target << "\n";
    o << "batch_unlabeled=" << c.batch_unlabeled << "\n";
    o << "eval_every=" << c.eval_every << "\n";
    o << "seed=" << c.seed << "\n";
    o << "pretext=" << to_string(c.pretext) << "\n";
    o << "pretext_domains=" << to_string(c.pretext_domains) << "\n";
    o << "vat_epsilon=" << fmt(c.vat.epsilon) << "\n";
    o << "vat_xi=" << fmt(c.vat.xi) << "\n";
    o << "vat_power_iterations=" << c.vat.power_iterations << "\n";
    o << "jigsaw_grid=" << c.jigsaw_grid << "\n";
    o << "jigsaw_perm_count=" << c.jigsaw_perm_count << "\n";
    return o.str();
}

void apply_config_line(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "lambda_s") c.weights.lambda_s = parse_double(key, value);
    else if (key == "lambda_t") c.weights.lambda_t = parse_double(key, value);
    else if (key == "lambda_ssl") c.weights.lambda_ssl = parse_double(key, value);
    else if (key == "lambda_ent") c.weights.lambda_ent = parse_double(key, value);
    else if (key == "lambda_vat") c.weights.lambda_vat = parse_double(key, value);
    else if (key == "total_iterations") c.total_iterations = static_cast<int>(parse_int(key, value));
    else if (key == "lr_trunk") c.lr_trunk = parse_double(key, value);
    else if (key == "lr_heads") c.lr_heads = parse_double(key, value);
    else if (key == "momentum") c.momentum = parse_double(key, value);
    else if (key == "weight_decay") c.weight_decay = parse_double(key, value);
    else if (key == "schedule_alpha") c.schedule_alpha = parse_double(key, value);
    else if (key == "schedule_beta") c.schedule_beta = parse_double(key, value);
    else if (key == "batch_source") c.batch_source = static_cast<int>(parse_int(key, value));
    else if (key == "batch_target") c.batch_target = static_cast<int>(parse_int(key, value));
    else if (key == "batch_unlabeled") c.batch_unlabeled = static_cast<int>(parse_int(key, value));
    else if (key == "eval_every") c.eval_every = static_cast<int>(parse_int(key, value));
    else if (key == "seed") c.seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "pretext") c.pretext = pretext_kind_from_string(value);
    else if (key == "pretext_domains") c.pretext_domains = pretext_domains_from_string(value);
    else if (key == "vat_epsilon") c.vat.epsilon = parse_double(key, value);
    else if (key == "vat_xi") c.vat.xi = parse_double(key, value);
    else if (key == "vat_power_iterations")
        c.vat.power_iterations = static_cast<int>(parse_int(key, value));
    else if (key == "jigsaw_grid") c.jigsaw_grid = static_cast<int>(parse_int(key, value));
    else if (key == "jigsaw_perm_count")
        c.jigsaw_perm_count = static_cast<int>(parse_int(key, value));
    else
        throw ConfigError("config: unknown key '" + key + "'");
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig c;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not key=value: '" + raw + "'");
        apply_config_line(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("config: cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

}  // namespace rotadapt
