#include "rotadapt/checkpoint.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "rotadapt/errors.hpp"

namespace rotadapt {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'A', 'D', 'C', 'K', 'P', 'T', '\n'};

const std::array<uint32_t, 256>& crc_table() {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    Reader(const std::string& buf, const std::filesystem::path& path)
        : buf_(buf), path_(path) {}

    const char* take(size_t n) {
        if (pos_ + n > buf_.size())
            throw IntegrityError("checkpoint " + path_.string() + ": truncated file");
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    uint32_t u32() {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(4));
        return p[0] | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
    }
    uint64_t u64() {
        uint64_t v = 0;
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(8));
        for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
        return v;
    }
    size_t pos() const { return pos_; }

private:
    const std::string& buf_;
    std::filesystem::path path_;
    size_t pos_ = 0;
};

std::filesystem::path meta_path(const std::filesystem::path& ckpt) {
    std::filesystem::path p = ckpt;
    p.replace_extension(".meta.json");
    return p;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
    const auto& t = crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) c = t[(c ^ p[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

Model Checkpoint::to_model() const {
    Model m(spec);
    m.set_flat_weights(weights);
    return m;
}

Checkpoint Checkpoint::of_model(const Model& m, int iteration, double val_accuracy,
                                uint64_t seed, uint64_t config_hash) {
    Checkpoint c;
    c.spec = m.spec();
    c.weights = m.flat_weights();
    c.iteration = iteration;
    c.val_accuracy = val_accuracy;
    c.seed = seed;
    c.config_hash = config_hash;
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    if (path.extension() != ".ckpt")
        throw InputError("checkpoint path must end in .ckpt: " + path.string());
    if (c.val_accuracy < 0.0 || c.val_accuracy > 1.0)
        throw InputError("checkpoint: val_accuracy outside [0,1]");

    std::string body;
    const std::string spec_json = c.spec.to_json();
    put_u32(body, c.version);
    put_u32(body, static_cast<uint32_t>(spec_json.size()));
    body.append(spec_json);
    put_u64(body, c.weights.size());
    const size_t wbytes = c.weights.size() * sizeof(double);
    const size_t off = body.size();
    body.resize(off + wbytes);
    if (wbytes) std::memcpy(body.data() + off, c.weights.data(), wbytes);

    std::string blob(kMagic, sizeof(kMagic));
    blob += body;
    put_u32(blob, crc32(body.data(), body.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + path.string());
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw DataError("failed writing checkpoint " + path.string());
    f.close();

    json meta;
    meta["format_version"] = c.version;
    meta["iteration"] = c.iteration;
    meta["val_accuracy"] = format_double(c.val_accuracy);
    meta["seed"] = c.seed;
    meta["config_hash"] = c.config_hash;
    std::ofstream mf(meta_path(path), std::ios::binary | std::ios::trunc);
    if (!mf) throw DataError("cannot write checkpoint metadata " + meta_path(path).string());
    mf << meta.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read checkpoint " + path.string());
    std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r(blob, path);
    if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0)
        throw IntegrityError("checkpoint " + path.string() + ": bad magic");
    if (blob.size() < sizeof(kMagic) + 4)
        throw IntegrityError("checkpoint " + path.string() + ": truncated file");
    const size_t body_len = blob.size() - sizeof(kMagic) - 4;
    const uint32_t want = crc32(blob.data() + sizeof(kMagic), body_len);
    const unsigned char* tail =
        reinterpret_cast<const unsigned char*>(blob.data() + blob.size() - 4);
    const uint32_t got =
        tail[0] | (uint32_t(tail[1]) << 8) | (uint32_t(tail[2]) << 16) | (uint32_t(tail[3]) << 24);
    if (want != got) throw IntegrityError("checkpoint " + path.string() + ": CRC mismatch");

    Checkpoint c;
    c.version = r.u32();
    if (c.version != kCheckpointVersion)
        throw VersionError("checkpoint " + path.string() + ": unsupported format version " +
                           std::to_string(c.version));
    const uint32_t spec_len = r.u32();
    c.spec = ModelSpec::from_json(std::string(r.take(spec_len), spec_len));
    const uint64_t count = r.u64();
    if (r.pos() + count * sizeof(double) + 4 != blob.size())
        throw IntegrityError("checkpoint " + path.string() + ": weight payload size mismatch");
    c.weights.resize(count);
    if (count) std::memcpy(c.weights.data(), r.take(count * sizeof(double)),
                           count * sizeof(double));

    std::ifstream mf(meta_path(path), std::ios::binary);
    if (!mf) throw DataError("cannot read checkpoint metadata " + meta_path(path).string());
    try {
        json meta = json::parse(mf);
        if (meta.at("format_version").get<uint32_t>() != c.version)
            throw VersionError("checkpoint " + path.string() +
                               ": metadata/blob version mismatch");
        c.iteration = meta.at("iteration").get<int>();
        c.val_accuracy = std::stod(meta.at("val_accuracy").get<std::string>());
        c.seed = meta.at("seed").get<uint64_t>();
        c.config_hash = meta.at("config_hash").get<uint64_t>();
    } catch (const json::exception& e) {
        throw DataError("checkpoint metadata " + meta_path(path).string() +
                        ": malformed JSON: " + e.what());
    }
    if (c.val_accuracy < 0.0 || c.val_accuracy > 1.0)
        throw IntegrityError("checkpoint " + path.string() + ": val_accuracy outside [0,1]");
    return c;
}

}  // namespace rotadapt
