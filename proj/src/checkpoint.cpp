#include "mygo/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "mygo/binary_io.hpp"
#include "mygo/errors.hpp"

namespace mygo {

namespace {

constexpr char kMagic[] = "MYGO";
constexpr std::uint32_t kVersion = 1;

void write_tensors(ByteWriter& out, const std::vector<NamedTensor>& tensors) {
    out.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        out.u16(static_cast<std::uint16_t>(t.name.size()));
        out.raw(t.name);
        out.u8(static_cast<std::uint8_t>(t.shape.size()));
        for (std::size_t d : t.shape) out.u64(d);
        for (float v : t.values) out.f32(v);
    }
}

std::vector<NamedTensor> read_tensors(ByteReader& in) {
    const std::uint32_t count = in.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = in.raw(in.u16());
        const std::uint8_t rank = in.u8();
        if (rank == 0 || rank > 3) throw DataError(in.what() + ": bad tensor rank for " + t.name);
        std::uint64_t elements = 1;
        for (std::uint8_t r = 0; r < rank; ++r) {
            t.shape.push_back(in.u64());
            elements *= t.shape.back();
        }
        if (elements * 4 > in.remaining()) throw DataError(in.what() + ": truncated payload in " + t.name);
        t.values.resize(elements);
        for (float& v : t.values) v = in.f32();
        tensors.push_back(std::move(t));
    }
    return tensors;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
    ByteWriter out;
    out.raw(kMagic);
    out.u32(kVersion);
    write_tensors(out, checkpoint.params);
    write_tensors(out, checkpoint.optimizer);
    out.u64(checkpoint.step);
    out.u64(checkpoint.epoch);
    out.u32(static_cast<std::uint32_t>(checkpoint.rng_state.size()));
    for (std::uint8_t b : checkpoint.rng_state) out.u8(b);
    out.u32(static_cast<std::uint32_t>(checkpoint.config_echo.size()));
    out.raw(checkpoint.config_echo);
    return out.bytes();
}

Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& what) {
    ByteReader in(std::move(bytes), what);
    if (in.remaining() < 4 || in.raw(4) != kMagic) throw DataError(what + ": not a checkpoint (bad magic)");
    if (const auto version = in.u32(); version != kVersion)
        throw DataError(what + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.params = read_tensors(in);
    c.optimizer = read_tensors(in);
    c.step = in.u64();
    c.epoch = in.u64();
    const std::string rng = in.raw(in.u32());
    c.rng_state.assign(rng.begin(), rng.end());
    c.config_echo = in.raw(in.u32());
    if (in.remaining() != 0) throw DataError(what + ": trailing bytes");
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(checkpoint);
    // Write to a sibling temp file first so a crash never leaves a torn checkpoint.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(std::move(bytes), path.string());
}

std::vector<NamedTensor> export_params(const ModelParams<float>& params) {
    std::vector<NamedTensor> out;
    params.visit([&](const std::string& name, const Tensor<float>& t) {
        out.push_back({name, t.shape(), {t.data().begin(), t.data().end()}});
    });
    return out;
}

void import_params(const std::vector<NamedTensor>& tensors, ModelParams<float>& params) {
    std::size_t i = 0;
    params.visit([&](const std::string& name, Tensor<float>& t) {
        if (i >= tensors.size()) throw DataError("checkpoint is missing tensor " + name);
        const NamedTensor& src = tensors[i++];
        if (src.name != name || src.shape != t.shape())
            throw DataError("checkpoint tensor " + src.name + " " + shape_string(src.shape) +
                            " does not match model tensor " + name + " " + shape_string(t.shape()));
        std::copy(src.values.begin(), src.values.end(), t.data().begin());
    });
    if (i != tensors.size()) throw DataError("checkpoint holds unexpected extra tensors");
}

}  // namespace mygo
