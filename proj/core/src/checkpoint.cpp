#include "gdk/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "gdk/error.hpp"

namespace gdk {
namespace {

constexpr std::array<char, 4> kMagic{'G', 'D', 'K', '1'};
constexpr std::uint32_t kMaxNameLength = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                    static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes.data(), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
    std::array<unsigned char, 4> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), 4)) return false;
    v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
        (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
    return true;
}

std::uint32_t require_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    if (!get_u32(in, v)) throw FormatError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors) {
    out.write(kMagic.data(), kMagic.size());
    for (const NamedTensor& t : tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put_u32(out, static_cast<std::uint32_t>(t.value.rank()));
        for (std::size_t d : t.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : t.value.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) throw Error("failed writing checkpoint");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic)
        throw FormatError("checkpoint has bad magic (expected GDK1)");
    std::vector<NamedTensor> tensors;
    std::uint32_t name_length = 0;
    while (get_u32(in, name_length)) {
        if (name_length == 0 || name_length > kMaxNameLength) throw FormatError("checkpoint name length invalid");
        std::string name(name_length, '\0');
        if (!in.read(name.data(), name_length)) throw FormatError("checkpoint truncated in tensor name");
        const std::uint32_t rank = require_u32(in, "rank");
        if (rank == 0 || rank > kMaxRank) throw FormatError("checkpoint tensor '" + name + "' has invalid rank");
        Shape shape(rank);
        for (auto& d : shape) {
            d = require_u32(in, "extent");
            if (d == 0) throw FormatError("checkpoint tensor '" + name + "' has a zero extent");
        }
        std::vector<float> values(shape_size(shape));
        for (float& v : values) v = std::bit_cast<float>(require_u32(in, "values"));
        tensors.push_back(NamedTensor{std::move(name), Tensor(std::move(shape), std::move(values))});
    }
    if (!in.eof()) throw FormatError("checkpoint read failed");
    if (in.gcount() != 0) throw FormatError("checkpoint has trailing partial record");
    return tensors;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
    write_checkpoint(out, tensors);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path.string());
    return read_checkpoint(in);
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
    for (const NamedTensor& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

}  // namespace gdk
