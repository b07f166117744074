#include "igtrack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "igtrack/errors.hpp"

namespace igtrack {

namespace {

constexpr char kMagic[4] = {'I', 'G', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string text(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw IoError("checkpoint truncated");
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_params(const ParamStore& params) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

ParamStore deserialize_params(const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    if (in.text(4) != std::string(kMagic, 4)) throw IoError("not an IGT1 checkpoint");
    const std::uint32_t count = in.u32();
    ParamStore params;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = in.text(in.u32());
        const std::uint32_t ndim = in.u32();
        std::vector<std::size_t> dims(ndim);
        for (auto& d : dims) d = in.u32();
        std::vector<float> data(Tensor::element_count(dims));
        for (float& v : data) v = std::bit_cast<float>(in.u32());
        params.add(std::move(name), Tensor(std::move(dims), std::move(data)));
    }
    if (!in.done()) throw IoError("trailing bytes after checkpoint records");
    return params;
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = serialize_params(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_params(bytes);
}

}  // namespace igtrack
