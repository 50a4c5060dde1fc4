#include "afrda/checkpoint.hpp"

#include "afrda/image_io.hpp"

#include <bit>
#include <limits>

namespace afrda {

namespace {

constexpr char kMagic[4] = {'A', 'F', 'R', 'D'};

template <typename U>
void put(std::string& out, U v)
{
    for (std::size_t i = 0; i < sizeof(U); ++i)
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename U>
    U get(const std::string& field)
    {
        need(sizeof(U), field);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return static_cast<U>(v);
    }

    std::string take(std::size_t n, const std::string& field)
    {
        need(n, field);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const std::string& field) const
    {
        if (bytes_.size() - pos_ < n)
            throw CorruptCheckpoint(field, "file truncated");
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

CorruptCheckpoint::CorruptCheckpoint(std::string field, const std::string& detail)
    : std::runtime_error("corrupt checkpoint (" + field + "): " + detail), field_(std::move(field))
{
}

const Tensor* CheckpointData::find(const std::string& name) const
{
    for (const auto& t : tensors)
        if (t.name == name)
            return &t.value;
    return nullptr;
}

std::string encode_checkpoint(const CheckpointData& data)
{
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
    for (const auto& [name, value] : data.tensors) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max())
            throw DomainError("tensor name too long: " + name.substr(0, 32));
        if (value.rank() == 0)
            throw DomainError("cannot store an empty tensor: " + name);
        if (value.rank() > std::numeric_limits<std::uint8_t>::max())
            throw DomainError("tensor rank too large: " + name);
        put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        put<std::uint8_t>(out, static_cast<std::uint8_t>(value.rank()));
        for (std::size_t d : value.shape())
            put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (double v : value.data())
            put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    put<std::uint64_t>(out, data.iteration);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(data.rng_state.size()));
    out += data.rng_state;
    return out;
}

CheckpointData decode_checkpoint(const std::string& bytes)
{
    Reader in(bytes);
    if (in.take(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
        throw CorruptCheckpoint("magic", "expected AFRD");
    const auto version = in.get<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw CorruptCheckpoint("version", "unsupported version " + std::to_string(version));
    const auto count = in.get<std::uint32_t>("count");

    CheckpointData data;
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::string where = "tensor " + std::to_string(k);
        const auto name_len = in.get<std::uint16_t>(where + " name length");
        std::string name = in.take(name_len, where + " name");
        const auto rank = in.get<std::uint8_t>(name + " rank");
        Shape shape(rank);
        std::size_t n = 1;
        const std::size_t budget = in.remaining() / sizeof(double);
        for (auto& d : shape) {
            d = in.get<std::uint32_t>(name + " dims");
            if (d == 0)
                throw CorruptCheckpoint(name + " dims", "zero extent");
            if (n > budget / d)
                throw CorruptCheckpoint(name + " payload", "file truncated");
            n *= d;
        }
        if (rank == 0)
            throw CorruptCheckpoint(name + " rank", "rank zero");
        if (n > in.remaining() / sizeof(double))
            throw CorruptCheckpoint(name + " payload", "file truncated");
        std::vector<double> payload(n);
        for (double& v : payload)
            v = std::bit_cast<double>(in.get<std::uint64_t>(name + " payload"));
        data.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(payload))});
    }
    data.iteration = in.get<std::uint64_t>("iteration");
    const auto rng_len = in.get<std::uint32_t>("rng length");
    data.rng_state = in.take(rng_len, "rng state");
    if (!in.at_end())
        throw CorruptCheckpoint("trailer", "unexpected bytes after rng state");
    return data;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data)
{
    write_file_atomic(path, encode_checkpoint(data));
}

CheckpointData read_checkpoint(const std::filesystem::path& path)
{
    return decode_checkpoint(read_file(path));
}

}  // namespace afrda
