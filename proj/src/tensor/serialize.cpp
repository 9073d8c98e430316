#include "tensor/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace sephr {

namespace {

constexpr std::uint32_t kMaxRank = 8;

}  // namespace

void BinaryWriter::bytes(const void* data, std::size_t n) {
    os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void BinaryWriter::u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
}

void BinaryReader::bytes(void* data, std::size_t n, const char* what) {
    is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    SEPHR_CHECK(static_cast<std::size_t>(is_.gcount()) == n, kind_, "truncated input while reading ", what);
}

std::uint32_t BinaryReader::u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t BinaryReader::u64(const char* what) {
    unsigned char b[8];
    bytes(b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double BinaryReader::f64(const char* what) { return std::bit_cast<double>(u64(what)); }

std::string BinaryReader::str(const char* what, std::size_t max_len) {
    const auto n = u32(what);
    SEPHR_CHECK(n <= max_len, kind_, "string length ", n, " too large while reading ", what);
    std::string s(n, '\0');
    if (n) bytes(s.data(), n, what);
    return s;
}

namespace {

Shape read_extents(BinaryReader& r, const char* what) {
    const auto rank = r.u32(what);
    SEPHR_CHECK(rank >= 1 && rank <= kMaxRank, r.kind(), "invalid rank ", rank, " in ", what);
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
        const auto e = r.u64(what);
        SEPHR_CHECK(e >= 1 && e <= (1ull << 32), r.kind(), "invalid extent ", e, " in ", what);
        total *= e;
        SEPHR_CHECK(total <= (1ull << 34), r.kind(), "record too large in ", what);
        d = static_cast<std::size_t>(e);
    }
    return shape;
}

}  // namespace

void write_tensor_record(BinaryWriter& w, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    for (double v : t.values()) w.f64(v);
}

Tensor read_tensor_record(BinaryReader& r) {
    Shape shape = read_extents(r, "tensor record");
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = r.f64("tensor record values");
    return Tensor::from(std::move(shape), std::move(values));
}

void write_label_record(BinaryWriter& w, const LabelMap& labels) {
    w.u32(2);
    w.u64(labels.height);
    w.u64(labels.width);
    for (auto v : labels.values) w.i32(v);
}

LabelMap read_label_record(BinaryReader& r) {
    Shape shape = read_extents(r, "label record");
    SEPHR_CHECK(shape.size() == 2, r.kind(), "label record must be rank 2, got ", shape_str(shape));
    LabelMap labels{shape[0], shape[1], std::vector<std::int32_t>(shape[0] * shape[1])};
    for (auto& v : labels.values) v = r.i32("label record values");
    return labels;
}

const Tensor* TensorArchive::find(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return &t;
    return nullptr;
}

void save_archive(const std::string& path, const TensorArchive& archive) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    SEPHR_CHECK(os.good(), ErrorKind::io, "cannot open '", path, "' for writing");
    BinaryWriter w(os);
    w.bytes(kArchiveMagic.data(), kArchiveMagic.size());
    w.u32(kArchiveVersion);
    w.str(archive.metadata);
    w.u32(static_cast<std::uint32_t>(archive.entries.size()));
    for (const auto& [name, t] : archive.entries) {
        w.str(name);
        write_tensor_record(w, t);
    }
    os.flush();
    SEPHR_CHECK(os.good(), ErrorKind::io, "failed writing '", path, "'");
}

TensorArchive load_archive(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    SEPHR_CHECK(is.good(), ErrorKind::io, "cannot open checkpoint '", path, "'");
    BinaryReader r(is, ErrorKind::checkpoint_format);
    std::array<char, 4> magic{};
    r.bytes(magic.data(), magic.size(), "checkpoint magic");
    SEPHR_CHECK(magic == kArchiveMagic, ErrorKind::checkpoint_format, "'", path, "' is not a checkpoint archive");
    const auto version = r.u32("checkpoint version");
    SEPHR_CHECK(version == kArchiveVersion, ErrorKind::checkpoint_format, "checkpoint '", path, "' has format version ",
                version, ", this build reads version ", kArchiveVersion);
    TensorArchive archive;
    archive.metadata = r.str("checkpoint metadata");
    const auto count = r.u32("checkpoint entry count");
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name = r.str("checkpoint entry name", 4096);
        archive.entries.emplace_back(std::move(name), read_tensor_record(r));
    }
    return archive;
}

}  // namespace sephr
