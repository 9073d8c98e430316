#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tensor/tensor.hpp"

namespace sephr {

// Little-endian primitive writer/reader. Reads that run past the end raise
// ErrorKind `format_kind` so dataset and checkpoint loaders report their own
// error class.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}

    void bytes(const void* data, std::size_t n);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v);
    void str(const std::string& s);

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& is, ErrorKind format_kind) : is_(is), kind_(format_kind) {}

    void bytes(void* data, std::size_t n, const char* what);
    std::uint32_t u32(const char* what);
    std::uint64_t u64(const char* what);
    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
    double f64(const char* what);
    std::string str(const char* what, std::size_t max_len = 1u << 20);

    ErrorKind kind() const { return kind_; }

private:
    std::istream& is_;
    ErrorKind kind_;
};

// Tensor record: u32 rank, rank x u64 extents, then f64 values row-major.
void write_tensor_record(BinaryWriter& w, const Tensor& t);
Tensor read_tensor_record(BinaryReader& r);

// Label record: same header as a tensor record, then i32 values.
struct LabelMap {
    std::size_t height = 0, width = 0;
    std::vector<std::int32_t> values;
};

void write_label_record(BinaryWriter& w, const LabelMap& labels);
LabelMap read_label_record(BinaryReader& r);

// Named-tensor archive: "SPCK", u32 version, str metadata, u32 count, then
// count x (str name, tensor record).
inline constexpr std::array<char, 4> kArchiveMagic{'S', 'P', 'C', 'K'};
inline constexpr std::uint32_t kArchiveVersion = 1;

struct TensorArchive {
    std::string metadata;
    std::vector<std::pair<std::string, Tensor>> entries;

    const Tensor* find(const std::string& name) const;
};

void save_archive(const std::string& path, const TensorArchive& archive);
TensorArchive load_archive(const std::string& path);

}  // namespace sephr
