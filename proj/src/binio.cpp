#include "wsireport/binio.hpp"
#include "wsireport/errors.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

namespace wsireport {

void ByteWriter::put_u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v & 0xff));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::put_u32(uint32_t v) {
    for (int i = 0; i < 4; ++i)
        buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::put_u64(uint64_t v) {
    for (int i = 0; i < 8; ++i)
        buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::put_f32(float v) {
    static_assert(sizeof(float) == 4);
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(bits);
}

void ByteWriter::put_bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
}

void ByteWriter::finish_with_crc() {
    put_u32(crc32_of(buf_.data(), buf_.size()));
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

ByteReader::ByteReader(std::vector<uint8_t> data, std::string origin)
    : data_(std::move(data)), end_(data_.size()), origin_(std::move(origin)) {}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + path.string());
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    return ByteReader(std::move(data), path.string());
}

void ByteReader::need(size_t n) {
    if (end_ - pos_ < n)
        throw ValidationError("truncated file: " + origin_);
}

uint8_t ByteReader::get_u8() {
    need(1);
    return data_[pos_++];
}

uint16_t ByteReader::get_u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

uint32_t ByteReader::get_u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

uint64_t ByteReader::get_u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

float ByteReader::get_f32() {
    uint32_t bits = get_u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::vector<uint8_t> ByteReader::get_bytes(size_t n) {
    need(n);
    std::vector<uint8_t> out(data_.begin() + static_cast<ptrdiff_t>(pos_),
                             data_.begin() + static_cast<ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
}

void ByteReader::expect_magic(const char tag[4], const std::string& what) {
    if (end_ - pos_ < 4)
        throw ValidationError("truncated file: " + origin_);
    if (std::memcmp(data_.data() + pos_, tag, 4) != 0)
        throw ValidationError("bad magic for " + what + ": " + origin_);
    pos_ += 4;
}

void ByteReader::reserve_trailing_crc() {
    if (data_.size() < 4)
        throw ValidationError("truncated file: " + origin_);
    end_ = data_.size() - 4;
}

void ByteReader::verify_crc(const std::string& what) {
    size_t payload = end_;
    uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<uint32_t>(data_[payload + i]) << (8 * i);
    if (crc32_of(data_.data(), payload) != stored)
        throw ValidationError("checksum mismatch for " + what + ": " + origin_);
}

uint32_t crc32_of(const uint8_t* p, size_t n) {
    return static_cast<uint32_t>(::crc32(0L, p, static_cast<uInt>(n)));
}

} // namespace wsireport
