#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wsireport {

// Little-endian buffer writer used by all on-disk binary formats
// (feature store, embedding store, model checkpoint). Files are built
// in memory, CRC32-stamped over every preceding byte, then written in
// one shot.
class ByteWriter {
  public:
    void put_u8(uint8_t v) { buf_.push_back(v); }
    void put_u16(uint16_t v);
    void put_u32(uint32_t v);
    void put_u64(uint64_t v);
    void put_f32(float v);
    void put_bytes(const void* p, size_t n);
    void put_magic(const char tag[4]) { put_bytes(tag, 4); }

    /// Appends CRC32 (zlib polynomial) of everything written so far.
    void finish_with_crc();

    const std::vector<uint8_t>& bytes() const { return buf_; }
    void write_file(const std::filesystem::path& path) const;

  private:
    std::vector<uint8_t> buf_;
};

// Bounds-checked little-endian reader over a whole file slurped into
// memory. Throws ValidationError("truncated ...") on short reads.
class ByteReader {
  public:
    explicit ByteReader(std::vector<uint8_t> data, std::string origin);

    /// Slurps a file; missing/unreadable paths throw IoError.
    static ByteReader from_file(const std::filesystem::path& path);

    uint8_t get_u8();
    uint16_t get_u16();
    uint32_t get_u32();
    uint64_t get_u64();
    float get_f32();
    std::vector<uint8_t> get_bytes(size_t n);

    /// Checks the 4-byte magic; throws ValidationError naming `what` on mismatch.
    void expect_magic(const char tag[4], const std::string& what);

    /// Sets aside the trailing 4 CRC bytes so payload reads are bounds-checked
    /// against the payload only. Call before parsing; verify_crc() after.
    void reserve_trailing_crc();

    /// Compares the reserved trailing CRC32 against the payload bytes.
    void verify_crc(const std::string& what);

    size_t remaining() const { return end_ - pos_; }
    const std::string& origin() const { return origin_; }

  private:
    void need(size_t n);

    std::vector<uint8_t> data_;
    size_t pos_ = 0;
    size_t end_ = 0;
    std::string origin_;
};

uint32_t crc32_of(const uint8_t* p, size_t n);

} // namespace wsireport
