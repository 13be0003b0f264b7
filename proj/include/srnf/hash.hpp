#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace srnflab {

// Streaming SHA-256 (FIPS 180-4). Used to fingerprint artifact files in run manifests.
class Sha256 {
  public:
    Sha256();
    void update(const void* data, std::size_t len);
    std::string hex_digest(); // finalizes; object must not be reused afterwards

  private:
    void process_block(const std::uint8_t* block);
    std::uint32_t state_[8];
    std::uint64_t bit_len_ = 0;
    std::uint8_t buf_[64];
    std::size_t buf_len_ = 0;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

} // namespace srnflab
