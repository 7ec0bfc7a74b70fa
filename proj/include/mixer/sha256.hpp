// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace mixer {

/// Minimal SHA-256 (FIPS 180-4). Plenty for content digests in run manifests;
/// avoids dragging in a TLS library for one hash function.
class Sha256 {
public:
    Sha256();
    void update(const void* data, std::size_t size);
    /// Finalizes and returns the lowercase hex digest. The object must not be
    /// updated afterwards.
    std::string hex_digest();

    static std::string of(const void* data, std::size_t size);
    static std::string of(const std::string& text);

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint8_t buffer_[64];
    std::uint64_t total_bytes_ = 0;
    std::size_t buffer_len_ = 0;
};

}  // namespace mixer
