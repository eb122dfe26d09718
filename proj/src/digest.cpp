#include "emobi/digest.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstdio>

namespace emobi {

std::string sha256_hex(const std::string& data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest.data());
    std::string hex(2 * SHA256_DIGEST_LENGTH, '0');
    static const char* alphabet = "0123456789abcdef";
    for (std::size_t i = 0; i < digest.size(); ++i) {
        hex[2 * i] = alphabet[digest[i] >> 4];
        hex[2 * i + 1] = alphabet[digest[i] & 0x0f];
    }
    return hex;
}

}  // namespace emobi
