#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ecalab {

// Packed bit vector: bit i lives in word i/64 at position i%64 (LSB-first).
// Bits above size() in the last word are kept zero; that invariant makes
// word-level equality, hashing, and the packed simulation kernels valid.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(uint32_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

    uint32_t size() const { return nbits_; }
    bool empty() const { return nbits_ == 0; }

    bool get(uint32_t i) const {
        assert(i < nbits_);
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }
    void set(uint32_t i, bool v) {
        assert(i < nbits_);
        const uint64_t m = uint64_t{1} << (i & 63);
        if (v)
            words_[i >> 6] |= m;
        else
            words_[i >> 6] &= ~m;
    }

    size_t word_count() const { return words_.size(); }
    uint64_t word(size_t j) const { return words_[j]; }
    void set_word(size_t j, uint64_t w) {
        words_[j] = w;
        if (j + 1 == words_.size()) clear_padding();
    }

    uint32_t count() const {
        uint32_t c = 0;
        for (uint64_t w : words_) c += static_cast<uint32_t>(__builtin_popcountll(w));
        return c;
    }

    // Result bit i = source bit (i + shift) mod size; shift may be negative.
    BitVec rotated(int64_t shift) const {
        if (nbits_ == 0) return *this;
        const int64_t n = nbits_;
        uint32_t s = static_cast<uint32_t>(((shift % n) + n) % n);
        if (s == 0) return *this;
        BitVec out(nbits_);
        if (nbits_ <= 64) {
            const uint64_t w = words_[0];
            out.words_[0] = (w >> s) | (w << (nbits_ - s));
            out.clear_padding();
            return out;
        }
        for (uint32_t i = 0; i < nbits_; ++i) {
            uint32_t src = i + s;
            if (src >= nbits_) src -= nbits_;
            out.set(i, get(src));
        }
        return out;
    }

    bool operator==(const BitVec& o) const = default;

    std::string to_string() const {
        std::string s(nbits_, '0');
        for (uint32_t i = 0; i < nbits_; ++i)
            if (get(i)) s[i] = '1';
        return s;
    }

    static BitVec from_string(std::string_view s) {
        BitVec v(static_cast<uint32_t>(s.size()));
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1')
                v.set(static_cast<uint32_t>(i), true);
            else if (s[i] != '0')
                throw std::invalid_argument("BitVec::from_string: expected '0'/'1', got '" +
                                            std::string(1, s[i]) + "'");
        }
        return v;
    }

    // Serialized byte i holds bits 8i..8i+7, LSB-first. Little-endian on disk.
    void to_bytes(uint8_t* out, size_t nbytes) const {
        assert(nbytes >= (nbits_ + 7) / 8);
        for (size_t b = 0; b < nbytes; ++b) out[b] = 0;
        for (size_t j = 0; j < words_.size(); ++j) {
            uint64_t w = words_[j];
            for (int b = 0; b < 8 && j * 8 + b < nbytes; ++b)
                out[j * 8 + b] = static_cast<uint8_t>(w >> (8 * b));
        }
    }

    static BitVec from_bytes(const uint8_t* in, uint32_t nbits) {
        BitVec v(nbits);
        const size_t nbytes = (nbits + 7) / 8;
        for (size_t b = 0; b < nbytes; ++b)
            v.words_[b >> 3] |= uint64_t{in[b]} << (8 * (b & 7));
        v.clear_padding();
        return v;
    }

private:
    void clear_padding() {
        const uint32_t tail = nbits_ & 63;
        if (tail != 0 && !words_.empty()) words_.back() &= (uint64_t{1} << tail) - 1;
    }

    uint32_t nbits_ = 0;
    std::vector<uint64_t> words_;
};

}  // namespace ecalab
