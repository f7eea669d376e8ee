#pragma once

// Little-endian binary stream helpers shared by the SSID, SSCK and IOCK formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "ssenc/error.hpp"

namespace ssenc::binio {

template <class T>
T byteswap_if_big(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

    template <class T>
    void put(T v) {
        v = byteswap_if_big(v);
        os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    template <class T>
    void put_array(std::span<const T> values) {
        if constexpr (std::endian::native == std::endian::little) {
            os_.write(reinterpret_cast<const char*>(values.data()),
                      static_cast<std::streamsize>(values.size_bytes()));
        } else {
            for (T v : values) put(v);
        }
    }

    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void check(const std::string& what) const {
        if (!os_) throw Error("write failed: " + what);
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

    void expect_magic(std::string_view m) {
        std::string got(m.size(), '\0');
        is_.read(got.data(), static_cast<std::streamsize>(m.size()));
        if (!is_ || got != m) throw FormatError(what_ + ": bad magic, expected \"" + std::string(m) + "\"");
    }

    template <class T>
    T get() {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is_) throw FormatError(what_ + ": truncated file");
        return byteswap_if_big(v);
    }

    template <class T>
    void get_array(std::span<T> out) {
        if constexpr (std::endian::native == std::endian::little) {
            is_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
            if (!is_) throw FormatError(what_ + ": truncated file");
        } else {
            for (T& v : out) v = get<T>();
        }
    }

    std::string get_string(std::size_t max_len = 1 << 16) {
        const auto n = get<std::uint32_t>();
        if (n > max_len) throw FormatError(what_ + ": implausible string length");
        std::string s(n, '\0');
        is_.read(s.data(), n);
        if (!is_) throw FormatError(what_ + ": truncated file");
        return s;
    }

    const std::string& what() const { return what_; }

private:
    std::istream& is_;
    std::string what_;
};

} // namespace ssenc::binio
