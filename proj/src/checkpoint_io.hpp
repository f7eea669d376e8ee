#pragma once

// Envelope shared by the SSCK and IOCK checkpoint formats:
//   magic(4) | u32 version | u32 scalar_bytes | <model hyper block> |
//   norm block | i64 epoch | f64 val_nrms | u32 n_nets | nets
// norm block: u8 mode | u32 n_u | f64 u_mean[n_u] | f64 u_std[n_u] |
//             u32 n_y | f64 y_mean[n_y] | f64 y_std[n_y]
// net:        string name | u32 n_tensors | (string name | u32 rows | u32 cols | scalar data)*
// Strings are u32 length + bytes; scalars are f32 or f64 per scalar_bytes.

#include <fstream>
#include <string>

#include "ssenc/binio.hpp"
#include "ssenc/dataset.hpp"
#include "ssenc/model.hpp"
#include "ssenc/nn.hpp"

namespace ssenc::detail {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_norm(binio::Writer& w, const NormStats& s) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.mode));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.u_mean.size()));
    w.put_array<double>(s.u_mean);
    w.put_array<double>(s.u_std);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.y_mean.size()));
    w.put_array<double>(s.y_mean);
    w.put_array<double>(s.y_std);
}

inline NormStats read_norm(binio::Reader& r) {
    NormStats s;
    const auto mode = r.get<std::uint8_t>();
    if (mode > 1) throw FormatError(r.what() + ": bad normalization mode");
    s.mode = static_cast<NormMode>(mode);
    const auto n_u = r.get<std::uint32_t>();
    if (n_u > 4096) throw FormatError(r.what() + ": implausible input width");
    s.u_mean.resize(n_u);
    s.u_std.resize(n_u);
    r.get_array<double>(s.u_mean);
    r.get_array<double>(s.u_std);
    const auto n_y = r.get<std::uint32_t>();
    if (n_y > (1u << 24)) throw FormatError(r.what() + ": implausible output width");
    s.y_mean.resize(n_y);
    s.y_std.resize(n_y);
    r.get_array<double>(s.y_mean);
    r.get_array<double>(s.y_std);
    return s;
}

inline void write_meta(binio::Writer& w, const CheckpointMeta& m) {
    w.put<std::int64_t>(m.epoch);
    w.put<double>(m.val_nrms);
}

inline CheckpointMeta read_meta(binio::Reader& r) {
    CheckpointMeta m;
    m.epoch = static_cast<long>(r.get<std::int64_t>());
    m.val_nrms = r.get<double>();
    return m;
}

inline void write_hidden(binio::Writer& w, const std::vector<int>& hidden, nn::InitScheme init) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(hidden.size()));
    for (int h : hidden) w.put<std::int32_t>(h);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(init));
}

inline void read_hidden(binio::Reader& r, std::vector<int>& hidden, nn::InitScheme& init) {
    const auto n = r.get<std::uint32_t>();
    if (n > 64) throw FormatError(r.what() + ": implausible hidden layer count");
    hidden.resize(n);
    for (auto& h : hidden) {
        h = r.get<std::int32_t>();
        if (h < 1 || h > (1 << 20)) throw FormatError(r.what() + ": bad hidden width");
    }
    const auto scheme = r.get<std::uint8_t>();
    if (scheme > 1) throw FormatError(r.what() + ": bad init scheme");
    init = static_cast<nn::InitScheme>(scheme);
}

template <class T>
void write_net(binio::Writer& w, const std::string& name, const nn::Mlp<T>& net) {
    w.put_string(name);
    const auto& p = net.params();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.layout.size()));
    for (std::size_t i = 0; i < p.layout.size(); ++i) {
        const auto& s = p.layout[i];
        w.put_string(s.name());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(s.rows));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(s.cols));
        w.put_array<T>(std::span<const T>(p.values.data() + s.offset, static_cast<std::size_t>(s.size())));
    }
}

// Reads into a network whose shape is already fixed by the hyperparameters.
template <class T>
void read_net(binio::Reader& r, const std::string& expected_name, nn::Mlp<T>& net, int file_scalar_bytes) {
    const std::string name = r.get_string();
    if (name != expected_name)
        throw FormatError(r.what() + ": expected network \"" + expected_name + "\", found \"" + name + "\"");
    auto& p = net.params();
    const auto n = r.get<std::uint32_t>();
    if (n != p.layout.size()) throw FormatError(r.what() + ": network " + name + " has the wrong tensor count");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = p.layout[i];
        const std::string tname = r.get_string();
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (tname != s.name() || rows != s.rows || cols != s.cols)
            throw FormatError(r.what() + ": tensor " + name + "." + tname + " shape does not match hyperparameters");
        T* dst = p.values.data() + s.offset;
        const auto count = static_cast<std::size_t>(s.size());
        if (file_scalar_bytes == static_cast<int>(sizeof(T))) {
            r.get_array<T>(std::span<T>(dst, count));
        } else if (file_scalar_bytes == 4) {
            std::vector<float> tmp(count);
            r.get_array<float>(tmp);
            for (std::size_t j = 0; j < count; ++j) dst[j] = static_cast<T>(tmp[j]);
        } else {
            std::vector<double> tmp(count);
            r.get_array<double>(tmp);
            for (std::size_t j = 0; j < count; ++j) dst[j] = static_cast<T>(tmp[j]);
        }
    }
}

// Opens a checkpoint, checks magic and version, returns scalar width.
inline int read_envelope(binio::Reader& r, std::string_view magic) {
    r.expect_magic(magic);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError(r.what() + ": unsupported checkpoint version " + std::to_string(version));
    const auto bytes = r.get<std::uint32_t>();
    if (bytes != 4 && bytes != 8) throw FormatError(r.what() + ": bad scalar width");
    return static_cast<int>(bytes);
}

template <class T>
void write_envelope(binio::Writer& w, std::string_view magic) {
    w.magic(magic);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(sizeof(T)));
}

inline void expect_end(std::istream& is, const std::string& what) {
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError(what + ": trailing bytes after checkpoint");
}

} // namespace ssenc::detail
