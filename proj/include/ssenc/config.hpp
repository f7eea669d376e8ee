#pragma once

// Flat key=value run configuration shared by every CLI command.
//
//   # comment
//   key = value
//
// Unknown keys and malformed values are rejected; absent keys take their
// documented defaults. `RunConfig::keys()` lists every key.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ssenc/baseline.hpp"
#include "ssenc/dataset.hpp"
#include "ssenc/model.hpp"
#include "ssenc/simulator.hpp"
#include "ssenc/trainer.hpp"

namespace ssenc {

enum class ValueKind : std::uint8_t { Int, UInt, Real, Bool, String, IntList, RealList, Choice };

struct ConfigKey {
    std::string name;
    ValueKind kind;
    std::string default_value;
    std::string doc;
    std::vector<std::string> choices;  // for ValueKind::Choice
};

class RunConfig {
public:
    RunConfig();

    static const std::vector<ConfigKey>& keys();

    /// Defaults overlaid with the entries of `is`. `source` names the input in errors.
    static RunConfig parse(std::istream& is, const std::string& source = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    /// "key=value"
    void apply_override(const std::string& assignment);

    const std::string& get(const std::string& key) const;
    long get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<double> get_real_list(const std::string& key) const;

    /// Every key in table order, one "key = value" line each.
    std::string dump() const;
    void save(const std::filesystem::path& path) const;

    std::filesystem::path out_dir() const;
    /// Path-valued key resolved against out_dir when relative.
    std::filesystem::path path(const std::string& key) const;

    sim::BallParams ball() const;
    sim::CameraParams camera() const;
    NormMode norm_mode() const;
    SsEncoderHyper hyper() const;
    IoAutoencoderHyper baseline_hyper() const;
    TrainConfig train_config() const;

    bool operator==(const RunConfig&) const = default;

private:
    std::map<std::string, std::string> values_;
};

} // namespace ssenc
