#include "ssenc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ssenc/error.hpp"

namespace ssenc {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) out.push_back(trim(item));
    return out;
}

template <class N>
bool parse_number(const std::string& s, N& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if constexpr (std::is_floating_point_v<N>) {
        if (*first == '+') ++first;
    }
    const auto [p, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
    return false;
}

const ConfigKey& find_key(const std::string& name) {
    const auto& ks = RunConfig::keys();
    const auto it = std::find_if(ks.begin(), ks.end(), [&](const ConfigKey& k) { return k.name == name; });
    if (it == ks.end()) throw ConfigError("unknown config key '" + name + "'");
    return *it;
}

void check_value(const ConfigKey& key, const std::string& v) {
    auto bad = [&](const std::string& what) {
        throw ConfigError("config key '" + key.name + "': expected " + what + ", got '" + v + "'");
    };
    switch (key.kind) {
        case ValueKind::Int: {
            long x;
            if (!parse_number(v, x)) bad("an integer");
            break;
        }
        case ValueKind::UInt: {
            std::uint64_t x;
            if (!parse_number(v, x)) bad("a non-negative integer");
            break;
        }
        case ValueKind::Real: {
            double x;
            if (!parse_number(v, x)) bad("a number");
            break;
        }
        case ValueKind::Bool: {
            bool x;
            if (!parse_bool(v, x)) bad("true or false");
            break;
        }
        case ValueKind::String:
            break;
        case ValueKind::IntList:
            for (const auto& s : split_list(v)) {
                int x;
                if (!parse_number(s, x)) bad("a comma-separated list of integers");
            }
            break;
        case ValueKind::RealList:
            for (const auto& s : split_list(v)) {
                double x;
                if (!parse_number(s, x)) bad("a comma-separated list of numbers");
            }
            break;
        case ValueKind::Choice:
            if (std::find(key.choices.begin(), key.choices.end(), v) == key.choices.end()) {
                std::string all;
                for (const auto& c : key.choices) all += (all.empty() ? "" : "|") + c;
                bad(all);
            }
            break;
    }
}

} // namespace

const std::vector<ConfigKey>& RunConfig::keys() {
    using K = ValueKind;
    static const std::vector<ConfigKey> table = {
        {"out_dir", K::String, "run", "output directory; relative paths below resolve against it", {}},
        {"train_file", K::String, "train.ssid", "training dataset", {}},
        {"val_file", K::String, "val.ssid", "validation dataset", {}},
        {"test_file", K::String, "test.ssid", "noiseless test dataset", {}},
        {"checkpoint", K::String, "model.ckpt", "checkpoint written on every new best validation NRMS", {}},
        {"train_log", K::String, "train_log.csv", "per-epoch training log", {}},

        {"n_train", K::UInt, "30000", "training samples", {}},
        {"n_val", K::UInt, "5000", "validation samples", {}},
        {"n_test", K::UInt, "5000", "test samples", {}},
        {"noise_ratio", K::Real, "0", "noise std relative to sigma_y (training and validation only)", {}},
        {"train_seed", K::UInt, "1", "seed of the training experiment", {}},
        {"val_seed", K::UInt, "2", "seed of the validation experiment", {}},
        {"test_seed", K::UInt, "3", "seed of the test experiment", {}},

        {"beta", K::Real, "0.005", "wall repulsion", {}},
        {"gamma", K::Real, "0.79", "friction", {}},
        {"k_force", K::Real, "0.25", "input gain", {}},
        {"radius", K::Real, "0.25", "rendered ball radius", {}},
        {"dt", K::Real, "0.3", "sample time", {}},
        {"n_X", K::Int, "25", "frame width", {}},
        {"n_Y", K::Int, "25", "frame height", {}},
        {"grid", K::Choice, "inclusive", "pixel sample positions", {"inclusive", "cell_centers"}},
        {"sigma_y", K::Real, "0.204", "reference output std for noise and NRMS", {}},

        {"method", K::Choice, "proposed", "model to train", {"proposed", "baseline"}},
        {"precision", K::Choice, "f32", "parameter precision", {"f32", "f64"}},
        {"n_x", K::Int, "6", "state dimension", {}},
        {"n_a", K::Int, "5", "past outputs seen by the encoder", {}},
        {"n_b", K::Int, "5", "past inputs seen by the encoder", {}},
        {"T", K::Int, "50", "section length", {}},
        {"k0", K::Int, "0", "first penalized step of a section", {}},
        {"hidden", K::IntList, "64,64", "hidden layer widths of every network", {}},
        {"init", K::Choice, "root_fan_in", "weight init bound", {"root_fan_in", "fan_in"}},
        {"norm", K::Choice, "scalar", "output normalization", {"scalar", "per_pixel"}},
        {"baseline_n_z", K::Int, "6", "baseline latent dimension", {}},
        {"baseline_n", K::Int, "5", "baseline NARX order", {}},
        {"baseline_w_recon", K::Real, "1", "baseline reconstruction weight", {}},
        {"baseline_w_pred", K::Real, "1", "baseline prediction weight", {}},
        {"baseline_schedule", K::Choice, "joint", "baseline training schedule", {"joint", "sequential"}},

        {"batch_size", K::Int, "256", "sections per batch", {}},
        {"lr", K::Real, "0.001", "Adam step size", {}},
        {"max_epochs", K::Int, "100", "epoch budget", {}},
        {"seed", K::UInt, "0", "initialization and batch-order seed", {}},
        {"strict", K::Bool, "false", "abort on divergence instead of skipping the batch", {}},
        {"verbose", K::Bool, "true", "print one line per epoch", {}},

        {"n_max", K::Int, "50", "largest horizon of the n-step NRMS", {}},
        {"strip_times", K::IntList, "100,110,120,130,140,150,160,170", "test frames shown in strips", {}},
        {"strip_scale", K::Int, "8", "pixel magnification of strips", {}},
        {"spike_factor", K::Real, "5", "per-frame RMS spike threshold relative to the median", {}},
        {"noise_levels", K::RealList, "0,0.05,0.2,0.5,1", "noise ratios of the table1 grid", {}},
    };
    return table;
}

RunConfig::RunConfig() {
    for (const auto& k : keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::parse(std::istream& is, const std::string& source) {
    RunConfig cfg;
    std::map<std::string, int> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (seen.count(key)) throw ConfigError(where + "duplicate key '" + key + "' (first on line " +
                                               std::to_string(seen[key]) + ")");
        seen[key] = lineno;
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    return parse(is, path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
    check_value(find_key(key), value);
    values_[key] = value;
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
    find_key(key);
    return values_.at(key);
}

long RunConfig::get_int(const std::string& key) const {
    long x = 0;
    parse_number(get(key), x);
    return x;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
    std::uint64_t x = 0;
    parse_number(get(key), x);
    return x;
}

double RunConfig::get_real(const std::string& key) const {
    double x = 0;
    parse_number(get(key), x);
    return x;
}

bool RunConfig::get_bool(const std::string& key) const {
    bool x = false;
    parse_bool(get(key), x);
    return x;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : split_list(get(key))) {
        int x = 0;
        parse_number(s, x);
        out.push_back(x);
    }
    return out;
}

std::vector<double> RunConfig::get_real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : split_list(get(key))) {
        double x = 0;
        parse_number(s, x);
        out.push_back(x);
    }
    return out;
}

std::string RunConfig::dump() const {
    std::ostringstream os;
    for (const auto& k : keys()) os << k.name << " = " << values_.at(k.name) << "\n";
    return os.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << dump();
    if (!os) throw Error("write failed: " + path.string());
}

std::filesystem::path RunConfig::out_dir() const { return get("out_dir"); }

std::filesystem::path RunConfig::path(const std::string& key) const {
    const std::filesystem::path p = get(key);
    return p.is_absolute() ? p : out_dir() / p;
}

sim::BallParams RunConfig::ball() const {
    sim::BallParams p;
    p.beta = get_real("beta");
    p.gamma = get_real("gamma");
    p.k_force = get_real("k_force");
    p.radius = get_real("radius");
    p.dt = get_real("dt");
    p.validate();
    return p;
}

sim::CameraParams RunConfig::camera() const {
    sim::CameraParams c;
    c.n_X = static_cast<int>(get_int("n_X"));
    c.n_Y = static_cast<int>(get_int("n_Y"));
    if (c.n_X < 2 || c.n_Y < 2) throw ConfigError("n_X and n_Y must be at least 2");
    c.grid = get("grid") == "inclusive" ? sim::GridConvention::Inclusive : sim::GridConvention::CellCenters;
    c.sigma_ref = get_real("sigma_y");
    if (!(c.sigma_ref > 0.0)) throw ConfigError("sigma_y must be positive");
    return c;
}

NormMode RunConfig::norm_mode() const { return get("norm") == "scalar" ? NormMode::Scalar : NormMode::PerPixel; }

SsEncoderHyper RunConfig::hyper() const {
    SsEncoderHyper h;
    h.n_x = static_cast<int>(get_int("n_x"));
    h.n_a = static_cast<int>(get_int("n_a"));
    h.n_b = static_cast<int>(get_int("n_b"));
    h.T = static_cast<int>(get_int("T"));
    h.k0 = static_cast<int>(get_int("k0"));
    h.n_u = 2;
    h.n_y = camera().n_pixels();
    h.hidden = get_int_list("hidden");
    h.init = get("init") == "root_fan_in" ? nn::InitScheme::RootFanIn : nn::InitScheme::FanIn;
    h.validate();
    return h;
}

IoAutoencoderHyper RunConfig::baseline_hyper() const {
    IoAutoencoderHyper h;
    h.n_z = static_cast<int>(get_int("baseline_n_z"));
    h.n = static_cast<int>(get_int("baseline_n"));
    h.n_u = 2;
    h.n_y = camera().n_pixels();
    h.hidden = get_int_list("hidden");
    h.init = get("init") == "root_fan_in" ? nn::InitScheme::RootFanIn : nn::InitScheme::FanIn;
    h.validate();
    return h;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.batch_size = static_cast<int>(get_int("batch_size"));
    t.learning_rate = get_real("lr");
    t.max_epochs = static_cast<int>(get_int("max_epochs"));
    t.seed = get_uint("seed");
    t.noise_ratio = get_real("noise_ratio");
    t.method = get("method") == "proposed" ? Method::Proposed : Method::Baseline;
    t.precision = get("precision") == "f32" ? Precision::F32 : Precision::F64;
    t.sigma_y = get_real("sigma_y");
    t.strict = get_bool("strict");
    t.verbose = get_bool("verbose");
    t.checkpoint_path = path("checkpoint");
    t.log_path = path("train_log");
    t.baseline_weights = {get_real("baseline_w_recon"), get_real("baseline_w_pred")};
    t.baseline_schedule = get("baseline_schedule") == "joint" ? BaselineSchedule::Joint : BaselineSchedule::Sequential;
    t.validate();
    return t;
}

} // namespace ssenc
