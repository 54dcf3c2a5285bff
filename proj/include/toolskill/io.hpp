#pragma once

// JSON / JSON-Lines persistence for specs, datasets, normalisation stats and
// parameter files, plus SHA-256 content hashing.
//
// Dataset file (JSON-Lines):
//   {"kind":"dataset", "format":..., "trajectories":N, "provenance":{...}}
//   {"kind":"trajectory", "index":i, "label", "seed", "grasp_shift", "env", "tool", "frames":n}
//   {"kind":"frame", "traj":i, "t", "ee_x", "ee_z", "tip_x", "tactile_raw"[96],
//    "tactile_feature"[10], "proximity"[6], "u_x", "u_z", "f_x", "f_z"}   x n
//
// Parameter file (JSON): {"format", "version", "dims", "groups": {group:
// {tensor: {"rows","cols","data" (row-major)}}}, "stats_sha256", "meta"}.
// Doubles are written with round-trip precision, so load(save(p)) == p bit for bit.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "toolskill/common.hpp"
#include "toolskill/env_sim.hpp"
#include "toolskill/primitive.hpp"
#include "toolskill/sensing.hpp"
#include "toolskill/seq2seq.hpp"
#include "toolskill/trajectory.hpp"

namespace toolskill {

using json = nlohmann::json;

inline constexpr const char* kDatasetFormat = "toolskill.dataset";
inline constexpr const char* kParamsFormat = "toolskill.seq2seq";
inline constexpr const char* kStatsFormat = "toolskill.normalization";
inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Hashing and files

inline std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw std::runtime_error("sha256: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md.data(), &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("sha256: digest failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
    return out.str();
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << bytes;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Specs

inline json to_json(const EnvironmentSpec& e) {
    return {{"kind", to_string(e.kind)},          {"inclination", e.inclination},
            {"step_height", e.step_height},       {"step_x", e.step_x},
            {"stair_count", e.stair_count},       {"stair_rise", e.stair_rise},
            {"stair_run", e.stair_run},           {"deform_drop", e.deform_drop},
            {"extent_x", e.extent_x},             {"start_x", e.start_x},
            {"start_gap", e.start_gap},           {"memory_cell", e.memory_cell},
            {"wipe_length", e.wipe_length}};
}

inline json to_json(const ToolSpec& t) {
    return {{"name", t.name},
            {"handle_length", t.handle_length},
            {"tip_stiffness", t.tip_stiffness},
            {"tip_rest_length", t.tip_rest_length},
            {"tip_width", t.tip_width},
            {"friction_mu", t.friction_mu}};
}

inline json to_json(const PrimitiveParams& p) {
    return {{"v_ref", p.v_ref},
            {"v_up", p.v_up},
            {"v_down", p.v_down},
            {"force_threshold", p.force_threshold},
            {"target_force", p.target_force},
            {"k_adm", p.k_adm}};
}

inline json to_json(const SensorConfig& s) {
    return {{"grip_force", s.grip_force},
            {"tactile_noise", s.tactile_noise},
            {"taxel_pitch", s.taxel_pitch},
            {"ray_offsets", s.ray_offsets},
            {"proximity_max_range", s.proximity_max_range},
            {"proximity_noise", s.proximity_noise}};
}

inline json to_json(const SimConfig& s) {
    return {{"force_max", s.force_max}, {"grasp_shift_std", s.grasp_shift_std}};
}

inline json to_json(const Seq2SeqDims& d) {
    return {{"past_steps", d.past_steps}, {"future_steps", d.future_steps}, {"hidden", d.hidden},
            {"obs", d.obs},               {"act", d.act}};
}

namespace detail {

/// Reads the keys present in `j` into the matching fields; unknown keys are
/// rejected so typos in configs surface as errors.
class FieldReader {
public:
    FieldReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
    }

    template <class T>
    FieldReader& opt(const char* key, T& out) {
        seen_.emplace_back(key);
        if (auto it = j_.find(key); it != j_.end()) {
            try {
                out = it->template get<T>();
            } catch (const json::exception& e) {
                throw ConfigError(where_ + "." + key + ": " + e.what());
            }
        }
        return *this;
    }

    template <class T>
    FieldReader& req(const char* key, T& out) {
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + std::string(key) + "'");
        return opt(key, out);
    }

    /// Marks a key as handled by the caller.
    FieldReader& known(const char* key) {
        seen_.emplace_back(key);
        return *this;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            bool ok = false;
            for (const auto& s : seen_) ok = ok || s == k;
            if (!ok) throw ConfigError(where_ + ": unknown key '" + k + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::vector<std::string> seen_;
};

}  // namespace detail

inline EnvironmentSpec environment_from_json(const json& j, const std::string& where = "env",
                                             EnvironmentSpec e = {}) {
    std::string kind = to_string(e.kind);
    detail::FieldReader r(j, where);
    r.opt("kind", kind)
        .opt("inclination", e.inclination)
        .opt("step_height", e.step_height)
        .opt("step_x", e.step_x)
        .opt("stair_count", e.stair_count)
        .opt("stair_rise", e.stair_rise)
        .opt("stair_run", e.stair_run)
        .opt("deform_drop", e.deform_drop)
        .opt("extent_x", e.extent_x)
        .opt("start_x", e.start_x)
        .opt("start_gap", e.start_gap)
        .opt("memory_cell", e.memory_cell)
        .opt("wipe_length", e.wipe_length)
        .finish();
    e.kind = surface_kind_from_string(kind);
    return e;
}

inline ToolSpec tool_from_json(const json& j, const std::string& where = "tool", ToolSpec t = {}) {
    detail::FieldReader(j, where)
        .opt("name", t.name)
        .opt("handle_length", t.handle_length)
        .opt("tip_stiffness", t.tip_stiffness)
        .opt("tip_rest_length", t.tip_rest_length)
        .opt("tip_width", t.tip_width)
        .opt("friction_mu", t.friction_mu)
        .finish();
    return t;
}

inline PrimitiveParams primitive_params_from_json(const json& j, const std::string& where = "controller",
                                                  PrimitiveParams p = {}) {
    detail::FieldReader(j, where)
        .opt("v_ref", p.v_ref)
        .opt("v_up", p.v_up)
        .opt("v_down", p.v_down)
        .opt("force_threshold", p.force_threshold)
        .opt("target_force", p.target_force)
        .opt("k_adm", p.k_adm)
        .finish();
    return p;
}

inline SensorConfig sensor_config_from_json(const json& j, const std::string& where = "sensors",
                                            SensorConfig s = {}) {
    detail::FieldReader(j, where)
        .opt("grip_force", s.grip_force)
        .opt("tactile_noise", s.tactile_noise)
        .opt("taxel_pitch", s.taxel_pitch)
        .opt("ray_offsets", s.ray_offsets)
        .opt("proximity_max_range", s.proximity_max_range)
        .opt("proximity_noise", s.proximity_noise)
        .finish();
    return s;
}

inline SimConfig sim_config_from_json(const json& j, const std::string& where = "sim", SimConfig s = {}) {
    detail::FieldReader(j, where)
        .opt("force_max", s.force_max)
        .opt("grasp_shift_std", s.grasp_shift_std)
        .finish();
    return s;
}

inline Seq2SeqDims dims_from_json(const json& j, const std::string& where = "dims", Seq2SeqDims d = {}) {
    detail::FieldReader(j, where)
        .opt("past_steps", d.past_steps)
        .opt("future_steps", d.future_steps)
        .opt("hidden", d.hidden)
        .opt("obs", d.obs)
        .opt("act", d.act)
        .finish();
    if (d.past_steps < 1 || d.future_steps < 1 || d.hidden < 1 || d.obs < 1 || d.act < 1)
        throw ConfigError(where + ": all dimensions must be >= 1");
    return d;
}

// ---------------------------------------------------------------------------
// Datasets

inline json frame_to_json(const Frame& f, std::size_t traj) {
    const SensorFrame& s = f.sensors;
    return {{"kind", "frame"},
            {"traj", traj},
            {"t", s.t},
            {"ee_x", s.ee_x},
            {"ee_z", s.ee_z},
            {"tip_x", s.tip_x},
            {"tactile_raw", s.tactile_raw},
            {"tactile_feature", s.tactile_feature},
            {"proximity", s.proximity},
            {"u_x", f.action.u_x},
            {"u_z", f.action.u_z},
            {"f_x", s.wrench.f_x},
            {"f_z", s.wrench.f_z}};
}

inline Frame frame_from_json(const json& j) {
    Frame f;
    SensorFrame& s = f.sensors;
    s.t = j.at("t").get<double>();
    s.ee_x = j.at("ee_x").get<double>();
    s.ee_z = j.at("ee_z").get<double>();
    s.tip_x = j.at("tip_x").get<double>();
    s.tactile_raw = j.at("tactile_raw").get<std::array<double, kTactileRawDim>>();
    s.tactile_feature = j.at("tactile_feature").get<std::array<double, kTactileFeatureDim>>();
    s.proximity = j.at("proximity").get<std::array<double, kProximityDim>>();
    f.action.u_x = j.at("u_x").get<double>();
    f.action.u_z = j.at("u_z").get<double>();
    s.wrench.f_x = j.at("f_x").get<double>();
    s.wrench.f_z = j.at("f_z").get<double>();
    return f;
}

inline json trajectory_header(const Trajectory& t, std::size_t index) {
    return {{"kind", "trajectory"},
            {"index", index},
            {"label", t.meta.label},
            {"seed", t.meta.seed},
            {"grasp_shift", t.meta.grasp_shift},
            {"env", to_json(t.meta.env)},
            {"tool", to_json(t.meta.tool)},
            {"frames", t.frames.size()}};
}

inline std::string dataset_to_jsonl(const Dataset& d) {
    std::string out;
    json head{{"kind", "dataset"},
              {"format", kDatasetFormat},
              {"version", kFormatVersion},
              {"trajectories", d.trajectories.size()},
              {"provenance", d.provenance.empty() ? json::object() : json::parse(d.provenance)}};
    out += head.dump() + "\n";
    for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
        const Trajectory& t = d.trajectories[i];
        out += trajectory_header(t, i).dump() + "\n";
        for (const Frame& f : t.frames) out += frame_to_json(f, i).dump() + "\n";
    }
    return out;
}

inline Dataset dataset_from_jsonl(const std::string& text, const std::string& where = "dataset") {
    Dataset d;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::size_t expected = 0;
    bool have_header = false;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const json j = json::parse(line);
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "dataset") {
                if (j.at("format").get<std::string>() != kDatasetFormat)
                    throw InputError("not a dataset file");
                expected = j.at("trajectories").get<std::size_t>();
                const json& prov = j.at("provenance");
                d.provenance = prov.empty() ? std::string{} : prov.dump();
                have_header = true;
            } else if (kind == "trajectory") {
                Trajectory t;
                t.meta.label = j.at("label").get<std::string>();
                t.meta.seed = j.at("seed").get<std::uint64_t>();
                t.meta.grasp_shift = j.at("grasp_shift").get<double>();
                t.meta.env = environment_from_json(j.at("env"));
                t.meta.tool = tool_from_json(j.at("tool"));
                t.frames.reserve(j.at("frames").get<std::size_t>());
                d.trajectories.push_back(std::move(t));
            } else if (kind == "frame") {
                if (d.trajectories.empty() || j.at("traj").get<std::size_t>() != d.trajectories.size() - 1)
                    throw InputError("frame outside its trajectory block");
                d.trajectories.back().frames.push_back(frame_from_json(j));
            } else {
                throw InputError("unknown record kind '" + kind + "'");
            }
        }
    } catch (const json::exception& e) {
        throw InputError(where + ": line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(where + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) throw InputError(where + ": missing dataset header");
    if (d.trajectories.size() != expected)
        throw InputError(where + ": header announces " + std::to_string(expected) + " trajectories, found " +
                         std::to_string(d.trajectories.size()));
    return d;
}

// ---------------------------------------------------------------------------
// Normalisation stats

inline json stats_to_json(const NormalizationStats& s) {
    json ch = json::array();
    const auto names = normalization_channel_names();
    for (int i = 0; i < s.channels(); ++i)
        ch.push_back({{"name", names.at(static_cast<std::size_t>(i))}, {"min", s.min[i]}, {"max", s.max[i]}});
    return {{"format", kStatsFormat}, {"version", kFormatVersion}, {"range", {kNormLo, kNormHi}}, {"channels", ch}};
}

inline NormalizationStats stats_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != kStatsFormat) throw InputError("not a normalization file");
        const json& ch = j.at("channels");
        if (ch.size() != static_cast<std::size_t>(kNormChannels))
            throw InputError("normalization file has " + std::to_string(ch.size()) + " channels, expected " +
                             std::to_string(kNormChannels));
        const auto names = normalization_channel_names();
        NormalizationStats s;
        s.min.resize(kNormChannels);
        s.max.resize(kNormChannels);
        for (int i = 0; i < kNormChannels; ++i) {
            const json& c = ch[static_cast<std::size_t>(i)];
            if (c.at("name").get<std::string>() != names[static_cast<std::size_t>(i)])
                throw InputError("normalization channel " + std::to_string(i) + " is not '" +
                                 names[static_cast<std::size_t>(i)] + "'");
            s.min[i] = c.at("min").get<double>();
            s.max[i] = c.at("max").get<double>();
            if (s.max[i] < s.min[i]) throw InputError("normalization channel with max < min");
        }
        return s;
    } catch (const json::exception& e) {
        throw InputError(std::string("normalization file: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Parameters

namespace detail {

template <class M>
json matrix_to_json(const M& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

template <class M>
void matrix_from_json(const json& j, M& m, const std::string& where) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    if (rows != m.rows() || cols != m.cols())
        throw InputError(where + ": shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " does not match dims");
    const auto& data = j.at("data");
    if (data.size() != static_cast<std::size_t>(rows * cols)) throw InputError(where + ": wrong element count");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
}

template <class P, class F>
void for_each_named_tensor(P& p, F&& f) {
    f(ParamGroup::Encoder, "input_weights", p.encoder.input_weights);
    f(ParamGroup::Encoder, "recurrent_weights", p.encoder.recurrent_weights);
    f(ParamGroup::Encoder, "bias", p.encoder.bias);
    f(ParamGroup::EncoderHead, "weights", p.encoder_head.weights);
    f(ParamGroup::EncoderHead, "bias", p.encoder_head.bias);
    f(ParamGroup::Decoder, "input_weights", p.decoder.input_weights);
    f(ParamGroup::Decoder, "recurrent_weights", p.decoder.recurrent_weights);
    f(ParamGroup::Decoder, "bias", p.decoder.bias);
    f(ParamGroup::DecoderHead, "weights", p.decoder_head.weights);
    f(ParamGroup::DecoderHead, "bias", p.decoder_head.bias);
}

}  // namespace detail

/// `meta` carries provenance (config hash, dataset hash, training config).
inline json params_to_json(const Seq2SeqParams& p, const std::string& stats_sha256, const json& meta = json::object()) {
    json groups = json::object();
    detail::for_each_named_tensor(p, [&](ParamGroup g, const char* name, const auto& m) {
        groups[group_name(g)][name] = detail::matrix_to_json(m);
    });
    return {{"format", kParamsFormat},
            {"version", kFormatVersion},
            {"dims", to_json(p.dims)},
            {"stats_sha256", stats_sha256},
            {"groups", groups},
            {"meta", meta}};
}

struct LoadedParams {
    Seq2SeqParams params;
    std::string stats_sha256;
    json meta;
};

inline LoadedParams params_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != kParamsFormat) throw InputError("not a parameter file");
        if (j.at("version").get<int>() != kFormatVersion) throw InputError("unsupported parameter file version");
        LoadedParams out;
        out.params = Seq2SeqParams::zeros(dims_from_json(j.at("dims")));
        const json& groups = j.at("groups");
        detail::for_each_named_tensor(out.params, [&](ParamGroup g, const char* name, auto& m) {
            detail::matrix_from_json(groups.at(group_name(g)).at(name), m,
                                     std::string(group_name(g)) + "." + name);
        });
        out.stats_sha256 = j.at("stats_sha256").get<std::string>();
        out.meta = j.value("meta", json::object());
        if (!params_finite(out.params)) throw InputError("parameter file holds non-finite values");
        return out;
    } catch (const json::exception& e) {
        throw InputError(std::string("parameter file: ") + e.what());
    }
}

inline std::string params_to_string(const Seq2SeqParams& p, const std::string& stats_sha256,
                                    const json& meta = json::object()) {
    return params_to_json(p, stats_sha256, meta).dump() + "\n";
}

inline std::string stats_to_string(const NormalizationStats& s) { return stats_to_json(s).dump(2) + "\n"; }

}  // namespace toolskill
