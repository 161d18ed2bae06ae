// SPDX-License-Identifier: Apache-2.0
#include "marppg/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "marppg/csvio.hpp"
#include "marppg/errors.hpp"

namespace marppg {

namespace {

struct FieldRef {
    const char* key;
    std::variant<int*, double*, std::string*, std::uint64_t*> ref;
};

std::vector<FieldRef> fields(RunConfig& c) {
    return {
        {"seed", &c.seed},
        {"out_dir", &c.out_dir},
        {"manifest", &c.manifest},
        {"checkpoint", &c.checkpoint},
        {"model.chunk_len", &c.model_chunk_len},
        {"model.frame_size", &c.model_frame_size},
        {"model.in_channels", &c.model_in_channels},
        {"model.enc_channels", &c.model_enc_channels},
        {"train.alpha", &c.train_alpha},
        {"train.beta", &c.train_beta},
        {"train.mask_size", &c.train_mask_size},
        {"train.mask_fill", &c.train_mask_fill},
        {"train.batch_size", &c.train_batch_size},
        {"train.epochs", &c.train_epochs},
        {"train.max_lr", &c.train_max_lr},
        {"train.warmup_fraction", &c.train_warmup_fraction},
        {"train.start_div", &c.train_start_div},
        {"train.final_div", &c.train_final_div},
        {"synth.n_train", &c.synth_n_train},
        {"synth.n_val", &c.synth_n_val},
        {"synth.n_test", &c.synth_n_test},
        {"synth.fs", &c.synth_fs},
        {"synth.hr_lo_bpm", &c.synth_hr_lo_bpm},
        {"synth.hr_hi_bpm", &c.synth_hr_hi_bpm},
        {"synth.harmonic", &c.synth_harmonic},
        {"synth.pulse_amp", &c.synth_pulse_amp},
        {"synth.noise_sigma", &c.synth_noise_sigma},
        {"synth.drift_amp", &c.synth_drift_amp},
        {"synth.motion_lo_px", &c.synth_motion_lo_px},
        {"synth.motion_hi_px", &c.synth_motion_hi_px},
        {"synth.ellipse_ry", &c.synth_ellipse_ry},
        {"synth.ellipse_rx", &c.synth_ellipse_rx},
        {"signal.band_lo_hz", &c.signal_band_lo_hz},
        {"signal.band_hi_hz", &c.signal_band_hi_hz},
        {"signal.detrend_lambda", &c.signal_detrend_lambda},
    };
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out;
    in >> out;
    if (!in || !(in >> std::ws).eof()) {
        throw ValueError("config: bad value '" + value + "' for key '" + key + "'");
    }
    return out;
}

} // namespace

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.chunk_len = model_chunk_len;
    m.frame_h = model_frame_size;
    m.frame_w = model_frame_size;
    m.in_channels = model_in_channels;
    m.enc_channels = model_enc_channels;
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.alpha = train_alpha;
    t.beta = train_beta;
    t.chunk_len = model_chunk_len;
    t.mask_size = train_mask_size;
    t.batch_size = train_batch_size;
    t.epochs = train_epochs;
    t.max_lr = train_max_lr;
    t.seed = seed;
    t.mask_fill = train_mask_fill;
    t.warmup_fraction = train_warmup_fraction;
    t.start_div = train_start_div;
    t.final_div = train_final_div;
    return t;
}

SynthConfig RunConfig::synth_config() const {
    SynthConfig s;
    s.t = model_chunk_len;
    s.h = model_frame_size;
    s.w = model_frame_size;
    s.c = model_in_channels;
    s.fs = synth_fs;
    s.hr_lo_bpm = synth_hr_lo_bpm;
    s.hr_hi_bpm = synth_hr_hi_bpm;
    s.harmonic = synth_harmonic;
    s.pulse_amp = synth_pulse_amp;
    s.noise_sigma = synth_noise_sigma;
    s.drift_amp = synth_drift_amp;
    s.motion_lo_px = synth_motion_lo_px;
    s.motion_hi_px = synth_motion_hi_px;
    s.ellipse_ry = synth_ellipse_ry;
    s.ellipse_rx = synth_ellipse_rx;
    s.seed = seed;
    return s;
}

std::string RunConfig::checkpoint_path() const {
    if (!checkpoint.empty()) return checkpoint;
    return (std::filesystem::path(out_dir) / "model.marw").string();
}

void RunConfig::set(const std::string& key, const std::string& value) {
    for (auto& f : fields(*this)) {
        if (key != f.key) continue;
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    *p = value;
                } else {
                    *p = parse_number<T>(key, value);
                }
            },
            f.ref);
        return;
    }
    throw ValueError("config: unknown key '" + key + "'");
}

std::string RunConfig::serialize() const {
    std::ostringstream out;
    for (auto& f : fields(const_cast<RunConfig&>(*this))) {
        out << f.key << " = ";
        std::visit(
            [&out](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    out << *p;
                } else if constexpr (std::is_same_v<T, double>) {
                    out << format_g17(*p);
                } else {
                    out << *p;
                }
            },
            f.ref);
        out << "\n";
    }
    return out.str();
}

RunConfig RunConfig::parse_string(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValueError("config line " + std::to_string(line_no) +
                             ": expected 'key = value'");
        }
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << serialize();
    if (!out) throw IoError("write failed: " + path);
}

} // namespace marppg
