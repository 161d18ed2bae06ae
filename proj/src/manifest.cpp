// SPDX-License-Identifier: Apache-2.0
#include "marppg/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "marppg/errors.hpp"

namespace fs = std::filesystem;

namespace marppg {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ValueError("manifest: unknown split '" + name + "'");
}

std::vector<std::string> DatasetManifest::paths(Split s) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.split == s) out.push_back(resolve(e.path));
    return out;
}

std::string DatasetManifest::resolve(const std::string& rel_path) const {
    fs::path p(rel_path);
    if (p.is_absolute() || base_dir.empty()) return rel_path;
    return (fs::path(base_dir) / p).string();
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "version=" << manifest.version << "\n";
    out << "fs=" << manifest.fs << "\n";
    out << "dims=" << manifest.t << "x" << manifest.h << "x" << manifest.w << "x" << manifest.c
        << "\n";
    for (const auto& e : manifest.entries) {
        out << split_name(e.split) << "\t" << e.path << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);

    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();

    std::string line;
    int line_no = 0;
    bool have_version = false, have_fs = false, have_dims = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto where = [&] { return "manifest " + path + ":" + std::to_string(line_no); };
        if (line.rfind("version=", 0) == 0) {
            m.version = std::stoi(line.substr(8));
            if (m.version != 1) throw ValueError(where() + ": unsupported version");
            have_version = true;
        } else if (line.rfind("fs=", 0) == 0) {
            m.fs = std::stod(line.substr(3));
            if (!(m.fs > 0.0)) throw ValueError(where() + ": fs must be positive");
            have_fs = true;
        } else if (line.rfind("dims=", 0) == 0) {
            char x1, x2, x3;
            std::istringstream ds(line.substr(5));
            if (!(ds >> m.t >> x1 >> m.h >> x2 >> m.w >> x3 >> m.c) || x1 != 'x' || x2 != 'x' ||
                x3 != 'x') {
                throw ValueError(where() + ": malformed dims, expected TxHxWxC");
            }
            have_dims = true;
        } else {
            const auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw ValueError(where() + ": expected 'split<TAB>path'");
            }
            m.entries.push_back({split_from_name(line.substr(0, tab)), line.substr(tab + 1)});
        }
    }
    if (!have_version || !have_fs || !have_dims) {
        throw ValueError("manifest " + path + ": missing version/fs/dims header");
    }

    std::vector<std::string> problems;
    for (const auto& e : m.entries) {
        const std::string full = m.resolve(e.path);
        if (!fs::exists(full)) {
            problems.push_back("missing file: " + full);
            continue;
        }
        try {
            const ChunkHeader hdr = read_chunk_header(full);
            if (hdr.t != m.t || hdr.h != m.h || hdr.w != m.w || hdr.c != m.c) {
                problems.push_back("inconsistent dims in " + full);
            }
            if (std::fabs(static_cast<double>(hdr.fs) - m.fs) > 1e-6) {
                problems.push_back("inconsistent sampling rate in " + full);
            }
        } catch (const Error& err) {
            problems.push_back(full + ": " + err.what());
        }
    }
    if (!problems.empty()) {
        std::string msg = "manifest " + path + " failed validation:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ValueError(msg);
    }
    return m;
}

std::vector<VideoChunk> load_split(const DatasetManifest& manifest, Split split) {
    std::vector<VideoChunk> out;
    for (const auto& p : manifest.paths(split)) out.push_back(read_chunk(p));
    return out;
}

} // namespace marppg
