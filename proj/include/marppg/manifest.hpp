// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "marppg/chunk.hpp"

namespace marppg {

enum class Split { train, val, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
    Split split;
    std::string path; // relative to the manifest file's directory
};

/// Line-oriented dataset index: header lines `version=1`, `fs=...`,
/// `dims=TxHxWxC`, then one `split<TAB>path` row per chunk file.
struct DatasetManifest {
    int version = 1;
    double fs = 30.0;
    int t = 0, h = 0, w = 0, c = 0;
    std::vector<ManifestEntry> entries;
    std::string base_dir; // set on load; resolves relative entry paths

    std::vector<std::string> paths(Split s) const;
    std::string resolve(const std::string& rel_path) const;
};

void save_manifest(const std::string& path, const DatasetManifest& manifest);

/// Parses and validates: every listed file must exist with a readable header,
/// and all dims and sampling rates must agree with the manifest. Throws
/// ValueError listing every offender.
DatasetManifest load_manifest(const std::string& path);

/// Loads every chunk of a split, ordered as listed.
std::vector<VideoChunk> load_split(const DatasetManifest& manifest, Split split);

} // namespace marppg
