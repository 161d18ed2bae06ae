// SPDX-License-Identifier: Apache-2.0
#include "marppg/chunk.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "marppg/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "chunk format I/O assumes a little-endian host");

namespace marppg {

namespace {

constexpr char kMagic[4] = {'M', 'A', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 4 + 4 * 4 + 4; // magic, version, dims, fs
constexpr std::uint32_t kMaxDim = 1u << 20;

template <typename T>
void append(std::vector<std::uint8_t>& out, T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_at(const std::uint8_t* bytes, std::size_t size, std::size_t offset, const char* what) {
    if (offset + sizeof(T) > size) {
        throw ParseError(std::string("chunk: truncated while reading ") + what, offset);
    }
    T v;
    std::memcpy(&v, bytes + offset, sizeof(T));
    return v;
}

} // namespace

void VideoChunk::validate() const {
    if (t < 1 || h < 1 || w < 1 || c < 1) {
        throw ValueError("chunk: dims must be positive");
    }
    if (!(fs > 0.0f) || !std::isfinite(fs)) {
        throw ValueError("chunk: sampling rate must be positive and finite");
    }
    if (frames.size() != frame_count() * frame_elems()) {
        throw ValueError("chunk: frame buffer size does not match dims");
    }
    if (ppg.size() != frame_count()) {
        throw ValueError("chunk: ppg length does not match frame count");
    }
    for (float v : frames) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            throw ValueError("chunk: frame value outside [0,1]");
        }
    }
    for (float v : ppg) {
        if (!std::isfinite(v)) throw ValueError("chunk: non-finite ppg value");
    }
}

std::vector<std::uint8_t> serialize_chunk(const VideoChunk& chunk) {
    chunk.validate();
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + 4 * (chunk.frames.size() + chunk.ppg.size()));
    out.insert(out.end(), kMagic, kMagic + 4);
    append(out, kVersion);
    append(out, static_cast<std::uint32_t>(chunk.t));
    append(out, static_cast<std::uint32_t>(chunk.h));
    append(out, static_cast<std::uint32_t>(chunk.w));
    append(out, static_cast<std::uint32_t>(chunk.c));
    append(out, chunk.fs);
    const auto* fb = reinterpret_cast<const std::uint8_t*>(chunk.frames.data());
    out.insert(out.end(), fb, fb + 4 * chunk.frames.size());
    const auto* pb = reinterpret_cast<const std::uint8_t*>(chunk.ppg.data());
    out.insert(out.end(), pb, pb + 4 * chunk.ppg.size());
    return out;
}

ChunkHeader parse_chunk_header(const std::uint8_t* bytes, std::size_t size) {
    if (size < 4 || std::memcmp(bytes, kMagic, 4) != 0) {
        throw ParseError("not a MARC file (bad magic)", 0);
    }
    ChunkHeader hdr;
    hdr.version = read_at<std::uint32_t>(bytes, size, 4, "version");
    if (hdr.version != kVersion) {
        throw ParseError("unsupported MARC version " + std::to_string(hdr.version), 4);
    }
    const std::uint32_t dims[4] = {
        read_at<std::uint32_t>(bytes, size, 8, "T"),
        read_at<std::uint32_t>(bytes, size, 12, "H"),
        read_at<std::uint32_t>(bytes, size, 16, "W"),
        read_at<std::uint32_t>(bytes, size, 20, "C"),
    };
    for (int i = 0; i < 4; ++i) {
        if (dims[i] < 1 || dims[i] > kMaxDim) {
            throw ParseError("chunk dimension out of range: " + std::to_string(dims[i]),
                             8 + 4 * static_cast<std::size_t>(i));
        }
    }
    hdr.t = static_cast<int>(dims[0]);
    hdr.h = static_cast<int>(dims[1]);
    hdr.w = static_cast<int>(dims[2]);
    hdr.c = static_cast<int>(dims[3]);
    hdr.fs = read_at<float>(bytes, size, 24, "fs");
    if (!std::isfinite(hdr.fs) || hdr.fs <= 0.0f) {
        throw ParseError("invalid sampling rate", 24);
    }
    return hdr;
}

VideoChunk parse_chunk(const std::uint8_t* bytes, std::size_t size,
                       const std::string& source_id) {
    const ChunkHeader hdr = parse_chunk_header(bytes, size);
    // stepwise product guard: dims are individually bounded but their product
    // must not wrap before the size comparison
    constexpr std::uint64_t kMaxVals = 1ull << 40;
    std::uint64_t n_frame_vals = static_cast<std::uint64_t>(hdr.t);
    for (const int d : {hdr.h, hdr.w, hdr.c}) {
        n_frame_vals *= static_cast<std::uint64_t>(d);
        if (n_frame_vals > kMaxVals) {
            throw ParseError("chunk: dimensions imply an implausible payload size", 8);
        }
    }
    const std::uint64_t expected = kHeaderSize + 4 * (n_frame_vals + static_cast<std::uint64_t>(hdr.t));
    if (size < expected) {
        throw ParseError("chunk: file truncated, expected " + std::to_string(expected) +
                             " bytes, have " + std::to_string(size),
                         size);
    }
    if (size > expected) {
        throw ParseError("chunk: trailing bytes after payload", expected);
    }

    VideoChunk chunk;
    chunk.t = hdr.t;
    chunk.h = hdr.h;
    chunk.w = hdr.w;
    chunk.c = hdr.c;
    chunk.fs = hdr.fs;
    chunk.source_id = source_id;
    chunk.frames.resize(n_frame_vals);
    std::memcpy(chunk.frames.data(), bytes + kHeaderSize, 4 * n_frame_vals);
    chunk.ppg.resize(static_cast<std::size_t>(hdr.t));
    std::memcpy(chunk.ppg.data(), bytes + kHeaderSize + 4 * n_frame_vals,
                4 * static_cast<std::size_t>(hdr.t));

    for (std::size_t i = 0; i < chunk.frames.size(); ++i) {
        const float v = chunk.frames[i];
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            throw ParseError("chunk: frame value outside [0,1]", kHeaderSize + 4 * i);
        }
    }
    for (std::size_t i = 0; i < chunk.ppg.size(); ++i) {
        if (!std::isfinite(chunk.ppg[i])) {
            throw ParseError("chunk: non-finite ppg value",
                             kHeaderSize + 4 * (n_frame_vals + i));
        }
    }
    return chunk;
}

void write_chunk(const std::string& path, const VideoChunk& chunk) {
    const auto bytes = serialize_chunk(chunk);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open: " + path);
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("read failed: " + path);
    return bytes;
}

} // namespace

VideoChunk read_chunk(const std::string& path) {
    const auto bytes = read_file(path);
    return parse_chunk(bytes.data(), bytes.size(), std::filesystem::path(path).stem().string());
}

ChunkHeader read_chunk_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::uint8_t bytes[kHeaderSize];
    in.read(reinterpret_cast<char*>(bytes), kHeaderSize);
    const auto got = static_cast<std::size_t>(in.gcount());
    return parse_chunk_header(bytes, got);
}

} // namespace marppg
