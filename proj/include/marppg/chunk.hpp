// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace marppg {

/// A block of T consecutive video frames plus the aligned ground-truth PPG
/// trace. Frames are (T,H,W,C) row-major float32 in [0,1].
struct VideoChunk {
    int t = 0, h = 0, w = 0, c = 0;
    float fs = 30.0f;
    std::vector<float> frames;
    std::vector<float> ppg;
    std::string source_id;

    std::size_t frame_count() const { return static_cast<std::size_t>(t); }
    std::size_t frame_elems() const {
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
               static_cast<std::size_t>(c);
    }
    /// Throws ValueError on inconsistent sizes, non-finite or out-of-range values.
    void validate() const;
};

/// Header of a chunk file, readable without loading the payload.
struct ChunkHeader {
    std::uint32_t version = 0;
    int t = 0, h = 0, w = 0, c = 0;
    float fs = 0.0f;
};

// Chunk file format, little-endian:
//   magic "MARC", u32 version, u32 T, u32 H, u32 W, u32 C, f32 fs,
//   T*H*W*C f32 frame payload (row-major), T f32 PPG samples.
void write_chunk(const std::string& path, const VideoChunk& chunk);
VideoChunk read_chunk(const std::string& path);

/// Parse from an in-memory buffer (used by file readers and corruption tests).
/// Throws ParseError naming the byte offset of the first problem.
VideoChunk parse_chunk(const std::uint8_t* bytes, std::size_t size, const std::string& source_id);
ChunkHeader parse_chunk_header(const std::uint8_t* bytes, std::size_t size);
ChunkHeader read_chunk_header(const std::string& path);

std::vector<std::uint8_t> serialize_chunk(const VideoChunk& chunk);

} // namespace marppg
