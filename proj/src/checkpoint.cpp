// SPDX-License-Identifier: Apache-2.0
#include "marppg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "marppg/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace marppg::nn {

namespace {

constexpr char kMagic[4] = {'M', 'A', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, std::size_t& offset, const char* what) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError(std::string("checkpoint: truncated while reading ") + what, offset);
    offset += sizeof(T);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put(out, static_cast<std::uint32_t>(t->rank()));
        for (int d : t->shape) put(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(8 * t->data.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::pair<std::string, TensorPtr>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::size_t offset = 0;

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("not a MARW checkpoint (bad magic)", 0);
    }
    offset = 4;
    const auto version = get<std::uint32_t>(in, offset, "version");
    if (version != kVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const auto count = get<std::uint32_t>(in, offset, "tensor count");
    if (count > (1u << 20)) throw ParseError("implausible tensor count", 8);

    std::vector<std::pair<std::string, TensorPtr>> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = get<std::uint32_t>(in, offset, "name length");
        if (name_len > (1u << 16)) throw ParseError("implausible name length", offset - 4);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw ParseError("checkpoint: truncated while reading name", offset);
        offset += name_len;
        const auto rank = get<std::uint32_t>(in, offset, "rank");
        if (rank > 8) throw ParseError("implausible tensor rank", offset - 4);
        std::vector<int> shape;
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto dim = get<std::uint64_t>(in, offset, "dim");
            if (dim < 1 || dim > (1u << 24)) throw ParseError("implausible dim", offset - 8);
            shape.push_back(static_cast<int>(dim));
            numel *= static_cast<std::int64_t>(dim);
            if (numel > (1ll << 33)) throw ParseError("implausible tensor size", offset - 8);
        }
        std::vector<double> data(static_cast<std::size_t>(numel));
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(8 * data.size()));
        if (!in) throw ParseError("checkpoint: truncated tensor payload", offset);
        offset += 8 * data.size();
        out.emplace_back(std::move(name), Tensor::make(std::move(shape), std::move(data)));
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
        throw ParseError("checkpoint: trailing bytes after last tensor", offset);
    }
    return out;
}

void load_checkpoint_into(const std::string& path,
                          const std::vector<std::pair<std::string, TensorPtr>>& tensors) {
    auto loaded = load_checkpoint(path);
    if (loaded.size() != tensors.size()) {
        throw ValueError("checkpoint " + path + ": expected " + std::to_string(tensors.size()) +
                         " tensors, found " + std::to_string(loaded.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& [want_name, dst] = tensors[i];
        const auto& [got_name, src] = loaded[i];
        if (want_name != got_name) {
            throw ValueError("checkpoint " + path + ": tensor " + std::to_string(i) + " is '" +
                             got_name + "', expected '" + want_name + "'");
        }
        if (src->shape != dst->shape) {
            throw ValueError("checkpoint " + path + ": shape mismatch for '" + want_name + "': " +
                             shape_str(src->shape) + " vs " + shape_str(dst->shape));
        }
        dst->data = src->data;
    }
}

} // namespace marppg::nn
