#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "qrd/tensor.hpp"

namespace qrd::ckpt {

// Little-endian scalar and tensor-buffer helpers for checkpoint files.

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("checkpoint truncated");
    return v;
}

inline void write_magic(std::ofstream& out, const std::string& magic) {
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::ifstream& in, const std::string& magic) {
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (!in || got != magic)
        throw std::runtime_error("checkpoint magic mismatch (expected " + magic + ")");
}

inline void write_tensor(std::ofstream& out, const Tensor& t) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_pod<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline void read_tensor_into(std::ifstream& in, Tensor& t) {
    auto rank = read_pod<std::uint32_t>(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = read_pod<std::int32_t>(in);
    if (shape != t.shape())
        throw std::runtime_error("checkpoint tensor shape mismatch: stored " + shape_str(shape) +
                                 " vs expected " + shape_str(t.shape()));
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated in tensor payload");
}

}  // namespace qrd::ckpt
