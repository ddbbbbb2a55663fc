#pragma once

// Parameter checkpoint container:
//   "GDK1"
//   repeated until EOF:
//     u32 name_length, name bytes, u32 rank, u32 extents[rank], f32 values[prod(extents)]
// All integers and floats little-endian.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gdk/tensor.hpp"

namespace gdk {

struct NamedTensor {
    std::string name;
    Tensor value;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Linear lookup by name; nullptr when absent.
const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace gdk
