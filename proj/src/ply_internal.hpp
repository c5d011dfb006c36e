#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <vector>

namespace sdfsplat::detail {

struct PlyProperty {
    std::string name;
    std::string type;  ///< float, double, uchar, int, ...
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;  ///< scalar properties only
    std::size_t stride = 0;
    bool has_list = false;

    const PlyProperty* find(const std::string& name) const;
};

struct PlyHeader {
    std::vector<PlyElement> elements;
};

/// Parses a binary little-endian header; the stream is left at the first data byte.
/// Throws FormatError on anything else.
PlyHeader read_ply_header(std::istream& in, const std::string& source);

/// Reads a scalar property of any numeric type as double.
double read_ply_scalar(const unsigned char* record, const PlyProperty& prop);

}  // namespace sdfsplat::detail
